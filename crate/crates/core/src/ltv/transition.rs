//! State transition matrices and the cached forward/backward propagators.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{LtvPair, MatFn, MatrixFunction};
use crate::error::{Result, SyncError};
use crate::ode::{self, Side};
use crate::TimeKind;

fn step_index(t: f64) -> Result<i64> {
    let k = t.round();
    if (t - k).abs() > 1e-9 || !k.is_finite() {
        return Err(SyncError::Unsupported(format!(
            "discrete time must be an integer, got {t}"
        )));
    }
    Ok(k as i64)
}

/// `Φ_A(t1, t0)`.
///
/// Continuous time integrates `Φ' = A(t)Φ` from the identity with fixed RK4
/// steps (backwards when `t1 < t0`). Discrete time forms the ordered product
/// `A(k1-1)⋯A(k0)`, or its inverse when `k1 < k0`.
pub fn transition_matrix(
    a: &dyn MatrixFunction,
    kind: TimeKind,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = a.dims().0;
    match kind {
        TimeKind::Continuous => {
            if !(step > 0.0) {
                return Err(SyncError::NonPositive {
                    name: "step",
                    value: step,
                });
            }
            a.check_domain(t0)?;
            a.check_domain(t1)?;
            let mut f = |t: f64, side: Side, x: &DMatrix<f64>| Ok(a.eval_side(t, side)? * x);
            let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            ode::integrate(
                &mut f,
                t0,
                t1,
                &DMatrix::identity(n, n),
                step,
                &a.breakpoints(lo, hi),
            )
        }
        TimeKind::Discrete => {
            let k0 = step_index(t0)?;
            let k1 = step_index(t1)?;
            let (lo, hi) = if k0 <= k1 { (k0, k1) } else { (k1, k0) };
            let mut prod = DMatrix::identity(n, n);
            if k0 <= k1 {
                for k in lo..hi {
                    prod = a.eval(k as f64)? * prod;
                }
            } else {
                // Φ(k1, k0) = Φ(k0, k1)⁻¹ = A(k1)⁻¹ ⋯ A(k0-1)⁻¹
                for k in lo..hi {
                    let inv = a
                        .eval(k as f64)?
                        .try_inverse()
                        .ok_or(SyncError::SingularStep { k })?;
                    prod *= inv;
                }
            }
            Ok(prod)
        }
    }
}

/// `Φ_A(t, 0)` and `Φ_A(0, t)` tabulated on a uniform grid over
/// `[0, horizon]`; off-grid queries advance from the grid point below.
#[derive(Debug)]
pub struct TransitionCache {
    a: MatFn,
    kind: TimeKind,
    n: usize,
    h: f64,
    horizon: f64,
    nodes: usize,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    /// First discrete index whose backward propagator does not exist.
    singular_from: Option<usize>,
}

impl TransitionCache {
    /// Builds the table. `step` is ignored in discrete time, where the grid is
    /// the integers `0..=horizon`.
    pub fn new(a: MatFn, kind: TimeKind, step: f64, horizon: f64) -> Result<Self> {
        let n = a.dims().0;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SyncError::NonPositive {
                name: "horizon",
                value: horizon,
            });
        }
        let (nodes, h) = match kind {
            TimeKind::Continuous => {
                if !(step > 0.0) {
                    return Err(SyncError::NonPositive {
                        name: "step",
                        value: step,
                    });
                }
                let m = ode::step_count(0.0, horizon, step);
                (m, horizon / m as f64)
            }
            TimeKind::Discrete => (step_index(horizon.floor())? as usize, 1.0),
        };
        a.check_domain(0.0)?;
        let nn = n * n;
        let mut fwd = Vec::with_capacity((nodes + 1) * nn);
        let mut bwd = Vec::with_capacity((nodes + 1) * nn);
        let mut phi = DMatrix::<f64>::identity(n, n);
        let mut psi = DMatrix::<f64>::identity(n, n);
        fwd.extend_from_slice(phi.as_slice());
        bwd.extend_from_slice(psi.as_slice());
        let mut singular_from = None;
        for i in 0..nodes {
            let t = i as f64 * h;
            let t_next = if i + 1 == nodes {
                horizon.min((i + 1) as f64 * h)
            } else {
                (i + 1) as f64 * h
            };
            match kind {
                TimeKind::Continuous => {
                    phi = advance_forward(a.as_ref(), t, t_next, &phi, h)?;
                    psi = advance_backward(a.as_ref(), t, t_next, &psi, h)?;
                }
                TimeKind::Discrete => {
                    let ak = a.eval(t)?;
                    phi = &ak * phi;
                    if singular_from.is_none() {
                        match ak.try_inverse() {
                            Some(inv) => psi *= inv,
                            None => {
                                singular_from = Some(i + 1);
                                psi.fill(f64::NAN);
                            }
                        }
                    }
                }
            }
            fwd.extend_from_slice(phi.as_slice());
            bwd.extend_from_slice(psi.as_slice());
        }
        Ok(TransitionCache {
            a,
            kind,
            n,
            h,
            horizon,
            nodes,
            fwd,
            bwd,
            singular_from,
        })
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid_step(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &MatFn {
        &self.a
    }

    fn node(&self, data: &[f64], i: usize) -> DMatrix<f64> {
        let nn = self.n * self.n;
        DMatrix::from_column_slice(self.n, self.n, &data[i * nn..(i + 1) * nn])
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if t.is_nan() || t < 0.0 || t > self.horizon * (1.0 + 1e-12) {
            return Err(SyncError::OutOfDomain {
                t,
                start: 0.0,
                end: self.horizon,
            });
        }
        if self.kind == TimeKind::Discrete {
            let k = step_index(t)?;
            return Ok((k as usize, 0.0));
        }
        let x = t / self.h;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            return Ok(((nearest as usize).min(self.nodes), 0.0));
        }
        let i = (x.floor() as usize).min(self.nodes);
        Ok((i, t - i as f64 * self.h))
    }

    /// `Φ_A(t, 0)`.
    pub fn phi(&self, t: f64) -> Result<DMatrix<f64>> {
        let (i, rem) = self.locate(t)?;
        let base = self.node(&self.fwd, i);
        if rem == 0.0 {
            return Ok(base);
        }
        let t0 = i as f64 * self.h;
        advance_forward(self.a.as_ref(), t0, t, &base, self.h)
    }

    /// `Φ_A(0, t)`.
    pub fn phi_inv(&self, t: f64) -> Result<DMatrix<f64>> {
        let (i, rem) = self.locate(t)?;
        if let Some(s) = self.singular_from {
            if i >= s {
                return Err(SyncError::SingularStep { k: s as i64 - 1 });
            }
        }
        let base = self.node(&self.bwd, i);
        if rem == 0.0 {
            return Ok(base);
        }
        let t0 = i as f64 * self.h;
        advance_backward(self.a.as_ref(), t0, t, &base, self.h)
    }

    /// `Φ_A(t1, t0) = Φ_A(t1, 0) Φ_A(0, t0)`.
    pub fn transition(&self, t1: f64, t0: f64) -> Result<DMatrix<f64>> {
        Ok(self.phi(t1)? * self.phi_inv(t0)?)
    }
}

fn advance_forward(
    a: &dyn MatrixFunction,
    t0: f64,
    t1: f64,
    phi: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let mut f = |t: f64, side: Side, x: &DMatrix<f64>| Ok(a.eval_side(t, side)? * x);
    ode::integrate(&mut f, t0, t1, phi, h, &a.breakpoints(t0, t1))
}

/// Advances `Ψ = Φ(0, t)`, which satisfies `Ψ' = -Ψ A(t)`.
fn advance_backward(
    a: &dyn MatrixFunction,
    t0: f64,
    t1: f64,
    psi: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let mut f = |t: f64, side: Side, x: &DMatrix<f64>| Ok(-(x * a.eval_side(t, side)?));
    ode::integrate(&mut f, t0, t1, psi, h, &a.breakpoints(t0, t1))
}

/// A pair together with its transition cache.
#[derive(Debug, Clone)]
pub struct CachedPair {
    pair: LtvPair,
    cache: Arc<TransitionCache>,
}

impl CachedPair {
    pub fn new(pair: LtvPair, step: f64, horizon: f64) -> Result<Self> {
        let cache = TransitionCache::new(pair.shared_a(), pair.kind(), step, horizon)?;
        Ok(CachedPair {
            pair,
            cache: Arc::new(cache),
        })
    }

    pub fn pair(&self) -> &LtvPair {
        &self.pair
    }

    pub fn cache(&self) -> &Arc<TransitionCache> {
        &self.cache
    }

    pub fn kind(&self) -> TimeKind {
        self.pair.kind()
    }

    pub fn horizon(&self) -> f64 {
        self.cache.horizon()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv::function::{constant, rotation, zero, Sampled};
    use std::f64::consts::PI;

    fn harmonic_a() -> MatFn {
        constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
    }

    #[test]
    fn zero_generator_gives_identity() {
        let z = zero(3, 3);
        let phi = transition_matrix(z.as_ref(), TimeKind::Continuous, 0.3, 2.0, 1e-2).unwrap();
        assert_eq!(phi, DMatrix::identity(3, 3));
        let id = constant(DMatrix::identity(2, 2));
        let phi = transition_matrix(id.as_ref(), TimeKind::Discrete, 2.0, 7.0, 1.0).unwrap();
        assert_eq!(phi, DMatrix::identity(2, 2));
    }

    #[test]
    fn rotation_full_turn() {
        let a = harmonic_a();
        let phi = transition_matrix(a.as_ref(), TimeKind::Continuous, 0.0, 2.0 * PI, 1e-3).unwrap();
        assert!((phi - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        let phi = transition_matrix(a.as_ref(), TimeKind::Continuous, 0.0, 1.3, 1e-3).unwrap();
        assert!((phi - rotation(1.3)).amax() < 1e-12);
        let back = transition_matrix(a.as_ref(), TimeKind::Continuous, 1.3, 0.0, 1e-3).unwrap();
        assert!((back - rotation(-1.3)).amax() < 1e-12);
    }

    #[test]
    fn discrete_backward_product_and_singular_step() {
        let samples = vec![
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        ];
        let a = Sampled::new(0.0, 1.0, samples.clone()).unwrap();
        let fwd = transition_matrix(&a, TimeKind::Discrete, 0.0, 2.0, 1.0).unwrap();
        assert_eq!(fwd, &samples[1] * &samples[0]);
        let back = transition_matrix(&a, TimeKind::Discrete, 2.0, 0.0, 1.0).unwrap();
        assert!((back * &fwd - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
        assert_eq!(
            transition_matrix(&a, TimeKind::Discrete, 3.0, 1.0, 1.0),
            Err(SyncError::SingularStep { k: 2 })
        );
    }

    #[test]
    fn cache_matches_direct_integration_off_grid() {
        let a = harmonic_a();
        let cache = TransitionCache::new(a.clone(), TimeKind::Continuous, 1e-2, 10.0).unwrap();
        for &t in &[0.0, 0.015, 3.333, 10.0] {
            assert!((cache.phi(t).unwrap() - rotation(t)).amax() < 1e-9);
            assert!((cache.phi_inv(t).unwrap() - rotation(-t)).amax() < 1e-9);
        }
        assert!((cache.transition(7.1, 2.2).unwrap() - rotation(4.9)).amax() < 1e-9);
        assert!(matches!(
            cache.phi(10.5),
            Err(SyncError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn cache_handles_jumps_in_generator() {
        // scalar A: 1 on [0, 0.55), -2 afterwards; Φ(t,0) = exp(∫A)
        let a = Sampled::new(
            0.0,
            0.55,
            vec![
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, -2.0),
            ],
        )
        .unwrap()
        .shared();
        let cache = TransitionCache::new(a, TimeKind::Continuous, 1e-3, 1.1).unwrap();
        let expect = (0.55f64 - 2.0 * 0.45).exp();
        assert!((cache.phi(1.0).unwrap()[(0, 0)] - expect).abs() < 1e-9);
        assert!((cache.phi_inv(1.0).unwrap()[(0, 0)] - 1.0 / expect).abs() < 1e-9);
    }

    #[test]
    fn discrete_cache_flags_singular_steps() {
        let a = Sampled::new(
            0.0,
            1.0,
            vec![
                DMatrix::from_element(1, 1, 2.0),
                DMatrix::from_element(1, 1, 0.0),
                DMatrix::from_element(1, 1, 3.0),
            ],
        )
        .unwrap()
        .shared();
        let cache = TransitionCache::new(a, TimeKind::Discrete, 1.0, 3.0).unwrap();
        assert_eq!(cache.phi(1.0).unwrap()[(0, 0)], 2.0);
        assert_eq!(cache.phi_inv(1.0).unwrap()[(0, 0)], 0.5);
        assert_eq!(cache.phi(3.0).unwrap()[(0, 0)], 0.0);
        assert!(matches!(
            cache.phi_inv(2.0),
            Err(SyncError::SingularStep { .. })
        ));
    }
}
