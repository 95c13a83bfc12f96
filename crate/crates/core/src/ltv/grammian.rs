//! Grammian integrand, observability grammian and boundedness scan.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CachedPair, MatFn, MatrixFunction, TransitionCache};
use crate::error::{Result, SyncError};
use crate::linalg::{spectral_norm, sym_eig_range, symmetrize};
use crate::ode::{self, Side};
use crate::TimeKind;

/// Windowed observability grammian.
#[derive(Debug, Clone, PartialEq)]
pub struct GrammianReport {
    pub w: DMatrix<f64>,
    pub window: (f64, f64),
    pub sigma_min: f64,
    pub quadrature_step: f64,
}

/// Empirical bounds `ā ≥ |Φ_A(t1, t2)|` and `c̄ ≥ |C(t)|` on a finite scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub a_bar: f64,
    pub c_bar: f64,
    pub horizon: (f64, f64),
    pub grid: f64,
    /// The propagator norms in the second half of the scan exceed twice
    /// those of the first half.
    pub growth: bool,
}

/// `Φ_Aᵀ(t,0) Cᵀ(t) C(t) Φ_A(t,0)`, formed as `MᵀM` with `M = C(t)Φ_A(t,0)`.
pub fn grammian_integrand(pair: &CachedPair, t: f64) -> Result<DMatrix<f64>> {
    integrand_side(pair.cache(), pair.pair().c(), t, Side::Right)
}

fn integrand_side(cache: &TransitionCache, c: &MatFn, t: f64, side: Side) -> Result<DMatrix<f64>> {
    let m = c.eval_side(t, side)? * cache.phi(t)?;
    Ok(m.transpose() * m)
}

/// The grammian integrand as a matrix function, divided by `scale`.
#[derive(Debug, Clone)]
pub struct GrammianIntegrand {
    cache: Arc<TransitionCache>,
    c: MatFn,
    scale: f64,
}

impl GrammianIntegrand {
    pub fn new(pair: &CachedPair, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(SyncError::NonPositive {
                name: "integrand scale",
                value: scale,
            });
        }
        Ok(GrammianIntegrand {
            cache: Arc::clone(pair.cache()),
            c: Arc::clone(pair.pair().c()),
            scale,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shared(self) -> MatFn {
        Arc::new(self)
    }

    fn sided(&self, t: f64, side: Side) -> DMatrix<f64> {
        let n = self.cache.n();
        match integrand_side(&self.cache, &self.c, t, side) {
            Ok(m) => m / self.scale,
            Err(_) => DMatrix::from_element(n, n, f64::NAN),
        }
    }
}

impl MatrixFunction for GrammianIntegrand {
    fn dims(&self) -> (usize, usize) {
        let n = self.cache.n();
        (n, n)
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, self.cache.horizon())
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        self.sided(t, Side::Right)
    }
    fn value_left(&self, t: f64) -> DMatrix<f64> {
        self.sided(t, Side::Left)
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b = self.cache.a().breakpoints(t0, t1);
        b.extend(self.c.breakpoints(t0, t1));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// `W_o(t0, t1)`: composite Simpson in continuous time, the exact finite sum
/// `Σ_{ℓ=k0}^{k1-1} Φᵀ(ℓ,k0) Cᵀ(ℓ) C(ℓ) Φ(ℓ,k0)` in discrete time.
pub fn observability_grammian(
    pair: &CachedPair,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<GrammianReport> {
    if !(t1 >= t0) {
        return Err(SyncError::BadWindow(t1 - t0));
    }
    let n = pair.pair().n();
    let c = pair.pair().c();
    let (w, qstep) = match pair.kind() {
        TimeKind::Continuous => {
            if !(step > 0.0) {
                return Err(SyncError::NonPositive {
                    name: "quadrature step",
                    value: step,
                });
            }
            let cache = pair.cache();
            let psi0 = cache.phi_inv(t0)?;
            cache.phi(t1)?;
            let mut breaks = pair.pair().breakpoints(t0, t1);
            breaks.dedup();
            let inner = ode::simpson(
                |t, side| integrand_side(cache, c, t, side),
                (n, n),
                t0,
                t1,
                step,
                &breaks,
            )?;
            (psi0.transpose() * inner * psi0, step)
        }
        TimeKind::Discrete => {
            let k0 = t0.round() as i64;
            let k1 = t1.round() as i64;
            let a = pair.pair().a();
            let mut prod = DMatrix::<f64>::identity(n, n);
            let mut w = DMatrix::<f64>::zeros(n, n);
            for l in k0..k1 {
                let m = c.eval(l as f64)? * &prod;
                w += m.transpose() * m;
                prod = a.eval(l as f64)? * prod;
            }
            (w, 1.0)
        }
    };
    let w = symmetrize(&w);
    let (sigma_min, _) = sym_eig_range(&w);
    Ok(GrammianReport {
        w,
        window: (t0, t1),
        sigma_min,
        quadrature_step: qstep,
    })
}

/// Scans `|Φ(t,0)|`, `|Φ(0,t)|` and `|C(t)|` on `0, grid, 2·grid, … ≤ horizon`.
///
/// `ā = max|Φ(t,0)| · max|Φ(0,t)|` bounds `|Φ(t1,t2)| = |Φ(t1,0)Φ(0,t2)|` on
/// the scanned points; both constants are floored at 1. The result is
/// evidence on a finite horizon only.
pub fn check_boundedness(pair: &CachedPair, grid: f64) -> Result<BoundednessReport> {
    let horizon = pair.horizon();
    let grid = match pair.kind() {
        TimeKind::Continuous => grid,
        TimeKind::Discrete => grid.round().max(1.0),
    };
    if !(grid > 0.0) {
        return Err(SyncError::NonPositive {
            name: "grid",
            value: grid,
        });
    }
    let cache = pair.cache();
    let c = pair.pair().c();
    let count = (horizon / grid * (1.0 + 1e-12)).floor() as usize;
    let half = count / 2;
    let (mut f_early, mut f_late, mut b_early, mut b_late) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut c_max = 0.0f64;
    for i in 0..=count {
        let t = (i as f64 * grid).min(horizon);
        let nf = spectral_norm(&cache.phi(t)?);
        let nb = match cache.phi_inv(t) {
            Ok(m) => spectral_norm(&m),
            Err(SyncError::SingularStep { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if i <= half {
            f_early = f_early.max(nf);
            b_early = b_early.max(nb);
        } else {
            f_late = f_late.max(nf);
            b_late = b_late.max(nb);
        }
        if pair.kind() == TimeKind::Continuous || t < horizon {
            c_max = c_max.max(spectral_norm(&c.eval(t)?));
        }
    }
    let f_max = f_early.max(f_late);
    let b_max = b_early.max(b_late);
    let growth = f_late > 2.0 * f_early || b_late > 2.0 * b_early;
    Ok(BoundednessReport {
        a_bar: (f_max * b_max).max(1.0),
        c_bar: c_max.max(1.0),
        horizon: (0.0, horizon),
        grid,
        growth,
    })
}

impl CachedPair {
    pub fn integrand(&self, t: f64) -> Result<DMatrix<f64>> {
        grammian_integrand(self, t)
    }

    pub fn integrand_function(&self, scale: f64) -> Result<MatFn> {
        Ok(GrammianIntegrand::new(self, scale)?.shared())
    }

    pub fn grammian(&self, t0: f64, t1: f64, step: f64) -> Result<GrammianReport> {
        observability_grammian(self, t0, t1, step)
    }

    pub fn boundedness(&self, grid: f64) -> Result<BoundednessReport> {
        check_boundedness(self, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv::function::{constant, zero, Analytic};
    use crate::ltv::LtvPair;
    use std::f64::consts::PI;

    fn harmonic(horizon: f64) -> CachedPair {
        CachedPair::new(LtvPair::harmonic_oscillator(), 1e-3, horizon).unwrap()
    }

    #[test]
    fn harmonic_integrand_is_projection() {
        let hp = harmonic(10.0);
        for &t in &[0.0, 0.4, 2.0, 7.7] {
            let q = hp.integrand(t).unwrap();
            let (s, c) = f64::sin_cos(t);
            let expect = DMatrix::from_row_slice(2, 2, &[s * s, -s * c, -s * c, c * c]);
            assert!((&q - expect).amax() < 1e-10);
            assert!(spectral_norm(&q) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn harmonic_window_is_pi_identity() {
        let hp = harmonic(12.0);
        let rep = observability_grammian(&hp, 1.7, 1.7 + 2.0 * PI, 1e-3).unwrap();
        assert!((rep.w - DMatrix::<f64>::identity(2, 2) * PI).amax() < 1e-6);
        assert!((rep.sigma_min - PI).abs() < 1e-6);
    }

    #[test]
    fn trivial_grammians() {
        let p = LtvPair::new(
            zero(2, 2),
            constant(DMatrix::identity(2, 2)),
            TimeKind::Continuous,
        )
        .unwrap();
        let cp = CachedPair::new(p, 1e-2, 5.0).unwrap();
        let rep = observability_grammian(&cp, 0.0, 3.0, 1e-2).unwrap();
        assert!((rep.w - DMatrix::<f64>::identity(2, 2) * 3.0).amax() < 1e-12);
        assert_eq!(cp.integrand(2.0).unwrap(), DMatrix::identity(2, 2));

        let p = LtvPair::new(
            zero(2, 2),
            constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
            TimeKind::Continuous,
        )
        .unwrap();
        let cp = CachedPair::new(p, 1e-2, 5.0).unwrap();
        let rep = observability_grammian(&cp, 0.0, 3.0, 1e-2).unwrap();
        assert!((rep.w - DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
        assert!(rep.sigma_min.abs() < 1e-12);
    }

    #[test]
    fn discrete_grammian_is_exact_sum() {
        let p = LtvPair::rotation_pair(0.5);
        let cp = CachedPair::new(p.clone(), 1.0, 20.0).unwrap();
        let rep = observability_grammian(&cp, 3.0, 7.0, 1.0).unwrap();
        let mut w = DMatrix::<f64>::zeros(2, 2);
        for l in 3..7 {
            let m = p.c().value(0.0) * crate::ltv::rotation(0.5 * (l - 3) as f64);
            w += m.transpose() * m;
        }
        assert!((rep.w - w).amax() < 1e-14);
    }

    #[test]
    fn boundedness_scans() {
        let hp = harmonic(20.0);
        let r = check_boundedness(&hp, 0.1).unwrap();
        assert!((r.a_bar - 1.0).abs() < 1e-9 && r.c_bar == 1.0 && !r.growth);

        let grow = LtvPair::new(
            constant(DMatrix::identity(1, 1) * 0.1),
            constant(DMatrix::identity(1, 1)),
            TimeKind::Continuous,
        )
        .unwrap();
        let cp = CachedPair::new(grow, 1e-2, 40.0).unwrap();
        let r = check_boundedness(&cp, 0.5).unwrap();
        assert!((r.a_bar - 4f64.exp()).abs() < 1e-6 && r.growth);

        let c = Analytic::new("c", (1, 2), |t: f64| {
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0 + t.sin()])
        })
        .shared();
        let p = LtvPair::new(zero(2, 2), c, TimeKind::Continuous).unwrap();
        let cp = CachedPair::new(p, 1e-2, 10.0).unwrap();
        let r = check_boundedness(&cp, 1e-3).unwrap();
        assert!((r.c_bar - 2.0).abs() < 1e-6);
    }
}
