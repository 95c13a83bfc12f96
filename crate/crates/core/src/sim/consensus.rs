//! Consensus arrays `ẋ = (Γ ⊗ Q_t) x` and `x⁺ = (I + (Λ - I) ⊗ Q_k) x`.

use nalgebra::{DMatrix, DVector};

use super::{CouplingSchedule, SimOptions, Trajectory};
use crate::error::{Result, SyncError};
use crate::linalg::{asymmetry, spectral_norm, sym_eig_range, symmetrize};
use crate::ltv::MatrixFunction;
use crate::ode::{self, Side};
use crate::tol::{SPSD_FLOOR, TAU_SOLVE, TAU_SYM};
use crate::TimeKind;

/// Linear vector field on n×p states, evaluated into a caller buffer.
pub(crate) trait Field {
    fn eval(&mut self, t: f64, side: Side, x: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()>;
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64>;
    /// Validation hook run at piece starts and recorded samples.
    fn check(&mut self, _t: f64) -> Result<()> {
        Ok(())
    }
}

/// Fixed-step RK4 over `[0, t_end]`, split at the field's breakpoints.
pub(crate) fn run_continuous<F: Field>(
    field: &mut F,
    x0: DMatrix<f64>,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(opts.step > 0.0) {
        return Err(SyncError::NonPositive {
            name: "step",
            value: opts.step,
        });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(SyncError::NonPositive {
            name: "horizon",
            value: t_end,
        });
    }
    let (n, p) = x0.shape();
    let mut meta = opts.meta.clone();
    meta.step = opts.step;
    let mut traj = Trajectory::new(p, n, meta);
    field.check(0.0)?;
    traj.push(0.0, DVector::from_column_slice(x0.as_slice()))?;
    let mut x = x0;
    let (mut k1, mut k2, mut k3, mut k4) = (
        DMatrix::zeros(n, p),
        DMatrix::zeros(n, p),
        DMatrix::zeros(n, p),
        DMatrix::zeros(n, p),
    );
    let mut y = DMatrix::zeros(n, p);
    let every = opts.record_every.max(1);
    let mut count = 0usize;
    let mut breaks = field.breakpoints(0.0, t_end);
    breaks.extend(opts.record_at.iter().copied());
    for (a, b) in ode::pieces(0.0, t_end, &breaks) {
        field.check(a)?;
        let m = ode::step_count(a, b, opts.step);
        let h = (b - a) / m as f64;
        for i in 0..m {
            let t = a + i as f64 * h;
            let last = i + 1 == m;
            let end_side = if last { Side::Left } else { Side::Right };
            let t_new = if last { b } else { a + (i + 1) as f64 * h };
            field.eval(t, Side::Right, &x, &mut k1)?;
            y.copy_from(&x);
            axpy(&mut y, 0.5 * h, &k1);
            field.eval(t + 0.5 * h, Side::Right, &y, &mut k2)?;
            y.copy_from(&x);
            axpy(&mut y, 0.5 * h, &k2);
            field.eval(t + 0.5 * h, Side::Right, &y, &mut k3)?;
            y.copy_from(&x);
            axpy(&mut y, h, &k3);
            field.eval(t_new, end_side, &y, &mut k4)?;
            axpy(&mut x, h / 6.0, &k1);
            axpy(&mut x, h / 3.0, &k2);
            axpy(&mut x, h / 3.0, &k3);
            axpy(&mut x, h / 6.0, &k4);
            count += 1;
            if count.is_multiple_of(every)
                || (last && (opts.record_breaks || b == t_end || opts.records_at(b)))
            {
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(SyncError::NonFinite { t: t_new });
                }
                if !last {
                    field.check(t_new)?;
                }
                traj.push(t_new, DVector::from_column_slice(x.as_slice()))?;
            }
        }
    }
    Ok(traj)
}

/// `y += a·x` without allocating.
fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Checks symmetry within τ_sym and the eigenvalue floor.
pub(crate) fn validate_spsd(q: &DMatrix<f64>, t: f64) -> Result<()> {
    let asym = asymmetry(q);
    let scale = q.amax().max(1.0);
    let (min_eig, _) = sym_eig_range(&symmetrize(q));
    if asym > TAU_SYM * scale || min_eig < SPSD_FLOOR * scale || !min_eig.is_finite() {
        return Err(SyncError::NotSpsd { t, min_eig, asym });
    }
    Ok(())
}

pub(crate) fn split_state(x0: &DVector<f64>, p: usize) -> Result<DMatrix<f64>> {
    if p == 0 || !x0.len().is_multiple_of(p) || x0.is_empty() {
        return Err(SyncError::Shape(format!(
            "state of length {} does not split into {p} systems",
            x0.len()
        )));
    }
    Ok(DMatrix::from_column_slice(x0.len() / p, p, x0.as_slice()))
}

fn check_dims(
    coupling: &CouplingSchedule,
    q: &dyn MatrixFunction,
    x0: &DVector<f64>,
    kind: TimeKind,
) -> Result<DMatrix<f64>> {
    if coupling.kind() != kind {
        return Err(SyncError::Shape(format!(
            "interconnection is {:?}, simulation is {kind:?}",
            coupling.kind()
        )));
    }
    let x = split_state(x0, coupling.p())?;
    let n = x.nrows();
    if q.dims() != (n, n) {
        return Err(SyncError::Shape(format!(
            "Q is {:?}, expected {n}×{n}",
            q.dims()
        )));
    }
    Ok(x)
}

struct ConsensusField<'a> {
    coupling: &'a CouplingSchedule,
    transposed: Vec<DMatrix<f64>>,
    q: &'a dyn MatrixFunction,
    tmp: DMatrix<f64>,
}

impl Field for ConsensusField<'_> {
    fn eval(&mut self, t: f64, side: Side, x: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        let q = self.q.eval_side(t, side)?;
        let g = &self.transposed[self.coupling.index_at(t, side)];
        self.tmp.gemm(1.0, &q, x, 0.0);
        out.gemm(1.0, &self.tmp, g, 0.0);
        Ok(())
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b = self.q.breakpoints(t0, t1);
        b.extend(self.coupling.breakpoints(t0, t1));
        b
    }

    fn check(&mut self, t: f64) -> Result<()> {
        validate_spsd(&self.q.eval(t)?, t)
    }
}

/// RK4 trajectory of `ẋ = (Γ_t ⊗ Q_t) x` on `[0, t_end]`.
pub fn simulate_consensus_continuous(
    coupling: &CouplingSchedule,
    q: &dyn MatrixFunction,
    x0: &DVector<f64>,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let x = check_dims(coupling, q, x0, TimeKind::Continuous)?;
    let (n, p) = x.shape();
    let mut field = ConsensusField {
        coupling,
        transposed: coupling
            .matrices()
            .iter()
            .map(|m| m.entries().transpose())
            .collect(),
        q,
        tmp: DMatrix::zeros(n, p),
    };
    run_continuous(&mut field, x, t_end, opts)
}

/// Exact iteration of `x⁺ = (I + (Λ_k - I) ⊗ Q_k) x` for `steps` steps.
pub fn simulate_consensus_discrete(
    coupling: &CouplingSchedule,
    q: &dyn MatrixFunction,
    x0: &DVector<f64>,
    steps: usize,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let mut x = check_dims(coupling, q, x0, TimeKind::Discrete)?;
    let (n, p) = x.shape();
    let couplings: Vec<DMatrix<f64>> = coupling
        .matrices()
        .iter()
        .map(|m| m.coupling().transpose())
        .collect();
    let mut meta = opts.meta.clone();
    meta.step = 1.0;
    let mut traj = Trajectory::new(p, n, meta);
    traj.push(0.0, x0.clone())?;
    let every = opts.record_every.max(1);
    let mut tmp = DMatrix::zeros(n, p);
    for k in 0..steps {
        let t = k as f64;
        let qk = q.eval(t)?;
        validate_spsd(&qk, t)?;
        let norm = spectral_norm(&qk);
        if norm > 1.0 + TAU_SOLVE {
            return Err(SyncError::NormBall { t, norm });
        }
        tmp.gemm(1.0, &qk, &x, 0.0);
        x.gemm(
            1.0,
            &tmp,
            &couplings[coupling.index_at(t, Side::Right)],
            1.0,
        );
        let t_new = (k + 1) as f64;
        let at_break =
            opts.record_breaks && !coupling.breakpoints(t_new - 0.5, t_new + 0.5).is_empty();
        if (k + 1) % every == 0 || k + 1 == steps || at_break || opts.records_at(t_new) {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SyncError::NonFinite { t: t_new });
            }
            traj.push(t_new, DVector::from_column_slice(x.as_slice()))?;
        }
    }
    Ok(traj)
}
