//! Output-coupled LTV arrays `ẋ_i = A x_i + L C Σ_j γ_ij (x_j - x_i)` and their
//! discrete counterpart `x_i⁺ = A x_i + L C Σ_j λ_ij (x_j - x_i)`.

use nalgebra::{DMatrix, DVector};

use super::consensus::{run_continuous, split_state, Field};
use super::{CouplingSchedule, SimOptions, Trajectory};
use crate::error::{Result, SyncError};
use crate::ltv::{LtvPair, MatrixFunction};
use crate::ode::Side;
use crate::TimeKind;

struct CoupledField<'a> {
    coupling: &'a CouplingSchedule,
    transposed: Vec<DMatrix<f64>>,
    pair: &'a LtvPair,
    l: &'a dyn MatrixFunction,
    tmp: DMatrix<f64>,
}

impl Field for CoupledField<'_> {
    fn eval(&mut self, t: f64, side: Side, x: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        let a = self.pair.a().eval_side(t, side)?;
        let lc = self.l.eval_side(t, side)? * self.pair.c().eval_side(t, side)?;
        let g = &self.transposed[self.coupling.index_at(t, side)];
        self.tmp.gemm(1.0, &lc, x, 0.0);
        out.gemm(1.0, &a, x, 0.0);
        out.gemm(1.0, &self.tmp, g, 1.0);
        Ok(())
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b = self.pair.breakpoints(t0, t1);
        b.extend(self.l.breakpoints(t0, t1));
        b.extend(self.coupling.breakpoints(t0, t1));
        b
    }
}

/// Simulates the closed-loop array on `[0, horizon]` (continuous) or for
/// `horizon` steps (discrete).
pub fn simulate_coupled_ltv(
    coupling: &CouplingSchedule,
    pair: &LtvPair,
    l: &dyn MatrixFunction,
    x0: &DVector<f64>,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if coupling.kind() != pair.kind() {
        return Err(SyncError::Shape(format!(
            "interconnection is {:?} but the pair is {:?}",
            coupling.kind(),
            pair.kind()
        )));
    }
    let mut x = split_state(x0, coupling.p())?;
    let (n, p) = x.shape();
    if pair.n() != n {
        return Err(SyncError::Shape(format!(
            "systems have {n} states, pair has {}",
            pair.n()
        )));
    }
    if l.dims() != (n, pair.m()) {
        return Err(SyncError::Shape(format!(
            "L is {:?}, expected {n}×{}",
            l.dims(),
            pair.m()
        )));
    }
    match pair.kind() {
        TimeKind::Continuous => {
            let mut field = CoupledField {
                coupling,
                transposed: coupling
                    .matrices()
                    .iter()
                    .map(|m| m.entries().transpose())
                    .collect(),
                pair,
                l,
                tmp: DMatrix::zeros(n, p),
            };
            run_continuous(&mut field, x, horizon, opts)
        }
        TimeKind::Discrete => {
            let steps = horizon.round() as usize;
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
                let a = pair.a().eval(t)?;
                let lc = l.eval(t)? * pair.c().eval(t)?;
                tmp.gemm(1.0, &lc, &x, 0.0);
                let mut next = &a * &x;
                next.gemm(
                    1.0,
                    &tmp,
                    &couplings[coupling.index_at(t, Side::Right)],
                    1.0,
                );
                x = next;
                if (k + 1) % every == 0 || k + 1 == steps || opts.records_at(t + 1.0) {
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(SyncError::NonFinite { t: t + 1.0 });
                    }
                    traj.push(t + 1.0, DVector::from_column_slice(x.as_slice()))?;
                }
            }
            Ok(traj)
        }
    }
}
