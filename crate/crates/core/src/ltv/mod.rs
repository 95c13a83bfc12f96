//! Linear time-varying pairs `(C, A)`: transition matrices, observability
//! grammians, boundedness scans and the synchronizing feedback laws.

mod feedback;
pub mod function;
mod grammian;
pub mod registry;
mod transition;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use feedback::{feedback_law_continuous, feedback_law_discrete, FeedbackLaw};
pub use function::{
    constant, harmonic_integrand_closed_form, rotation, scaled, zero, Analytic, AngleSchedule,
    Constant, MatFn, MatrixFunction, ProjectionLine, Rotation2d, Sampled, Scaled,
};
pub use grammian::{
    check_boundedness, grammian_integrand, observability_grammian, BoundednessReport,
    GrammianIntegrand, GrammianReport,
};
pub use transition::{transition_matrix, CachedPair, TransitionCache};

use crate::error::{Result, SyncError};
use crate::TimeKind;

/// Default integration step for transition matrices.
pub const DEFAULT_STEP: f64 = 1e-3;

/// A pair `(C, A)` with `A(t)` n×n and `C(t)` m×n.
#[derive(Debug, Clone)]
pub struct LtvPair {
    a: MatFn,
    c: MatFn,
    kind: TimeKind,
}

impl LtvPair {
    pub fn new(a: MatFn, c: MatFn, kind: TimeKind) -> Result<Self> {
        let (ar, ac) = a.dims();
        let (_, cc) = c.dims();
        if ar != ac || ar == 0 {
            return Err(SyncError::Shape(format!(
                "A must be square and nonempty, got {ar}×{ac}"
            )));
        }
        if cc != ar {
            return Err(SyncError::Shape(format!(
                "C has {cc} columns but A is {ar}×{ar}"
            )));
        }
        Ok(LtvPair { a, c, kind })
    }

    /// `A = [[0, 1], [-1, 0]]`, `C = [0, 1]`.
    pub fn harmonic_oscillator() -> Self {
        let a = constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let c = constant(DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
        LtvPair {
            a,
            c,
            kind: TimeKind::Continuous,
        }
    }

    /// Discrete pair with `A` the rotation by `angle` per step and `C = [0, 1]`.
    pub fn rotation_pair(angle: f64) -> Self {
        let a = constant(rotation(angle));
        let c = constant(DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
        LtvPair {
            a,
            c,
            kind: TimeKind::Discrete,
        }
    }

    pub fn a(&self) -> &MatFn {
        &self.a
    }

    pub fn c(&self) -> &MatFn {
        &self.c
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.a.dims().0
    }

    pub fn m(&self) -> usize {
        self.c.dims().0
    }

    /// Breakpoints of either function in `(t0, t1)`, sorted.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b = self.a.breakpoints(t0, t1);
        b.extend(self.c.breakpoints(t0, t1));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub(crate) fn shared_a(&self) -> MatFn {
        Arc::clone(&self.a)
    }
}
