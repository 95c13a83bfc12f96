//! Simulation of consensus arrays and output-coupled LTV arrays.
//!
//! States are stored as n×p matrices whose columns are the systems, which is
//! the column-major view of the stacked vector `x = [x_1; …; x_p]`. With that
//! layout `(Γ ⊗ Q) x` is `Q X Γᵀ`.

mod consensus;
mod coupled;
mod metrics;
mod trajectory;

pub use consensus::{simulate_consensus_continuous, simulate_consensus_discrete};
pub use coupled::simulate_coupled_ltv;
pub use metrics::{
    auxiliary_transform, consensus_point, contraction_check, sync_metrics, sync_target_ltv,
    ContractionCheck, SyncReport,
};
pub use trajectory::{Trajectory, TrajectoryMeta};

use crate::error::{Result, SyncError};
use crate::graph::InterconnectionMatrix;
use crate::ode::Side;
use crate::TimeKind;

/// A fixed interconnection, or a periodic sequence of interconnections each
/// held for `segment` time units (steps in discrete time).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSchedule {
    segment: f64,
    matrices: Vec<InterconnectionMatrix>,
}

impl CouplingSchedule {
    pub fn fixed(m: InterconnectionMatrix) -> Self {
        CouplingSchedule {
            segment: f64::INFINITY,
            matrices: vec![m],
        }
    }

    pub fn periodic(segment: f64, matrices: Vec<InterconnectionMatrix>) -> Result<Self> {
        if !(segment > 0.0) || !segment.is_finite() {
            return Err(SyncError::NonPositive {
                name: "segment",
                value: segment,
            });
        }
        let first = matrices
            .first()
            .ok_or_else(|| SyncError::Shape("empty schedule".into()))?;
        if matrices
            .iter()
            .any(|m| m.kind() != first.kind() || m.p() != first.p())
        {
            return Err(SyncError::Shape("schedule mixes kinds or sizes".into()));
        }
        Ok(CouplingSchedule { segment, matrices })
    }

    pub fn kind(&self) -> TimeKind {
        self.matrices[0].kind()
    }

    pub fn p(&self) -> usize {
        self.matrices[0].p()
    }

    pub fn is_fixed(&self) -> bool {
        self.matrices.len() == 1
    }

    pub fn matrices(&self) -> &[InterconnectionMatrix] {
        &self.matrices
    }

    pub fn segment(&self) -> f64 {
        self.segment
    }

    pub fn at(&self, t: f64, side: Side) -> &InterconnectionMatrix {
        &self.matrices[self.index_at(t, side)]
    }

    pub fn index_at(&self, t: f64, side: Side) -> usize {
        if self.matrices.len() == 1 {
            return 0;
        }
        let x = t / self.segment;
        let nearest = x.round();
        let x = if (x - nearest).abs() < 1e-9 {
            nearest
        } else {
            x
        };
        let i = match side {
            Side::Right => x.floor(),
            Side::Left => x.ceil() - 1.0,
        };
        let len = self.matrices.len() as i64;
        (i as i64).rem_euclid(len) as usize
    }

    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        if self.matrices.len() == 1 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut i = (t0 / self.segment).floor() as i64 + 1;
        loop {
            let b = i as f64 * self.segment;
            if b >= t1 {
                break;
            }
            if b > t0 {
                out.push(b);
            }
            i += 1;
        }
        out
    }
}

impl From<InterconnectionMatrix> for CouplingSchedule {
    fn from(m: InterconnectionMatrix) -> Self {
        CouplingSchedule::fixed(m)
    }
}

/// Integration and recording settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Largest RK4 step (ignored in discrete time).
    pub step: f64,
    /// Record every k-th step.
    pub record_every: usize,
    /// Also record at every breakpoint of the data.
    pub record_breaks: bool,
    /// Extra times to land on and record (sorted or not).
    pub record_at: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            step: 1e-3,
            record_every: 1,
            record_breaks: true,
            record_at: Vec::new(),
            meta: TrajectoryMeta::default(),
        }
    }
}

impl SimOptions {
    pub fn with_step(step: f64) -> Self {
        SimOptions {
            step,
            ..Default::default()
        }
    }

    /// Adds record times; continuous runs also step exactly onto them.
    pub fn record_at(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.record_at.extend(times);
        self.record_at.sort_by(f64::total_cmp);
        self.record_at.dedup();
        self
    }

    /// Whether `t` is one of the extra record times.
    pub fn records_at(&self, t: f64) -> bool {
        let i = self.record_at.partition_point(|&s| s < t - 1e-9);
        self.record_at
            .get(i)
            .is_some_and(|&s| (s - t).abs() <= 1e-9)
    }

    pub fn every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }
}
