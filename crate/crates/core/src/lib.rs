//! Synchronization of output-coupled linear time-varying arrays.
//!
//! The crate covers two closely related arrays, in continuous and discrete time:
//!
//! * the SPSD-coupled consensus array `ẋ = (Γ ⊗ Q_t) x`
//!   (`x⁺ = (I + (Λ - I) ⊗ Q_k) x`), and
//! * identical LTV systems `(C, A)` coupled through their outputs with the
//!   feedback `L(t) = Φ_A(t,0) Φ_Aᵀ(t,0) Cᵀ(t)`.
//!
//! [`graph`] validates interconnections, [`stability`] builds Lyapunov
//! certificates, [`ltv`] handles transition matrices and grammians,
//! [`excitation`] checks persistence and sufficiency of excitation, [`sim`]
//! integrates the arrays and [`scenarios`] packages the canonical examples
//! and counterexamples.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod excitation;
pub mod graph;
pub mod linalg;
pub mod ltv;
pub mod ode;
pub mod scenarios;
pub mod sim;
pub mod stability;

use serde::{Deserialize, Serialize};

pub use error::{Result, SyncError};
pub use graph::{InterconnectionMatrix, LeftFixedVector};
pub use ltv::{LtvPair, MatFn, MatrixFunction};
pub use sim::{SyncReport, Trajectory};
pub use stability::LyapunovCertificate;

/// Continuous or discrete time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

/// Numerical tolerances used throughout the crate.
pub mod tol {
    /// Row-sum and sign tolerance when validating interconnections.
    pub const TAU_ROW: f64 = 1e-9;
    /// Edge threshold: an entry is an edge iff it is strictly above this.
    pub const TAU_EDGE: f64 = 0.0;
    /// Linear-solve, eigenvalue-margin and fact-check tolerance.
    pub const TAU_SOLVE: f64 = 1e-8;
    /// Relative residual allowed for Lyapunov solutions.
    pub const TAU_LYAP: f64 = 1e-8;
    /// Symmetry tolerance for SPSD samples.
    pub const TAU_SYM: f64 = 1e-9;
    /// Eigenvalue floor accepted for SPSD samples.
    pub const SPSD_FLOOR: f64 = -1e-10;
    /// Relative disagreement below which an array counts as synchronized.
    pub const TAU_SYNC: f64 = 1e-6;
    /// Disagreement energy, relative to `V(0)`, below which a per-window
    /// ratio is dominated by round-off and is not judged.
    pub const TAU_V_FLOOR: f64 = 1e-12;
    /// Disagreement, relative to the larger of its initial value and `|x(0)|`,
    /// below which samples are left out of the decay-rate fit.
    pub const TAU_FIT_FLOOR: f64 = 1e-10;
}
