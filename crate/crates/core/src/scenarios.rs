//! Canonical scenarios: the coupled harmonic oscillators, the two consensus
//! counterexamples with their discrete analogues, a discrete rotation array
//! and random consensus runs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SyncError};
use crate::graph::{left_fixed_vector, random_connected, InterconnectionMatrix};
use crate::linalg::{expm, kron, spectral_radius};
use crate::ltv::{
    feedback_law_continuous, feedback_law_discrete, AngleSchedule, CachedPair, LtvPair, MatFn,
    ProjectionLine, Sampled,
};
use crate::sim::{
    consensus_point, simulate_consensus_continuous, simulate_consensus_discrete,
    simulate_coupled_ltv, sync_metrics, sync_target_ltv, CouplingSchedule, SimOptions, SyncReport,
    Trajectory, TrajectoryMeta,
};
use crate::stability::LyapunovCertificate;
use crate::TimeKind;

/// Names accepted by [`by_name`].
pub const SCENARIO_NAMES: [&str; 7] = [
    "harmonic",
    "neg1",
    "neg2",
    "neg1-dt",
    "neg2-dt",
    "rotation-dt",
    "random-consensus",
];

/// Qualitative long-run behaviour of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Synchronize,
    Exponential,
    BoundedNoSync,
    Unbounded,
}

impl Outcome {
    /// Whether an observed outcome satisfies this expectation; exponential
    /// synchronization also counts as synchronization.
    pub fn accepts(self, observed: Outcome) -> bool {
        self == observed || (self == Outcome::Synchronize && observed == Outcome::Exponential)
    }
}

/// Ratio `|x(end)| / |x(0)|` above which a run counts as unbounded.
pub const UNBOUNDED_GROWTH: f64 = 10.0;

/// Classifies a report: unbounded growth first, then synchronization.
pub fn classify(report: &SyncReport) -> Outcome {
    if report.norm_growth > UNBOUNDED_GROWTH || !report.norm_growth.is_finite() {
        Outcome::Unbounded
    } else if report.synchronized {
        match report.rate_estimate {
            Some(r) if r > 0.0 => Outcome::Exponential,
            _ => Outcome::Synchronize,
        }
    } else {
        Outcome::BoundedNoSync
    }
}

/// What is being simulated.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// `ẋ = (Γ_t ⊗ Q_t) x` or its discrete analogue.
    Consensus {
        coupling: CouplingSchedule,
        q: MatFn,
    },
    /// Output-coupled copies of an LTV pair under the synchronizing feedback.
    Coupled {
        coupling: CouplingSchedule,
        pair: LtvPair,
    },
}

impl Dynamics {
    pub fn coupling(&self) -> &CouplingSchedule {
        match self {
            Dynamics::Consensus { coupling, .. } | Dynamics::Coupled { coupling, .. } => coupling,
        }
    }
}

/// A fully specified run with its expected outcome.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: TimeKind,
    pub dynamics: Dynamics,
    pub x0: DVector<f64>,
    /// Final time (continuous) or number of steps (discrete).
    pub horizon: f64,
    pub step: f64,
    pub record_every: usize,
    pub expected: Outcome,
    /// The result the expectation rests on.
    pub basis: &'static str,
    /// Built here because no explicit matrices are available to reproduce.
    pub artifact_construction: bool,
    pub seed: Option<u64>,
    /// One-period propagator for periodic counterexamples.
    pub monodromy: Option<DMatrix<f64>>,
    /// Boundaries of the excitation windows, when the construction has them.
    pub windows: Option<Vec<f64>>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trajectory: Trajectory,
    pub report: SyncReport,
    pub observed: Outcome,
    pub matched: bool,
    pub monodromy_radius: Option<f64>,
}

impl Scenario {
    pub fn p(&self) -> usize {
        self.dynamics.coupling().p()
    }

    pub fn n(&self) -> usize {
        self.x0.len() / self.p()
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            step: self.step,
            record_every: self.record_every,
            record_breaks: true,
            record_at: Vec::new(),
            meta: TrajectoryMeta {
                scenario: self.name.clone(),
                step: self.step,
                seed: self.seed,
            },
        }
    }

    /// Lyapunov certificate of a fixed connected interconnection.
    pub fn certificate(&self) -> Option<LyapunovCertificate> {
        let c = self.dynamics.coupling();
        if !c.is_fixed() {
            return None;
        }
        LyapunovCertificate::for_interconnection(&c.matrices()[0]).ok()
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// Transition cache for a coupled scenario (continuous step or unit steps).
    pub fn cached_pair(&self) -> Result<Option<CachedPair>> {
        match &self.dynamics {
            Dynamics::Coupled { pair, .. } => {
                let horizon = match self.kind {
                    TimeKind::Continuous => self.horizon,
                    TimeKind::Discrete => self.horizon + 1.0,
                };
                Ok(Some(CachedPair::new(pair.clone(), self.step, horizon)?))
            }
            Dynamics::Consensus { .. } => Ok(None),
        }
    }

    /// Integrates the scenario with `opts`; coupled scenarios also return the
    /// transition cache behind their feedback law.
    pub fn simulate(&self, opts: &SimOptions) -> Result<(Trajectory, Option<CachedPair>)> {
        match &self.dynamics {
            Dynamics::Consensus { coupling, q } => {
                let traj = match self.kind {
                    TimeKind::Continuous => simulate_consensus_continuous(
                        coupling,
                        q.as_ref(),
                        &self.x0,
                        self.horizon,
                        opts,
                    )?,
                    TimeKind::Discrete => simulate_consensus_discrete(
                        coupling,
                        q.as_ref(),
                        &self.x0,
                        self.horizon.round() as usize,
                        opts,
                    )?,
                };
                Ok((traj, None))
            }
            Dynamics::Coupled { coupling, pair } => {
                let cp = self.cached_pair()?.expect("coupled scenario has a pair");
                let l: MatFn = match self.kind {
                    TimeKind::Continuous => feedback_law_continuous(&cp)?.shared(),
                    TimeKind::Discrete => {
                        let rep = cp.boundedness(1.0)?;
                        feedback_law_discrete(&cp, &rep)?.shared()
                    }
                };
                let traj =
                    simulate_coupled_ltv(coupling, pair, l.as_ref(), &self.x0, self.horizon, opts)?;
                Ok((traj, Some(cp)))
            }
        }
    }

    /// Disagreement report for a trajectory of this scenario.
    pub fn measure(&self, traj: &Trajectory, cache: Option<&CachedPair>) -> Result<SyncReport> {
        let x0 = &traj.states[0];
        match &self.dynamics {
            Dynamics::Consensus { coupling, .. } => {
                let target = if coupling.is_fixed() && coupling.matrices()[0].is_connected() {
                    consensus_point(&coupling.matrices()[0], x0)?
                } else {
                    DMatrix::from_column_slice(traj.n, traj.p, x0.as_slice()).column_mean()
                };
                sync_metrics(traj, |_| Ok(target.clone()), self.certificate().as_ref())
            }
            Dynamics::Coupled { coupling, .. } => {
                let owned;
                let cp = match cache {
                    Some(c) => c,
                    None => {
                        owned = self.cached_pair()?.expect("coupled scenario has a pair");
                        &owned
                    }
                };
                let r = left_fixed_vector(&coupling.matrices()[0])?;
                sync_metrics(traj, |t| sync_target_ltv(cp.cache(), &r, x0, t), None)
            }
        }
    }

    /// Simulates, measures and classifies.
    pub fn run(&self) -> Result<ScenarioRun> {
        let (trajectory, cache) = self.simulate(&self.options())?;
        let report = self.measure(&trajectory, cache.as_ref())?;
        let observed = classify(&report);
        Ok(ScenarioRun {
            trajectory,
            report,
            observed,
            matched: self.expected.accepts(observed),
            monodromy_radius: self.monodromy.as_ref().map(spectral_radius),
        })
    }
}

/// Optional overrides for [`by_name`].
#[derive(Debug, Clone, Default)]
pub struct ScenarioParams {
    pub p: Option<usize>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub k_max: Option<usize>,
    pub interconnection: Option<InterconnectionMatrix>,
    pub x0: Option<DVector<f64>>,
}

/// Builds a named scenario.
pub fn by_name(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let seed = params.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = match name {
        "harmonic" => {
            let g = match &params.interconnection {
                Some(g) => g.clone(),
                None => {
                    let p = params.p.unwrap_or(3);
                    if params.seed.is_some() {
                        random_connected(p, TimeKind::Continuous, &mut rng)
                    } else {
                        ring(p)?
                    }
                }
            };
            let x0 = match &params.x0 {
                Some(x) => x.clone(),
                None => random_state(2 * g.p(), &mut rng),
            };
            harmonic_oscillator_scenario(g, x0)?
        }
        "neg1" => neg1_scenario(),
        "neg2" => neg2_scenario(params.k_max.unwrap_or(NEG2_DEFAULT_DEPTH))?,
        "neg1-dt" => discrete_counterexample_scenarios()?.0,
        "neg2-dt" => {
            let (_, s) = discrete_counterexample_scenarios()?;
            match params.k_max {
                Some(k) => neg2_discrete_scenario(k)?,
                None => s,
            }
        }
        "rotation-dt" => {
            let l = match &params.interconnection {
                Some(l) => l.clone(),
                None => random_connected(params.p.unwrap_or(3), TimeKind::Discrete, &mut rng),
            };
            let x0 = match &params.x0 {
                Some(x) => x.clone(),
                None => random_state(2 * l.p(), &mut rng),
            };
            rotation_dt_scenario(l, x0, ROTATION_ANGLE)?
        }
        "random-consensus" => {
            let g = match &params.interconnection {
                Some(g) => g.clone(),
                None => random_connected(params.p.unwrap_or(4), TimeKind::Continuous, &mut rng),
            };
            let n = 2;
            let q = random_spsd_process(n, SpsdMode::Projection, seed, 200, 1.0)?;
            let x0 = match &params.x0 {
                Some(x) => x.clone(),
                None => random_state(n * g.p(), &mut rng),
            };
            random_consensus_scenario(g, q.shared(), x0, 150.0)?
        }
        other => {
            return Err(SyncError::Unsupported(format!(
                "unknown scenario '{other}'"
            )))
        }
    };
    if params.interconnection.is_some()
        && !matches!(name, "harmonic" | "rotation-dt" | "random-consensus")
    {
        return Err(SyncError::Unsupported(format!(
            "scenario '{name}' has a fixed interconnection"
        )));
    }
    if let Some(h) = params.horizon {
        if !(h > 0.0) {
            return Err(SyncError::NonPositive {
                name: "horizon",
                value: h,
            });
        }
        sc.horizon = h;
    }
    if let Some(s) = params.step {
        if !(s > 0.0) {
            return Err(SyncError::NonPositive {
                name: "step",
                value: s,
            });
        }
        sc.step = s;
    }
    sc.seed = params.seed;
    Ok(sc)
}

fn random_state<R: Rng>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Directed cycle `i → i+1` with unit weights.
pub fn ring(p: usize) -> Result<InterconnectionMatrix> {
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        if p > 1 {
            g[(i, (i + 1) % p)] = 1.0;
            g[(i, i)] = -1.0;
        }
    }
    crate::graph::validate_interconnection(&g, TimeKind::Continuous)
}

/// Coupled harmonic oscillators `A = [[0,1],[-1,0]]`, `C = [0,1]`.
pub fn harmonic_oscillator_scenario(
    g: InterconnectionMatrix,
    x0: DVector<f64>,
) -> Result<Scenario> {
    if g.kind() != TimeKind::Continuous || g.p() < 2 {
        return Err(SyncError::Shape(
            "need a continuous interconnection with p ≥ 2".into(),
        ));
    }
    if !g.is_connected() {
        return Err(SyncError::NotConnected);
    }
    if x0.len() != 2 * g.p() {
        return Err(SyncError::Shape(format!(
            "x0 must have {} entries",
            2 * g.p()
        )));
    }
    Ok(Scenario {
        name: "harmonic".into(),
        kind: TimeKind::Continuous,
        dynamics: Dynamics::Coupled {
            coupling: g.into(),
            pair: LtvPair::harmonic_oscillator(),
        },
        x0,
        horizon: 200.0,
        step: 1e-3,
        record_every: 100,
        expected: Outcome::Exponential,
        basis: "uniformly observable pair, connected interconnection: exponential synchronization",
        artifact_construction: false,
        seed: None,
        monodromy: None,
        windows: None,
    })
}

/// The four interconnections and projections of the unbounded periodic
/// consensus array, each held for ten time units.
pub fn neg1_parts() -> (Vec<InterconnectionMatrix>, Vec<DMatrix<f64>>) {
    let g = |rows: [[f64; 4]; 4]| {
        let r: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        InterconnectionMatrix::continuous(&r).expect("valid interconnection")
    };
    let gammas = vec![
        g([
            [-1.0, 1.0, 0.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [0.0, 0.0, 1.0, -1.0],
        ]),
        g([
            [0.0; 4],
            [0.0, -1.0, 0.0, 1.0],
            [1.0, 0.0, -1.0, 0.0],
            [0.0; 4],
        ]),
        g([
            [-1.0, 0.0, 1.0, 0.0],
            [0.0; 4],
            [0.0; 4],
            [0.0, 1.0, 0.0, -1.0],
        ]),
        g([
            [0.0; 4],
            [1.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 1.0],
            [0.0; 4],
        ]),
    ];
    let qs = vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
        DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]),
    ];
    (gammas, qs)
}

/// Segment length of the unbounded periodic array.
pub const NEG1_SEGMENT: f64 = 10.0;

/// `e^{(Γ_d⊗Q_d)10} e^{(Γ_c⊗Q_c)10} e^{(Γ_b⊗Q_b)10} e^{(Γ_a⊗Q_a)10}`.
pub fn neg1_monodromy() -> DMatrix<f64> {
    let (gammas, qs) = neg1_parts();
    let mut m = DMatrix::identity(8, 8);
    for (g, q) in gammas.iter().zip(&qs) {
        m = expm(&(kron(g.entries(), q) * NEG1_SEGMENT)) * m;
    }
    m
}

/// Initial state with a component along the unstable monodromy direction.
pub fn neg1_initial_state() -> DVector<f64> {
    DVector::from_vec(vec![0.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0])
}

/// Periodic interconnection and projection schedule with an unbounded solution.
pub fn neg1_scenario() -> Scenario {
    let (gammas, qs) = neg1_parts();
    let coupling = CouplingSchedule::periodic(NEG1_SEGMENT, gammas).expect("valid schedule");
    let q = Sampled::periodic(0.0, NEG1_SEGMENT, qs)
        .expect("valid samples")
        .shared();
    Scenario {
        name: "neg1".into(),
        kind: TimeKind::Continuous,
        dynamics: Dynamics::Consensus { coupling, q },
        x0: neg1_initial_state(),
        horizon: 200.0,
        step: 1e-2,
        record_every: 100,
        expected: Outcome::Unbounded,
        basis: "time-varying interconnections with SPSD coupling need not keep solutions bounded",
        artifact_construction: false,
        seed: None,
        monodromy: Some(neg1_monodromy()),
        windows: None,
    }
}

/// Default truncation depth of the non-synchronizing construction.
pub const NEG2_DEFAULT_DEPTH: usize = 20;

/// Times beyond which a unit-scale step is no longer resolvable.
const MAX_TIME: f64 = 1e15;

/// Windows `[τ_{k-1}, τ_k)` of the non-synchronizing projection schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Neg2Schedule {
    /// `τ_0 = 0, …, τ_kmax`.
    pub taus: Vec<f64>,
    /// `ϑ(τ_{k-1})` at the start of window k.
    pub start_angles: Vec<f64>,
    /// `sin ε_k cos ε_k`.
    pub slopes: Vec<f64>,
    /// `ε_k = 2^{-k}`, k = 1..=kmax+1.
    pub eps: Vec<f64>,
}

impl Neg2Schedule {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(SyncError::NonPositive {
                name: "k_max",
                value: 0.0,
            });
        }
        let eps: Vec<f64> = (1..=k_max + 1).map(|k| 0.5f64.powi(k as i32)).collect();
        let mut taus = vec![0.0];
        let mut start_angles = vec![0.0];
        let mut slopes = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let e = eps[k - 1];
            let s = e.sin() * e.cos();
            let tau = taus[k - 1] + 2.0 * PI / s;
            if !tau.is_finite() || tau > MAX_TIME {
                return Err(SyncError::HorizonOverflow(tau));
            }
            taus.push(tau);
            slopes.push(s);
            // the angle gains a full turn, then drops by ε_{k+1}
            start_angles.push(start_angles[k - 1] + 2.0 * PI - eps[k]);
        }
        Ok(Neg2Schedule {
            taus,
            start_angles,
            slopes,
            eps,
        })
    }

    pub fn k_max(&self) -> usize {
        self.slopes.len()
    }

    pub fn projection(&self) -> ProjectionLine {
        let k = self.k_max();
        ProjectionLine {
            angle: AngleSchedule::Piecewise {
                starts: self.taus.clone(),
                values: self.start_angles[..k].to_vec(),
                slopes: self.slopes.clone(),
                tail_value: self.start_angles[k],
            },
        }
    }

    /// Polar angle the state tracks on window k: `ϑ(t) - π/2 - ε_k`.
    pub fn tracked_angle(&self, t: f64) -> f64 {
        let k = self
            .taus
            .partition_point(|&s| s <= t)
            .clamp(1, self.k_max());
        self.start_angles[k - 1] + self.slopes[k - 1] * (t - self.taus[k - 1])
            - FRAC_PI_2
            - self.eps[k - 1]
    }
}

/// Connected two-node array whose projection schedule keeps
/// `liminf (1/T) σ_min ∫Q ≥ 1/4` yet does not synchronize.
pub fn neg2_scenario(k_max: usize) -> Result<Scenario> {
    let sched = Neg2Schedule::new(k_max)?;
    let g = InterconnectionMatrix::continuous(&[&[-1.0, 1.0], &[0.0, 0.0]])?;
    let theta0 = -FRAC_PI_2 - sched.eps[0];
    let x0 = DVector::from_vec(vec![theta0.cos(), theta0.sin(), 0.0, 0.0]);
    Ok(Scenario {
        name: "neg2".into(),
        kind: TimeKind::Continuous,
        horizon: *sched.taus.last().unwrap(),
        dynamics: Dynamics::Consensus {
            coupling: g.into(),
            q: Arc::new(sched.projection()),
        },
        x0,
        step: 0.5,
        record_every: usize::MAX,
        expected: Outcome::BoundedNoSync,
        basis: "excitation growing linearly in time does not force synchronization",
        artifact_construction: false,
        seed: None,
        monodromy: None,
        windows: Some(sched.taus.clone()),
    })
}

/// Discrete analogues of the two counterexamples (artifact constructions).
///
/// * `neg1-dt`: `Λ = I + Γ` for each of the four continuous interconnections,
///   each held with its projection for ten steps.
/// * `neg2-dt`: `Λ = [[0,1],[0,1]]`; block k has `N_k = ⌈2π·2^k⌉` steps and
///   rotates the projection line by `e_k = 2π/N_k` per step, so each block
///   sums to `(N_k/2) I` while `|x_1|` shrinks only by `Π cos(e_k)^{N_k}`.
pub fn discrete_counterexample_scenarios() -> Result<(Scenario, Scenario)> {
    Ok((
        neg1_discrete_scenario()?,
        neg2_discrete_scenario(NEG2_DT_DEPTH)?,
    ))
}

/// Number of blocks in the discrete non-synchronizing construction.
pub const NEG2_DT_DEPTH: usize = 10;

/// Steps each segment of the discrete unbounded array is held.
pub const NEG1_DT_SEGMENT: usize = 10;

pub fn neg1_discrete_parts() -> Result<(Vec<InterconnectionMatrix>, Vec<DMatrix<f64>>)> {
    let (gammas, qs) = neg1_parts();
    let lambdas = gammas
        .iter()
        .map(|g| {
            let l = DMatrix::identity(4, 4) + g.entries();
            crate::graph::validate_interconnection(&l, TimeKind::Discrete)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((lambdas, qs))
}

/// Product of `(I + (Λ_s - I) ⊗ Q_s)^10` over the four segments.
pub fn neg1_discrete_monodromy() -> Result<DMatrix<f64>> {
    let (lambdas, qs) = neg1_discrete_parts()?;
    let mut m = DMatrix::identity(8, 8);
    for (l, q) in lambdas.iter().zip(&qs) {
        let step = DMatrix::identity(8, 8) + kron(&l.coupling(), q);
        for _ in 0..NEG1_DT_SEGMENT {
            m = &step * m;
        }
    }
    Ok(m)
}

fn neg1_discrete_scenario() -> Result<Scenario> {
    let (lambdas, qs) = neg1_discrete_parts()?;
    let seg = NEG1_DT_SEGMENT as f64;
    Ok(Scenario {
        name: "neg1-dt".into(),
        kind: TimeKind::Discrete,
        dynamics: Dynamics::Consensus {
            coupling: CouplingSchedule::periodic(seg, lambdas)?,
            q: Sampled::periodic(0.0, seg, qs)?.shared(),
        },
        x0: neg1_initial_state(),
        horizon: 8.0 * seg * 4.0,
        step: 1.0,
        record_every: 1,
        expected: Outcome::Unbounded,
        basis: "discrete analogue: switched stochastic interconnections need not keep solutions bounded",
        artifact_construction: true,
        seed: None,
        monodromy: Some(neg1_discrete_monodromy()?),
        windows: None,
    })
}

/// Block boundaries and per-step rotations of the discrete construction.
pub fn neg2_discrete_blocks(k_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k_max == 0 {
        return Err(SyncError::NonPositive {
            name: "k_max",
            value: 0.0,
        });
    }
    let mut bounds = vec![0.0];
    let mut rot = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let steps = (2.0 * PI * 2f64.powi(k as i32)).ceil();
        let end = bounds[k - 1] + steps;
        if end > MAX_TIME {
            return Err(SyncError::HorizonOverflow(end));
        }
        bounds.push(end);
        rot.push(2.0 * PI / steps);
    }
    Ok((bounds, rot))
}

pub fn neg2_discrete_scenario(k_max: usize) -> Result<Scenario> {
    let (bounds, rot) = neg2_discrete_blocks(k_max)?;
    let l = InterconnectionMatrix::discrete(&[&[0.0, 1.0], &[0.0, 1.0]])?;
    // x_1 starts at angle π/2; step j of block k projects x_1 onto the line
    // at angle θ_j - e_k, where θ_j is the current polar angle. Q_j is the
    // projection onto the orthogonal line.
    let theta0 = FRAC_PI_2;
    let mut values = Vec::with_capacity(k_max);
    let mut slopes = Vec::with_capacity(k_max);
    let mut theta = theta0;
    for k in 0..k_max {
        let e = rot[k];
        values.push(theta + FRAC_PI_2 - e);
        slopes.push(-e);
        theta -= e * (bounds[k + 1] - bounds[k]);
    }
    let q = ProjectionLine {
        angle: AngleSchedule::Piecewise {
            starts: bounds.clone(),
            values,
            slopes,
            tail_value: theta + FRAC_PI_2,
        },
    };
    Ok(Scenario {
        name: "neg2-dt".into(),
        kind: TimeKind::Discrete,
        horizon: *bounds.last().unwrap(),
        dynamics: Dynamics::Consensus {
            coupling: l.into(),
            q: Arc::new(q),
        },
        x0: DVector::from_vec(vec![theta0.cos(), theta0.sin(), 0.0, 0.0]),
        step: 1.0,
        record_every: 1,
        expected: Outcome::BoundedNoSync,
        basis: "discrete analogue: linearly growing excitation does not force synchronization",
        artifact_construction: true,
        seed: None,
        monodromy: None,
        windows: Some(bounds),
    })
}

/// Rotation per step of the discrete rotation array.
pub const ROTATION_ANGLE: f64 = 0.5;

/// Discrete array of planar rotations observed through `C = [0, 1]`.
pub fn rotation_dt_scenario(
    l: InterconnectionMatrix,
    x0: DVector<f64>,
    angle: f64,
) -> Result<Scenario> {
    if l.kind() != TimeKind::Discrete {
        return Err(SyncError::Shape("need a discrete interconnection".into()));
    }
    if !l.is_connected() {
        return Err(SyncError::NotConnected);
    }
    if x0.len() != 2 * l.p() {
        return Err(SyncError::Shape(format!(
            "x0 must have {} entries",
            2 * l.p()
        )));
    }
    Ok(Scenario {
        name: "rotation-dt".into(),
        kind: TimeKind::Discrete,
        dynamics: Dynamics::Coupled { coupling: l.into(), pair: LtvPair::rotation_pair(angle) },
        x0,
        horizon: 2000.0,
        step: 1.0,
        record_every: 1,
        expected: Outcome::Exponential,
        basis: "discrete uniformly observable pair with the scaled feedback: exponential synchronization",
        artifact_construction: false,
        seed: None,
        monodromy: None,
        windows: None,
    })
}

/// Consensus array driven by a given SPSD process.
pub fn random_consensus_scenario(
    g: InterconnectionMatrix,
    q: MatFn,
    x0: DVector<f64>,
    horizon: f64,
) -> Result<Scenario> {
    if !g.is_connected() {
        return Err(SyncError::NotConnected);
    }
    Ok(Scenario {
        name: "random-consensus".into(),
        kind: g.kind(),
        dynamics: Dynamics::Consensus {
            coupling: g.into(),
            q,
        },
        x0,
        horizon,
        step: 1e-2,
        record_every: 10,
        expected: Outcome::Exponential,
        basis: "persistently exciting SPSD coupling over a connected interconnection",
        artifact_construction: false,
        seed: None,
        monodromy: None,
        windows: None,
    })
}

/// How random SPSD samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpsdMode {
    /// Orthogonal projectors of random rank 1..=n.
    Projection,
    /// `B Bᵀ` rescaled into the unit ball.
    General,
}

/// Piecewise-constant SPSD process with `|Q| ≤ 1`, one sample per segment.
pub fn random_spsd_process(
    n: usize,
    mode: SpsdMode,
    seed: u64,
    segments: usize,
    seg_len: f64,
) -> Result<Sampled> {
    if n == 0 || segments == 0 {
        return Err(SyncError::Shape(
            "need n ≥ 1 and at least one segment".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..segments)
        .map(|_| random_spsd(n, mode, &mut rng))
        .collect();
    Sampled::new(0.0, seg_len, samples)
}

/// One random SPSD matrix in the unit ball.
pub fn random_spsd<R: Rng + ?Sized>(n: usize, mode: SpsdMode, rng: &mut R) -> DMatrix<f64> {
    match mode {
        SpsdMode::Projection => {
            let rank = rng.random_range(1..=n);
            let b = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
            let q = b.qr().q();
            let q = q.columns(0, rank);
            crate::linalg::symmetrize(&(q * q.transpose()))
        }
        SpsdMode::General => {
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let m = &b * b.transpose();
            let top = crate::linalg::sym_eig_range(&m).1;
            let scale = rng.random_range(0.2..1.0) / top.max(1e-12);
            crate::linalg::symmetrize(&(m * scale))
        }
    }
}
