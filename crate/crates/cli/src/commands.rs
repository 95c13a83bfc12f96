//! `simulate`, `check` and `plotdata`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use syncltv::excitation::{
    build_sufficiency_certificate, check_persistent_excitation, classify_observability,
    normalized_integrand, window_sigma_min, ObservabilityReport, PersistenceReport, Quadrature,
    Verdict, WindowPolicy, UNIFORM_FLOOR,
};
use syncltv::graph::{left_fixed_vector, matrix_to_rows};
use syncltv::ltv::{CachedPair, MatFn};
use syncltv::scenarios::{by_name, Dynamics, Outcome, Scenario, ScenarioParams};
use syncltv::sim::{
    auxiliary_transform, contraction_check, sync_metrics, ContractionCheck, SyncReport,
};
use syncltv::stability::stability_bound;
use syncltv::{InterconnectionMatrix, LyapunovCertificate, SyncError, TimeKind, Trajectory};

use crate::config::{CheckName, RunConfig};

/// Why a command could not complete.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<SyncError> for Failure {
    fn from(e: SyncError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

/// Printed lines and whether the command's verdict was positive.
#[derive(Debug)]
pub struct Finished {
    pub lines: Vec<String>,
    pub ok: bool,
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_failure(path, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(path, e))
}

fn require_scenario(cfg: &RunConfig) -> CmdResult<Scenario> {
    cfg.scenario()?
        .ok_or_else(|| Failure::Config("no scenario given; use --scenario or --config".into()))
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub scenario: String,
    pub kind: TimeKind,
    pub p: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub step: f64,
    pub horizon: f64,
    pub expected: Outcome,
    pub observed: Outcome,
    pub matched: bool,
    pub basis: String,
    pub artifact_construction: bool,
    pub monodromy_radius: Option<f64>,
    pub sync: SyncReport,
}

pub fn simulate(cfg: &RunConfig) -> CmdResult<Finished> {
    let sc = require_scenario(cfg)?;
    let run = sc.run()?;
    if let Some(path) = &cfg.outputs.trajectory {
        run.trajectory.write_csv(create(path)?)?;
    }
    let report = SimulateReport {
        scenario: sc.name.clone(),
        kind: sc.kind,
        p: sc.p(),
        n: sc.n(),
        seed: sc.seed,
        step: sc.step,
        horizon: sc.horizon,
        expected: sc.expected,
        observed: run.observed,
        matched: run.matched,
        basis: sc.basis.to_string(),
        artifact_construction: sc.artifact_construction,
        monodromy_radius: run.monodromy_radius,
        sync: run.report,
    };
    if let Some(path) = &cfg.outputs.report {
        write_json(path, &report)?;
    }
    let mut lines = vec![format!(
        "scenario {} ({}, p = {}, n = {}{})",
        report.scenario,
        kind_name(report.kind),
        report.p,
        report.n,
        if report.artifact_construction {
            ", artifact construction"
        } else {
            ""
        }
    )];
    lines.push(format!(
        "disagreement {:.3e} -> {:.3e}, synchronized = {}, |x(end)|/|x(0)| = {:.4e}",
        report.sync.initial_disagreement,
        report.sync.final_disagreement,
        report.sync.synchronized,
        report.sync.norm_growth
    ));
    if let Some(rate) = report.sync.rate_estimate {
        lines.push(format!("fitted decay rate {rate:.6e}"));
    }
    if let Some(rho) = report.monodromy_radius {
        lines.push(format!("monodromy spectral radius {rho:.8}"));
    }
    lines.push(format!(
        "expected {}, observed {}: {}",
        outcome_name(report.expected),
        outcome_name(report.observed),
        if report.matched { "match" } else { "MISMATCH" }
    ));
    Ok(Finished {
        lines,
        ok: report.matched,
    })
}

fn kind_name(kind: TimeKind) -> &'static str {
    match kind {
        TimeKind::Continuous => "continuous",
        TimeKind::Discrete => "discrete",
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Synchronize => "synchronize",
        Outcome::Exponential => "exponential",
        Outcome::BoundedNoSync => "bounded-no-sync",
        Outcome::Unbounded => "unbounded",
    }
}

#[derive(Debug, Serialize)]
pub struct LyapunovReport {
    pub kind: TimeKind,
    pub r: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub rho: f64,
    pub residual: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Serialize)]
pub struct StabilityReport {
    pub alpha: f64,
    /// Largest `|x(t)|/|x(0)|` over a simulated consensus run.
    pub observed_max_ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct PeReport {
    /// `coupling` for consensus arrays, `grammian-integrand` for LTV pairs.
    pub target: &'static str,
    /// Largest `|Q_t|` the integrand was divided by.
    pub normalization: f64,
    pub classification: &'static str,
    /// Smallest window `σ_min` found.
    pub eps: f64,
    pub persistence: PersistenceReport,
}

#[derive(Debug, Serialize)]
pub struct SeReport {
    pub target: &'static str,
    pub policy: WindowPolicy,
    pub verdict: Verdict,
    pub delta_sum: f64,
    pub windows: usize,
    pub min_eps: f64,
    pub max_eps: f64,
}

#[derive(Debug, Serialize)]
pub struct ContractionReport {
    pub window: f64,
    pub eps: f64,
    pub windows: usize,
    pub skipped: usize,
    pub unresolved: usize,
    pub worst_ratio: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    pub checks: Vec<ContractionCheck>,
}

#[derive(Debug, Serialize)]
pub struct MonodromyReport {
    pub spectral_radius: f64,
    /// Eigenvalue magnitudes, largest first.
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Default, Serialize)]
pub struct CheckReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pe: Option<PeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<SeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<MonodromyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observability: Option<ObservabilityReport>,
}

/// Subintervals per window for excitation integrals.
const QUAD_INTERVALS: usize = 256;

struct CheckContext<'a> {
    cfg: &'a RunConfig,
    scenario: Option<Scenario>,
    interconnection: Option<InterconnectionMatrix>,
}

impl CheckContext<'_> {
    fn scenario(&self, check: &str) -> CmdResult<&Scenario> {
        self.scenario
            .as_ref()
            .ok_or_else(|| Failure::Config(format!("--{check} needs a scenario")))
    }

    fn interconnection(&self, check: &str) -> CmdResult<&InterconnectionMatrix> {
        self.interconnection.as_ref().ok_or_else(|| {
            Failure::Config(format!(
                "--{check} needs a fixed interconnection (--inline-gamma or a scenario)"
            ))
        })
    }

    fn window(&self, check: &str) -> CmdResult<f64> {
        let w = self
            .cfg
            .checks
            .window
            .ok_or_else(|| Failure::Config(format!("--{check} needs --window")))?;
        if !(w > 0.0) || !w.is_finite() {
            return Err(SyncError::BadWindow(w).into());
        }
        Ok(w)
    }

    fn quad_step(&self, kind: TimeKind, window: f64) -> f64 {
        match kind {
            TimeKind::Continuous => window / QUAD_INTERVALS as f64,
            TimeKind::Discrete => 1.0,
        }
    }
}

/// `Q_t` for a consensus scenario, or the normalized grammian integrand of
/// an LTV pair with its normalization and cache.
fn excitation_target(
    sc: &Scenario,
    window: f64,
) -> CmdResult<(MatFn, f64, &'static str, Option<CachedPair>)> {
    match &sc.dynamics {
        Dynamics::Consensus { q, .. } => Ok((q.clone(), 1.0, "coupling", None)),
        Dynamics::Coupled { .. } => {
            let cp = sc.cached_pair()?.expect("coupled scenario has a pair");
            let grid = match sc.kind {
                TimeKind::Continuous => (window / 50.0).min(sc.step * 10.0).max(sc.step),
                TimeKind::Discrete => 1.0,
            };
            let (q, h) = normalized_integrand(&cp, sc.horizon, grid)?;
            Ok((
                q,
                if h > 0.0 { h } else { 1.0 },
                "grammian-integrand",
                Some(cp),
            ))
        }
    }
}

pub fn check(cfg: &RunConfig) -> CmdResult<Finished> {
    if cfg.checks.list.is_empty() {
        return Err(Failure::Config(
            "no checks requested; use --lyapunov, --stability, --pe, --se, --contraction, --monodromy or --observability"
                .into(),
        ));
    }
    let scenario = cfg.scenario()?;
    let interconnection = match cfg.interconnection()? {
        Some(g) => Some(g),
        None => scenario
            .as_ref()
            .map(|s| s.dynamics.coupling())
            .filter(|c| c.is_fixed())
            .map(|c| c.matrices()[0].clone()),
    };
    let ctx = CheckContext {
        cfg,
        scenario,
        interconnection,
    };
    let mut report = CheckReport {
        scenario: ctx.scenario.as_ref().map(|s| s.name.clone()),
        ..Default::default()
    };
    let mut lines = Vec::new();
    let mut ok = true;
    let mut list = cfg.checks.list.clone();
    list.dedup();
    for name in list {
        match name {
            CheckName::Lyapunov => {
                let g = ctx.interconnection("lyapunov")?;
                let cert = LyapunovCertificate::for_interconnection(g)?;
                lines.push(format!("lyapunov: r = {:?}", cert.r.as_vector().as_slice()));
                lines.push(format!(
                    "lyapunov: omega = {:?}",
                    matrix_to_rows(&cert.omega)
                ));
                lines.push(format!(
                    "lyapunov: rho = {:.6e}, residual = {:.3e}",
                    cert.rho, cert.residual
                ));
                report.lyapunov = Some(LyapunovReport {
                    kind: cert.kind,
                    r: cert.r.as_vector().iter().copied().collect(),
                    omega: matrix_to_rows(&cert.omega),
                    rho: cert.rho,
                    residual: cert.residual,
                    sigma_min: cert.sigma_min,
                    sigma_max: cert.sigma_max,
                });
            }
            CheckName::Stability => {
                let g = ctx.interconnection("stability")?;
                let alpha = stability_bound(g)?;
                let observed = match &ctx.scenario {
                    Some(sc) if matches!(sc.dynamics, Dynamics::Consensus { .. }) => {
                        let (traj, _) = sc.simulate(&sc.options())?;
                        let x0 = traj.states[0].norm();
                        Some(if x0 > 0.0 {
                            traj.states
                                .iter()
                                .map(|x| x.norm() / x0)
                                .fold(0.0, f64::max)
                        } else {
                            0.0
                        })
                    }
                    _ => None,
                };
                let pass = observed.is_none_or(|r| r <= alpha * (1.0 + 1e-9));
                ok &= pass;
                lines.push(match observed {
                    Some(r) => format!(
                        "stability: alpha = {alpha:.6}, max |x(t)|/|x(0)| = {r:.6}, pass = {pass}"
                    ),
                    None => format!("stability: alpha = {alpha:.6}"),
                });
                report.stability = Some(StabilityReport {
                    alpha,
                    observed_max_ratio: observed,
                    pass,
                });
            }
            CheckName::Pe => {
                let sc = ctx.scenario("pe")?;
                let window = ctx.window("pe")?;
                let (q, h, target, _) = excitation_target(sc, window)?;
                let eps = cfg.checks.eps.unwrap_or(UNIFORM_FLOOR * window);
                let step = ctx.quad_step(sc.kind, window);
                let pr = check_persistent_excitation(
                    q.as_ref(),
                    sc.kind,
                    window,
                    eps,
                    sc.horizon,
                    None,
                    step,
                )?;
                let classification = if pr.holds {
                    "uniform"
                } else {
                    "not-persistent"
                };
                let worst = pr.worst_window.1;
                lines.push(format!(
                    "pe: {classification}, eps = {worst:.6} (worst window at t = {:.4}, {} windows of length {window})",
                    pr.worst_window.0, pr.windows_scanned
                ));
                report.pe = Some(PeReport {
                    target,
                    normalization: h,
                    classification,
                    eps: worst,
                    persistence: pr,
                });
            }
            CheckName::Se => {
                let sc = ctx.scenario("se")?;
                let policy = match (cfg.checks.window, &sc.windows) {
                    (Some(_), _) => WindowPolicy::Fixed(ctx.window("se")?),
                    (None, Some(b)) => WindowPolicy::Breaks(b.clone()),
                    (None, None) => return Err(Failure::Config("--se needs --window".into())),
                };
                let probe = match &policy {
                    WindowPolicy::Fixed(w) => *w,
                    _ => sc.horizon,
                };
                let (q, _, target, _) = excitation_target(sc, probe)?;
                let cert = build_sufficiency_certificate(
                    q.as_ref(),
                    sc.kind,
                    sc.horizon,
                    &policy,
                    Quadrature::Intervals(QUAD_INTERVALS),
                )?;
                let eps = cert.windows.iter().map(|w| w.eps);
                let min_eps = eps.clone().fold(f64::INFINITY, f64::min);
                let max_eps = eps.fold(0.0, f64::max);
                let verdict = cert.verdict;
                lines.push(format!(
                    "se: {}, sum of delta = {:.6e} over {} windows",
                    match verdict {
                        Verdict::DivergingAtHorizon => "diverging-at-horizon",
                        Verdict::Stalled => "stalled",
                    },
                    cert.delta_sum(),
                    cert.windows.len()
                ));
                report.se = Some(SeReport {
                    target,
                    policy,
                    verdict,
                    delta_sum: cert.delta_sum(),
                    windows: cert.windows.len(),
                    min_eps,
                    max_eps,
                });
            }
            CheckName::Contraction => {
                let sc = ctx.scenario("contraction")?;
                let window = ctx.window("contraction")?;
                let rep = contraction(&ctx, sc, window)?;
                ok &= rep.pass;
                lines.push(format!(
                    "contraction: {} windows ({} skipped, {} at round-off floor), worst V ratio {}, bound {}, pass = {}",
                    rep.windows,
                    rep.skipped,
                    rep.unresolved,
                    rep.worst_ratio.map_or("n/a".into(), |v| format!("{v:.6}")),
                    rep.bound.map_or("n/a".into(), |v| format!("{v:.12}")),
                    rep.pass
                ));
                report.contraction = Some(rep);
            }
            CheckName::Monodromy => {
                let sc = ctx.scenario("monodromy")?;
                let m = sc.monodromy.as_ref().ok_or_else(|| {
                    Failure::Config(format!("scenario {} is not periodic", sc.name))
                })?;
                let mut magnitudes: Vec<f64> =
                    m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
                magnitudes.sort_by(|a, b| b.total_cmp(a));
                let rho = magnitudes[0];
                lines.push(format!("monodromy: max |lambda| = {rho:.8}"));
                report.monodromy = Some(MonodromyReport {
                    spectral_radius: rho,
                    magnitudes,
                });
            }
            CheckName::Observability => {
                let sc = ctx.scenario("observability")?;
                let window = ctx.window("observability")?;
                let Dynamics::Coupled { .. } = sc.dynamics else {
                    return Err(Failure::Config(
                        "--observability needs an LTV pair scenario".into(),
                    ));
                };
                let cp = sc.cached_pair()?.expect("coupled scenario has a pair");
                let step = ctx.quad_step(sc.kind, window);
                let rep = classify_observability(&cp, sc.horizon, window, step)?;
                lines.push(format!(
                    "observability: {}, min window sigma = {:.6}, delta sum = {:.4e}",
                    serde_json::to_value(rep.class)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default(),
                    rep.persistence.worst_window.1,
                    rep.delta_sum
                ));
                report.observability = Some(rep);
            }
        }
    }
    if let Some(path) = &cfg.outputs.report {
        write_json(path, &report)?;
    }
    Ok(Finished { lines, ok })
}

/// Per-window contraction of the disagreement energy. LTV pairs are checked
/// in the auxiliary coordinates, where the array is a consensus array with
/// the normalized grammian integrand and `h·Γ`.
fn contraction(ctx: &CheckContext, sc: &Scenario, window: f64) -> CmdResult<ContractionReport> {
    let g = ctx.interconnection("contraction")?;
    if !sc.dynamics.coupling().is_fixed() {
        return Err(Failure::Config(
            "--contraction needs a fixed interconnection".into(),
        ));
    }
    let window = match sc.kind {
        TimeKind::Continuous => window,
        TimeKind::Discrete => window.round().max(1.0),
    };
    let count = (sc.horizon / window * (1.0 + 1e-12)).floor() as usize;
    let opts = sc
        .options()
        .record_at((1..=count).map(|j| j as f64 * window));
    let (q, h, _, _) = excitation_target(sc, window)?;
    let (traj, cert) = match &sc.dynamics {
        Dynamics::Consensus { .. } => {
            let (traj, _) = sc.simulate(&opts)?;
            (traj, LyapunovCertificate::for_interconnection(g)?)
        }
        Dynamics::Coupled { .. } => {
            if sc.kind == TimeKind::Discrete {
                return Err(Failure::Config(
                    "--contraction supports continuous LTV pairs only".into(),
                ));
            }
            let (traj, cp) = sc.simulate(&opts)?;
            let cp = cp.expect("coupled scenario has a pair");
            let xi = auxiliary_transform(&traj, cp.cache())?;
            (xi, LyapunovCertificate::for_interconnection(&g.scaled(h)?)?)
        }
    };
    let step = ctx.quad_step(sc.kind, window);
    let eps = match ctx.cfg.checks.eps {
        Some(e) => e,
        None => {
            let mut e = f64::INFINITY;
            for j in 0..count {
                e = e.min(window_sigma_min(
                    q.as_ref(),
                    sc.kind,
                    j as f64 * window,
                    window,
                    step,
                )?);
            }
            e
        }
    };
    if !(eps > 0.0) {
        return Err(Failure::Numeric(format!(
            "windows of length {window} are not excited (eps = {eps:e})"
        )));
    }
    let checks = contraction_check(&traj, &cert, q.as_ref(), eps, window, step)?;
    let judged: Vec<&ContractionCheck> = checks
        .iter()
        .filter(|c| !c.skipped && !c.unresolved)
        .collect();
    Ok(ContractionReport {
        window,
        eps,
        windows: checks.len(),
        skipped: checks.iter().filter(|c| c.skipped).count(),
        unresolved: checks.iter().filter(|c| c.unresolved).count(),
        worst_ratio: judged.iter().map(|c| c.observed).reduce(f64::max),
        bound: checks.first().map(|c| c.bound),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

/// Per-sample disagreement and disagreement energy of a stored trajectory.
pub fn plotdata(cfg: &RunConfig, input: &Path, out: Option<&PathBuf>) -> CmdResult<Finished> {
    let file = File::open(input).map_err(|e| io_failure(input, e))?;
    let traj = Trajectory::read_csv(file)?;
    let sc = match cfg.scenario()? {
        Some(sc) => Some(sc),
        None => {
            let params = ScenarioParams {
                p: Some(traj.p),
                seed: traj.meta.seed,
                x0: Some(traj.states[0].clone()),
                ..Default::default()
            };
            by_name(&traj.meta.scenario, &params).ok()
        }
    };
    let sc = sc.filter(|s| s.p() == traj.p && s.n() == traj.n);
    let t_end = *traj.times.last().unwrap();
    let (disagreement, v) = match &sc {
        Some(sc)
            if sc.dynamics.coupling().is_fixed()
                && sc.dynamics.coupling().matrices()[0].is_connected() =>
        {
            let sc = sc.clone().with_horizon(t_end.max(sc.step));
            match &sc.dynamics {
                Dynamics::Consensus { .. } => {
                    let rep = sc.measure(&traj, None)?;
                    (rep.disagreement, rep.v_series)
                }
                Dynamics::Coupled { coupling, .. } => {
                    let cp = sc.cached_pair()?.expect("coupled scenario has a pair");
                    let rep = sc.measure(&traj, Some(&cp))?;
                    let g = &coupling.matrices()[0];
                    let cert = LyapunovCertificate::for_interconnection(g)?;
                    let xi = auxiliary_transform(&traj, cp.cache())?;
                    let r = left_fixed_vector(g)?;
                    let xi0 = DMatrix::from_column_slice(traj.n, traj.p, xi.states[0].as_slice());
                    let xbar: DVector<f64> = xi0 * r.as_vector();
                    let v = sync_metrics(&xi, |_| Ok(xbar.clone()), Some(&cert))?.v_series;
                    (rep.disagreement, v)
                }
            }
        }
        _ => (spread(&traj), Vec::new()),
    };
    let mut text = String::from("t,disagreement,v\n");
    for (i, t) in traj.times.iter().enumerate() {
        let v = v.get(i).map_or(String::new(), |v| v.to_string());
        text.push_str(&format!("{t},{},{v}\n", disagreement[i]));
    }
    let mut lines = Vec::new();
    match out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| io_failure(path, e))?;
            lines.push(format!(
                "wrote {} samples to {}",
                traj.len(),
                path.display()
            ));
        }
        None => lines.extend(text.lines().map(String::from)),
    }
    Ok(Finished { lines, ok: true })
}

/// `max_i |x_i(t) - mean_j x_j(t)|` when no consensus target is known.
fn spread(traj: &Trajectory) -> Vec<f64> {
    (0..traj.len())
        .map(|i| {
            let x = traj.state_matrix(i);
            let mean = x.column_mean();
            x.column_iter()
                .map(|c| (c - &mean).norm())
                .fold(0.0, f64::max)
        })
        .collect()
}
