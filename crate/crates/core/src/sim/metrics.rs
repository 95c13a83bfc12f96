//! Synchronization targets, disagreement metrics and contraction checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Result, SyncError};
use crate::excitation::{delta_continuous, delta_discrete, window_integral};
use crate::graph::{left_fixed_vector, InterconnectionMatrix, LeftFixedVector};
use crate::linalg::sym_eig_range;
use crate::ltv::{MatrixFunction, TransitionCache};
use crate::stability::{disagreement_energy, LyapunovCertificate};
use crate::tol::{TAU_FIT_FLOOR, TAU_SOLVE, TAU_SYNC, TAU_V_FLOOR};
use crate::TimeKind;

/// `(rᵀ ⊗ I_n) x0`, the common limit of a consensus array.
pub fn consensus_point(m: &InterconnectionMatrix, x0: &DVector<f64>) -> Result<DVector<f64>> {
    let r = left_fixed_vector(m)?;
    weighted_mean(&r, x0)
}

fn weighted_mean(r: &LeftFixedVector, x: &DVector<f64>) -> Result<DVector<f64>> {
    let p = r.len();
    if p == 0 || !x.len().is_multiple_of(p) {
        return Err(SyncError::Shape(format!(
            "state of length {} does not split into {p} systems",
            x.len()
        )));
    }
    let xm = DMatrix::from_column_slice(x.len() / p, p, x.as_slice());
    Ok(xm * r.as_vector())
}

/// `x̄(t) = (rᵀ ⊗ Φ_A(t,0)) x0`.
pub fn sync_target_ltv(
    cache: &TransitionCache,
    r: &LeftFixedVector,
    x0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    Ok(cache.phi(t)? * weighted_mean(r, x0)?)
}

/// `ξ_i(t) = Φ_A(0,t) x_i(t)` at every sample.
pub fn auxiliary_transform(traj: &Trajectory, cache: &TransitionCache) -> Result<Trajectory> {
    if cache.n() != traj.n {
        return Err(SyncError::Shape(format!(
            "trajectory has n = {}, A is {}×{}",
            traj.n,
            cache.n(),
            cache.n()
        )));
    }
    let mut out = Trajectory::new(traj.p, traj.n, traj.meta.clone());
    for (i, &t) in traj.times.iter().enumerate() {
        let xi = cache.phi_inv(t)? * traj.state_matrix(i);
        out.push(t, DVector::from_column_slice(xi.as_slice()))?;
    }
    Ok(out)
}

/// One window of a contraction check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub start: f64,
    pub end: f64,
    pub sigma_min: f64,
    /// `1 - δ/ρ`.
    pub bound: f64,
    pub v_start: f64,
    pub v_end: f64,
    /// `V(end) / V(start)`.
    pub observed: f64,
    pub pass: bool,
    /// The window integral did not reach `eps`, so the bound does not apply.
    pub skipped: bool,
    /// `V(start)` is at the round-off floor, so the ratio is not judged.
    pub unresolved: bool,
}

/// Disagreement, energy and fitted decay rate along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub times: Vec<f64>,
    /// `max_i |x_i(t) - x̄(t)|`.
    pub disagreement: Vec<f64>,
    /// Disagreement energy; empty without a Lyapunov certificate.
    pub v_series: Vec<f64>,
    pub contraction_checks: Vec<ContractionCheck>,
    pub synchronized: bool,
    /// `-slope` of a least-squares fit of `log disagreement` against time.
    pub rate_estimate: Option<f64>,
    pub initial_disagreement: f64,
    pub final_disagreement: f64,
    /// `|x(t_end)| / |x(0)|`.
    pub norm_growth: f64,
}

/// Computes the report against `target(t)`; `V` uses the certificate's Ω.
pub fn sync_metrics<F>(
    traj: &Trajectory,
    mut target: F,
    cert: Option<&LyapunovCertificate>,
) -> Result<SyncReport>
where
    F: FnMut(f64) -> Result<DVector<f64>>,
{
    if traj.is_empty() {
        return Err(SyncError::Shape("empty trajectory".into()));
    }
    if let Some(c) = cert {
        if c.p() != traj.p {
            return Err(SyncError::Shape(format!(
                "certificate is for p = {}, trajectory has p = {}",
                c.p(),
                traj.p
            )));
        }
    }
    let mut disagreement = Vec::with_capacity(traj.len());
    let mut v_series = Vec::new();
    for (i, &t) in traj.times.iter().enumerate() {
        let xbar = target(t)?;
        if xbar.len() != traj.n {
            return Err(SyncError::Shape(format!(
                "target has {} entries, expected {}",
                xbar.len(),
                traj.n
            )));
        }
        let x = traj.state_matrix(i);
        let d = (0..traj.p)
            .map(|j| (x.column(j) - &xbar).norm())
            .fold(0.0, f64::max);
        disagreement.push(d);
        if let Some(c) = cert {
            let stacked = DVector::from_iterator(
                traj.n * traj.p,
                (0..traj.p).flat_map(|_| xbar.iter().copied()),
            );
            v_series.push(disagreement_energy(&traj.states[i], &stacked, &c.omega)?);
        }
    }
    let initial = disagreement[0];
    let last = *disagreement.last().unwrap();
    let synchronized = last <= TAU_SYNC * initial;
    let x0 = traj.states[0].norm();
    let norm_growth = if x0 > 0.0 {
        traj.states.last().unwrap().norm() / x0
    } else {
        1.0
    };
    let floor = TAU_FIT_FLOOR * initial.max(x0);
    let rate_estimate = fit_rate(&traj.times, &disagreement, floor).filter(|_| last < initial);
    Ok(SyncReport {
        times: traj.times.clone(),
        disagreement,
        v_series,
        contraction_checks: Vec::new(),
        synchronized,
        rate_estimate,
        initial_disagreement: initial,
        final_disagreement: last,
        norm_growth,
    })
}

/// Least-squares decay rate over the final half of the samples that stay
/// above `floor`.
fn fit_rate(times: &[f64], d: &[f64], floor: f64) -> Option<f64> {
    let usable = d.iter().position(|&v| !(v > floor)).unwrap_or(d.len());
    if usable < 4 {
        return None;
    }
    let lo = usable / 2;
    let ts = &times[lo..usable];
    let ys: Vec<f64> = d[lo..usable].iter().map(|v| v.ln()).collect();
    let m = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    Some(-sxy / sxx)
}

/// Per-window check of `V(x(t+T) - x̄) ≤ (1 - δ(ε,T)/ρ) V(x(t) - x̄)` on a
/// consensus trajectory over windows `[jT, (j+1)T]` that are sampled.
///
/// Windows whose integral of `Q` has `σ_min < eps` are flagged as skipped, and
/// windows starting below `TAU_V_FLOOR · V(0)` as unresolved.
pub fn contraction_check(
    traj: &Trajectory,
    cert: &LyapunovCertificate,
    q: &dyn MatrixFunction,
    eps: f64,
    window: f64,
    step: f64,
) -> Result<Vec<ContractionCheck>> {
    if !(window > 0.0) {
        return Err(SyncError::BadWindow(window));
    }
    if cert.p() != traj.p || traj.is_empty() {
        return Err(SyncError::Shape(
            "certificate and trajectory disagree on p".into(),
        ));
    }
    let kind = cert.kind;
    let delta = match kind {
        TimeKind::Continuous => delta_continuous(eps, window)?,
        TimeKind::Discrete => delta_discrete(eps, window.round() as usize, traj.n)?,
    };
    let bound = 1.0 - delta / cert.rho;
    let xbar = weighted_mean(&cert.r, &traj.states[0])?;
    let stacked = DVector::from_iterator(
        traj.n * traj.p,
        (0..traj.p).flat_map(|_| xbar.iter().copied()),
    );
    let energy = |i: usize| disagreement_energy(&traj.states[i], &stacked, &cert.omega);
    let v_floor = TAU_V_FLOOR * energy(0)?;
    let t_end = *traj.times.last().unwrap();
    let mut out = Vec::new();
    let mut j = 0usize;
    loop {
        let start = j as f64 * window;
        let end = start + window;
        if end > t_end * (1.0 + 1e-12) {
            break;
        }
        j += 1;
        let (Some(i0), Some(i1)) = (traj.index_of(start), traj.index_of(end)) else {
            continue;
        };
        let sigma_min = sym_eig_range(&window_integral(q, kind, start, window, step)?).0;
        let v0 = energy(i0)?;
        let v1 = energy(i1)?;
        let observed = if v0 > 0.0 { v1 / v0 } else { 0.0 };
        let skipped = sigma_min < eps;
        let unresolved = v0 <= v_floor;
        let pass = skipped || unresolved || observed <= bound + TAU_SOLVE;
        out.push(ContractionCheck {
            start,
            end,
            sigma_min,
            bound,
            v_start: v0,
            v_end: v1,
            observed,
            pass,
            skipped,
            unresolved,
        });
    }
    Ok(out)
}
