//! Contraction increments, persistence and sufficiency of excitation, and
//! observability classification.
//!
//! Every check here scans a finite horizon. A positive answer is evidence on
//! that horizon, not a proof for all time.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SyncError};
use crate::linalg::{spectral_norm, sym_eig_range, symmetrize};
use crate::ltv::{CachedPair, MatFn, MatrixFunction};
use crate::ode;
use crate::tol::TAU_SOLVE;
use crate::TimeKind;

/// `δ(ε, T) = min{ε/2, ε³/(240 T⁵)}`.
pub fn delta_continuous(eps: f64, t: f64) -> Result<f64> {
    positive("eps", eps)?;
    positive("T", t)?;
    Ok((eps / 2.0).min(eps.powi(3) / (240.0 * t.powi(5))))
}

/// `δ(ε, N) = ε⁴ / (16 N⁸ n⁴)`.
pub fn delta_discrete(eps: f64, steps: usize, n: usize) -> Result<f64> {
    positive("eps", eps)?;
    positive("N", steps as f64)?;
    positive("n", n as f64)?;
    let (big_n, n) = (steps as f64, n as f64);
    Ok(eps.powi(4) / (16.0 * big_n.powi(8) * n.powi(4)))
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SyncError::NonPositive { name, value })
    }
}

fn delta_for(kind: TimeKind, eps: f64, len: f64, n: usize) -> Result<f64> {
    if eps <= 0.0 {
        return Ok(0.0);
    }
    match kind {
        TimeKind::Continuous => delta_continuous(eps, len),
        TimeKind::Discrete => delta_discrete(eps, len.round() as usize, n),
    }
}

/// How finely a window integral is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// Simpson subintervals no wider than this.
    Step(f64),
    /// A fixed number of Simpson subintervals per window.
    Intervals(usize),
}

impl Quadrature {
    fn step_for(self, len: f64) -> f64 {
        match self {
            Quadrature::Step(h) => h,
            Quadrature::Intervals(m) => len / m.max(2) as f64,
        }
    }
}

/// `∫_{t0}^{t0+len} Q` (Simpson) or `Σ_{k=t0}^{t0+len-1} Q_k`.
pub fn window_integral(
    q: &dyn MatrixFunction,
    kind: TimeKind,
    t0: f64,
    len: f64,
    step: f64,
) -> Result<DMatrix<f64>> {
    if !(len > 0.0) {
        return Err(SyncError::BadWindow(len));
    }
    let dims = q.dims();
    match kind {
        TimeKind::Continuous => {
            let t1 = t0 + len;
            q.check_domain(t0)?;
            q.check_domain(t1)?;
            let breaks = q.breakpoints(t0, t1);
            let w = ode::simpson(|t, side| q.eval_side(t, side), dims, t0, t1, step, &breaks)?;
            Ok(symmetrize(&w))
        }
        TimeKind::Discrete => {
            let k0 = t0.round() as i64;
            let steps = len.round() as i64;
            let mut w = DMatrix::zeros(dims.0, dims.1);
            for k in k0..k0 + steps {
                w += q.eval(k as f64)?;
            }
            Ok(symmetrize(&w))
        }
    }
}

/// Smallest eigenvalue of the (symmetric) window integral.
pub fn window_sigma_min(
    q: &dyn MatrixFunction,
    kind: TimeKind,
    t0: f64,
    len: f64,
    step: f64,
) -> Result<f64> {
    Ok(sym_eig_range(&window_integral(q, kind, t0, len, step)?).0)
}

/// Outcome of a persistence-of-excitation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub holds: bool,
    /// Start of the window with the smallest σ_min, and that σ_min.
    pub worst_window: (f64, f64),
    pub window: f64,
    pub eps: f64,
    pub horizon: f64,
    pub stride: f64,
    pub windows_scanned: usize,
}

/// Scans windows `[t, t+T]` for `t = 0, stride, … ≤ horizon - T` and checks
/// `σ_min(∫ Q) ≥ eps` on each. The stride defaults to `T/10` (at least one
/// step in discrete time).
pub fn check_persistent_excitation(
    q: &dyn MatrixFunction,
    kind: TimeKind,
    window: f64,
    eps: f64,
    horizon: f64,
    stride: Option<f64>,
    step: f64,
) -> Result<PersistenceReport> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(SyncError::BadWindow(window));
    }
    if horizon < window {
        return Err(SyncError::BadWindow(horizon - window));
    }
    let mut stride = stride.unwrap_or(window / 10.0);
    if kind == TimeKind::Discrete {
        stride = stride.round().max(1.0);
    }
    if !(stride > 0.0) {
        return Err(SyncError::NonPositive {
            name: "stride",
            value: stride,
        });
    }
    let last = horizon - window;
    let count = (last / stride * (1.0 + 1e-12)).floor() as usize;
    let mut worst = (0.0, f64::INFINITY);
    for i in 0..=count {
        let t = i as f64 * stride;
        let s = window_sigma_min(q, kind, t, window, step)?;
        if s < worst.1 {
            worst = (t, s);
        }
    }
    Ok(PersistenceReport {
        holds: worst.1 >= eps,
        worst_window: worst,
        window,
        eps,
        horizon,
        stride,
        windows_scanned: count + 1,
    })
}

/// How contiguous certificate windows are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Windows of equal length.
    Fixed(f64),
    /// Grow each window until its σ_min reaches `target_eps` or its length
    /// reaches `t_max`.
    Greedy { target_eps: f64, t_max: f64 },
    /// Explicit window boundaries `0 = b_0 < b_1 < …`.
    Breaks(Vec<f64>),
}

/// Finite-horizon proxy for divergence of `Σ δ(ε_i, T_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    DivergingAtHorizon,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateWindow {
    pub start: f64,
    pub length: f64,
    pub eps: f64,
    pub delta: f64,
}

/// Contiguous windows `(ε_i, T_i)` with the partial sums of `δ(ε_i, T_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationCertificate {
    pub kind: TimeKind,
    pub windows: Vec<CertificateWindow>,
    pub delta_partial_sums: Vec<f64>,
    pub horizon: f64,
    pub verdict: Verdict,
}

impl ExcitationCertificate {
    pub fn delta_sum(&self) -> f64 {
        self.delta_partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Fraction of the overall mean δ the last quartile must keep.
pub const DIVERGE_TAIL_RATIO: f64 = 0.5;
/// Partial sum the certificate must reach.
pub const DIVERGE_MIN_SUM: f64 = 1.0;

/// "diverging-at-horizon" iff the last-quartile mean δ is at least half the
/// overall mean and the total reaches 1. A heuristic, not a divergence proof.
pub fn verdict(deltas: &[f64]) -> Verdict {
    let m = deltas.len();
    if m == 0 {
        return Verdict::Stalled;
    }
    let total: f64 = deltas.iter().sum();
    let mean = total / m as f64;
    let tail = &deltas[(3 * m) / 4..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    if tail_mean >= DIVERGE_TAIL_RATIO * mean && total >= DIVERGE_MIN_SUM && mean > 0.0 {
        Verdict::DivergingAtHorizon
    } else {
        Verdict::Stalled
    }
}

/// Partitions `[0, horizon]` into contiguous windows per `policy` and records
/// `ε_i = σ_min` of each window integral with its `δ(ε_i, T_i)`.
///
/// `Q` is expected to take values in the unit ball of SPSD matrices.
pub fn build_sufficiency_certificate(
    q: &dyn MatrixFunction,
    kind: TimeKind,
    horizon: f64,
    policy: &WindowPolicy,
    quad: Quadrature,
) -> Result<ExcitationCertificate> {
    let n = q.dims().0;
    let mut windows = Vec::new();
    let mut push = |start: f64, length: f64, w: &DMatrix<f64>| -> Result<()> {
        let eps = sym_eig_range(w).0.max(0.0);
        let delta = delta_for(kind, eps, length, n)?;
        windows.push(CertificateWindow {
            start,
            length,
            eps,
            delta,
        });
        Ok(())
    };
    let slack = 1e-9 * horizon.max(1.0);
    match policy {
        WindowPolicy::Fixed(len) => {
            let len = if kind == TimeKind::Discrete {
                len.round()
            } else {
                *len
            };
            if !(len > 0.0) {
                return Err(SyncError::BadWindow(len));
            }
            let mut i = 0usize;
            loop {
                let start = i as f64 * len;
                if start + len > horizon + slack {
                    break;
                }
                let w = window_integral(q, kind, start, len, quad.step_for(len))?;
                push(start, len, &w)?;
                i += 1;
            }
        }
        WindowPolicy::Greedy { target_eps, t_max } => {
            let grow = match kind {
                TimeKind::Continuous => t_max / 100.0,
                TimeKind::Discrete => 1.0,
            };
            if !(grow > 0.0) {
                return Err(SyncError::BadWindow(*t_max));
            }
            let mut start = 0.0;
            while start + grow <= horizon + slack {
                let mut len = 0.0;
                let mut w = DMatrix::zeros(n, n);
                loop {
                    w += window_integral(q, kind, start + len, grow, quad.step_for(grow))?;
                    len += grow;
                    let done = sym_eig_range(&w).0 >= *target_eps
                        || len + grow > t_max + slack
                        || start + len + grow > horizon + slack;
                    if done {
                        break;
                    }
                }
                push(start, len, &w)?;
                start += len;
            }
        }
        WindowPolicy::Breaks(bounds) => {
            for pair in bounds.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if b > horizon + slack {
                    break;
                }
                let w = window_integral(q, kind, a, b - a, quad.step_for(b - a))?;
                push(a, b - a, &w)?;
            }
        }
    }
    let mut acc = 0.0;
    let delta_partial_sums: Vec<f64> = windows
        .iter()
        .map(|w| {
            acc += w.delta;
            acc
        })
        .collect();
    let deltas: Vec<f64> = windows.iter().map(|w| w.delta).collect();
    Ok(ExcitationCertificate {
        kind,
        verdict: verdict(&deltas),
        windows,
        delta_partial_sums,
        horizon,
    })
}

/// Strongest observability notion supported by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservabilityClass {
    Uniform,
    AsymptoticOnlyEvidence,
    NoneAtHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub class: ObservabilityClass,
    pub window: f64,
    pub horizon: f64,
    /// Normalization `h = max |Q_t|` applied to the grammian integrand.
    pub normalization: f64,
    pub persistence: PersistenceReport,
    pub certificate_verdict: Verdict,
    pub delta_sum: f64,
}

/// Relative floor for uniform observability: windows of length `T` must have
/// `σ_min ≥ UNIFORM_FLOOR · T` after normalization.
pub const UNIFORM_FLOOR: f64 = 1e-6;

/// Grammian integrand divided by its largest norm `h` on a `grid` over
/// `[0, horizon]`, so that it takes values in the unit SPSD ball; returns
/// the function and `h` (unscaled when `h = 0`).
pub fn normalized_integrand(pair: &CachedPair, horizon: f64, grid: f64) -> Result<(MatFn, f64)> {
    positive("grid", grid)?;
    let mut h = 0.0f64;
    let mut i = 0usize;
    loop {
        let t = i as f64 * grid;
        if t > horizon {
            break;
        }
        h = h.max(spectral_norm(&pair.integrand(t)?));
        i += 1;
    }
    let scale = if h > 0.0 { h } else { 1.0 };
    Ok((pair.integrand_function(scale)?, h))
}

/// Classifies a pair by scanning its normalized grammian integrand: uniform
/// if every window of length `window` is excited, asymptotic evidence if the
/// sufficiency certificate diverges, none otherwise.
pub fn classify_observability(
    pair: &CachedPair,
    horizon: f64,
    window: f64,
    step: f64,
) -> Result<ObservabilityReport> {
    let kind = pair.kind();
    let horizon = horizon.min(pair.horizon());
    let grid = match kind {
        TimeKind::Continuous => (window / 50.0).min(step * 10.0).max(step),
        TimeKind::Discrete => 1.0,
    };
    let (q, h) = normalized_integrand(pair, horizon, grid)?;
    let eps = UNIFORM_FLOOR * window;
    let persistence =
        check_persistent_excitation(q.as_ref(), kind, window, eps, horizon, None, step)?;
    let cert = build_sufficiency_certificate(
        q.as_ref(),
        kind,
        horizon,
        &WindowPolicy::Fixed(window),
        Quadrature::Step(step),
    )?;
    let class = if persistence.holds && h > 0.0 {
        ObservabilityClass::Uniform
    } else if cert.verdict == Verdict::DivergingAtHorizon {
        ObservabilityClass::AsymptoticOnlyEvidence
    } else {
        ObservabilityClass::NoneAtHorizon
    };
    Ok(ObservabilityReport {
        class,
        window,
        horizon,
        normalization: if h > 0.0 { h } else { 1.0 },
        persistence,
        certificate_verdict: cert.verdict,
        delta_sum: cert.delta_sum(),
    })
}

/// Both sides of `3T² ∫₀ᵀ f² ≥ (∫₀ᵀ f)³` for `f` piecewise constant on equal
/// pieces of `[0, T]`; `true` iff the inequality holds within τ_solve.
pub fn fact_int_check(samples: &[f64], t: f64) -> Result<bool> {
    positive("T", t)?;
    if samples.is_empty() {
        return Err(SyncError::Shape("no samples".into()));
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(SyncError::Range { index, value });
    }
    let h = t / samples.len() as f64;
    let int1: f64 = samples.iter().sum::<f64>() * h;
    let int2: f64 = samples.iter().map(|v| v * v).sum::<f64>() * h;
    Ok(3.0 * t * t * int2 >= int1.powi(3) - TAU_SOLVE)
}

/// Both sides of `σ_min(Σ Q_k²) ≥ ε²/(N² n²)` with `ε = σ_min(Σ Q_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactThree {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the inequality over `Q_{k0}, …, Q_{k0+N-1}`.
pub fn fact_three_check(q: &dyn MatrixFunction, k0: i64, steps: usize) -> Result<FactThree> {
    positive("N", steps as f64)?;
    let n = q.dims().0;
    let mut sum = DMatrix::zeros(n, n);
    let mut sum_sq = DMatrix::zeros(n, n);
    for k in k0..k0 + steps as i64 {
        let qk = q.eval(k as f64)?;
        let norm = spectral_norm(&qk);
        if norm > 1.0 + TAU_SOLVE {
            return Err(SyncError::NormBall { t: k as f64, norm });
        }
        sum_sq += &qk * &qk;
        sum += qk;
    }
    let eps = sym_eig_range(&symmetrize(&sum)).0.max(0.0);
    let lhs = sym_eig_range(&symmetrize(&sum_sq)).0;
    let rhs = eps * eps / ((steps * steps * n * n) as f64);
    Ok(FactThree {
        lhs,
        rhs,
        holds: lhs >= rhs - TAU_SOLVE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv::{constant, harmonic_integrand_closed_form, zero, Analytic, LtvPair, Sampled};
    use std::f64::consts::PI;

    #[test]
    fn delta_values() {
        assert!((delta_continuous(2.0, 1.0).unwrap() - 1.0 / 30.0).abs() < 1e-15);
        assert!((delta_continuous(0.1, 1.0).unwrap() - 1e-3 / 240.0).abs() < 1e-18);
        assert_eq!(delta_discrete(1.0, 1, 1).unwrap(), 1.0 / 16.0);
        assert_eq!(delta_discrete(2.0, 2, 1).unwrap(), 1.0 / 256.0);
        assert!(delta_discrete(1.0, 3, 2).unwrap() < delta_discrete(1.0, 2, 2).unwrap());
        assert!(delta_continuous(0.0, 1.0).is_err());
        assert!(delta_continuous(1.0, -1.0).is_err());
        assert!(delta_discrete(1.0, 0, 1).is_err());
    }

    #[test]
    fn delta_branches_meet_at_crossing() {
        // ε/2 = ε³/(240T⁵) exactly when ε² = 120 T⁵
        let t: f64 = 0.7;
        let eps = (120.0 * t.powi(5)).sqrt();
        let d = delta_continuous(eps, t).unwrap();
        assert!((d - eps / 2.0).abs() < 1e-14);
        assert!((d - eps.powi(3) / (240.0 * t.powi(5))).abs() < 1e-14);
    }

    #[test]
    fn window_sigma_examples() {
        let id = constant(DMatrix::identity(2, 2));
        assert!(
            (window_sigma_min(id.as_ref(), TimeKind::Continuous, 1.0, 3.0, 0.1).unwrap() - 3.0)
                .abs()
                < 1e-12
        );
        let h = harmonic_integrand_closed_form();
        assert!(
            (window_sigma_min(&h, TimeKind::Continuous, 0.3, 2.0 * PI, 1e-2).unwrap() - PI).abs()
                < 1e-9
        );
        assert!(window_sigma_min(id.as_ref(), TimeKind::Continuous, 0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn persistence_examples() {
        let h = harmonic_integrand_closed_form();
        let r = check_persistent_excitation(
            &h,
            TimeKind::Continuous,
            2.0 * PI,
            PI - 0.01,
            40.0 * PI,
            None,
            1e-2,
        )
        .unwrap();
        assert!(r.holds);
        assert_eq!(r.windows_scanned, 191);

        let decay = Analytic::new("decay", (2, 2), |t: f64| {
            DMatrix::identity(2, 2) * (-t).exp()
        })
        .shared();
        let r = check_persistent_excitation(
            decay.as_ref(),
            TimeKind::Continuous,
            1.0,
            1e-3,
            30.0,
            None,
            1e-2,
        )
        .unwrap();
        assert!(!r.holds);
        assert!(r.worst_window.0 > 28.0);

        let z = zero(2, 2);
        let r = check_persistent_excitation(
            z.as_ref(),
            TimeKind::Continuous,
            1.0,
            1e-12,
            5.0,
            None,
            0.1,
        )
        .unwrap();
        assert!(!r.holds);
        assert!(check_persistent_excitation(
            z.as_ref(),
            TimeKind::Continuous,
            0.0,
            1.0,
            5.0,
            None,
            0.1
        )
        .is_err());
    }

    #[test]
    fn certificate_fixed_windows() {
        let h = harmonic_integrand_closed_form();
        let cert = build_sufficiency_certificate(
            &h,
            TimeKind::Continuous,
            20.0 * PI,
            &WindowPolicy::Fixed(2.0 * PI),
            Quadrature::Intervals(64),
        )
        .unwrap();
        assert_eq!(cert.windows.len(), 10);
        let d = delta_continuous(PI, 2.0 * PI).unwrap();
        for (i, w) in cert.windows.iter().enumerate() {
            assert!((w.eps - PI).abs() < 1e-9);
            assert!((w.start - 2.0 * PI * i as f64).abs() < 1e-9);
            assert!((cert.delta_partial_sums[i] - d * (i + 1) as f64).abs() < 1e-12);
        }
        // linear growth, but the sum is far from 1 on this horizon
        assert_eq!(cert.verdict, Verdict::Stalled);

        let z = zero(2, 2);
        let cert = build_sufficiency_certificate(
            z.as_ref(),
            TimeKind::Continuous,
            10.0,
            &WindowPolicy::Fixed(1.0),
            Quadrature::Step(0.1),
        )
        .unwrap();
        assert!(cert.windows.iter().all(|w| w.eps == 0.0));
        assert_eq!(cert.verdict, Verdict::Stalled);
    }

    #[test]
    fn certificate_greedy_windows_are_contiguous() {
        let h = harmonic_integrand_closed_form();
        let cert = build_sufficiency_certificate(
            &h,
            TimeKind::Continuous,
            30.0,
            &WindowPolicy::Greedy {
                target_eps: 1.0,
                t_max: 6.0,
            },
            Quadrature::Step(1e-2),
        )
        .unwrap();
        let mut t = 0.0;
        for w in &cert.windows {
            assert!((w.start - t).abs() < 1e-9);
            assert!(w.length <= 6.0 + 1e-9);
            assert!(w.eps >= 1.0 || w.length + 0.06 > 6.0 || w.start + w.length + 0.06 > 30.0);
            t += w.length;
        }
        assert!(cert.delta_partial_sums.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(&[0.5; 8]), Verdict::DivergingAtHorizon);
        assert_eq!(verdict(&[0.1; 8]), Verdict::Stalled);
        assert_eq!(
            verdict(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            Verdict::Stalled
        );
        assert_eq!(verdict(&[]), Verdict::Stalled);
    }

    #[test]
    fn classify_examples() {
        let hp = CachedPair::new(LtvPair::harmonic_oscillator(), 1e-2, 40.0).unwrap();
        let r = classify_observability(&hp, 40.0, 2.0 * PI, 1e-2).unwrap();
        assert_eq!(r.class, ObservabilityClass::Uniform);

        let p = LtvPair::new(
            zero(2, 2),
            constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
            TimeKind::Continuous,
        )
        .unwrap();
        let cp = CachedPair::new(p, 1e-2, 40.0).unwrap();
        let r = classify_observability(&cp, 40.0, 2.0 * PI, 1e-2).unwrap();
        assert_eq!(r.class, ObservabilityClass::NoneAtHorizon);
    }

    #[test]
    fn fact_int_examples() {
        assert!(fact_int_check(&[1.0; 4], 2.0).unwrap());
        assert!(fact_int_check(&[0.0; 4], 2.0).unwrap());
        assert_eq!(
            fact_int_check(&[0.5, 1.5], 1.0),
            Err(SyncError::Range {
                index: 1,
                value: 1.5
            })
        );
    }

    #[test]
    fn fact_three_examples() {
        let id = constant(DMatrix::identity(2, 2));
        let r = fact_three_check(id.as_ref(), 0, 2).unwrap();
        assert!(r.holds && (r.lhs - 2.0).abs() < 1e-12 && (r.rhs - 0.25).abs() < 1e-12);
        let z = zero(3, 3);
        assert!(fact_three_check(z.as_ref(), 0, 4).unwrap().holds);
        let big = Sampled::new(0.0, 1.0, vec![DMatrix::identity(2, 2) * 2.0]).unwrap();
        assert!(matches!(
            fact_three_check(&big, 0, 1),
            Err(SyncError::NormBall { .. })
        ));
    }
}
