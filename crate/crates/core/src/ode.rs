//! Fixed-step integration and quadrature primitives.

use nalgebra::DMatrix;

use crate::error::Result;

/// Which one-sided value to use at a point where a piecewise function jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The value at `t` itself (right-continuous convention).
    Right,
    /// The limit from the left.
    Left,
}

/// One classical Runge-Kutta step of `dx/dt = f(t, x)`; `h` may be negative.
pub fn rk4_step<F>(f: &mut F, t: f64, x: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let half = 0.5 * h;
    let k1 = f(t, x)?;
    let k2 = f(t + half, &(x + &k1 * half))?;
    let k3 = f(t + half, &(x + &k2 * half))?;
    let k4 = f(t + h, &(x + &k3 * h))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

/// A Runge-Kutta step whose first and last stages use the given one-sided
/// values; interior stages use the right value.
pub fn rk4_step_sided<F>(
    f: &mut F,
    t: f64,
    x: &DMatrix<f64>,
    h: f64,
    start: Side,
    end: Side,
) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, Side, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let half = 0.5 * h;
    let k1 = f(t, start, x)?;
    let k2 = f(t + half, Side::Right, &(x + &k1 * half))?;
    let k3 = f(t + half, Side::Right, &(x + &k2 * half))?;
    let k4 = f(t + h, end, &(x + &k3 * h))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

/// Integrates `dx/dt = f(t, x)` from `t0` to `t1` (either direction) with
/// equal steps no longer than `max_step` on every piece between breakpoints.
///
/// Stages landing on the upper end of a piece see the left limit there, so
/// piecewise-constant right-hand sides are integrated exactly piece by piece.
pub fn integrate<F>(
    f: &mut F,
    t0: f64,
    t1: f64,
    x0: &DMatrix<f64>,
    max_step: f64,
    breaks: &[f64],
) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, Side, &DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = x0.clone();
    if t1 == t0 {
        return Ok(x);
    }
    let forward = t1 > t0;
    let (lo, hi) = if forward { (t0, t1) } else { (t1, t0) };
    let mut segs = pieces(lo, hi, breaks);
    if !forward {
        segs.reverse();
    }
    for (a, b) in segs {
        let m = step_count(a, b, max_step);
        let h = (b - a) / m as f64;
        for i in 0..m {
            if forward {
                let t = a + i as f64 * h;
                let (end, h) = if i + 1 == m {
                    (Side::Left, b - t)
                } else {
                    (Side::Right, h)
                };
                x = rk4_step_sided(f, t, &x, h, Side::Right, end)?;
            } else {
                let t = b - i as f64 * h;
                let start = if i == 0 { Side::Left } else { Side::Right };
                let h = if i + 1 == m { t - a } else { h };
                x = rk4_step_sided(f, t, &x, -h, start, Side::Right)?;
            }
        }
    }
    Ok(x)
}

/// Splits `[t0, t1]` at the given interior breakpoints.
pub fn pieces(t0: f64, t1: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t1)
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut a = t0;
    for c in cuts {
        out.push((a, c));
        a = c;
    }
    out.push((a, t1));
    out
}

/// Number of equal steps no longer than `max_step` covering `[a, b]`.
pub fn step_count(a: f64, b: f64, max_step: f64) -> usize {
    let len = b - a;
    if len <= 0.0 {
        return 0;
    }
    // Shave a relative sliver so that exact multiples do not round up.
    ((len / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Composite Simpson rule for a matrix-valued integrand over `[t0, t1]`.
///
/// The interval is split at `breaks`; each piece uses an even number of
/// subintervals no wider than `step`, the right value at its left end and the
/// left limit at its right end, so jumps at breakpoints are integrated exactly.
pub fn simpson<F>(
    mut f: F,
    dims: (usize, usize),
    t0: f64,
    t1: f64,
    step: f64,
    breaks: &[f64],
) -> Result<DMatrix<f64>>
where
    F: FnMut(f64, Side) -> Result<DMatrix<f64>>,
{
    let mut total = DMatrix::zeros(dims.0, dims.1);
    if t1 <= t0 {
        return Ok(total);
    }
    for (a, b) in pieces(t0, t1, breaks) {
        let mut m = step_count(a, b, step);
        if m % 2 == 1 {
            m += 1;
        }
        let h = (b - a) / m as f64;
        let mut acc = f(a, Side::Right)? + f(b, Side::Left)?;
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(a + i as f64 * h, Side::Right)? * w;
        }
        total += acc * (h / 3.0);
    }
    Ok(total)
}
