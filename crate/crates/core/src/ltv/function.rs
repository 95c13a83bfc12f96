//! Time-indexed matrix providers.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Result, SyncError};
use crate::ode::Side;

/// A matrix-valued function of time (or of the step index in discrete time).
///
/// Piecewise functions are right-continuous: `value(t)` is the value on the
/// piece starting at `t`, `value_left(t)` the limit from the left.
pub trait MatrixFunction: Send + Sync + fmt::Debug {
    fn dims(&self) -> (usize, usize);

    /// Closed interval on which the function may be evaluated.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn value(&self, t: f64) -> DMatrix<f64>;

    fn value_left(&self, t: f64) -> DMatrix<f64> {
        self.value(t)
    }

    /// Points in the open interval `(t0, t1)` where the function may jump.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }

    fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_domain(t)?;
        Ok(self.value(t))
    }

    fn eval_side(&self, t: f64, side: Side) -> Result<DMatrix<f64>> {
        self.check_domain(t)?;
        Ok(match side {
            Side::Right => self.value(t),
            Side::Left => self.value_left(t),
        })
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        if t.is_nan() || t < start || t > end {
            return Err(SyncError::OutOfDomain { t, start, end });
        }
        Ok(())
    }
}

/// Shared handle to a matrix function.
pub type MatFn = Arc<dyn MatrixFunction>;

/// A constant matrix; `zero` is the all-zero case.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant(pub DMatrix<f64>);

pub fn constant(m: DMatrix<f64>) -> MatFn {
    Arc::new(Constant(m))
}

pub fn zero(rows: usize, cols: usize) -> MatFn {
    Arc::new(Constant(DMatrix::zeros(rows, cols)))
}

impl MatrixFunction for Constant {
    fn dims(&self) -> (usize, usize) {
        self.0.shape()
    }
    fn value(&self, _t: f64) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// A closure-backed smooth function.
#[derive(Clone)]
pub struct Analytic {
    label: String,
    dims: (usize, usize),
    domain: (f64, f64),
    f: Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
}

impl Analytic {
    pub fn new<F>(label: impl Into<String>, dims: (usize, usize), f: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Analytic {
            label: label.into(),
            dims,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
            f: Arc::new(f),
        }
    }

    pub fn with_domain(mut self, start: f64, end: f64) -> Self {
        self.domain = (start, end);
        self
    }

    pub fn shared(self) -> MatFn {
        Arc::new(self)
    }
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analytic")
            .field("label", &self.label)
            .field("dims", &self.dims)
            .finish()
    }
}

impl MatrixFunction for Analytic {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        (self.f)(t)
    }
}

/// `t ↦ [[cos θ, sin θ], [-sin θ, cos θ]]` with `θ = rate·t + phase`.
///
/// With unit rate this is `e^{At}` for `A = [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2d {
    pub rate: f64,
    pub phase: f64,
}

impl MatrixFunction for Rotation2d {
    fn dims(&self) -> (usize, usize) {
        (2, 2)
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        rotation(self.rate * t + self.phase)
    }
}

pub fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

/// Angle schedule driving a [`ProjectionLine`].
#[derive(Debug, Clone, PartialEq)]
pub enum AngleSchedule {
    Linear {
        rate: f64,
        offset: f64,
    },
    /// Piecewise-linear angle: on `[starts[k], starts[k+1])` the angle is
    /// `values[k] + slopes[k]·(t - starts[k])`. The last start is the end of
    /// the domain; evaluating there returns `tail_value`.
    Piecewise {
        starts: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
        tail_value: f64,
    },
}

impl AngleSchedule {
    fn segment(&self, t: f64, side: Side) -> Option<usize> {
        match self {
            AngleSchedule::Linear { .. } => None,
            AngleSchedule::Piecewise { starts, .. } => {
                let segs = starts.len() - 1;
                // index of the last start <= t (right) or < t (left)
                let idx = match side {
                    Side::Right => starts.partition_point(|&s| s <= t),
                    Side::Left => starts.partition_point(|&s| s < t),
                };
                Some(idx.saturating_sub(1).min(segs))
            }
        }
    }

    pub fn angle(&self, t: f64, side: Side) -> f64 {
        match self {
            AngleSchedule::Linear { rate, offset } => offset + rate * t,
            AngleSchedule::Piecewise {
                starts,
                values,
                slopes,
                tail_value,
            } => {
                let k = self.segment(t, side).unwrap();
                if k == slopes.len() {
                    *tail_value
                } else {
                    values[k] + slopes[k] * (t - starts[k])
                }
            }
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            AngleSchedule::Linear { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            AngleSchedule::Piecewise { starts, .. } => (starts[0], *starts.last().unwrap()),
        }
    }
}

/// Orthogonal projection onto the line spanned by `[cos θ(t), sin θ(t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionLine {
    pub angle: AngleSchedule,
}

impl ProjectionLine {
    pub fn linear(rate: f64, offset: f64) -> Self {
        ProjectionLine {
            angle: AngleSchedule::Linear { rate, offset },
        }
    }
}

pub fn projection(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c * c, s * c, s * c, s * s])
}

impl MatrixFunction for ProjectionLine {
    fn dims(&self) -> (usize, usize) {
        (2, 2)
    }
    fn domain(&self) -> (f64, f64) {
        self.angle.domain()
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        projection(self.angle.angle(t, Side::Right))
    }
    fn value_left(&self, t: f64) -> DMatrix<f64> {
        projection(self.angle.angle(t, Side::Left))
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match &self.angle {
            AngleSchedule::Linear { .. } => Vec::new(),
            AngleSchedule::Piecewise { starts, .. } => starts
                .iter()
                .copied()
                .filter(|&s| s > t0 && s < t1)
                .collect(),
        }
    }
}

/// Piecewise-constant samples on a uniform grid `t0 + i·dt`; sample `i` holds
/// on `[t0 + i·dt, t0 + (i+1)·dt)`. A periodic function repeats the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    t0: f64,
    dt: f64,
    samples: Vec<DMatrix<f64>>,
    periodic: bool,
}

impl Sampled {
    pub fn new(t0: f64, dt: f64, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::build(t0, dt, samples, false)
    }

    pub fn periodic(t0: f64, dt: f64, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::build(t0, dt, samples, true)
    }

    fn build(t0: f64, dt: f64, samples: Vec<DMatrix<f64>>, periodic: bool) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SyncError::NonPositive {
                name: "sample spacing",
                value: dt,
            });
        }
        let first = samples
            .first()
            .ok_or_else(|| SyncError::Shape("no samples".into()))?;
        let dims = first.shape();
        if samples.iter().any(|s| s.shape() != dims) {
            return Err(SyncError::Shape("samples differ in shape".into()));
        }
        Ok(Sampled {
            t0,
            dt,
            samples,
            periodic,
        })
    }

    pub fn samples(&self) -> &[DMatrix<f64>] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.dt
    }

    pub fn shared(self) -> MatFn {
        Arc::new(self)
    }

    fn index(&self, t: f64, side: Side) -> usize {
        let x = (t - self.t0) / self.dt;
        // snap values within roundoff of a grid point onto it
        let nearest = x.round();
        let x = if (x - nearest).abs() < 1e-9 {
            nearest
        } else {
            x
        };
        let mut i = match side {
            Side::Right => x.floor(),
            Side::Left => x.ceil() - 1.0,
        };
        if i < 0.0 {
            i = 0.0;
        }
        let i = i as usize;
        if self.periodic {
            i % self.samples.len()
        } else {
            i.min(self.samples.len() - 1)
        }
    }

    /// Reads a CSV whose rows are `t, m_11, m_12, …` (row-major entries).
    pub fn from_csv<R: Read>(reader: R, rows: usize, cols: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| SyncError::Parse(format!("row {}: {s}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>();
            let vals = match vals {
                Ok(v) => v,
                // tolerate one header line
                Err(e) if lineno == 0 => {
                    let _ = e;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if vals.len() != 1 + rows * cols {
                return Err(SyncError::Shape(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 1,
                    vals.len(),
                    1 + rows * cols
                )));
            }
            times.push(vals[0]);
            samples.push(DMatrix::from_row_slice(rows, cols, &vals[1..]));
        }
        if times.is_empty() {
            return Err(SyncError::Parse("no samples in file".into()));
        }
        let dt = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        for w in times.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(SyncError::Parse(
                    "sample times must be strictly increasing with uniform spacing".into(),
                ));
            }
        }
        Self::new(times[0], dt, samples)
    }
}

impl MatrixFunction for Sampled {
    fn dims(&self) -> (usize, usize) {
        self.samples[0].shape()
    }
    fn domain(&self) -> (f64, f64) {
        if self.periodic {
            (self.t0, f64::INFINITY)
        } else {
            (self.t0, self.t0 + self.dt * self.samples.len() as f64)
        }
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        self.samples[self.index(t, Side::Right)].clone()
    }
    fn value_left(&self, t: f64) -> DMatrix<f64> {
        self.samples[self.index(t, Side::Left)].clone()
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let (start, end) = self.domain();
        let lo = t0.max(start);
        let hi = t1.min(end);
        if hi <= lo {
            return Vec::new();
        }
        let first = ((lo - self.t0) / self.dt).floor() as i64 + 1;
        let mut out = Vec::new();
        let mut i = first.max(1);
        loop {
            let b = self.t0 + i as f64 * self.dt;
            if b >= hi {
                break;
            }
            if b > lo {
                out.push(b);
            }
            i += 1;
        }
        out
    }
}

/// `factor · inner(t)`.
#[derive(Debug, Clone)]
pub struct Scaled {
    pub inner: MatFn,
    pub factor: f64,
}

impl MatrixFunction for Scaled {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }
    fn domain(&self) -> (f64, f64) {
        self.inner.domain()
    }
    fn value(&self, t: f64) -> DMatrix<f64> {
        self.inner.value(t) * self.factor
    }
    fn value_left(&self, t: f64) -> DMatrix<f64> {
        self.inner.value_left(t) * self.factor
    }
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.inner.breakpoints(t0, t1)
    }
}

pub fn scaled(inner: MatFn, factor: f64) -> MatFn {
    Arc::new(Scaled { inner, factor })
}

/// The harmonic-oscillator grammian integrand in closed form: the projection
/// onto `[-sin t, cos t]`.
pub fn harmonic_integrand_closed_form() -> ProjectionLine {
    ProjectionLine::linear(1.0, FRAC_PI_2)
}
