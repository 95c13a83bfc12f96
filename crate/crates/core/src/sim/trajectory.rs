//! Sampled array trajectories and their CSV form.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SyncError};

/// Run metadata attached to a trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scenario: String,
    pub step: f64,
    pub seed: Option<u64>,
}

/// Samples of the stacked state `x = [x_1; …; x_p]`, each `x_i ∈ Rⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub p: usize,
    pub n: usize,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(p: usize, n: usize, meta: TrajectoryMeta) -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            p,
            n,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a sample; a time equal to the last one replaces it.
    pub fn push(&mut self, t: f64, x: DVector<f64>) -> Result<()> {
        if x.len() != self.n * self.p {
            return Err(SyncError::Shape(format!(
                "state has {} entries, expected {}",
                x.len(),
                self.n * self.p
            )));
        }
        if let Some(&last) = self.times.last() {
            if t == last {
                *self.states.last_mut().unwrap() = x;
                return Ok(());
            }
            if !(t > last) {
                return Err(SyncError::Shape(format!(
                    "sample time {t} does not follow {last}"
                )));
            }
        }
        self.times.push(t);
        self.states.push(x);
        Ok(())
    }

    /// Sample `i` as the n×p matrix whose columns are the systems.
    pub fn state_matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.p, self.states[i].as_slice())
    }

    /// Index of the sample at time `t` (within a relative 1e-9), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for i in 1..=self.p {
            for j in 1..=self.n {
                h.push(format!("x_{i}_{j}"));
            }
        }
        h
    }

    /// Writes a `#` metadata line, the header and one row per sample. Numbers
    /// use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let seed = self
            .meta
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".into());
        let name: String = self
            .meta
            .scenario
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        writeln!(
            w,
            "# scenario={name} step={} seed={seed} p={} n={}",
            self.meta.step, self.p, self.n
        )?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(self.header())?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let row = std::iter::once(*t)
                .chain(x.iter().copied())
                .map(|v| v.to_string());
            cw.write_record(row)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta_line = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| SyncError::Parse("missing metadata line".into()))?;
        let mut meta = TrajectoryMeta::default();
        let (mut p, mut n) = (None, None);
        for field in meta_line.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| SyncError::Parse(format!("bad metadata field {field}")))?;
            let bad = |e: &dyn std::fmt::Display| SyncError::Parse(format!("metadata {k}: {e}"));
            match k {
                "scenario" => meta.scenario = v.to_string(),
                "step" => meta.step = v.parse().map_err(|e| bad(&e))?,
                "seed" => {
                    meta.seed = if v == "none" {
                        None
                    } else {
                        Some(v.parse().map_err(|e| bad(&e))?)
                    }
                }
                "p" => p = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
                "n" => n = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
                _ => {}
            }
        }
        let (p, n) = match (p, n) {
            (Some(p), Some(n)) if p > 0 && n > 0 => (p, n),
            _ => {
                return Err(SyncError::Parse(
                    "metadata must give positive p and n".into(),
                ))
            }
        };
        let mut traj = Trajectory::new(p, n, meta);
        let mut cr = csv::Reader::from_reader(reader);
        if cr.headers()?.len() != 1 + n * p {
            return Err(SyncError::Parse(
                "header width does not match p and n".into(),
            ));
        }
        for rec in cr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| SyncError::Parse(format!("{s}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 1 + n * p {
                return Err(SyncError::Parse("row width does not match p and n".into()));
            }
            traj.push(vals[0], DVector::from_column_slice(&vals[1..]))
                .map_err(|e| SyncError::Parse(e.to_string()))?;
        }
        if traj.is_empty() {
            return Err(SyncError::Parse("trajectory has no samples".into()));
        }
        Ok(traj)
    }
}
