//! Named matrix-function generators, addressable from configuration files.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::function::{constant, zero, ProjectionLine, Rotation2d, Sampled};
use super::{LtvPair, MatFn, MatrixFunction};
use crate::error::{Result, SyncError};
use crate::graph::matrix_from_rows;
use crate::TimeKind;

/// A matrix function by generator name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero {
        rows: usize,
        cols: usize,
    },
    Constant {
        value: Vec<Vec<f64>>,
    },
    Rotation2d {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Projection onto `[cos θ, sin θ]` with `θ(t) = rate·t + offset`.
    ProjectionLine {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    /// CSV rows `t, m_11, m_12, …`; relative paths resolve against the
    /// configuration file.
    Sampled {
        path: PathBuf,
        rows: usize,
        cols: usize,
        #[serde(default)]
        periodic: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn build(&self, base: &Path) -> Result<MatFn> {
        Ok(match self {
            FunctionSpec::Zero { rows, cols } => zero(*rows, *cols),
            FunctionSpec::Constant { value } => constant(matrix_from_rows(value)?),
            FunctionSpec::Rotation2d { rate, phase } => Arc::new(Rotation2d {
                rate: *rate,
                phase: *phase,
            }),
            FunctionSpec::ProjectionLine { rate, offset } => {
                Arc::new(ProjectionLine::linear(*rate, *offset))
            }
            FunctionSpec::Sampled {
                path,
                rows,
                cols,
                periodic,
            } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let file = File::open(&full)
                    .map_err(|e| SyncError::Io(format!("{}: {e}", full.display())))?;
                let s = Sampled::from_csv(file, *rows, *cols)?;
                if *periodic {
                    let dt = s.spacing();
                    let samples = s.samples().to_vec();
                    Sampled::periodic(s.domain().0, dt, samples)?.shared()
                } else {
                    s.shared()
                }
            }
        })
    }
}

/// A `(C, A)` pair by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    HarmonicOscillatorPair,
    RotationPair {
        angle: f64,
    },
    Custom {
        a: FunctionSpec,
        c: FunctionSpec,
        kind: TimeKind,
    },
}

impl PairSpec {
    pub fn build(&self, base: &Path) -> Result<LtvPair> {
        match self {
            PairSpec::HarmonicOscillatorPair => Ok(LtvPair::harmonic_oscillator()),
            PairSpec::RotationPair { angle } => Ok(LtvPair::rotation_pair(*angle)),
            PairSpec::Custom { a, c, kind } => LtvPair::new(a.build(base)?, c.build(base)?, *kind),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_named_generators() {
        let base = Path::new(".");
        let f = FunctionSpec::Rotation2d {
            rate: 1.0,
            phase: 0.0,
        }
        .build(base)
        .unwrap();
        assert!((f.value(0.5) - crate::ltv::rotation(0.5)).amax() < 1e-15);
        let z = FunctionSpec::Zero { rows: 2, cols: 3 }.build(base).unwrap();
        assert_eq!(z.dims(), (2, 3));
        let c = FunctionSpec::Constant {
            value: vec![vec![1.0, 2.0]],
        }
        .build(base)
        .unwrap();
        assert_eq!(c.dims(), (1, 2));
        assert!(FunctionSpec::Constant {
            value: vec![vec![1.0], vec![1.0, 2.0]]
        }
        .build(base)
        .is_err());
        let pair = PairSpec::HarmonicOscillatorPair.build(base).unwrap();
        assert_eq!((pair.n(), pair.m()), (2, 1));
    }

    #[test]
    fn deserializes_tagged_specs() {
        let spec: FunctionSpec =
            serde_json::from_str(r#"{"name":"projection_line","rate":2.0}"#).unwrap();
        assert_eq!(
            spec,
            FunctionSpec::ProjectionLine {
                rate: 2.0,
                offset: 0.0
            }
        );
        let pair: PairSpec =
            serde_json::from_str(r#"{"name":"harmonic_oscillator_pair"}"#).unwrap();
        assert_eq!(pair, PairSpec::HarmonicOscillatorPair);
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"name":"nope"}"#).is_err());
    }

    #[test]
    fn reads_sampled_file() {
        let dir = std::env::temp_dir().join(format!("syncltv-registry-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("q.csv"), "t,q\n0,1\n1,0.5\n").unwrap();
        let spec = FunctionSpec::Sampled {
            path: "q.csv".into(),
            rows: 1,
            cols: 1,
            periodic: true,
        };
        let f = spec.build(&dir).unwrap();
        assert_eq!(f.value(3.0)[(0, 0)], 0.5);
        std::fs::remove_dir_all(&dir).ok();
    }
}
