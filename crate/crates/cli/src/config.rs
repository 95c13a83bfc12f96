//! TOML run configuration and its resolution into a scenario.
//!
//! ```toml
//! scenario = "harmonic"
//! seed = 7
//! p = 4
//!
//! [solver]
//! step = 1e-3
//! horizon = 100.0
//!
//! [outputs]
//! trajectory = "harmonic.csv"
//! report = "harmonic.json"
//!
//! [checks]
//! list = ["lyapunov", "pe"]
//! window = 6.2832
//! ```
//!
//! `scenario = "custom"` reads the `[custom]` table together with the
//! top-level `interconnection` rows and `x0`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;

use syncltv::graph::{matrix_from_rows, validate_interconnection};
use syncltv::ltv::registry::{FunctionSpec, PairSpec};
use syncltv::scenarios::{by_name, Dynamics, Outcome, Scenario, ScenarioParams};
use syncltv::{InterconnectionMatrix, Result, SyncError, TimeKind};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub p: Option<usize>,
    pub k_max: Option<usize>,
    /// Time kind of a bare `interconnection` given without a scenario.
    pub kind: Option<TimeKind>,
    /// Rows of Γ or Λ; replaces the scenario's interconnection.
    pub interconnection: Option<Vec<Vec<f64>>>,
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub checks: Checks,
    pub custom: Option<CustomScenario>,
    /// Directory that relative data paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Lyapunov,
    Stability,
    Pe,
    Se,
    Contraction,
    Monodromy,
    Observability,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default)]
    pub list: Vec<CheckName>,
    pub window: Option<f64>,
    pub eps: Option<f64>,
}

/// A scenario assembled from generator specs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub kind: TimeKind,
    /// Consensus coupling `Q_t`; exclusive with `pair`.
    pub q: Option<FunctionSpec>,
    /// Output-coupled `(C, A)`; exclusive with `q`.
    pub pair: Option<PairSpec>,
    pub expected: Outcome,
    #[serde(default = "default_every")]
    pub record_every: usize,
}

fn default_every() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| SyncError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| SyncError::Parse(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn kind_hint(&self) -> TimeKind {
        match (self.scenario.as_deref(), &self.custom) {
            (Some("rotation-dt" | "neg1-dt" | "neg2-dt"), _) => TimeKind::Discrete,
            (Some("custom"), Some(c)) => c.kind,
            (None, _) => self.kind.unwrap_or(TimeKind::Continuous),
            _ => TimeKind::Continuous,
        }
    }

    /// The configured interconnection, validated for the scenario's time kind.
    pub fn interconnection(&self) -> Result<Option<InterconnectionMatrix>> {
        match &self.interconnection {
            None => Ok(None),
            Some(rows) => Ok(Some(validate_interconnection(
                &matrix_from_rows(rows)?,
                self.kind_hint(),
            )?)),
        }
    }

    /// Builds the scenario, or `None` if no scenario is named.
    pub fn scenario(&self) -> Result<Option<Scenario>> {
        let Some(name) = self.scenario.as_deref() else {
            return Ok(None);
        };
        self.check_solver()?;
        let x0 = self.x0.clone().map(DVector::from_vec);
        if name == "custom" {
            return self.custom_scenario(x0).map(Some);
        }
        let params = ScenarioParams {
            p: self.p,
            seed: self.seed,
            horizon: self.solver.horizon,
            step: self.solver.step,
            k_max: self.k_max,
            interconnection: self.interconnection()?,
            x0,
        };
        let mut sc = by_name(name, &params)?;
        if let Some(x) = params.x0 {
            if x.len() != sc.x0.len() {
                return Err(SyncError::Shape(format!(
                    "x0 has {} entries, expected {}",
                    x.len(),
                    sc.x0.len()
                )));
            }
            sc.x0 = x;
        }
        Ok(Some(sc))
    }

    fn check_solver(&self) -> Result<()> {
        for (name, v) in [("step", self.solver.step), ("horizon", self.solver.horizon)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(SyncError::NonPositive { name, value: v });
                }
            }
        }
        Ok(())
    }

    fn custom_scenario(&self, x0: Option<DVector<f64>>) -> Result<Scenario> {
        let custom = self
            .custom
            .as_ref()
            .ok_or_else(|| SyncError::Parse("scenario \"custom\" needs a [custom] table".into()))?;
        let g = self.interconnection()?.ok_or_else(|| {
            SyncError::Parse("scenario \"custom\" needs `interconnection`".into())
        })?;
        let x0 = x0.ok_or_else(|| SyncError::Parse("scenario \"custom\" needs `x0`".into()))?;
        let horizon = self
            .solver
            .horizon
            .ok_or_else(|| SyncError::Parse("scenario \"custom\" needs solver.horizon".into()))?;
        let dynamics = match (&custom.q, &custom.pair) {
            (Some(q), None) => {
                let q = q.build(&self.base)?;
                if q.dims().0 != q.dims().1 {
                    return Err(SyncError::Shape(format!(
                        "Q is {:?}, expected square",
                        q.dims()
                    )));
                }
                Dynamics::Consensus {
                    coupling: g.into(),
                    q,
                }
            }
            (None, Some(pair)) => {
                let pair = pair.build(&self.base)?;
                if pair.kind() != custom.kind {
                    return Err(SyncError::Shape("pair and custom.kind disagree".into()));
                }
                Dynamics::Coupled {
                    coupling: g.into(),
                    pair,
                }
            }
            _ => {
                return Err(SyncError::Parse(
                    "[custom] needs exactly one of `q` or `pair`".into(),
                ))
            }
        };
        let n = match &dynamics {
            Dynamics::Consensus { q, .. } => q.dims().0,
            Dynamics::Coupled { pair, .. } => pair.n(),
        };
        let p = dynamics.coupling().p();
        if x0.len() != n * p {
            return Err(SyncError::Shape(format!(
                "x0 has {} entries, expected {}",
                x0.len(),
                n * p
            )));
        }
        Ok(Scenario {
            name: "custom".into(),
            kind: custom.kind,
            dynamics,
            x0,
            horizon,
            step: match custom.kind {
                TimeKind::Continuous => self.solver.step.unwrap_or(1e-3),
                TimeKind::Discrete => 1.0,
            },
            record_every: custom.record_every.max(1),
            expected: custom.expected,
            basis: "user-supplied configuration",
            artifact_construction: false,
            seed: self.seed,
            monodromy: None,
            windows: None,
        })
    }
}
