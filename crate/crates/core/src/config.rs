//! Scenario files: model, weights and simulation settings in one JSON document.
//!
//! Relative paths inside a scenario resolve against the scenario file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble_system, OpinionModel, VectorizedSystem};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Edge, LaplacianPair};
use crate::json::MatrixInput;
use crate::linalg::{Matrix, Vector};
use crate::performance::{assemble_stage_cost, PerformanceWeights, StageCostMatrices};

/// A scalar broadcast to every entry, or an explicit list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorInput {
    Scalar(f64),
    List(Vec<f64>),
}

impl VectorInput {
    pub fn expand(&self, len: usize, name: &str) -> Result<Vector> {
        let v = match self {
            VectorInput::Scalar(s) => Vector::from_element(len, *s),
            VectorInput::List(list) if list.len() == len => Vector::from_column_slice(list),
            VectorInput::List(list) => {
                return Err(Error::Dimension(format!("`{name}` has {} entries, expected {len}", list.len())))
            }
        };
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Config(format!("`{name}` contains a non-finite entry")));
        }
        Ok(v)
    }
}

/// A matrix given inline or as a path to a JSON file holding one.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Path(String),
    Inline(MatrixInput),
}

impl MatrixSource {
    fn load(&self, base: &Path, name: &str) -> Result<Matrix> {
        let m = match self {
            MatrixSource::Inline(m) => m.to_matrix()?,
            MatrixSource::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("`{name}`: cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<MatrixInput>(&text)?.to_matrix()?
            }
        };
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::Config(format!("`{name}` contains a non-finite entry")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(String),
    /// 1-based `[source, target, weight]` triples.
    Inline { n: usize, #[serde(default)] edges: Vec<(usize, usize, f64)> },
}

impl GraphSource {
    pub fn load(&self, base: &Path) -> Result<DirectedGraph> {
        match self {
            GraphSource::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("graph: cannot read {}: {e}", path.display())))?;
                DirectedGraph::parse(&text)
            }
            GraphSource::Inline { n, edges } => {
                let edges = edges
                    .iter()
                    .map(|&(i, j, w)| {
                        if i == 0 || j == 0 {
                            return Err(Error::InvalidGraph("edge indices are 1-based".into()));
                        }
                        Ok(Edge { source: i - 1, target: j - 1, weight: w })
                    })
                    .collect::<Result<Vec<_>>>()?;
                DirectedGraph::new(*n, edges)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub w_d: VectorInput,
    pub w_p: VectorInput,
    pub w_en: VectorInput,
    pub w_ex: VectorInput,
    #[serde(default)]
    pub alpha_f: f64,
}

impl WeightsConfig {
    /// Replaces one weight by a broadcast scalar; used by parameter sweeps.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "w_d" => self.w_d = VectorInput::Scalar(value),
            "w_p" => self.w_p = VectorInput::Scalar(value),
            "w_en" => self.w_en = VectorInput::Scalar(value),
            "w_ex" => self.w_ex = VectorInput::Scalar(value),
            "alpha_f" => self.alpha_f = value,
            other => return Err(Error::Config(format!("unknown weight `{other}`"))),
        }
        Ok(())
    }

    pub fn build(&self, nm: usize) -> Result<PerformanceWeights> {
        if !self.alpha_f.is_finite() {
            return Err(Error::Config("`alpha_f` must be finite".into()));
        }
        PerformanceWeights::new(
            self.w_d.expand(nm, "w_d")?,
            self.w_p.expand(nm, "w_p")?,
            self.w_en.expand(nm, "w_en")?,
            self.w_ex.expand(nm, "w_ex")?,
            self.alpha_f,
        )
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Option<VectorInput>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssumptionCheck {
    /// Reject an inter-topic matrix that fails the model assumptions.
    #[default]
    Enforce,
    /// Keep it and report a warning.
    Warn,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph: GraphSource,
    #[serde(rename = "C")]
    pub coupling: MatrixSource,
    #[serde(rename = "A_a")]
    pub anchoring: VectorInput,
    #[serde(rename = "X_anchor")]
    pub anchors: MatrixSource,
    pub weights: WeightsConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub assumption_check: AssumptionCheck,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }
}

/// Fully assembled scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: OpinionModel,
    pub laplacians: LaplacianPair,
    pub sys: VectorizedSystem,
    pub mats: StageCostMatrices,
    pub x0: Vector,
    pub horizon: f64,
    pub dt: f64,
    pub output: Option<PathBuf>,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let (cfg, base) = ScenarioConfig::from_path(path)?;
        Self::build(&cfg, &base)
    }

    pub fn build(cfg: &ScenarioConfig, base: &Path) -> Result<Self> {
        let graph = cfg.graph.load(base)?;
        let laplacians = graph.balance()?;
        let n = laplacians.n();
        let coupling = cfg.coupling.load(base, "C")?;
        let m = coupling.nrows();
        let anchoring = cfg.anchoring.expand(n, "A_a")?;
        let anchors = cfg.anchors.load(base, "X_anchor")?;
        let mut warnings = Vec::new();
        let model = match cfg.assumption_check {
            AssumptionCheck::Enforce => OpinionModel::new(laplacians.clone(), coupling, anchoring, anchors)?,
            AssumptionCheck::Warn => {
                let model = OpinionModel::new_relaxed(laplacians.clone(), coupling, anchoring, anchors)?;
                let report = model.inter_topic_report();
                if !report.passed() {
                    warnings.push(format!("inter-topic assumptions violated: {}", report.failures().join("; ")));
                }
                model
            }
        };
        let sys = assemble_system(&model)?;
        let weights = cfg.weights.build(n * m)?;
        let mats = assemble_stage_cost(&weights, &laplacians, &sys)?;
        let sim = &cfg.simulation;
        let x0 = sim.x0.clone().unwrap_or(VectorInput::Scalar(0.0)).expand(n * m, "x0")?;
        let horizon = sim.horizon.unwrap_or(50.0 / (1.0 + model.min_anchoring()));
        let dt = sim.dt.unwrap_or(crate::dynamics::DEFAULT_DT);
        if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0 && dt <= horizon) {
            return Err(Error::Config(format!("simulation needs 0 < dt <= T, got T = {horizon}, dt = {dt}")));
        }
        let output = cfg.output.as_ref().map(|p| base.join(p));
        Ok(Self { model, laplacians, sys, mats, x0, horizon, dt, output, warnings })
    }
}
