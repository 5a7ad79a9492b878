use std::path::{Path, PathBuf};

use mvsde_core::{
    curie_weiss, mean_field_ou, mle_gaussian, mle_gaussian_theta_star, neuron3d, EstimatorConfig,
    Model64, NeuronParams,
};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    Mse,
    Kde,
    Diagnose,
    Cost,
}

/// One experiment, read from a JSON file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub replicates: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub mse: Option<MseSpec>,
    #[serde(default)]
    pub kde: Option<KdeSpec>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: Option<Value>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurieWeissParams {
    pub beta: f64,
    pub k: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl Default for CurieWeissParams {
    fn default() -> Self {
        CurieWeissParams {
            beta: 1.0,
            k: 0.25,
            sigma: 1.0,
            x0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuParams {
    pub theta: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        OuParams {
            theta: 1.0,
            kappa: 0.5,
            sigma: 1.0,
            x0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleParams {
    #[serde(default)]
    pub y: Option<Vec<f64>>,
    /// JSON array or whitespace/comma separated numbers; relative to the config file.
    #[serde(default)]
    pub y_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedFunctional {
    /// `x_0`
    Mean,
    /// `x_0²`
    SecondMoment,
    /// Component 0 of the MLE system.
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Moment { component: usize, k: i32 },
    Named { name: NamedFunctional },
}

impl FunctionalSpec {
    /// `(component, power)`.
    pub fn as_moment(&self) -> (usize, i32) {
        match *self {
            FunctionalSpec::Moment { component, k } => (component, k),
            FunctionalSpec::Named { name } => match name {
                NamedFunctional::Mean | NamedFunctional::Theta => (0, 1),
                NamedFunctional::SecondMoment => (0, 2),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseSpec {
    /// Replicate counts `M` on the curve.
    pub replicates: Vec<u64>,
    pub runs: u64,
    #[serde(default)]
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeSpec {
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSpec {
    pub level: u32,
    pub particles: usize,
    pub horizon: u64,
    pub x0_a: f64,
    pub x0_b: f64,
    pub seeds: u64,
}

impl Default for DiagnoseSpec {
    fn default() -> Self {
        DiagnoseSpec {
            level: 6,
            particles: 200,
            horizon: 20,
            x0_a: -2.0,
            x0_b: 2.0,
            seeds: 1,
        }
    }
}

/// A constructed model plus what the runner needs to know about it.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: Model64,
    pub kind: ModelKind,
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    CurieWeiss(CurieWeissParams),
    MeanFieldOu(OuParams),
    MleGaussian { y: Vec<f64> },
    Neuron3d(NeuronParams),
}

impl BuiltModel {
    pub fn default_bandwidth(&self) -> f64 {
        match self.kind {
            ModelKind::Neuron3d(_) => 0.05,
            _ => 0.1,
        }
    }

    /// Known value of `E_π[x_c^k]` when one is available.
    pub fn reference_value(&self, component: usize, k: i32) -> Option<f64> {
        match (&self.kind, component, k) {
            (ModelKind::CurieWeiss(p), 0, 2) => {
                Some(mvsde_core::analysis::CurieWeissReference::compute(p.beta, p.sigma).second_moment)
            }
            (ModelKind::CurieWeiss(_), 0, 1) => Some(0.0),
            (ModelKind::MeanFieldOu(p), 0, 1) if p.kappa.abs() < 1.0 => Some(0.0),
            (ModelKind::MeanFieldOu(p), 0, 2) if p.kappa.abs() < 1.0 => {
                Some(p.sigma * p.sigma / (2.0 * p.theta))
            }
            (ModelKind::MleGaussian { y }, 0, 1) => Some(mle_gaussian_theta_star(y)),
            (ModelKind::MleGaussian { y }, c, 1) if c >= 1 && c <= y.len() => {
                Some((y[c - 1] + mle_gaussian_theta_star(y)) / 2.0)
            }
            _ => None,
        }
    }
}

fn params<T: for<'de> Deserialize<'de> + Default>(value: &Option<Value>) -> CliResult<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).map_err(config_err),
    }
}

fn read_y_file(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read y_file {}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(config_err);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad number {s:?} in y_file: {e}")))
        })
        .collect()
}

impl ModelSpec {
    pub fn build(&self, base_dir: &Path) -> CliResult<BuiltModel> {
        let (model, kind) = match self.name.as_str() {
            "curie_weiss" => {
                let p: CurieWeissParams = params(&self.params)?;
                (curie_weiss(p.beta, p.k, p.sigma, p.x0)?, ModelKind::CurieWeiss(p))
            }
            "mean_field_ou" => {
                let p: OuParams = params(&self.params)?;
                (mean_field_ou(p.theta, p.kappa, p.sigma, p.x0)?, ModelKind::MeanFieldOu(p))
            }
            "mle_gaussian" => {
                let p: MleParams = params(&self.params)?;
                let y = match (p.y, p.y_file) {
                    (Some(y), None) => y,
                    (None, Some(f)) => read_y_file(&base_dir.join(f))?,
                    _ => {
                        return Err(CliError::Config(
                            "mle_gaussian needs exactly one of `y` or `y_file`".into(),
                        ))
                    }
                };
                (mle_gaussian(&y)?, ModelKind::MleGaussian { y })
            }
            "neuron3d" => {
                let p: NeuronParams = params(&self.params)?;
                (neuron3d(&p)?, ModelKind::Neuron3d(p))
            }
            other => return Err(CliError::Config(format!("unknown model {other:?}"))),
        };
        model.validate()?;
        Ok(BuiltModel { model, kind })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(config_err)
    }
}
