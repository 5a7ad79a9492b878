use std::path::{Path, PathBuf};
use std::time::Instant;

use mvsde_core::analysis::{
    contraction_diagnostic, decay_rate, log_log_slope, prefix_mse_curve, uniform_grid, PooledAtoms,
};
use mvsde_core::estimator::fold_replicates;
use mvsde_core::{estimate_range, EstimatorConfig, ReplicateKey};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    BuiltModel, DiagnoseSpec, ExperimentConfig, FunctionalSpec, GridSpec, Mode, ModelKind,
};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, OutputDir};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A fully validated experiment. Building one never touches the output directory.
#[derive(Debug, Clone)]
pub struct Plan {
    pub seed: u64,
    pub out: PathBuf,
    pub estimator: EstimatorConfig,
    pub model: Option<BuiltModel>,
    pub job: Job,
}

#[derive(Debug, Clone)]
pub enum Job {
    Run {
        component: usize,
        k: i32,
        replicates: u64,
    },
    Mse {
        component: usize,
        k: i32,
        sizes: Vec<usize>,
        runs: u64,
        truth: f64,
    },
    Kde {
        components: Vec<usize>,
        bandwidth: f64,
        grid: Option<GridSpec>,
        replicates: u64,
    },
    Diagnose(DiagnoseSpec),
    Cost,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn functional(config: &ExperimentConfig, model: &BuiltModel) -> CliResult<(usize, i32)> {
    let spec: FunctionalSpec = config
        .functional
        .ok_or_else(|| invalid("`functional` is required for this mode"))?;
    let (component, k) = spec.as_moment();
    if component >= model.model.dim {
        return Err(invalid(format!(
            "functional component {component} out of range for {} (dimension {})",
            model.model.name, model.model.dim
        )));
    }
    Ok((component, k))
}

fn replicates(config: &ExperimentConfig) -> CliResult<u64> {
    match config.replicates {
        Some(m) if m > 0 => Ok(m),
        Some(_) => Err(invalid("`replicates` must be at least 1")),
        None => Err(invalid("`replicates` is required for this mode")),
    }
}

impl Plan {
    pub fn new(config: ExperimentConfig, base_dir: &Path, overrides: Overrides) -> CliResult<Self> {
        config.estimator.validate()?;
        let seed = overrides.seed.or(config.seed).unwrap_or(0);
        let out = overrides
            .out
            .or_else(|| config.out.clone())
            .ok_or_else(|| invalid("no output directory: set `out` or pass --out"))?;
        let model = config.model.as_ref().map(|m| m.build(base_dir)).transpose()?;
        let need_model = || {
            model
                .as_ref()
                .ok_or_else(|| invalid("`model` is required for this mode"))
        };
        let job = match config.mode {
            Mode::Run => {
                let (component, k) = functional(&config, need_model()?)?;
                Job::Run {
                    component,
                    k,
                    replicates: replicates(&config)?,
                }
            }
            Mode::Mse => {
                let built = need_model()?;
                let (component, k) = functional(&config, built)?;
                let spec = config
                    .mse
                    .as_ref()
                    .ok_or_else(|| invalid("`mse` section is required for mode mse"))?;
                if spec.replicates.is_empty() || spec.replicates.contains(&0) {
                    return Err(invalid("mse.replicates must be a non-empty list of positive sizes"));
                }
                if spec.runs < 2 {
                    return Err(invalid("mse.runs must be at least 2"));
                }
                let truth = match spec.truth {
                    Some(t) if t.is_finite() => t,
                    Some(_) => return Err(invalid("mse.truth must be finite")),
                    None => built.reference_value(component, k).ok_or_else(|| {
                        invalid(format!(
                            "no reference value for E[x_{component}^{k}] under {}; set mse.truth",
                            built.model.name
                        ))
                    })?,
                };
                let mut sizes: Vec<usize> = spec.replicates.iter().map(|&m| m as usize).collect();
                sizes.sort_unstable();
                sizes.dedup();
                Job::Mse {
                    component,
                    k,
                    sizes,
                    runs: spec.runs,
                    truth,
                }
            }
            Mode::Kde => {
                let built = need_model()?;
                let spec = config.kde.clone().unwrap_or_default();
                let bandwidth = spec.bandwidth.unwrap_or_else(|| built.default_bandwidth());
                if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(invalid("kde.bandwidth must be positive and finite"));
                }
                let components = spec
                    .components
                    .unwrap_or_else(|| (0..built.model.dim).collect());
                if components.is_empty() {
                    return Err(invalid("kde.components must not be empty"));
                }
                if let Some(&c) = components.iter().find(|&&c| c >= built.model.dim) {
                    return Err(invalid(format!("kde component {c} out of range")));
                }
                if let Some(g) = spec.grid {
                    uniform_grid(g.min, g.max, g.points)?;
                }
                Job::Kde {
                    components,
                    bandwidth,
                    grid: spec.grid,
                    replicates: replicates(&config)?,
                }
            }
            Mode::Diagnose => {
                let built = need_model()?;
                let spec = config.diagnose.unwrap_or_default();
                if built.model.dim != 1 {
                    return Err(invalid(format!(
                        "diagnose needs a one-dimensional model, {} has dimension {}",
                        built.model.name, built.model.dim
                    )));
                }
                if spec.particles == 0 || spec.horizon < 2 || spec.seeds == 0 {
                    return Err(invalid(
                        "diagnose needs particles >= 1, horizon >= 2 and seeds >= 1",
                    ));
                }
                if !(spec.x0_a.is_finite() && spec.x0_b.is_finite()) {
                    return Err(invalid("diagnose starting points must be finite"));
                }
                Job::Diagnose(spec)
            }
            Mode::Cost => Job::Cost,
        };
        Ok(Plan {
            seed,
            out,
            estimator: config.estimator,
            model,
            job,
        })
    }

    fn built(&self) -> &BuiltModel {
        self.model.as_ref().expect("validated plan carries a model")
    }

    /// Runs the experiment and writes its files. Returns a one-line summary.
    pub fn execute(&self) -> CliResult<String> {
        match &self.job {
            Job::Run {
                component,
                k,
                replicates,
            } => self.run(*component, *k, *replicates),
            Job::Mse {
                component,
                k,
                sizes,
                runs,
                truth,
            } => self.mse(*component, *k, sizes, *runs, *truth),
            Job::Kde {
                components,
                bandwidth,
                grid,
                replicates,
            } => self.kde(components, *bandwidth, *grid, *replicates),
            Job::Diagnose(spec) => self.diagnose(spec),
            Job::Cost => self.cost(),
        }
    }

    fn run(&self, component: usize, k: i32, m: u64) -> CliResult<String> {
        let built = self.built();
        let start = Instant::now();
        let est = estimate_range(
            &built.model,
            &self.estimator,
            |x: &[f64]| x[component].powi(k),
            self.seed,
            0..m,
        )?;
        let wall_seconds = start.elapsed().as_secs_f64();
        let summary = RunSummary {
            model: built.model.name.clone(),
            seed: self.seed,
            component,
            k,
            replicates: m,
            estimate: est.mean,
            std_error: est.std_error,
            reference: built.reference_value(component, k),
            total_cost_units: est.total_cost,
            wall_seconds,
        };
        let dir = OutputDir::create(&self.out)?;
        dir.write_csv(
            "replicates.csv",
            &["replicate", "level", "horizon", "value", "cost_units"],
            est.replicates.iter().map(|r| {
                vec![
                    r.replicate_id.to_string(),
                    r.level.to_string(),
                    r.horizon.to_string(),
                    fmt_f64(r.value),
                    fmt_f64(r.cost_units),
                ]
            }),
        )?;
        dir.write_json("summary.json", &summary)?;
        Ok(format!(
            "estimate {:.6} (std error {}) from {m} replicates",
            est.mean,
            est.std_error.map_or("n/a".to_string(), |s| format!("{s:.6}"))
        ))
    }

    fn mse(&self, component: usize, k: i32, sizes: &[usize], runs: u64, truth: f64) -> CliResult<String> {
        let built = self.built();
        let m_max = *sizes.last().expect("non-empty sizes") as u64;
        let start = Instant::now();
        let mut values = Vec::with_capacity(runs as usize);
        let mut costs = Vec::with_capacity(runs as usize);
        for r in 0..runs {
            let est = estimate_range(
                &built.model,
                &self.estimator,
                |x: &[f64]| x[component].powi(k),
                self.seed,
                r * m_max..(r + 1) * m_max,
            )?;
            costs.push(est.replicates.iter().map(|v| v.cost_units).collect::<Vec<f64>>());
            values.push(est.values());
        }
        let curve = prefix_mse_curve(&values, sizes, truth)?;
        let wall_seconds = start.elapsed().as_secs_f64();
        let mean_cost: Vec<f64> = sizes
            .iter()
            .map(|&m| costs.iter().map(|c| c[..m].iter().sum::<f64>()).sum::<f64>() / runs as f64)
            .collect();
        let mse: Vec<f64> = curve.iter().map(|&(_, e)| e).collect();
        let slope_cost = log_log_slope(&mean_cost, &mse);
        let size_f: Vec<f64> = sizes.iter().map(|&m| m as f64).collect();
        let slope_replicates = log_log_slope(&size_f, &mse);

        let dir = OutputDir::create(&self.out)?;
        dir.write_csv(
            "mse.csv",
            &["replicates", "mse", "mean_cost_units"],
            sizes
                .iter()
                .zip(&mse)
                .zip(&mean_cost)
                .map(|((m, e), c)| vec![m.to_string(), fmt_f64(*e), fmt_f64(*c)]),
        )?;
        let mut rows = Vec::with_capacity(sizes.len() * runs as usize);
        for &m in sizes {
            for (r, v) in values.iter().enumerate() {
                let est = v[..m].iter().sum::<f64>() / m as f64;
                rows.push(vec![m.to_string(), r.to_string(), fmt_f64(est)]);
            }
        }
        dir.write_csv("mse_runs.csv", &["replicates", "run", "estimate"], rows)?;
        dir.write_json(
            "mse_summary.json",
            &MseSummary {
                model: built.model.name.clone(),
                seed: self.seed,
                component,
                k,
                truth,
                runs,
                sizes: sizes.to_vec(),
                mse: mse.clone(),
                mean_cost_units: mean_cost,
                slope_vs_cost: slope_cost,
                slope_vs_replicates: slope_replicates,
                wall_seconds,
            },
        )?;
        Ok(format!(
            "log-log slope of MSE against cost: {}",
            slope_cost.map_or("n/a".to_string(), |s| format!("{s:.4}"))
        ))
    }

    fn kde(
        &self,
        components: &[usize],
        bandwidth: f64,
        grid: Option<GridSpec>,
        m: u64,
    ) -> CliResult<String> {
        let built = self.built();
        let start = Instant::now();
        let init = (
            vec![PooledAtoms::<f64>::new(); components.len()],
            0.0f64,
        );
        let (pools, total_cost) = fold_replicates(
            &built.model,
            &self.estimator,
            self.seed,
            0..m,
            |r| {
                let atoms: Vec<Vec<(f64, f64)>> = components
                    .iter()
                    .map(|&c| r.measure.atoms().map(|(p, w)| (p[c], w)).collect())
                    .collect();
                (atoms, r.cost_units)
            },
            init,
            |(mut pools, cost), (atoms, c)| {
                for (pool, a) in pools.iter_mut().zip(&atoms) {
                    pool.add_atoms(a);
                }
                (pools, cost + c)
            },
        )?;

        let mut outputs = Vec::with_capacity(components.len());
        for (&c, pool) in components.iter().zip(&pools) {
            let points = match grid {
                Some(g) => uniform_grid(g.min, g.max, g.points)?,
                None => pool.auto_grid(bandwidth, 8.0, 201)?,
            };
            let density = pool.kde(bandwidth, &points)?;
            let exact_mean = pool
                .positions
                .iter()
                .zip(&pool.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                / pool.replicates() as f64;
            let stats = KdeComponent {
                component: c,
                grid_min: points[0],
                grid_max: points[points.len() - 1],
                grid_points: points.len(),
                atoms: pool.positions.len(),
                mass: density.mass(),
                weight_total: pool.total_weight(),
                first_moment: density.first_moment(),
                atom_mean: exact_mean,
                reference_mean: built.reference_value(c, 1),
                finite: density.is_finite(),
            };
            outputs.push((density, stats));
        }
        let wall_seconds = start.elapsed().as_secs_f64();

        let dir = OutputDir::create(&self.out)?;
        for (density, stats) in &outputs {
            dir.write_csv(
                &format!("kde_{}.csv", stats.component),
                &["x", "density"],
                density
                    .grid
                    .iter()
                    .zip(&density.values)
                    .map(|(x, v)| vec![fmt_f64(*x), fmt_f64(*v)]),
            )?;
        }
        let summary = KdeSummary {
            model: built.model.name.clone(),
            seed: self.seed,
            replicates: m,
            bandwidth,
            total_cost_units: total_cost,
            components: outputs.into_iter().map(|(_, s)| s).collect(),
            wall_seconds,
        };
        dir.write_json("kde_summary.json", &summary)?;
        Ok(format!(
            "density estimates for {} component(s) from {m} replicates",
            components.len()
        ))
    }

    fn diagnose(&self, spec: &DiagnoseSpec) -> CliResult<String> {
        let built = self.built();
        let start = Instant::now();
        let series: Vec<Vec<(u64, f64)>> = (0..spec.seeds)
            .into_par_iter()
            .map(|s| {
                contraction_diagnostic(
                    &built.model,
                    spec.level,
                    spec.particles,
                    spec.horizon,
                    spec.x0_a,
                    spec.x0_b,
                    &ReplicateKey::new(self.seed, s),
                )
            })
            .collect::<mvsde_core::Result<_>>()?;
        let wall_seconds = start.elapsed().as_secs_f64();
        let rates: Vec<Option<f64>> = series.iter().map(|s| decay_rate(s)).collect();
        let fitted: Vec<f64> = rates.iter().flatten().copied().collect();
        let mean_rate = (!fitted.is_empty()).then(|| fitted.iter().sum::<f64>() / fitted.len() as f64);
        let decreased = series
            .iter()
            .filter(|s| s.last().map(|l| l.1) < s.first().map(|f| f.1))
            .count();
        let analytic_rate = match &built.kind {
            ModelKind::MeanFieldOu(p) => Some(2.0 * p.theta * (1.0 - p.kappa)),
            _ => None,
        };

        let dir = OutputDir::create(&self.out)?;
        let rows = series.iter().enumerate().flat_map(|(s, v)| {
            v.iter()
                .map(move |&(t, w)| vec![s.to_string(), t.to_string(), fmt_f64(w)])
        });
        dir.write_csv("diagnose.csv", &["seed", "t", "w2"], rows)?;
        dir.write_json(
            "diagnose_summary.json",
            &DiagnoseSummary {
                model: built.model.name.clone(),
                seed: self.seed,
                level: spec.level,
                particles: spec.particles,
                horizon: spec.horizon,
                seeds: spec.seeds,
                decay_rates: rates,
                mean_decay_rate: mean_rate,
                analytic_rate,
                decreased,
                wall_seconds,
            },
        )?;
        Ok(format!(
            "W2 decreased in {decreased} of {} seed(s); mean fitted rate {}",
            spec.seeds,
            mean_rate.map_or("n/a".to_string(), |r| format!("{r:.4}"))
        ))
    }

    fn cost(&self) -> CliResult<String> {
        let cfg = &self.estimator;
        let pmf_l = cfg.pmf_l();
        let pmf_p = cfg.pmf_p();
        let mut rows = Vec::with_capacity(pmf_l.len() * pmf_p.len());
        for &(l, pl) in &pmf_l {
            for &(p, pp) in &pmf_p {
                rows.push(vec![
                    l.to_string(),
                    p.to_string(),
                    fmt_f64(pl),
                    fmt_f64(pp),
                    fmt_f64(cfg.cost_term(l, p)),
                ]);
            }
        }
        let expected = cfg.expected_cost();
        let dir = OutputDir::create(&self.out)?;
        dir.write_csv(
            "cost.csv",
            &["level", "horizon", "prob_level", "prob_horizon", "cost_units"],
            rows,
        )?;
        dir.write_json(
            "cost_summary.json",
            &CostSummary {
                estimator: *cfg,
                expected_cost_units: expected,
            },
        )?;
        Ok(format!("expected cost per replicate: {expected:.6e} units"))
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub seed: u64,
    pub component: usize,
    pub k: i32,
    pub replicates: u64,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub reference: Option<f64>,
    pub total_cost_units: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct MseSummary {
    pub model: String,
    pub seed: u64,
    pub component: usize,
    pub k: i32,
    pub truth: f64,
    pub runs: u64,
    pub sizes: Vec<usize>,
    pub mse: Vec<f64>,
    pub mean_cost_units: Vec<f64>,
    pub slope_vs_cost: Option<f64>,
    pub slope_vs_replicates: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct KdeComponent {
    pub component: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub atoms: usize,
    /// Trapezoid integral of the density.
    pub mass: f64,
    /// Total signed weight of the averaged measure.
    pub weight_total: f64,
    /// Trapezoid integral of `x · density`.
    pub first_moment: f64,
    /// `Σ w x / M` straight from the atoms.
    pub atom_mean: f64,
    pub reference_mean: Option<f64>,
    pub finite: bool,
}

#[derive(Debug, Serialize)]
pub struct KdeSummary {
    pub model: String,
    pub seed: u64,
    pub replicates: u64,
    pub bandwidth: f64,
    pub total_cost_units: f64,
    pub components: Vec<KdeComponent>,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct DiagnoseSummary {
    pub model: String,
    pub seed: u64,
    pub level: u32,
    pub particles: usize,
    pub horizon: u64,
    pub seeds: u64,
    pub decay_rates: Vec<Option<f64>>,
    pub mean_decay_rate: Option<f64>,
    pub analytic_rate: Option<f64>,
    pub decreased: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct CostSummary {
    pub estimator: EstimatorConfig,
    pub expected_cost_units: f64,
}
