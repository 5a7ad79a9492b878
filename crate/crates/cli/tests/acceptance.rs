//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use mvsde_core::analysis::CurieWeissReference;
use mvsde_core::estimator::{fold_replicates, single_term_given, ParticleChains, PathSource};
use mvsde_core::particle::{coupled_noise, propagate_block, propagate_block_coupled};
use mvsde_core::{
    curie_weiss, mle_gaussian_theta_star, EmpiricalMeasure, EstimatorConfig, LevelParams, PmfForm,
    ReplicateKey, StreamRole,
};
use serde_json::{json, Value};

const SEED: u64 = 1;
const THREADS_A: usize = 1;
const THREADS_B: usize = 4;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome {
        id,
        name,
        pass,
        detail,
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

fn mle_y() -> Vec<f64> {
    serde_json::from_str(&fs::read_to_string(data_dir().join("mle_y.json")).unwrap()).unwrap()
}

/// CLI experiments whose files are compared across thread counts.
fn experiments() -> Vec<(&'static str, Value)> {
    let second_moment = json!({"kind": "named", "name": "second_moment"});
    vec![
        ("c1_curie_weiss", json!({
            "mode": "run", "model": {"name": "curie_weiss"},
            "functional": second_moment, "replicates": 10_000})),
        ("c2_mse", json!({
            "mode": "mse", "model": {"name": "curie_weiss"}, "functional": second_moment,
            "mse": {"replicates": [64, 128, 256, 512, 1024, 2048, 4096], "runs": 20}})),
        ("c3_mle", json!({
            "mode": "kde",
            "model": {"name": "mle_gaussian", "params": {"y_file": data_dir().join("mle_y.json")}},
            "kde": {"components": [0, 10]}, "replicates": 100_000})),
        ("c4_ou", json!({
            "mode": "run",
            "model": {"name": "mean_field_ou", "params": {"theta": 1.0, "kappa": 0.5, "sigma": 1.0}},
            "functional": second_moment, "replicates": 40_000})),
        ("c8_ou", json!({
            "mode": "diagnose", "model": {"name": "mean_field_ou"},
            "diagnose": {"level": 6, "particles": 200, "horizon": 20, "seeds": 50}})),
        ("c8_curie_weiss", json!({
            "mode": "diagnose", "model": {"name": "curie_weiss"},
            "diagnose": {"level": 6, "particles": 200, "horizon": 20, "seeds": 50}})),
        ("c9_neuron", json!({
            "mode": "kde", "model": {"name": "neuron3d"}, "replicates": 4_000})),
    ]
}

fn run_cli(root: &Path, name: &str, config: &Value, threads: usize) -> Result<PathBuf, String> {
    let cfg = root.join(format!("{name}.json"));
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).map_err(|e| e.to_string())?;
    let out = root.join(name);
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_mvsde"))
        .env_remove("MV_SEED")
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", &SEED.to_string(), "--threads", &threads.to_string()])
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    eprintln!(
        "  {name} (threads {threads}) finished in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if o.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

fn summary(dir: &Result<PathBuf, String>, file: &str) -> Result<Value, String> {
    let dir = dir.as_ref().map_err(|e| e.clone())?;
    let text = fs::read_to_string(dir.join(file)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number {key}"))
}

fn outcome(id: u32, name: &'static str, r: Result<(bool, String), String>) -> Outcome {
    match r {
        Ok((pass, detail)) => report(id, name, pass, detail),
        Err(e) => report(id, name, false, format!("error: {e}")),
    }
}

fn criterion_1(dir: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(dir, "summary.json")?;
    let (est, se) = (num(&s, "estimate")?, num(&s, "std_error")?);
    let oracle = CurieWeissReference::compute(1.0, 1.0).second_moment;
    let err = (est - oracle).abs();
    Ok((
        err <= 3.0 * se,
        format!("estimate {est:.5}, oracle {oracle:.8}, |err| {err:.5}, 3*SE {:.5}", 3.0 * se),
    ))
}

fn criterion_2(dir: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(dir, "mse_summary.json")?;
    let slope = num(&s, "slope_vs_replicates")?;
    let cost_slope = num(&s, "slope_vs_cost")?;
    Ok((
        (slope + 1.0).abs() <= 0.25,
        format!("slope of log MSE vs log M {slope:.4} (vs cost {cost_slope:.4}), target -1 +/- 0.25"),
    ))
}

fn criterion_3(dir: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(dir, "kde_summary.json")?;
    let comps = s["components"].as_array().ok_or("no components")?;
    let find = |c: u64| {
        comps
            .iter()
            .find(|v| v["component"].as_u64() == Some(c))
            .ok_or_else(|| format!("component {c} missing"))
    };
    let y = mle_y();
    let theta_star = mle_gaussian_theta_star(&y);
    let x10_star = (y[9] + theta_star) / 2.0;
    let theta = num(find(0)?, "atom_mean")?;
    let x10 = num(find(10)?, "first_moment")?;
    let (e1, e2) = ((theta - theta_star).abs(), (x10 - x10_star).abs());
    Ok((
        e1 <= 0.05 && e2 <= 0.05,
        format!(
            "theta {theta:.4} vs {theta_star:.4} (|err| {e1:.4}); KDE mean of x10 {x10:.4} vs {x10_star:.4} (|err| {e2:.4}); tol 0.05"
        ),
    ))
}

fn criterion_4(dir: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(dir, "summary.json")?;
    let (est, se) = (num(&s, "estimate")?, num(&s, "std_error")?);
    let tol = 3.0 * se + (-(EstimatorConfig::default().l_max as f64)).exp2();
    let err = (est - 0.5).abs();
    Ok((err <= tol, format!("estimate {est:.5}, |err| {err:.5}, tol {tol:.5}")))
}

/// Coupled noise and paths for 100 seeded cases; returns the fine end states.
fn criterion_5() -> Result<(bool, String, Vec<f64>), String> {
    let model = curie_weiss(1.0, 0.25, 1.0, 1.0).map_err(|e| e.to_string())?;
    let config = EstimatorConfig::default();
    let chains = ParticleChains::new(&model);
    let span = (config.l_max - config.l_star) as u64;
    let mut digest = Vec::new();
    let mut good = 0;
    for case in 0..100u64 {
        let key = ReplicateKey::new(SEED, case);
        let level = config.l_star + 1 + (case % span) as u32;
        let params = LevelParams::<f64>::new(level);
        let (nf, nc) = (config.particles(level), config.particles(level - 1));
        let mut fine = EmpiricalMeasure::replicated(&[1.0], nf).map_err(|e| e.to_string())?;
        let mut coarse = fine.truncated(nc);
        let mut single = fine.clone();
        let mut ok = true;
        for t in 1..=4 {
            let sk = key.stream(StreamRole::ParticleFine, t);
            let (fn_, cn) = coupled_noise(sk, &params, nf, nc, 1).map_err(|e| e.to_string())?;
            for k in 0..cn.steps {
                for i in 0..nc {
                    let sum = fn_.increment(2 * k, i)[0] + fn_.increment(2 * k + 1, i)[0];
                    ok &= cn.increment(k, i)[0].to_bits() == sum.to_bits();
                }
            }
            let c = propagate_block_coupled(&model, &params, &fine, &coarse, sk)
                .map_err(|e| e.to_string())?;
            let (block, end) = propagate_block(&model, &params, &single, sk).map_err(|e| e.to_string())?;
            ok &= bits_equal(c.fine_state.as_slice(), end.as_slice());
            ok &= c.fine_block.snapshots.len() == block.snapshots.len()
                && c.fine_block
                    .snapshots
                    .iter()
                    .zip(&block.snapshots)
                    .all(|(a, b)| bits_equal(a.as_slice(), b.as_slice()));
            fine = c.fine_state;
            coarse = c.coarse_state;
            single = end;
        }
        let (cf, _) = chains.coupled(level, nf, nc, 4, &key).map_err(|e| e.to_string())?;
        let sf = chains.single_level(level, nf, 4, &key).map_err(|e| e.to_string())?;
        ok &= cf.len() == sf.len() && cf.iter().zip(&sf).all(|(a, b)| bits_equal(a, b));
        digest.extend_from_slice(fine.as_slice());
        digest.extend(cf.iter().flatten());
        good += ok as u32;
    }
    Ok((good == 100, format!("{good}/100 cases exact"), digest))
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Deterministic per-level paths: level `l` visits `u_t = f(l, t)`.
struct Stub;

fn stub_value(level: u32, t: usize) -> f64 {
    (level as f64 * 0.7 + t as f64).cos() / (t as f64 + 2.0) + 1.0 / (level as f64 + 1.0).powi(2)
}

impl PathSource<f64> for Stub {
    fn dim(&self) -> usize {
        1
    }

    fn single_level(
        &self,
        level: u32,
        _: usize,
        blocks: usize,
        _: &ReplicateKey,
    ) -> mvsde_core::Result<Vec<Vec<f64>>> {
        Ok((1..=blocks).map(|t| vec![stub_value(level, t)]).collect())
    }

    fn coupled(
        &self,
        level: u32,
        _: usize,
        _: usize,
        blocks: usize,
        key: &ReplicateKey,
    ) -> mvsde_core::Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        Ok((
            self.single_level(level, 0, blocks, key)?,
            self.single_level(level - 1, 0, blocks, key)?,
        ))
    }
}

fn criterion_6() -> Result<(bool, String, Vec<f64>), String> {
    let configs = [
        EstimatorConfig::default(),
        EstimatorConfig {
            l_star: 1,
            l_max: 6,
            p_max: 4,
            ..Default::default()
        },
        EstimatorConfig {
            pmf_form: PmfForm::Theory,
            ..Default::default()
        },
    ];
    let key = ReplicateKey::new(SEED, 0);
    let mut worst = 0.0f64;
    let mut digest = Vec::new();
    for config in &configs {
        let mut expectation = 0.0;
        for (l, pl) in config.pmf_l() {
            for (p, pp) in config.pmf_p() {
                let r = single_term_given(&Stub, config, l, p, &key).map_err(|e| e.to_string())?;
                expectation += pl * pp * r.measure.evaluate(|x| x[0]);
            }
        }
        // telescoped sum: base term plus all level increments, i.e. the level-l_max average
        let i_max = config.horizon(config.p_max);
        let target = (1..=i_max).map(|t| stub_value(config.l_max, t)).sum::<f64>() / i_max as f64;
        worst = worst.max((expectation - target).abs());
        digest.push(expectation);
    }
    Ok((worst <= 1e-12, format!("max |enumerated - telescoped| {worst:.3e} over 3 configurations"), digest))
}

fn criterion_7() -> Result<(bool, String, Vec<f64>), String> {
    let model = curie_weiss(1.0, 0.25, 1.0, 1.0).map_err(|e| e.to_string())?;
    let config = EstimatorConfig::default();
    let rows = fold_replicates(
        &model,
        &config,
        SEED,
        0..1_000,
        |r| (r.level, r.horizon, r.measure.raw_mass(), r.measure.total_weight()),
        Vec::new(),
        |mut acc, row| {
            acc.push(row);
            acc
        },
    )
    .map_err(|e| e.to_string())?;
    let mut bad = 0;
    let mut base = 0;
    for &(l, p, mass, _) in &rows {
        let expected = if l == config.l_star && p == 0 {
            base += 1;
            1.0
        } else {
            0.0
        };
        bad += (mass != expected) as u32;
    }
    let digest = rows.iter().map(|r| r.3).collect();
    Ok((
        bad == 0 && rows.len() == 1_000,
        format!("{} replicates, {base} with unit mass, {bad} violations", rows.len()),
        digest,
    ))
}

fn criterion_8(ou: &Result<PathBuf, String>, cw: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(ou, "diagnose_summary.json")?;
    let rate = num(&s, "mean_decay_rate")?;
    let analytic = num(&s, "analytic_rate")?;
    let ou_ok = rate > 0.0 && (rate - analytic).abs() <= 0.5 * analytic;
    let c = summary(cw, "diagnose_summary.json")?;
    let decreased = c["decreased"].as_u64().ok_or("missing decreased")?;
    Ok((
        ou_ok && decreased >= 45,
        format!(
            "OU fitted rate {rate:.4} vs analytic {analytic:.4}; Curie-Weiss W2 decreased in {decreased}/50 seeds"
        ),
    ))
}

fn criterion_9(dir: &Result<PathBuf, String>) -> Result<(bool, String), String> {
    let s = summary(dir, "kde_summary.json")?;
    let comps = s["components"].as_array().ok_or("no components")?;
    let mut ok = comps.len() == 3;
    let mut worst = 0.0f64;
    for c in comps {
        ok &= c["finite"].as_bool() == Some(true);
        let gap = (num(c, "mass")? - num(c, "weight_total")?).abs();
        worst = worst.max(gap);
    }
    let dir = dir.as_ref().map_err(|e| e.clone())?;
    for c in 0..3 {
        let text = fs::read_to_string(dir.join(format!("kde_{c}.csv"))).map_err(|e| e.to_string())?;
        ok &= text
            .lines()
            .skip(1)
            .flat_map(|l| l.split(','))
            .all(|v| v.parse::<f64>().is_ok_and(f64::is_finite));
    }
    Ok((
        ok && worst <= 1e-3,
        format!("{} marginals finite: {ok}; max |mass - weight total| {worst:.3e}", comps.len()),
    ))
}

fn strip_wall_seconds(v: &mut Value) {
    if let Some(map) = v.as_object_mut() {
        map.remove("wall_seconds");
    }
}

fn compare_dirs(a: &Path, b: &Path) -> Result<(), String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let count_b = fs::read_dir(b).map_err(|e| e.to_string())?.count();
    if names.len() != count_b {
        return Err(format!("{} vs {count_b} files", names.len()));
    }
    for name in names {
        let (fa, fb) = (a.join(&name), b.join(&name));
        let (ba, bb) = (fs::read(&fa).map_err(|e| e.to_string())?, fs::read(&fb).map_err(|e| e.to_string())?);
        if name.to_string_lossy().ends_with(".json") {
            let mut ja: Value = serde_json::from_slice(&ba).map_err(|e| e.to_string())?;
            let mut jb: Value = serde_json::from_slice(&bb).map_err(|e| e.to_string())?;
            strip_wall_seconds(&mut ja);
            strip_wall_seconds(&mut jb);
            if ja != jb {
                return Err(format!("{} differs", name.to_string_lossy()));
            }
        } else if ba != bb {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(())
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

type Deterministic = fn() -> Result<(bool, String, Vec<f64>), String>;

fn main() -> ExitCode {
    let started = Instant::now();
    let work = tempfile::tempdir().expect("temporary directory");
    let root_a = work.path().join(format!("threads_{THREADS_A}"));
    let root_b = work.path().join(format!("threads_{THREADS_B}"));
    fs::create_dir_all(&root_a).unwrap();
    fs::create_dir_all(&root_b).unwrap();

    println!("acceptance suite, seed {SEED}");
    let exps = experiments();
    let first: Vec<Result<PathBuf, String>> = exps
        .iter()
        .map(|(name, cfg)| run_cli(&root_a, name, cfg, THREADS_A))
        .collect();
    let dir = |name: &str| &first[exps.iter().position(|e| e.0 == name).unwrap()];

    let mut outcomes = vec![
        outcome(1, "Curie-Weiss second moment against quadrature", criterion_1(dir("c1_curie_weiss"))),
        outcome(2, "MSE decays like 1/M", criterion_2(dir("c2_mse"))),
        outcome(3, "MLE posterior recovery", criterion_3(dir("c3_mle"))),
        outcome(4, "OU stationary variance", criterion_4(dir("c4_ou"))),
    ];
    let deterministic: [(u32, &'static str, Deterministic); 3] = [
        (5, "coupling exactness", criterion_5),
        (6, "randomisation identity on stub paths", criterion_6),
        (7, "telescoping mass", criterion_7),
    ];
    let mut digests_a = Vec::new();
    for &(id, name, f) in &deterministic {
        match in_pool(THREADS_A, f) {
            Ok((pass, detail, digest)) => {
                outcomes.push(report(id, name, pass, detail));
                digests_a.push(Some(digest));
            }
            Err(e) => {
                outcomes.push(report(id, name, false, format!("error: {e}")));
                digests_a.push(None);
            }
        }
    }
    outcomes.push(outcome(
        8,
        "contraction diagnostic",
        criterion_8(dir("c8_ou"), dir("c8_curie_weiss")),
    ));
    outcomes.push(outcome(9, "neuron marginals", criterion_9(dir("c9_neuron"))));

    let mut mismatches = Vec::new();
    for ((name, cfg), a) in exps.iter().zip(&first) {
        let b = run_cli(&root_b, name, cfg, THREADS_B);
        match (a, &b) {
            (Ok(a), Ok(b)) => {
                if let Err(e) = compare_dirs(a, b) {
                    mismatches.push(format!("{name}: {e}"));
                }
            }
            _ => mismatches.push(format!("{name}: a run failed")),
        }
    }
    for (&(id, _, f), a) in deterministic.iter().zip(&digests_a) {
        let b = in_pool(THREADS_B, f).ok().map(|r| r.2);
        let same = match (a, &b) {
            (Some(a), Some(b)) => bits_equal(a, b),
            _ => false,
        };
        if !same {
            mismatches.push(format!("criterion {id} in-process results differ"));
        }
    }
    outcomes.push(report(
        10,
        "determinism across thread counts",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!(
                "{} CLI experiments and 3 in-process checks identical with --threads {THREADS_A} and {THREADS_B}",
                exps.len()
            )
        } else {
            mismatches.join("; ")
        },
    ));

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "{} of {} criteria passed in {:.0}s",
        outcomes.len() - failed.len(),
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in failed {
            eprintln!("failed [{}] {}: {}", o.id, o.name, o.detail);
        }
        ExitCode::FAILURE
    }
}
