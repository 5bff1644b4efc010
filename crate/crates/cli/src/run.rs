use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use qpart_core::conjugate::RestrictedUnitary;
use qpart_core::digits::{self, SplitScore};
use qpart_core::hamiltonian::{build_tfim, exact_ground_energy, free_fermion_ground_energy};
use qpart_core::optimize::{self, AdamConfig, SupervisedConfig, VqeConfig};
use qpart_core::partition::{measurement_budget, PartitionLayout};
use qpart_core::variance_lab;

use crate::config::{
    BpScanExperiment, ClassifyExperiment, ConjugateDumpExperiment, Experiment, ExperimentConfig,
    HaarCheckExperiment, VqeExperiment,
};
use crate::error::CliError;

/// Files written by one run, in write order.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Emitter {
            dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(qpart_core::Error::from)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Runs `cfg`, writing results into `out`. Everything except
/// `manifest.json` and `timing.csv` is a pure function of the config.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: usize,
) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let mut em = Emitter::new(out)?;
    let (summary, timing) = match &cfg.experiment {
        Experiment::Vqe(e) => run_vqe(e, cfg.seed, &mut em)?,
        Experiment::Classify(e) => run_classify(e, cfg.seed, &mut em)?,
        Experiment::BpScan(e) => (run_bp_scan(e, cfg.seed, &mut em)?, None),
        Experiment::ConjugateDump(e) => (run_conjugate_dump(e, &mut em)?, None),
        Experiment::HaarCheck(e) => (run_haar_check(e, cfg.seed, &mut em)?, None),
    };
    em.json("summary.json", &summary)?;
    if let Some(t) = timing {
        em.write("timing.csv", &t)?;
    }
    let outputs: Vec<String> = em
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "schema_version": 1,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.experiment.kind(),
        "seed": cfg.seed,
        "threads": threads,
        "config": cfg,
        "outputs": outputs,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    em.json("manifest.json", &manifest)?;
    Ok(RunOutput {
        files: em.files,
        summary,
    })
}

fn run_vqe(
    e: &VqeExperiment,
    seed: u64,
    em: &mut Emitter,
) -> Result<(Value, Option<String>), CliError> {
    if e.restarts == 0 {
        return Err(CliError::Config("restarts must be at least 1".into()));
    }
    let exact = exact_ground_energy(&e.tfim)?;
    let free_fermion = free_fermion_ground_energy(&e.tfim).ok();
    let mut runs = Vec::new();
    for r in 0..e.restarts {
        let mut model =
            optimize::build_vqe_model(&e.tfim, e.subsystems, &e.generators, e.ansatz_layers)?;
        let cfg = VqeConfig {
            steps: e.optimizer.steps,
            adam: AdamConfig::with_learning_rate(e.optimizer.learning_rate),
            seed: seed + r as u64,
        };
        runs.push((
            cfg.seed,
            optimize::run_vqe(&mut model, &cfg)?,
            model.measurement_budget(),
        ));
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.1.best_energy.total_cmp(&b.1.best_energy))
        .expect("at least one restart");

    let mut trace = String::from("restart,seed,step,energy,grad_norm\n");
    let mut timing = String::from("restart,step,wall_time_s\n");
    for (r, (s, out, _)) in runs.iter().enumerate() {
        for rec in &out.log.records {
            let _ = writeln!(
                trace,
                "{r},{s},{},{:.17e},{:.17e}",
                rec.step, rec.loss, rec.grad_norm
            );
            let _ = writeln!(timing, "{r},{},{:.6}", rec.step, rec.wall_time_s);
        }
    }
    em.write("energy_trace.csv", &trace)?;
    let rel = |energy: f64| (energy - exact) / exact;
    let summary = json!({
        "kind": "vqe",
        "n": e.tfim.n,
        "j": e.tfim.j,
        "h": e.tfim.h,
        "subsystems": e.subsystems,
        "generators": e.generators,
        "exact_energy": exact,
        "free_fermion_energy": free_fermion,
        "best_energy": best.1.best_energy,
        "best_seed": best.0,
        "best_step": best.1.best_step,
        "final_energy": best.1.final_energy,
        "relative_error": rel(best.1.best_energy),
        "restarts": runs.iter().map(|(s, o, _)| json!({
            "seed": s,
            "best_energy": o.best_energy,
            "relative_error": rel(o.best_energy),
        })).collect::<Vec<_>>(),
        "budget": best.2,
        "best_params": best.1.best_params,
    });
    Ok((summary, Some(timing)))
}

fn score_json(s: &SplitScore) -> Value {
    json!({ "accuracy": s.accuracy, "mse": s.mse })
}

fn run_classify(
    e: &ClassifyExperiment,
    seed: u64,
    em: &mut Emitter,
) -> Result<(Value, Option<String>), CliError> {
    let data = match &e.dataset {
        Some(path) => digits::load_dataset(path, seed)?,
        None => digits::load_bundled(seed)?,
    };
    let mut model = digits::build_classifier(e.basis)?;
    let cfg = SupervisedConfig {
        epochs: e.optimizer.epochs,
        adam: AdamConfig::with_learning_rate(e.optimizer.learning_rate),
        seed,
        coeff_init_std: e.optimizer.coeff_init_std,
        ..Default::default()
    };
    let out = optimize::run_supervised(
        &mut model,
        &data.train_samples(),
        &data.validation_samples(),
        &cfg,
    )?;
    em.write("loss_trace.csv", &out.log.to_csv("mse"))?;

    let scores = [
        ("Training", digits::score(&model, &data.train)?),
        ("Validation", digits::score(&model, &data.validation)?),
        ("Testing", digits::score(&model, &data.test)?),
    ];
    let mut acc = String::from("split,accuracy_percent,mse\n");
    for (name, s) in &scores {
        let _ = writeln!(acc, "{name},{:.1},{:.4}", 100.0 * s.accuracy, s.mse);
    }
    em.write("accuracy.csv", &acc)?;
    let summary = json!({
        "kind": "classify",
        "basis": e.basis,
        "split": { "train": data.train.len(), "validation": data.validation.len(), "test": data.test.len() },
        "selected_epoch": out.best_epoch,
        "final_epoch": cfg.epochs,
        "selected_validation_mse": out.best_val_mse,
        "trainable_parameters": model.num_params(),
        "budget": model.measurement_budget(),
        "training": score_json(&scores[0].1),
        "validation": score_json(&scores[1].1),
        "testing": score_json(&scores[2].1),
    });
    let timing = out.log.timing_csv();
    Ok((summary, Some(timing)))
}

fn run_bp_scan(e: &BpScanExperiment, seed: u64, em: &mut Emitter) -> Result<Value, CliError> {
    let spec = e.to_spec(seed);
    let points = variance_lab::run_variance_scan(&spec)?;
    em.write("variance.csv", &variance_lab::variance_csv(&points))?;
    let first = points.first().map_or(f64::NAN, |p| p.variance);
    let last = points.last().map_or(f64::NAN, |p| p.variance);
    Ok(json!({
        "kind": "bp-scan",
        "points": points.len(),
        "log2_slope_per_subsystem": variance_lab::log2_slope(&points),
        "variance_ratio_last_first": last / first,
        "qubit_span": points.last().map(|p| p.n_qubits).unwrap_or(0) - points.first().map(|p| p.n_qubits).unwrap_or(0),
    }))
}

fn run_conjugate_dump(e: &ConjugateDumpExperiment, em: &mut Emitter) -> Result<Value, CliError> {
    let h = build_tfim(&e.tfim)?;
    let layout = PartitionLayout::equal(e.tfim.n, e.subsystems)?;
    let v = RestrictedUnitary::from_labels(e.tfim.n, &e.generators, vec![0.0; e.generators.len()])?;
    let obs = v.conjugate(&h, &layout)?;
    em.write("observable.json", &(obs.to_json()? + "\n"))?;
    let mut retained = String::from("term,retained_factors\n");
    for (p, _) in h.terms() {
        let k = v.prune_factors(p)?;
        let labels: Vec<String> = k.iter().map(|&i| (i + 1).to_string()).collect();
        let _ = writeln!(retained, "{p},{}", labels.join(" "));
    }
    em.write("retained_factors.csv", &retained)?;
    Ok(json!({
        "kind": "conjugate-dump",
        "n": e.tfim.n,
        "hamiltonian_terms": h.len(),
        "budget": measurement_budget(&obs),
    }))
}

fn run_haar_check(e: &HaarCheckExperiment, seed: u64, em: &mut Emitter) -> Result<Value, CliError> {
    let r = variance_lab::haar_moment_check(e.qubits, e.depth, e.samples, seed)?;
    em.write("moments.csv", &r.to_csv())?;
    Ok(json!({
        "kind": "haar-check",
        "report": r,
        "b2_within_3_stderr": r.b2_within(3.0),
        "bibj_within_3_stderr": r.bibj_within(3.0),
    }))
}
