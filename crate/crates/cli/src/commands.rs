//! The five experiment commands. Each writes CSV files named
//! `<run_id>.<kind>.csv` under the output directory; every row ends with a
//! `timestamp` column so the remaining columns are reproducible byte for byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use samlab::data::{load_checkpoint, run_file_name, save_checkpoint, Checkpoint, Field, MetricsSink};
use samlab::landscape::{corruption_attack, fisher_spectrum, AttackConfig, SpectrumConfig};
use samlab::model::Model;
use samlab::params::ParamVector;
use samlab::sam::{train, NormOrder, TrainOptions};
use samlab::shift::{
    alpha_grid, delta_exact, exact_minimizer, fine_tune, interpolation_curve, pearson, random_problem,
    run_quadratic_trials, run_shift_trials, FinetuneConfig, LossSurface, NeuralSurface, QuadraticShiftProblem,
    ShiftTrialReport,
};
use samlab::{Result, Scalar};

use crate::config::ExperimentConfig;
use crate::setup::{build_model, load_datasets, Datasets};

pub const TRAIN_HEADER: &[&str] = &[
    "run_id",
    "epoch",
    "phase",
    "batches",
    "passes",
    "train_loss",
    "eval_loss",
    "eval_metric",
    "grad_norm",
    "segment_grad_norms",
    "timestamp",
];
pub const ATTACK_HEADER: &[&str] = &[
    "run_id",
    "norm",
    "radius",
    "steps",
    "clean_loss",
    "corrupted_loss",
    "clean_metric",
    "corrupted_metric",
    "metric_drop",
    "finite",
    "timestamp",
];
pub const SPECTRUM_HEADER: &[&str] = &["run_id", "rank", "eigenvalue", "sample_count", "trace", "method", "timestamp"];
pub const SHIFT_HEADER: &[&str] = &[
    "run_id",
    "mix_fraction",
    "delta_norm",
    "epochs_run",
    "final_loss",
    "final_grad_norm",
    "converged",
    "failed",
    "timestamp",
];
pub const SHIFT_FIT_HEADER: &[&str] = &[
    "run_id",
    "mode",
    "trials",
    "failed",
    "slope",
    "intercept",
    "r_squared",
    "delta_at_one",
    "slope_ratio",
    "noise_floor",
    "timestamp",
];
pub const INTERP_HEADER: &[&str] =
    &["run_id", "alpha", "train_loss", "shifted_train_loss", "test_loss", "timestamp"];
pub const INTERP_SUMMARY_HEADER: &[&str] = &["run_id", "mode", "points", "pearson_unit_interval", "delta_norm", "timestamp"];

fn timestamp() -> Field {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Field::Int(secs as i64)
}

fn flag(b: bool) -> Field {
    Field::from(if b { "true" } else { "false" })
}

/// Starts a fresh CSV for this run (a re-run replaces the previous file).
fn fresh_sink(cfg: &ExperimentConfig, kind: &str, header: &[&str]) -> Result<MetricsSink> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join(run_file_name(&cfg.output.run_id, kind));
    match std::fs::remove_file(&path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
        _ => {}
    }
    MetricsSink::open(&path, header)
}

pub fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join(format!("{}.ckpt", cfg.output.run_id))
}

fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        epochs: cfg.optimizer.epochs,
        batch_size: cfg.optimizer.batch_size,
        seed: cfg.optimizer.seed,
        eval_chunk: 512,
    }
}

/// Trains on `data.fit` per the config, streaming one CSV row per epoch.
fn train_model<S: Scalar>(
    cfg: &ExperimentConfig,
    model: &dyn Model<S>,
    data: &Datasets,
    sink: Option<&mut MetricsSink>,
) -> Result<ParamVector<S>> {
    let init = model.init_params(cfg.model.seed);
    let opt = cfg.optimizer_config::<S>().map_err(|e| samlab::Error::Argument(e.to_string()))?;
    let sam = cfg.sam_config::<S>().map_err(|e| samlab::Error::Argument(e.to_string()))?;
    let run_id = cfg.output.run_id.clone();
    let mut sink = sink;
    let (params, _) = train(model, init, &data.fit, Some(&data.shifted), &opt, &sam, &train_options(cfg), |m| {
        let Some(sink) = sink.as_deref_mut() else { return Ok(()) };
        let (eval_loss, eval_metric) = m.eval.map_or((f64::NAN, f64::NAN), |e| (e.loss, e.metric));
        let segs: Vec<String> = m.segment_grad_norms.iter().map(|v| samlab::data::format_float(*v)).collect();
        sink.write_row(&[
            Field::from(run_id.as_str()),
            Field::from(m.epoch),
            Field::from(m.phase.name()),
            Field::from(m.batches),
            Field::from(m.passes),
            Field::from(m.train_loss),
            Field::from(eval_loss),
            Field::from(eval_metric),
            Field::from(m.grad_norm),
            Field::from(segs.join(";")),
            timestamp(),
        ])
    })?;
    Ok(params)
}

/// Parameters from an explicit checkpoint, the run's default checkpoint, or
/// a fresh training run when neither exists.
fn obtain_params<S: Scalar>(
    cfg: &ExperimentConfig,
    model: &dyn Model<S>,
    data: &Datasets,
    checkpoint: Option<&Path>,
) -> Result<ParamVector<S>> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| checkpoint_path(cfg));
    if checkpoint.is_some() || path.exists() {
        load_checkpoint(&path)?.into_params(&model.descriptor(), model.layout().clone())
    } else {
        train_model(cfg, model, data, None)
    }
}

pub fn cmd_train<S: Scalar>(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let data = load_datasets(cfg)?;
    let model = build_model::<S>(cfg, &data)?;
    let mut sink = fresh_sink(cfg, "train", TRAIN_HEADER)?;
    let params = train_model(cfg, model.as_ref(), &data, Some(&mut sink))?;
    let ckpt = checkpoint_path(cfg);
    save_checkpoint(&ckpt, &Checkpoint::new(&model.descriptor(), cfg.model.seed, &cfg.digest(), &params))?;
    Ok(vec![sink.path().to_path_buf(), ckpt])
}

pub fn cmd_attack<S: Scalar>(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    norm: Option<NormOrder>,
    radii: Option<Vec<f64>>,
    steps: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let data = load_datasets(cfg)?;
    let model = build_model::<S>(cfg, &data)?;
    let params = obtain_params(cfg, model.as_ref(), &data, checkpoint)?;
    let norm = match norm {
        Some(n) => n,
        None => cfg.attack.norm.parse()?,
    };
    let radii = radii.unwrap_or_else(|| cfg.attack.radii.clone());
    let steps = steps.unwrap_or(cfg.attack.steps);
    let dataset = data.split(&cfg.attack.split);
    let mut sink = fresh_sink(cfg, "attack", ATTACK_HEADER)?;
    for radius in radii {
        let mut ac = AttackConfig::new(norm, radius, steps);
        ac.step_size = cfg.attack.step_size;
        let r = corruption_attack(model.as_ref(), &params, dataset, &ac)?;
        sink.write_row(&[
            Field::from(cfg.output.run_id.as_str()),
            Field::from(norm.name()),
            Field::from(radius),
            Field::from(steps),
            Field::from(r.clean.loss),
            Field::from(r.corrupted.loss),
            Field::from(r.clean.metric),
            Field::from(r.corrupted.metric),
            Field::from(r.metric_drop),
            flag(r.finite),
            timestamp(),
        ])?;
    }
    Ok(vec![sink.path().to_path_buf()])
}

pub fn cmd_spectrum<S: Scalar>(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    k: Option<usize>,
    samples: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let data = load_datasets(cfg)?;
    let model = build_model::<S>(cfg, &data)?;
    let params = obtain_params(cfg, model.as_ref(), &data, checkpoint)?;
    let mut sc = SpectrumConfig::new(k.unwrap_or(cfg.spectrum.k), samples.unwrap_or(cfg.spectrum.samples));
    sc.seed = cfg.data.seed;
    let r = fisher_spectrum(model.as_ref(), &params, data.split(&cfg.spectrum.split), &sc)?;
    let mut sink = fresh_sink(cfg, "spectrum", SPECTRUM_HEADER)?;
    for (i, ev) in r.eigenvalues.iter().enumerate() {
        sink.write_row(&[
            Field::from(cfg.output.run_id.as_str()),
            Field::from(i + 1),
            Field::from(*ev),
            Field::from(r.sample_count),
            Field::from(r.trace),
            Field::from(if r.lanczos { "lanczos" } else { "gram" }),
            timestamp(),
        ])?;
    }
    Ok(vec![sink.path().to_path_buf()])
}

fn finetune_config(cfg: &ExperimentConfig) -> FinetuneConfig {
    let s = &cfg.shift;
    FinetuneConfig {
        epochs: s.finetune_epochs,
        lr: s.finetune_lr,
        batch_size: s.finetune_batch,
        grad_tol: s.grad_tol,
        patience: s.patience,
        chunk: 1024,
    }
}

fn quadratic_problem(cfg: &ExperimentConfig) -> Result<QuadraticShiftProblem> {
    let s = &cfg.shift;
    random_problem(s.quad_instances, s.quad_dim, s.quad_shift_scale, s.quad_shared, cfg.data.seed)
}

pub fn cmd_shift_trial<S: Scalar>(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Vec<PathBuf>> {
    let grid = cfg.mix_grid();
    let (report, delta_at_one): (ShiftTrialReport, f64) = if cfg.shift.mode == "quadratic" {
        let problem = quadratic_problem(cfg)?;
        (run_quadratic_trials(&problem, &grid)?, delta_exact(&problem)?.norm())
    } else {
        let data = load_datasets(cfg)?;
        let model = build_model::<S>(cfg, &data)?;
        let theta = obtain_params(cfg, model.as_ref(), &data, checkpoint)?;
        let report = run_shift_trials(
            model.as_ref(),
            &theta,
            &data.train,
            &data.shifted,
            &grid,
            &finetune_config(cfg),
            cfg.data.seed,
        )?;
        let at_one = report
            .records
            .iter()
            .find(|r| r.mix_fraction == 1.0 && !r.failed)
            .map_or(f64::NAN, |r| r.delta_norm);
        (report, at_one)
    };
    let mut sink = fresh_sink(cfg, "shift", SHIFT_HEADER)?;
    for r in &report.records {
        sink.write_row(&[
            Field::from(cfg.output.run_id.as_str()),
            Field::from(r.mix_fraction),
            Field::from(r.delta_norm),
            Field::from(r.epochs_run),
            Field::from(r.final_loss),
            Field::from(r.final_grad_norm),
            flag(r.converged),
            flag(r.failed),
            timestamp(),
        ])?;
    }
    let mut fit = fresh_sink(cfg, "shift_fit", SHIFT_FIT_HEADER)?;
    fit.write_row(&[
        Field::from(cfg.output.run_id.as_str()),
        Field::from(cfg.shift.mode.as_str()),
        Field::from(report.records.len()),
        Field::from(report.failed),
        Field::from(report.fit.slope),
        Field::from(report.fit.intercept),
        Field::from(report.fit.r_squared),
        Field::from(delta_at_one),
        Field::from(report.fit.slope / delta_at_one),
        Field::from(report.noise_floor),
        timestamp(),
    ])?;
    Ok(vec![sink.path().to_path_buf(), fit.path().to_path_buf()])
}

pub fn cmd_interp_curve<S: Scalar>(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Vec<PathBuf>> {
    let alphas = alpha_grid(cfg.interp.alpha_min, cfg.interp.alpha_max, cfg.interp.points);
    let (curve, delta_norm) = if cfg.shift.mode == "quadratic" {
        let problem = quadratic_problem(cfg)?;
        let theta = exact_minimizer(&problem, problem.base())?;
        let star = exact_minimizer(&problem, problem.shifted())?;
        let curve = interpolation_curve(&problem as &dyn LossSurface, theta.as_slice(), star.as_slice(), &alphas)?;
        (curve, (star - theta).norm())
    } else {
        let data = load_datasets(cfg)?;
        let model = build_model::<S>(cfg, &data)?;
        let theta = obtain_params(cfg, model.as_ref(), &data, checkpoint)?;
        let star = fine_tune(model.as_ref(), &theta, &data.shifted, &finetune_config(cfg), cfg.data.seed)?.params;
        let surface = NeuralSurface::<S, dyn Model<S>>::new(model.as_ref(), &data.train, &data.shifted);
        let as_f64 = |p: &ParamVector<S>| p.as_slice().iter().map(|v| v.as_f64()).collect::<Vec<_>>();
        let curve = interpolation_curve(&surface, &as_f64(&theta), &as_f64(&star), &alphas)?;
        (curve, star.sub(&theta)?.l2_norm().as_f64())
    };
    let mut sink = fresh_sink(cfg, "interp", INTERP_HEADER)?;
    for p in &curve {
        sink.write_row(&[
            Field::from(cfg.output.run_id.as_str()),
            Field::from(p.alpha),
            Field::from(p.train_loss),
            Field::from(p.shifted_train_loss),
            Field::from(p.test_loss),
            timestamp(),
        ])?;
    }
    let unit: Vec<_> = curve.iter().filter(|p| (0.0..=1.0).contains(&p.alpha)).collect();
    let xs: Vec<f64> = unit.iter().map(|p| p.shifted_train_loss).collect();
    let ys: Vec<f64> = unit.iter().map(|p| p.test_loss).collect();
    let corr = pearson(&xs, &ys).unwrap_or(f64::NAN);
    let mut summary = fresh_sink(cfg, "interp_summary", INTERP_SUMMARY_HEADER)?;
    summary.write_row(&[
        Field::from(cfg.output.run_id.as_str()),
        Field::from(cfg.shift.mode.as_str()),
        Field::from(unit.len()),
        Field::from(corr),
        Field::from(delta_norm),
        timestamp(),
    ])?;
    Ok(vec![sink.path().to_path_buf(), summary.path().to_path_buf()])
}
