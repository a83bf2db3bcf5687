use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{dataset_loss_and_grad, loss_and_grad, Model};
use crate::params::ParamVector;
use crate::shift::mix::{mix_datasets, MixSpec};
use crate::shift::quadratic::{exact_minimizer, QuadraticShiftProblem};
use crate::scalar::Scalar;

/// Plain SGD fine-tuning used to move a minimum onto a new dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub lr: f64,
    /// `None` uses one full-batch step per epoch.
    pub batch_size: Option<usize>,
    /// Stop once the full-data gradient norm falls below this.
    pub grad_tol: f64,
    /// Consecutive epochs of rising loss after which the run counts as diverged.
    pub patience: usize,
    pub chunk: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 3,
            lr: 0.05,
            batch_size: None,
            grad_tol: 1e-4,
            patience: 2,
            chunk: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneOutcome<S> {
    pub params: ParamVector<S>,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub converged: bool,
    pub diverged: bool,
}

pub fn fine_tune<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    start: &ParamVector<S>,
    data: &Dataset,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutcome<S>> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::arg("fine-tune learning rate must be positive"));
    }
    if cfg.batch_size == Some(0) || cfg.chunk == 0 {
        return Err(Error::arg("batch and chunk sizes must be positive"));
    }
    let lr = S::c(cfg.lr);
    let mut params = start.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut rising = 0;
    let (mut epochs_run, mut converged, mut diverged) = (0, false, false);
    let step = |params: &mut ParamVector<S>, g: &ParamVector<S>| {
        params.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(w, &d)| *w -= lr * d);
    };
    let (mut loss, mut grad) = dataset_loss_and_grad(model, &params, data, cfg.chunk)?;
    for _ in 0..cfg.epochs {
        let l = loss.as_f64();
        if !l.is_finite() || !grad.all_finite() {
            diverged = true;
            break;
        }
        if history.last().is_some_and(|&prev| l > prev) {
            rising += 1;
            if rising >= cfg.patience.max(1) {
                diverged = true;
                break;
            }
        } else {
            rising = 0;
        }
        history.push(l);
        if grad.l2_norm().as_f64() < cfg.grad_tol {
            converged = true;
            break;
        }
        match cfg.batch_size {
            Some(b) if b < data.len() => {
                order.shuffle(&mut rng);
                for idx in order.chunks(b) {
                    let (_, g) = loss_and_grad(model, &params, &data.batch::<S>(idx))?;
                    step(&mut params, &g);
                }
            }
            _ => step(&mut params, &grad),
        }
        epochs_run += 1;
        (loss, grad) = dataset_loss_and_grad(model, &params, data, cfg.chunk)?;
    }
    let final_grad_norm = grad.l2_norm().as_f64();
    if !converged && !diverged && final_grad_norm < cfg.grad_tol {
        converged = true;
    }
    if !loss.is_finite() || !params.all_finite() {
        diverged = true;
    }
    Ok(FinetuneOutcome {
        params,
        epochs_run,
        final_loss: loss.as_f64(),
        final_grad_norm,
        converged,
        diverged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftTrialRecord {
    pub mix_fraction: f64,
    /// `‖θ^mix − θ‖₂`.
    pub delta_norm: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub converged: bool,
    pub failed: bool,
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg("a line fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("x values are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r_squared })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftTrialReport {
    pub records: Vec<ShiftTrialRecord>,
    /// Fit over the non-failed trials.
    pub fit: LinearFit,
    pub failed: usize,
    /// `1e-3 ‖θ‖₂`: displacement expected from fine-tuning noise alone.
    pub noise_floor: f64,
}

fn fit_records(records: Vec<ShiftTrialRecord>, noise_floor: f64) -> Result<ShiftTrialReport> {
    let ok: Vec<&ShiftTrialRecord> = records.iter().filter(|r| !r.failed).collect();
    let x: Vec<f64> = ok.iter().map(|r| r.mix_fraction).collect();
    let y: Vec<f64> = ok.iter().map(|r| r.delta_norm).collect();
    let fit = linear_fit(&x, &y)?;
    let failed = records.len() - ok.len();
    Ok(ShiftTrialReport { records, fit, failed, noise_floor })
}

/// Grid of `count` fractions `1/count, 2/count, …, 1`.
pub fn default_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / count as f64).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::arg("mix grid needs at least two fractions"));
    }
    if grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::arg("mix fractions must lie in [0, 1]"));
    }
    Ok(())
}

/// For each fraction: mix, fine-tune from `theta`, record `‖θ^mix − θ‖₂`;
/// then fit the norms against the fractions. Trials run in parallel.
pub fn run_shift_trials<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    theta: &ParamVector<S>,
    train: &Dataset,
    shifted: &Dataset,
    grid: &[f64],
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<ShiftTrialReport> {
    check_grid(grid)?;
    let records = grid
        .par_iter()
        .map(|&eta| {
            let mixed = mix_datasets(&MixSpec { fraction: eta, train, shifted }, seed)?;
            let out = fine_tune(model, theta, &mixed, cfg, seed)?;
            let delta = out.params.sub(theta)?.l2_norm().as_f64();
            Ok(ShiftTrialRecord {
                mix_fraction: eta,
                delta_norm: delta,
                epochs_run: out.epochs_run,
                final_loss: out.final_loss,
                final_grad_norm: out.final_grad_norm,
                converged: out.converged,
                failed: out.diverged || !delta.is_finite(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_records(records, 1e-3 * theta.l2_norm().as_f64())
}

/// The same protocol with closed-form minimizers in place of fine-tuning.
pub fn run_quadratic_trials(problem: &QuadraticShiftProblem, grid: &[f64]) -> Result<ShiftTrialReport> {
    check_grid(grid)?;
    let theta = exact_minimizer(problem, problem.base())?;
    let records = grid
        .iter()
        .map(|&eta| {
            let w = problem.mixed_weights(eta);
            let t = exact_minimizer(problem, &w)?;
            Ok(ShiftTrialRecord {
                mix_fraction: eta,
                delta_norm: (&t - &theta).norm(),
                epochs_run: 0,
                final_loss: problem.loss(&w, &t),
                final_grad_norm: problem.gradient(&w, &t).norm(),
                converged: true,
                failed: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_records(records, 1e-3 * theta.norm())
}
