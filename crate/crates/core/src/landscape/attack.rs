use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grouping::ScaleVector;
use crate::model::{dataset_loss_and_grad, evaluate, Evaluation, MetricKind, Model};
use crate::params::ParamVector;
use crate::sam::{ascent_step_raw, project_raw, NormOrder};
use crate::scalar::Scalar;

/// Multi-step adversarial weight corruption under `‖a‖_p ≤ ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackConfig {
    pub norm: NormOrder,
    pub radius: f64,
    pub steps: usize,
    /// Defaults to `1.5 ε / steps`.
    pub step_size: Option<f64>,
    pub chunk: usize,
}

impl AttackConfig {
    pub fn new(norm: NormOrder, radius: f64, steps: usize) -> Self {
        AttackConfig {
            norm,
            radius,
            steps,
            step_size: None,
            chunk: 512,
        }
    }

    pub fn effective_step_size(&self) -> f64 {
        self.step_size.unwrap_or(1.5 * self.radius / self.steps.max(1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub norm: NormOrder,
    pub radius: f64,
    pub steps: usize,
    pub clean: Evaluation,
    pub corrupted: Evaluation,
    /// Metric degradation, positive when the corruption hurts.
    pub metric_drop: f64,
    /// False when an iterate produced a non-finite loss or gradient; the
    /// attack then stops and reports what it reached.
    pub finite: bool,
    /// Norm of the reported corruption.
    pub corruption_norm: f64,
}

/// Maximizes the dataset loss over corruptions with uniform scales and reports
/// the task metric at the strongest corruption found. `params` is only read.
pub fn corruption_attack<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    dataset: &Dataset,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    if !(cfg.radius >= 0.0 && cfg.radius.is_finite()) {
        return Err(Error::arg("attack radius must be finite and non-negative"));
    }
    if cfg.steps == 0 {
        return Err(Error::arg("attack needs at least one step"));
    }
    if cfg.chunk == 0 {
        return Err(Error::arg("chunk size must be positive"));
    }
    let eta = cfg.effective_step_size();
    if cfg.radius > 0.0 && !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::arg("attack step size must be positive"));
    }
    let clean = evaluate(model, params, dataset, cfg.chunk)?;
    let t = ScaleVector::<S>::identity(params.len());
    let eps = S::c(cfg.radius);
    let mut a = vec![S::zero(); params.len()];
    let mut best = (clean.loss, a.clone());
    let mut finite = true;
    if cfg.radius > 0.0 {
        for _ in 0..cfg.steps {
            let w = shifted(params, &a)?;
            let (l, g) = dataset_loss_and_grad(model, &w, dataset, cfg.chunk)?;
            let l = l.as_f64();
            if !l.is_finite() || !g.all_finite() {
                finite = false;
                break;
            }
            if l > best.0 {
                best = (l, a.clone());
            }
            let u = ascent_step_raw(g.as_slice(), t.diag(), S::c(eta), cfg.norm);
            let next: Vec<S> = a.iter().zip(&u).map(|(&x, &y)| x + y).collect();
            a = project_raw(&next, t.diag(), eps, cfg.norm);
        }
        if finite {
            let w = shifted(params, &a)?;
            let ev = evaluate(model, &w, dataset, cfg.chunk)?;
            if !ev.loss.is_finite() {
                finite = false;
            } else if ev.loss >= best.0 {
                best = (ev.loss, a.clone());
            }
        }
    }
    let (corrupted, a) = if finite {
        let w = shifted(params, &best.1)?;
        (evaluate(model, &w, dataset, cfg.chunk)?, best.1)
    } else {
        let w = shifted(params, &a)?;
        (evaluate(model, &w, dataset, cfg.chunk)?, a)
    };
    let metric_drop = if model.metric() == MetricKind::Accuracy {
        clean.metric - corrupted.metric
    } else {
        corrupted.metric - clean.metric
    };
    Ok(AttackReport {
        norm: cfg.norm,
        radius: cfg.radius,
        steps: cfg.steps,
        clean,
        corrupted,
        metric_drop,
        finite,
        corruption_norm: crate::sam::scaled_norm(&a, t.diag(), cfg.norm).as_f64(),
    })
}

fn shifted<S: Scalar>(params: &ParamVector<S>, a: &[S]) -> Result<ParamVector<S>> {
    ParamVector::from_vec(params.layout().clone(), params.as_slice().iter().zip(a).map(|(&w, &x)| w + x).collect())
}
