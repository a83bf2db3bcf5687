use crate::data::Batch;
use crate::error::{Error, Result};
use crate::grouping::{compute_scales, GroupPartition, ScaleVector};
use crate::model::{loss_and_grad, Model};
use crate::params::ParamVector;
use crate::sam::corruption::{ascent_step, project, scaled_norm};
use crate::sam::{Implementation, SamConfig};
use crate::scalar::Scalar;

/// Current corruption `a_k`, the scales `T` it was built with, and `k`.
#[derive(Clone, Debug)]
pub struct CorruptionState<S> {
    pub corruption: ParamVector<S>,
    pub scales: ScaleVector<S>,
    pub step: usize,
}

impl<S: Scalar> CorruptionState<S> {
    /// `‖T⁻¹a‖_p`.
    pub fn constraint_norm(&self, p: crate::sam::NormOrder) -> S {
        scaled_norm(self.corruption.as_slice(), self.scales.diag(), p)
    }
}

#[derive(Clone, Debug)]
pub struct ObjectiveResult<S> {
    /// Objective value (mean over corruption points for multi-step).
    pub loss: S,
    /// Gradient handed to the base optimizer.
    pub grad: ParamVector<S>,
    /// Loss at the uncorrupted weights.
    pub clean_loss: S,
    /// Gradient at the uncorrupted weights, from which `T` was computed.
    pub clean_grad: ParamVector<S>,
    pub state: CorruptionState<S>,
    /// Forward/backward passes spent.
    pub passes: usize,
}

/// Loss and gradient at each corruption point.
type PathPoints<S> = Vec<(S, ParamVector<S>)>;

/// `T` from `g_0`, then `a_k = Π_S(a_{k-1} + u_k)`; returns every `(a_k, L_k, g_k)`.
fn corruption_path<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
    cfg: &SamConfig<S>,
    partition: &GroupPartition,
    steps: usize,
) -> Result<(PathPoints<S>, CorruptionState<S>)> {
    cfg.validate()?;
    let (l0, g0) = loss_and_grad(model, params, batch)?;
    let scales = compute_scales(&cfg.rule, partition, params, &g0)?;
    let eta = cfg.effective_step_size();
    let mut a = ParamVector::zeros(params.layout().clone());
    let mut evals = vec![(l0, g0)];
    for k in 1..=steps {
        let g_prev = &evals[k - 1].1;
        let mut next = a.clone();
        if eta > S::zero() {
            let u = ascent_step(g_prev, &scales, eta, cfg.norm)?;
            next = a.add(&u)?;
        }
        a = project(&next, &scales, cfg.radius, cfg.norm)?;
        debug_assert!(
            scaled_norm(a.as_slice(), scales.diag(), cfg.norm) <= cfg.radius + S::c(1e-9),
            "corruption left the constraint set"
        );
        let shifted = params.add(&a)?;
        evals.push(loss_and_grad(model, &shifted, batch)?);
    }
    let state = CorruptionState {
        corruption: a,
        scales,
        step: steps,
    };
    Ok((evals, state))
}

/// Mean loss and mean gradient over the `K+1` points `w + a_k`, `a_0 = 0`.
pub fn multi_step_objective<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
    cfg: &SamConfig<S>,
    partition: &GroupPartition,
) -> Result<ObjectiveResult<S>> {
    if cfg.steps == 0 {
        return Err(Error::arg("multi-step objective needs K >= 1"));
    }
    let (evals, state) = corruption_path(model, params, batch, cfg, partition, cfg.steps)?;
    let count = S::from_usize_lossy(evals.len());
    let loss = evals.iter().map(|(l, _)| *l).sum::<S>() / count;
    let grads: Vec<ParamVector<S>> = evals.iter().map(|(_, g)| g.clone()).collect();
    let grad = ParamVector::mean_of(&grads)?;
    Ok(ObjectiveResult {
        loss,
        grad,
        clean_loss: evals[0].0,
        clean_grad: evals[0].1.clone(),
        state,
        passes: evals.len(),
    })
}

/// Loss and gradient at `w + a_1` only.
pub fn single_step_objective<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
    cfg: &SamConfig<S>,
    partition: &GroupPartition,
) -> Result<ObjectiveResult<S>> {
    let (mut evals, state) = corruption_path(model, params, batch, cfg, partition, 1)?;
    let (loss, grad) = evals.pop().expect("two evaluations");
    let (clean_loss, clean_grad) = evals.pop().expect("two evaluations");
    Ok(ObjectiveResult {
        loss,
        grad,
        clean_loss,
        clean_grad,
        state,
        passes: 2,
    })
}

/// Dispatches on `cfg.implementation`.
pub fn sam_objective<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    batch: &Batch<S>,
    cfg: &SamConfig<S>,
    partition: &GroupPartition,
) -> Result<ObjectiveResult<S>> {
    match cfg.implementation {
        Implementation::MultiStep => multi_step_objective(model, params, batch, cfg, partition),
        Implementation::SingleStep => single_step_objective(model, params, batch, cfg, partition),
    }
}
