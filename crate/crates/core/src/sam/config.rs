use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grouping::{Granularity, ScaleRule, ScaleRuleKind};
use crate::sam::NormOrder;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Implementation {
    /// Uniform average of the losses at `a_0 = 0, a_1, …, a_K`.
    MultiStep,
    /// Loss at `a_1` only.
    SingleStep,
}

impl Implementation {
    pub fn name(self) -> &'static str {
        match self {
            Implementation::MultiStep => "MULTI_STEP",
            Implementation::SingleStep => "SINGLE_STEP",
        }
    }
}

impl FromStr for Implementation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MULTI_STEP" => Ok(Implementation::MultiStep),
            "SINGLE_STEP" => Ok(Implementation::SingleStep),
            _ => Err(Error::arg(format!("unknown implementation `{s}` (MULTI_STEP | SINGLE_STEP)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamConfig<S> {
    /// Inner ascent steps `K`; 0 disables corruption in multi-step mode.
    pub steps: usize,
    /// Corruption radius `ε`.
    pub radius: S,
    pub norm: NormOrder,
    /// Ascent step `η`; `None` picks `1.5ε/K` (multi-step) or `ε` (single-step).
    pub step_size: Option<S>,
    pub implementation: Implementation,
    pub rule: ScaleRule<S>,
    pub granularity: Granularity,
    /// Epochs trained without corruption before SAM switches on.
    pub start_epoch: usize,
}

impl<S: Scalar> SamConfig<S> {
    /// Plain training: no corruption at any epoch.
    pub fn disabled() -> Self {
        SamConfig {
            steps: 0,
            radius: S::zero(),
            norm: NormOrder::L2,
            step_size: None,
            implementation: Implementation::MultiStep,
            rule: ScaleRule::new(ScaleRuleKind::FixedOne),
            granularity: Granularity::Model,
            start_epoch: 0,
        }
    }

    /// Multi-step objective with gradient-strength scales per layer.
    pub fn ga_sam(steps: usize, radius: S, norm: NormOrder) -> Self {
        SamConfig {
            steps,
            radius,
            norm,
            step_size: None,
            implementation: Implementation::MultiStep,
            rule: ScaleRule::new(ScaleRuleKind::GaSam),
            granularity: Granularity::Layer,
            start_epoch: 0,
        }
    }

    /// Single-step, fixed-scale SAM.
    pub fn vanilla(radius: S, norm: NormOrder) -> Self {
        SamConfig {
            steps: 1,
            radius,
            norm,
            step_size: None,
            implementation: Implementation::SingleStep,
            rule: ScaleRule::new(ScaleRuleKind::FixedOne),
            granularity: Granularity::Model,
            start_epoch: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= S::zero() && self.radius.is_finite()) {
            return Err(Error::arg("sam radius must be finite and >= 0"));
        }
        if let Some(eta) = self.step_size {
            if !(eta > S::zero() && eta.is_finite()) {
                return Err(Error::arg("sam step size must be finite and > 0"));
            }
        }
        if !(self.rule.floor > S::zero()) {
            return Err(Error::arg("scale floor must be > 0"));
        }
        Ok(())
    }

    pub fn effective_step_size(&self) -> S {
        self.step_size.unwrap_or_else(|| match self.implementation {
            Implementation::SingleStep => self.radius,
            Implementation::MultiStep => S::c(1.5) * self.radius / S::from_usize_lossy(self.steps.max(1)),
        })
    }

    /// Whether corruption is applied during `epoch` (0-based).
    pub fn active_at(&self, epoch: usize) -> bool {
        let has_steps = match self.implementation {
            Implementation::MultiStep => self.steps >= 1,
            Implementation::SingleStep => true,
        };
        epoch >= self.start_epoch && has_steps && self.radius > S::zero()
    }

    /// Forward/backward passes per batch while active.
    pub fn passes_per_batch(&self) -> usize {
        match self.implementation {
            Implementation::MultiStep => self.steps + 1,
            Implementation::SingleStep => 2,
        }
    }
}
