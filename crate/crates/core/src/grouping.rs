//! Parameter groups and the per-group corruption scales `T_(i)`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector};
use crate::scalar::{l2_norm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Granularity {
    /// One group holding every parameter.
    Model,
    /// One group per named segment (each weight matrix and each bias).
    Layer,
    /// One group per coordinate.
    Element,
}

impl Granularity {
    pub fn name(self) -> &'static str {
        match self {
            Granularity::Model => "model",
            Granularity::Layer => "layer",
            Granularity::Element => "element",
        }
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Granularity::Model),
            "layer" => Ok(Granularity::Layer),
            "element" => Ok(Granularity::Element),
            _ => Err(Error::arg(format!("unknown granularity `{s}` (model | layer | element)"))),
        }
    }
}

/// Disjoint contiguous index ranges covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPartition {
    granularity: Option<Granularity>,
    groups: Vec<Range<usize>>,
    total: usize,
}

impl GroupPartition {
    pub fn new(granularity: Granularity, layout: &Layout) -> Self {
        let n = layout.total();
        let groups = match granularity {
            Granularity::Model => std::iter::once(0..n).collect(),
            Granularity::Layer => layout.segments().iter().map(|s| s.range()).collect(),
            Granularity::Element => (0..n).map(|i| i..i + 1).collect(),
        };
        GroupPartition {
            granularity: Some(granularity),
            groups,
            total: n,
        }
    }

    /// Arbitrary partition; ranges must be non-empty, ordered, disjoint and cover `0..total`.
    pub fn from_ranges(groups: Vec<Range<usize>>, total: usize) -> Result<Self> {
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.end <= g.start {
                return Err(Error::arg(format!(
                    "group {g:?} breaks coverage (expected a non-empty range starting at {next})"
                )));
            }
            next = g.end;
        }
        if next != total {
            return Err(Error::arg(format!("groups cover {next} of {total} parameters")));
        }
        Ok(GroupPartition {
            granularity: None,
            groups,
            total,
        })
    }

    pub fn granularity(&self) -> Option<Granularity> {
        self.granularity
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `n_(i)` for every group.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    pub fn group_norms<S: Scalar>(&self, v: &[S]) -> Vec<S> {
        self.groups.iter().map(|g| l2_norm(&v[g.clone()])).collect()
    }
}

/// Names match the strings accepted in experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleRuleKind {
    FixedOne,
    GaSam,
    AsamW,
    LayerWg,
    InvG,
    WOverSqrtN,
    WNorm,
}

impl ScaleRuleKind {
    pub const ALL: [ScaleRuleKind; 7] = [
        ScaleRuleKind::FixedOne,
        ScaleRuleKind::GaSam,
        ScaleRuleKind::AsamW,
        ScaleRuleKind::LayerWg,
        ScaleRuleKind::InvG,
        ScaleRuleKind::WOverSqrtN,
        ScaleRuleKind::WNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScaleRuleKind::FixedOne => "FIXED_ONE",
            ScaleRuleKind::GaSam => "GA_SAM",
            ScaleRuleKind::AsamW => "ASAM_W",
            ScaleRuleKind::LayerWg => "LAYER_WG",
            ScaleRuleKind::InvG => "INV_G",
            ScaleRuleKind::WOverSqrtN => "W_OVER_SQRT_N",
            ScaleRuleKind::WNorm => "W_NORM",
        }
    }
}

impl fmt::Display for ScaleRuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleRuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown scale rule `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleRule<S> {
    pub kind: ScaleRuleKind,
    /// Lower bound `τ` on norms that appear in denominators and on the final scale.
    pub floor: S,
}

impl<S: Scalar> ScaleRule<S> {
    pub fn new(kind: ScaleRuleKind) -> Self {
        ScaleRule {
            kind,
            floor: S::c(1e-12),
        }
    }

    pub fn with_floor(kind: ScaleRuleKind, floor: S) -> Result<Self> {
        if !(floor > S::zero()) {
            return Err(Error::arg("scale floor must be positive"));
        }
        Ok(ScaleRule { kind, floor })
    }
}

/// Per-group scales `T_(i)` and their per-coordinate expansion `diag(T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleVector<S> {
    per_group: Vec<S>,
    diag: Vec<S>,
}

impl<S: Scalar> ScaleVector<S> {
    pub fn new(partition: &GroupPartition, per_group: Vec<S>) -> Result<Self> {
        if per_group.len() != partition.len() {
            return Err(Error::arg(format!(
                "{} scales for {} groups",
                per_group.len(),
                partition.len()
            )));
        }
        if per_group.iter().any(|t| !(t.is_finite() && *t > S::zero())) {
            return Err(Error::arg("scales must be finite and positive"));
        }
        let mut diag = vec![S::zero(); partition.total()];
        for (g, &t) in partition.groups().iter().zip(&per_group) {
            diag[g.clone()].iter_mut().for_each(|d| *d = t);
        }
        Ok(ScaleVector { per_group, diag })
    }

    pub fn identity(n: usize) -> Self {
        ScaleVector {
            per_group: vec![S::one()],
            diag: vec![S::one(); n],
        }
    }

    pub fn per_group(&self) -> &[S] {
        &self.per_group
    }

    pub fn diag(&self) -> &[S] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Scales `T_(i)` under `rule` from the current weights and (uncorrupted) gradient.
pub fn compute_scales<S: Scalar>(
    rule: &ScaleRule<S>,
    partition: &GroupPartition,
    params: &ParamVector<S>,
    grad: &ParamVector<S>,
) -> Result<ScaleVector<S>> {
    params.check_layout(grad)?;
    if params.len() != partition.total() {
        return Err(Error::arg("partition does not match the parameter count"));
    }
    let tau = rule.floor;
    let n = S::from_usize_lossy(partition.total());
    let w_norms = partition.group_norms(params.as_slice());
    let g_norms = partition.group_norms(grad.as_slice());
    let per_group = partition
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let ni = S::from_usize_lossy(g.len());
            let gn = g_norms[i].max(tau);
            let wn = w_norms[i];
            let t = match rule.kind {
                ScaleRuleKind::FixedOne => S::one(),
                ScaleRuleKind::GaSam => ni.sqrt() / (gn * n.sqrt()),
                ScaleRuleKind::AsamW | ScaleRuleKind::WNorm => wn,
                ScaleRuleKind::LayerWg => wn / gn,
                ScaleRuleKind::InvG => S::one() / gn,
                ScaleRuleKind::WOverSqrtN => wn / ni.sqrt(),
            };
            t.max(tau)
        })
        .collect();
    ScaleVector::new(partition, per_group)
}

/// Average gradient strengths `G_(i)` per group and `G` for the whole model.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStrengths<S> {
    pub per_group: Vec<S>,
    pub global: S,
}

/// `G_(i) = mean_z ‖∇_(i) ℓ(z)‖₂ / √n_(i)` over per-sample gradients.
pub fn gradient_strengths<S: Scalar>(
    partition: &GroupPartition,
    grads: &[ParamVector<S>],
) -> Result<GradientStrengths<S>> {
    if grads.is_empty() {
        return Err(Error::arg("gradient strengths of an empty gradient list"));
    }
    let m = S::from_usize_lossy(grads.len());
    let sizes = partition.sizes();
    let mut per_group = vec![S::zero(); partition.len()];
    let mut global = S::zero();
    for g in grads {
        if g.len() != partition.total() {
            return Err(Error::arg("gradient length does not match the partition"));
        }
        for ((acc, norm), &ni) in per_group.iter_mut().zip(partition.group_norms(g.as_slice())).zip(&sizes) {
            *acc += norm / S::from_usize_lossy(ni).sqrt();
        }
        global += g.l2_norm() / S::from_usize_lossy(partition.total()).sqrt();
    }
    Ok(GradientStrengths {
        per_group: per_group.into_iter().map(|v| v / m).collect(),
        global: global / m,
    })
}
