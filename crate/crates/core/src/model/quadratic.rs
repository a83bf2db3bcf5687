use std::sync::Arc;

use crate::autodiff::{Array, Tape, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::model::{MetricKind, Model, Recorded};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

/// `ℓ(w; z) = ½ Σ_j a_j (w_j − z_j)²` with a fixed positive diagonal curvature `a`.
///
/// A closed-form fixture for the engine and the attack: with one instance at
/// the origin and unit curvature the loss is `½‖w‖²`.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    curvature: Vec<f64>,
    layout: Arc<Layout>,
}

impl QuadraticModel {
    pub fn new(curvature: Vec<f64>) -> Result<Self> {
        if curvature.is_empty() || curvature.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::arg("quadratic curvature must be non-empty, positive and finite"));
        }
        let layout = Arc::new(Layout::new(vec![("w".into(), vec![curvature.len()])])?);
        Ok(QuadraticModel { curvature, layout })
    }

    pub fn dim(&self) -> usize {
        self.curvature.len()
    }

    pub fn params_from<S: Scalar>(&self, w: &[f64]) -> Result<ParamVector<S>> {
        ParamVector::from_vec(self.layout.clone(), w.iter().map(|&x| S::c(x)).collect())
    }
}

impl<S: Scalar> Model<S> for QuadraticModel {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn descriptor(&self) -> String {
        let a: Vec<String> = self.curvature.iter().map(|a| format!("{a:?}")).collect();
        format!("quadratic curvature={}", a.join(","))
    }

    fn metric(&self) -> MetricKind {
        MetricKind::Loss
    }

    fn record(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch<S>) -> Result<Recorded> {
        let Batch::Dense { x, .. } = batch else {
            return Err(Error::data("quadratic model expects dense centers"));
        };
        let d = self.curvature.len();
        let Some((b, cols)) = x.shape().first().zip(x.shape().get(1)) else {
            return Err(Error::data("centers must be a matrix"));
        };
        if *cols != d {
            return Err(Error::data(format!("centers of width {cols} for dimension {d}")));
        }
        let centers = tape.constant(x.clone());
        let diff = tape.sub(centers, params[0]);
        let sq = tape.mul(diff, diff);
        let a: Vec<S> = (0..*b).flat_map(|_| self.curvature.iter().map(|&v| S::c(v))).collect();
        let a = tape.constant(Array::matrix(*b, d, a)?);
        let weighted = tape.mul(sq, a);
        let s = tape.sum(weighted);
        let loss = tape.scale(s, S::c(0.5) / S::from_usize_lossy(*b));
        Ok(Recorded { loss, logits: None })
    }
}
