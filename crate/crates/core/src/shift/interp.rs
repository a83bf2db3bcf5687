use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{evaluate, Model};
use crate::params::ParamVector;
use crate::shift::quadratic::QuadraticShiftProblem;
use crate::scalar::Scalar;

/// Training and test objectives over flat `f64` weights.
pub trait LossSurface {
    fn train_loss(&self, w: &[f64]) -> Result<f64>;
    fn test_loss(&self, w: &[f64]) -> Result<f64>;
}

/// A model evaluated on a training set and a shifted set.
pub struct NeuralSurface<'a, S, M: ?Sized> {
    pub model: &'a M,
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub chunk: usize,
    _scalar: std::marker::PhantomData<S>,
}

impl<'a, S: Scalar, M: Model<S> + ?Sized> NeuralSurface<'a, S, M> {
    pub fn new(model: &'a M, train: &'a Dataset, test: &'a Dataset) -> Self {
        NeuralSurface {
            model,
            train,
            test,
            chunk: 1024,
            _scalar: std::marker::PhantomData,
        }
    }

    fn params(&self, w: &[f64]) -> Result<ParamVector<S>> {
        ParamVector::from_vec(self.model.layout().clone(), w.iter().map(|&v| S::c(v)).collect())
    }
}

impl<S: Scalar, M: Model<S> + ?Sized> LossSurface for NeuralSurface<'_, S, M> {
    fn train_loss(&self, w: &[f64]) -> Result<f64> {
        Ok(evaluate(self.model, &self.params(w)?, self.train, self.chunk)?.loss)
    }

    fn test_loss(&self, w: &[f64]) -> Result<f64> {
        Ok(evaluate(self.model, &self.params(w)?, self.test, self.chunk)?.loss)
    }
}

/// The quadratic pool under its base (train) and shifted (test) weightings.
impl LossSurface for QuadraticShiftProblem {
    fn train_loss(&self, w: &[f64]) -> Result<f64> {
        Ok(self.loss(self.base(), &DVector::from_column_slice(w)))
    }

    fn test_loss(&self, w: &[f64]) -> Result<f64> {
        Ok(self.loss(self.shifted(), &DVector::from_column_slice(w)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub alpha: f64,
    pub train_loss: f64,
    /// `L(w − δ; D) + C` with `δ = θ* − θ` and `C = L(θ*; D*) − L(θ; D)`.
    pub shifted_train_loss: f64,
    pub test_loss: f64,
}

/// `count` evenly spaced points over `[lo, hi]`.
pub fn alpha_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Losses along `w(α) = α θ + (1 − α) θ*`.
pub fn interpolation_curve(
    surface: &dyn LossSurface,
    theta: &[f64],
    theta_star: &[f64],
    alphas: &[f64],
) -> Result<Vec<CurvePoint>> {
    if theta.len() != theta_star.len() {
        return Err(Error::arg("the two minima have different lengths"));
    }
    if alphas.is_empty() || alphas.windows(2).any(|w| !(w[0] < w[1])) || alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::arg("alpha grid must be finite and strictly increasing"));
    }
    let delta: Vec<f64> = theta_star.iter().zip(theta).map(|(a, b)| a - b).collect();
    let constant = surface.test_loss(theta_star)? - surface.train_loss(theta)?;
    alphas
        .iter()
        .map(|&alpha| {
            let w: Vec<f64> = theta.iter().zip(theta_star).map(|(t, s)| alpha * t + (1.0 - alpha) * s).collect();
            let back: Vec<f64> = w.iter().zip(&delta).map(|(x, d)| x - d).collect();
            Ok(CurvePoint {
                alpha,
                train_loss: surface.train_loss(&w)?,
                shifted_train_loss: surface.train_loss(&back)? + constant,
                test_loss: surface.test_loss(&w)?,
            })
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg("correlation needs at least two paired values"));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
