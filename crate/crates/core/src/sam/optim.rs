use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::scalar::Scalar;

/// Base optimizer settings.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerConfig<S> {
    Sgd {
        lr: S,
        /// Rescale the gradient to this L2 norm when it is longer.
        clip: Option<S>,
    },
    Adam {
        lr: S,
        beta1: S,
        beta2: S,
        eps: S,
    },
}

impl<S: Scalar> OptimizerConfig<S> {
    pub fn sgd(lr: S) -> Self {
        OptimizerConfig::Sgd { lr, clip: None }
    }

    pub fn adam(lr: S) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: S::c(0.9),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = match self {
            OptimizerConfig::Sgd { lr, clip } => {
                if let Some(c) = clip {
                    if !(*c > S::zero()) {
                        return Err(Error::arg("gradient clip must be > 0"));
                    }
                }
                *lr
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let unit = |b: S| b >= S::zero() && b < S::one();
                if !(unit(*beta1) && unit(*beta2) && *eps > S::zero()) {
                    return Err(Error::arg("adam needs betas in [0, 1) and eps > 0"));
                }
                *lr
            }
        };
        if !(lr > S::zero() && lr.is_finite()) {
            return Err(Error::arg("learning rate must be finite and > 0"));
        }
        Ok(())
    }

    pub fn build(&self, n: usize) -> Optimizer<S> {
        match self {
            OptimizerConfig::Sgd { .. } => Optimizer {
                cfg: self.clone(),
                m: Vec::new(),
                v: Vec::new(),
                t: 0,
            },
            OptimizerConfig::Adam { .. } => Optimizer {
                cfg: self.clone(),
                m: vec![S::zero(); n],
                v: vec![S::zero(); n],
                t: 0,
            },
        }
    }
}

/// Stateful optimizer instance (Adam moments live here).
#[derive(Clone, Debug)]
pub struct Optimizer<S> {
    cfg: OptimizerConfig<S>,
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Scalar> Optimizer<S> {
    pub fn step(&mut self, params: &mut ParamVector<S>, grad: &ParamVector<S>) -> Result<()> {
        params.check_layout(grad)?;
        let w = params.as_mut_slice();
        let g = grad.as_slice();
        match &self.cfg {
            OptimizerConfig::Sgd { lr, clip } => {
                let mut scale = *lr;
                if let Some(c) = clip {
                    let norm = grad.l2_norm();
                    if norm > *c {
                        scale *= *c / norm;
                    }
                }
                for (wi, &gi) in w.iter_mut().zip(g) {
                    *wi -= scale * gi;
                }
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                self.t += 1;
                let bc1 = S::one() - beta1.powi(self.t);
                let bc2 = S::one() - beta2.powi(self.t);
                for i in 0..w.len() {
                    self.m[i] = *beta1 * self.m[i] + (S::one() - *beta1) * g[i];
                    self.v[i] = *beta2 * self.v[i] + (S::one() - *beta2) * g[i] * g[i];
                    let mh = self.m[i] / bc1;
                    let vh = self.v[i] / bc2;
                    w[i] -= *lr * mh / (vh.sqrt() + *eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Layout;
    use std::sync::Arc;

    fn pv(x: Vec<f64>) -> ParamVector<f64> {
        let n = x.len();
        ParamVector::from_vec(Arc::new(Layout::new(vec![("w".into(), vec![n])]).unwrap()), x).unwrap()
    }

    #[test]
    fn sgd_with_clip() {
        let mut w = pv(vec![1.0, 1.0]);
        let mut opt = OptimizerConfig::Sgd { lr: 0.5, clip: Some(0.25) }.build(2);
        opt.step(&mut w, &pv(vec![3.0, 4.0])).unwrap();
        // clipped gradient (0.15, 0.2) times lr 0.5
        assert!((w.as_slice()[0] - 0.925).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut w = pv(vec![0.0, 0.0]);
        let mut opt = OptimizerConfig::adam(0.01).build(2);
        opt.step(&mut w, &pv(vec![2.0, -0.5])).unwrap();
        assert!((w.as_slice()[0] + 0.01).abs() < 1e-9);
        assert!((w.as_slice()[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut w = pv(vec![3.0, -2.0]);
        let mut opt = OptimizerConfig::adam(0.05).build(2);
        for _ in 0..2000 {
            let g = w.clone();
            opt.step(&mut w, &g).unwrap();
        }
        assert!(w.l2_norm() < 1e-3);
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::<f64>::sgd(0.0).validate().is_err());
        assert!(OptimizerConfig::<f64>::Sgd { lr: 0.1, clip: Some(-1.0) }.validate().is_err());
        assert!(OptimizerConfig::<f64>::adam(0.1).validate().is_ok());
    }
}
