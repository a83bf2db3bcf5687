use std::sync::Arc;

use crate::autodiff::{Tape, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::model::{MetricKind, Model, Recorded};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Fully connected classifier; the activation is applied between layers, not to the logits.
#[derive(Clone, Debug)]
pub struct MlpModel {
    sizes: Vec<usize>,
    activation: Activation,
    layout: Arc<Layout>,
}

impl MlpModel {
    pub fn new(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::arg("an MLP needs at least an input and an output size"));
        }
        if sizes.contains(&0) {
            return Err(Error::arg(format!("layer sizes must be positive: {sizes:?}")));
        }
        let mut parts = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            parts.push((format!("fc{i}.weight"), vec![w[0], w[1]]));
            parts.push((format!("fc{i}.bias"), vec![w[1]]));
        }
        Ok(MlpModel {
            sizes: sizes.to_vec(),
            activation,
            layout: Arc::new(Layout::new(parts)?),
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }
}

/// Relu MLP with parameters drawn from `seed`.
pub fn build_mlp<S: Scalar>(sizes: &[usize], seed: u64) -> Result<(MlpModel, ParamVector<S>)> {
    let model = MlpModel::new(sizes, Activation::Relu)?;
    let params = model.init_params(seed);
    Ok((model, params))
}

impl<S: Scalar> Model<S> for MlpModel {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn descriptor(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        format!("mlp {} {}", sizes.join("-"), self.activation.name())
    }

    fn metric(&self) -> MetricKind {
        MetricKind::Accuracy
    }

    fn record(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch<S>) -> Result<Recorded> {
        let Batch::Dense { x, labels } = batch else {
            return Err(Error::data("MLP expects dense features"));
        };
        if x.shape().get(1) != Some(&self.sizes[0]) {
            return Err(Error::data(format!(
                "features of width {:?} for an MLP with input size {}",
                x.shape().get(1),
                self.sizes[0]
            )));
        }
        let layers = self.sizes.len() - 1;
        let mut h = tape.constant(x.clone());
        for l in 0..layers {
            let z = tape.matmul(h, params[2 * l]);
            let z = tape.add(z, params[2 * l + 1]);
            h = if l + 1 < layers {
                match self.activation {
                    Activation::Relu => tape.relu(z),
                    Activation::Tanh => tape.tanh(z),
                    Activation::Sigmoid => tape.sigmoid(z),
                }
            } else {
                z
            };
        }
        let ce = tape.softmax_cross_entropy(h, labels.clone());
        let loss = tape.mean_rows(ce);
        Ok(Recorded {
            loss,
            logits: Some(h),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Array;
    use crate::model::{loss, loss_and_grad, perturbed_loss};

    #[test]
    fn parameter_counts() {
        let (m, p) = build_mlp::<f64>(&[784, 100, 100, 10], 0).unwrap();
        assert_eq!(m.param_count(), 784 * 100 + 100 + 100 * 100 + 100 + 100 * 10 + 10);
        assert_eq!(p.len(), 89_610);
        let (m, _) = build_mlp::<f64>(&[2, 1], 0).unwrap();
        assert_eq!(m.param_count(), 3);
    }

    #[test]
    fn bad_sizes_are_rejected() {
        assert!(MlpModel::new(&[3], Activation::Relu).is_err());
        assert!(MlpModel::new(&[3, 0, 2], Activation::Relu).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let (_, a) = build_mlp::<f64>(&[5, 4, 3], 11).unwrap();
        let (_, b) = build_mlp::<f64>(&[5, 4, 3], 11).unwrap();
        let (_, c) = build_mlp::<f64>(&[5, 4, 3], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = 1.0 / 5f64.sqrt();
        assert!(a.as_slice()[..20].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn zero_network_has_uniform_loss() {
        let model = MlpModel::new(&[3, 10], Activation::Relu).unwrap();
        let params = ParamVector::<f64>::zeros(Model::<f64>::layout(&model).clone());
        let batch = Batch::Dense {
            x: Array::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap(),
            labels: vec![3, 7],
        };
        let l = loss(&model, &params, &batch).unwrap().value;
        assert!((l - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_have_negligible_loss() {
        // single linear layer emitting +30 for the true class, -30 elsewhere
        let model = MlpModel::new(&[2, 2], Activation::Relu).unwrap();
        let params = ParamVector::from_vec(
            Model::<f64>::layout(&model).clone(),
            vec![30.0, -30.0, -30.0, 30.0, 0.0, 0.0],
        )
        .unwrap();
        let batch = Batch::Dense {
            x: Array::matrix(1, 2, vec![1.0, 0.0]).unwrap(),
            labels: vec![0],
        };
        assert!(loss(&model, &params, &batch).unwrap().value < 1e-9);
    }

    #[test]
    fn out_of_range_label_is_data_error() {
        let (model, params) = build_mlp::<f64>(&[2, 3], 0).unwrap();
        let batch = Batch::Dense {
            x: Array::matrix(1, 2, vec![1.0, 0.0]).unwrap(),
            labels: vec![3],
        };
        assert!(matches!(loss(&model, &params, &batch), Err(Error::Data(_))));
    }

    #[test]
    fn perturbation_leaves_parameters_untouched() {
        let (model, params) = build_mlp::<f64>(&[3, 4, 2], 5).unwrap();
        let batch = Batch::Dense {
            x: Array::matrix(2, 3, vec![0.2, -0.1, 0.5, 1.0, 0.3, -0.7]).unwrap(),
            labels: vec![0, 1],
        };
        let before = loss(&model, &params, &batch).unwrap().value;
        let zero = ParamVector::zeros(params.layout().clone());
        assert_eq!(perturbed_loss(&model, &params, &zero, &batch).unwrap().value.to_bits(), before.to_bits());
        let a = params.scaled(0.1);
        let _ = perturbed_loss(&model, &params, &a, &batch).unwrap();
        let _ = perturbed_loss(&model, &params, &a.scaled(-1.0), &batch).unwrap();
        assert_eq!(loss(&model, &params, &batch).unwrap().value.to_bits(), before.to_bits());
    }

    #[test]
    fn directional_finite_difference_matches_gradient() {
        let (model, params) = build_mlp::<f64>(&[3, 5, 2], 9).unwrap();
        let batch = Batch::Dense {
            x: Array::matrix(3, 3, vec![0.2, -0.1, 0.5, 1.0, 0.3, -0.7, -0.4, 0.8, 0.1]).unwrap(),
            labels: vec![0, 1, 1],
        };
        let (_, g) = loss_and_grad(&model, &params, &batch).unwrap();
        let h = 1e-5;
        for i in [0, 7, 16, 20, params.len() - 1] {
            let mut e = ParamVector::zeros(params.layout().clone());
            e.as_mut_slice()[i] = h;
            let up = perturbed_loss(&model, &params, &e, &batch).unwrap().value;
            let down = perturbed_loss(&model, &params, &e.scaled(-1.0), &batch).unwrap().value;
            let fd = (up - down) / (2.0 * h);
            let an = g.as_slice()[i];
            assert!((fd - an).abs() / fd.abs().max(an.abs()).max(1e-8) < 1e-5, "coord {i}: {fd} vs {an}");
        }
    }
}
