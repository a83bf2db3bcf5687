use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    /// `features` is row-major `[len, dim]`.
    Classification {
        dim: usize,
        classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    },
    /// One window per instance; `targets[i][t]` is the character after `inputs[i][t]`.
    Sequence {
        vocab: usize,
        inputs: Vec<Vec<usize>>,
        targets: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub samples: Samples,
}

/// Model-ready minibatch in the model's scalar type.
#[derive(Clone, Debug)]
pub enum Batch<S> {
    Dense { x: Array<S>, labels: Vec<usize> },
    Tokens { inputs: Vec<Vec<usize>>, targets: Vec<Vec<usize>> },
}

impl<S: Scalar> Batch<S> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Dense { labels, .. } => labels.len(),
            Batch::Tokens { inputs, .. } => inputs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th instance as a batch of one.
    pub fn instance(&self, i: usize) -> Batch<S> {
        match self {
            Batch::Dense { x, labels } => {
                let dim = x.shape()[1];
                let row = x.data()[i * dim..(i + 1) * dim].to_vec();
                Batch::Dense {
                    x: Array::matrix(1, dim, row).expect("row"),
                    labels: vec![labels[i]],
                }
            }
            Batch::Tokens { inputs, targets } => Batch::Tokens {
                inputs: vec![inputs[i].clone()],
                targets: vec![targets[i].clone()],
            },
        }
    }
}

impl Dataset {
    pub fn classification(
        split: Split,
        dim: usize,
        classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::data(format!(
                "{} features do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::data(format!("label {bad} outside {classes} classes")));
        }
        Ok(Dataset {
            split,
            samples: Samples::Classification {
                dim,
                classes,
                features,
                labels,
            },
        })
    }

    pub fn sequence(split: Split, vocab: usize, inputs: Vec<Vec<usize>>, targets: Vec<Vec<usize>>) -> Result<Self> {
        if inputs.len() != targets.len() || inputs.iter().zip(&targets).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::data("input and target windows differ in count or length"));
        }
        if inputs.iter().chain(&targets).flatten().any(|&t| t >= vocab) {
            return Err(Error::data(format!("token outside vocabulary of {vocab}")));
        }
        Ok(Dataset {
            split,
            samples: Samples::Sequence { vocab, inputs, targets },
        })
    }

    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Classification { labels, .. } => labels.len(),
            Samples::Sequence { inputs, .. } => inputs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> Option<usize> {
        match &self.samples {
            Samples::Classification { dim, .. } => Some(*dim),
            Samples::Sequence { .. } => None,
        }
    }

    /// Declared class count, or vocabulary size for sequences.
    pub fn classes(&self) -> Option<usize> {
        match &self.samples {
            Samples::Classification { classes, .. } => Some(*classes),
            Samples::Sequence { vocab, .. } => Some(*vocab),
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.samples {
            Samples::Classification { labels, .. } => Some(labels),
            Samples::Sequence { .. } => None,
        }
    }

    pub fn features(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Classification { features, .. } => Some(features),
            Samples::Sequence { .. } => None,
        }
    }

    /// New dataset holding `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let samples = match &self.samples {
            Samples::Classification {
                dim,
                classes,
                features,
                labels,
            } => {
                let mut f = Vec::with_capacity(indices.len() * dim);
                for &i in indices {
                    f.extend_from_slice(&features[i * dim..(i + 1) * dim]);
                }
                Samples::Classification {
                    dim: *dim,
                    classes: *classes,
                    features: f,
                    labels: indices.iter().map(|&i| labels[i]).collect(),
                }
            }
            Samples::Sequence { vocab, inputs, targets } => Samples::Sequence {
                vocab: *vocab,
                inputs: indices.iter().map(|&i| inputs[i].clone()).collect(),
                targets: indices.iter().map(|&i| targets[i].clone()).collect(),
            },
        };
        Dataset {
            split: self.split,
            samples,
        }
    }

    /// Appends `other` after `self`; both must have the same kind and dimensions.
    pub fn concat(&self, other: &Dataset, split: Split) -> Result<Dataset> {
        let samples = match (&self.samples, &other.samples) {
            (
                Samples::Classification {
                    dim,
                    classes,
                    features,
                    labels,
                },
                Samples::Classification {
                    dim: d2,
                    classes: c2,
                    features: f2,
                    labels: l2,
                },
            ) if dim == d2 && classes == c2 => Samples::Classification {
                dim: *dim,
                classes: *classes,
                features: features.iter().chain(f2).copied().collect(),
                labels: labels.iter().chain(l2).copied().collect(),
            },
            (
                Samples::Sequence { vocab, inputs, targets },
                Samples::Sequence {
                    vocab: v2,
                    inputs: i2,
                    targets: t2,
                },
            ) if vocab == v2 => Samples::Sequence {
                vocab: *vocab,
                inputs: inputs.iter().chain(i2).cloned().collect(),
                targets: targets.iter().chain(t2).cloned().collect(),
            },
            _ => return Err(Error::data("cannot concatenate datasets of different kinds")),
        };
        Ok(Dataset { split, samples })
    }

    /// Builds the minibatch for `indices`, converting features to `S`.
    pub fn batch<S: Scalar>(&self, indices: &[usize]) -> Batch<S> {
        match &self.samples {
            Samples::Classification {
                dim, features, labels, ..
            } => {
                let mut x = Vec::with_capacity(indices.len() * dim);
                for &i in indices {
                    x.extend(features[i * dim..(i + 1) * dim].iter().map(|&v| S::c(v)));
                }
                Batch::Dense {
                    x: Array::matrix(indices.len(), *dim, x).expect("batch shape"),
                    labels: indices.iter().map(|&i| labels[i]).collect(),
                }
            }
            Samples::Sequence { inputs, targets, .. } => Batch::Tokens {
                inputs: indices.iter().map(|&i| inputs[i].clone()).collect(),
                targets: indices.iter().map(|&i| targets[i].clone()).collect(),
            },
        }
    }

    pub fn full_batch<S: Scalar>(&self) -> Batch<S> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.batch(&idx)
    }

    /// Consecutive index chunks of at most `size` (the last may be shorter).
    pub fn chunks(&self, size: usize) -> Vec<Vec<usize>> {
        let size = size.max(1);
        (0..self.len())
            .collect::<Vec<_>>()
            .chunks(size)
            .map(|c| c.to_vec())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_range_is_validated() {
        assert!(Dataset::classification(Split::Train, 1, 2, vec![0.0, 1.0], vec![0, 2]).is_err());
        assert!(Dataset::classification(Split::Train, 2, 2, vec![0.0; 3], vec![0]).is_err());
    }

    #[test]
    fn subset_and_batch_preserve_rows() {
        let d = Dataset::classification(Split::Train, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0, 1, 2])
            .unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.features().unwrap(), &[5.0, 6.0, 1.0, 2.0]);
        let Batch::Dense { x, labels } = d.batch::<f32>(&[1]) else { panic!() };
        assert_eq!(x.data(), &[3.0f32, 4.0]);
        assert_eq!(labels, vec![1]);
    }
}
