use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

/// Class-conditional isotropic Gaussians with unit noise.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTask {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Distance between any two class means, in units of the noise deviation.
    pub separation: f64,
    /// Added to every test instance; zero gives identically distributed splits.
    pub shift: Vec<f64>,
    pub seed: u64,
}

impl GaussianTask {
    pub fn new(classes: usize, dim: usize, per_class: usize, shift: Vec<f64>, seed: u64) -> Self {
        GaussianTask {
            classes,
            dim,
            per_class,
            separation: 3.0,
            shift,
            seed,
        }
    }
}

/// Draws `(train, test)`; class `c` is centred at `separation/√2 · e_c`.
pub fn gen_gaussian_task(task: &GaussianTask) -> Result<(Dataset, Dataset)> {
    if task.classes < 2 || task.per_class == 0 {
        return Err(Error::arg("need at least two classes and one instance per class"));
    }
    if task.dim < task.classes {
        return Err(Error::arg("dimension must be at least the class count"));
    }
    if task.shift.len() != task.dim {
        return Err(Error::arg(format!("shift has {} entries for dimension {}", task.shift.len(), task.dim)));
    }
    if task.shift.iter().any(|v| !v.is_finite()) || !task.separation.is_finite() {
        return Err(Error::arg("shift and separation must be finite"));
    }
    let offset = task.separation / 2f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let mut draw = |shift: Option<&[f64]>, split: Split| {
        let mut features = Vec::with_capacity(task.classes * task.per_class * task.dim);
        let mut labels = Vec::with_capacity(task.classes * task.per_class);
        for i in 0..task.per_class * task.classes {
            let c = i % task.classes;
            for d in 0..task.dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let mean = if d == c { offset } else { 0.0 };
                features.push(mean + noise + shift.map_or(0.0, |s| s[d]));
            }
            labels.push(c);
        }
        Dataset::classification(split, task.dim, task.classes, features, labels)
    };
    let train = draw(None, Split::Train)?;
    let test = draw(Some(&task.shift), Split::Test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let t = GaussianTask::new(3, 5, 4, vec![0.0; 5], 9);
        let (a, b) = gen_gaussian_task(&t).unwrap();
        assert_eq!((a.len(), b.len()), (12, 12));
        assert_eq!(gen_gaussian_task(&t).unwrap(), (a, b));
    }

    #[test]
    fn invalid_arguments() {
        assert!(gen_gaussian_task(&GaussianTask::new(1, 5, 4, vec![0.0; 5], 0)).is_err());
        assert!(gen_gaussian_task(&GaussianTask::new(2, 2, 4, vec![f64::NAN, 0.0], 0)).is_err());
        assert!(gen_gaussian_task(&GaussianTask::new(2, 2, 4, vec![0.0], 0)).is_err());
    }

    #[test]
    fn shift_moves_the_test_mean() {
        let mut t = GaussianTask::new(2, 2, 2000, vec![0.0, 0.0], 1);
        t.shift = vec![5.0, -5.0];
        let (train, test) = gen_gaussian_task(&t).unwrap();
        let mean = |d: &Dataset, k: usize| {
            let f = d.features().unwrap();
            f.iter().skip(k).step_by(2).sum::<f64>() / d.len() as f64
        };
        assert!((mean(&test, 0) - mean(&train, 0) - 5.0).abs() < 0.1);
        assert!((mean(&test, 1) - mean(&train, 1) + 5.0).abs() < 0.1);
    }
}
