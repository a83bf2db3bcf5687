use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

/// Blend of `(1 − fraction)` of the training set with `fraction` of the shifted set.
#[derive(Clone, Copy, Debug)]
pub struct MixSpec<'a> {
    pub fraction: f64,
    pub train: &'a Dataset,
    pub shifted: &'a Dataset,
}

impl MixSpec<'_> {
    /// `(training, shifted)` instance counts; the total is the training-set size.
    pub fn quotas(&self) -> Result<(usize, usize)> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::arg(format!("mix fraction {} outside [0, 1]", self.fraction)));
        }
        let n = self.train.len();
        let x = (1.0 - self.fraction) * n as f64;
        // Snap products like 0.7 * 1000 that land a hair below an integer.
        let from_train = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.floor() } as usize;
        let from_shifted = n - from_train;
        if from_shifted > self.shifted.len() {
            return Err(Error::arg(format!(
                "need {from_shifted} shifted instances, source has {}",
                self.shifted.len()
            )));
        }
        Ok((from_train, from_shifted))
    }
}

/// Deterministic mixture. Each source is permuted once from `seed` and the
/// quotas are taken as prefixes, so mixtures for growing fractions are nested.
pub fn mix_datasets(spec: &MixSpec<'_>, seed: u64) -> Result<Dataset> {
    let (a, b) = spec.quotas()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ia: Vec<usize> = (0..spec.train.len()).collect();
    let mut ib: Vec<usize> = (0..spec.shifted.len()).collect();
    ia.shuffle(&mut rng);
    ib.shuffle(&mut rng);
    let left = spec.train.subset(&ia[..a]);
    let right = spec.shifted.subset(&ib[..b]);
    left.concat(&right, Split::Mixed)
}
