use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::landscape::eigen::{lanczos, symmetric_eigenvalues};
use crate::model::{loss_and_grad, Model};
use crate::params::ParamVector;
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumConfig {
    pub k: usize,
    pub sample_count: usize,
    /// Seeds the choice of samples and the Lanczos start vector.
    pub seed: u64,
    /// Largest sample count handled by the exact Gram-matrix route.
    pub gram_limit: usize,
}

impl SpectrumConfig {
    pub fn new(k: usize, sample_count: usize) -> Self {
        SpectrumConfig {
            k,
            sample_count,
            seed: 0,
            gram_limit: 4096,
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig::new(50, 512)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Top-k eigenvalues, descending; zeros beyond the rank.
    pub eigenvalues: Vec<f64>,
    pub sample_count: usize,
    /// `tr F = (1/m) Σ ‖∇ℓ(θ; zᵢ)‖²`.
    pub trace: f64,
    /// True when the eigenvalues came from Lanczos rather than the Gram matrix.
    pub lanczos: bool,
}

/// Top eigenvalues of the empirical Fisher `(1/m) Σ gᵢgᵢᵀ` from explicit
/// per-sample gradients.
pub fn spectrum_from_gradients<S: Scalar>(grads: &[Vec<S>], k: usize, gram_limit: usize, seed: u64) -> Result<SpectrumReport> {
    let m = grads.len();
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if m == 0 {
        return Err(Error::arg("no per-sample gradients"));
    }
    let n = grads[0].len();
    if grads.iter().any(|g| g.len() != n) {
        return Err(Error::arg("per-sample gradients differ in length"));
    }
    let inv_m = S::one() / S::from_usize_lossy(m);
    let trace = grads.iter().map(|g| dot(g, g)).sum::<S>() * inv_m;
    let (mut ev, used_lanczos) = if m <= gram_limit {
        let mut gram = vec![S::zero(); m * m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&grads[i], &grads[j]) * inv_m;
                gram[i * m + j] = v;
                gram[j * m + i] = v;
            }
        }
        (symmetric_eigenvalues(&gram, m)?, false)
    } else {
        let iters = (3 * k).max(k + 20).min(m).min(n);
        let matvec = |v: &[S]| {
            let mut out = vec![S::zero(); n];
            for g in grads {
                let c = dot(g, v) * inv_m;
                out.iter_mut().zip(g).for_each(|(o, &x)| *o += c * x);
            }
            out
        };
        (lanczos(n, iters, seed, matvec)?, true)
    };
    let mut ev: Vec<f64> = ev.drain(..).map(|v| v.as_f64().max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.resize(k, 0.0);
    Ok(SpectrumReport {
        eigenvalues: ev,
        sample_count: m,
        trace: trace.as_f64(),
        lanczos: used_lanczos,
    })
}

/// Per-sample gradients of `sample_count` seeded draws from `dataset`
/// (all of it when smaller), computed in parallel.
pub fn sample_gradients<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    dataset: &Dataset,
    sample_count: usize,
    seed: u64,
) -> Result<Vec<Vec<S>>> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if sample_count < dataset.len() {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.truncate(sample_count);
    }
    order
        .par_iter()
        .map(|&i| loss_and_grad(model, params, &dataset.batch::<S>(&[i])).map(|(_, g)| g.into_vec()))
        .collect()
}

pub fn fisher_spectrum<S: Scalar, M: Model<S> + ?Sized>(
    model: &M,
    params: &ParamVector<S>,
    dataset: &Dataset,
    cfg: &SpectrumConfig,
) -> Result<SpectrumReport> {
    if cfg.k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if cfg.sample_count < cfg.k {
        return Err(Error::arg(format!("sample count {} is below k = {}", cfg.sample_count, cfg.k)));
    }
    if dataset.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let grads = sample_gradients(model, params, dataset, cfg.sample_count, cfg.seed)?;
    spectrum_from_gradients(&grads, cfg.k, cfg.gram_limit, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_pair() {
        let r = spectrum_from_gradients(&[vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], 3, 4096, 0).unwrap();
        assert!((r.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 0.5).abs() < 1e-14);
        assert_eq!(r.eigenvalues[2], 0.0);
        assert!((r.trace - 2.5).abs() < 1e-14);
    }

    #[test]
    fn identical_gradients_are_rank_one() {
        let g = vec![1.0, -2.0, 2.0];
        let r = spectrum_from_gradients(&vec![g; 4], 3, 4096, 0).unwrap();
        assert!((r.eigenvalues[0] - 9.0).abs() < 1e-12);
        assert!(r.eigenvalues[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn lanczos_route_agrees_with_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grads: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..25).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect())
            .collect();
        let exact = spectrum_from_gradients(&grads, 5, 4096, 0).unwrap();
        let approx = spectrum_from_gradients(&grads, 5, 10, 0).unwrap();
        assert!(approx.lanczos && !exact.lanczos);
        for (a, b) in exact.eigenvalues.iter().zip(&approx.eigenvalues) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn k_zero_rejected() {
        assert!(spectrum_from_gradients(&[vec![1.0f64]], 0, 10, 0).is_err());
    }
}
