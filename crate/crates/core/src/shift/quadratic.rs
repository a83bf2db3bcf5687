use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-instance loss `½ (w − c)ᵀ A (w − c)` with `A` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadInstance {
    pub curvature: DMatrix<f64>,
    pub center: DVector<f64>,
}

impl QuadInstance {
    pub fn loss(&self, w: &DVector<f64>) -> f64 {
        let d = w - &self.center;
        0.5 * d.dot(&(&self.curvature * &d))
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.curvature * (w - &self.center)
    }
}

/// A finite instance pool under a base weighting `p` and a shifted weighting `p*`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticShiftProblem {
    instances: Vec<QuadInstance>,
    base: Vec<f64>,
    shifted: Vec<f64>,
}

const WEIGHT_TOL: f64 = 1e-12;

fn check_weights(w: &[f64], n: usize, what: &str) -> Result<()> {
    if w.len() != n {
        return Err(Error::arg(format!("{what} has {} entries for {n} instances", w.len())));
    }
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::arg(format!("{what} must be finite and non-negative")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL * n as f64 {
        return Err(Error::arg(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl QuadraticShiftProblem {
    pub fn new(instances: Vec<QuadInstance>, base: Vec<f64>, shifted: Vec<f64>) -> Result<Self> {
        let n = instances.len();
        if n == 0 {
            return Err(Error::arg("empty instance pool"));
        }
        let dim = instances[0].center.len();
        for (i, inst) in instances.iter().enumerate() {
            if inst.center.len() != dim || inst.curvature.shape() != (dim, dim) {
                return Err(Error::arg(format!("instance {i} has inconsistent dimensions")));
            }
            if (&inst.curvature - inst.curvature.transpose()).amax() > 1e-12 * inst.curvature.amax().max(1.0) {
                return Err(Error::arg(format!("instance {i} curvature is not symmetric")));
            }
            if inst.curvature.clone().cholesky().is_none() {
                return Err(Error::arg(format!("instance {i} curvature is not positive definite")));
            }
        }
        check_weights(&base, n, "base weights")?;
        check_weights(&shifted, n, "shifted weights")?;
        if base.iter().any(|&p| p <= 0.0) {
            return Err(Error::arg("base weights must be strictly positive"));
        }
        Ok(QuadraticShiftProblem { instances, base, shifted })
    }

    pub fn instances(&self) -> &[QuadInstance] {
        &self.instances
    }

    pub fn dim(&self) -> usize {
        self.instances[0].center.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn shifted(&self) -> &[f64] {
        &self.shifted
    }

    /// Density ratio minus one, `p*(z)/p(z) − 1`.
    pub fn ratio(&self) -> Vec<f64> {
        self.base.iter().zip(&self.shifted).map(|(p, q)| q / p - 1.0).collect()
    }

    /// `(1 − η) p + η p*`.
    pub fn mixed_weights(&self, eta: f64) -> Vec<f64> {
        self.base.iter().zip(&self.shifted).map(|(p, q)| (1.0 - eta) * p + eta * q).collect()
    }

    /// Same pool with `p*` replaced by the `η`-mixture.
    pub fn mixed(&self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::arg("mix fraction must lie in [0, 1]"));
        }
        let mut w = self.mixed_weights(eta);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        QuadraticShiftProblem::new(self.instances.clone(), self.base.clone(), w)
    }

    pub fn hessian(&self, weights: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        self.instances
            .iter()
            .zip(weights)
            .fold(DMatrix::zeros(d, d), |acc, (inst, &w)| acc + &inst.curvature * w)
    }

    pub fn loss(&self, weights: &[f64], w: &DVector<f64>) -> f64 {
        self.instances.iter().zip(weights).map(|(inst, &p)| p * inst.loss(w)).sum()
    }

    pub fn gradient(&self, weights: &[f64], w: &DVector<f64>) -> DVector<f64> {
        self.instances
            .iter()
            .zip(weights)
            .fold(DVector::zeros(self.dim()), |acc, (inst, &p)| acc + inst.gradient(w) * p)
    }

    /// Strong-convexity constant of the base objective: smallest eigenvalue of `Σ p A`.
    pub fn mu(&self) -> f64 {
        self.hessian(&self.base).symmetric_eigenvalues().min()
    }
}

/// `argmin Σ wᵢ ℓ(·; zᵢ) = (Σ wᵢAᵢ)⁻¹ Σ wᵢAᵢcᵢ`.
pub fn exact_minimizer(problem: &QuadraticShiftProblem, weights: &[f64]) -> Result<DVector<f64>> {
    if weights.len() != problem.instances.len() {
        return Err(Error::arg("weight count differs from the instance count"));
    }
    let h = problem.hessian(weights);
    let rhs = problem
        .instances
        .iter()
        .zip(weights)
        .fold(DVector::zeros(problem.dim()), |acc, (inst, &w)| acc + &inst.curvature * &inst.center * w);
    solve_spd(h, &rhs)
}

fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let ev = h.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.amax());
    if !(lo > hi * 1e-13) {
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::Numerical(format!(
            "weighted Hessian is singular (condition number {cond:.3e}, smallest eigenvalue {lo:.3e})"
        )));
    }
    let chol = h.cholesky().ok_or_else(|| Error::Numerical("weighted Hessian is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

/// `θ* − θ` from the two exact minimizers.
pub fn delta_exact(problem: &QuadraticShiftProblem) -> Result<DVector<f64>> {
    Ok(exact_minimizer(problem, &problem.shifted)? - exact_minimizer(problem, &problem.base)?)
}

/// First-order estimate `δ ≈ −H⁻¹ E_p[r(z) ∇ℓ(θ; z)]`.
pub fn delta_first_order(problem: &QuadraticShiftProblem) -> Result<DVector<f64>> {
    let theta = exact_minimizer(problem, &problem.base)?;
    let r = problem.ratio();
    let g = problem
        .instances
        .iter()
        .zip(problem.base.iter().zip(&r))
        .fold(DVector::zeros(problem.dim()), |acc, (inst, (&p, &ri))| acc + inst.gradient(&theta) * (p * ri));
    Ok(-solve_spd(problem.hessian(&problem.base), &g)?)
}

/// An f-divergence generator with its second Taylor coefficient at 1.
#[derive(Clone, Copy, Debug)]
pub struct FDivergenceSpec {
    pub name: &'static str,
    pub generator: fn(f64) -> f64,
    pub a1: f64,
    pub a2: f64,
}

fn kl_generator(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

impl FDivergenceSpec {
    /// `f(t) = t ln t`, so `f(1 + x) = x + x²/2 + o(x²)`.
    pub fn kl() -> Self {
        FDivergenceSpec {
            name: "kl",
            generator: kl_generator,
            a1: 1.0,
            a2: 0.5,
        }
    }

    pub fn new(name: &'static str, generator: fn(f64) -> f64, a1: f64, a2: f64) -> Result<Self> {
        if generator(1.0).abs() > 1e-15 {
            return Err(Error::arg("generator must vanish at 1"));
        }
        if a2 == 0.0 || !a2.is_finite() {
            return Err(Error::arg("second Taylor coefficient must be non-zero"));
        }
        Ok(FDivergenceSpec { name, generator, a1, a2 })
    }

    /// `C_f = Σ p f(p*/p)`. Summed as `Σ p [f(t) − a₁(t − 1)]`, which is the
    /// same value for normalized weights but avoids cancelling the linear term.
    pub fn divergence(&self, base: &[f64], shifted: &[f64]) -> f64 {
        base.iter()
            .zip(shifted)
            .map(|(&p, &q)| {
                let t = q / p;
                p * ((self.generator)(t) - self.a1 * (t - 1.0))
            })
            .sum()
    }

    /// Second-order part `a₂ Σ p r²`.
    pub fn second_order(&self, base: &[f64], shifted: &[f64]) -> f64 {
        self.a2 * base.iter().zip(shifted).map(|(&p, &q)| p * (q / p - 1.0).powi(2)).sum::<f64>()
    }
}

/// `C_δ = (1/μ) √((C_f / a₂) E_p‖∇ℓ(θ; z)‖²)`.
pub fn delta_bound(problem: &QuadraticShiftProblem, divergence: &FDivergenceSpec) -> Result<f64> {
    let mu = problem.mu();
    if !(mu > 0.0) {
        return Err(Error::arg(format!("strong convexity constant {mu} is not positive")));
    }
    let theta = exact_minimizer(problem, &problem.base)?;
    let c_f = divergence.divergence(&problem.base, &problem.shifted).max(0.0);
    let grad_sq: f64 = problem
        .instances
        .iter()
        .zip(&problem.base)
        .map(|(inst, &p)| p * inst.gradient(&theta).norm_squared())
        .sum();
    Ok((c_f / divergence.a2 * grad_sq).sqrt() / mu)
}

/// Seeded random problem. `shift_scale` multiplies a fixed per-instance
/// perturbation of the base weights; `shared_curvature` uses one `A` for all.
pub fn random_problem(
    instances: usize,
    dim: usize,
    shift_scale: f64,
    shared_curvature: bool,
    seed: u64,
) -> Result<QuadraticShiftProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spd = |rng: &mut ChaCha8Rng| {
        let b = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(dim, dim) * 0.5
    };
    let shared = spd(&mut rng);
    let mut pool = Vec::with_capacity(instances);
    for _ in 0..instances {
        let curvature = if shared_curvature { shared.clone() } else { spd(&mut rng) };
        let center = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        pool.push(QuadInstance { curvature, center });
    }
    let raw: Vec<f64> = (0..instances).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let base: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let u: Vec<f64> = (0..instances).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean_u: f64 = base.iter().zip(&u).map(|(p, x)| p * x).sum();
    // r = s (u − E_p u) has zero mean under p, so p* = p (1 + r) already sums to 1.
    let shifted: Vec<f64> = base.iter().zip(&u).map(|(p, x)| p * (1.0 + shift_scale * (x - mean_u))).collect();
    if shifted.iter().any(|&q| q < 0.0) {
        return Err(Error::arg("shift scale too large: negative shifted weight"));
    }
    QuadraticShiftProblem::new(pool, base, shifted)
}
