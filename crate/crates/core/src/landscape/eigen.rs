//! Symmetric eigenvalues: Householder reduction to tridiagonal form followed
//! by implicit QL, plus a Lanczos driver for large implicit operators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{dot, l2_norm, Scalar};

/// Eigenvalues of the symmetric `n×n` row-major matrix `a`, unsorted.
pub fn symmetric_eigenvalues<S: Scalar>(a: &[S], n: usize) -> Result<Vec<S>> {
    assert_eq!(a.len(), n * n, "matrix is not n×n");
    let (d, e) = tridiagonalize(a.to_vec(), n);
    tridiagonal_eigenvalues(d, e)
}

/// Householder reduction; returns the diagonal and the subdiagonal
/// (`e[i]` couples `i` and `i + 1`).
pub fn tridiagonalize<S: Scalar>(mut a: Vec<S>, n: usize) -> (Vec<S>, Vec<S>) {
    let two = S::c(2.0);
    let mut v = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let xnorm = (lo..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<S>().sqrt();
        if xnorm == S::zero() {
            continue;
        }
        let x0 = a[lo * n + k];
        let alpha = if x0 > S::zero() { -xnorm } else { xnorm };
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        let vnorm = (lo..n).map(|i| v[i] * v[i]).sum::<S>().sqrt();
        if vnorm == S::zero() {
            continue;
        }
        for vi in &mut v[lo..n] {
            *vi /= vnorm;
        }
        for i in lo..n {
            p[i] = (lo..n).map(|j| a[i * n + j] * v[j]).sum();
        }
        let kk: S = (lo..n).map(|i| v[i] * p[i]).sum();
        for i in lo..n {
            p[i] -= kk * v[i];
        }
        for i in lo..n {
            for j in lo..n {
                a[i * n + j] -= two * (v[i] * p[j] + p[i] * v[j]);
            }
        }
        a[lo * n + k] = alpha;
        a[k * n + lo] = alpha;
        for i in lo + 1..n {
            a[i * n + k] = S::zero();
            a[k * n + i] = S::zero();
        }
    }
    let d = (0..n).map(|i| a[i * n + i]).collect();
    let e = (0..n).map(|i| if i + 1 < n { a[(i + 1) * n + i] } else { S::zero() }).collect();
    (d, e)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalues<S: Scalar>(mut d: Vec<S>, mut e: Vec<S>) -> Result<Vec<S>> {
    let n = d.len();
    assert_eq!(e.len(), n, "subdiagonal must be padded to n");
    if n == 0 {
        return Ok(d);
    }
    e[n - 1] = S::zero();
    let two = S::c(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= S::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Numerical("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(S::one());
            g = d[m] - d[l] + e[l] / (g + if g >= S::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (S::one(), S::one(), S::zero());
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == S::zero() {
                    d[i + 1] -= p;
                    e[m] = S::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = S::zero();
        }
    }
    Ok(d)
}

/// Ritz values of a symmetric operator from `iters` Lanczos steps with full
/// reorthogonalization, starting from a seeded random vector.
pub fn lanczos<S: Scalar>(dim: usize, iters: usize, seed: u64, matvec: impl Fn(&[S]) -> Vec<S>) -> Result<Vec<S>> {
    if dim == 0 || iters == 0 {
        return Ok(Vec::new());
    }
    let iters = iters.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<S> = (0..dim).map(|_| S::c(StandardNormal.sample(&mut rng))).collect();
    let qn = l2_norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);
    let mut basis: Vec<Vec<S>> = Vec::with_capacity(iters);
    let (mut alphas, mut betas) = (Vec::with_capacity(iters), Vec::with_capacity(iters));
    for _ in 0..iters {
        let mut w = matvec(&q);
        let alpha = dot(&w, &q);
        basis.push(q);
        // Two rounds of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let h = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, &y)| *x -= h * y);
            }
        }
        alphas.push(alpha);
        let beta = l2_norm(&w);
        let scale = alphas.iter().map(|a: &S| a.abs()).fold(S::zero(), S::max).max(S::min_positive_value());
        if beta <= scale * S::c(1e3) * S::epsilon() {
            break;
        }
        betas.push(beta);
        q = w.into_iter().map(|x| x / beta).collect();
    }
    let k = alphas.len();
    betas.truncate(k.saturating_sub(1));
    betas.resize(k, S::zero());
    tridiagonal_eigenvalues(alphas, betas)
}
