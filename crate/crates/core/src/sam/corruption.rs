use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grouping::ScaleVector;
use crate::params::ParamVector;
use crate::scalar::{l2_norm, Scalar};

/// Norm of the corruption constraint `‖T⁻¹a‖_p ≤ ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormOrder {
    L2,
    LInf,
}

impl NormOrder {
    pub fn name(self) -> &'static str {
        match self {
            NormOrder::L2 => "2",
            NormOrder::LInf => "inf",
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "l2" | "L2" => Ok(NormOrder::L2),
            "inf" | "linf" | "Linf" | "LInf" => Ok(NormOrder::LInf),
            _ => Err(Error::arg(format!("unsupported norm `{s}` (2 | inf)"))),
        }
    }
}

/// `‖T⁻¹v‖_p`.
pub fn scaled_norm<S: Scalar>(v: &[S], t: &[S], p: NormOrder) -> S {
    match p {
        NormOrder::L2 => v.iter().zip(t).map(|(&x, &s)| (x / s) * (x / s)).sum::<S>().sqrt(),
        NormOrder::LInf => v.iter().zip(t).fold(S::zero(), |m, (&x, &s)| m.max((x / s).abs())),
    }
}

fn sgn<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        S::one()
    } else if x < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

/// Steepest ascent step of length `η` under `‖T⁻¹u‖_p ≤ η`:
/// `u = η T²g / ‖Tg‖₂` for p = 2 and `u = η T sgn(g)` for p = ∞.
/// An all-zero gradient yields a zero step.
pub fn ascent_step_raw<S: Scalar>(grad: &[S], t: &[S], eta: S, p: NormOrder) -> Vec<S> {
    assert_eq!(grad.len(), t.len(), "gradient and scale lengths differ");
    match p {
        NormOrder::L2 => {
            let tg: Vec<S> = grad.iter().zip(t).map(|(&g, &s)| s * g).collect();
            let norm = l2_norm(&tg);
            if norm == S::zero() {
                return vec![S::zero(); grad.len()];
            }
            let scale = eta / norm;
            tg.iter().zip(t).map(|(&v, &s)| s * v * scale).collect()
        }
        NormOrder::LInf => grad.iter().zip(t).map(|(&g, &s)| eta * s * sgn(g)).collect(),
    }
}

/// Slack on the constraint boundary: points within a few ulps of the sphere
/// count as inside, which keeps projection idempotent to the bit.
fn boundary<S: Scalar>(eps: S) -> S {
    eps * (S::one() + S::c(8.0) * S::epsilon())
}

/// Euclidean projection onto `{a : ‖T⁻¹a‖_p ≤ ε}` (exact for diagonal `T`).
pub fn project_raw<S: Scalar>(v: &[S], t: &[S], eps: S, p: NormOrder) -> Vec<S> {
    assert_eq!(v.len(), t.len(), "vector and scale lengths differ");
    let limit = boundary(eps);
    match p {
        NormOrder::L2 => {
            let norm = scaled_norm(v, t, p);
            if norm <= limit || norm == S::zero() {
                v.to_vec()
            } else {
                let s = eps / norm;
                v.iter().map(|&x| x * s).collect()
            }
        }
        NormOrder::LInf => v
            .iter()
            .zip(t)
            .map(|(&x, &s)| {
                let y = x / s;
                if y.abs() <= limit {
                    x
                } else {
                    s * (sgn(y) * eps)
                }
            })
            .collect(),
    }
}

pub fn ascent_step<S: Scalar>(grad: &ParamVector<S>, t: &ScaleVector<S>, eta: S, p: NormOrder) -> Result<ParamVector<S>> {
    if !(eta > S::zero()) {
        return Err(Error::arg("ascent step size must be positive"));
    }
    if grad.len() != t.len() {
        return Err(Error::arg("gradient and scales differ in length"));
    }
    ParamVector::from_vec(grad.layout().clone(), ascent_step_raw(grad.as_slice(), t.diag(), eta, p))
}

pub fn project<S: Scalar>(v: &ParamVector<S>, t: &ScaleVector<S>, eps: S, p: NormOrder) -> Result<ParamVector<S>> {
    if !(eps >= S::zero()) {
        return Err(Error::arg("corruption radius must be non-negative"));
    }
    if v.len() != t.len() {
        return Err(Error::arg("vector and scales differ in length"));
    }
    ParamVector::from_vec(v.layout().clone(), project_raw(v.as_slice(), t.diag(), eps, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linf_ascent_is_sign_pattern() {
        assert_eq!(ascent_step_raw(&[2.0, -3.0], &[1.0, 1.0], 0.1, NormOrder::LInf), vec![0.1, -0.1]);
    }

    #[test]
    fn l2_ascent_is_normalized_gradient() {
        let u = ascent_step_raw(&[3.0f64, 4.0], &[1.0, 1.0], 0.5, NormOrder::L2);
        assert!((u[0] - 0.3).abs() < 1e-15 && (u[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn l2_ascent_with_scales() {
        let t = [2.0, 1.0];
        let u = ascent_step_raw(&[1.0, 1.0], &t, 1.0, NormOrder::L2);
        let r5 = 5f64.sqrt();
        assert!((u[0] - 4.0 / r5).abs() < 1e-12 && (u[1] - 1.0 / r5).abs() < 1e-12);
        assert!((u[0] - 1.788854).abs() < 1e-6 && (u[1] - 0.447214).abs() < 1e-6);
        assert!((scaled_norm(&u, &t, NormOrder::L2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        for p in [NormOrder::L2, NormOrder::LInf] {
            assert_eq!(ascent_step_raw(&[0.0, 0.0], &[1.0, 3.0], 0.2, p), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn projection_examples() {
        let id = [1.0f64, 1.0];
        assert_eq!(project_raw(&[0.1, 0.1], &id, 1.0, NormOrder::L2), vec![0.1, 0.1]);
        assert_eq!(project_raw(&[0.1, 0.1], &id, 1.0, NormOrder::LInf), vec![0.1, 0.1]);
        let p = project_raw(&[3.0f64, 4.0], &id, 1.0, NormOrder::L2);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_raw(&[0.3, -0.7], &id, 0.5, NormOrder::LInf), vec![0.3, -0.5]);
    }

    #[test]
    fn zero_radius_collapses_to_origin() {
        let p = project_raw(&[0.3, -0.7], &[1.0, 2.0], 0.0, NormOrder::L2);
        assert!(p.iter().all(|&x| x == 0.0));
        let p = project_raw(&[0.3, -0.7], &[1.0, 2.0], 0.0, NormOrder::LInf);
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_step_and_radius() {
        use crate::grouping::ScaleVector;
        use crate::params::Layout;
        use std::sync::Arc;
        let layout = Arc::new(Layout::new(vec![("w".into(), vec![2])]).unwrap());
        let g = ParamVector::<f64>::from_vec(layout, vec![1.0, 2.0]).unwrap();
        let t = ScaleVector::identity(2);
        assert!(ascent_step(&g, &t, 0.0, NormOrder::L2).is_err());
        assert!(project(&g, &t, -1.0, NormOrder::L2).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(0.05f64..4.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ascent_has_length_eta((g, t) in arb_case(), eta in 0.01f64..3.0) {
            prop_assume!(g.iter().any(|&x| x != 0.0));
            for p in [NormOrder::L2, NormOrder::LInf] {
                let u = ascent_step_raw(&g, &t, eta, p);
                prop_assert!((scaled_norm(&u, &t, p) - eta).abs() < 1e-12 * eta.max(1.0));
            }
        }

        #[test]
        fn linf_direction_ignores_gradient_scale((g, t) in arb_case(), c in 1e-3f64..1e3) {
            let cg: Vec<f64> = g.iter().map(|&x| x * c).collect();
            prop_assert_eq!(
                ascent_step_raw(&g, &t, 0.3, NormOrder::LInf),
                ascent_step_raw(&cg, &t, 0.3, NormOrder::LInf)
            );
        }

        #[test]
        fn projection_is_feasible_and_idempotent((v, t) in arb_case(), eps in 0.0f64..3.0) {
            for p in [NormOrder::L2, NormOrder::LInf] {
                let once = project_raw(&v, &t, eps, p);
                prop_assert!(scaled_norm(&once, &t, p) <= eps + 1e-9);
                let twice = project_raw(&once, &t, eps, p);
                prop_assert_eq!(&once, &twice);
                if scaled_norm(&v, &t, p) <= eps {
                    prop_assert_eq!(&once, &v);
                }
            }
        }
    }
}
