//! Riemannian gradient ascent on the product of unit circles.

use crate::linalg::{unit_modulus, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldOptions {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Backtracking contraction factor.
    pub contraction: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub initial_step: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self { max_iters: 500, grad_tol: 1e-6, contraction: 0.5, armijo: 1e-4, initial_step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub x: CMat,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub grad_norm: f64,
}

/// Projects a Euclidean gradient onto the tangent space at `x`:
/// `g - Re{g ∘ conj(x)} ∘ x`.
pub fn tangent(x: &CMat, g: &CMat) -> CMat {
    x.zip_map(g, |xi, gi| gi - xi * (gi * xi.conj()).re)
}

/// Entry-wise phase retraction.
pub fn retract(x: &CMat) -> CMat {
    x.map(unit_modulus)
}

/// Maximizes `f` over unit-modulus matrices. `grad` returns the Euclidean
/// gradient `2 df/d conj(x)`. Only steps that increase `f` are accepted, so
/// the trace is non-decreasing.
pub fn ascend(
    x0: &CMat,
    f: impl Fn(&CMat) -> f64,
    grad: impl Fn(&CMat) -> CMat,
    opts: &ManifoldOptions,
) -> AscentResult {
    let mut x = retract(x0);
    let mut fx = f(&x);
    let mut trace = vec![fx];
    let mut step = opts.initial_step;
    let mut gnorm = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let xi = tangent(&x, &grad(&x));
        gnorm = xi.norm();
        if gnorm < opts.grad_tol {
            break;
        }
        let slope = gnorm * gnorm;
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = retract(&(&x + &xi * crate::linalg::C64::from(t)));
            let fc = f(&cand);
            if fc >= fx + opts.armijo * t * slope {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            t *= opts.contraction;
        }
        if !accepted {
            break;
        }
        trace.push(fx);
        // let the next trial step grow again after a successful one
        step = (t / opts.contraction).min(opts.initial_step * 1e3);
    }
    AscentResult { x, trace, grad_norm: gnorm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, CVec, C64};

    #[test]
    fn tangent_is_orthogonal_to_radial_direction() {
        let x = CMat::from_fn(4, 1, |i, _| cis(i as f64));
        let g = CMat::from_fn(4, 1, |i, _| C64::new(i as f64, 1.0 - i as f64));
        let t = tangent(&x, &g);
        for i in 0..4 {
            assert!((t[(i, 0)] * x[(i, 0)].conj()).re.abs() < 1e-15);
        }
    }

    #[test]
    fn aligns_phases_with_target() {
        let n = 16;
        let a = CVec::from_fn(n, |i, _| cis(0.37 * (i * i) as f64) / (n as f64).sqrt());
        let f = |v: &CMat| v.column(0).dotc(&a).norm_sqr();
        let grad = |v: &CMat| {
            let s = a.dotc(&v.column(0));
            CMat::from_fn(n, 1, |i, _| a[i] * s * 2.0)
        };
        let x0 = CMat::from_element(n, 1, C64::from(1.0));
        let r = ascend(&x0, f, grad, &ManifoldOptions::default());
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(*r.trace.last().unwrap() > 0.999 * n as f64);
        assert!(r.x.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
