//! Hybrid analog/digital factorization of per-subcarrier precoders.

use super::manifold::{ascend, ManifoldOptions};
use crate::error::{Error, Result};
use crate::linalg::{pinv, svd, unit_modulus, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOptions {
    pub max_rounds: usize,
    /// Stop when the residual decreases by less than this fraction.
    pub tol: f64,
    /// Manifold settings for each analog update.
    pub manifold: ManifoldOptions,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self { max_rounds: 50, tol: 1e-9, manifold: ManifoldOptions { max_iters: 30, ..ManifoldOptions::default() } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridFactor {
    /// Frequency-flat unit-modulus analog matrix, `N x R`.
    pub analog: CMat,
    /// Per-subcarrier baseband matrices, `R x Ns`.
    pub baseband: Vec<CMat>,
    /// `sum_p ||T_p - F_RF F_BB,p||^2` after each outer round.
    pub residual_trace: Vec<f64>,
}

fn baseband(targets: &[CMat], rf: &CMat) -> Vec<CMat> {
    let p = pinv(rf, 1e-12);
    targets.iter().map(|t| &p * t).collect()
}

/// Approximates `targets[p]` by `F_RF F_BB,p` with a shared unit-modulus
/// `F_RF` (`rf` columns). When `power` is given every `F_RF F_BB,p` is
/// rescaled to that squared Frobenius norm at the end.
pub fn hybrid_factorize(targets: &[CMat], rf: usize, power: Option<f64>, opts: &HybridOptions) -> Result<HybridFactor> {
    let first = targets.first().ok_or_else(|| Error::InvalidParameter("no targets".into()))?;
    let (n, ns) = first.shape();
    if targets.iter().any(|t| t.shape() != (n, ns)) {
        return Err(Error::Dimension("targets must share one shape".into()));
    }
    if rf < ns || rf > n {
        return Err(Error::InvalidParameter(format!("need Ns <= R <= N (Ns={ns}, R={rf}, N={n})")));
    }
    // phases of the dominant left singular vectors of all targets side by side
    let mut stacked = CMat::zeros(n, ns * targets.len());
    for (p, t) in targets.iter().enumerate() {
        stacked.columns_mut(p * ns, ns).copy_from(t);
    }
    let d = svd(&stacked);
    let mut analog = CMat::from_element(n, rf, C64::from(1.0));
    let k = rf.min(d.u.ncols());
    for r in 0..k {
        for i in 0..n {
            analog[(i, r)] = unit_modulus(d.u[(i, r)]);
        }
    }
    // With the baseband eliminated by least squares the residual is
    // tr(S) - tr(P_X S), S = sum_p T_p T_p^H; ascend on its negative.
    let s = &stacked * stacked.adjoint();
    let total = s.trace().re;
    let captured = |x: &CMat| -> (CMat, f64) {
        let xp = pinv(x, 1e-12);
        let proj = x * &xp;
        let r = total - (&proj * &s).trace().re;
        (xp, r)
    };
    let mut trace = vec![captured(&analog).1];
    for _ in 0..opts.max_rounds {
        let f = |x: &CMat| -captured(x).1;
        let grad = |x: &CMat| {
            let (xp, _) = captured(x);
            let perp = CMat::identity(n, n) - x * &xp;
            perp * &s * xp.adjoint() * C64::from(2.0)
        };
        let res = ascend(&analog, f, grad, &opts.manifold);
        analog = res.x;
        let before = trace[trace.len() - 1];
        let r = captured(&analog).1.min(before);
        trace.push(r);
        if before - r <= opts.tol * before.max(f64::MIN_POSITIVE) || res.trace.len() == 1 {
            break;
        }
    }
    let mut bb = baseband(targets, &analog);
    if let Some(rho) = power {
        for b in bb.iter_mut() {
            let e = (&analog * &*b).norm_squared();
            if e > 0.0 {
                *b *= C64::from((rho / e).sqrt());
            }
        }
    }
    Ok(HybridFactor { analog, baseband: bb, residual_trace: trace })
}
