use super::CpdResult;
use crate::error::{Error, Result};
use crate::linalg::{eig, pinv, pinv_from_svd, svd, CMat};
use crate::tensor::{cp_reconstruct, khatri_rao, ComplexTensor3, FactorTriple};

const RCOND: f64 = 1e-10;

/// Closed-form CPD for tensors whose third factor is Vandermonde.
///
/// The transposed mode-1 unfolding is `(C ⊙ B) A^T`, laid out in `P` row
/// blocks of height `J`. Its rank-`U` column space `Us` satisfies
/// `Us M = C ⊙ B`, and dropping the last/first block turns the Vandermonde
/// shift into `U1^+ U2 = M Z M^{-1}` with `Z` the generators.
pub fn vs_fit(y: &ComplexTensor3, rank: usize) -> Result<CpdResult> {
    let [q, j, p] = y.dims();
    if p < 2 {
        return Err(Error::InvalidParameter("closed-form solver needs at least two subcarriers".into()));
    }
    let limit = q.min((p - 1) * j);
    if rank == 0 || rank > limit {
        return Err(Error::InfeasibleRank { rank, limit });
    }
    let y1 = y.unfold(1)?;
    let y1t = y1.transpose();
    let d = svd(&y1t);
    let us = d.u_leading(rank);
    let rows = (p - 1) * j;
    let u1 = us.rows(0, rows).into_owned();
    let u2 = us.rows(j, rows).into_owned();
    let shift = pinv(&u1, RCOND) * u2;
    let (z, m) = eig(&shift)?;

    for a in 0..rank {
        for b in (a + 1)..rank {
            if (z[a] - z[b]).norm() < 1e-6 {
                return Err(Error::Conditioning(format!(
                    "generators {a} and {b} nearly coincide (|z_a - z_b| = {:.2e}); delays are not separable",
                    (z[a] - z[b]).norm()
                )));
            }
        }
    }
    let m_svd = svd(&m);
    let cond = m_svd.s[0] / m_svd.s[rank - 1].max(f64::MIN_POSITIVE);
    if cond > 1e8 {
        log::warn!("eigenvector matrix of the shift problem is ill-conditioned (cond {cond:.2e})");
    }

    let mut c = CMat::zeros(p, rank);
    for (u, &zu) in z.iter().enumerate() {
        let mut pow = zu;
        for k in 0..p {
            c[(k, u)] = pow;
            pow *= zu;
        }
    }

    // b_u = ((c_u^H / c_u^H c_u) ⊗ I_J) Us M(:,u)
    let kr_cols = &us * &m;
    let mut b = CMat::zeros(j, rank);
    for u in 0..rank {
        let cu = c.column(u);
        let denom = cu.norm_squared();
        for k in 0..p {
            let w = cu[k].conj() / denom;
            for jj in 0..j {
                b[(jj, u)] += w * kr_cols[(k * j + jj, u)];
            }
        }
    }

    let kr = khatri_rao(&c, &b)?;
    let a = (pinv_from_svd(&svd(&kr), RCOND) * y1t).transpose();

    let factors = FactorTriple::new(a, b, c)?;
    let obj = cp_reconstruct(&factors)?.sub(y)?.norm_squared();
    Ok(CpdResult { factors, trace: vec![obj], converged: true, effective_rank: rank, ridge_used: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::match_components;
    use crate::linalg::{cis, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vandermonde_factors(seed: u64, dims: [usize; 3], rank: usize) -> FactorTriple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |r: usize| CMat::from_fn(r, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let a = m(dims[0]);
        let b = m(dims[1]);
        let c = CMat::from_fn(dims[2], rank, |k, u| cis(-(0.3 + 0.9 * u as f64) * (k + 1) as f64));
        FactorTriple::new(a, b, c).unwrap()
    }

    #[test]
    fn noiseless_exact_recovery() {
        let truth = vandermonde_factors(1, [8, 16, 8], 4);
        let y = cp_reconstruct(&truth).unwrap();
        let res = vs_fit(&y, 4).unwrap();
        let rec = cp_reconstruct(&res.factors).unwrap();
        let err = rec.sub(&y).unwrap().frobenius_norm() / y.frobenius_norm();
        assert!(err < 1e-8, "err {err}");
        let mm = match_components(&res.factors, &truth).unwrap();
        for (t, &e) in mm.perm.iter().enumerate() {
            let (zt, ze) = (truth.c[(0, t)], res.factors.c[(0, e)]);
            assert!((zt - ze).norm() < 1e-9);
        }
    }

    #[test]
    fn rank_one() {
        let truth = vandermonde_factors(2, [4, 3, 5], 1);
        let y = cp_reconstruct(&truth).unwrap();
        let res = vs_fit(&y, 1).unwrap();
        assert!((res.factors.c[(0, 0)] - truth.c[(0, 0)]).norm() < 1e-10);
        let err = cp_reconstruct(&res.factors).unwrap().sub(&y).unwrap().frobenius_norm() / y.frobenius_norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn infeasible_rank_and_short_tensor() {
        let y = cp_reconstruct(&vandermonde_factors(3, [3, 4, 4], 2)).unwrap();
        assert!(matches!(vs_fit(&y, 4), Err(Error::InfeasibleRank { rank: 4, limit: 3 })));
        assert!(matches!(vs_fit(&y, 0), Err(Error::InfeasibleRank { .. })));
        let flat = cp_reconstruct(&vandermonde_factors(3, [3, 4, 1], 1)).unwrap();
        assert!(vs_fit(&flat, 1).is_err());
    }

    #[test]
    fn coincident_generators_are_reported() {
        let mut f = vandermonde_factors(4, [6, 6, 5], 2);
        let col = f.c.column(0).into_owned();
        f.c.set_column(1, &col);
        let y = cp_reconstruct(&f).unwrap();
        // a shared generator leaves C ⊙ B rank deficient or the eigenvalues equal
        assert!(vs_fit(&y, 2).is_err());
    }

    #[test]
    fn scaling_equivariance() {
        let truth = vandermonde_factors(5, [6, 8, 6], 3);
        let y = cp_reconstruct(&truth).unwrap();
        let c = C64::new(0.3, -1.7);
        let r1 = cp_reconstruct(&vs_fit(&y, 3).unwrap().factors).unwrap().scale(c);
        let r2 = cp_reconstruct(&vs_fit(&y.scale(c), 3).unwrap().factors).unwrap();
        let err = r1.sub(&r2).unwrap().frobenius_norm() / r2.frobenius_norm();
        assert!(err < 1e-10);
    }
}
