use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AlsOptions, CpdResult};
use crate::error::{Error, Result};
use crate::linalg::{solve_hermitian, svd, CMat, C64};
use crate::tensor::{cp_reconstruct, khatri_rao, ComplexTensor3, FactorTriple};

/// Plain ALS: minimizes `||Y - [[A, B, C]]||_F^2` by exact block updates.
///
/// After each sweep an extrapolated point `X + s (X - X_prev)` with
/// `s = sweep^(1/3)` replaces the iterate when it has a lower objective.
pub fn als_fit(y: &ComplexTensor3, rank: usize, opts: &AlsOptions) -> Result<CpdResult> {
    opts.validate()?;
    run(y, rank, 0.0, opts)
}

/// Ridge-regularized ALS at an overestimated rank, followed by pruning of
/// weak components. With `mu = 0` this is [`als_fit`] at the overestimated
/// rank and nothing is pruned.
pub fn als_fit_regularized(y: &ComplexTensor3, opts: &AlsOptions) -> Result<CpdResult> {
    opts.validate()?;
    let rank = opts
        .rank_overestimate
        .ok_or_else(|| Error::InvalidParameter("regularized ALS needs rank_overestimate".into()))?;
    let mut res = run(y, rank, opts.mu, opts)?;
    if opts.mu > 0.0 {
        let energy = res.factors.component_energy();
        let top = energy.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..energy.len()).filter(|&r| top > 0.0 && energy[r] >= opts.prune_threshold * top).collect();
        res.factors = res.factors.select(&keep);
        res.effective_rank = keep.len();
    }
    Ok(res)
}

fn run(y: &ComplexTensor3, rank: usize, mu: f64, opts: &AlsOptions) -> Result<CpdResult> {
    if rank == 0 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    let i = y.dims()[0];
    let y1 = y.unfold(1)?;
    let y2 = y.unfold(2)?;
    let y3 = y.unfold(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut a = CMat::zeros(i, rank);
    let mut b = init_factor(&y2, rank, &mut rng);
    let mut c = init_factor(&y3, rank, &mut rng);

    let mut trace = Vec::new();
    let mut ridge_used = false;
    let mut converged = false;
    let y_energy = y.norm_squared();
    let objective = |a: &CMat, b: &CMat, c: &CMat| -> Result<f64> {
        let fit = FactorTriple::new(a.clone(), b.clone(), c.clone())?;
        let mut obj = cp_reconstruct(&fit)?.sub(y)?.norm_squared();
        if mu > 0.0 {
            obj += mu * (a.norm_squared() + b.norm_squared() + c.norm_squared());
        }
        Ok(obj)
    };
    for sweep in 1..=opts.max_sweeps {
        let (pa, pb, pc) = (a.clone(), b.clone(), c.clone());
        let (na, r1) = update(&y1, &c, &b, mu);
        a = na;
        let (nb, r2) = update(&y2, &c, &a, mu);
        b = nb;
        let (nc, r3) = update(&y3, &b, &a, mu);
        c = nc;
        ridge_used |= r1 | r2 | r3;
        let mut obj = objective(&a, &b, &c)?;

        // extrapolate along the last sweep; kept only if it lowers the objective
        if sweep > 2 {
            let s = C64::from((sweep as f64).cbrt());
            let ea = &a + (&a - &pa) * s;
            let eb = &b + (&b - &pb) * s;
            let ec = &c + (&c - &pc) * s;
            let e_obj = objective(&ea, &eb, &ec)?;
            if e_obj < obj {
                (a, b, c, obj) = (ea, eb, ec, e_obj);
            }
        }

        let prev = trace.last().copied();
        trace.push(obj);
        if obj <= 1e-28 * y_energy || y_energy == 0.0 {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if prev - obj <= opts.tol * prev {
                converged = true;
                break;
            }
        }
    }
    if ridge_used {
        log::warn!("ALS hit a rank-deficient Khatri-Rao system; ridge-regularized solve used");
    }
    Ok(CpdResult {
        factors: FactorTriple::new(a, b, c)?,
        trace,
        converged,
        effective_rank: rank,
        ridge_used,
    })
}

/// Solves `min_X ||Yn - X (P ⊙ Q)^T||^2 + mu ||X||^2` through the normal
/// equations `X ((P^H P) ∘ (Q^H Q) + mu I)^* = Yn (P ⊙ Q)^*`.
fn update(yn: &CMat, p: &CMat, q: &CMat, mu: f64) -> (CMat, bool) {
    let kr = khatri_rao(p, q).expect("factor ranks agree");
    let mut gram = (p.adjoint() * p).component_mul(&(q.adjoint() * q));
    for d in 0..gram.nrows() {
        gram[(d, d)] += C64::from(mu);
    }
    let rhs = yn * kr.conjugate();
    let (xt, ridge) = solve_hermitian(&gram, &rhs.transpose());
    (xt.transpose(), ridge)
}

/// Leading left singular vectors of an unfolding; columns beyond its rank
/// (or beyond the mode size) are filled with seeded random unit vectors.
fn init_factor(yn: &CMat, rank: usize, rng: &mut ChaCha8Rng) -> CMat {
    let d = svd(yn);
    let avail = d.rank(1e-12).min(rank);
    let mut out = CMat::zeros(yn.nrows(), rank);
    out.columns_mut(0, avail).copy_from(&d.u_leading(avail));
    for r in avail..rank {
        let mut col = CMat::from_fn(yn.nrows(), 1, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let n = col.norm();
        col /= C64::from(n);
        out.set_column(r, &col.column(0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_error;
    use crate::tensor::FactorTriple;

    fn random_factors(seed: u64, dims: [usize; 3], rank: usize) -> FactorTriple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |r: usize| CMat::from_fn(r, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let a = m(dims[0]);
        let b = m(dims[1]);
        let c = m(dims[2]);
        FactorTriple::new(a, b, c).unwrap()
    }

    #[test]
    fn rank_one_round_trip() {
        let f = random_factors(1, [5, 6, 4], 1);
        let y = cp_reconstruct(&f).unwrap();
        let res = als_fit(&y, 1, &AlsOptions::default()).unwrap();
        assert!(res.trace.len() <= 50);
        assert!(*res.trace.last().unwrap() < 1e-12);
    }

    #[test]
    fn zero_tensor_gives_zero_factors() {
        let y = ComplexTensor3::zeros([3, 4, 2]).unwrap();
        let res = als_fit(&y, 2, &AlsOptions::default()).unwrap();
        assert_eq!(*res.trace.last().unwrap(), 0.0);
        assert_eq!(cp_reconstruct(&res.factors).unwrap().norm_squared(), 0.0);
    }

    #[test]
    fn rank_four_round_trip() {
        let f = random_factors(2, [8, 16, 8], 4);
        let y = cp_reconstruct(&f).unwrap();
        let res = als_fit(&y, 4, &AlsOptions::default()).unwrap();
        let rec = cp_reconstruct(&res.factors).unwrap();
        let err = rec.sub(&y).unwrap().frobenius_norm() / y.frobenius_norm();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn trace_is_nonincreasing() {
        let f = random_factors(3, [6, 8, 5], 3);
        let mut y = cp_reconstruct(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for z in y.data_mut() {
            *z += C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.1;
        }
        for mu in [0.0, 0.05] {
            let opts = AlsOptions { mu, rank_overestimate: Some(4), ..Default::default() };
            let res = if mu == 0.0 { als_fit(&y, 3, &opts).unwrap() } else { als_fit_regularized(&y, &opts).unwrap() };
            for w in res.trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn mu_zero_reduces_to_plain() {
        let f = random_factors(4, [5, 6, 4], 2);
        let y = cp_reconstruct(&f).unwrap();
        let opts = AlsOptions { rank_overestimate: Some(3), ..Default::default() };
        let a = als_fit_regularized(&y, &opts).unwrap();
        let b = als_fit(&y, 3, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.effective_rank, 3);
    }

    #[test]
    fn scaling_equivariance() {
        let f = random_factors(5, [6, 6, 5], 2);
        let y = cp_reconstruct(&f).unwrap();
        let c = C64::new(-2.0, 0.7);
        let r1 = cp_reconstruct(&als_fit(&y, 2, &AlsOptions::default()).unwrap().factors).unwrap();
        let r2 = cp_reconstruct(&als_fit(&y.scale(c), 2, &AlsOptions::default()).unwrap().factors).unwrap();
        let a = r1.scale(c).unfold(1).unwrap();
        let b = r2.unfold(1).unwrap();
        assert!(rel_error(&b, &a) < 1e-10);
    }

    #[test]
    fn invalid_options_rejected() {
        let y = ComplexTensor3::zeros([2, 2, 2]).unwrap();
        assert!(als_fit(&y, 0, &AlsOptions::default()).is_err());
        assert!(als_fit(&y, 1, &AlsOptions { max_sweeps: 0, ..Default::default() }).is_err());
        assert!(als_fit_regularized(&y, &AlsOptions::default()).is_err());
    }
}
