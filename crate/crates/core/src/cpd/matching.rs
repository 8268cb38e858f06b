use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::tensor::FactorTriple;

/// Alignment of estimated components to ground-truth components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatch {
    /// `perm[t]` is the estimated component assigned to truth component `t`.
    pub perm: Vec<usize>,
    /// Optimal complex scale per truth component and mode, mapping the
    /// estimated column onto the true one.
    pub scales: Vec<[C64; 3]>,
    /// Product of the three absolute cosine similarities per truth component.
    pub scores: Vec<f64>,
    /// `sqrt(sum ||s x_est - x_true||^2 / sum ||x_true||^2)` over all modes.
    pub residual: f64,
}

fn abs_cos(x: nalgebra::DVectorView<'_, C64>, y: nalgebra::DVectorView<'_, C64>) -> f64 {
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    x.dotc(&y).norm() / (nx * ny)
}

fn col(m: &CMat, j: usize) -> nalgebra::DVectorView<'_, C64> {
    m.column(j).into()
}

/// Finds the assignment maximizing the summed product of per-mode absolute
/// cosine similarities.
pub fn match_components(est: &FactorTriple, truth: &FactorTriple) -> Result<ComponentMatch> {
    if est.dims() != truth.dims() {
        return Err(Error::Dimension(format!("factor dims {:?} vs {:?}", est.dims(), truth.dims())));
    }
    let (ne, nt) = (est.rank(), truth.rank());
    if ne < nt {
        return Err(Error::Dimension(format!("estimate has {ne} components, truth has {nt}")));
    }
    let mats = |f: &FactorTriple| [f.a.clone(), f.b.clone(), f.c.clone()];
    let (em, tm) = (mats(est), mats(truth));
    let score: Vec<Vec<f64>> = (0..nt)
        .map(|t| (0..ne).map(|e| (0..3).map(|k| abs_cos(col(&em[k], e), col(&tm[k], t))).product()).collect())
        .collect();
    let perm = assign_max(&score);

    let mut scales = Vec::with_capacity(nt);
    let mut scores = Vec::with_capacity(nt);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, &e) in perm.iter().enumerate() {
        let mut s3 = [C64::from(0.0); 3];
        for k in 0..3 {
            let x = col(&em[k], e);
            let y = col(&tm[k], t);
            let nx = x.norm_squared();
            let s = if nx > 0.0 { x.dotc(&y) / nx } else { C64::from(0.0) };
            num += (x * s - y).norm_squared();
            den += y.norm_squared();
            s3[k] = s;
        }
        scales.push(s3);
        scores.push(score[t][e]);
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(ComponentMatch { perm, scales, scores, residual })
}

/// Maximum-weight assignment of `n` rows to distinct columns of an `n x m`
/// score matrix (`n <= m`), via the Hungarian algorithm. Returns the column
/// chosen for each row.
pub fn assign_max(score: &[Vec<f64>]) -> Vec<usize> {
    let n = score.len();
    if n == 0 {
        return Vec::new();
    }
    let m = score[0].len();
    assert!(n <= m, "assignment needs at least as many columns as rows");
    let big = score.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cost = |i: usize, j: usize| big - score[i][j];

    // Potentials-based Hungarian method, 1-based with a virtual column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factors(seed: u64, rank: usize) -> FactorTriple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |r: usize| CMat::from_fn(r, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let a = m(6);
        let b = m(7);
        let c = m(5);
        FactorTriple::new(a, b, c).unwrap()
    }

    #[test]
    fn identity_match() {
        let f = random_factors(1, 4);
        let mm = match_components(&f, &f).unwrap();
        assert_eq!(mm.perm, vec![0, 1, 2, 3]);
        assert!(mm.residual < 1e-14);
    }

    #[test]
    fn recovers_known_permutation_and_scaling() {
        let truth = random_factors(2, 5);
        let pi = [3usize, 0, 4, 1, 2];
        // est column pi[t] holds a scaled copy of truth column t
        let mut est = truth.clone();
        for (t, &e) in pi.iter().enumerate() {
            let s = C64::new(1.0 + t as f64, -0.5);
            est.a.set_column(e, &(truth.a.column(t) * s));
            est.b.set_column(e, &(truth.b.column(t) / s));
            est.c.set_column(e, &(truth.c.column(t) * C64::new(0.0, 2.0)));
        }
        let mm = match_components(&est, &truth).unwrap();
        assert_eq!(mm.perm, pi.to_vec());
        assert!(mm.residual < 1e-12);
    }

    #[test]
    fn single_component() {
        let f = random_factors(3, 1);
        let mm = match_components(&f, &f).unwrap();
        assert_eq!(mm.perm, vec![0]);
    }

    #[test]
    fn rejects_too_few_estimates() {
        let a = random_factors(4, 2);
        let b = random_factors(4, 3);
        assert!(match_components(&a, &b).is_err());
    }

    fn brute_force(score: &[Vec<f64>]) -> f64 {
        fn go(score: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == score.len() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for j in 0..score[0].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(score[row][j] + go(score, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(score, 0, &mut vec![false; score[0].len()])
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(n in 1usize..5, extra in 0usize..3, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = n + extra;
            let score: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
            let a = assign_max(&score);
            let mut seen = a.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
            let total: f64 = a.iter().enumerate().map(|(i, &j)| score[i][j]).sum();
            prop_assert!((total - brute_force(&score)).abs() < 1e-12);
        }
    }
}
