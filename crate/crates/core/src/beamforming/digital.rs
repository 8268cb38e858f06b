//! Fully digital precoding, power allocation and spectral efficiency.

use super::PowerMode;
use crate::error::{Error, Result};
use crate::linalg::{pinv, svd, CMat, C64};

/// Optimal power split `rho_i = max(mu - sigma2 / s_i^2, 0)` with
/// `sum rho_i = rho`, computed exactly from the sorted noise levels.
pub fn water_filling(singular: &[f64], rho: f64, sigma2: f64, ns: usize) -> Result<Vec<f64>> {
    if !(rho > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("water-filling needs rho > 0 and sigma2 > 0".into()));
    }
    let n = ns.min(singular.len());
    let levels: Vec<f64> = singular[..n].iter().map(|&s| if s > 0.0 { sigma2 / (s * s) } else { f64::INFINITY }).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut out = vec![0.0; ns];
    if n == 0 || !levels[order[0]].is_finite() {
        return Ok(out);
    }
    // grow the active set while the water level stays above the next floor
    let mut active = 1;
    let mut sum = levels[order[0]];
    while active < n {
        let next = levels[order[active]];
        let mu = (rho + sum) / active as f64;
        if !next.is_finite() || mu <= next {
            break;
        }
        sum += next;
        active += 1;
    }
    let mu = (rho + sum) / active as f64;
    for &i in &order[..active] {
        out[i] = (mu - levels[i]).max(0.0);
    }
    Ok(out)
}

/// Rank-`Ns` SVD precoder/combiner for one subcarrier.
/// Returns `(F, W)` with `F` `Nt x Ns` and `W` `Nr x Ns`.
pub fn digital_precoders(h: &CMat, ns: usize, rho: f64, sigma2: f64, mode: PowerMode) -> Result<(CMat, CMat)> {
    if ns == 0 {
        return Err(Error::InvalidParameter("need at least one stream".into()));
    }
    let d = svd(h);
    if d.s.len() < ns {
        return Err(Error::Dimension(format!("channel {:?} cannot carry {ns} streams", h.shape())));
    }
    let rank = d.rank(1e-10);
    if rank < ns {
        log::warn!("channel rank {rank} is below the requested {ns} streams");
    }
    let w = d.u_leading(ns);
    let v1 = d.v_leading(ns);
    let powers = match mode {
        PowerMode::WaterFilling => water_filling(&d.s[..ns], rho, sigma2, ns)?,
        PowerMode::Equal => vec![rho / ns as f64; ns],
    };
    let mut f = v1;
    for (i, p) in powers.iter().enumerate() {
        f.column_mut(i).scale_mut(p.sqrt());
    }
    Ok((f, w))
}

/// `(1/P) sum_p log2 det(I + W_p^+ H_p F_p F_p^H H_p^H W_p / sigma2)`.
pub fn spectral_efficiency(channels: &[CMat], precoders: &[CMat], combiners: &[CMat], sigma2: f64) -> Result<f64> {
    if channels.is_empty() || channels.len() != precoders.len() || channels.len() != combiners.len() {
        return Err(Error::Dimension("need one precoder and combiner per channel".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    let mut total = 0.0;
    for ((h, f), w) in channels.iter().zip(precoders).zip(combiners) {
        if h.ncols() != f.nrows() || h.nrows() != w.nrows() {
            return Err(Error::Dimension(format!("H {:?}, F {:?}, W {:?}", h.shape(), f.shape(), w.shape())));
        }
        let gram = w.adjoint() * w;
        let gs = svd(&gram);
        if gs.rank(1e-12) < gram.nrows() {
            log::warn!("combiner Gram matrix is singular; using a truncated pseudo-inverse");
        }
        let w_pinv = pinv(w, 1e-12);
        let hf = h * f;
        let x = &w_pinv * &hf * hf.adjoint() * w * C64::from(1.0 / sigma2);
        let n = x.nrows();
        let det = (CMat::identity(n, n) + x).determinant();
        total += det.norm().log2();
    }
    Ok(total / channels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rnd(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn water_filling_examples() {
        let p = water_filling(&[1.5, 1.5, 1.5], 3.0, 0.7, 3).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let p = water_filling(&[3.0, 1.2, 0.4], 2.5, 1.0, 3).unwrap();
        assert!((p.iter().sum::<f64>() - 2.5).abs() < 1e-12);
        // KKT by hand: levels 1/4 and 1; with rho = 0.1 the level 0.35 < 1
        let p = water_filling(&[2.0, 1.0], 0.1, 1.0, 2).unwrap();
        assert!((p[0] - 0.1).abs() < 1e-15 && p[1] == 0.0);
        // both active: mu = (1 + 0.25 + 1) / 2 = 1.125
        let p = water_filling(&[2.0, 1.0], 1.0, 1.0, 2).unwrap();
        assert!((p[0] - 0.875).abs() < 1e-12 && (p[1] - 0.125).abs() < 1e-12);
        assert!(water_filling(&[1.0], 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn equal_mode_uses_full_budget() {
        let h = CMat::identity(4, 4);
        let (f, w) = digital_precoders(&h, 2, 3.0, 1.0, PowerMode::Equal).unwrap();
        assert!((f.norm_squared() - 3.0).abs() < 1e-12);
        assert_eq!(w.shape(), (4, 2));
    }

    #[test]
    fn low_power_water_filling_uses_strong_stream() {
        let mut h = CMat::zeros(2, 2);
        h[(0, 0)] = C64::from(2.0);
        h[(1, 1)] = C64::from(1.0);
        let (f, _) = digital_precoders(&h, 2, 0.1, 1.0, PowerMode::WaterFilling).unwrap();
        assert!((f.column(0).norm_squared() - 0.1).abs() < 1e-12);
        assert!(f.column(1).norm_squared() < 1e-15);
    }

    #[test]
    fn se_of_zero_channel_is_zero() {
        let h = vec![CMat::zeros(3, 4)];
        let f = vec![CMat::from_element(4, 1, C64::from(0.5))];
        let w = vec![CMat::from_element(3, 1, C64::from(1.0))];
        assert_eq!(spectral_efficiency(&h, &f, &w, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_capacity() {
        let hval = C64::new(0.6, -0.8) * 1.7;
        let h = vec![CMat::from_element(1, 1, hval)];
        let (f, w) = digital_precoders(&h[0], 1, 2.0, 0.5, PowerMode::Equal).unwrap();
        let se = spectral_efficiency(&h, &[f], &[w], 0.5).unwrap();
        let expect = (1.0 + 2.0 * hval.norm_sqr() / 0.5).log2();
        assert!((se - expect).abs() < 1e-12);
    }

    #[test]
    fn se_matches_eigenvalue_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = rnd(&mut rng, 5, 6);
        let f = rnd(&mut rng, 6, 3);
        let w = rnd(&mut rng, 5, 3);
        let se = spectral_efficiency(&[h.clone()], &[f.clone()], &[w.clone()], 0.3).unwrap();
        // det(I + W^+ X W) = det(I + P_W X P_W) with P_W the projector onto range(W)
        let pw = &w * pinv(&w, 1e-12);
        let x = &h * &f * f.adjoint() * h.adjoint() / C64::from(0.3);
        let m = &pw * x * &pw;
        let herm = (m.clone() + m.adjoint()) * C64::from(0.5);
        let eig = nalgebra::SymmetricEigen::new(herm.clone());
        let oracle: f64 = eig.eigenvalues.iter().map(|&l| (1.0 + l.max(0.0)).log2()).sum();
        assert!((se - oracle).abs() < 1e-10, "{se} vs {oracle}");
    }

    #[test]
    fn se_equals_stream_sum_for_svd_precoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = rnd(&mut rng, 4, 6);
        let (f, w) = digital_precoders(&h, 2, 1.5, 0.2, PowerMode::WaterFilling).unwrap();
        let s = svd(&h).s;
        let p = water_filling(&s[..2], 1.5, 0.2, 2).unwrap();
        let oracle: f64 = (0..2).map(|i| (1.0 + p[i] * s[i] * s[i] / 0.2).log2()).sum();
        let se = spectral_efficiency(&[h], &[f], &[w], 0.2).unwrap();
        assert!((se - oracle).abs() < 1e-10);
    }

    #[test]
    fn water_filling_beats_equal_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = rnd(&mut rng, 4, 4);
            let (fw, ww) = digital_precoders(&h, 3, 1.0, 0.5, PowerMode::WaterFilling).unwrap();
            let (fe, we) = digital_precoders(&h, 3, 1.0, 0.5, PowerMode::Equal).unwrap();
            let a = spectral_efficiency(&[h.clone()], &[fw], &[ww], 0.5).unwrap();
            let b = spectral_efficiency(&[h.clone()], &[fe], &[we], 0.5).unwrap();
            assert!(a >= b - 1e-9);
        }
    }
}
