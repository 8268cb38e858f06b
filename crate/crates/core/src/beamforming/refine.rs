//! Ascent of the RIS phases on the spectral efficiency itself.
//!
//! For fixed `v` the best rank-`Ns` precoders give
//! `g(v) = (1/P) sum_p sum_i log2(1 + rho_i s_{i,p}(v)^2 / sigma2)`, with
//! `s_{i,p}` the leading singular values of the effective channel. With the
//! allocations held at their optimum, `d(s_i^2)/d conj(H) = s_i u_i v_i^H`.

use super::manifold::{ascend, AscentResult};
use super::{digital::water_filling, BeamformingConfig, PowerMode};
use crate::channel::{irs_pair_scale, steering_bs, steering_irs, steering_ue, ArrayGeometry, CompositePaths, OfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::{svd, CMat, CVec, C64};

pub(crate) struct SeObjective {
    /// Per path: RIS steering, user steering, BS steering.
    atoms: Vec<(CVec, CVec, CVec)>,
    /// `coef[p][u] = rho_u e^{-j 2 pi fs iota_u (p+1) / P0} / sqrt(M)`.
    coef: Vec<Vec<C64>>,
    ns: usize,
    rho: f64,
    sigma2: f64,
    power: PowerMode,
    nr: usize,
    nt: usize,
}

impl SeObjective {
    pub(crate) fn new(cp: &CompositePaths, geom: &ArrayGeometry, ofdm: &OfdmConfig, ns: usize, rho: f64, sigma2: f64, power: PowerMode) -> Result<Self> {
        let mut atoms = Vec::with_capacity(cp.len());
        for p in &cp.paths {
            atoms.push((steering_irs(p.irs_az, p.irs_el, geom), steering_ue(p.aoa, geom.nr())?, steering_bs(p.aod, geom.nt())?));
        }
        let scale = irs_pair_scale(geom);
        let coef = (1..=ofdm.p())
            .map(|k| cp.paths.iter().map(|p| p.gain * ofdm.tone_phase(p.delay, k) * scale).collect())
            .collect();
        if ns > geom.nr().min(geom.nt()) {
            return Err(Error::InvalidParameter(format!("{ns} streams exceed the array sizes")));
        }
        Ok(Self { atoms, coef, ns, rho, sigma2, power, nr: geom.nr(), nt: geom.nt() })
    }

    fn channels(&self, v: &CVec) -> Vec<CMat> {
        let d: Vec<C64> = self.atoms.iter().map(|(a, _, _)| v.dotc(a)).collect();
        self.coef
            .iter()
            .map(|cs| {
                let mut h = CMat::zeros(self.nr, self.nt);
                for ((c, du), (_, ue, bs)) in cs.iter().zip(&d).zip(&self.atoms) {
                    h += ue * bs.adjoint() * (c * du);
                }
                h
            })
            .collect()
    }

    fn powers(&self, s: &[f64]) -> Vec<f64> {
        match self.power {
            PowerMode::WaterFilling => water_filling(s, self.rho, self.sigma2, self.ns).expect("validated rho, sigma2"),
            PowerMode::Equal => vec![self.rho / self.ns as f64; self.ns],
        }
    }

    pub(crate) fn value(&self, v: &CVec) -> f64 {
        let hs = self.channels(v);
        let mut total = 0.0;
        for h in &hs {
            let d = svd(h);
            let s = &d.s[..self.ns];
            for (pw, si) in self.powers(s).iter().zip(s) {
                total += (1.0 + pw * si * si / self.sigma2).log2();
            }
        }
        total / hs.len() as f64
    }

    /// `2 dg/d conj(v)`.
    pub(crate) fn gradient(&self, v: &CVec) -> CVec {
        let hs = self.channels(v);
        let np = hs.len() as f64;
        let mut g = CVec::zeros(v.len());
        for (h, cs) in hs.iter().zip(&self.coef) {
            let d = svd(h);
            let s = &d.s[..self.ns];
            let pw = self.powers(s);
            // dg/d conj(H) = sum_i c_i s_i u_i v_i^H
            let mut gh = CMat::zeros(self.nr, self.nt);
            for i in 0..self.ns {
                let c = pw[i] / (self.sigma2 * std::f64::consts::LN_2 * (1.0 + pw[i] * s[i] * s[i] / self.sigma2)) / np;
                gh += d.u.column(i) * d.v.column(i).adjoint() * C64::from(c * s[i]);
            }
            // H depends on conj(v) only, through d_u = v^H a_u
            for (c, (a, ue, bs)) in cs.iter().zip(&self.atoms) {
                let w = (ue.adjoint() * &gh * bs)[0].conj() * c;
                g += a * (w * 2.0);
            }
        }
        g
    }
}

/// Locally maximizes `g(v)` starting from `v0`.
/// `ns` may be below `cfg.ns` when fewer separable paths exist.
pub fn refine_spectral_efficiency(
    cp: &CompositePaths,
    v0: &CVec,
    geom: &ArrayGeometry,
    ofdm: &OfdmConfig,
    ns: usize,
    cfg: &BeamformingConfig,
) -> Result<(CVec, AscentResult)> {
    let obj = SeObjective::new(cp, geom, ofdm, ns, cfg.rho, cfg.sigma2, cfg.power)?;
    let opts = &cfg.manifold;
    let m = v0.len();
    let col = |x: &CMat| x.column(0).into_owned();
    let x0 = CMat::from_column_slice(m, 1, v0.as_slice());
    let res = ascend(&x0, |x| obj.value(&col(x)), |x| CMat::from_column_slice(m, 1, obj.gradient(&col(x)).as_slice()), opts);
    Ok((col(&res.x), res))
}
