//! Fisher information and Cramér-Rao bounds for the composite-path
//! parameters of the received tensor.
//!
//! Parameters are ordered class-major: `[zeta, xi, phi, theta, Re rho,
//! Im rho, iota]`, each block of length `U`. Every derivative of the clean
//! tensor is a rank-one term `da ∘ db ∘ dc`, so inner products between
//! derivatives factor into three short inner products.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::channel::{irs_pair_scale, steering_bs, steering_ue, CompositePath, CompositePaths, OfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, CVec, C64, J};
use crate::tensor::cp_reconstruct;
use crate::training::{true_factors, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamClass {
    IrsAz,
    IrsEl,
    Aod,
    Aoa,
    GainRe,
    GainIm,
    Delay,
}

impl ParamClass {
    pub const ALL: [ParamClass; 7] =
        [Self::IrsAz, Self::IrsEl, Self::Aod, Self::Aoa, Self::GainRe, Self::GainIm, Self::Delay];

    pub fn name(&self) -> &'static str {
        match self {
            Self::IrsAz => "irs_az",
            Self::IrsEl => "irs_el",
            Self::Aod => "aod",
            Self::Aoa => "aoa",
            Self::GainRe => "gain_re",
            Self::GainIm => "gain_im",
            Self::Delay => "delay",
        }
    }

    fn block(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).expect("listed")
    }
}

/// Index of parameter `(class, u)` in the flattened vector of `U` paths.
pub fn param_index(class: ParamClass, u: usize, paths: usize) -> usize {
    class.block() * paths + u
}

/// Flattens composite paths in the fixed class-major order.
pub fn param_vector(cp: &CompositePaths) -> Vec<f64> {
    let u = cp.len();
    let mut p = vec![0.0; 7 * u];
    for (k, path) in cp.paths.iter().enumerate() {
        let vals = [path.irs_az, path.irs_el, path.aod, path.aoa, path.gain.re, path.gain.im, path.delay];
        for (c, v) in vals.into_iter().enumerate() {
            p[c * u + k] = v;
        }
    }
    p
}

/// Inverse of [`param_vector`].
pub fn from_param_vector(p: &[f64]) -> Result<CompositePaths> {
    if p.len() % 7 != 0 {
        return Err(Error::Dimension(format!("parameter vector length {} is not a multiple of 7", p.len())));
    }
    let u = p.len() / 7;
    let g = |c: usize, k: usize| p[c * u + k];
    let paths = (0..u)
        .map(|k| CompositePath {
            irs_az: g(0, k),
            irs_el: g(1, k),
            aod: g(2, k),
            aoa: g(3, k),
            gain: C64::new(g(4, k), g(5, k)),
            delay: g(6, k),
        })
        .collect();
    Ok(CompositePaths { paths })
}

#[derive(Debug, Clone)]
pub struct FimResult {
    /// Real symmetric `7U x 7U` information matrix.
    pub fim: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl FimResult {
    fn new(fim: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(fim.clone()).eigenvalues;
        let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max_eigenvalue = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { fim, min_eigenvalue, max_eigenvalue }
    }

    pub fn paths(&self) -> usize {
        self.fim.nrows() / 7
    }
}

fn ula_derivative(angle: f64, n: usize) -> CVec {
    let s = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| J * i as f64 * crate::linalg::cis(i as f64 * angle) * s)
}

fn ula(angle: f64, n: usize) -> CVec {
    let s = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| crate::linalg::cis(i as f64 * angle) * s)
}

/// Rank-one factors `(a, b, c)` of every parameter derivative.
fn derivative_factors(cp: &CompositePaths, tc: &TrainingConfig, ofdm: &OfdmConfig) -> Vec<[CVec; 3]> {
    let geom = &tc.geom;
    let u = cp.len();
    let scale = irs_pair_scale(geom);
    let vt = tc.v.transpose();
    let mut out = vec![[CVec::zeros(0), CVec::zeros(0), CVec::zeros(0)]; 7 * u];
    for (k, path) in cp.paths.iter().enumerate() {
        let a = tc.irs_response(path.irs_az, path.irs_el);
        let a_bs_conj = steering_bs(path.aod, geom.nt()).expect("validated").conjugate();
        let a_ue = steering_ue(path.aoa, geom.nr()).expect("validated");
        let jr = tc.joint_response_from(&a_bs_conj, &a_ue);
        let gs = path.gain * scale;
        let b = &jr * gs;
        let c = ofdm.delay_response(path.delay);

        let da_az = &vt * kron_vec(&ula_derivative(path.irs_az, geom.my()), &ula(path.irs_el, geom.mz()));
        let da_el = &vt * kron_vec(&ula(path.irs_az, geom.my()), &ula_derivative(path.irs_el, geom.mz()));
        let db_aod = tc.joint_response_from(&ula_derivative(path.aod, geom.nt()).conjugate(), &a_ue) * gs;
        let db_aoa = tc.joint_response_from(&a_bs_conj, &ula_derivative(path.aoa, geom.nr())) * gs;
        let db_re = &jr * C64::from(scale);
        let db_im = &jr * (J * scale);
        let w = 2.0 * PI * ofdm.fs() / ofdm.p0() as f64;
        let dc = CVec::from_fn(ofdm.p(), |i, _| -J * w * (i + 1) as f64 * c[i]);

        let set = |out: &mut Vec<[CVec; 3]>, class: ParamClass, f: [CVec; 3]| out[param_index(class, k, u)] = f;
        set(&mut out, ParamClass::IrsAz, [da_az, b.clone(), c.clone()]);
        set(&mut out, ParamClass::IrsEl, [da_el, b.clone(), c.clone()]);
        set(&mut out, ParamClass::Aod, [a.clone(), db_aod, c.clone()]);
        set(&mut out, ParamClass::Aoa, [a.clone(), db_aoa, c.clone()]);
        set(&mut out, ParamClass::GainRe, [a.clone(), db_re, c.clone()]);
        set(&mut out, ParamClass::GainIm, [a.clone(), db_im, c.clone()]);
        set(&mut out, ParamClass::Delay, [a, b, dc]);
    }
    out
}

/// Closed-form FIM: `2/sigma^2 Re{(da_k^H da_l)(db_k^H db_l)(dc_k^H dc_l)}`.
pub fn fim_analytic(cp: &CompositePaths, tc: &TrainingConfig, ofdm: &OfdmConfig, sigma2: f64) -> Result<FimResult> {
    check(cp, sigma2)?;
    let d = derivative_factors(cp, tc, ofdm);
    let n = d.len();
    let mut fim = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let v = d[k][0].dotc(&d[l][0]) * d[k][1].dotc(&d[l][1]) * d[k][2].dotc(&d[l][2]);
            let e = 2.0 / sigma2 * v.re;
            fim[(k, l)] = e;
            fim[(l, k)] = e;
        }
    }
    Ok(FimResult::new(fim))
}

fn check(cp: &CompositePaths, sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")));
    }
    if cp.is_empty() {
        return Err(Error::InvalidParameter("no composite paths".into()));
    }
    Ok(())
}

/// Central-difference FIM `2/sigma^2 Re{J^H J}` of the vectorized clean
/// tensor. Angle and gain steps are `step`; delay steps are `step` times
/// the delay that turns the first tone by one radian.
pub fn fim_numeric(cp: &CompositePaths, tc: &TrainingConfig, ofdm: &OfdmConfig, sigma2: f64, step: f64) -> Result<FimResult> {
    check(cp, sigma2)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let p0 = param_vector(cp);
    let u = cp.len();
    let delay_unit = ofdm.p0() as f64 / (2.0 * PI * ofdm.fs());
    let eval = |p: &[f64]| -> Result<Vec<C64>> {
        let cp = from_param_vector(p)?;
        Ok(cp_reconstruct(&true_factors(&cp, tc, ofdm)?)?.data().to_vec())
    };
    let mut jac: Vec<Vec<C64>> = Vec::with_capacity(p0.len());
    for k in 0..p0.len() {
        let h = if k >= param_index(ParamClass::Delay, 0, u) { step * delay_unit } else { step };
        let mut plus = p0.clone();
        let mut minus = p0.clone();
        plus[k] += h;
        minus[k] -= h;
        let (yp, ym) = (eval(&plus)?, eval(&minus)?);
        jac.push(yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let n = jac.len();
    let mut fim = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let v: C64 = jac[k].iter().zip(&jac[l]).map(|(a, b)| a.conj() * b).sum();
            let e = 2.0 / sigma2 * v.re;
            fim[(k, l)] = e;
            fim[(l, k)] = e;
        }
    }
    Ok(FimResult::new(fim))
}

#[derive(Debug, Clone)]
pub struct CrbReport {
    /// Bound per parameter, same order as the parameter vector.
    pub values: Vec<f64>,
    /// Parameters touching the numerical null space of the FIM.
    pub flagged: Vec<bool>,
    /// Condition number of the diagonally scaled FIM.
    pub condition: f64,
}

impl CrbReport {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

const RCOND: f64 = 1e-12;

/// Diagonal of the FIM pseudo-inverse. The FIM is scaled to unit diagonal
/// first because delay entries are many orders larger than angle entries.
pub fn crb_diag(fim: &FimResult) -> CrbReport {
    let n = fim.fim.nrows();
    let d: Vec<f64> = (0..n).map(|k| fim.fim[(k, k)]).collect();
    let s: Vec<f64> = d.iter().map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| fim.fim[(i, j)] * s[i] * s[j]);
    let eig = SymmetricEigen::new(scaled);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = RCOND * lmax;
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let mut values = vec![0.0; n];
    let mut flagged = vec![false; n];
    for k in 0..n {
        let (mut inv, mut null) = (0.0, 0.0);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            let q = eig.eigenvectors[(k, i)];
            if l > cut {
                inv += q * q / l;
            } else {
                null += q * q;
            }
        }
        values[k] = inv * s[k] * s[k];
        flagged[k] = d[k] <= 0.0 || null > 1e-6;
    }
    if flagged.iter().any(|&f| f) {
        log::warn!("FIM is singular along some parameters (scaled condition {condition:.2e}); pseudo-inverse used");
    }
    CrbReport { values, flagged, condition }
}

/// Reporting classes: four angles, gain (`|Δrho|^2`, i.e. real plus
/// imaginary bounds) and delay.
pub const REPORT_CLASSES: [&str; 6] = ["irs_az", "irs_el", "aod", "aoa", "gain", "delay"];

/// Per-path bound averaged over paths for each reporting class.
pub fn class_means(report: &CrbReport) -> [f64; 6] {
    let u = report.values.len() / 7;
    let mean = |c: ParamClass| (0..u).map(|k| report.values[param_index(c, k, u)]).sum::<f64>() / u as f64;
    [
        mean(ParamClass::IrsAz),
        mean(ParamClass::IrsEl),
        mean(ParamClass::Aod),
        mean(ParamClass::Aoa),
        mean(ParamClass::GainRe) + mean(ParamClass::GainIm),
        mean(ParamClass::Delay),
    ]
}

/// Relative Frobenius distance between two information matrices.
pub fn fim_rel_error(a: &FimResult, b: &FimResult) -> f64 {
    (&a.fim - &b.fim).norm() / b.fim.norm()
}
