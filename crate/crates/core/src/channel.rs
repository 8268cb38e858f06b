//! Geometric wideband mmWave channel model for the BS-RIS-user link.
//!
//! Spatial angles are stored as phase-progression arguments (radians per
//! element), not physical angles; [`spatial_frequency`] converts a physical
//! angle for a given element spacing.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, kron_vec, wrap_angle, CMat, CVec, C64};
use crate::tensor::khatri_rao;

/// BS/user ULA sizes and RIS UPA grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeometryFields", into = "GeometryFields")]
pub struct ArrayGeometry {
    nt: usize,
    nr: usize,
    my: usize,
    mz: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFields {
    nt: usize,
    nr: usize,
    my: usize,
    mz: usize,
}

impl TryFrom<GeometryFields> for ArrayGeometry {
    type Error = Error;
    fn try_from(g: GeometryFields) -> Result<Self> {
        ArrayGeometry::new(g.nt, g.nr, g.my, g.mz)
    }
}

impl From<ArrayGeometry> for GeometryFields {
    fn from(g: ArrayGeometry) -> Self {
        GeometryFields { nt: g.nt, nr: g.nr, my: g.my, mz: g.mz }
    }
}

impl ArrayGeometry {
    pub fn new(nt: usize, nr: usize, my: usize, mz: usize) -> Result<Self> {
        if nt == 0 || nr == 0 || my == 0 || mz == 0 {
            return Err(Error::InvalidParameter(format!(
                "array sizes must be positive (nt={nt}, nr={nr}, my={my}, mz={mz})"
            )));
        }
        Ok(Self { nt, nr, my, mz })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn nr(&self) -> usize {
        self.nr
    }
    pub fn my(&self) -> usize {
        self.my
    }
    pub fn mz(&self) -> usize {
        self.mz
    }
    /// Number of RIS elements `M = My * Mz`.
    pub fn m(&self) -> usize {
        self.my * self.mz
    }
}

/// OFDM numerology: `p0` tones in total, subcarriers `1..=p` used for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OfdmFields", into = "OfdmFields")]
pub struct OfdmConfig {
    p0: usize,
    p: usize,
    fs: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfdmFields {
    p0: usize,
    p: usize,
    fs: f64,
}

impl TryFrom<OfdmFields> for OfdmConfig {
    type Error = Error;
    fn try_from(o: OfdmFields) -> Result<Self> {
        OfdmConfig::new(o.p0, o.p, o.fs)
    }
}

impl From<OfdmConfig> for OfdmFields {
    fn from(o: OfdmConfig) -> Self {
        OfdmFields { p0: o.p0, p: o.p, fs: o.fs }
    }
}

impl OfdmConfig {
    pub fn new(p0: usize, p: usize, fs: f64) -> Result<Self> {
        if p == 0 || p > p0 || !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= P <= P0 and fs > 0 (P0={p0}, P={p}, fs={fs})"
            )));
        }
        Ok(Self { p0, p, fs })
    }

    pub fn p0(&self) -> usize {
        self.p0
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Aliasing period of the delay generator, `P0 / fs` seconds.
    pub fn delay_period(&self) -> f64 {
        self.p0 as f64 / self.fs
    }

    /// Same numerology with a different number of training subcarriers.
    pub fn with_training_subcarriers(&self, p: usize) -> Result<Self> {
        Self::new(self.p0, p, self.fs)
    }

    /// `e^{-j 2 pi fs delay p / P0}` for subcarrier `p` (1-based).
    pub fn tone_phase(&self, delay: f64, p: usize) -> C64 {
        cis(-2.0 * PI * self.fs * delay * p as f64 / self.p0 as f64)
    }

    /// Vandermonde generator `z = e^{-j 2 pi fs delay / P0}`.
    pub fn generator_root(&self, delay: f64) -> C64 {
        self.tone_phase(delay, 1)
    }

    /// Delay implied by a generator's phase, mapped into `[0, P0/fs)`.
    pub fn delay_from_root(&self, z: C64) -> f64 {
        let t = -z.arg() * self.p0 as f64 / (2.0 * PI * self.fs);
        t.rem_euclid(self.delay_period())
    }

    /// `g(delay) = [z, z^2, ..., z^P]^T`.
    pub fn delay_response(&self, delay: f64) -> CVec {
        CVec::from_fn(self.p, |i, _| self.tone_phase(delay, i + 1))
    }
}

/// One BS-to-RIS propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsRisPath {
    pub gain: C64,
    /// Spatial angle of departure at the BS.
    pub aod: f64,
    /// RIS azimuth spatial angle of arrival.
    pub aoa_az: f64,
    /// RIS elevation spatial angle of arrival.
    pub aoa_el: f64,
    /// Delay in seconds.
    pub delay: f64,
}

/// One RIS-to-user propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisUePath {
    pub gain: C64,
    /// Spatial angle of arrival at the user.
    pub aoa: f64,
    /// RIS azimuth spatial angle of departure.
    pub aod_az: f64,
    /// RIS elevation spatial angle of departure.
    pub aod_el: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub bs_ris: Vec<BsRisPath>,
    pub ris_ue: Vec<RisUePath>,
}

/// A BS-RIS path paired with a RIS-user path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositePath {
    pub gain: C64,
    pub delay: f64,
    /// Composite RIS azimuth angle, wrapped to `[-pi, pi)`.
    pub irs_az: f64,
    /// Composite RIS elevation angle, wrapped to `[-pi, pi)`.
    pub irs_el: f64,
    pub aod: f64,
    pub aoa: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositePaths {
    pub paths: Vec<CompositePath>,
}

impl CompositePaths {
    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// `2 pi d/lambda sin(angle)`: phase progression across a ULA.
pub fn spatial_frequency(spacing_over_wavelength: f64, angle: f64) -> f64 {
    2.0 * PI * spacing_over_wavelength * angle.sin()
}

fn ula(angle: f64, n: usize) -> CVec {
    let s = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| cis(i as f64 * angle) * s)
}

pub fn steering_bs(phi: f64, nt: usize) -> Result<CVec> {
    if nt == 0 {
        return Err(Error::InvalidParameter("BS array needs at least one antenna".into()));
    }
    Ok(ula(phi, nt))
}

pub fn steering_ue(theta: f64, nr: usize) -> Result<CVec> {
    if nr == 0 {
        return Err(Error::InvalidParameter("user array needs at least one antenna".into()));
    }
    Ok(ula(theta, nr))
}

/// `a_y(az) ⊗ a_z(el)`; element `(my, mz)` sits at index `my * Mz + mz`.
pub fn steering_irs(az: f64, el: f64, geom: &ArrayGeometry) -> CVec {
    kron_vec(&ula(az, geom.my), &ula(el, geom.mz))
}

/// `conj(a_BS(phi)) ⊗ a_UE(theta)`.
pub fn steering_joint(phi: f64, theta: f64, geom: &ArrayGeometry) -> CVec {
    kron_vec(&ula(phi, geom.nt).conjugate(), &ula(theta, geom.nr))
}

/// Amplitude factor relating the element-wise product of two RIS steering
/// vectors to a single steering vector at the angle difference:
/// `conj(a(t)) ∘ a(r) = a(r - t) / sqrt(M)`.
pub fn irs_pair_scale(geom: &ArrayGeometry) -> f64 {
    1.0 / (geom.m() as f64).sqrt()
}

/// Frequency-domain BS-RIS channel `G_p` (`M x Nt`) at subcarrier `p`.
pub fn freq_channel_g(ch: &ChannelRealization, geom: &ArrayGeometry, ofdm: &OfdmConfig, p: usize) -> CMat {
    let mut g = CMat::zeros(geom.m(), geom.nt);
    for path in &ch.bs_ris {
        let coef = path.gain * ofdm.tone_phase(path.delay, p);
        let a_irs = steering_irs(path.aoa_az, path.aoa_el, geom);
        let a_bs = ula(path.aod, geom.nt);
        g += (a_irs * a_bs.adjoint()) * coef;
    }
    g
}

/// Frequency-domain RIS-user channel `R_p` (`Nr x M`) at subcarrier `p`.
pub fn freq_channel_r(ch: &ChannelRealization, geom: &ArrayGeometry, ofdm: &OfdmConfig, p: usize) -> CMat {
    let mut r = CMat::zeros(geom.nr, geom.m());
    for path in &ch.ris_ue {
        let coef = path.gain * ofdm.tone_phase(path.delay, p);
        let a_ue = ula(path.aoa, geom.nr);
        let a_irs = steering_irs(path.aod_az, path.aod_el, geom);
        r += (a_ue * a_irs.adjoint()) * coef;
    }
    r
}

/// Cascade channel `H_p = G_p^T ⊙ R_p` (`Nt Nr x M`).
pub fn cascade_channel(g: &CMat, r: &CMat) -> Result<CMat> {
    if g.nrows() != r.ncols() {
        return Err(Error::Dimension(format!(
            "G has {} RIS rows but R has {} RIS columns",
            g.nrows(),
            r.ncols()
        )));
    }
    khatri_rao(&g.transpose(), r)
}

/// Effective MIMO channel `R_p Φ G_p` with `Φ = diag(v^H)`.
pub fn effective_channel_from_links(g: &CMat, r: &CMat, v: &CVec) -> Result<CMat> {
    if g.nrows() != v.len() || r.ncols() != v.len() {
        return Err(Error::Dimension("reflection vector length must equal M".into()));
    }
    let mut phi_g = g.clone();
    for (m, mut row) in phi_g.row_iter_mut().enumerate() {
        row *= v[m].conj();
    }
    Ok(r * phi_g)
}

/// 0-based composite index `u = m * L_r + n`.
#[inline]
pub fn composite_index(m: usize, n: usize, lr: usize) -> usize {
    m * lr + n
}

/// Inverse of [`composite_index`].
#[inline]
pub fn split_composite_index(u: usize, lr: usize) -> (usize, usize) {
    (u / lr, u % lr)
}

/// Pairs every BS-RIS path with every RIS-user path.
pub fn composite_map(ch: &ChannelRealization) -> CompositePaths {
    let lr = ch.ris_ue.len();
    let mut paths = Vec::with_capacity(ch.bs_ris.len() * lr);
    for (m, g) in ch.bs_ris.iter().enumerate() {
        for (n, r) in ch.ris_ue.iter().enumerate() {
            debug_assert_eq!(paths.len(), composite_index(m, n, lr));
            paths.push(CompositePath {
                gain: g.gain * r.gain,
                delay: g.delay + r.delay,
                irs_az: wrap_angle(g.aoa_az - r.aod_az),
                irs_el: wrap_angle(g.aoa_el - r.aod_el),
                aod: g.aod,
                aoa: r.aoa,
            });
        }
    }
    CompositePaths { paths }
}

/// Cascade channel assembled from composite-path parameters.
pub fn cascade_from_composite(cp: &CompositePaths, geom: &ArrayGeometry, ofdm: &OfdmConfig, p: usize) -> CMat {
    let scale = irs_pair_scale(geom);
    let mut h = CMat::zeros(geom.nt * geom.nr, geom.m());
    for path in &cp.paths {
        let coef = path.gain * ofdm.tone_phase(path.delay, p) * scale;
        let a_s = steering_joint(path.aod, path.aoa, geom);
        let a_irs = steering_irs(path.irs_az, path.irs_el, geom);
        h += (a_s * a_irs.transpose()) * coef;
    }
    h
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Draws a realization: angles uniform on `[0, 2pi)`, delays uniform on
/// `[0, delay_max]`, gains `CN(0, 1)`.
pub fn random_realization<R: Rng + ?Sized>(l: usize, lr: usize, delay_max: f64, rng: &mut R) -> Result<ChannelRealization> {
    if l == 0 || lr == 0 {
        return Err(Error::InvalidParameter("need at least one path per link".into()));
    }
    if !(delay_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("delay_max must be nonnegative, got {delay_max}")));
    }
    let two_pi = 2.0 * PI;
    let angle = |rng: &mut R| rng.random::<f64>() * two_pi;
    let bs_ris = (0..l)
        .map(|_| BsRisPath {
            gain: complex_gaussian(rng),
            aod: angle(rng),
            aoa_az: angle(rng),
            aoa_el: angle(rng),
            delay: rng.random::<f64>() * delay_max,
        })
        .collect();
    let ris_ue = (0..lr)
        .map(|_| RisUePath {
            gain: complex_gaussian(rng),
            aoa: angle(rng),
            aod_az: angle(rng),
            aod_el: angle(rng),
            delay: rng.random::<f64>() * delay_max,
        })
        .collect();
    Ok(ChannelRealization { bs_ris, ris_ue })
}

impl ChannelRealization {
    pub fn validate(&self, ofdm: &OfdmConfig) -> Result<()> {
        if self.bs_ris.is_empty() || self.ris_ue.is_empty() {
            return Err(Error::InvalidParameter("need at least one path per link".into()));
        }
        let period = ofdm.delay_period();
        let delays = self.bs_ris.iter().map(|p| p.delay).chain(self.ris_ue.iter().map(|p| p.delay));
        for d in delays {
            if !(0.0..period).contains(&d) {
                return Err(Error::InvalidParameter(format!(
                    "delay {d:e} s outside [0, {period:e})"
                )));
            }
        }
        Ok(())
    }

    /// One path per line: `G|R gain_re gain_im angle angle_az angle_el delay`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# link gain_re gain_im angle angle_az angle_el delay_s\n");
        for p in &self.bs_ris {
            let _ = writeln!(s, "G {} {} {} {} {} {}", p.gain.re, p.gain.im, p.aod, p.aoa_az, p.aoa_el, p.delay);
        }
        for p in &self.ris_ue {
            let _ = writeln!(s, "R {} {} {} {} {} {}", p.gain.re, p.gain.im, p.aoa, p.aod_az, p.aod_el, p.delay);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut bs_ris = Vec::new();
        let mut ris_ue = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, vals) = parse_path_line(line, no + 1)?;
            let gain = C64::new(vals[0], vals[1]);
            match tag {
                "G" => bs_ris.push(BsRisPath { gain, aod: vals[2], aoa_az: vals[3], aoa_el: vals[4], delay: vals[5] }),
                "R" => ris_ue.push(RisUePath { gain, aoa: vals[2], aod_az: vals[3], aod_el: vals[4], delay: vals[5] }),
                _ => unreachable!(),
            }
        }
        Ok(Self { bs_ris, ris_ue })
    }
}

pub(crate) fn parse_path_line(line: &str, no: usize) -> Result<(&str, [f64; 6])> {
    let mut it = line.split_whitespace();
    let tag = it.next().unwrap_or_default();
    if tag != "G" && tag != "R" {
        return Err(Error::Parse { line: no, msg: format!("unknown link tag {tag:?}") });
    }
    let mut vals = [0.0; 6];
    for v in vals.iter_mut() {
        let tok = it.next().ok_or_else(|| Error::Parse { line: no, msg: "expected 6 numeric fields".into() })?;
        *v = tok
            .parse()
            .map_err(|_| Error::Parse { line: no, msg: format!("bad number {tok:?}") })?;
    }
    if it.next().is_some() {
        return Err(Error::Parse { line: no, msg: "trailing fields".into() });
    }
    Ok((tag, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_error, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::new(4, 3, 4, 2).unwrap()
    }

    fn ofdm() -> OfdmConfig {
        OfdmConfig::new(128, 8, 0.32e9).unwrap()
    }

    #[test]
    fn steering_bs_examples() {
        let a = steering_bs(0.0, 4).unwrap();
        assert!(a.iter().all(|&z| (z - C64::from(0.5)).norm() < 1e-15));
        let a = steering_bs(PI, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - C64::from(s)).norm() < 1e-15);
        assert!((a[1] - C64::from(-s)).norm() < 1e-15);
        assert!(steering_bs(0.1, 0).is_err());
        for phi in [-2.0, 0.3, 5.0] {
            assert!((steering_bs(phi, 7).unwrap().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn steering_ue_examples() {
        let a = steering_ue(0.0, 5).unwrap();
        let s = 1.0 / 5f64.sqrt();
        assert!(a.iter().all(|&z| (z - C64::from(s)).norm() < 1e-15));
        let b = steering_ue(2.0 * PI, 5).unwrap();
        assert!((a - b).norm() < 1e-14);
        assert!((steering_ue(1.234, 9).unwrap().norm() - 1.0).abs() < 1e-14);
        assert!(steering_ue(0.0, 0).is_err());
    }

    #[test]
    fn steering_irs_examples() {
        let g = geom();
        let a = steering_irs(0.0, 0.0, &g);
        let s = 1.0 / (g.m() as f64).sqrt();
        assert!(a.iter().all(|&z| (z - C64::from(s)).norm() < 1e-15));

        let g2 = ArrayGeometry::new(1, 1, 2, 1).unwrap();
        let a = steering_irs(PI, 0.0, &g2);
        assert!((a[0] - C64::from(1.0 / 2f64.sqrt())).norm() < 1e-15);
        assert!((a[1] + C64::from(1.0 / 2f64.sqrt())).norm() < 1e-15);

        // index-map oracle
        let (az, el) = (0.77, -2.1);
        let a = steering_irs(az, el, &g);
        for my in 0..g.my() {
            for mz in 0..g.mz() {
                let expect = cis(my as f64 * az + mz as f64 * el) * s;
                assert!((a[my * g.mz() + mz] - expect).norm() < 1e-14);
            }
        }
        assert!((a.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn geometry_and_ofdm_validation() {
        assert!(ArrayGeometry::new(0, 1, 1, 1).is_err());
        assert!(OfdmConfig::new(8, 9, 1.0).is_err());
        assert!(OfdmConfig::new(8, 0, 1.0).is_err());
        assert!(OfdmConfig::new(8, 8, 0.0).is_err());
    }

    #[test]
    fn pair_product_is_steering_at_difference() {
        let g = ArrayGeometry::new(2, 2, 5, 3).unwrap();
        let (vr, cr, vt, ct) = (1.1, -0.4, 2.9, 0.7);
        let prod = steering_irs(vt, ct, &g).conjugate().component_mul(&steering_irs(vr, cr, &g));
        let diff = steering_irs(vr - vt, cr - ct, &g) * C64::from(irs_pair_scale(&g));
        assert!((prod - diff).norm() < 1e-14);
    }

    fn single_path(delay: f64, gain: C64) -> ChannelRealization {
        ChannelRealization {
            bs_ris: vec![BsRisPath { gain, aod: 0.4, aoa_az: 1.0, aoa_el: -0.5, delay }],
            ris_ue: vec![RisUePath { gain, aoa: 2.0, aod_az: 0.2, aod_el: 0.1, delay }],
        }
    }

    #[test]
    fn freq_channel_single_path() {
        let (g, o) = (geom(), ofdm());
        let ch = single_path(0.0, ONE);
        let gp = freq_channel_g(&ch, &g, &o, 3);
        assert!((gp.norm() - 1.0).abs() < 1e-14);
        assert_eq!(crate::linalg::svd(&gp).rank(1e-10), 1);
        let rp = freq_channel_r(&ch, &g, &o, 3);
        assert!((rp.norm() - 1.0).abs() < 1e-14);

        let z = single_path(0.0, C64::from(0.0));
        assert_eq!(freq_channel_g(&z, &g, &o, 1).norm(), 0.0);
        assert_eq!(freq_channel_r(&z, &g, &o, 1).norm(), 0.0);
    }

    #[test]
    fn freq_channel_rotates_with_subcarrier() {
        let (g, o) = (geom(), ofdm());
        let c = 0.37;
        let delay = o.p0() as f64 / (2.0 * PI * o.fs()) * c;
        let ch = single_path(delay, ONE);
        let base_g = freq_channel_g(&single_path(0.0, ONE), &g, &o, 1);
        let base_r = freq_channel_r(&single_path(0.0, ONE), &g, &o, 1);
        for p in 1..=o.p() {
            let rot = cis(-c * p as f64);
            assert!(rel_error(&freq_channel_g(&ch, &g, &o, p), &(&base_g * rot)) < 1e-12);
            assert!(rel_error(&freq_channel_r(&ch, &g, &o, p), &(&base_r * rot)) < 1e-12);
        }
    }

    #[test]
    fn cascade_channel_shape_and_rank() {
        let (g, o) = (geom(), ofdm());
        let ch = single_path(3e-9, C64::new(0.3, -1.0));
        let h = cascade_channel(&freq_channel_g(&ch, &g, &o, 2), &freq_channel_r(&ch, &g, &o, 2)).unwrap();
        assert_eq!(h.shape(), (g.nt() * g.nr(), g.m()));
        assert_eq!(crate::linalg::svd(&h).rank(1e-10), 1);
        assert!(cascade_channel(&CMat::zeros(3, 2), &CMat::zeros(2, 4)).is_err());
    }

    #[test]
    fn cascade_matches_composite_expansion() {
        let (g, o) = (geom(), ofdm());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let ch = random_realization(2, 3, 100e-9, &mut rng).unwrap();
            let cp = composite_map(&ch);
            for p in 1..=o.p() {
                let h = cascade_channel(&freq_channel_g(&ch, &g, &o, p), &freq_channel_r(&ch, &g, &o, p)).unwrap();
                let hc = cascade_from_composite(&cp, &g, &o, p);
                assert!(rel_error(&hc, &h) < 1e-10);
            }
        }
    }

    #[test]
    fn cascade_from_composite_trivial_cases() {
        let (g, o) = (geom(), ofdm());
        let mut cp = composite_map(&single_path(1e-9, C64::new(0.5, 0.5)));
        assert_eq!(cp.len(), 1);
        assert_eq!(crate::linalg::svd(&cascade_from_composite(&cp, &g, &o, 1)).rank(1e-10), 1);
        cp.paths[0].gain = C64::from(0.0);
        assert_eq!(cascade_from_composite(&cp, &g, &o, 1).norm(), 0.0);
    }

    #[test]
    fn composite_index_examples() {
        // 1-based: (m=2, n=1), L_r=3 -> u=4
        let (lr, m1, n1) = (3usize, 2usize, 1usize);
        let u1 = composite_index(m1 - 1, n1 - 1, lr) + 1;
        assert_eq!(u1, 4);
        // ceil form of the inverse map
        let m_back = u1.div_ceil(lr);
        let n_back = u1 - (m_back - 1) * lr;
        assert_eq!((m_back, n_back), (2, 1));
        let (m0, n0) = split_composite_index(u1 - 1, lr);
        assert_eq!((m0 + 1, n0 + 1), (2, 1));
    }

    #[test]
    fn composite_map_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let ch = random_realization(2, 3, 100e-9, &mut rng).unwrap();
        let cp = composite_map(&ch);
        assert_eq!(cp.len(), 6);
        let u = composite_index(1, 0, 3);
        let p = cp.paths[u];
        let (g, r) = (ch.bs_ris[1], ch.ris_ue[0]);
        assert_eq!(p.gain, g.gain * r.gain);
        assert_eq!(p.delay, g.delay + r.delay);
        assert_eq!(p.aod, g.aod);
        assert_eq!(p.aoa, r.aoa);
        assert!((p.irs_az - wrap_angle(g.aoa_az - r.aod_az)).abs() < 1e-15);
        assert!((p.irs_el - wrap_angle(g.aoa_el - r.aod_el)).abs() < 1e-15);
        for p in &cp.paths {
            assert!((-PI..PI).contains(&p.irs_az) && (-PI..PI).contains(&p.irs_el));
        }

        let one = composite_map(&single_path(2e-9, C64::new(0.0, 2.0)));
        assert_eq!(one.paths[0].gain, C64::new(-4.0, 0.0));
        assert_eq!(one.paths[0].delay, 4e-9);
    }

    #[test]
    fn random_realization_is_seeded_and_bounded() {
        let a = random_realization(3, 2, 50e-9, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = random_realization(3, 2, 50e-9, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.bs_ris.iter().all(|p| p.delay <= 50e-9 && (0.0..2.0 * PI).contains(&p.aod)));
        assert!(a.ris_ue.iter().all(|p| p.delay <= 50e-9));
        assert!(random_realization(0, 1, 1e-9, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }

    #[test]
    fn gain_variance_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 10_000;
        let s: f64 = (0..n).map(|_| complex_gaussian(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((0.95..=1.05).contains(&s), "variance {s}");
    }

    #[test]
    fn text_format_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let ch = random_realization(3, 2, 100e-9, &mut rng).unwrap();
        let back = ChannelRealization::from_text(&ch.to_text()).unwrap();
        assert_eq!(back, ch);
        assert!(ChannelRealization::from_text("X 1 2 3 4 5 6").is_err());
        assert!(ChannelRealization::from_text("G 1 2 3").is_err());
    }

    #[test]
    fn validate_rejects_aliased_delays() {
        let o = ofdm();
        let ch = single_path(o.delay_period(), ONE);
        assert!(ch.validate(&o).is_err());
        assert!(single_path(10e-9, ONE).validate(&o).is_ok());
    }
}
