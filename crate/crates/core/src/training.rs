//! Frame-based training protocol and synthesis of the received tensor.
//!
//! During frame `t` the BS sends with beamformer `f_t` and the user combines
//! with `W_t`; within the frame the RIS cycles through `Q` phase patterns.
//! Stacking slots, frames/streams and subcarriers gives a `Q x T·Ns x P`
//! tensor whose CP factors are the RIS responses, the BS/user responses and
//! the delay generators.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{irs_pair_scale, steering_bs, steering_irs, steering_ue, ArrayGeometry, CompositePaths, OfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};
use crate::tensor::{cp_reconstruct, ComplexTensor3, FactorTriple};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub geom: ArrayGeometry,
    pub q: usize,
    pub t: usize,
    pub ns: usize,
    pub rt: usize,
    pub rr: usize,
    /// `M x Q`; column `q` is the diagonal of the RIS matrix in slot `q`.
    pub v: CMat,
    /// Per-frame BS beamformers, each of length `Nt`.
    pub f: Vec<CVec>,
    /// Per-frame user combiners, each `Nr x Ns`.
    pub w: Vec<CMat>,
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    cis(rng.random_range(-PI..=PI))
}

/// Draws every training coefficient as `e^{j s}`, `s ~ U[-pi, pi]`.
pub fn gen_training<R: Rng + ?Sized>(geom: &ArrayGeometry, q: usize, t: usize, ns: usize, rng: &mut R) -> Result<TrainingConfig> {
    if q == 0 || t == 0 || ns == 0 {
        return Err(Error::InvalidParameter(format!("need Q, T, Ns >= 1 (Q={q}, T={t}, Ns={ns})")));
    }
    if ns > geom.nr() {
        return Err(Error::InvalidParameter(format!("Ns={ns} exceeds Nr={}", geom.nr())));
    }
    let v = CMat::from_fn(geom.m(), q, |_, _| random_phase(rng));
    let mut f = Vec::with_capacity(t);
    let mut w = Vec::with_capacity(t);
    for _ in 0..t {
        f.push(CVec::from_fn(geom.nt(), |_, _| random_phase(rng)));
        w.push(CMat::from_fn(geom.nr(), ns, |_, _| random_phase(rng)));
    }
    Ok(TrainingConfig { geom: *geom, q, t, ns, rt: ns, rr: ns, v, f, w })
}

impl TrainingConfig {
    /// Number of columns of the mode-2 dimension, `T * Ns`.
    pub fn tns(&self) -> usize {
        self.t * self.ns
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geom;
        let ok = self.v.shape() == (g.m(), self.q)
            && self.f.len() == self.t
            && self.w.len() == self.t
            && self.f.iter().all(|f| f.len() == g.nt())
            && self.w.iter().all(|w| w.shape() == (g.nr(), self.ns));
        if !ok {
            return Err(Error::Dimension("training matrices inconsistent with geometry".into()));
        }
        if self.v.iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidParameter("RIS training phases must be unit modulus".into()));
        }
        Ok(())
    }

    /// `X_t = f_t ⊗ conj(W_t)`, `Nt Nr x Ns`.
    pub fn x_t(&self, t: usize) -> CMat {
        let (f, w) = (&self.f[t], &self.w[t]);
        let nr = w.nrows();
        CMat::from_fn(f.len() * nr, self.ns, |i, s| f[i / nr] * w[(i % nr, s)].conj())
    }

    /// `F = [X_1 ... X_T]`, `Nt Nr x T Ns`.
    pub fn f_matrix(&self) -> CMat {
        let rows = self.geom.nt() * self.geom.nr();
        let mut out = CMat::zeros(rows, self.tns());
        for t in 0..self.t {
            out.columns_mut(t * self.ns, self.ns).copy_from(&self.x_t(t));
        }
        out
    }

    /// `V^T a_IRS(az, el)`.
    pub fn irs_response(&self, az: f64, el: f64) -> CVec {
        self.v.transpose() * steering_irs(az, el, &self.geom)
    }

    /// `F^T (conj(a_BS(phi)) ⊗ a_UE(theta))`, evaluated frame by frame as
    /// `(f_t^T conj(a_BS)) (W_t^H a_UE)`.
    pub fn joint_response(&self, phi: f64, theta: f64) -> CVec {
        let a_bs = steering_bs(phi, self.geom.nt()).expect("geometry validated").conjugate();
        let a_ue = steering_ue(theta, self.geom.nr()).expect("geometry validated");
        self.joint_response_from(&a_bs, &a_ue)
    }

    /// Same as [`Self::joint_response`] from precomputed `conj(a_BS)` and `a_UE`.
    pub fn joint_response_from(&self, a_bs_conj: &CVec, a_ue: &CVec) -> CVec {
        let mut out = CVec::zeros(self.tns());
        for t in 0..self.t {
            let bs = self.f[t].transpose() * a_bs_conj;
            let ue = self.w[t].adjoint() * a_ue;
            for s in 0..self.ns {
                out[t * self.ns + s] = bs[0] * ue[s];
            }
        }
        out
    }

    /// Plain-text record, one matrix row per line, floats printed exactly.
    pub fn to_text(&self) -> String {
        let g = &self.geom;
        let mut s = String::new();
        let _ = writeln!(s, "geometry {} {} {} {}", g.nt(), g.nr(), g.my(), g.mz());
        let _ = writeln!(s, "dims {} {} {} {} {}", self.q, self.t, self.ns, self.rt, self.rr);
        for m in 0..self.v.nrows() {
            let _ = writeln!(s, "V {m}{}", complex_fields(self.v.row(m).iter()));
        }
        for (t, f) in self.f.iter().enumerate() {
            let _ = writeln!(s, "f {t}{}", complex_fields(f.iter()));
        }
        for (t, w) in self.w.iter().enumerate() {
            for r in 0..w.nrows() {
                let _ = writeln!(s, "W {t} {r}{}", complex_fields(w.row(r).iter()));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut geom = None;
        let mut dims = None;
        let mut v_rows: Vec<(usize, Vec<C64>)> = Vec::new();
        let mut f_rows: Vec<(usize, Vec<C64>)> = Vec::new();
        let mut w_rows: Vec<(usize, usize, Vec<C64>)> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let no = no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let int = |i: usize| -> Result<usize> {
                toks.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse { line: no, msg: format!("expected integer field {i}") })
            };
            match toks[0] {
                "geometry" => geom = Some(ArrayGeometry::new(int(1)?, int(2)?, int(3)?, int(4)?)?),
                "dims" => dims = Some((int(1)?, int(2)?, int(3)?, int(4)?, int(5)?)),
                "V" => v_rows.push((int(1)?, parse_complex_fields(&toks[2..], no)?)),
                "f" => f_rows.push((int(1)?, parse_complex_fields(&toks[2..], no)?)),
                "W" => w_rows.push((int(1)?, int(2)?, parse_complex_fields(&toks[3..], no)?)),
                other => return Err(Error::Parse { line: no, msg: format!("unknown record {other:?}") }),
            }
        }
        let geom = geom.ok_or_else(|| Error::Parse { line: 0, msg: "missing geometry line".into() })?;
        let (q, t, ns, rt, rr) = dims.ok_or_else(|| Error::Parse { line: 0, msg: "missing dims line".into() })?;
        let mut v = CMat::zeros(geom.m(), q);
        let mut f = vec![CVec::zeros(geom.nt()); t];
        let mut w = vec![CMat::zeros(geom.nr(), ns); t];
        let bad = |what: &str| Error::Parse { line: 0, msg: format!("{what} record out of range") };
        for (m, vals) in v_rows {
            if m >= geom.m() || vals.len() != q {
                return Err(bad("V"));
            }
            for (j, z) in vals.into_iter().enumerate() {
                v[(m, j)] = z;
            }
        }
        for (ti, vals) in f_rows {
            if ti >= t || vals.len() != geom.nt() {
                return Err(bad("f"));
            }
            f[ti] = CVec::from_vec(vals);
        }
        for (ti, r, vals) in w_rows {
            if ti >= t || r >= geom.nr() || vals.len() != ns {
                return Err(bad("W"));
            }
            for (j, z) in vals.into_iter().enumerate() {
                w[ti][(r, j)] = z;
            }
        }
        let tc = TrainingConfig { geom, q, t, ns, rt, rr, v, f, w };
        tc.validate()?;
        Ok(tc)
    }
}

pub(crate) fn complex_fields<'a>(it: impl Iterator<Item = &'a C64>) -> String {
    let mut s = String::new();
    for z in it {
        let _ = write!(s, " {} {}", z.re, z.im);
    }
    s
}

pub(crate) fn parse_complex_fields(toks: &[&str], no: usize) -> Result<Vec<C64>> {
    if toks.len() % 2 != 0 {
        return Err(Error::Parse { line: no, msg: "odd number of real/imaginary fields".into() });
    }
    toks.chunks(2)
        .map(|c| {
            let re = c[0].parse::<f64>();
            let im = c[1].parse::<f64>();
            match (re, im) {
                (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
                _ => Err(Error::Parse { line: no, msg: format!("bad complex value {} {}", c[0], c[1]) }),
            }
        })
        .collect()
}

/// Ground-truth CP factors of the clean received tensor.
///
/// `A(:,u) = V^T a_IRS`, `B(:,u) = (rho_u / sqrt(M)) F^T a_S`, `C(:,u) = g(iota_u)`.
/// The `1/sqrt(M)` comes from collapsing the two unit-norm RIS steering
/// vectors into one; keeping it in `B` leaves every steering vector unit-norm
/// and `rho_u` equal to the product of the physical path gains.
pub fn true_factors(cp: &CompositePaths, tc: &TrainingConfig, ofdm: &OfdmConfig) -> Result<FactorTriple> {
    if cp.is_empty() {
        return Err(Error::InvalidParameter("no composite paths".into()));
    }
    let u = cp.len();
    let scale = irs_pair_scale(&tc.geom);
    let mut a = CMat::zeros(tc.q, u);
    let mut b = CMat::zeros(tc.tns(), u);
    let mut c = CMat::zeros(ofdm.p(), u);
    for (k, path) in cp.paths.iter().enumerate() {
        a.set_column(k, &tc.irs_response(path.irs_az, path.irs_el));
        b.set_column(k, &(tc.joint_response(path.aod, path.aoa) * (path.gain * scale)));
        c.set_column(k, &ofdm.delay_response(path.delay));
    }
    FactorTriple::new(a, b, c)
}

/// Target SNR of a synthesized observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Noiseless,
    Db(f64),
}

impl Snr {
    pub fn linear(&self) -> Option<f64> {
        match self {
            Snr::Noiseless => None,
            Snr::Db(db) => Some(10f64.powf(db / 10.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReceivedTensor {
    pub y: ComplexTensor3,
    pub noise_var: f64,
    pub clean: ComplexTensor3,
}

/// `Y = [[A, B, C]] + N` with `sigma^2 = ||clean||^2 / (SNR * #entries)`.
pub fn synthesize<R: Rng + ?Sized>(cp: &CompositePaths, tc: &TrainingConfig, ofdm: &OfdmConfig, snr: Snr, rng: &mut R) -> Result<ReceivedTensor> {
    let clean = cp_reconstruct(&true_factors(cp, tc, ofdm)?)?;
    let Some(lin) = snr.linear() else {
        return Ok(ReceivedTensor { y: clean.clone(), noise_var: 0.0, clean });
    };
    if !(lin > 0.0) || !lin.is_finite() {
        return Err(Error::InvalidParameter(format!("linear SNR must be positive and finite, got {lin}")));
    }
    let noise_var = clean.norm_squared() / (lin * clean.len() as f64);
    let s = (noise_var / 2.0).sqrt();
    let mut y = clean.clone();
    for z in y.data_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += C64::new(re * s, im * s);
    }
    Ok(ReceivedTensor { y, noise_var, clean })
}

/// Outcome of the Kruskal uniqueness test
/// `min(Q,U) + min(TNs,U) + min(P,U) >= 2U + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KruskalReport {
    pub satisfied: bool,
    /// Left side minus right side.
    pub slack: i64,
}

pub fn kruskal_check(q: usize, tns: usize, p: usize, u: usize) -> KruskalReport {
    let lhs = (q.min(u) + tns.min(u) + p.min(u)) as i64;
    let slack = lhs - (2 * u + 2) as i64;
    KruskalReport { satisfied: slack >= 0, slack }
}
