//! Parameter recovery from estimated CP factors.
//!
//! Each factor column is matched against a dictionary of model responses
//! (coarse grid, then golden-section refinement per coordinate), after which
//! the per-component scaling ambiguity is resolved against the rebuilt
//! factors to obtain the complex path gains.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::channel::{cascade_from_composite, steering_irs, ArrayGeometry, CompositePath, CompositePaths, OfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, wrap_angle, CMat, CVec, C64, J};
use crate::tensor::FactorTriple;
use crate::training::TrainingConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Coarse grid points per angular dimension.
    pub angle_grid: usize,
    /// Coarse grid points over the delay period.
    pub delay_grid: usize,
    /// Maximum number of alternating coordinate-refinement passes.
    pub refine_passes: usize,
    /// Golden-section stopping width, in radians (angles) or in units of
    /// the delay grid spacing scaled to radians of generator phase.
    pub refine_tol: f64,
    /// Peaks below this normalized correlation are flagged unreliable.
    pub reliable_peak: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { angle_grid: 64, delay_grid: 256, refine_passes: 3, refine_tol: 1e-5, reliable_peak: 0.2 }
    }
}

impl SearchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.angle_grid < 2 || self.delay_grid < 2 {
            return Err(Error::InvalidParameter("search grids need at least 2 points".into()));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::InvalidParameter("refinement tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentEstimate {
    pub irs_az: f64,
    pub irs_el: f64,
    pub aod: f64,
    pub aoa: f64,
    pub delay: f64,
    pub gain: C64,
    /// Normalized correlation peaks of the RIS, BS/user and delay searches.
    pub peaks: [f64; 3],
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterEstimate {
    pub components: Vec<ComponentEstimate>,
    /// Diagonals of the ambiguity matrices for the RIS and delay factors.
    pub psi1: Vec<C64>,
    pub psi3: Vec<C64>,
}

impl ParameterEstimate {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn to_composite(&self) -> CompositePaths {
        CompositePaths {
            paths: self
                .components
                .iter()
                .map(|c| CompositePath {
                    gain: c.gain,
                    delay: c.delay,
                    irs_az: c.irs_az,
                    irs_el: c.irs_el,
                    aod: c.aod,
                    aoa: c.aoa,
                })
                .collect(),
        }
    }

    const CSV_HEADER: [&'static str; 12] = [
        "component", "irs_az", "irs_el", "aod", "aoa", "delay_s", "gain_re", "gain_im", "peak_irs", "peak_bs_ue", "peak_delay",
        "reliable",
    ];

    /// One row per component.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for (u, c) in self.components.iter().enumerate() {
            w.write_record([
                u.to_string(),
                c.irs_az.to_string(),
                c.irs_el.to_string(),
                c.aod.to_string(),
                c.aoa.to_string(),
                c.delay.to_string(),
                c.gain.re.to_string(),
                c.gain.im.to_string(),
                c.peaks[0].to_string(),
                c.peaks[1].to_string(),
                c.peaks[2].to_string(),
                c.reliable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`Self::write_csv`]; ambiguity diagonals are not
    /// part of the record and come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != Self::CSV_HEADER {
            return Err(Error::Parse { line: 1, msg: format!("unexpected header {header:?}") });
        }
        let mut components = Vec::new();
        for (no, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = no + 2;
            let f = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Parse { line, msg: format!("bad number {:?}", &rec[i]) })
            };
            components.push(ComponentEstimate {
                irs_az: f(1)?,
                irs_el: f(2)?,
                aod: f(3)?,
                aoa: f(4)?,
                delay: f(5)?,
                gain: C64::new(f(6)?, f(7)?),
                peaks: [f(8)?, f(9)?, f(10)?],
                reliable: rec[11].parse().map_err(|_| Error::Parse { line, msg: "bad flag".into() })?,
            });
        }
        Ok(Self { components, psi1: Vec::new(), psi3: Vec::new() })
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect()
}

fn ula_raw(angle: f64, n: usize) -> CVec {
    let s = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| cis(i as f64 * angle) * s)
}

/// Maximizes `f` over `[lo, hi]` by golden-section search.
fn golden_max(f: &mut impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Alternating golden-section refinement of a 2-D maximizer within one grid
/// cell of the starting point.
fn refine_2d(f: &mut impl FnMut(f64, f64) -> f64, x0: f64, y0: f64, h: f64, opts: &SearchOptions) -> (f64, f64, f64) {
    let (mut x, mut y) = (x0, y0);
    let mut best = f(x, y);
    for _ in 0..opts.refine_passes.max(1) {
        let (nx, vx) = golden_max(&mut |t| f(t, y), x - h, x + h, opts.refine_tol);
        let moved_x = if vx > best { (nx - x).abs() } else { 0.0 };
        if vx > best {
            x = nx;
            best = vx;
        }
        let (ny, vy) = golden_max(&mut |t| f(x, t), y - h, y + h, opts.refine_tol);
        let moved_y = if vy > best { (ny - y).abs() } else { 0.0 };
        if vy > best {
            y = ny;
            best = vy;
        }
        if moved_x.max(moved_y) < opts.refine_tol {
            break;
        }
    }
    (x, y, best)
}

/// Gauss-Newton polish of the same normalized correlation, written as the
/// separable least-squares problem `min_{s, p} ||x - s r(p)||`. Golden-section
/// search compares objective values that are flat to second order at the
/// peak; the residual here moves linearly in the parameter error, which lets
/// the polish reach machine precision on noiseless data.
fn polish(x: &CVec, model: impl Fn(&[f64]) -> (CVec, Vec<CVec>), p0: &[f64]) -> Vec<f64> {
    let residual = |r: &CVec| -> (f64, C64) {
        let rn = r.norm_squared();
        if rn == 0.0 {
            return (f64::INFINITY, C64::from(0.0));
        }
        let s = r.dotc(x) / rn;
        ((x - r * s).norm(), s)
    };
    let mut p = p0.to_vec();
    let (mut r, mut d) = model(&p);
    let (mut res, mut s) = residual(&r);
    for _ in 0..12 {
        // joint step in the parameters and in the complex scale s
        let e = x - &r * s;
        let mut cols: Vec<CVec> = d.iter().map(|dk| dk * s).collect();
        cols.push(r.clone());
        cols.push(&r * J);
        let n = cols.len();
        let h = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| cols[i].dotc(&cols[j]).re);
        let g = nalgebra::DVector::<f64>::from_fn(n, |i, _| cols[i].dotc(&e).re);
        let Some(full) = h.lu().solve(&g) else { break };
        let step = full.rows(0, p.len()).into_owned();
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..4 {
            let cand: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let (rc, dc) = model(&cand);
            let (rc_res, sc) = residual(&rc);
            if rc_res < res {
                p = cand;
                r = rc;
                d = dc;
                res = rc_res;
                s = sc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    p
}

fn argmax(v: impl Iterator<Item = f64>) -> (usize, f64) {
    v.enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc })
}

/// Correlation searches for one training configuration, with the coarse
/// dictionaries precomputed so that many columns can be processed cheaply.
pub struct Searcher<'a> {
    tc: &'a TrainingConfig,
    ofdm: OfdmConfig,
    opts: SearchOptions,
    angles: Vec<f64>,
    // RIS: per grid point, ||V^T a_IRS||, indexed [az * G + el]
    irs_norm: Vec<f64>,
    ay: CMat, // My x G
    az: CMat, // Mz x G
    // BS/user: f_t^T conj(a_BS(phi_g)) as T x G, W_t^H a_UE(theta_g) as TNs x G
    bs: CMat,
    ue: CMat,
    s_norm: Vec<f64>, // [phi * G + theta]
    delays: Vec<f64>,
    dict_c: CMat, // P x Gd, unit-norm columns
}

impl<'a> Searcher<'a> {
    pub fn new(tc: &'a TrainingConfig, ofdm: &OfdmConfig, opts: &SearchOptions) -> Result<Self> {
        opts.validate()?;
        tc.validate()?;
        let g = opts.angle_grid;
        let geom: &ArrayGeometry = &tc.geom;
        let (my, mz) = (geom.my(), geom.mz());
        let angles = grid(g);
        let mut ay = CMat::zeros(my, g);
        let mut az = CMat::zeros(mz, g);
        for (k, &a) in angles.iter().enumerate() {
            ay.set_column(k, &ula_raw(a, my));
            az.set_column(k, &ula_raw(a, mz));
        }
        // V^T (a_y ⊗ a_z): fold a_y into V first, then contract with a_z
        let mut irs_norm = vec![0.0; g * g];
        for i in 0..g {
            let mut t = CMat::zeros(mz, tc.q);
            for y in 0..my {
                let w = ay[(y, i)];
                for z in 0..mz {
                    for q in 0..tc.q {
                        t[(z, q)] += w * tc.v[(y * mz + z, q)];
                    }
                }
            }
            let resp = az.transpose() * t; // G x Q
            for j in 0..g {
                irs_norm[i * g + j] = resp.row(j).norm();
            }
        }

        let (nt, nr, ns) = (geom.nt(), geom.nr(), tc.ns);
        let mut bs = CMat::zeros(tc.t, g);
        let mut ue = CMat::zeros(tc.tns(), g);
        for (k, &a) in angles.iter().enumerate() {
            let abs_c = ula_raw(a, nt).conjugate();
            let aue = ula_raw(a, nr);
            for t in 0..tc.t {
                bs[(t, k)] = (tc.f[t].transpose() * &abs_c)[0];
                let u = tc.w[t].adjoint() * &aue;
                for s in 0..ns {
                    ue[(t * ns + s, k)] = u[s];
                }
            }
        }
        let bs2 = bs.map(|z| z.norm_sqr());
        let mut ue2 = nalgebra::DMatrix::<f64>::zeros(tc.t, g);
        for t in 0..tc.t {
            for s in 0..ns {
                for k in 0..g {
                    ue2[(t, k)] += ue[(t * ns + s, k)].norm_sqr();
                }
            }
        }
        let s2 = bs2.transpose() * ue2; // G(phi) x G(theta)
        let s_norm = (0..g * g).map(|i| s2[(i / g, i % g)].sqrt()).collect();

        let period = ofdm.delay_period();
        let delays: Vec<f64> = (0..opts.delay_grid).map(|i| period * i as f64 / opts.delay_grid as f64).collect();
        let mut dict_c = CMat::zeros(ofdm.p(), delays.len());
        let sp = 1.0 / (ofdm.p() as f64).sqrt();
        for (k, &d) in delays.iter().enumerate() {
            dict_c.set_column(k, &(ofdm.delay_response(d) * C64::from(sp)));
        }
        Ok(Self {
            tc,
            ofdm: *ofdm,
            opts: opts.clone(),
            angles,
            irs_norm,
            ay,
            az,
            bs,
            ue,
            s_norm,
            delays,
            dict_c,
        })
    }

    fn step(&self) -> f64 {
        2.0 * PI / self.opts.angle_grid as f64
    }

    /// Returns `(azimuth, elevation, peak)` for an estimated RIS factor column.
    pub fn irs_angles(&self, a_hat: &CVec, u: usize) -> Result<(f64, f64, f64)> {
        let na = a_hat.norm();
        if na == 0.0 || a_hat.len() != self.tc.q {
            return Err(Error::ZeroColumn(u));
        }
        let (my, mz) = (self.tc.geom.my(), self.tc.geom.mz());
        // a_hat^H V^T (a_y ⊗ a_z) = a_y^T W a_z with W = reshape(V conj(a_hat))
        let w = &self.tc.v * a_hat.conjugate();
        let wm = CMat::from_fn(my, mz, |y, z| w[y * mz + z]);
        let corr = self.ay.transpose() * wm * &self.az;
        let g = self.opts.angle_grid;
        let (best, _) = argmax((0..g * g).map(|i| {
            let n = self.irs_norm[i];
            if n > 0.0 {
                corr[(i / g, i % g)].norm() / (n * na)
            } else {
                0.0
            }
        }));
        let mut obj = |x: f64, y: f64| {
            let r = self.tc.irs_response(x, y);
            let n = r.norm();
            if n > 0.0 {
                a_hat.dotc(&r).norm() / (n * na)
            } else {
                0.0
            }
        };
        let (x, y, _) = refine_2d(&mut obj, self.angles[best / g], self.angles[best % g], self.step(), &self.opts);
        let geom = self.tc.geom;
        let vt = self.tc.v.transpose();
        let model = |p: &[f64]| {
            let a = steering_irs(p[0], p[1], &geom);
            let da = CVec::from_fn(a.len(), |i, _| a[i] * J * (i / mz) as f64);
            let de = CVec::from_fn(a.len(), |i, _| a[i] * J * (i % mz) as f64);
            (&vt * a, vec![&vt * da, &vt * de])
        };
        let p = polish(a_hat, model, &[x, y]);
        let peak = obj(p[0], p[1]);
        Ok((wrap_angle(p[0]), wrap_angle(p[1]), peak))
    }

    /// Returns `(phi, theta, peak)` for an estimated BS/user factor column.
    pub fn bs_ue_angles(&self, b_hat: &CVec, u: usize) -> Result<(f64, f64, f64)> {
        let nb = b_hat.norm();
        if nb == 0.0 || b_hat.len() != self.tc.tns() {
            return Err(Error::ZeroColumn(u));
        }
        let (t_n, ns, g) = (self.tc.t, self.tc.ns, self.opts.angle_grid);
        let mut wm = CMat::zeros(t_n, g);
        for t in 0..t_n {
            for s in 0..ns {
                let bc = b_hat[t * ns + s].conj();
                for k in 0..g {
                    wm[(t, k)] += bc * self.ue[(t * ns + s, k)];
                }
            }
        }
        let corr = self.bs.transpose() * wm; // G(phi) x G(theta)
        let (best, _) = argmax((0..g * g).map(|i| {
            let n = self.s_norm[i];
            if n > 0.0 {
                corr[(i / g, i % g)].norm() / (n * nb)
            } else {
                0.0
            }
        }));
        let mut obj = |x: f64, y: f64| {
            let r = self.tc.joint_response(x, y);
            let n = r.norm();
            if n > 0.0 {
                b_hat.dotc(&r).norm() / (n * nb)
            } else {
                0.0
            }
        };
        let (x, y, _) = refine_2d(&mut obj, self.angles[best / g], self.angles[best % g], self.step(), &self.opts);
        let (nt, nr) = (self.tc.geom.nt(), self.tc.geom.nr());
        let model = |p: &[f64]| {
            let abs_c = ula_raw(p[0], nt).conjugate();
            let aue = ula_raw(p[1], nr);
            let dbs = CVec::from_fn(nt, |i, _| -abs_c[i] * J * i as f64);
            let due = CVec::from_fn(nr, |i, _| aue[i] * J * i as f64);
            let r = self.tc.joint_response_from(&abs_c, &aue);
            let d = vec![self.tc.joint_response_from(&dbs, &aue), self.tc.joint_response_from(&abs_c, &due)];
            (r, d)
        };
        let p = polish(b_hat, model, &[x, y]);
        let peak = obj(p[0], p[1]);
        Ok((wrap_angle(p[0]), wrap_angle(p[1]), peak))
    }

    /// Returns `(delay, peak)` maximizing the normalized correlation with
    /// `g(delay)` over `[0, P0/fs)`.
    pub fn delay(&self, c_hat: &CVec, u: usize) -> Result<(f64, f64)> {
        let nc = c_hat.norm();
        if nc == 0.0 || c_hat.len() != self.ofdm.p() {
            return Err(Error::ZeroColumn(u));
        }
        let corr = self.dict_c.adjoint() * c_hat;
        let (best, _) = argmax(corr.iter().map(|z| z.norm() / nc));
        let sp = 1.0 / (self.ofdm.p() as f64).sqrt();
        let mut obj = |d: f64| c_hat.dotc(&self.ofdm.delay_response(d)).norm() * sp / nc;
        let period = self.ofdm.delay_period();
        let h = period / self.opts.delay_grid as f64;
        // tolerance expressed in generator phase: d(phase)/d(delay) = 2 pi fs / P0
        let tol = self.opts.refine_tol * period / (2.0 * PI);
        let (d, _) = golden_max(&mut obj, self.delays[best] - h, self.delays[best] + h, tol);
        let ofdm = self.ofdm;
        let rate = -2.0 * PI * ofdm.fs() / ofdm.p0() as f64;
        let model = |p: &[f64]| {
            let g = ofdm.delay_response(p[0]);
            let dg = CVec::from_fn(g.len(), |k, _| g[k] * J * (rate * (k + 1) as f64));
            (g, vec![dg])
        };
        let d = polish(c_hat, model, &[d])[0];
        let peak = obj(d);
        Ok((d.rem_euclid(period), peak))
    }

    /// Full recovery: angles and delays per component, then gains.
    pub fn recover(&self, f: &FactorTriple) -> Result<ParameterEstimate> {
        let u_n = f.rank();
        let mut comps = Vec::with_capacity(u_n);
        for u in 0..u_n {
            let (irs_az, irs_el, p1) = self.irs_angles(&f.a.column(u).into_owned(), u)?;
            let (aod, aoa, p2) = self.bs_ue_angles(&f.b.column(u).into_owned(), u)?;
            let (delay, p3) = self.delay(&f.c.column(u).into_owned(), u)?;
            let peaks = [p1, p2, p3];
            let reliable = peaks.iter().all(|&p| p >= self.opts.reliable_peak);
            if !reliable {
                log::warn!("component {u} has a weak correlation peak ({peaks:?})");
            }
            comps.push(ComponentEstimate { irs_az, irs_el, aod, aoa, delay, gain: C64::from(0.0), peaks, reliable });
        }
        let mut est = ParameterEstimate { components: comps, psi1: Vec::new(), psi3: Vec::new() };
        resolve_gains(f, &mut est, self.tc, &self.ofdm)?;
        Ok(est)
    }
}

/// Fills in the complex gains of `est` from the factor scalings.
///
/// With `A_hat = A Psi1`, `B_hat = B Psi2`, `C_hat = C Psi3` and
/// `Psi1 Psi2 Psi3 = I`, each diagonal is the least-squares fit over
/// diagonal matrices, which decouples into one projection per column:
/// `psi_u = a~_u^H a^_u / ||a~_u||^2`. Then `rho_u / sqrt(M)` is the
/// projection of `b^_u` on `b~_u` times `psi1_u psi3_u`.
pub fn resolve_gains(f: &FactorTriple, est: &mut ParameterEstimate, tc: &TrainingConfig, ofdm: &OfdmConfig) -> Result<()> {
    let u_n = f.rank();
    if est.len() != u_n {
        return Err(Error::Dimension(format!("{} parameter sets for rank {u_n}", est.len())));
    }
    let proj = |model: &CVec, col: nalgebra::DVectorView<'_, C64>| model.dotc(&col) / model.norm_squared();
    let sqrt_m = (tc.geom.m() as f64).sqrt();
    est.psi1.clear();
    est.psi3.clear();
    for u in 0..u_n {
        let c = &est.components[u];
        let p1 = proj(&tc.irs_response(c.irs_az, c.irs_el), f.a.column(u).into());
        let p3 = proj(&ofdm.delay_response(c.delay), f.c.column(u).into());
        let d = proj(&tc.joint_response(c.aod, c.aoa), f.b.column(u).into());
        if p1.norm() < 1e-12 || p3.norm() < 1e-12 {
            return Err(Error::DegenerateComponent(u));
        }
        // Psi2^{-1} = Psi1 Psi3
        est.components[u].gain = d * p1 * p3 * sqrt_m;
        est.psi1.push(p1);
        est.psi3.push(p3);
    }
    Ok(())
}

/// Recovers composite-path parameters from CP factors.
pub fn recover(f: &FactorTriple, tc: &TrainingConfig, ofdm: &OfdmConfig, opts: &SearchOptions) -> Result<ParameterEstimate> {
    Searcher::new(tc, ofdm, opts)?.recover(f)
}

/// Correlation search for the composite RIS angles of one factor column.
pub fn estimate_irs_angles(a_hat: &CVec, tc: &TrainingConfig, opts: &SearchOptions) -> Result<(f64, f64)> {
    let ofdm = OfdmConfig::new(2, 2, 1.0)?;
    let (x, y, _) = Searcher::new(tc, &ofdm, opts)?.irs_angles(a_hat, 0)?;
    Ok((x, y))
}

/// Correlation search for the BS departure and user arrival angles.
pub fn estimate_bs_ue_angles(b_hat: &CVec, tc: &TrainingConfig, opts: &SearchOptions) -> Result<(f64, f64)> {
    let ofdm = OfdmConfig::new(2, 2, 1.0)?;
    let (x, y, _) = Searcher::new(tc, &ofdm, opts)?.bs_ue_angles(b_hat, 0)?;
    Ok((x, y))
}

/// Correlation search for a composite delay.
pub fn estimate_delay(c_hat: &CVec, tc: &TrainingConfig, ofdm: &OfdmConfig, opts: &SearchOptions) -> Result<f64> {
    Ok(Searcher::new(tc, ofdm, opts)?.delay(c_hat, 0)?.0)
}

/// Cascade channels `H_p` for the listed (1-based) subcarriers.
pub fn reconstruct_channels(est: &ParameterEstimate, geom: &ArrayGeometry, ofdm: &OfdmConfig, subcarriers: &[usize]) -> Vec<CMat> {
    let cp = est.to_composite();
    subcarriers.iter().map(|&p| cascade_from_composite(&cp, geom, ofdm, p)).collect()
}

/// `sum_p ||H_hat_p - H_p||^2 / sum_p ||H_p||^2`.
pub fn nmse(est: &[CMat], truth: &[CMat]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Dimension(format!("{} estimated vs {} true channels", est.len(), truth.len())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (e, t) in est.iter().zip(truth) {
        if e.shape() != t.shape() {
            return Err(Error::Dimension("channel shapes differ".into()));
        }
        num += (e - t).norm_squared();
        den += t.norm_squared();
    }
    Ok(if den > 0.0 { num / den } else { num })
}
