//! Joint active/passive beamforming from composite-path parameters.
//!
//! The design flow is: pick `Ns` well-separated strong paths, choose the RIS
//! phases to maximize a per-path rate surrogate, then derive SVD precoders
//! for the resulting effective channels and optionally factor them into
//! analog and baseband parts.

mod digital;
mod hybrid;
mod manifold;
mod passive;
mod refine;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use digital::{digital_precoders, spectral_efficiency, water_filling};
pub use hybrid::{hybrid_factorize, HybridFactor, HybridOptions};
pub use manifold::{ascend, retract, tangent, AscentResult, ManifoldOptions};
pub use passive::{optimize_passive, passive_gain};
pub use refine::refine_spectral_efficiency;

use crate::channel::{irs_pair_scale, steering_bs, steering_irs, steering_ue, ArrayGeometry, CompositePath, CompositePaths, OfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    WaterFilling,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingConfig {
    /// Transmit power budget per subcarrier.
    pub rho: f64,
    pub sigma2: f64,
    pub ns: usize,
    /// RF chains at the BS and user; `None` skips the hybrid stage.
    pub rt: Option<usize>,
    pub rr: Option<usize>,
    pub delta_bs: f64,
    pub delta_ue: f64,
    pub manifold: ManifoldOptions,
    pub hybrid: HybridOptions,
    pub power: PowerMode,
    /// Polish `v` by ascending the spectral efficiency of all paths after
    /// the per-path surrogate.
    pub refine_se: bool,
}

impl Default for BeamformingConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma2: 0.1,
            ns: 2,
            rt: None,
            rr: None,
            delta_bs: 0.3,
            delta_ue: 0.3,
            manifold: ManifoldOptions::default(),
            hybrid: HybridOptions::default(),
            power: PowerMode::WaterFilling,
            refine_se: true,
        }
    }
}

impl BeamformingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.sigma2 > 0.0) {
            return Err(Error::InvalidParameter("rho and sigma2 must be positive".into()));
        }
        if self.ns == 0 {
            return Err(Error::InvalidParameter("need at least one stream".into()));
        }
        for d in [self.delta_bs, self.delta_ue] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidParameter(format!("separation threshold {d} outside (0, 1)")));
            }
        }
        for r in [self.rt, self.rr].into_iter().flatten() {
            if r < self.ns {
                return Err(Error::InvalidParameter(format!("{r} RF chains cannot carry {} streams", self.ns)));
            }
        }
        Ok(())
    }
}

/// Effective channel `sum_u rho_u e^{-j2pi fs iota_u p/P0} d_u a_UE(theta_u) a_BS(phi_u)^H`
/// with `d_u = v^H a_IRS(zeta_u, xi_u) / sqrt(M)`; `Nr x Nt`.
pub fn effective_channel(cp: &CompositePaths, v: &CVec, geom: &ArrayGeometry, ofdm: &OfdmConfig, p: usize) -> Result<CMat> {
    if v.len() != geom.m() {
        return Err(Error::Dimension(format!("RIS vector has {} entries, M = {}", v.len(), geom.m())));
    }
    let scale = irs_pair_scale(geom);
    let mut h = CMat::zeros(geom.nr(), geom.nt());
    for path in &cp.paths {
        let d = v.dotc(&steering_irs(path.irs_az, path.irs_el, geom)) * scale;
        let coef = path.gain * ofdm.tone_phase(path.delay, p) * d;
        let a_ue = steering_ue(path.aoa, geom.nr())?;
        let a_bs = steering_bs(path.aod, geom.nt())?;
        h += (a_ue * a_bs.adjoint()) * coef;
    }
    Ok(h)
}

/// Effective channel from a cascade matrix: `reshape(H_p conj(v))`, which
/// equals `R_p diag(v^H) G_p`.
pub fn effective_channel_from_cascade(h: &CMat, v: &CVec, geom: &ArrayGeometry) -> Result<CMat> {
    if h.shape() != (geom.nt() * geom.nr(), geom.m()) || v.len() != geom.m() {
        return Err(Error::Dimension("cascade channel or RIS vector has the wrong shape".into()));
    }
    let x = h * v.conjugate();
    let nr = geom.nr();
    Ok(CMat::from_fn(nr, geom.nt(), |r, t| x[t * nr + r]))
}

fn pair_ok(a: &CompositePath, b: &CompositePath, geom: &ArrayGeometry, cfg: &BeamformingConfig) -> bool {
    let bs = steering_bs(a.aod, geom.nt()).unwrap().dotc(&steering_bs(b.aod, geom.nt()).unwrap()).norm();
    let ue = steering_ue(a.aoa, geom.nr()).unwrap().dotc(&steering_ue(b.aoa, geom.nr()).unwrap()).norm();
    bs < cfg.delta_bs && ue < cfg.delta_ue
}

fn compatibility(paths: &[CompositePath], geom: &ArrayGeometry, cfg: &BeamformingConfig) -> Vec<Vec<bool>> {
    let u = paths.len();
    let mut ok = vec![vec![false; u]; u];
    for i in 0..u {
        for j in (i + 1)..u {
            let c = pair_ok(&paths[i], &paths[j], geom, cfg);
            ok[i][j] = c;
            ok[j][i] = c;
        }
    }
    ok
}

/// Greedy selection in descending `|rho|^2`, skipping paths that clash with
/// an already chosen one. Returns however many it could pick (at most `ns`).
pub fn select_paths_greedy(paths: &[CompositePath], geom: &ArrayGeometry, cfg: &BeamformingConfig, ns: usize) -> Vec<usize> {
    let ok = compatibility(paths, geom, cfg);
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by(|&a, &b| paths[b].gain.norm_sqr().total_cmp(&paths[a].gain.norm_sqr()));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.len() == ns {
            break;
        }
        if chosen.iter().all(|&j| ok[i][j]) {
            chosen.push(i);
        }
    }
    chosen
}

/// Exhaustive search over all feasible sets of size `ns`; `None` when no
/// such set exists.
pub fn select_paths_exhaustive(paths: &[CompositePath], geom: &ArrayGeometry, cfg: &BeamformingConfig, ns: usize) -> Option<Vec<usize>> {
    let ok = compatibility(paths, geom, cfg);
    let power: Vec<f64> = paths.iter().map(|p| p.gain.norm_sqr()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cur = Vec::with_capacity(ns);
    fn go(start: usize, ns: usize, ok: &[Vec<bool>], power: &[f64], cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        if cur.len() == ns {
            let s: f64 = cur.iter().map(|&i| power[i]).sum();
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                *best = Some((s, cur.clone()));
            }
            return;
        }
        for i in start..power.len() {
            if cur.iter().all(|&j| ok[i][j]) {
                cur.push(i);
                go(i + 1, ns, ok, power, cur, best);
                cur.pop();
            }
        }
    }
    go(0, ns, &ok, &power, &mut cur, &mut best);
    best.map(|(_, mut s)| {
        s.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
        s
    })
}

/// Picks `cfg.ns` strong paths with pairwise-distinct BS and user angles.
/// Exhaustive for up to 12 paths, greedy beyond.
pub fn select_paths(paths: &[CompositePath], geom: &ArrayGeometry, cfg: &BeamformingConfig) -> Result<Vec<usize>> {
    let ns = cfg.ns;
    let found = if paths.len() <= 12 {
        select_paths_exhaustive(paths, geom, cfg, ns)
    } else {
        Some(select_paths_greedy(paths, geom, cfg, ns)).filter(|s| s.len() == ns)
    };
    match found {
        Some(s) => Ok(s),
        None => {
            let largest = (1..ns)
                .rev()
                .find(|&k| {
                    if paths.len() <= 12 {
                        select_paths_exhaustive(paths, geom, cfg, k).is_some()
                    } else {
                        select_paths_greedy(paths, geom, cfg, k).len() == k
                    }
                })
                .unwrap_or(0);
            Err(Error::InfeasibleSelection { requested: ns, largest: largest.min(paths.len()) })
        }
    }
}

/// Largest off-path RIS gain relative to the weakest selected one:
/// `max_{u not in I} |d_u| / min_{i in I} |d_i|`.
pub fn leakage_ratio(paths: &[CompositePath], selected: &[usize], v: &CVec, geom: &ArrayGeometry) -> f64 {
    let d: Vec<f64> = paths.iter().map(|p| passive_gain(v, p.irs_az, p.irs_el, geom).norm()).collect();
    let min_sel = selected.iter().map(|&i| d[i]).fold(f64::INFINITY, f64::min);
    let max_off = (0..paths.len()).filter(|i| !selected.contains(i)).map(|i| d[i]).fold(0.0, f64::max);
    if min_sel > 0.0 {
        max_off / min_sel
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    pub f_rf: CMat,
    pub f_bb: Vec<CMat>,
    pub w_rf: CMat,
    pub w_bb: Vec<CMat>,
    pub f_residual: Vec<f64>,
    pub w_residual: Vec<f64>,
}

impl HybridSolution {
    pub fn precoders(&self) -> Vec<CMat> {
        self.f_bb.iter().map(|b| &self.f_rf * b).collect()
    }
    pub fn combiners(&self) -> Vec<CMat> {
        self.w_bb.iter().map(|b| &self.w_rf * b).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub v: CVec,
    pub selected: Vec<usize>,
    /// Per-subcarrier fully digital precoders/combiners.
    pub f_opt: Vec<CMat>,
    pub w_opt: Vec<CMat>,
    pub hybrid: Option<HybridSolution>,
    /// Spectral efficiency on the channels the design was computed from.
    pub design_se: f64,
    pub leakage: f64,
}

/// Full design from (estimated or true) composite paths.
///
/// If no set of `cfg.ns` mutually separated paths exists the design falls
/// back to the largest feasible number of streams.
pub fn design(cp: &CompositePaths, geom: &ArrayGeometry, ofdm: &OfdmConfig, cfg: &BeamformingConfig) -> Result<BeamformingSolution> {
    cfg.validate()?;
    if cp.is_empty() {
        return Err(Error::InvalidParameter("no paths to beamform on".into()));
    }
    let selected = match select_paths(&cp.paths, geom, cfg) {
        Ok(s) => s,
        Err(Error::InfeasibleSelection { requested, largest }) if largest >= 1 => {
            log::warn!("only {largest} of {requested} streams have separable paths; reducing stream count");
            select_paths(&cp.paths, geom, &BeamformingConfig { ns: largest, ..cfg.clone() })?
        }
        Err(e) => return Err(e),
    };
    let ns = selected.len();
    let chosen: Vec<CompositePath> = selected.iter().map(|&i| cp.paths[i]).collect();
    let (mut v, _) = optimize_passive(&chosen, geom, cfg.rho, cfg.sigma2, &cfg.manifold)?;
    if cfg.refine_se {
        v = refine_spectral_efficiency(cp, &v, geom, ofdm, ns, cfg)?.0;
    }

    let mut channels = Vec::with_capacity(ofdm.p());
    let mut f_opt = Vec::with_capacity(ofdm.p());
    let mut w_opt = Vec::with_capacity(ofdm.p());
    for p in 1..=ofdm.p() {
        let h = effective_channel(cp, &v, geom, ofdm, p)?;
        let (f, w) = digital_precoders(&h, ns, cfg.rho, cfg.sigma2, cfg.power)?;
        channels.push(h);
        f_opt.push(f);
        w_opt.push(w);
    }
    let design_se = spectral_efficiency(&channels, &f_opt, &w_opt, cfg.sigma2)?;
    let hybrid = match (cfg.rt, cfg.rr) {
        (Some(rt), Some(rr)) => {
            let f = hybrid_factorize(&f_opt, rt, Some(cfg.rho), &cfg.hybrid)?;
            let w = hybrid_factorize(&w_opt, rr, None, &cfg.hybrid)?;
            Some(HybridSolution {
                f_rf: f.analog,
                f_bb: f.baseband,
                w_rf: w.analog,
                w_bb: w.baseband,
                f_residual: f.residual_trace,
                w_residual: w.residual_trace,
            })
        }
        (None, None) => None,
        _ => return Err(Error::InvalidParameter("set both rt and rr for hybrid beamforming".into())),
    };
    let leakage = leakage_ratio(&cp.paths, &selected, &v, geom);
    Ok(BeamformingSolution { v, selected, f_opt, w_opt, hybrid, design_se, leakage })
}

/// Spectral efficiencies of a solution on the channels induced by `truth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeReport {
    pub digital: f64,
    pub hybrid: Option<f64>,
}

pub fn evaluate(sol: &BeamformingSolution, truth: &CompositePaths, geom: &ArrayGeometry, ofdm: &OfdmConfig, sigma2: f64) -> Result<SeReport> {
    let channels = (1..=ofdm.p()).map(|p| effective_channel(truth, &sol.v, geom, ofdm, p)).collect::<Result<Vec<_>>>()?;
    let digital = spectral_efficiency(&channels, &sol.f_opt, &sol.w_opt, sigma2)?;
    let hybrid = match &sol.hybrid {
        Some(h) => Some(spectral_efficiency(&channels, &h.precoders(), &h.combiners(), sigma2)?),
        None => None,
    };
    Ok(SeReport { digital, hybrid })
}

fn mat_json(m: &CMat) -> serde_json::Value {
    json!({
        "rows": m.nrows(),
        "cols": m.ncols(),
        "re": m.iter().map(|z| z.re).collect::<Vec<_>>(),
        "im": m.iter().map(|z| z.im).collect::<Vec<_>>(),
    })
}

fn mat_from_json(v: &serde_json::Value) -> Result<CMat> {
    let bad = || Error::Parse { line: 0, msg: "malformed matrix record".into() };
    let rows = v["rows"].as_u64().ok_or_else(bad)? as usize;
    let cols = v["cols"].as_u64().ok_or_else(bad)? as usize;
    let nums = |k: &str| -> Result<Vec<f64>> {
        v[k].as_array().ok_or_else(bad)?.iter().map(|x| x.as_f64().ok_or_else(bad)).collect()
    };
    let (re, im) = (nums("re")?, nums("im")?);
    if re.len() != rows * cols || im.len() != rows * cols {
        return Err(bad());
    }
    let data: Vec<C64> = re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect();
    Ok(CMat::from_vec(rows, cols, data))
}

fn mats_json(ms: &[CMat]) -> serde_json::Value {
    serde_json::Value::Array(ms.iter().map(mat_json).collect())
}

fn mats_from_json(v: &serde_json::Value) -> Result<Vec<CMat>> {
    v.as_array()
        .ok_or_else(|| Error::Parse { line: 0, msg: "expected matrix list".into() })?
        .iter()
        .map(mat_from_json)
        .collect()
}

impl BeamformingSolution {
    pub fn to_json(&self) -> String {
        let v = CMat::from_column_slice(self.v.len(), 1, self.v.as_slice());
        let hybrid = self.hybrid.as_ref().map(|h| {
            json!({
                "f_rf": mat_json(&h.f_rf),
                "f_bb": mats_json(&h.f_bb),
                "w_rf": mat_json(&h.w_rf),
                "w_bb": mats_json(&h.w_bb),
                "f_residual": h.f_residual,
                "w_residual": h.w_residual,
            })
        });
        let doc = json!({
            "v": mat_json(&v),
            "selected": self.selected,
            "f_opt": mats_json(&self.f_opt),
            "w_opt": mats_json(&self.w_opt),
            "hybrid": hybrid,
            "design_se": self.design_se,
            "leakage": self.leakage,
        });
        serde_json::to_string_pretty(&doc).expect("plain JSON values")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let bad = |k: &str| Error::Parse { line: 0, msg: format!("missing or malformed field {k}") };
        let v = mat_from_json(&doc["v"])?;
        let selected = doc["selected"]
            .as_array()
            .ok_or_else(|| bad("selected"))?
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| bad("selected")))
            .collect::<Result<Vec<_>>>()?;
        let floats = |x: &serde_json::Value, k: &str| -> Result<Vec<f64>> {
            x.as_array().ok_or_else(|| bad(k))?.iter().map(|y| y.as_f64().ok_or_else(|| bad(k))).collect()
        };
        let hybrid = match &doc["hybrid"] {
            serde_json::Value::Null => None,
            h => Some(HybridSolution {
                f_rf: mat_from_json(&h["f_rf"])?,
                f_bb: mats_from_json(&h["f_bb"])?,
                w_rf: mat_from_json(&h["w_rf"])?,
                w_bb: mats_from_json(&h["w_bb"])?,
                f_residual: floats(&h["f_residual"], "f_residual")?,
                w_residual: floats(&h["w_residual"], "w_residual")?,
            }),
        };
        Ok(Self {
            v: v.column(0).into_owned(),
            selected,
            f_opt: mats_from_json(&doc["f_opt"])?,
            w_opt: mats_from_json(&doc["w_opt"])?,
            hybrid,
            design_se: doc["design_se"].as_f64().ok_or_else(|| bad("design_se"))?,
            leakage: doc["leakage"].as_f64().ok_or_else(|| bad("leakage"))?,
        })
    }
}
