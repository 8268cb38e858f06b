//! Experiment configuration: a plain-text sectioned key-value file layered
//! over a built-in profile. Unknown sections or keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamforming::{BeamformingConfig, PowerMode};
use crate::channel::{ArrayGeometry, OfdmConfig};
use crate::cpd::AlsOptions;
use crate::error::{Error, Result};
use crate::recovery::SearchOptions;
use crate::somp::GridSpec;
use crate::training::Snr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(Error::Config(format!("unknown profile `{s}` (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain ALS at the true rank.
    Als,
    /// Ridge-regularized ALS at an overestimated rank with pruning.
    AlsReg,
    /// Closed-form Vandermonde solver.
    Vs,
    Somp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Als => "als",
            Self::AlsReg => "als-reg",
            Self::Vs => "vs",
            Self::Somp => "somp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "als" => Ok(Self::Als),
            "als-reg" => Ok(Self::AlsReg),
            "vs" => Ok(Self::Vs),
            "somp" => Ok(Self::Somp),
            other => Err(Error::Config(format!("unknown method `{other}` (expected als, als-reg, vs or somp)"))),
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let m: Vec<Method> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if m.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Snr,
    P,
    T,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub nt: usize,
    pub nr: usize,
    pub my: usize,
    pub mz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub l: usize,
    pub lr: usize,
    /// Seconds.
    pub delay_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub p0: usize,
    pub p: usize,
    pub fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub q: usize,
    pub t: usize,
    pub ns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// SNR (dB) when the sweep variable is not the SNR.
    pub snr_db: f64,
    /// Drop the noise entirely (not allowed with an SNR sweep).
    pub noiseless: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsSection {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Ridge weight for `als-reg`, relative to `||Y||_F^(4/3)`.
    pub mu_rel: f64,
    /// Extra components fitted by `als-reg` beyond the true rank.
    pub extra_rank: usize,
    pub prune_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub angle_grid: usize,
    pub delay_grid: usize,
    pub refine_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SompSection {
    pub bs: usize,
    pub ue: usize,
    pub irs_y: usize,
    pub irs_z: usize,
    /// Atoms to pick; 0 uses the true number of composite paths.
    pub sparsity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformingSection {
    pub enabled: bool,
    pub rho: f64,
    pub sigma2: f64,
    /// RF chains; 0 disables the hybrid stage.
    pub rt: usize,
    pub rr: usize,
    pub delta_bs: f64,
    pub delta_ue: f64,
    pub power: PowerMode,
    pub refine_se: bool,
    pub max_iters: usize,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySection,
    pub channel: ChannelSection,
    pub ofdm: OfdmSection,
    pub training: TrainingSection,
    pub sweep: SweepSection,
    pub run: RunSection,
    pub als: AlsSection,
    pub search: SearchSection,
    pub somp: SompSection,
    pub beamforming: BeamformingSection,
}

/// Fully resolved settings for one sweep point.
#[derive(Debug, Clone)]
pub struct PointSettings {
    pub geom: ArrayGeometry,
    pub ofdm: OfdmConfig,
    pub q: usize,
    pub t: usize,
    pub ns: usize,
    pub snr: Snr,
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> Self {
        let (n, my, l, qtp) = match p {
            Profile::Desk => (8, 8, 2, 8),
            Profile::Paper => (32, 16, 3, 16),
        };
        Self {
            geometry: GeometrySection { nt: n, nr: n, my, mz: my },
            channel: ChannelSection { l, lr: l, delay_max: 100e-9 },
            ofdm: OfdmSection { p0: 128, p: qtp, fs: 0.32e9 },
            training: TrainingSection { q: qtp, t: qtp, ns: 2 },
            sweep: SweepSection { variable: SweepVariable::Snr, values: vec![0.0, 10.0, 20.0, 30.0], snr_db: 20.0, noiseless: false },
            run: RunSection { methods: vec![Method::Als, Method::Vs], trials: 20, seed: 1, out: "results".into() },
            als: AlsSection { max_sweeps: 500, tol: 1e-8, mu_rel: 1e-2, extra_rank: 2, prune_threshold: 1e-2 },
            search: SearchSection { angle_grid: 64, delay_grid: 256, refine_passes: 3 },
            somp: SompSection { bs: 32, ue: 32, irs_y: 16, irs_z: 16, sparsity: 0 },
            beamforming: BeamformingSection {
                enabled: false,
                rho: 1.0,
                sigma2: 0.1,
                rt: 4,
                rr: 4,
                delta_bs: 0.3,
                delta_ue: 0.3,
                power: PowerMode::WaterFilling,
                refine_se: true,
                max_iters: 500,
                grad_tol: 1e-6,
            },
        }
    }

    /// Parses a config file over the given profile. Keys missing from the
    /// file keep the profile value.
    pub fn from_text(text: &str, base: Profile) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::profile(base)).map_err(|e| Error::Config(e.to_string()))?;
        for (section, value) in user {
            let Some(target) = merged.get_mut(&section) else {
                return Err(Error::Config(format!("unknown section [{section}]")));
            };
            match (target, value) {
                (toml::Value::Table(t), toml::Value::Table(u)) => {
                    for (k, v) in u {
                        t.insert(k, v);
                    }
                }
                _ => return Err(Error::Config(format!("`{section}` must be a section"))),
            }
        }
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.run.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.sweep.noiseless && self.sweep.variable == SweepVariable::Snr {
            return Err(Error::Config("a noiseless run cannot sweep the SNR".into()));
        }
        if self.sweep.variable != SweepVariable::Snr && self.sweep.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return Err(Error::Config("P/T/Q sweep values must be positive integers".into()));
        }
        for i in 0..self.sweep.values.len() {
            self.point(i)?;
        }
        self.beamforming_config()?.validate()?;
        GridSpec { bs: self.somp.bs, ue: self.somp.ue, irs_y: self.somp.irs_y, irs_z: self.somp.irs_z }.validate()?;
        self.search_options().validate()?;
        self.als_options(0).validate()
    }

    pub fn point(&self, index: usize) -> Result<PointSettings> {
        let g = &self.geometry;
        let geom = ArrayGeometry::new(g.nt, g.nr, g.my, g.mz)?;
        let v = *self.sweep.values.get(index).ok_or_else(|| Error::Config(format!("no sweep point {index}")))?;
        let (mut p, mut q, mut t) = (self.ofdm.p, self.training.q, self.training.t);
        let mut snr = if self.sweep.noiseless { Snr::Noiseless } else { Snr::Db(self.sweep.snr_db) };
        match self.sweep.variable {
            SweepVariable::Snr => snr = Snr::Db(v),
            SweepVariable::P => p = v as usize,
            SweepVariable::T => t = v as usize,
            SweepVariable::Q => q = v as usize,
        }
        let ofdm = OfdmConfig::new(self.ofdm.p0, p, self.ofdm.fs)?;
        Ok(PointSettings { geom, ofdm, q, t, ns: self.training.ns, snr })
    }

    pub fn paths(&self) -> usize {
        self.channel.l * self.channel.lr
    }

    pub fn als_options(&self, seed: u64) -> AlsOptions {
        AlsOptions {
            max_sweeps: self.als.max_sweeps,
            tol: self.als.tol,
            prune_threshold: self.als.prune_threshold,
            seed,
            ..AlsOptions::default()
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            angle_grid: self.search.angle_grid,
            delay_grid: self.search.delay_grid,
            refine_passes: self.search.refine_passes,
            ..SearchOptions::default()
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { bs: self.somp.bs, ue: self.somp.ue, irs_y: self.somp.irs_y, irs_z: self.somp.irs_z }
    }

    pub fn beamforming_config(&self) -> Result<BeamformingConfig> {
        let b = &self.beamforming;
        let chains = |r: usize| if r == 0 { None } else { Some(r) };
        Ok(BeamformingConfig {
            rho: b.rho,
            sigma2: b.sigma2,
            ns: self.training.ns,
            rt: chains(b.rt),
            rr: chains(b.rr),
            delta_bs: b.delta_bs,
            delta_ue: b.delta_ue,
            power: b.power,
            refine_se: b.refine_se,
            manifold: crate::beamforming::ManifoldOptions { max_iters: b.max_iters, grad_tol: b.grad_tol, ..Default::default() },
            ..BeamformingConfig::default()
        })
    }
}
