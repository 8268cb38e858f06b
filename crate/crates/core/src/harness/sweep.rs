//! Monte-Carlo trials: draw, synthesize, estimate, score.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Method, PointSettings};
use crate::beamforming::{design, evaluate, BeamformingSolution, SeReport};
use crate::channel::{cascade_from_composite, composite_map, random_realization, ChannelRealization, CompositePaths};
use crate::cpd::{als_fit, als_fit_regularized, match_components, vs_fit, AlsOptions, CpdResult};
use crate::crb::{class_means, crb_diag, fim_analytic};
use crate::error::{Error, Result};
use crate::linalg::{wrap_angle, CMat};
use crate::recovery::{nmse, reconstruct_channels, recover, ParameterEstimate};
use crate::somp::{build_dictionary, somp_estimate};
use crate::training::{gen_training, kruskal_check, synthesize, true_factors, Snr, TrainingConfig};

/// One row per (trial, sweep point, method).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub trial: usize,
    pub seed: u64,
    pub point: usize,
    pub sweep_value: f64,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub method: Method,
    /// `ok`, or a short reason the method produced no estimate.
    pub status: String,
    pub kruskal_slack: i64,
    /// Components returned by the estimator.
    pub rank: usize,
    pub nmse: f64,
    /// Squared errors per class (see [`crate::crb::REPORT_CLASSES`]),
    /// averaged over matched paths.
    pub mse: [f64; 6],
    pub crb: [f64; 6],
    pub se_est: f64,
    pub se_perfect: f64,
    pub se_hybrid_est: f64,
    pub se_hybrid_perfect: f64,
    /// Wall time of the estimator in milliseconds; not part of the
    /// deterministic record file.
    pub wall_ms: f64,
}

impl ExperimentRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Everything one trial produced, for verbose single runs and replay.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub records: Vec<ExperimentRecord>,
    pub channel: ChannelRealization,
    pub training: TrainingConfig,
    pub truth: CompositePaths,
    pub noise_var: f64,
    pub estimates: Vec<(Method, ParameterEstimate)>,
    pub als_traces: Vec<(Method, Vec<f64>)>,
    pub perfect_design: Option<BeamformingSolution>,
    pub designs: Vec<(Method, BeamformingSolution)>,
}

/// Per-trial seed: base seed plus the trial index.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.run.seed.wrapping_add(trial as u64)
}

/// Draws the channel and training of a trial from its seed. The channel is
/// drawn first so it does not depend on the training dimensions.
pub fn draw_scenario(cfg: &ExperimentConfig, pt: &PointSettings, seed: u64) -> Result<(ChannelRealization, TrainingConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = random_realization(cfg.channel.l, cfg.channel.lr, cfg.channel.delay_max, &mut rng)?;
    let tc = gen_training(&pt.geom, pt.q, pt.t, pt.ns, &mut rng)?;
    Ok((ch, tc))
}

/// Noise stream for sweep point `point`, independent of the scenario stream.
fn noise_rng(seed: u64, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + point as u64);
    rng
}

fn squared_errors(est: &ParameterEstimate, fit: &CpdResult, truth: &CompositePaths, tc: &TrainingConfig, pt: &PointSettings) -> Result<[f64; 6]> {
    let tf = true_factors(truth, tc, &pt.ofdm)?;
    let m = match_components(&fit.factors, &tf)?;
    let period = pt.ofdm.delay_period();
    let mut acc = [0.0; 6];
    for (t, &e) in m.perm.iter().enumerate() {
        let (x, y) = (&est.components[e], &truth.paths[t]);
        let dd = x.delay - y.delay;
        let dd = dd - period * (dd / period).round();
        let errs = [
            wrap_angle(x.irs_az - y.irs_az).powi(2),
            wrap_angle(x.irs_el - y.irs_el).powi(2),
            wrap_angle(x.aod - y.aod).powi(2),
            wrap_angle(x.aoa - y.aoa).powi(2),
            (x.gain - y.gain).norm_sqr(),
            dd * dd,
        ];
        for (a, v) in acc.iter_mut().zip(errs) {
            *a += v;
        }
    }
    let n = truth.len() as f64;
    Ok(acc.map(|a| a / n))
}

struct Estimated {
    est: Option<(ParameterEstimate, CpdResult)>,
    channels: Vec<CMat>,
    rank: usize,
}

fn estimate(method: Method, cfg: &ExperimentConfig, y: &crate::tensor::ComplexTensor3, tc: &TrainingConfig, pt: &PointSettings, u: usize, seed: u64) -> Result<Estimated> {
    let subcarriers: Vec<usize> = (1..=pt.ofdm.p()).collect();
    let fit = match method {
        Method::Als => als_fit(y, u, &cfg.als_options(seed))?,
        Method::AlsReg => {
            let mu = cfg.als.mu_rel * y.frobenius_norm().powf(4.0 / 3.0);
            let opts = AlsOptions { mu, rank_overestimate: Some(u + cfg.als.extra_rank), ..cfg.als_options(seed) };
            als_fit_regularized(y, &opts)?
        }
        Method::Vs => vs_fit(y, u)?,
        Method::Somp => {
            let dict = build_dictionary(tc, cfg.grid())?;
            let k = if cfg.somp.sparsity == 0 { u } else { cfg.somp.sparsity };
            let r = somp_estimate(y, &dict, k)?;
            return Ok(Estimated { est: None, channels: r.channels, rank: k });
        }
    };
    let rank = fit.effective_rank;
    if rank == 0 {
        return Err(Error::InvalidParameter("estimator pruned every component".into()));
    }
    let est = recover(&fit.factors, tc, &pt.ofdm, &cfg.search_options())?;
    let channels = reconstruct_channels(&est, &pt.geom, &pt.ofdm, &subcarriers);
    Ok(Estimated { est: Some((est, fit)), channels, rank })
}

fn blank(trial: usize, seed: u64, point: usize, value: f64, snr: Snr, method: Method, slack: i64, crb: [f64; 6]) -> ExperimentRecord {
    let snr_db = match snr {
        Snr::Db(d) => Some(d),
        Snr::Noiseless => None,
    };
    ExperimentRecord {
        trial,
        seed,
        point,
        sweep_value: value,
        snr_db,
        method,
        status: "ok".into(),
        kruskal_slack: slack,
        rank: 0,
        nmse: f64::NAN,
        mse: [f64::NAN; 6],
        crb,
        se_est: f64::NAN,
        se_perfect: f64::NAN,
        se_hybrid_est: f64::NAN,
        se_hybrid_perfect: f64::NAN,
        wall_ms: 0.0,
    }
}

fn status_of(e: &Error) -> String {
    // keep the field free of the CSV separator
    format!("error: {e}").replace([',', '\n'], ";")
}

/// Runs every configured method on one drawn scenario at sweep point `point`.
pub fn run_scenario(cfg: &ExperimentConfig, trial: usize, point: usize, ch: &ChannelRealization, tc: &TrainingConfig) -> Result<TrialOutput> {
    let pt = cfg.point(point)?;
    let seed = trial_seed(cfg, trial);
    ch.validate(&pt.ofdm)?;
    tc.validate()?;
    let truth = composite_map(ch);
    let u = truth.len();
    let value = cfg.sweep.values[point];
    let received = synthesize(&truth, tc, &pt.ofdm, pt.snr, &mut noise_rng(seed, point))?;
    let kr = kruskal_check(tc.q, tc.tns(), pt.ofdm.p(), u);
    if !kr.satisfied {
        log::warn!("trial {trial}: uniqueness condition fails (slack {}); methods still run", kr.slack);
    }
    let truth_channels: Vec<CMat> = (1..=pt.ofdm.p()).map(|p| cascade_from_composite(&truth, &pt.geom, &pt.ofdm, p)).collect();
    let crb = if received.noise_var > 0.0 {
        class_means(&crb_diag(&fim_analytic(&truth, tc, &pt.ofdm, received.noise_var)?))
    } else {
        [0.0; 6]
    };

    let bf_cfg = cfg.beamforming_config()?;
    let mut perfect: Option<(BeamformingSolution, SeReport)> = None;
    if cfg.beamforming.enabled {
        let sol = design(&truth, &pt.geom, &pt.ofdm, &bf_cfg)?;
        let rep = evaluate(&sol, &truth, &pt.geom, &pt.ofdm, bf_cfg.sigma2)?;
        perfect = Some((sol, rep));
    }

    let mut out = TrialOutput {
        records: Vec::new(),
        channel: ch.clone(),
        training: tc.clone(),
        truth: truth.clone(),
        noise_var: received.noise_var,
        estimates: Vec::new(),
        als_traces: Vec::new(),
        perfect_design: perfect.as_ref().map(|(s, _)| s.clone()),
        designs: Vec::new(),
    };
    for &method in &cfg.run.methods {
        let mut rec = blank(trial, seed, point, value, pt.snr, method, kr.slack, crb);
        let start = Instant::now();
        let result = estimate(method, cfg, &received.y, tc, &pt, u, seed);
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let est = match result {
            Ok(e) => e,
            Err(e) => {
                rec.status = status_of(&e);
                out.records.push(rec);
                continue;
            }
        };
        rec.rank = est.rank;
        rec.nmse = nmse(&est.channels, &truth_channels)?;
        if let Some((params, fit)) = est.est {
            if matches!(method, Method::Als | Method::AlsReg) {
                out.als_traces.push((method, fit.trace.clone()));
            }
            if fit.effective_rank >= u {
                rec.mse = squared_errors(&params, &fit, &truth, tc, &pt)?;
            } else {
                rec.status = format!("rank {} below {u}", fit.effective_rank);
            }
            if let Some((_, prep)) = &perfect {
                match design(&params.to_composite(), &pt.geom, &pt.ofdm, &bf_cfg) {
                    Ok(sol) => {
                        let rep = evaluate(&sol, &truth, &pt.geom, &pt.ofdm, bf_cfg.sigma2)?;
                        rec.se_est = rep.digital;
                        rec.se_hybrid_est = rep.hybrid.unwrap_or(f64::NAN);
                        out.designs.push((method, sol));
                    }
                    Err(e) => rec.status = status_of(&e),
                }
                rec.se_perfect = prep.digital;
                rec.se_hybrid_perfect = prep.hybrid.unwrap_or(f64::NAN);
            }
            out.estimates.push((method, params));
        }
        out.records.push(rec);
    }
    Ok(out)
}

/// Draws and runs trial `trial` at sweep point `point`.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, point: usize) -> Result<TrialOutput> {
    let pt = cfg.point(point)?;
    let (ch, tc) = draw_scenario(cfg, &pt, trial_seed(cfg, trial))?;
    run_scenario(cfg, trial, point, &ch, &tc)
}

/// All trials at all sweep points, in (point, trial, method) order.
///
/// Trials are independent and are spread over the available cores; rows
/// are merged back in deterministic order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.sweep.values.len()).flat_map(|p| (0..cfg.run.trials).map(move |t| (p, t))).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let mut slots: Vec<Option<Result<Vec<ExperimentRecord>>>> = (0..jobs.len()).map(|_| None).collect();
    if workers == 1 {
        for (slot, &(p, t)) in slots.iter_mut().zip(&jobs) {
            *slot = Some(run_trial(cfg, t, p).map(|o| o.records));
        }
    } else {
        let chunk = jobs.len().div_ceil(workers);
        std::thread::scope(|s| {
            for (slot_chunk, job_chunk) in slots.chunks_mut(chunk).zip(jobs.chunks(chunk)) {
                s.spawn(move || {
                    for (slot, &(p, t)) in slot_chunk.iter_mut().zip(job_chunk) {
                        *slot = Some(run_trial(cfg, t, p).map(|o| o.records));
                    }
                });
            }
        });
    }
    let mut rows = Vec::new();
    for s in slots {
        rows.extend(s.expect("every job ran")?);
    }
    Ok(rows)
}
