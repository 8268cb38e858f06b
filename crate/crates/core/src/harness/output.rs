//! Result files: record CSV, timings, summary, CRB table, metadata sidecar
//! and replayable scenarios.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, Profile};
use super::sweep::{draw_scenario, trial_seed, ExperimentRecord};
use crate::channel::{composite_map, ChannelRealization};
use crate::crb::{class_means, crb_diag, fim_analytic, REPORT_CLASSES};
use crate::error::{Error, Result};
use crate::training::{synthesize, Snr, TrainingConfig};

const FIXED_COLUMNS: [&str; 10] = ["trial", "seed", "point", "sweep_value", "snr_db", "method", "status", "kruskal_slack", "rank", "nmse"];
const SE_COLUMNS: [&str; 4] = ["se_est", "se_perfect", "se_hybrid_est", "se_hybrid_perfect"];

pub fn record_columns() -> Vec<String> {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(REPORT_CLASSES.iter().map(|c| format!("mse_{c}")));
    cols.extend(REPORT_CLASSES.iter().map(|c| format!("crb_{c}")));
    cols.extend(SE_COLUMNS.iter().map(|s| s.to_string()));
    cols
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad number {s:?}") })
}

fn parse_u<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad integer {s:?}") })
}

fn write_comment<W: Write>(out: &mut W, cols: &[String]) -> Result<()> {
    writeln!(out, "# columns: {}", cols.join(","))?;
    Ok(())
}

/// Records as CSV. Missing values are `NaN`; noiseless rows carry
/// `snr_db = noiseless`.
pub fn write_records<W: Write>(mut out: W, rows: &[ExperimentRecord]) -> Result<()> {
    let cols = record_columns();
    write_comment(&mut out, &cols)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in rows {
        let mut f = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.point.to_string(),
            fmt_f(r.sweep_value),
            r.snr_db.map_or("noiseless".into(), fmt_f),
            r.method.to_string(),
            r.status.clone(),
            r.kruskal_slack.to_string(),
            r.rank.to_string(),
            fmt_f(r.nmse),
        ];
        f.extend(r.mse.iter().map(|&x| fmt_f(x)));
        f.extend(r.crb.iter().map(|&x| fmt_f(x)));
        f.extend([r.se_est, r.se_perfect, r.se_hybrid_est, r.se_hybrid_perfect].map(fmt_f));
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let cols = record_columns();
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != cols {
        return Err(Error::Parse { line: 0, msg: format!("unexpected record header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let g = |i: usize| rec.get(i).unwrap_or("");
        let arr = |off: usize| -> Result<[f64; 6]> {
            let mut a = [0.0; 6];
            for (k, v) in a.iter_mut().enumerate() {
                *v = parse_f(g(off + k))?;
            }
            Ok(a)
        };
        let snr = g(4);
        rows.push(ExperimentRecord {
            trial: parse_u(g(0))?,
            seed: parse_u(g(1))?,
            point: parse_u(g(2))?,
            sweep_value: parse_f(g(3))?,
            snr_db: if snr == "noiseless" { None } else { Some(parse_f(snr)?) },
            method: g(5).parse::<Method>()?,
            status: g(6).to_string(),
            kruskal_slack: parse_u(g(7))?,
            rank: parse_u(g(8))?,
            nmse: parse_f(g(9))?,
            mse: arr(10)?,
            crb: arr(16)?,
            se_est: parse_f(g(22))?,
            se_perfect: parse_f(g(23))?,
            se_hybrid_est: parse_f(g(24))?,
            se_hybrid_perfect: parse_f(g(25))?,
            wall_ms: 0.0,
        });
    }
    Ok(rows)
}

/// Estimator wall times, kept out of the record file so that reruns
/// reproduce it byte for byte.
pub fn write_timings<W: Write>(mut out: W, rows: &[ExperimentRecord]) -> Result<()> {
    let cols: Vec<String> = ["trial", "point", "method", "wall_ms"].iter().map(|s| s.to_string()).collect();
    write_comment(&mut out, &cols)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in rows {
        w.write_record([r.trial.to_string(), r.point.to_string(), r.method.to_string(), format!("{:.3}", r.wall_ms)])?;
    }
    w.flush()?;
    Ok(())
}

/// Median of the finite entries; `NaN` when there are none.
pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per (sweep point, method) medians.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub point: usize,
    pub sweep_value: f64,
    pub snr_db: Option<f64>,
    pub method: Method,
    pub trials: usize,
    pub ok: usize,
    pub nmse: f64,
    pub mse: [f64; 6],
    pub crb: [f64; 6],
    /// Classes whose median error is below the median bound.
    pub below_crb: Vec<&'static str>,
    pub se_est: f64,
    pub se_perfect: f64,
    pub se_hybrid_est: f64,
}

pub fn summarize(rows: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no records to summarize".into()));
    }
    let mut keys: Vec<(usize, Method)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.point, r.method)) {
            keys.push((r.point, r.method));
        }
    }
    keys.sort_by_key(|&(p, m)| (p, m as usize));
    let mut out = Vec::new();
    for (point, method) in keys {
        let g: Vec<&ExperimentRecord> = rows.iter().filter(|r| r.point == point && r.method == method).collect();
        let ok: Vec<&&ExperimentRecord> = g.iter().filter(|r| r.ok()).collect();
        let med = |f: &dyn Fn(&ExperimentRecord) -> f64| median(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let mse: [f64; 6] = std::array::from_fn(|k| med(&|r| r.mse[k]));
        let crb: [f64; 6] = std::array::from_fn(|k| median(&g.iter().map(|r| r.crb[k]).collect::<Vec<_>>()));
        let below_crb = REPORT_CLASSES.iter().enumerate().filter(|&(k, _)| mse[k] < crb[k]).map(|(_, &c)| c).collect();
        out.push(SummaryRow {
            point,
            sweep_value: g[0].sweep_value,
            snr_db: g[0].snr_db,
            method,
            trials: g.len(),
            ok: ok.len(),
            nmse: med(&|r| r.nmse),
            mse,
            crb,
            below_crb,
            se_est: med(&|r| r.se_est),
            se_perfect: med(&|r| r.se_perfect),
            se_hybrid_est: med(&|r| r.se_hybrid_est),
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut cols: Vec<String> = ["point", "sweep_value", "snr_db", "method", "trials", "ok", "nmse"].iter().map(|s| s.to_string()).collect();
    cols.extend(REPORT_CLASSES.iter().map(|c| format!("mse_{c}")));
    cols.extend(REPORT_CLASSES.iter().map(|c| format!("crb_{c}")));
    cols.extend(["below_crb", "se_est", "se_perfect", "se_hybrid_est"].iter().map(|s| s.to_string()));
    write_comment(&mut out, &cols)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in rows {
        let mut f = vec![
            r.point.to_string(),
            fmt_f(r.sweep_value),
            r.snr_db.map_or("noiseless".into(), fmt_f),
            r.method.to_string(),
            r.trials.to_string(),
            r.ok.to_string(),
            fmt_f(r.nmse),
        ];
        f.extend(r.mse.iter().map(|&x| fmt_f(x)));
        f.extend(r.crb.iter().map(|&x| fmt_f(x)));
        f.push(r.below_crb.join(";"));
        f.extend([r.se_est, r.se_perfect, r.se_hybrid_est].map(fmt_f));
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

/// Median CRB of one reporting class at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbRow {
    pub point: usize,
    pub sweep_value: f64,
    pub snr_db: f64,
    pub class: &'static str,
    pub crb: f64,
    /// Trials whose information matrix was numerically singular.
    pub flagged: usize,
}

/// Bounds alone, without running any estimator. Noiseless points are skipped.
pub fn crb_sweep(cfg: &ExperimentConfig) -> Result<Vec<CrbRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for point in 0..cfg.sweep.values.len() {
        let pt = cfg.point(point)?;
        let Snr::Db(db) = pt.snr else { continue };
        let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); 6];
        let mut flagged = 0;
        for trial in 0..cfg.run.trials {
            let seed = trial_seed(cfg, trial);
            let (ch, tc) = draw_scenario(cfg, &pt, seed)?;
            let cp = composite_map(&ch);
            // noise variance follows the same SNR definition as the data
            let clean = synthesize(&cp, &tc, &pt.ofdm, pt.snr, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let rep = crb_diag(&fim_analytic(&cp, &tc, &pt.ofdm, clean.noise_var)?);
            flagged += usize::from(rep.any_flagged());
            for (k, v) in class_means(&rep).into_iter().enumerate() {
                per_class[k].push(v);
            }
        }
        for (k, class) in REPORT_CLASSES.iter().enumerate() {
            rows.push(CrbRow { point, sweep_value: cfg.sweep.values[point], snr_db: db, class, crb: median(&per_class[k]), flagged });
        }
    }
    Ok(rows)
}

pub fn write_crb<W: Write>(mut out: W, rows: &[CrbRow]) -> Result<()> {
    let cols: Vec<String> = ["point", "sweep_value", "snr_db", "class", "crb", "flagged"].iter().map(|s| s.to_string()).collect();
    write_comment(&mut out, &cols)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for r in rows {
        w.write_record([r.point.to_string(), fmt_f(r.sweep_value), fmt_f(r.snr_db), r.class.to_string(), fmt_f(r.crb), r.flagged.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub config: String,
}

impl RunMetadata {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seeds: (0..cfg.run.trials).map(|t| trial_seed(cfg, t)).collect(),
            config: cfg.to_text(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// A single trial frozen to disk: config, indices, channel and training.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub trial: usize,
    pub point: usize,
    pub channel: ChannelRealization,
    pub training: TrainingConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioIndex {
    trial: usize,
    point: usize,
}

impl Scenario {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_text())?;
        let idx = toml::to_string(&ScenarioIndex { trial: self.trial, point: self.point }).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("scenario.toml"), idx)?;
        fs::write(dir.join("channel.txt"), self.channel.to_text())?;
        fs::write(dir.join("training.txt"), self.training.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::from_text(&fs::read_to_string(dir.join("config.toml"))?, Profile::Desk)?;
        let idx: ScenarioIndex = toml::from_str(&fs::read_to_string(dir.join("scenario.toml"))?).map_err(|e| Error::Config(e.to_string()))?;
        let channel = ChannelRealization::from_text(&fs::read_to_string(dir.join("channel.txt"))?)?;
        let training = TrainingConfig::from_text(&fs::read_to_string(dir.join("training.txt"))?)?;
        Ok(Self { config, trial: idx.trial, point: idx.point, channel, training })
    }
}
