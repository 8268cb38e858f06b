//! `ris-cpd`: runs single trials, Monte-Carlo sweeps, bound curves and
//! beamforming comparisons, and replays saved scenarios.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use ris_cpd::cpd::write_trace_csv;
use ris_cpd::crb::REPORT_CLASSES;
use ris_cpd::harness::{
    crb_sweep, parse_methods, read_records, run_scenario, run_sweep, run_trial, summarize, write_crb, write_records, write_summary, write_timings,
    RunMetadata, Scenario, SummaryRow,
};
use ris_cpd::{ExperimentConfig, Profile};

#[derive(Parser)]
#[command(name = "ris-cpd", version, about = "Cascade channel estimation and beamforming experiments for RIS-assisted MIMO-OFDM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Base profile the config file and flags are layered over.
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk, global = true)]
    profile: ProfileArg,
    /// Sectioned key-value config file; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory (default from the config, `results`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated methods: als, als-reg, vs, somp.
    #[arg(long, global = true)]
    methods: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// One trial with every artifact written out.
    Simulate {
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Sweep point index.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Also design beamformers from each estimate.
        #[arg(long)]
        beamform: bool,
    },
    /// Monte-Carlo sweep: records, timings and summary.
    Sweep,
    /// Bound curves only, no estimators.
    Crb,
    /// Spectral efficiency with estimated vs perfect CSI.
    Beamform {
        /// RF chains at both ends; 0 keeps the fully digital design only.
        #[arg(long)]
        rf_chains: Option<usize>,
    },
    /// Re-runs a scenario saved by `simulate` and compares with its records.
    Replay { dir: PathBuf },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let base = match c.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    };
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_text(&text, base).with_context(|| format!("in {}", path.display()))?
        }
        None => ExperimentConfig::profile(base),
    };
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.run.trials = t;
    }
    if let Some(m) = &c.methods {
        cfg.run.methods = parse_methods(m)?;
    }
    if let Some(o) = &c.out {
        cfg.run.out = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn fmt_db(x: f64) -> String {
    if x.is_finite() {
        format!("{:8.2}", 10.0 * x.log10())
    } else {
        format!("{:>8}", "-")
    }
}

fn print_summary(rows: &[SummaryRow], with_se: bool) {
    print!("{:>6} {:>8} {:>8} {:>6} {:>8}", "point", "value", "method", "ok", "nmse_dB");
    if with_se {
        println!(" {:>8} {:>8} {:>8}", "se_est", "se_perf", "se_hyb");
    } else {
        for c in REPORT_CLASSES {
            print!(" {:>8}", format!("{c}_dB"));
        }
        println!();
    }
    for r in rows {
        print!("{:>6} {:>8} {:>8} {:>6} {}", r.point, r.sweep_value, r.method.name(), format!("{}/{}", r.ok, r.trials), fmt_db(r.nmse));
        if with_se {
            println!(" {:8.3} {:8.3} {:8.3}", r.se_est, r.se_perfect, r.se_hybrid_est);
        } else {
            for &m in &r.mse {
                print!(" {}", fmt_db(m));
            }
            println!();
        }
    }
}

fn simulate(cfg: &ExperimentConfig, trial: usize, point: usize) -> Result<()> {
    let out = PathBuf::from(&cfg.run.out);
    fs::create_dir_all(&out)?;
    let res = run_trial(cfg, trial, point)?;
    write_records(create(&out.join("records.csv"))?, &res.records)?;
    write_timings(create(&out.join("timings.csv"))?, &res.records)?;
    RunMetadata::new("simulate", cfg).write(&out.join("meta.json"))?;

    let scenario_dir = out.join("scenario");
    Scenario { config: cfg.clone(), trial, point, channel: res.channel.clone(), training: res.training.clone() }.save(&scenario_dir)?;
    write_records(create(&scenario_dir.join("records.csv"))?, &res.records)?;

    for (m, est) in &res.estimates {
        est.write_csv(create(&out.join(format!("estimate_{}.csv", m.name())))?)?;
    }
    for (m, trace) in &res.als_traces {
        write_trace_csv(trace, create(&out.join(format!("als_trace_{}.csv", m.name())))?)?;
    }
    if let Some(p) = &res.perfect_design {
        fs::write(out.join("beamforming_perfect.json"), p.to_json())?;
    }
    for (m, d) in &res.designs {
        fs::write(out.join(format!("beamforming_{}.json", m.name())), d.to_json())?;
    }

    println!("trial {trial} (seed {}), point {point}, {} composite paths, noise variance {:.3e}", res.records[0].seed, res.truth.len(), res.noise_var);
    println!("{:>3} {:>8} {:>8} {:>8} {:>8} {:>11} {:>16}", "u", "irs_az", "irs_el", "aod", "aoa", "delay_ns", "gain");
    for (u, p) in res.truth.paths.iter().enumerate() {
        println!("{u:>3} {:8.4} {:8.4} {:8.4} {:8.4} {:11.4} {:>16}", p.irs_az, p.irs_el, p.aod, p.aoa, p.delay * 1e9, format!("{:.3}", p.gain));
    }
    for r in &res.records {
        print!("{:>8}: status {}, rank {}, NMSE {} dB", r.method.name(), r.status, r.rank, fmt_db(r.nmse).trim());
        if r.se_perfect.is_finite() {
            print!(", SE est {:.3} / perfect {:.3}", r.se_est, r.se_perfect);
        }
        println!();
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    let out = PathBuf::from(&cfg.run.out);
    fs::create_dir_all(&out)?;
    info!("{} trials x {} points x {} methods", cfg.run.trials, cfg.sweep.values.len(), cfg.run.methods.len());
    let rows = run_sweep(cfg)?;
    write_records(create(&out.join("records.csv"))?, &rows)?;
    write_timings(create(&out.join("timings.csv"))?, &rows)?;
    let summary = summarize(&rows)?;
    write_summary(create(&out.join("summary.csv"))?, &summary)?;
    RunMetadata::new(command, cfg).write(&out.join("meta.json"))?;
    print_summary(&summary, cfg.beamforming.enabled);
    for r in &summary {
        if !r.below_crb.is_empty() {
            println!("note: {} at point {} has median error below the bound for {}", r.method, r.point, r.below_crb.join(", "));
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn crb(cfg: &ExperimentConfig) -> Result<()> {
    let out = PathBuf::from(&cfg.run.out);
    fs::create_dir_all(&out)?;
    let rows = crb_sweep(cfg)?;
    if rows.is_empty() {
        bail!("no noisy sweep points; bounds are undefined without noise");
    }
    write_crb(create(&out.join("crb.csv"))?, &rows)?;
    RunMetadata::new("crb", cfg).write(&out.join("meta.json"))?;
    for r in &rows {
        println!("{:>6} {:>8} {:>8} {:>12.4e}{}", r.point, r.snr_db, r.class, r.crb, if r.flagged > 0 { format!(" ({} flagged)", r.flagged) } else { String::new() });
    }
    Ok(())
}

fn replay(dir: &Path) -> Result<()> {
    let sc = Scenario::load(dir)?;
    let res = run_scenario(&sc.config, sc.trial, sc.point, &sc.channel, &sc.training)?;
    let mut fresh = Vec::new();
    write_records(&mut fresh, &res.records)?;
    let expected = dir.join("records.csv");
    if !expected.exists() {
        print!("{}", String::from_utf8(fresh)?);
        return Ok(());
    }
    let saved = fs::read(&expected)?;
    // parse first so a malformed file is reported as such
    read_records(&saved[..])?;
    if saved != fresh {
        bail!("replay of trial {} point {} differs from {}", sc.trial, sc.point, expected.display());
    }
    println!("replay of trial {} point {} matches {} ({} rows)", sc.trial, sc.point, expected.display(), res.records.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { trial, point, beamform } => {
            let mut cfg = load_config(&cli.common)?;
            cfg.beamforming.enabled |= beamform;
            simulate(&cfg, trial, point)
        }
        Command::Sweep => sweep(&load_config(&cli.common)?, "sweep"),
        Command::Crb => crb(&load_config(&cli.common)?),
        Command::Beamform { rf_chains } => {
            let mut cfg = load_config(&cli.common)?;
            cfg.beamforming.enabled = true;
            if let Some(r) = rf_chains {
                cfg.beamforming.rt = r;
                cfg.beamforming.rr = r;
            }
            cfg.validate()?;
            sweep(&cfg, "beamform")
        }
        Command::Replay { dir } => replay(&dir),
    }
}
