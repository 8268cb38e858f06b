//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). Every criterion
//! is always evaluated and reported; set `ACCEPTANCE_STRICT=1` to make the
//! process exit non-zero when any of them fails, and `ACCEPTANCE_ONLY=k` to
//! run criterion `k` alone.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_cpd::beamforming::{effective_channel, optimize_passive, ManifoldOptions};
use ris_cpd::channel::{
    cascade_channel, cascade_from_composite, composite_map, effective_channel_from_links, freq_channel_g, freq_channel_r, random_realization,
    steering_irs, CompositePath,
};
use ris_cpd::cpd::{als_fit, vs_fit, AlsOptions};
use ris_cpd::crb::{fim_analytic, fim_numeric, fim_rel_error, REPORT_CLASSES};
use ris_cpd::harness::{draw_scenario, run_sweep, run_trial, summarize, ExperimentRecord, Method, SweepVariable};
use ris_cpd::linalg::{cis, rel_error, CVec};
use ris_cpd::tensor::cp_reconstruct;
use ris_cpd::training::{kruskal_check, synthesize, Snr};
use ris_cpd::{ArrayGeometry, ExperimentConfig, OfdmConfig, Profile};

type Outcome = (bool, String);

fn desk() -> ExperimentConfig {
    ExperimentConfig::profile(Profile::Desk)
}

fn noiseless_exactness() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk();
    cfg.sweep.variable = SweepVariable::P;
    cfg.sweep.values = vec![cfg.ofdm.p as f64];
    cfg.sweep.noiseless = true;
    cfg.run.methods = vec![Method::Vs];
    let (mut worst_fit, mut worst_nmse) = (0.0f64, 0.0f64);
    for trial in 0..10 {
        let pt = cfg.point(0).unwrap();
        let (ch, tc) = draw_scenario(&cfg, &pt, cfg.run.seed + trial as u64).unwrap();
        let y = synthesize(&composite_map(&ch), &tc, &pt.ofdm, Snr::Noiseless, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().y;
        let fit = vs_fit(&y, cfg.paths()).unwrap();
        let err = cp_reconstruct(&fit.factors).unwrap().sub(&y).unwrap().frobenius_norm() / y.frobenius_norm();
        worst_fit = worst_fit.max(err);
        let out = run_trial(&cfg, trial, 0).unwrap();
        let nmse = out.records[0].nmse;
        worst_nmse = worst_nmse.max(if out.records[0].ok() { nmse } else { f64::INFINITY });
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst_fit < 1e-8 && worst_nmse < 1e-6 && secs < 10.0,
        format!("max tensor rel err {worst_fit:.2e}, max NMSE {worst_nmse:.2e}, {secs:.2} s"),
    )
}

fn als_monotone() -> Outcome {
    let cfg = desk();
    let pt = cfg.point(0).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..20u64 {
        let (ch, tc) = draw_scenario(&cfg, &pt, 100 + trial).unwrap();
        let y = synthesize(&composite_map(&ch), &tc, &pt.ofdm, Snr::Db(10.0), &mut ChaCha8Rng::seed_from_u64(trial)).unwrap().y;
        let fit = als_fit(&y, cfg.paths(), &AlsOptions { seed: trial, ..AlsOptions::default() }).unwrap();
        for w in fit.trace.windows(2) {
            worst = worst.max((w[1] - w[0]) / w[0]);
        }
    }
    (worst <= 1e-9, format!("largest relative increase between sweeps {worst:.2e}"))
}

fn kruskal_arithmetic() -> Outcome {
    let big = kruskal_check(16, 32, 16, 9);
    let mut ok = big.satisfied && big.slack == 7;
    for u in 2..=10 {
        let r = kruskal_check(u, u, 2, u);
        ok &= r.satisfied && r.slack == 0;
    }
    (ok, format!("(16,32,16,9) slack {}; boundary family slack 0 for U=2..10: {ok}", big.slack))
}

fn crb_validation() -> Outcome {
    let cfg = desk();
    let pt = cfg.point(0).unwrap();
    let mut worst = 0.0f64;
    let mut worst_scale = 0.0f64;
    for trial in 0..10u64 {
        let (ch, tc) = draw_scenario(&cfg, &pt, 200 + trial).unwrap();
        let cp = composite_map(&ch);
        let a = fim_analytic(&cp, &tc, &pt.ofdm, 0.1).unwrap();
        let n = fim_numeric(&cp, &tc, &pt.ofdm, 0.1, 1e-5).unwrap();
        worst = worst.max(fim_rel_error(&n, &a));
        let a2 = fim_analytic(&cp, &tc, &pt.ofdm, 0.4).unwrap();
        let scaled = (&a2.fim * 4.0 - &a.fim).norm() / a.fim.norm();
        worst_scale = worst_scale.max(scaled);
    }
    (
        worst < 1e-3 && worst_scale < 1e-10,
        format!("max analytic/numeric rel err {worst:.2e}, max 1/sigma^2 scaling err {worst_scale:.2e}"),
    )
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn mse_crb_trend() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk();
    cfg.run.trials = 200;
    cfg.run.methods = vec![Method::Als, Method::Vs];
    let rows = run_sweep(&cfg).unwrap();
    let summary = summarize(&rows).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut above = true;
    let mut monotone = true;
    let mut notes = Vec::new();
    for method in [Method::Als, Method::Vs] {
        let s: Vec<_> = summary.iter().filter(|r| r.method == method).collect();
        for (k, class) in REPORT_CLASSES.iter().enumerate() {
            for r in &s {
                if !(r.mse[k] > r.crb[k]) {
                    above = false;
                    notes.push(format!("{method} {class} below bound at {} dB", r.sweep_value));
                }
            }
            for w in s.windows(2) {
                if !(w[1].mse[k] < w[0].mse[k]) {
                    monotone = false;
                    notes.push(format!("{method} {class} not decreasing {}->{} dB", w[0].sweep_value, w[1].sweep_value));
                }
            }
        }
    }
    let top = summary.iter().find(|r| r.method == Method::Als && r.sweep_value == 30.0).unwrap();
    let gaps: Vec<f64> = (0..4).map(|k| db(top.mse[k] / top.crb[k])).collect();
    let close = gaps.iter().all(|&g| g <= 6.0);
    let gap_text = gaps.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>().join("/");
    let ok = above && monotone && close && secs < 600.0;
    let mut detail = format!("ALS angle gap at 30 dB {gap_text} dB, above={above}, monotone={monotone}, {secs:.1} s");
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    (ok, detail)
}

fn method_median(rows: &[ExperimentRecord], m: Method, f: impl Fn(&ExperimentRecord) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.method == m && r.ok()).map(f).collect();
    ris_cpd::harness::median(&v)
}

fn baseline_ordering() -> Outcome {
    let mut cfg = desk();
    cfg.sweep.values = vec![20.0];
    cfg.run.trials = 100;
    cfg.run.methods = vec![Method::Vs, Method::Somp];
    let rows = run_sweep(&cfg).unwrap();
    let vs = method_median(&rows, Method::Vs, |r| r.nmse);
    let somp = method_median(&rows, Method::Somp, |r| r.nmse);
    (vs < somp, format!("median NMSE: cpd-vs {:.2} dB, somp {:.2} dB", db(vs), db(somp)))
}

fn passive_optimality() -> Outcome {
    let geom = ArrayGeometry::new(8, 8, 8, 8).unwrap();
    let m = geom.m() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut slowest) = (f64::INFINITY, 0.0f64);
    for _ in 0..10 {
        let path = CompositePath {
            gain: cis(rng.random_range(-3.0..3.0)) * rng.random_range(0.5..1.5),
            delay: 0.0,
            irs_az: rng.random_range(-3.1..3.1),
            irs_el: rng.random_range(-3.1..3.1),
            aod: 0.0,
            aoa: 0.0,
        };
        let start = Instant::now();
        let (v, _) = optimize_passive(&[path], &geom, 1.0, 0.1, &ManifoldOptions::default()).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let g = v.dotc(&steering_irs(path.irs_az, path.irs_el, &geom)).norm_sqr() / m;
        worst = worst.min(g);
    }
    (worst >= 0.99 && slowest < 1.0, format!("min |v^H a|^2 / M = {worst:.6}, slowest run {:.1} ms", slowest * 1e3))
}

fn estimated_csi_beamforming() -> Outcome {
    let mut cfg = desk();
    cfg.sweep.values = vec![20.0];
    cfg.run.trials = 50;
    cfg.run.methods = vec![Method::Als];
    cfg.beamforming.enabled = true;
    let rows = run_sweep(&cfg).unwrap();
    let est = method_median(&rows, Method::Als, |r| r.se_est);
    let perfect = method_median(&rows, Method::Als, |r| r.se_perfect);
    let failed = rows.iter().filter(|r| !r.ok()).count();
    let violations = rows.iter().filter(|r| !(r.se_perfect >= r.se_est)).count();
    (
        est >= 0.9 * perfect && violations == 0,
        format!("median SE est {est:.3} vs perfect {perfect:.3} ({:.1}%), trials with est > perfect or failed: {violations} ({failed} failed)", 100.0 * est / perfect),
    )
}

fn hybrid_factorization() -> Outcome {
    let mut cfg = desk();
    cfg.sweep.values = vec![20.0];
    cfg.run.trials = 20;
    cfg.run.methods = vec![Method::Vs];
    cfg.beamforming.enabled = true;
    cfg.beamforming.rt = 4;
    cfg.beamforming.rr = 4;
    let mut losses = Vec::new();
    let mut monotone = true;
    for trial in 0..cfg.run.trials {
        let out = run_trial(&cfg, trial, 0).unwrap();
        let r = &out.records[0];
        losses.push(1.0 - r.se_hybrid_perfect / r.se_perfect);
        let h = out.perfect_design.as_ref().and_then(|d| d.hybrid.clone()).expect("hybrid design requested");
        for t in [&h.f_residual, &h.w_residual] {
            monotone &= t.windows(2).all(|w| w[1] <= w[0]);
        }
    }
    let med = ris_cpd::harness::median(&losses);
    (med <= 0.10 && monotone, format!("median hybrid SE loss {:.2}%, residual traces nonincreasing: {monotone}", 100.0 * med))
}

fn oracle_equivalences() -> Outcome {
    let geom = ArrayGeometry::new(8, 8, 8, 8).unwrap();
    let ofdm = OfdmConfig::new(128, 8, 0.32e9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_h, mut worst_e) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let ch = random_realization(2, 2, 100e-9, &mut rng).unwrap();
        let cp = composite_map(&ch);
        let v = CVec::from_fn(geom.m(), |_, _| cis(rng.random_range(-3.1..3.1)));
        let p = rng.random_range(1..=ofdm.p());
        let (g, r) = (freq_channel_g(&ch, &geom, &ofdm, p), freq_channel_r(&ch, &geom, &ofdm, p));
        worst_h = worst_h.max(rel_error(&cascade_from_composite(&cp, &geom, &ofdm, p), &cascade_channel(&g, &r).unwrap()));
        let e = effective_channel(&cp, &v, &geom, &ofdm, p).unwrap();
        worst_e = worst_e.max(rel_error(&e, &effective_channel_from_links(&g, &r, &v).unwrap()));
    }
    (worst_h < 1e-10 && worst_e < 1e-10, format!("max rel err cascade {worst_h:.2e}, effective {worst_e:.2e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("noiseless exactness", noiseless_exactness),
        ("ALS monotonicity", als_monotone),
        ("Kruskal arithmetic", kruskal_arithmetic),
        ("CRB validation", crb_validation),
        ("MSE/CRB ordering and trend", mse_crb_trend),
        ("baseline ordering", baseline_ordering),
        ("passive beamforming optimality", passive_optimality),
        ("beamforming with estimated CSI", estimated_csi_beamforming),
        ("hybrid factorization", hybrid_factorization),
        ("oracle equivalences", oracle_equivalences),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let (ok, detail) = f();
        failed += usize::from(!ok);
        println!("{} [{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    let ran = if only.is_some() { 1 } else { criteria.len() };
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
