//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so the lines are
//! always shown.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_grid, brute_force_on_hyperbola, region, room, solver_cfg, C};
use rssd_loc::channel::{simulate_measurements, simulate_rss, simulate_tdoa, ChannelParams, MeasurementSet, TdoaNoiseParams};
use rssd_loc::fingerprint::{circular_track, CircularTrackParams};
use rssd_loc::geometry::{distance, hyperbola_x_of_y, Hyperbola, Point2D};
use rssd_loc::harness::report::median;
use rssd_loc::harness::{run_trial, run_trials, RunReport, Scenario};
use rssd_loc::receiver::{
    estimate_tdoa, generate_signal, rss_from_correlation, template, Correlator, ReceiverConfig,
    SignalSpec,
};
use rssd_loc::solver::{rssd_objective, solve_rssd, solve_rssd_tdoa, AntennaModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sim(mode: &str, antenna: &str, trials: usize) -> Scenario {
    let mut s = Scenario::builtin("sim_8x8").unwrap();
    s = s.with_param("mode", mode).unwrap();
    s = s.with_param("antenna", antenna).unwrap();
    s.trials = trials;
    s
}

fn medians(r: &[RunReport]) -> f64 {
    median(&r.iter().map(|x| x.rmse).collect::<Vec<_>>()).unwrap()
}

fn noiseless_recovery() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for mode in ["sim_rssd", "sim_rssd_tdoa"] {
        let mut s = sim(mode, "directional", 1);
        s.channel.omni_dir.sigma_beta = 0.0;
        s.channel.omni_omni.sigma_beta = 0.0;
        s.tdoa_noise.sigma_tdoa = 0.0;
        let r = run_trial(&s, 0).unwrap();
        worst = worst.max(r.rmse);
        lines.push(format!("{mode} {:.2e} m", r.rmse));
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst < 2e-3 && secs < 30.0, format!("{} (< 2 mm), {secs:.1} s (< 30 s)", lines.join(", ")))
}

struct PairedRuns {
    /// (antenna, rssd, rssd_tdoa)
    runs: Vec<(&'static str, Vec<RunReport>, Vec<RunReport>)>,
    secs: f64,
}

fn paired_runs() -> PairedRuns {
    let started = Instant::now();
    let runs = ["directional", "omni"]
        .into_iter()
        .map(|a| {
            (
                a,
                run_trials(&sim("sim_rssd", a, 100)).unwrap(),
                run_trials(&sim("sim_rssd_tdoa", a, 100)).unwrap(),
            )
        })
        .collect();
    PairedRuns { runs, secs: started.elapsed().as_secs_f64() }
}

fn tdoa_ordering(p: &PairedRuns) -> Outcome {
    let mut pass = p.secs < 600.0;
    let mut parts = Vec::new();
    for (a, rssd, tdoa) in &p.runs {
        let (mr, mt) = (medians(rssd), medians(tdoa));
        let ratio = mr / mt;
        pass &= mt < mr && (1.1..=3.0).contains(&ratio);
        parts.push(format!("{a}: {mt:.3} m vs {mr:.3} m, ratio {ratio:.2}"));
    }
    parts.push(format!("{:.0} s (< 600 s)", p.secs));
    outcome(pass, parts.join("; "))
}

fn directional_ordering(p: &PairedRuns) -> Outcome {
    let (_, dr, dt) = &p.runs[0];
    let (_, or, ot) = &p.runs[1];
    let (dr, dt, or, ot) = (medians(dr), medians(dt), medians(or), medians(ot));
    outcome(
        dr < or && dt < ot,
        format!("rssd {dr:.3} m vs {or:.3} m; rssd_tdoa {dt:.3} m vs {ot:.3} m"),
    )
}

/// Std of θ pooled over every included epoch, antenna and trial.
fn pooled_theta_std(reports: &[RunReport]) -> f64 {
    let th: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.epochs.iter().filter(|e| e.included).flat_map(|e| e.theta.iter().map(|t| t.1)))
        .collect();
    let m = th.iter().sum::<f64>() / th.len() as f64;
    (th.iter().map(|t| (t - m).powi(2)).sum::<f64>() / th.len() as f64).sqrt()
}

fn theta_statistics() -> Outcome {
    let base = sim("sim_rssd_tdoa", "directional", 50);
    let at_1 = run_trials(&base.with_param("update_rate", "1").unwrap()).unwrap();
    let at_2 = run_trials(&base.with_param("update_rate", "2").unwrap()).unwrap();
    let (t1, t2) = (pooled_theta_std(&at_1).to_degrees(), pooled_theta_std(&at_2).to_degrees());
    let higher = at_1.iter().zip(&at_2).filter(|(a, b)| a.theta_std > b.theta_std).count();
    outcome(
        t1 > t2 && (1.0..=15.0).contains(&t2),
        format!("1 Hz {t1:.2} deg > 2 Hz {t2:.2} deg (in [1, 15]); per seed higher at 1 Hz in {higher}/50"),
    )
}

fn fingerprint_ordering() -> Outcome {
    let mut s = Scenario::builtin("fp_3x3").unwrap();
    s.trials = 100;
    let sigma = s.active_channel().sigma_beta;
    let with = run_trials(&s.with_param("mode", "fp_rssd_tdoa").unwrap()).unwrap();
    let without = run_trials(&s.with_param("mode", "fp_rssd").unwrap()).unwrap();
    let mean = |r: &[RunReport]| r.iter().map(|x| x.mean_error).sum::<f64>() / r.len() as f64;
    let (mw, mo) = (mean(&with), mean(&without));
    outcome(
        sigma <= 1.0 && mw <= mo && mw <= 0.35 && mo <= 0.35,
        format!("sigma_beta {sigma} dB: with TDOA {mw:.3} m <= without {mo:.3} m, both <= 0.35 m"),
    )
}

fn solver_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst2, mut worst1): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let mu = Point2D::new(rng.random_range(-3.3..3.3), rng.random_range(-3.3..3.3));
        // antennas aimed at a stale estimate, as in the closed loop
        let aim = Point2D::new(mu.x + rng.random_range(-0.3..0.3), mu.y + rng.random_range(-0.3..0.3));
        let directional = k % 2 == 0;
        let params = if directional { ChannelParams::new(2.1, 1.0) } else { ChannelParams::new(1.7, 2.0) };
        let bs = room(directional, aim);
        let m = simulate_measurements(&bs, mu, &params, &TdoaNoiseParams { sigma_tdoa: 330e-12 }, &mut rng).unwrap();
        let cfg = solver_cfg(bs.clone(), params, directional);
        let pairs: Vec<_> = m.rssd_pairs.iter().map(|p| (p.i, p.j, p.value)).collect();
        let a = solve_rssd(&cfg, &m).unwrap();
        let b = brute_force_grid(&bs, params.alpha, &pairs, region(), 0.01);
        worst2 = worst2.max(distance(a, b));
        let t = m.tdoa.unwrap();
        let c = solve_rssd_tdoa(&cfg, &m).unwrap();
        let d = brute_force_on_hyperbola(&bs, params.alpha, &pairs, t.k, t.l, t.dt, region(), 5e-4);
        worst1 = worst1.max(distance(c, d));
    }
    outcome(
        worst2 <= 0.02 && worst1 <= 1e-3,
        format!("grid: worst {:.2} cm (<= 2 cm); hyperbola: worst {:.3} mm (<= 1 mm)", worst2 * 100.0, worst1 * 1e3),
    )
}

fn receiver_timing() -> Outcome {
    let spec = SignalSpec::with_seeded_code(2013);
    let fs = 12.5e9;
    let cfg = ReceiverConfig::for_spec(&spec);
    let up = 1.0 / (cfg.upsample_factor as f64 * fs);
    let tmpl = template(&spec, fs).unwrap();
    let n = ((spec.train_duration() + spec.record_guard) * fs).ceil() as usize + 1;
    let corr = Correlator::new(&tmpl, n, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = Point2D::new(0.0, 0.0);
    let l = Point2D::new(3.0, 0.0);
    let mut worst: f64 = 0.0;
    for src in [Point2D::new(0.7, 2.1), Point2D::new(2.45, 0.4), Point2D::new(1.5, 1.5)] {
        let (dk, dl) = (distance(k, src), distance(l, src));
        let a = corr.correlate(&generate_signal(&spec, dk / C, -6.0 * dk, fs, 0.0, &mut rng).unwrap()).unwrap();
        let b = corr.correlate(&generate_signal(&spec, dl / C, -6.0 * dl, fs, 0.0, &mut rng).unwrap()).unwrap();
        worst = worst.max((estimate_tdoa(&a, &b) - (dk - dl) / C).abs());
    }
    let a = corr.correlate(&generate_signal(&spec, 4e-9, 0.0, fs, 0.0, &mut rng).unwrap()).unwrap();
    let b = corr.correlate(&generate_signal(&spec, 4e-9, -6.0, fs, 0.0, &mut rng).unwrap()).unwrap();
    let ratio = rss_from_correlation(&a, cfg.window).unwrap() / rss_from_correlation(&b, cfg.window).unwrap();
    // the squared correlation output on the amplitude-dB scale
    let db = 20.0 * ratio.log10();
    outcome(
        worst < up && worst < 10e-12 && (db - 12.0).abs() <= 0.5,
        format!(
            "TDOA worst error {:.2} ps (< {:.0} ps); RSS difference {db:.2} dB (12 +/- 0.5), {:.2} dB as power ratio",
            worst * 1e12,
            up * 1e12,
            10.0 * ratio.log10()
        ),
    )
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();

    let mut cycle: f64 = 0.0;
    let mut argmin: f64 = 0.0;
    for _ in 0..20 {
        let mu = Point2D::new(rng.random_range(-3.3..3.3), rng.random_range(-3.3..3.3));
        let bs = room(true, mu);
        let params = ChannelParams::new(2.1, 1.0);
        let rss = simulate_rss(&bs, mu, &params, &mut rng).unwrap();
        let tdoa = simulate_tdoa(&bs, mu, &TdoaNoiseParams { sigma_tdoa: 330e-12 }, &mut rng).unwrap();
        let m = MeasurementSet::from_rss(&rss, tdoa);
        for i in 0..8 {
            for j in i + 1..8 {
                for k in j + 1..8 {
                    cycle = cycle.max((m.pair(i, j).unwrap() + m.pair(j, k).unwrap() - m.pair(i, k).unwrap()).abs());
                }
            }
        }
        let shifted = MeasurementSet::from_rss(&rss.shifted(rng.random_range(-30.0..30.0)), tdoa);
        let cfg = solver_cfg(bs, params, true);
        argmin = argmin.max(distance(solve_rssd(&cfg, &m).unwrap(), solve_rssd(&cfg, &shifted).unwrap()));
        argmin = argmin.max(distance(solve_rssd_tdoa(&cfg, &m).unwrap(), solve_rssd_tdoa(&cfg, &shifted).unwrap()));
        let q = rssd_objective(&cfg, &m, mu).unwrap();
        let qs = rssd_objective(&cfg, &shifted, mu).unwrap();
        if (q - qs).abs() > 1e-9 * (1.0 + q) {
            failures.push("objective shift");
        }
    }
    if cycle > 1e-12 {
        failures.push("cycle consistency");
    }
    if argmin > 1e-6 {
        failures.push("argmin invariance");
    }

    let mut residual: f64 = 0.0;
    for _ in 0..1000 {
        let s = rng.random_range(0.5..10.0);
        let h = Hyperbola::new(s, rng.random_range(-0.98..0.98) * s).unwrap();
        let y = rng.random_range(-20.0..20.0);
        let p = Point2D::new(hyperbola_x_of_y(&h, y).unwrap(), y);
        let d = distance(p, Point2D::new(-s, 0.0)) - distance(p, Point2D::new(s, 0.0));
        residual = residual.max((d - 2.0 * h.range_difference).abs());
    }
    if residual >= 1e-9 {
        failures.push("hyperbola residual");
    }

    let circle = CircularTrackParams::default();
    let radius = circular_track(&circle)
        .iter()
        .map(|p| (distance(*p, circle.center) - circle.radius).abs())
        .fold(0.0, f64::max);
    if radius > 1e-12 {
        failures.push("circle radius");
    }

    let s = Scenario::builtin("sim_8x8").unwrap();
    let deterministic = run_trial(&s, 11).unwrap() == run_trial(&s, 11).unwrap();
    if !deterministic {
        failures.push("determinism");
    }
    let mut om = s.clone();
    om.antenna = AntennaModel::Omni;
    if run_trial(&om, 2).unwrap() != run_trial(&om, 2).unwrap() {
        failures.push("determinism (omni)");
    }

    outcome(
        failures.is_empty(),
        format!(
            "cycle {cycle:.1e} dB, argmin shift {argmin:.1e} m, hyperbola residual {residual:.1e} m, circle {radius:.1e} m, deterministic {deterministic}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |n: &'static str, o: Outcome| {
        println!("{} {n}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    report("1 noiseless recovery", noiseless_recovery());
    let paired = paired_runs();
    report("2 TDOA-assist ordering", tdoa_ordering(&paired));
    report("3 directional-antenna ordering", directional_ordering(&paired));
    report("4 misorientation statistics", theta_statistics());
    report("5 fingerprinting ordering", fingerprint_ordering());
    report("6 solver-oracle equivalence", solver_oracles());
    report("7 receiver timing and RSS", receiver_timing());
    report("8 invariant suites", invariant_suites());
    let failed: Vec<_> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.0} s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
