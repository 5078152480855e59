use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rssd_loc::fingerprint::write_db_csv;
use rssd_loc::harness::report::{write_summary, Summary};
use rssd_loc::harness::{compare, run_trials, scenario_db, trial_seed, write_run_outputs, Scenario};

#[derive(Parser)]
#[command(name = "rssd", version, about = "RSSD/TDOA indoor localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file, or a built-in name (sim_8x8, fp_3x3)
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write track.csv, theta.csv, trials.csv and summary.csv
    Run(Common),
    /// Re-run a scenario once per value of one parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        /// e.g. update_rate, sigma_tdoa, sigma_beta, mode, antenna, speed
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write the fingerprint reference database of a scenario
    BuildDb(Common),
    /// Paired comparison of the scenario with and without the TDOA assist
    Compare(Common),
}

fn load(c: &Common) -> Result<Scenario> {
    let mut s = Scenario::load(&c.scenario)
        .with_context(|| format!("loading scenario {}", c.scenario))?;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(t) = c.trials {
        if t == 0 {
            bail!("--trials must be at least 1");
        }
        s.trials = t;
    }
    Ok(s)
}

fn print_summary(label: &str, s: &Summary) {
    let theta = s
        .theta_std_mean
        .map(|t| format!(", theta std {:.2} deg", t.to_degrees()))
        .unwrap_or_default();
    println!(
        "{label}: {} trials, rmse median {:.4} m, mean {:.4} m{theta}",
        s.trials, s.rmse_median, s.rmse_mean
    );
}

fn run(c: &Common) -> Result<()> {
    let s = load(c)?;
    let reports = run_trials(&s)?;
    let summary = write_run_outputs(&c.out, &reports)?;
    print_summary(s.mode.as_str(), &summary);
    Ok(())
}

fn sweep(c: &Common, param: &str, values: &[String]) -> Result<()> {
    let base = load(c)?;
    let mut rows = Vec::new();
    for v in values {
        let s = base.with_param(param, v)?;
        let reports = run_trials(&s).with_context(|| format!("{param} = {v}"))?;
        let summary = write_run_outputs(&c.out.join(format!("{param}={v}")), &reports)?;
        print_summary(&format!("{param}={v}"), &summary);
        rows.push((v.clone(), summary));
    }
    std::fs::create_dir_all(&c.out)?;
    let mut f = BufWriter::new(File::create(c.out.join("sweep.csv"))?);
    use std::io::Write;
    let mut buf = Vec::new();
    write_summary(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>(), &mut buf)?;
    let text = String::from_utf8(buf)?;
    for (i, line) in text.lines().enumerate() {
        let head = if i == 0 { param.to_string() } else { rows[i - 1].0.clone() };
        writeln!(f, "{head},{line}")?;
    }
    Ok(())
}

fn build_db(c: &Common) -> Result<()> {
    let s = load(c)?;
    let db = scenario_db(&s, trial_seed(&s, 0))?;
    std::fs::create_dir_all(&c.out)?;
    let path = c.out.join("fingerprint_db.csv");
    write_db_csv(&db, BufWriter::new(File::create(&path)?))?;
    println!("{} reference points written to {}", db.len(), path.display());
    Ok(())
}

fn compare_modes(c: &Common) -> Result<()> {
    let s = load(c)?;
    let without = Scenario {
        mode: s.mode.with_tdoa(false),
        ..s.clone()
    };
    let with = Scenario {
        mode: s.mode.with_tdoa(true),
        ..s.clone()
    };
    let a = run_trials(&with)?;
    let b = run_trials(&without)?;
    let cmp = compare(&a, &b)?;
    std::fs::create_dir_all(&c.out)?;
    write_compare(&c.out.join("compare.csv"), with.mode.as_str(), without.mode.as_str(), &cmp)?;
    println!(
        "{} vs {}: median rmse {:.4} m vs {:.4} m (ratio {:.3}), {} of {} trials better",
        with.mode.as_str(),
        without.mode.as_str(),
        cmp.median_a,
        cmp.median_b,
        cmp.ratio,
        cmp.a_wins,
        cmp.trials
    );
    Ok(())
}

fn write_compare(
    path: &Path,
    a: &str,
    b: &str,
    cmp: &rssd_loc::harness::Comparison,
) -> Result<()> {
    use std::io::Write;
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "mode_a,mode_b,trials,rmse_median_a,rmse_median_b,ratio,a_wins,mean_difference")?;
    writeln!(
        f,
        "{a},{b},{},{:.6},{:.6},{:.6},{},{:.6}",
        cmp.trials, cmp.median_a, cmp.median_b, cmp.ratio, cmp.a_wins, cmp.mean_difference
    )?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep {
            common,
            param,
            values,
        } => sweep(common, param, values),
        Command::BuildDb(c) => build_db(c),
        Command::Compare(c) => compare_modes(c),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
