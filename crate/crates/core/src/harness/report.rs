//! Summary statistics and report files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::AntennaModel;

use super::run::RunReport;
use super::scenario::Mode;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub antenna: AntennaModel,
    pub trials: usize,
    pub rmse_median: f64,
    pub rmse_mean: f64,
    pub rmse_min: f64,
    pub rmse_max: f64,
    pub mean_error_mean: f64,
    /// Median and mean over trials of the per-trial θ std, rad.
    pub theta_std_median: Option<f64>,
    pub theta_std_mean: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn aggregate(reports: &[RunReport]) -> Result<Summary> {
    let first = reports.first().ok_or(Error::EmptyInput)?;
    let rmse: Vec<f64> = reports.iter().map(|r| r.rmse).collect();
    let errs: Vec<f64> = reports.iter().map(|r| r.mean_error).collect();
    let theta: Vec<f64> = reports.iter().filter_map(|r| r.theta_std).collect();
    Ok(Summary {
        mode: first.mode,
        antenna: first.antenna,
        trials: reports.len(),
        rmse_median: median(&rmse).unwrap_or(f64::NAN),
        rmse_mean: mean(&rmse).unwrap_or(f64::NAN),
        rmse_min: rmse.iter().copied().fold(f64::INFINITY, f64::min),
        rmse_max: rmse.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_error_mean: mean(&errs).unwrap_or(f64::NAN),
        theta_std_median: median(&theta),
        theta_std_mean: mean(&theta),
    })
}

/// Paired statistics of two runs over the same trial seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub trials: usize,
    pub median_a: f64,
    pub median_b: f64,
    /// `median_b / median_a`
    pub ratio: f64,
    /// Trials where `a` has the strictly lower RMSE.
    pub a_wins: usize,
    pub mean_difference: f64,
}

pub fn compare(a: &[RunReport], b: &[RunReport]) -> Result<Comparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.seed != y.seed) {
        return Err(Error::InvalidParameter(format!(
            "unpaired trials: seed {} vs {}",
            x.seed, y.seed
        )));
    }
    let ra: Vec<f64> = a.iter().map(|r| r.rmse).collect();
    let rb: Vec<f64> = b.iter().map(|r| r.rmse).collect();
    let median_a = median(&ra).unwrap_or(f64::NAN);
    let median_b = median(&rb).unwrap_or(f64::NAN);
    Ok(Comparison {
        trials: a.len(),
        median_a,
        median_b,
        ratio: median_b / median_a,
        a_wins: ra.iter().zip(&rb).filter(|(x, y)| x < y).count(),
        mean_difference: ra.iter().zip(&rb).map(|(x, y)| y - x).sum::<f64>() / a.len() as f64,
    })
}

/// `t,x,y,x_hat,y_hat,err` for one trial.
pub fn write_track_report<W: Write>(r: &RunReport, mut out: W) -> Result<()> {
    writeln!(out, "t,x,y,x_hat,y_hat,err")?;
    for e in &r.epochs {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            e.t, e.truth.x, e.truth.y, e.estimate.x, e.estimate.y, e.error
        )?;
    }
    Ok(())
}

/// `t,bs_id,theta_deg` for one trial, signed.
pub fn write_theta_report<W: Write>(r: &RunReport, mut out: W) -> Result<()> {
    writeln!(out, "t,bs_id,theta_deg")?;
    for e in &r.epochs {
        for (id, th) in &e.theta {
            writeln!(out, "{:.6},{},{:.6}", e.t, id, th.to_degrees())?;
        }
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_summary<W: Write>(rows: &[Summary], mut out: W) -> Result<()> {
    writeln!(out, "mode,trials,rmse_median,rmse_mean,theta_std_deg")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            s.mode.as_str(),
            s.trials,
            s.rmse_median,
            s.rmse_mean,
            opt(s.theta_std_mean.map(f64::to_degrees))
        )?;
    }
    Ok(())
}

/// One line per trial: `trial,seed,rmse,mean_error,theta_std_deg,runtime_s`.
pub fn write_trials<W: Write>(reports: &[RunReport], mut out: W) -> Result<()> {
    writeln!(out, "trial,seed,rmse,mean_error,theta_std_deg,runtime_s")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{:.3}",
            r.trial,
            r.seed,
            r.rmse,
            r.mean_error,
            opt(r.theta_std.map(f64::to_degrees)),
            r.runtime_s
        )?;
    }
    Ok(())
}

/// Writes `track.csv` and `theta.csv` for the first trial, `trials.csv` and
/// `summary.csv` for all of them.
pub fn write_run_outputs(dir: &Path, reports: &[RunReport]) -> Result<Summary> {
    let summary = aggregate(reports)?;
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_track_report(&reports[0], file("track.csv")?)?;
    write_theta_report(&reports[0], file("theta.csv")?)?;
    write_trials(reports, file("trials.csv")?)?;
    write_summary(std::slice::from_ref(&summary), file("summary.csv")?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{run_trial, EpochRecord};
    use crate::harness::scenario::Scenario;
    use crate::geometry::Point2D;

    fn fake(seed: u64, rmse: f64) -> RunReport {
        RunReport {
            scenario: "x".into(),
            mode: Mode::SimRssd,
            antenna: AntennaModel::Omni,
            trial: seed as usize,
            seed,
            epochs: vec![EpochRecord {
                t: 0.0,
                truth: Point2D::default(),
                estimate: Point2D::new(rmse, 0.0),
                error: rmse,
                included: true,
                theta: vec![],
            }],
            rmse,
            mean_error: rmse,
            theta_std: None,
            runtime_s: 0.0,
        }
    }

    #[test]
    fn aggregate_examples() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
        let one = aggregate(&[fake(1, 0.4)]).unwrap();
        assert_eq!((one.rmse_median, one.rmse_mean), (0.4, 0.4));
        let two = aggregate(&[fake(1, 0.4), fake(1, 0.4)]).unwrap();
        assert_eq!(two.rmse_median, 0.4);
        let three = aggregate(&[fake(1, 0.1), fake(2, 0.9), fake(3, 0.2)]).unwrap();
        assert_eq!(three.rmse_median, 0.2);
        assert_eq!(median(&[1.0, 2.0, 3.0, 10.0]), Some(2.5));
    }

    #[test]
    fn compare_pairs() {
        let a = [fake(1, 0.1), fake(2, 0.5)];
        let b = [fake(1, 0.3), fake(2, 0.4)];
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.a_wins, 1);
        assert!((c.ratio - 0.35 / 0.3).abs() < 1e-12);
        assert!(compare(&a, &b[..1]).is_err());
        assert!(compare(&a, &[fake(5, 0.1), fake(2, 0.1)]).is_err());
    }

    #[test]
    fn csv_files() {
        let s = Scenario::builtin("sim_8x8").unwrap();
        let r = run_trial(&s, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_outputs(dir.path(), std::slice::from_ref(&r)).unwrap();
        let track = std::fs::read_to_string(dir.path().join("track.csv")).unwrap();
        assert_eq!(track.lines().next(), Some("t,x,y,x_hat,y_hat,err"));
        assert_eq!(track.lines().count(), r.epochs.len() + 1);
        let theta = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
        assert_eq!(theta.lines().count(), 8 * r.epochs.len() + 1);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.lines().nth(1).unwrap().starts_with("sim_rssd_tdoa,1,"));
    }
}
