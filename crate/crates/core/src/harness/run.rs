//! Closed-loop simulation and fingerprinting experiments.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    rss_stations, simulate_rss, simulate_tdoa, ChannelParams, MeasurementSet, RssVector,
    TdoaMeasurement,
};
use crate::error::{Error, Result};
use crate::fingerprint::{
    build_db, circular_track, coarse_estimate, read_db_csv, refine_with_tdoa, FingerprintDB,
};
use crate::geometry::{distance, BaseStation, Point2D, Role, SPEED_OF_LIGHT};
use crate::mobility::{
    generate_track, signed_misorientation, update_orientation, OrientationState, Track,
};
use crate::receiver::{
    estimate_tdoa, generate_signal, rss_from_correlation, template, CorrelationResult, Correlator,
};
use crate::solver::{solve_rssd, solve_rssd_tdoa, AntennaModel, SolverConfig};

use super::scenario::{MeasurementSource, MobilityConfig, Mode, ReceiverScenario, Scenario};

const TRACK_STREAM: u64 = 1;
const MEASUREMENT_STREAM: u64 = 2;
const DB_STREAM: u64 = 3;

/// Rate used to timestamp the circular fingerprinting track, Hz.
const CIRCULAR_RATE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub t: f64,
    pub truth: Point2D,
    pub estimate: Point2D,
    pub error: f64,
    /// Counted in the aggregate metrics.
    pub included: bool,
    /// Signed misorientation per steerable station id, rad.
    pub theta: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub antenna: AntennaModel,
    pub trial: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub rmse: f64,
    pub mean_error: f64,
    /// Population std of the signed misorientation over included epochs and antennas.
    pub theta_std: Option<f64>,
    pub runtime_s: f64,
}

/// Everything but the wall-clock runtime.
impl PartialEq for RunReport {
    fn eq(&self, o: &Self) -> bool {
        self.scenario == o.scenario
            && self.mode == o.mode
            && self.antenna == o.antenna
            && self.trial == o.trial
            && self.seed == o.seed
            && self.epochs == o.epochs
            && self.rmse.to_bits() == o.rmse.to_bits()
            && self.mean_error.to_bits() == o.mean_error.to_bits()
            && self.theta_std.map(f64::to_bits) == o.theta_std.map(f64::to_bits)
    }
}

impl RunReport {
    /// Recomputes `rmse`, `mean_error` and `theta_std` from the epoch records.
    pub fn recompute(&mut self) {
        let (rmse, mean_error, theta_std) = metrics(&self.epochs);
        self.rmse = rmse;
        self.mean_error = mean_error;
        self.theta_std = theta_std;
    }
}

fn metrics(epochs: &[EpochRecord]) -> (f64, f64, Option<f64>) {
    let errs: Vec<f64> = epochs.iter().filter(|e| e.included).map(|e| e.error).collect();
    let n = errs.len().max(1) as f64;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mean_error = errs.iter().sum::<f64>() / n;
    let thetas: Vec<f64> = epochs
        .iter()
        .filter(|e| e.included)
        .flat_map(|e| e.theta.iter().map(|t| t.1))
        .collect();
    let theta_std = (!thetas.is_empty()).then(|| {
        let m = thetas.iter().sum::<f64>() / thetas.len() as f64;
        (thetas.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / thetas.len() as f64).sqrt()
    });
    (rmse, mean_error, theta_std)
}

/// Seed of trial `trial`.
pub fn trial_seed(s: &Scenario, trial: usize) -> u64 {
    s.seed.wrapping_add(trial as u64)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// First trial of the scenario.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    run_trial(s, 0)
}

/// All `s.trials` trials, run in parallel, returned in trial order.
pub fn run_trials(s: &Scenario) -> Result<Vec<RunReport>> {
    (0..s.trials).into_par_iter().map(|t| run_trial(s, t)).collect()
}

pub fn run_trial(s: &Scenario, trial: usize) -> Result<RunReport> {
    s.validate()?;
    let started = Instant::now();
    let seed = trial_seed(s, trial);
    let epochs = if s.mode.is_fingerprint() {
        run_fingerprint(s, seed)?
    } else {
        run_closed_loop(s, seed)?
    };
    let mut report = RunReport {
        scenario: s.name.clone(),
        mode: s.mode,
        antenna: s.antenna,
        trial,
        seed,
        epochs,
        rmse: 0.0,
        mean_error: 0.0,
        theta_std: None,
        runtime_s: 0.0,
    };
    report.recompute();
    report.runtime_s = started.elapsed().as_secs_f64();
    Ok(report)
}

fn steerable_thetas(
    state: &OrientationState,
    bs: &[BaseStation],
    truth: Point2D,
) -> Result<Vec<(u32, f64)>> {
    let mut out = Vec::new();
    for (i, b) in bs.iter().enumerate() {
        if b.role == Role::TdoaOnly || state.boresights[i].is_none() {
            continue;
        }
        out.push((b.id, signed_misorientation(state, i, b, truth)?));
    }
    Ok(out)
}

fn simulation_track(s: &Scenario, seed: u64) -> Result<Track> {
    match &s.mobility {
        MobilityConfig::Waypoint(w) => generate_track(w, &mut stream(seed, TRACK_STREAM)),
        MobilityConfig::Circular(c) => Ok(Track::from_points(&circular_track(c), CIRCULAR_RATE)),
    }
}

fn run_closed_loop(s: &Scenario, seed: u64) -> Result<Vec<EpochRecord>> {
    let bs = s.stations();
    let params = s.active_channel();
    let region = s.solver.clone().ok_or(Error::EmptyRegion)?;
    let track = simulation_track(s, seed)?;
    let Some(first) = track.epochs.first() else {
        return Ok(Vec::new());
    };
    let mut rng = stream(seed, MEASUREMENT_STREAM);
    let mut state = OrientationState::initial(&bs, first.position);
    let mut out = Vec::with_capacity(track.len());
    for (k, e) in track.epochs.iter().enumerate() {
        let mut step = || -> Result<(Point2D, Vec<(u32, f64)>)> {
            let now = state.apply(&bs);
            let rss = simulate_rss(&now, e.position, &params, &mut rng)?;
            let tdoa = simulate_tdoa(&now, e.position, &s.tdoa_noise, &mut rng)?;
            let m = MeasurementSet::from_rss(&rss, tdoa);
            let cfg = SolverConfig {
                params,
                bs: now.clone(),
                region: region.clone(),
                antenna_model: s.antenna,
            };
            let est = match s.mode {
                Mode::SimRssdTdoa => solve_rssd_tdoa(&cfg, &m)?,
                _ => solve_rssd(&cfg, &m)?,
            };
            let theta = steerable_thetas(&state, &now, e.position)?;
            Ok((est, theta))
        };
        let (estimate, theta) = step().map_err(|err| err.at_epoch(k))?;
        if s.antenna == AntennaModel::Directional {
            state = update_orientation(&state, &bs, estimate);
        }
        out.push(EpochRecord {
            t: e.t,
            truth: e.position,
            estimate,
            error: distance(e.position, estimate),
            included: k > 0,
            theta,
        });
    }
    Ok(out)
}

/// Reference database of a fingerprinting scenario for the given trial seed.
pub fn scenario_db(s: &Scenario, seed: u64) -> Result<FingerprintDB> {
    let fp = s
        .fingerprint
        .as_ref()
        .ok_or_else(|| Error::Config("scenario has no [fingerprint] section".into()))?;
    if let Some(path) = &fp.db_file {
        let db = read_db_csv(std::fs::File::open(path)?)?;
        let n = rss_stations(&s.stations()).len();
        if db.width() != n {
            return Err(Error::LengthMismatch {
                left: db.width(),
                right: n,
            });
        }
        return Ok(db);
    }
    let bs = s.stations();
    let mut survey: ChannelParams = s.active_channel();
    survey.sigma_beta = fp.db_sigma_beta;
    let excluded = fp.excluded_points(&bs)?;
    build_db(
        &bs,
        &fp.area,
        fp.grid_step,
        &excluded,
        &survey,
        &mut stream(seed, DB_STREAM),
    )
}

/// Correlation receiver front end for the fingerprinting set-up.
struct ReceiverChain {
    cfg: ReceiverScenario,
    spec: crate::receiver::SignalSpec,
    correlator: Correlator,
}

impl ReceiverChain {
    fn new(cfg: ReceiverScenario) -> Result<Self> {
        let spec = cfg.signal_spec();
        let tmpl = template(&spec, cfg.sample_rate)?;
        let record_len =
            ((spec.train_duration() + spec.record_guard) * cfg.sample_rate).ceil() as usize + 1;
        let correlator = Correlator::new(&tmpl, record_len, cfg.receiver_config())?;
        Ok(Self {
            cfg,
            spec,
            correlator,
        })
    }

    fn observe<R: Rng + ?Sized>(
        &self,
        b: &BaseStation,
        power_dbm: f64,
        mu: Point2D,
        rng: &mut R,
    ) -> Result<CorrelationResult> {
        let delay = distance(b.position, mu) / SPEED_OF_LIGHT;
        let atten = power_dbm - self.cfg.reference_level_dbm;
        let r = generate_signal(
            &self.spec,
            delay,
            atten,
            self.cfg.sample_rate,
            self.cfg.noise_std,
            rng,
        )?;
        self.correlator.correlate(&r)
    }

    /// Replaces channel RSS and TDOA with values read off the correlation output.
    fn measure<R: Rng + ?Sized>(
        &self,
        bs: &[BaseStation],
        mu: Point2D,
        rss: &RssVector,
        tdoa: Option<TdoaMeasurement>,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Option<TdoaMeasurement>)> {
        let mut values = Vec::with_capacity(rss.values.len());
        let mut peaks = vec![None; bs.len()];
        for (&i, &p) in rss.stations.iter().zip(&rss.values) {
            let c = self.observe(&bs[i], p, mu, rng)?;
            values.push(10.0 * rss_from_correlation(&c, self.cfg.window)?.log10());
            peaks[i] = Some(c);
        }
        let tdoa = match tdoa {
            Some(t) => {
                let mut peak = |i: usize| -> Result<CorrelationResult> {
                    match peaks[i].take() {
                        Some(c) => Ok(c),
                        // TDOA-only station: nominal power, no RSS use
                        None => self.observe(&bs[i], self.cfg.reference_level_dbm, mu, rng),
                    }
                };
                let (ck, cl) = (peak(t.k)?, peak(t.l)?);
                Some(TdoaMeasurement {
                    dt: estimate_tdoa(&ck, &cl),
                    ..t
                })
            }
            None => None,
        };
        Ok((values, tdoa))
    }
}

fn run_fingerprint(s: &Scenario, seed: u64) -> Result<Vec<EpochRecord>> {
    let bs = s.stations();
    let params = s.active_channel();
    let fp = s
        .fingerprint
        .as_ref()
        .ok_or_else(|| Error::Config("scenario has no [fingerprint] section".into()))?;
    let db = scenario_db(s, seed)?;
    let track = simulation_track(s, seed)?;
    let receiver = match fp.source {
        MeasurementSource::Receiver => Some(ReceiverChain::new(s.receiver_or_default())?),
        MeasurementSource::Channel => None,
    };
    let state = OrientationState {
        boresights: bs.iter().map(BaseStation::orientation).collect(),
        last_estimate: Point2D::default(),
    };
    let mut rng = stream(seed, MEASUREMENT_STREAM);
    let mut out = Vec::with_capacity(track.len());
    for (k, e) in track.epochs.iter().enumerate() {
        let mut step = || -> Result<EpochRecord> {
            let rss = simulate_rss(&bs, e.position, &params, &mut rng)?;
            let tdoa = simulate_tdoa(&bs, e.position, &s.tdoa_noise, &mut rng)?;
            let (values, tdoa) = match &receiver {
                Some(rx) => rx.measure(&bs, e.position, &rss, tdoa, &mut rng)?,
                None => (rss.values.clone(), tdoa),
            };
            let coarse = coarse_estimate(&db, &values)?;
            let estimate = match (s.mode, tdoa) {
                (Mode::FpRssdTdoa, Some(t)) => refine_with_tdoa(coarse, &t, &bs)?,
                (Mode::FpRssdTdoa, None) => return Err(Error::MissingTdoa),
                _ => coarse,
            };
            Ok(EpochRecord {
                t: e.t,
                truth: e.position,
                estimate,
                error: distance(e.position, estimate),
                included: true,
                theta: steerable_thetas(&state, &bs, e.position)?,
            })
        };
        out.push(step().map_err(|err| err.at_epoch(k))?);
    }
    Ok(out)
}
