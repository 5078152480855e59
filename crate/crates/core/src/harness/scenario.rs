//! Scenario files (TOML) and their translation into domain objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{tdoa_pair, AntennaPreset, ChannelParams, PropagationPresets, TdoaNoiseParams};
use crate::error::{Error, Result};
use crate::fingerprint::{grid_points, CircularTrackParams};
use crate::geometry::{distance, Antenna, BaseStation, Point2D, Rect, Role};
use crate::mobility::WaypointModelParams;
use crate::receiver::{ReceiverConfig, SignalSpec};
use crate::solver::{AntennaModel, SearchRegion};

pub const SIM_8X8: &str = include_str!("../../scenarios/sim_8x8.toml");
pub const FP_3X3: &str = include_str!("../../scenarios/fp_3x3.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SimRssd,
    SimRssdTdoa,
    FpRssd,
    FpRssdTdoa,
}

impl Mode {
    pub fn is_fingerprint(self) -> bool {
        matches!(self, Mode::FpRssd | Mode::FpRssdTdoa)
    }

    pub fn uses_tdoa(self) -> bool {
        matches!(self, Mode::SimRssdTdoa | Mode::FpRssdTdoa)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SimRssd => "sim_rssd",
            Mode::SimRssdTdoa => "sim_rssd_tdoa",
            Mode::FpRssd => "fp_rssd",
            Mode::FpRssdTdoa => "fp_rssd_tdoa",
        }
    }

    /// Same pathway with the TDOA assist toggled.
    pub fn with_tdoa(self, tdoa: bool) -> Mode {
        match (self.is_fingerprint(), tdoa) {
            (false, false) => Mode::SimRssd,
            (false, true) => Mode::SimRssdTdoa,
            (true, false) => Mode::FpRssd,
            (true, true) => Mode::FpRssdTdoa,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim_rssd" => Ok(Mode::SimRssd),
            "sim_rssd_tdoa" => Ok(Mode::SimRssdTdoa),
            "fp_rssd" => Ok(Mode::FpRssd),
            "fp_rssd_tdoa" => Ok(Mode::FpRssdTdoa),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

pub fn antenna_label(model: AntennaModel) -> &'static str {
    match model {
        AntennaModel::Omni => "omni",
        AntennaModel::Directional => "directional",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub role: Role,
    #[serde(default = "default_gain")]
    pub gain_db: f64,
    /// Fixed boresight; closed-loop runs re-aim steerable antennas every epoch.
    #[serde(default)]
    pub orientation_deg: Option<f64>,
    #[serde(default)]
    pub obstruction_db: f64,
}

fn default_gain() -> f64 {
    6.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobilityConfig {
    Waypoint(WaypointModelParams),
    Circular(CircularTrackParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSource {
    /// RSS and TDOA straight from the statistical channel model.
    Channel,
    /// Synthesized waveforms through the correlation receiver.
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintConfig {
    pub grid_step: f64,
    pub area: Rect,
    #[serde(default)]
    pub exclude: Vec<[f64; 2]>,
    /// Grid points within this distance of a station are dropped.
    #[serde(default)]
    pub exclusion_radius: f64,
    /// Shadow-fading std of the reference survey, dB.
    #[serde(default)]
    pub db_sigma_beta: f64,
    /// Load references from this CSV instead of synthesizing them.
    #[serde(default)]
    pub db_file: Option<PathBuf>,
    #[serde(default = "default_source")]
    pub source: MeasurementSource,
}

fn default_source() -> MeasurementSource {
    MeasurementSource::Channel
}

impl FingerprintConfig {
    /// Explicit exclusions plus every grid point near a station.
    pub fn excluded_points(&self, stations: &[BaseStation]) -> Result<Vec<Point2D>> {
        let mut out: Vec<Point2D> = self.exclude.iter().map(|p| Point2D::new(p[0], p[1])).collect();
        for g in grid_points(&self.area, self.grid_step)? {
            if stations
                .iter()
                .any(|b| distance(b.position, g) <= self.exclusion_radius)
            {
                out.push(g);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverScenario {
    #[serde(default = "default_chip_seed")]
    pub chip_seed: u64,
    #[serde(default)]
    pub chips: Option<Vec<i8>>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_upsample")]
    pub upsample_factor: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub noise_std: f64,
    /// Channel RSS that maps to a unit-amplitude pulse, dBm.
    #[serde(default = "default_reference_level")]
    pub reference_level_dbm: f64,
}

fn default_chip_seed() -> u64 {
    2013
}

fn default_sample_rate() -> f64 {
    12.5e9
}

fn default_upsample() -> usize {
    8
}

fn default_window() -> f64 {
    70e-9
}

fn default_reference_level() -> f64 {
    -40.0
}

impl Default for ReceiverScenario {
    fn default() -> Self {
        Self {
            chip_seed: default_chip_seed(),
            chips: None,
            sample_rate: default_sample_rate(),
            upsample_factor: default_upsample(),
            window: default_window(),
            noise_std: 0.0,
            reference_level_dbm: default_reference_level(),
        }
    }
}

impl ReceiverScenario {
    pub fn signal_spec(&self) -> SignalSpec {
        let mut spec = SignalSpec::with_seeded_code(self.chip_seed);
        if let Some(chips) = &self.chips {
            spec.chips = chips.clone();
        }
        spec
    }

    pub fn receiver_config(&self) -> ReceiverConfig {
        let spec = self.signal_spec();
        ReceiverConfig {
            band: spec.band,
            upsample_factor: self.upsample_factor,
            window: self.window,
        }
    }
}

fn default_antenna() -> AntennaModel {
    AntennaModel::Directional
}

fn default_trials() -> usize {
    1
}

fn default_tdoa_noise() -> TdoaNoiseParams {
    TdoaNoiseParams { sigma_tdoa: 330e-12 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(default = "default_antenna")]
    pub antenna: AntennaModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub channel: PropagationPresets,
    #[serde(default = "default_tdoa_noise")]
    pub tdoa_noise: TdoaNoiseParams,
    #[serde(default)]
    pub solver: Option<SearchRegion>,
    pub mobility: MobilityConfig,
    #[serde(default)]
    pub fingerprint: Option<FingerprintConfig>,
    #[serde(default)]
    pub receiver: Option<ReceiverScenario>,
    pub stations: Vec<StationConfig>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// One of the shipped scenarios, by name.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "sim_8x8" => SIM_8X8,
            "fp_3x3" => FP_3X3,
            _ => return None,
        };
        Some(Self::from_toml(text).expect("shipped scenario parses"))
    }

    /// A builtin name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        match Self::builtin(spec) {
            Some(s) => Ok(s),
            None => Self::from_file(Path::new(spec)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.tdoa_noise.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let bs = self.stations();
        let rss = bs.iter().filter(|b| b.role.measures_rss()).count();
        if rss < 2 {
            return Err(Error::TooFewStations {
                required: 2,
                found: rss,
            });
        }
        if self.mode.uses_tdoa() && tdoa_pair(&bs).is_none() {
            return Err(Error::Config(format!(
                "mode {} needs two TDOA-capable stations",
                self.mode.as_str()
            )));
        }
        match &self.mobility {
            MobilityConfig::Waypoint(w) => w.validate()?,
            MobilityConfig::Circular(c) => c.validate()?,
        }
        if self.mode.is_fingerprint() {
            if self.fingerprint.is_none() {
                return Err(Error::Config("fingerprint modes need a [fingerprint] section".into()));
            }
        } else if self.solver.is_none() {
            return Err(Error::Config("simulation modes need a [solver] section".into()));
        }
        Ok(())
    }

    pub fn preset(&self) -> AntennaPreset {
        match self.antenna {
            AntennaModel::Omni => AntennaPreset::OmniOmni,
            AntennaModel::Directional => AntennaPreset::OmniDir,
        }
    }

    /// Propagation constants matching the antenna configuration.
    pub fn active_channel(&self) -> ChannelParams {
        self.channel.get(self.preset())
    }

    /// Stations as configured; RSS stations get a directional antenna only in
    /// directional mode.
    pub fn stations(&self) -> Vec<BaseStation> {
        self.stations
            .iter()
            .map(|c| {
                let antenna = if self.antenna == AntennaModel::Directional && c.role.measures_rss() {
                    Antenna::Directional {
                        gain_db: c.gain_db,
                        orientation: c.orientation_deg.unwrap_or(0.0).to_radians(),
                    }
                } else {
                    Antenna::Omni
                };
                BaseStation::new(c.id, Point2D::new(c.x, c.y), c.role, antenna)
                    .with_obstruction(c.obstruction_db)
            })
            .collect()
    }

    pub fn receiver_or_default(&self) -> ReceiverScenario {
        self.receiver.clone().unwrap_or_default()
    }

    /// Copy with one named parameter overridden, for sweeps.
    pub fn with_param(&self, name: &str, value: &str) -> Result<Scenario> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{name}: {value:?} is not a number")))
        };
        let mut s = self.clone();
        match name {
            "mode" => s.mode = value.parse()?,
            "antenna" => {
                s.antenna = match value {
                    "omni" => AntennaModel::Omni,
                    "directional" => AntennaModel::Directional,
                    other => return Err(Error::Config(format!("unknown antenna {other:?}"))),
                }
            }
            "update_rate" | "speed" | "total_length" | "pause_time" => {
                let MobilityConfig::Waypoint(w) = &mut s.mobility else {
                    return Err(Error::Config(format!("{name} needs a waypoint mobility model")));
                };
                let v = num()?;
                match name {
                    "update_rate" => w.update_rate = v,
                    "speed" => w.speed = v,
                    "total_length" => w.total_length = v,
                    _ => w.pause_time = v,
                }
            }
            "sigma_tdoa" => s.tdoa_noise.sigma_tdoa = num()?,
            "sigma_beta" => {
                let v = num()?;
                match s.preset() {
                    AntennaPreset::OmniOmni => s.channel.omni_omni.sigma_beta = v,
                    AntennaPreset::OmniDir => s.channel.omni_dir.sigma_beta = v,
                }
            }
            "alpha" => {
                let v = num()?;
                match s.preset() {
                    AntennaPreset::OmniOmni => s.channel.omni_omni.alpha = v,
                    AntennaPreset::OmniDir => s.channel.omni_dir.alpha = v,
                }
            }
            "gain_db" => {
                let v = num()?;
                s.stations.iter_mut().for_each(|c| c.gain_db = v);
            }
            "coarse_step" => {
                let r = s
                    .solver
                    .as_mut()
                    .ok_or_else(|| Error::Config("no [solver] section".into()))?;
                r.coarse_step = num()?;
            }
            "trials" => {
                s.trials = value
                    .parse()
                    .map_err(|_| Error::Config(format!("trials: {value:?}")))?
            }
            other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenarios_parse() {
        let sim = Scenario::builtin("sim_8x8").unwrap();
        assert_eq!(sim.stations().len(), 10);
        assert_eq!(sim.mode, Mode::SimRssdTdoa);
        assert_eq!(sim.tdoa_noise.sigma_tdoa, 330e-12);
        let fp = Scenario::builtin("fp_3x3").unwrap();
        let bs = fp.stations();
        assert_eq!(bs[3].position, Point2D::new(3.0, 3.0));
        assert_eq!(tdoa_pair(&bs), Some((0, 1)));
        let fpc = fp.fingerprint.as_ref().unwrap();
        let excluded = fpc.excluded_points(&bs).unwrap();
        // each corner plus its two axis neighbours at 0.25 m
        assert_eq!(excluded.len(), 12);
        assert!(Scenario::builtin("nope").is_none());
    }

    #[test]
    fn omni_mode_strips_patterns() {
        let mut s = Scenario::builtin("sim_8x8").unwrap();
        s.antenna = AntennaModel::Omni;
        assert!(s.stations().iter().all(|b| b.antenna == Antenna::Omni));
        assert_eq!(s.active_channel().alpha, 1.7);
    }

    #[test]
    fn sweep_overrides() {
        let s = Scenario::builtin("sim_8x8").unwrap();
        let t = s.with_param("update_rate", "1").unwrap();
        match t.mobility {
            MobilityConfig::Waypoint(w) => assert_eq!(w.update_rate, 1.0),
            _ => unreachable!(),
        }
        assert_eq!(s.with_param("mode", "sim_rssd").unwrap().mode, Mode::SimRssd);
        assert!(s.with_param("bogus", "1").is_err());
        assert!(s.with_param("update_rate", "fast").is_err());
        assert!(s.with_param("mode", "fp_rssd").is_err());
    }

    #[test]
    fn invalid_files_rejected() {
        assert!(Scenario::from_toml("name = 1").is_err());
        let broken = SIM_8X8.replace("alpha = 2.1", "alpha = 1.0");
        assert!(Scenario::from_toml(&broken).is_err());
    }
}
