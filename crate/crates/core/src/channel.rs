//! Log-distance path loss with Gaussian shadow fading, the cosine antenna pattern, and
//! synthetic RSSD/TDOA measurement generation.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, normalize_angle, Antenna, BaseStation, Point2D, SPEED_OF_LIGHT};

/// Propagation constants of the log-distance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Shadow-fading standard deviation, dB.
    pub sigma_beta: f64,
    /// Received power at the reference distance, dBm.
    #[serde(default = "default_p0")]
    pub p0: f64,
    /// Reference distance, m.
    #[serde(default = "default_d0")]
    pub d0: f64,
}

fn default_p0() -> f64 {
    -40.0
}

fn default_d0() -> f64 {
    1.0
}

impl ChannelParams {
    pub fn new(alpha: f64, sigma_beta: f64) -> Self {
        Self {
            alpha,
            sigma_beta,
            p0: default_p0(),
            d0: default_d0(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.sigma_beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "shadow-fading std must be non-negative, got {}",
                self.sigma_beta
            )));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference distance must be positive, got {}",
                self.d0
            )));
        }
        Ok(())
    }

    pub fn noiseless(mut self) -> Self {
        self.sigma_beta = 0.0;
        self
    }
}

/// Transmit/receive antenna combination whose propagation constants are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaPreset {
    OmniOmni,
    OmniDir,
}

/// Both propagation-constant presets.
///
/// The shipped values are placeholders: only the ordering (directional receive antennas
/// raise the exponent and lower the fading spread) is load-bearing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationPresets {
    pub omni_omni: ChannelParams,
    pub omni_dir: ChannelParams,
}

impl Default for PropagationPresets {
    fn default() -> Self {
        Self {
            omni_omni: ChannelParams::new(1.7, 2.0),
            omni_dir: ChannelParams::new(2.1, 1.0),
        }
    }
}

impl PropagationPresets {
    pub fn validate(&self) -> Result<()> {
        self.omni_omni.validate()?;
        self.omni_dir.validate()?;
        if self.omni_dir.alpha < self.omni_omni.alpha {
            return Err(Error::InvalidParameter(
                "omni/dir path-loss exponent must not be below the omni/omni one".into(),
            ));
        }
        if self.omni_dir.sigma_beta > self.omni_omni.sigma_beta {
            return Err(Error::InvalidParameter(
                "omni/dir shadow fading must not exceed the omni/omni one".into(),
            ));
        }
        Ok(())
    }

    pub fn get(&self, preset: AntennaPreset) -> ChannelParams {
        match preset {
            AntennaPreset::OmniOmni => self.omni_omni,
            AntennaPreset::OmniDir => self.omni_dir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TdoaNoiseParams {
    /// Standard deviation of the TDOA error, s.
    pub sigma_tdoa: f64,
}

impl TdoaNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_tdoa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "TDOA std must be non-negative, got {}",
                self.sigma_tdoa
            )));
        }
        Ok(())
    }
}

/// `P_ij = P_i - P_j` for stations `i < j` (indices into the station slice).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssdPair {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Time difference `dt = t_k - t_l` between stations `k` and `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaMeasurement {
    pub k: usize,
    pub l: usize,
    pub dt: f64,
}

/// Per-station RSS in dBm for the stations that measure it.
#[derive(Debug, Clone, PartialEq)]
pub struct RssVector {
    pub stations: Vec<usize>,
    pub values: Vec<f64>,
}

impl RssVector {
    pub fn shifted(&self, offset: f64) -> RssVector {
        RssVector {
            stations: self.stations.clone(),
            values: self.values.iter().map(|v| v + offset).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub rssd_pairs: Vec<RssdPair>,
    pub tdoa: Option<TdoaMeasurement>,
}

impl MeasurementSet {
    /// All `C(N, 2)` differences of one RSS vector, so the set is cycle-consistent.
    pub fn from_rss(rss: &RssVector, tdoa: Option<TdoaMeasurement>) -> Self {
        let n = rss.values.len();
        let mut rssd_pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                let (i, j) = (rss.stations[a], rss.stations[b]);
                let (i, j, value) = if i < j {
                    (i, j, rss.values[a] - rss.values[b])
                } else {
                    (j, i, rss.values[b] - rss.values[a])
                };
                rssd_pairs.push(RssdPair { i, j, value });
            }
        }
        Self { rssd_pairs, tdoa }
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<f64> {
        self.rssd_pairs
            .iter()
            .find(|p| p.i == i && p.j == j)
            .map(|p| p.value)
    }

    pub fn without_tdoa(&self) -> Self {
        Self {
            rssd_pairs: self.rssd_pairs.clone(),
            tdoa: None,
        }
    }
}

/// Log-distance received power in dBm with an explicit shadow-fading draw `beta`.
pub fn received_power(params: &ChannelParams, d: f64, beta: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(params.p0 - 10.0 * params.alpha * (d / params.d0).log10() + beta)
}

/// Cosine pattern `G cos(phi)` in dB, clamped to zero outside the front half-plane.
pub fn antenna_gain(gain_db: f64, phi: f64) -> f64 {
    let phi = normalize_angle(phi);
    if phi.abs() > FRAC_PI_2 {
        0.0
    } else {
        (gain_db * phi.cos()).max(0.0)
    }
}

/// Gain of `bs` towards `target` given its current pointing.
pub fn station_gain(bs: &BaseStation, target: Point2D) -> f64 {
    match bs.antenna {
        Antenna::Omni => 0.0,
        Antenna::Directional { gain_db, .. } => antenna_gain(gain_db, bs.off_boresight(target)),
    }
}

/// Index pair `(k, l)` of the first two TDOA-capable stations, if there are two.
pub fn tdoa_pair(bs: &[BaseStation]) -> Option<(usize, usize)> {
    let mut it = bs
        .iter()
        .enumerate()
        .filter(|(_, b)| b.role.measures_tdoa())
        .map(|(i, _)| i);
    Some((it.next()?, it.next()?))
}

pub fn rss_stations(bs: &[BaseStation]) -> Vec<usize> {
    bs.iter()
        .enumerate()
        .filter(|(_, b)| b.role.measures_rss())
        .map(|(i, _)| i)
        .collect()
}

fn check_not_coincident(bs: &BaseStation, mu: Point2D) -> Result<f64> {
    let d = distance(bs.position, mu);
    if d <= 0.0 {
        return Err(Error::CoincidentPosition {
            station: bs.id,
            x: mu.x,
            y: mu.y,
        });
    }
    Ok(d)
}

/// RSS at every RSS-capable station for a source at `mu`, using the supplied per-station
/// fading draws (one per RSS station, in slice order).
pub fn rss_with_fading(
    bs: &[BaseStation],
    mu: Point2D,
    params: &ChannelParams,
    betas: &[f64],
) -> Result<RssVector> {
    let stations = rss_stations(bs);
    if betas.len() != stations.len() {
        return Err(Error::LengthMismatch {
            left: betas.len(),
            right: stations.len(),
        });
    }
    let mut values = Vec::with_capacity(stations.len());
    for (&idx, &beta) in stations.iter().zip(betas) {
        let b = &bs[idx];
        let d = check_not_coincident(b, mu)?;
        let p = received_power(params, d, beta)? + station_gain(b, mu) - b.obstruction_db;
        values.push(p);
    }
    Ok(RssVector { stations, values })
}

/// Draws one fading value per RSS station and evaluates the RSS vector.
pub fn simulate_rss<R: Rng + ?Sized>(
    bs: &[BaseStation],
    mu: Point2D,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<RssVector> {
    let n = bs.iter().filter(|b| b.role.measures_rss()).count();
    let betas: Vec<f64> = (0..n)
        .map(|_| params.sigma_beta * rng.sample::<f64, _>(StandardNormal))
        .collect();
    rss_with_fading(bs, mu, params, &betas)
}

/// True `t_k - t_l` plus Gaussian timing error, for the station pair returned by
/// [`tdoa_pair`].
pub fn simulate_tdoa<R: Rng + ?Sized>(
    bs: &[BaseStation],
    mu: Point2D,
    noise: &TdoaNoiseParams,
    rng: &mut R,
) -> Result<Option<TdoaMeasurement>> {
    let Some((k, l)) = tdoa_pair(bs) else {
        return Ok(None);
    };
    let dk = check_not_coincident(&bs[k], mu)?;
    let dl = check_not_coincident(&bs[l], mu)?;
    let err = noise.sigma_tdoa * rng.sample::<f64, _>(StandardNormal);
    Ok(Some(TdoaMeasurement {
        k,
        l,
        dt: (dk - dl) / SPEED_OF_LIGHT + err,
    }))
}

/// One localization epoch worth of measurements for a source at `mu`.
///
/// Fading is drawn before the TDOA error, so runs that share a seed see the same fading
/// whether or not the TDOA value is used downstream.
pub fn simulate_measurements<R: Rng + ?Sized>(
    bs: &[BaseStation],
    mu: Point2D,
    params: &ChannelParams,
    tdoa_noise: &TdoaNoiseParams,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let found = bs.iter().filter(|b| b.role.measures_rss()).count();
    if found < 2 {
        return Err(Error::TooFewStations { required: 2, found });
    }
    let rss = simulate_rss(bs, mu, params, rng)?;
    let tdoa = simulate_tdoa(bs, mu, tdoa_noise, rng)?;
    Ok(MeasurementSet::from_rss(&rss, tdoa))
}
