//! Random-waypoint movement, and the closed-loop antenna pointing controller.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, normalize_angle, Antenna, BaseStation, Point2D, Rect, Role};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointModelParams {
    pub area: Rect,
    /// m/s
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Dwell at each waypoint, s.
    #[serde(default)]
    pub pause_time: f64,
    /// Walk stops at the first sample whose travelled distance reaches this, m.
    pub total_length: f64,
    /// Localization rate, Hz.
    pub update_rate: f64,
    /// Initial position; drawn uniformly in `area` when absent.
    #[serde(default)]
    pub start: Option<Point2D>,
}

fn default_speed() -> f64 {
    1.0
}

impl WaypointModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.area.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if !(self.speed > 0.0) || !(self.pause_time >= 0.0) || !(self.update_rate > 0.0) {
            return Err(Error::InvalidParameter(
                "waypoint model needs speed > 0, pause_time >= 0, update_rate > 0".into(),
            ));
        }
        if !(self.total_length >= 0.0) {
            return Err(Error::InvalidParameter("total_length must be >= 0".into()));
        }
        if let Some(s) = self.start {
            if !self.area.contains(s) {
                return Err(Error::InvalidParameter("start lies outside the area".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub position: Point2D,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Track {
    pub epochs: Vec<TrackPoint>,
    /// Vertices of the walk: the start followed by every waypoint drawn. Empty for
    /// tracks read from CSV.
    pub waypoints: Vec<Point2D>,
}

impl Track {
    pub fn from_points(points: &[Point2D], update_rate: f64) -> Self {
        Self {
            epochs: points
                .iter()
                .enumerate()
                .map(|(i, &position)| TrackPoint {
                    t: i as f64 / update_rate,
                    position,
                })
                .collect(),
            waypoints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2D> + '_ {
        self.epochs.iter().map(|e| e.position)
    }
}

struct Leg {
    from: Point2D,
    to: Point2D,
    length: f64,
    depart: f64,
    travelled_before: f64,
}

impl Leg {
    fn arrive(&self, speed: f64) -> f64 {
        self.depart + self.length / speed
    }
}

fn draw_waypoint<R: Rng + ?Sized>(area: &Rect, from: Point2D, rng: &mut R) -> Point2D {
    loop {
        let p = Point2D::new(
            rng.random_range(area.x_min..=area.x_max),
            rng.random_range(area.y_min..=area.y_max),
        );
        if distance(p, from) > 0.0 {
            return p;
        }
    }
}

/// Random-waypoint walk sampled at `update_rate` until the travelled path length
/// reaches `total_length`.
pub fn generate_track<R: Rng + ?Sized>(params: &WaypointModelParams, rng: &mut R) -> Result<Track> {
    params.validate()?;
    let area = params.area;
    let speed = params.speed;
    let start = match params.start {
        Some(s) => s,
        None => Point2D::new(
            rng.random_range(area.x_min..=area.x_max),
            rng.random_range(area.y_min..=area.y_max),
        ),
    };
    let mut waypoints = vec![start];
    let first = draw_waypoint(&area, start, rng);
    waypoints.push(first);
    let mut leg = Leg {
        from: start,
        to: first,
        length: distance(start, first),
        depart: 0.0,
        travelled_before: 0.0,
    };

    let mut epochs = Vec::new();
    for n in 0u64.. {
        let t = n as f64 / params.update_rate;
        while t > leg.arrive(speed) + params.pause_time {
            let depart = leg.arrive(speed) + params.pause_time;
            let from = leg.to;
            let to = draw_waypoint(&area, from, rng);
            waypoints.push(to);
            leg = Leg {
                from,
                to,
                length: distance(from, to),
                depart,
                travelled_before: leg.travelled_before + leg.length,
            };
        }
        let (position, travelled) = if t >= leg.arrive(speed) {
            (leg.to, leg.travelled_before + leg.length)
        } else {
            let moved = ((t - leg.depart) * speed).max(0.0);
            let f = moved / leg.length;
            (
                Point2D::new(
                    leg.from.x + f * (leg.to.x - leg.from.x),
                    leg.from.y + f * (leg.to.y - leg.from.y),
                ),
                leg.travelled_before + moved,
            )
        };
        epochs.push(TrackPoint { t, position });
        if travelled >= params.total_length {
            break;
        }
    }
    Ok(Track { epochs, waypoints })
}

/// Pointing of every station's antenna plus the estimate it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationState {
    /// One entry per station; `None` for omni antennas.
    pub boresights: Vec<Option<f64>>,
    pub last_estimate: Point2D,
}

impl OrientationState {
    /// Directional RSS antennas aimed at the known initial position; anything else keeps
    /// its configured pointing.
    pub fn initial(bs: &[BaseStation], start: Point2D) -> Self {
        let keep = Self {
            boresights: bs.iter().map(BaseStation::orientation).collect(),
            last_estimate: start,
        };
        update_orientation(&keep, bs, start)
    }

    /// Copies of `bs` with the boresights of this state applied.
    pub fn apply(&self, bs: &[BaseStation]) -> Vec<BaseStation> {
        bs.iter()
            .zip(&self.boresights)
            .map(|(b, o)| {
                let mut b = b.clone();
                if let Some(o) = o {
                    b.set_orientation(*o);
                }
                b
            })
            .collect()
    }
}

fn steerable(b: &BaseStation) -> bool {
    b.role != Role::TdoaOnly && matches!(b.antenna, Antenna::Directional { .. })
}

/// Points every steerable antenna at `new_estimate`.
///
/// A station that coincides with the estimate has no defined azimuth and keeps its
/// previous boresight.
pub fn update_orientation(
    state: &OrientationState,
    bs: &[BaseStation],
    new_estimate: Point2D,
) -> OrientationState {
    let boresights = bs
        .iter()
        .zip(&state.boresights)
        .map(|(b, prev)| {
            if steerable(b) && distance(b.position, new_estimate) > 0.0 {
                Some(b.position.azimuth_to(&new_estimate))
            } else {
                *prev
            }
        })
        .collect();
    OrientationState {
        boresights,
        last_estimate: new_estimate,
    }
}

/// Signed angle from the boresight of station `idx` to the true direction of the user.
pub fn signed_misorientation(
    state: &OrientationState,
    idx: usize,
    bs: &BaseStation,
    true_position: Point2D,
) -> Result<f64> {
    if distance(bs.position, true_position) <= 0.0 {
        return Err(Error::CoincidentPosition {
            station: bs.id,
            x: true_position.x,
            y: true_position.y,
        });
    }
    let boresight = state
        .boresights
        .get(idx)
        .copied()
        .flatten()
        .ok_or_else(|| {
            Error::InvalidParameter(format!("station {} has no steerable antenna", bs.id))
        })?;
    Ok(normalize_angle(bs.position.azimuth_to(&true_position) - boresight))
}

/// Misorientation angle in `[0, pi]`.
pub fn misorientation(
    state: &OrientationState,
    idx: usize,
    bs: &BaseStation,
    true_position: Point2D,
) -> Result<f64> {
    signed_misorientation(state, idx, bs, true_position).map(f64::abs)
}

/// `t,x,y` with six decimals.
pub fn write_track_csv<W: Write>(track: &Track, mut out: W) -> Result<()> {
    writeln!(out, "t,x,y")?;
    for e in &track.epochs {
        writeln!(out, "{:.6},{:.6},{:.6}", e.t, e.position.x, e.position.y)?;
    }
    Ok(())
}

pub fn read_track_csv<R: Read>(input: R) -> Result<Track> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "x", "y"] {
        return Err(Error::Config(format!(
            "track CSV header must be t,x,y, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut epochs = Vec::new();
    for rec in rdr.deserialize::<(f64, f64, f64)>() {
        let (t, x, y) = rec?;
        if let Some(prev) = epochs.last().map(|e: &TrackPoint| e.t) {
            if t <= prev {
                return Err(Error::Config("track times must increase strictly".into()));
            }
        }
        epochs.push(TrackPoint {
            t,
            position: Point2D::new(x, y),
        });
    }
    Ok(Track {
        epochs,
        waypoints: Vec::new(),
    })
}
