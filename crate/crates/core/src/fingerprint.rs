//! RSSD fingerprinting: an offline grid of reference RSS vectors, nearest-entry matching
//! on pairwise differences, and refinement by projection onto the TDOA hyperbola.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{simulate_rss, ChannelParams, TdoaMeasurement};
use crate::error::{Error, Result};
use crate::geometry::{distance, project_onto_hyperbola, BaseStation, CanonicalFrame, Point2D, Rect};

/// Grid points closer than this to an excluded location are dropped.
const EXCLUSION_MATCH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintEntry {
    pub position: Point2D,
    /// dBm, one value per RSS station in station order.
    pub rss_ref: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDB {
    pub entries: Vec<FingerprintEntry>,
    pub grid_step: f64,
    pub excluded: Vec<Point2D>,
}

impl FingerprintDB {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of stations per reference vector.
    pub fn width(&self) -> usize {
        self.entries.first().map_or(0, |e| e.rss_ref.len())
    }
}

/// Grid positions covering `area` at `grid_step`, row by row from the lower-left corner.
pub fn grid_points(area: &Rect, grid_step: f64) -> Result<Vec<Point2D>> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    if area.x_max < area.x_min || area.y_max < area.y_min {
        return Err(Error::EmptyGrid);
    }
    let nx = (area.width() / grid_step + 1e-9).floor() as usize;
    let ny = (area.height() / grid_step + 1e-9).floor() as usize;
    let mut pts = Vec::with_capacity((nx + 1) * (ny + 1));
    for iy in 0..=ny {
        for ix in 0..=nx {
            pts.push(Point2D::new(
                area.x_min + grid_step * ix as f64,
                area.y_min + grid_step * iy as f64,
            ));
        }
    }
    Ok(pts)
}

/// Offline phase: one RSS vector per non-excluded grid point, drawn from the channel
/// model (`channel.sigma_beta = 0` gives noiseless references).
pub fn build_db<R: Rng + ?Sized>(
    bs: &[BaseStation],
    area: &Rect,
    grid_step: f64,
    excluded: &[Point2D],
    channel: &ChannelParams,
    rng: &mut R,
) -> Result<FingerprintDB> {
    channel.validate()?;
    let mut entries = Vec::new();
    for p in grid_points(area, grid_step)? {
        if excluded.iter().any(|e| distance(*e, p) < EXCLUSION_MATCH) {
            continue;
        }
        let rss = simulate_rss(bs, p, channel, rng)?;
        entries.push(FingerprintEntry {
            position: p,
            rss_ref: rss.values,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(FingerprintDB {
        entries,
        grid_step,
        excluded: excluded.to_vec(),
    })
}

/// Euclidean distance between the pairwise-difference (RSSD) expansions of two RSS
/// vectors. A common offset on either vector cancels.
pub fn rssd_euclidean(meas: &[f64], reference: &[f64]) -> Result<f64> {
    if meas.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: meas.len(),
            right: reference.len(),
        });
    }
    if meas.len() < 2 {
        return Err(Error::InvalidParameter(
            "RSSD matching needs at least two stations".into(),
        ));
    }
    let n = meas.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = (meas[i] - meas[j]) - (reference[i] - reference[j]);
            sum += d * d;
        }
    }
    Ok(sum.sqrt())
}

/// Reference position with the smallest RSSD distance; ties to the smaller `(y, x)`.
pub fn coarse_estimate(db: &FingerprintDB, meas: &[f64]) -> Result<Point2D> {
    let mut best: Option<(f64, Point2D)> = None;
    for e in &db.entries {
        let d = rssd_euclidean(meas, &e.rss_ref)?;
        let wins = match best {
            None => true,
            Some((bd, bp)) => {
                d < bd || (d == bd && (e.position.y, e.position.x) < (bp.y, bp.x))
            }
        };
        if wins {
            best = Some((d, e.position));
        }
    }
    best.map(|b| b.1).ok_or(Error::EmptyGrid)
}

/// Projects a coarse fix onto the hyperbola of the measured TDOA.
pub fn refine_with_tdoa(
    coarse: Point2D,
    tdoa: &TdoaMeasurement,
    bs: &[BaseStation],
) -> Result<Point2D> {
    let (k, l) = (tdoa.k, tdoa.l);
    if k >= bs.len() || l >= bs.len() {
        return Err(Error::InvalidParameter(format!(
            "TDOA pair ({k}, {l}) does not index the station list"
        )));
    }
    let frame = CanonicalFrame::new(bs[k].position, bs[l].position)?;
    let h = frame.hyperbola(tdoa.dt)?;
    let q = project_onto_hyperbola(frame.to_canonical(coarse), &h)?;
    Ok(frame.to_world(q))
}

/// Positions equally spaced in angle along a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularTrackParams {
    pub center: Point2D,
    pub radius: f64,
    pub count: usize,
    #[serde(default = "default_start_angle")]
    pub start_angle_deg: f64,
    #[serde(default = "default_step_angle")]
    pub step_angle_deg: f64,
}

fn default_start_angle() -> f64 {
    -90.0
}

fn default_step_angle() -> f64 {
    7.5
}

impl Default for CircularTrackParams {
    fn default() -> Self {
        Self {
            center: Point2D::new(1.5, 1.5),
            radius: 1.0,
            count: 48,
            start_angle_deg: default_start_angle(),
            step_angle_deg: default_step_angle(),
        }
    }
}

impl CircularTrackParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || self.count == 0 {
            return Err(Error::InvalidParameter(
                "circular track needs radius > 0 and at least one position".into(),
            ));
        }
        Ok(())
    }
}

pub fn circular_track(params: &CircularTrackParams) -> Vec<Point2D> {
    (0..params.count)
        .map(|m| {
            let a = (params.start_angle_deg + params.step_angle_deg * m as f64).to_radians();
            Point2D::new(
                params.center.x + params.radius * a.cos(),
                params.center.y + params.radius * a.sin(),
            )
        })
        .collect()
}

/// `x,y,P_1,...,P_N` with four decimals.
pub fn write_db_csv<W: Write>(db: &FingerprintDB, mut out: W) -> Result<()> {
    let n = db.width();
    let mut header = String::from("x,y");
    for j in 1..=n {
        header.push_str(&format!(",P_{j}"));
    }
    writeln!(out, "{header}")?;
    for e in &db.entries {
        let mut line = format!("{:.4},{:.4}", e.position.x, e.position.y);
        for v in &e.rss_ref {
            line.push_str(&format!(",{v:.4}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a DB written by [`write_db_csv`] or measured externally. The grid step is
/// inferred from the smallest coordinate spacing.
pub fn read_db_csv<R: Read>(input: R) -> Result<FingerprintDB> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols.len() < 4 || cols[0] != "x" || cols[1] != "y" {
        return Err(Error::Config(
            "fingerprint CSV header must be x,y,P_1,...,P_N with N >= 2".into(),
        ));
    }
    let mut entries = Vec::new();
    for rec in rdr.deserialize::<Vec<f64>>() {
        let row = rec?;
        if row.len() != cols.len() {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: cols.len(),
            });
        }
        entries.push(FingerprintEntry {
            position: Point2D::new(row[0], row[1]),
            rss_ref: row[2..].to_vec(),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let spacing = |coord: fn(&FingerprintEntry) -> f64| {
        let mut v: Vec<f64> = entries.iter().map(coord).collect();
        v.sort_by(f64::total_cmp);
        v.windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 1e-9)
            .fold(f64::INFINITY, f64::min)
    };
    let step = spacing(|e| e.position.x).min(spacing(|e| e.position.y));
    if !step.is_finite() {
        return Err(Error::InvalidParameter(
            "cannot infer a grid step from a single-position DB".into(),
        ));
    }
    Ok(FingerprintDB {
        entries,
        grid_step: step,
        excluded: Vec::new(),
    })
}
