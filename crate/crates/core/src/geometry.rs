//! Planar geometry: points, stations, the TDOA hyperbola and its canonical frame.
//!
//! The TDOA pair always works in a canonical frame where the earlier-indexed station
//! `k` sits at `(-s, 0)` and station `l` at `(+s, 0)`. A range difference
//! `d_k - d_l = 2r` then places the source on the branch `x = r * sqrt(1 + y^2 / (s^2 - r^2))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `|r| >= s - DEGENERACY_MARGIN` is treated as a degenerate hyperbola.
pub const DEGENERACY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Point2D) -> f64 {
        distance(*self, *other)
    }

    /// Azimuth of `other` as seen from `self`, in `(-pi, pi]`.
    pub fn azimuth_to(&self, other: &Point2D) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

pub fn distance(a: Point2D, b: Point2D) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x_min < self.x_max && self.y_min < self.y_max)
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn corners(&self) -> [Point2D; 4] {
        [
            Point2D::new(self.x_min, self.y_min),
            Point2D::new(self.x_max, self.y_min),
            Point2D::new(self.x_min, self.y_max),
            Point2D::new(self.x_max, self.y_max),
        ]
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            self.x_min - margin,
            self.x_max + margin,
            self.y_min - margin,
            self.y_max + margin,
        )
    }
}

/// Which measurements a station contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    RssOnly,
    TdoaOnly,
    /// Measures RSS and is one end of the TDOA pair (the fingerprinting set-up).
    RssAndTdoa,
}

impl Role {
    pub fn measures_rss(self) -> bool {
        matches!(self, Role::RssOnly | Role::RssAndTdoa)
    }

    pub fn measures_tdoa(self) -> bool {
        matches!(self, Role::TdoaOnly | Role::RssAndTdoa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Antenna {
    Omni,
    /// `gain_db` is the boresight gain `G` of the cosine pattern, `orientation` the
    /// boresight azimuth in radians.
    Directional { gain_db: f64, orientation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: u32,
    pub position: Point2D,
    pub role: Role,
    pub antenna: Antenna,
    /// Constant extra attenuation in dB, used to emulate an obstructed station.
    pub obstruction_db: f64,
}

impl BaseStation {
    pub fn new(id: u32, position: Point2D, role: Role, antenna: Antenna) -> Self {
        let antenna = match antenna {
            Antenna::Directional {
                gain_db,
                orientation,
            } => Antenna::Directional {
                gain_db: gain_db.max(0.0),
                orientation: normalize_angle(orientation),
            },
            Antenna::Omni => Antenna::Omni,
        };
        Self {
            id,
            position,
            role,
            antenna,
            obstruction_db: 0.0,
        }
    }

    pub fn with_obstruction(mut self, db: f64) -> Self {
        self.obstruction_db = db;
        self
    }

    pub fn orientation(&self) -> Option<f64> {
        match self.antenna {
            Antenna::Directional { orientation, .. } => Some(orientation),
            Antenna::Omni => None,
        }
    }

    /// Re-points a directional antenna; no-op for omni antennas.
    pub fn set_orientation(&mut self, azimuth: f64) {
        if let Antenna::Directional { orientation, .. } = &mut self.antenna {
            *orientation = normalize_angle(azimuth);
        }
    }

    /// Angle between the antenna boresight and the direction towards `target`, signed,
    /// in `(-pi, pi]`. Zero for omni antennas.
    pub fn off_boresight(&self, target: Point2D) -> f64 {
        match self.antenna {
            Antenna::Directional { orientation, .. } => {
                normalize_angle(self.position.azimuth_to(&target) - orientation)
            }
            Antenna::Omni => 0.0,
        }
    }
}

/// One branch of the TDOA hyperbola in the canonical frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperbola {
    /// Half the distance between the two TDOA stations, `s`.
    pub half_separation: f64,
    /// Signed half range difference `r = 0.5 * c * dt`.
    pub range_difference: f64,
}

impl Hyperbola {
    pub fn new(half_separation: f64, range_difference: f64) -> Result<Self> {
        let h = Self {
            half_separation,
            range_difference,
        };
        h.check()?;
        Ok(h)
    }

    /// Builds the hyperbola from a time difference `dt = t_k - t_l` in seconds.
    pub fn from_tdoa(half_separation: f64, dt: f64) -> Result<Self> {
        Self::new(half_separation, 0.5 * SPEED_OF_LIGHT * dt)
    }

    fn check(&self) -> Result<()> {
        let s = self.half_separation;
        let r = self.range_difference;
        if !(s > 0.0) || !r.is_finite() || r.abs() >= s - DEGENERACY_MARGIN {
            return Err(Error::DegenerateHyperbola {
                range_difference: r,
                half_separation: s,
            });
        }
        Ok(())
    }

    /// Point on the branch with ordinate `y`.
    pub fn point_at(&self, y: f64) -> Point2D {
        let r = self.range_difference;
        let b2 = self.half_separation * self.half_separation - r * r;
        Point2D::new(r * (1.0 + y * y / b2).sqrt(), y)
    }

    /// `d_k - d_l - 2r` for a point in the canonical frame.
    pub fn residual(&self, p: Point2D) -> f64 {
        let s = self.half_separation;
        let dk = distance(p, Point2D::new(-s, 0.0));
        let dl = distance(p, Point2D::new(s, 0.0));
        dk - dl - 2.0 * self.range_difference
    }
}

/// Abscissa of the hyperbola branch at ordinate `y`.
pub fn hyperbola_x_of_y(h: &Hyperbola, y: f64) -> Result<f64> {
    h.check()?;
    Ok(h.point_at(y).x)
}

/// Closest point on the hyperbola branch to `p` (canonical frame).
///
/// The foot of the perpendicular lies within `|p.x - x(p.y)|` of `p.y`, which fixes the
/// search bracket without any scenario knowledge.
pub fn project_onto_hyperbola(p: Point2D, h: &Hyperbola) -> Result<Point2D> {
    h.check()?;
    let reach = (p.x - h.point_at(p.y).x).abs();
    if reach == 0.0 {
        return Ok(p);
    }
    let margin = 1e-3;
    project_onto_hyperbola_within(p, h, p.y - reach - margin, p.y + reach + margin)
}

/// Closest point on the branch with ordinate restricted to `[y_lo, y_hi]`.
pub fn project_onto_hyperbola_within(
    p: Point2D,
    h: &Hyperbola,
    y_lo: f64,
    y_hi: f64,
) -> Result<Point2D> {
    h.check()?;
    if !(y_lo < y_hi) {
        return Err(Error::InvalidParameter(format!(
            "projection bracket [{y_lo}, {y_hi}] is empty"
        )));
    }
    let sq = |y: f64| {
        let q = h.point_at(y);
        (q.x - p.x).powi(2) + (q.y - p.y).powi(2)
    };
    let step = (y_hi - y_lo) / 512.0;
    let (y, _) = search::scan_then_golden(sq, y_lo, y_hi, step, 1e-10);
    Ok(h.point_at(y))
}

/// Rigid transform between scenario coordinates and the canonical TDOA frame of a
/// station pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalFrame {
    origin: Point2D,
    cos: f64,
    sin: f64,
    half_separation: f64,
}

impl CanonicalFrame {
    /// Frame with station `k` on the negative and station `l` on the positive x axis.
    pub fn new(k: Point2D, l: Point2D) -> Result<Self> {
        let d = distance(k, l);
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(
                "TDOA stations must not coincide".into(),
            ));
        }
        Ok(Self {
            origin: Point2D::new(0.5 * (k.x + l.x), 0.5 * (k.y + l.y)),
            cos: (l.x - k.x) / d,
            sin: (l.y - k.y) / d,
            half_separation: 0.5 * d,
        })
    }

    pub fn half_separation(&self) -> f64 {
        self.half_separation
    }

    pub fn to_canonical(&self, p: Point2D) -> Point2D {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        Point2D::new(self.cos * dx + self.sin * dy, -self.sin * dx + self.cos * dy)
    }

    pub fn to_world(&self, p: Point2D) -> Point2D {
        Point2D::new(
            self.origin.x + self.cos * p.x - self.sin * p.y,
            self.origin.y + self.sin * p.x + self.cos * p.y,
        )
    }

    pub fn hyperbola(&self, dt: f64) -> Result<Hyperbola> {
        Hyperbola::from_tdoa(self.half_separation, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point2D::new(0.0, 0.0), Point2D::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(Point2D::new(0.0, 0.0), Point2D::new(3.0, 4.0)), 5.0);
        let d = distance(Point2D::new(1.5, 0.5), Point2D::new(0.0, 0.0));
        assert!((d - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((d - 1.5811).abs() < 1e-4);
    }

    #[test]
    fn x_of_y_examples() {
        let h = Hyperbola::new(2.0, 0.0).unwrap();
        for y in [-3.0, 0.0, 0.4, 10.0] {
            assert_eq!(hyperbola_x_of_y(&h, y).unwrap(), 0.0);
        }
        let h = Hyperbola::new(2.0, 1.0).unwrap();
        assert_eq!(hyperbola_x_of_y(&h, 0.0).unwrap(), 1.0);
        let x = hyperbola_x_of_y(&h, 1.2).unwrap();
        let dk = distance(Point2D::new(x, 1.2), Point2D::new(-2.0, 0.0));
        let dl = distance(Point2D::new(x, 1.2), Point2D::new(2.0, 0.0));
        assert!((dk - dl - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_hyperbola_rejected() {
        assert!(matches!(
            Hyperbola::new(2.0, 2.0),
            Err(Error::DegenerateHyperbola { .. })
        ));
        assert!(Hyperbola::new(2.0, -2.5).is_err());
        assert!(Hyperbola::new(2.0, 2.0 - 1e-10).is_err());
        assert!(Hyperbola::new(0.0, 0.0).is_err());
        assert!(Hyperbola::new(2.0, 2.0 - 1e-6).is_ok());
    }

    #[test]
    fn projection_examples() {
        let h = Hyperbola::new(2.0, 0.0).unwrap();
        let q = project_onto_hyperbola(Point2D::new(2.0, 1.0), &h).unwrap();
        assert!(q.x.abs() < 1e-12 && (q.y - 1.0).abs() < 1e-6, "{q:?}");

        let h = Hyperbola::new(2.0, 1.0).unwrap();
        let on = h.point_at(0.77);
        let q = project_onto_hyperbola(on, &h).unwrap();
        assert!(distance(q, on) < 1e-6);
    }

    #[test]
    fn projection_matches_dense_scan() {
        let h = Hyperbola::new(2.0, 1.0).unwrap();
        let p = Point2D::new(1.5, 0.8);
        // brute force over the curve at 1e-4 m spacing in y
        let mut best = (f64::INFINITY, Point2D::default());
        let mut y = -3.0;
        while y <= 3.0 {
            let q = h.point_at(y);
            let d = distance(p, q);
            if d < best.0 {
                best = (d, q);
            }
            y += 1e-4;
        }
        let q = project_onto_hyperbola(p, &h).unwrap();
        assert!(distance(q, best.1) < 1e-4, "{q:?} vs {:?}", best.1);
        assert!(distance(p, q) <= best.0 + 1e-9);
    }

    #[test]
    fn sign_flip_mirrors_branch() {
        let a = Hyperbola::new(3.0, 1.3).unwrap();
        let b = Hyperbola::new(3.0, -1.3).unwrap();
        for y in [-2.0, 0.0, 0.5, 4.0] {
            assert_eq!(b.point_at(y).x, -a.point_at(y).x);
        }
    }

    #[test]
    fn frame_round_trip_and_axis() {
        let k = Point2D::new(1.0, 2.0);
        let l = Point2D::new(4.0, 6.0);
        let f = CanonicalFrame::new(k, l).unwrap();
        assert!((f.half_separation() - 2.5).abs() < 1e-15);
        let kc = f.to_canonical(k);
        let lc = f.to_canonical(l);
        assert!((kc.x + 2.5).abs() < 1e-12 && kc.y.abs() < 1e-12);
        assert!((lc.x - 2.5).abs() < 1e-12 && lc.y.abs() < 1e-12);
        let p = Point2D::new(-0.3, 7.1);
        let back = f.to_world(f.to_canonical(p));
        assert!(distance(p, back) < 1e-12);
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((normalize_angle(-7.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn station_orientation_is_normalized() {
        let bs = BaseStation::new(
            1,
            Point2D::new(0.0, 0.0),
            Role::RssOnly,
            Antenna::Directional {
                gain_db: 6.5,
                orientation: 2.0 * PI + 0.25,
            },
        );
        assert!((bs.orientation().unwrap() - 0.25).abs() < 1e-12);
        assert!((bs.off_boresight(Point2D::new(0.0, 1.0)) - (PI / 2.0 - 0.25)).abs() < 1e-12);
    }
}
