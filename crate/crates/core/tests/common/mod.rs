#![allow(dead_code)]

use rssd_loc::channel::ChannelParams;
use rssd_loc::geometry::{Antenna, BaseStation, Point2D, Rect, Role};
use rssd_loc::solver::{AntennaModel, SearchRegion, SolverConfig};

pub const C: f64 = 299_792_458.0;

/// Eight RSS stations on the walls of an 8 m room and a TDOA pair on the x axis.
pub fn room(directional: bool, aim: Point2D) -> Vec<BaseStation> {
    let ring = [
        (-2.0, -4.0),
        (2.0, -4.0),
        (4.0, -2.0),
        (4.0, 2.0),
        (2.0, 4.0),
        (-2.0, 4.0),
        (-4.0, 2.0),
        (-4.0, -2.0),
    ];
    let mut bs: Vec<BaseStation> = ring
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let p = Point2D::new(x, y);
            let antenna = if directional {
                Antenna::Directional {
                    gain_db: 6.5,
                    orientation: (aim.y - y).atan2(aim.x - x),
                }
            } else {
                Antenna::Omni
            };
            BaseStation::new(i as u32 + 1, p, Role::RssOnly, antenna)
        })
        .collect();
    bs.push(BaseStation::new(9, Point2D::new(-4.0, 0.0), Role::TdoaOnly, Antenna::Omni));
    bs.push(BaseStation::new(10, Point2D::new(4.0, 0.0), Role::TdoaOnly, Antenna::Omni));
    bs
}

pub fn region() -> Rect {
    Rect {
        x_min: -3.5,
        x_max: 3.5,
        y_min: -3.5,
        y_max: 3.5,
    }
}

pub fn solver_cfg(bs: Vec<BaseStation>, params: ChannelParams, directional: bool) -> SolverConfig {
    SolverConfig {
        params,
        bs,
        region: SearchRegion::new(region()),
        antenna_model: if directional {
            AntennaModel::Directional
        } else {
            AntennaModel::Omni
        },
    }
}

/// Model RSS difference written out directly from the log-distance law and the cosine
/// pattern.
pub fn model_rss(b: &BaseStation, alpha: f64, p: Point2D) -> f64 {
    let dx = p.x - b.position.x;
    let dy = p.y - b.position.y;
    let mut v = -10.0 * alpha * (dx * dx + dy * dy).sqrt().log10();
    if let Antenna::Directional { gain_db, orientation } = b.antenna {
        let mut phi = dy.atan2(dx) - orientation;
        while phi > std::f64::consts::PI {
            phi -= 2.0 * std::f64::consts::PI;
        }
        while phi <= -std::f64::consts::PI {
            phi += 2.0 * std::f64::consts::PI;
        }
        if phi.abs() <= std::f64::consts::FRAC_PI_2 {
            v += gain_db * phi.cos();
        }
    }
    v
}

/// Objective evaluated from the model written out in [`model_rss`]; infinite on a station.
pub fn oracle_objective(
    bs: &[BaseStation],
    alpha: f64,
    pairs: &[(usize, usize, f64)],
    p: Point2D,
) -> f64 {
    if bs.iter().any(|b| {
        let d = ((p.x - b.position.x).powi(2) + (p.y - b.position.y).powi(2)).sqrt();
        d < 1e-6
    }) {
        return f64::INFINITY;
    }
    pairs
        .iter()
        .map(|&(i, j, v)| {
            let r = v - (model_rss(&bs[i], alpha, p) - model_rss(&bs[j], alpha, p));
            r * r
        })
        .sum()
}

/// Exhaustive scan of `area` at `step`.
pub fn brute_force_grid(
    bs: &[BaseStation],
    alpha: f64,
    pairs: &[(usize, usize, f64)],
    area: Rect,
    step: f64,
) -> Point2D {
    let nx = ((area.x_max - area.x_min) / step).round() as usize;
    let ny = ((area.y_max - area.y_min) / step).round() as usize;
    let mut best = (f64::INFINITY, Point2D::default());
    for iy in 0..=ny {
        for ix in 0..=nx {
            let p = Point2D::new(area.x_min + ix as f64 * step, area.y_min + iy as f64 * step);
            let q = oracle_objective(bs, alpha, pairs, p);
            if q < best.0 {
                best = (q, p);
            }
        }
    }
    best.1
}

/// Dense scan along the TDOA hyperbola for stations `k` and `l` lying on the x axis,
/// symmetric about the origin, `k` on the negative side.
pub fn brute_force_on_hyperbola(
    bs: &[BaseStation],
    alpha: f64,
    pairs: &[(usize, usize, f64)],
    k: usize,
    l: usize,
    dt: f64,
    area: Rect,
    step: f64,
) -> Point2D {
    let s = 0.5 * (bs[l].position.x - bs[k].position.x);
    assert!(bs[k].position.y == 0.0 && bs[l].position.y == 0.0 && bs[k].position.x == -s);
    let r = 0.5 * C * dt;
    let n = ((area.y_max - area.y_min) / step).round() as usize;
    let mut best = (f64::INFINITY, Point2D::default());
    for i in 0..=n {
        let y = area.y_min + i as f64 * step;
        let x = r * (1.0 + y * y / (s * s - r * r)).sqrt();
        let p = Point2D::new(x, y);
        if !area.contains(p) {
            continue;
        }
        let q = oracle_objective(bs, alpha, pairs, p);
        if q < best.0 {
            best = (q, p);
        }
    }
    best.1
}
