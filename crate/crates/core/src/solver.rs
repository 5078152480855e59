//! RSSD least-squares position estimation, unconstrained over a 2D region or restricted
//! to the measured TDOA hyperbola, with optional directional-antenna gain terms.

use serde::{Deserialize, Serialize};

use crate::channel::{station_gain, ChannelParams, MeasurementSet, RssdPair};
use crate::error::{Error, Result};
use crate::geometry::{distance, Antenna, BaseStation, CanonicalFrame, Point2D, Rect};
use crate::search;

/// Candidates closer than this to a station are singular.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

const GOLDEN_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    #[serde(flatten)]
    pub bounds: Rect,
    #[serde(default = "default_coarse_step")]
    pub coarse_step: f64,
    #[serde(default = "default_refine_iterations")]
    pub refine_iterations: u32,
}

fn default_coarse_step() -> f64 {
    0.05
}

fn default_refine_iterations() -> u32 {
    6
}

impl SearchRegion {
    pub fn new(bounds: Rect) -> Self {
        Self {
            bounds,
            coarse_step: default_coarse_step(),
            refine_iterations: default_refine_iterations(),
        }
    }

    pub fn with_step(mut self, coarse_step: f64, refine_iterations: u32) -> Self {
        self.coarse_step = coarse_step;
        self.refine_iterations = refine_iterations;
        self
    }

    /// Spacing of the last refinement pass.
    pub fn resolution(&self) -> f64 {
        self.coarse_step / f64::from(1u32 << self.refine_iterations.min(31))
    }

    fn check(&self) -> Result<()> {
        if self.bounds.is_empty() || !(self.coarse_step > 0.0) {
            return Err(Error::EmptyRegion);
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + step * i as f64).collect()
    }
}

/// Whether the solver models the receive antenna pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaModel {
    Omni,
    Directional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub params: ChannelParams,
    /// Stations with their current antenna pointing.
    pub bs: Vec<BaseStation>,
    pub region: SearchRegion,
    pub antenna_model: AntennaModel,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.region.check()?;
        if self.antenna_model == AntennaModel::Directional {
            if let Some(b) = self
                .bs
                .iter()
                .find(|b| b.role.measures_rss() && matches!(b.antenna, Antenna::Omni))
            {
                return Err(Error::InvalidParameter(format!(
                    "directional model requires a directional antenna on RSS station {}",
                    b.id
                )));
            }
        }
        Ok(())
    }
}

/// Sum of squared RSSD residuals, prepared for repeated evaluation.
struct Objective<'a> {
    cfg: &'a SolverConfig,
    pairs: &'a [RssdPair],
    five_alpha: f64,
}

impl<'a> Objective<'a> {
    fn new(cfg: &'a SolverConfig, m: &'a MeasurementSet) -> Result<Self> {
        for p in &m.rssd_pairs {
            if p.i >= p.j || p.j >= cfg.bs.len() {
                return Err(Error::InvalidParameter(format!(
                    "RSSD pair ({}, {}) does not index the station list",
                    p.i, p.j
                )));
            }
        }
        Ok(Self {
            cfg,
            pairs: &m.rssd_pairs,
            five_alpha: 5.0 * cfg.params.alpha,
        })
    }

    /// Modelled relative RSS of station `i` at `p`: `-5 alpha log10(d^2) + g(phi)`.
    fn station_model(&self, i: usize, p: Point2D) -> f64 {
        let b = &self.cfg.bs[i];
        let d2 = (p.x - b.position.x).powi(2) + (p.y - b.position.y).powi(2);
        let mut v = -self.five_alpha * d2.log10();
        if self.cfg.antenna_model == AntennaModel::Directional {
            v += station_gain(b, p);
        }
        v
    }

    fn singular_station(&self, p: Point2D) -> Option<&BaseStation> {
        self.cfg
            .bs
            .iter()
            .find(|b| distance(b.position, p) < SINGULARITY_RADIUS)
    }

    /// `scratch` holds one slot per station.
    fn eval_with(&self, p: Point2D, scratch: &mut [f64]) -> f64 {
        if self.singular_station(p).is_some() {
            return f64::INFINITY;
        }
        scratch.iter_mut().for_each(|v| *v = f64::NAN);
        let mut sum = 0.0;
        for pair in self.pairs {
            if scratch[pair.i].is_nan() {
                scratch[pair.i] = self.station_model(pair.i, p);
            }
            if scratch[pair.j].is_nan() {
                scratch[pair.j] = self.station_model(pair.j, p);
            }
            let r = pair.value - (scratch[pair.i] - scratch[pair.j]);
            sum += r * r;
        }
        sum
    }

    fn eval(&self, p: Point2D) -> f64 {
        let mut scratch = vec![0.0; self.cfg.bs.len()];
        self.eval_with(p, &mut scratch)
    }
}

/// `Q(p)`: sum over station pairs of squared differences between measured and modelled
/// RSSD, including antenna gain terms in directional mode.
pub fn rssd_objective(cfg: &SolverConfig, m: &MeasurementSet, p: Point2D) -> Result<f64> {
    let obj = Objective::new(cfg, m)?;
    if let Some(b) = obj.singular_station(p) {
        return Err(Error::SingularCandidate {
            station: b.id,
            x: p.x,
            y: p.y,
        });
    }
    Ok(obj.eval(p))
}

/// `a` beats `b`: lower objective, ties to the smaller `(y, x)`.
fn better(a: (f64, Point2D), b: (f64, Point2D)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1.y, a.1.x) < (b.1.y, b.1.x))
}

/// Coarse local minima refined independently in [`solve_rssd`].
const REFINE_STARTS: usize = 16;

const MAX_MOVES_PER_LEVEL: usize = 400;

/// Starts keep halving past `refine_iterations` until the step is this small, so basins
/// are compared near their floors rather than at grid resolution.
const POLISH_STEP: f64 = 1e-7;

/// Unconstrained RSSD least squares: coarse grid scan of the region, then
/// step-halving pattern search over the 5x5 neighbourhood, started from each of the best
/// coarse local minima.
pub fn solve_rssd(cfg: &SolverConfig, m: &MeasurementSet) -> Result<Point2D> {
    cfg.region.check()?;
    let obj = Objective::new(cfg, m)?;
    let r = cfg.region.bounds;
    let mut scratch = vec![0.0; cfg.bs.len()];

    let xs = SearchRegion::axis(r.x_min, r.x_max, cfg.region.coarse_step);
    let ys = SearchRegion::axis(r.y_min, r.y_max, cfg.region.coarse_step);
    let (nx, ny) = (xs.len(), ys.len());
    let mut grid = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            grid.push(obj.eval_with(Point2D::new(x, y), &mut scratch));
        }
    }

    // a narrow valley can hide the true basin behind a flatter one at coarse scale
    let mut starts: Vec<(f64, Point2D)> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let v = grid[iy * nx + ix];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        continue;
                    }
                    if grid[jy as usize * nx + jx as usize] < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                starts.push((v, Point2D::new(xs[ix], ys[iy])));
            }
        }
    }
    if starts.is_empty() {
        // every cell infinite
        return Ok(Point2D::new(xs[0], ys[0]));
    }
    starts.sort_by(|a, b| {
        if better(*a, *b) {
            std::cmp::Ordering::Less
        } else if better(*b, *a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    starts.truncate(REFINE_STARTS);

    let mut best = starts[0];
    for start in starts {
        let refined = refine(&obj, &r, cfg.region.coarse_step, cfg.region.refine_iterations, start, &mut scratch);
        if better(refined, best) {
            best = refined;
        }
    }
    Ok(best.1)
}

fn refine(
    obj: &Objective,
    r: &Rect,
    coarse_step: f64,
    iterations: u32,
    start: (f64, Point2D),
    scratch: &mut [f64],
) -> (f64, Point2D) {
    let mut best = start;
    let mut h = coarse_step;
    let mut level = 0;
    while level < iterations || h > POLISH_STEP {
        h *= 0.5;
        level += 1;
        // keep stepping at this scale while the incumbent moves, so a start can slide
        // along a shallow valley
        for _ in 0..MAX_MOVES_PER_LEVEL {
            let center = best.1;
            for a in -2i32..=2 {
                for b in -2i32..=2 {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let p = Point2D::new(center.x + f64::from(b) * h, center.y + f64::from(a) * h);
                    if !r.contains(p) {
                        continue;
                    }
                    let cand = (obj.eval_with(p, scratch), p);
                    if better(cand, best) {
                        best = cand;
                    }
                }
            }
            if best.1 == center {
                break;
            }
        }
    }
    best
}

/// RSSD least squares restricted to the TDOA hyperbola: a 1D search over the canonical
/// ordinate with the abscissa substituted from the hyperbola, then mapped back.
pub fn solve_rssd_tdoa(cfg: &SolverConfig, m: &MeasurementSet) -> Result<Point2D> {
    cfg.region.check()?;
    let tdoa = m.tdoa.ok_or(Error::MissingTdoa)?;
    if tdoa.k >= cfg.bs.len() || tdoa.l >= cfg.bs.len() {
        return Err(Error::InvalidParameter(format!(
            "TDOA pair ({}, {}) does not index the station list",
            tdoa.k, tdoa.l
        )));
    }
    let frame = CanonicalFrame::new(cfg.bs[tdoa.k].position, cfg.bs[tdoa.l].position)?;
    let hyperbola = frame.hyperbola(tdoa.dt)?;
    let obj = Objective::new(cfg, m)?;
    let bounds = cfg.region.bounds;
    let admissible = bounds.expanded(1e-9);

    let (y_lo, y_hi) = bounds
        .corners()
        .iter()
        .map(|c| frame.to_canonical(*c).y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });

    let along = |y: f64| {
        let p = frame.to_world(hyperbola.point_at(y));
        if admissible.contains(p) {
            obj.eval(p)
        } else {
            f64::INFINITY
        }
    };
    let (y, _) = search::scan_then_golden(along, y_lo, y_hi, cfg.region.coarse_step, GOLDEN_TOL);
    Ok(frame.to_world(hyperbola.point_at(y)))
}
