//! Synthetic migration corpus.
//!
//! Every trajectory dwells in a start region, travels along one of several
//! alternative routes through a chain of stopover waypoints (dwelling at
//! each), and finishes in an end region. Per-trajectory variation comes from
//! the route choice, waypoint offsets, a shift of the whole schedule, and
//! daily fix noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{GeoPoint, Trajectory, TrajectorySet};

/// Fraction of the horizon spent at the start region before departure.
const DEPARTURE_FRACTION: f64 = 0.15;
/// Fraction of the horizon spent travelling, split evenly across legs.
const TRAVEL_FRACTION: f64 = 0.45;
/// Lateral bulge of the stopover chain, relative to the start-end distance.
const ROUTE_BULGE: f64 = 0.12;
/// Waypoint offsets are this many `noise_sd` wide.
const WAYPOINT_SPREAD: f64 = 2.0;
/// Daily noise while dwelling, relative to `noise_sd`.
const DWELL_NOISE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: GeoPoint,
    pub radius: f64,
}

impl Region {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        self.center.distance(p) <= self.radius + 1e-12
    }

    fn clamp(&self, p: GeoPoint) -> GeoPoint {
        let d = self.center.distance(&p);
        if d <= self.radius {
            return p;
        }
        let t = self.radius / d;
        GeoPoint::new(
            self.center.lon + t * (p.lon - self.center.lon),
            self.center.lat + t * (p.lat - self.center.lat),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_trajectories: usize,
    pub horizon_days: usize,
    pub start_region: Region,
    pub end_region: Region,
    pub n_stopovers: usize,
    pub stopover_dwell_days: usize,
    /// Alternative routes between the regions; each trajectory picks one.
    pub n_routes: usize,
    /// Lateral separation of neighbouring routes, relative to the
    /// start-end distance.
    pub route_spread: f64,
    /// Daily fix noise in degrees; waypoint offsets scale with it.
    pub noise_sd: f64,
    /// Standard deviation of the per-trajectory schedule shift, in days.
    pub timing_jitter_days: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_trajectories: 60,
            horizon_days: 185,
            start_region: Region {
                center: GeoPoint::new(6.0, 52.5),
                radius: 1.5,
            },
            end_region: Region {
                center: GeoPoint::new(48.0, 68.5),
                radius: 2.5,
            },
            n_stopovers: 2,
            stopover_dwell_days: 25,
            n_routes: 3,
            route_spread: 0.15,
            noise_sd: 0.35,
            timing_jitter_days: 6.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.n_trajectories < 1 {
            return fail("n_trajectories must be at least 1");
        }
        if self.horizon_days < 2 {
            return fail("horizon_days must be at least 2");
        }
        if self.n_routes < 1 {
            return fail("n_routes must be at least 1");
        }
        if !(self.route_spread >= 0.0 && self.route_spread.is_finite()) {
            return fail("route_spread must be non-negative");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail("noise_sd must be non-negative");
        }
        if !(self.timing_jitter_days >= 0.0 && self.timing_jitter_days.is_finite()) {
            return fail("timing_jitter_days must be non-negative");
        }
        for r in [&self.start_region, &self.end_region] {
            if !(r.radius >= 0.0 && r.radius.is_finite() && r.center.is_finite()) {
                return fail("region radius must be non-negative and centers finite");
            }
        }
        if self.start_region.center == self.end_region.center {
            return fail("start and end regions must be distinct");
        }
        Ok(())
    }

    /// Start center, stopovers, end center of route `route`.
    fn backbone(&self, route: usize) -> Vec<GeoPoint> {
        let (a, b) = (self.start_region.center, self.end_region.center);
        let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
        let legs = self.n_stopovers + 1;
        let offset = self.route_spread * (route as f64 - 0.5 * (self.n_routes - 1) as f64);
        (0..=legs)
            .map(|k| {
                let u = k as f64 / legs as f64;
                let bulge = (ROUTE_BULGE + offset) * (std::f64::consts::PI * u).sin();
                // Left of the direction of travel.
                GeoPoint::new(a.lon + u * dx - bulge * dy, a.lat + u * dy + bulge * dx)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Dwell(usize),
    Travel(usize),
}

/// Position and whether the animal is dwelling, at fractional day `t`.
fn position(waypoints: &[GeoPoint], segments: &[(Segment, f64)], t: f64) -> (GeoPoint, bool) {
    let mut start = 0.0;
    for &(seg, dur) in segments {
        if t < start + dur {
            return match seg {
                Segment::Dwell(i) => (waypoints[i], true),
                Segment::Travel(i) => {
                    let u = ((t - start) / dur).clamp(0.0, 1.0);
                    let s = u * u * (3.0 - 2.0 * u);
                    let (p, q) = (waypoints[i], waypoints[i + 1]);
                    (
                        GeoPoint::new(p.lon + s * (q.lon - p.lon), p.lat + s * (q.lat - p.lat)),
                        false,
                    )
                }
            };
        }
        start += dur;
    }
    (*waypoints.last().expect("nonempty backbone"), true)
}

fn schedule(cfg: &SynthConfig, shift: f64) -> Vec<(Segment, f64)> {
    let h = cfg.horizon_days as f64;
    let legs = cfg.n_stopovers + 1;
    let last = h - 1.0;
    let mut pre = (DEPARTURE_FRACTION * h + shift).clamp(0.0, last);
    let mut travel = TRAVEL_FRACTION * h / legs as f64;
    let mut dwell = cfg.stopover_dwell_days as f64;
    let busy = legs as f64 * travel + cfg.n_stopovers as f64 * dwell;
    if pre + busy > last {
        let room = (last - pre).max(0.0);
        if busy > 0.0 && room > 0.0 {
            let f = room / busy;
            travel *= f;
            dwell *= f;
        } else {
            pre = 0.0;
            let f = last / busy.max(f64::MIN_POSITIVE);
            travel *= f;
            dwell *= f;
        }
    }
    let mut segments = vec![(Segment::Dwell(0), pre)];
    for leg in 0..legs {
        segments.push((Segment::Travel(leg), travel.max(f64::MIN_POSITIVE)));
        if leg + 1 < legs {
            segments.push((Segment::Dwell(leg + 1), dwell));
        }
    }
    segments
}

/// Generates a corpus; identical configs give bit-identical output.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<TrajectorySet> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let routes: Vec<Vec<GeoPoint>> = (0..cfg.n_routes).map(|r| cfg.backbone(r)).collect();
    let n_waypoints = routes[0].len();
    let max_shift = 0.1 * cfg.horizon_days as f64;

    let draw = |rng: &mut rng::Rng, sd: f64| -> f64 {
        if sd > 0.0 {
            Normal::new(0.0, sd).expect("positive sd").sample(rng)
        } else {
            // Keep the stream aligned with the noisy case.
            let _: f64 = rng.random();
            0.0
        }
    };

    let mut trajectories = Vec::with_capacity(cfg.n_trajectories);
    for _ in 0..cfg.n_trajectories {
        let backbone = &routes[rng.random_range(0..cfg.n_routes)];
        let spread = WAYPOINT_SPREAD * cfg.noise_sd;
        let waypoints: Vec<GeoPoint> = backbone
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let p = GeoPoint::new(w.lon + draw(&mut rng, spread), w.lat + draw(&mut rng, spread));
                if i == 0 {
                    shrink(&cfg.start_region, p)
                } else if i + 1 == n_waypoints {
                    shrink(&cfg.end_region, p)
                } else {
                    p
                }
            })
            .collect();
        let shift = draw(&mut rng, cfg.timing_jitter_days).clamp(-max_shift, max_shift);
        let segments = schedule(cfg, shift);

        let mut points = Vec::with_capacity(cfg.horizon_days);
        for day in 0..cfg.horizon_days {
            let (p, dwelling) = position(&waypoints, &segments, day as f64);
            let sd = if dwelling { DWELL_NOISE * cfg.noise_sd } else { cfg.noise_sd };
            points.push(GeoPoint::new(p.lon + draw(&mut rng, sd), p.lat + draw(&mut rng, sd)));
        }
        let last = points.len() - 1;
        points[0] = cfg.start_region.clamp(points[0]);
        points[last] = cfg.end_region.clamp(points[last]);
        trajectories.push(Trajectory::new(points)?);
    }
    TrajectorySet::new(trajectories)
}

/// Keeps a waypoint well inside its region so dwell noise rarely leaves it.
fn shrink(region: &Region, p: GeoPoint) -> GeoPoint {
    Region {
        center: region.center,
        radius: 0.6 * region.radius,
    }
    .clamp(p)
}
