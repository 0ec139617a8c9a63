//! Tag trajectories and simulated range measurements.
//!
//! A measured distance is the true distance plus the through-the-wall bias of
//! every wall on the path plus zero-mean Gaussian noise. Noise is drawn from
//! ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`) through the ziggurat
//! standard-normal sampler of `rand_distr`, one draw per (epoch, anchor) in
//! epoch-major order, so a seed fully determines a log.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{path_obstructions, Anchor, Point2, Wall};
use crate::scalar::{c, Scalar};

/// Coefficient of the squared incidence angle in the through-the-wall bias.
pub const TTW_ANGLE_COEFF: f64 = 0.31;

/// Stream offset mixed into the seed for wall-dimension draws, keeping them
/// independent of the measurement-noise stream.
const WALL_STREAM: u64 = 0x5741_4c4c_5345_4544;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<T> {
    pub t: T,
    pub position: Point2<T>,
    /// 1-based lap index; always 1 for open paths.
    pub lap: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<TrajectorySample<T>>,
    pub nominal_speed: T,
    pub dt: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2<T>> + '_ {
        self.samples.iter().map(|s| s.position)
    }

    /// Index of the first sample of lap `lap`, if the trajectory reaches it.
    pub fn first_index_of_lap(&self, lap: u32) -> Option<usize> {
        self.samples.iter().position(|s| s.lap >= lap)
    }
}

fn check_motion<T: Scalar>(speed: T, dt: T) -> Result<()> {
    if !(speed > T::zero() && speed.is_finite()) {
        return Err(Error::invalid(format!("speed must be positive, got {speed}")));
    }
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(Error::invalid(format!("sampling interval must be positive, got {dt}")));
    }
    Ok(())
}

/// Straight-line motion at constant speed, sampled every `dt`.
pub fn make_line_trajectory<T: Scalar>(start: Point2<T>, end: Point2<T>, speed: T, dt: T) -> Result<Trajectory<T>> {
    check_motion(speed, dt)?;
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::invalid("trajectory endpoints must be finite"));
    }
    let length = start.distance(end);
    if length == T::zero() {
        return Err(Error::invalid("line trajectory needs distinct endpoints"));
    }
    let dir = (end - start) * (T::one() / length);
    let step = speed * dt;
    let tol = c::<T>(1e-9);
    let n = ((length + tol) / step).floor().to_usize().ok_or_else(|| Error::invalid("trajectory too long"))?;

    let mut samples: Vec<_> = (0..=n)
        .map(|i| {
            let i = T::from_usize(i).unwrap();
            TrajectorySample { t: i * dt, position: start + dir * (i * step), lap: 1 }
        })
        .collect();
    let last = samples.last_mut().unwrap();
    if last.position.distance(end) <= tol {
        last.position = end;
    } else {
        let t = last.t + dt;
        samples.push(TrajectorySample { t, position: end, lap: 1 });
    }
    Ok(Trajectory { samples, nominal_speed: speed, dt })
}

/// Closed path around a rectangle with rounded corners.
#[derive(Debug, Clone, Copy)]
pub struct RoundedRect<T> {
    pub center: Point2<T>,
    pub width: T,
    pub height: T,
    pub corner_radius: T,
}

impl<T: Scalar> RoundedRect<T> {
    pub fn perimeter(&self) -> T {
        let r = self.corner_radius;
        c::<T>(2.0) * (self.width - c::<T>(2.0) * r) + c::<T>(2.0) * (self.height - c::<T>(2.0) * r) + T::TAU() * r
    }

    /// Point at arc length `s` from the bottom-edge midpoint, counter-clockwise.
    pub fn point_at(&self, s: T) -> Point2<T> {
        let r = self.corner_radius;
        let hw = self.width / c(2.0);
        let hh = self.height / c(2.0);
        let straight_w = self.width - c::<T>(2.0) * r;
        let straight_h = self.height - c::<T>(2.0) * r;
        let arc = T::FRAC_PI_2() * r;
        let o = self.center;
        let mut s = s % self.perimeter();

        let half_bottom = straight_w / c(2.0);
        if s <= half_bottom {
            return o + Point2::new(s, -hh);
        }
        s -= half_bottom;
        let corner = |cx: T, cy: T, start_angle: T, s: T| {
            let a = start_angle + if r > T::zero() { s / r } else { T::zero() };
            o + Point2::new(cx + r * a.cos(), cy + r * a.sin())
        };
        if s <= arc {
            return corner(hw - r, -hh + r, -T::FRAC_PI_2(), s);
        }
        s -= arc;
        if s <= straight_h {
            return o + Point2::new(hw, -hh + r + s);
        }
        s -= straight_h;
        if s <= arc {
            return corner(hw - r, hh - r, T::zero(), s);
        }
        s -= arc;
        if s <= straight_w {
            return o + Point2::new(hw - r - s, hh);
        }
        s -= straight_w;
        if s <= arc {
            return corner(-hw + r, hh - r, T::FRAC_PI_2(), s);
        }
        s -= arc;
        if s <= straight_h {
            return o + Point2::new(-hw, hh - r - s);
        }
        s -= straight_h;
        if s <= arc {
            return corner(-hw + r, -hh + r, T::PI(), s);
        }
        s -= arc;
        o + Point2::new(-hw + r + s, -hh)
    }
}

/// Constant-speed laps around a rounded rectangle, starting at the midpoint
/// of the bottom edge and moving counter-clockwise.
pub fn make_rounded_rect_trajectory<T: Scalar>(
    center: Point2<T>,
    width: T,
    height: T,
    corner_radius: T,
    speed: T,
    dt: T,
    laps: u32,
) -> Result<Trajectory<T>> {
    check_motion(speed, dt)?;
    if !(width > T::zero() && height > T::zero() && center.is_finite()) {
        return Err(Error::invalid("rounded rectangle needs positive width and height"));
    }
    if !(corner_radius >= T::zero() && corner_radius <= width.min(height) / c(2.0)) {
        return Err(Error::invalid(format!(
            "corner radius {corner_radius} must lie in [0, min(width, height)/2]"
        )));
    }
    if laps < 1 {
        return Err(Error::invalid("at least one lap required"));
    }
    let shape = RoundedRect { center, width, height, corner_radius };
    let perimeter = shape.perimeter();
    let total = perimeter * T::from_u32(laps).unwrap();
    let step = speed * dt;
    let n = ((total + c(1e-9)) / step).floor().to_usize().ok_or_else(|| Error::invalid("trajectory too long"))?;
    let samples = (0..=n)
        .map(|i| {
            let fi = T::from_usize(i).unwrap();
            let s = fi * step;
            let lap = ((s / perimeter).floor().to_u32().unwrap_or(0) + 1).min(laps);
            TrajectorySample { t: fi * dt, position: shape.point_at(s), lap }
        })
        .collect();
    Ok(Trajectory { samples, nominal_speed: speed, dt })
}

/// Through-the-wall ranging bias in meters:
/// `thickness·(√ε_r − 1) + 0.31·thickness·θ²`.
pub fn ttw_bias<T: Scalar>(wall: &Wall<T>, incidence_angle: T) -> T {
    debug_assert!(incidence_angle >= T::zero() && incidence_angle < T::FRAC_PI_2());
    let w = wall.thickness;
    w * (wall.permittivity.sqrt() - T::one()) + c::<T>(TTW_ANGLE_COEFF) * w * incidence_angle * incidence_angle
}

/// Summed bias over every wall crossed between `tag` and `anchor`.
pub fn path_bias<T: Scalar>(tag: Point2<T>, anchor: Point2<T>, walls: &[Wall<T>]) -> Result<T> {
    if tag == anchor {
        return Ok(T::zero());
    }
    Ok(path_obstructions(tag, anchor, walls)?
        .iter()
        .fold(T::zero(), |acc, o| acc + ttw_bias(o.wall, o.incidence_angle)))
}

/// One epoch of range measurements. `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeEpoch<T> {
    pub k: usize,
    pub t: T,
    pub r: Vec<Option<T>>,
    pub truth: Option<Point2<T>>,
}

impl<T: Scalar> RangeEpoch<T> {
    pub fn valid_count(&self) -> usize {
        self.r.iter().filter(|r| r.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Line {
        start: Point2<f64>,
        end: Point2<f64>,
    },
    RoundedRect {
        center: Point2<f64>,
        width: f64,
        height: f64,
        corner_radius: f64,
        laps: u32,
    },
}

/// Uniform ranges for redrawing wall dimensions under the scenario seed.
/// `lengths[i]` applies to wall `i`; all walls share one thickness draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallRandomization {
    pub lengths: Vec<[f64; 2]>,
    pub thickness: [f64; 2],
    #[serde(default = "default_redraws")]
    pub max_redraws: u32,
}

fn default_redraws() -> u32 {
    100
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub anchors: Vec<Anchor<f64>>,
    pub walls: Vec<Wall<f64>>,
    pub randomize_walls: Option<WallRandomization>,
    pub trajectory: TrajectorySpec,
    pub speed: f64,
    pub dt: f64,
    pub sigma_m: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() < 3 {
            return Err(Error::invalid(format!("need at least 3 anchors, got {}", self.anchors.len())));
        }
        for (i, a) in self.anchors.iter().enumerate() {
            if !a.position.is_finite() {
                return Err(Error::invalid(format!("anchor {} has a non-finite position", a.id)));
            }
            if self.anchors[..i].iter().any(|b| b.position == a.position) {
                return Err(Error::invalid(format!("anchor {} duplicates another anchor position", a.id)));
            }
        }
        for w in &self.walls {
            w.validate()?;
        }
        check_motion(self.speed, self.dt)?;
        if !(self.sigma_m >= 0.0 && self.sigma_m.is_finite()) {
            return Err(Error::invalid(format!("sigma_m must be >= 0, got {}", self.sigma_m)));
        }
        if let Some(rnd) = &self.randomize_walls {
            if rnd.lengths.len() != self.walls.len() {
                return Err(Error::invalid("randomize_walls.lengths must have one range per wall"));
            }
            for [lo, hi] in rnd.lengths.iter().chain(std::iter::once(&rnd.thickness)) {
                if !(*lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(Error::invalid(format!("bad range [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn build_trajectory(&self) -> Result<Trajectory<f64>> {
        match self.trajectory {
            TrajectorySpec::Line { start, end } => make_line_trajectory(start, end, self.speed, self.dt),
            TrajectorySpec::RoundedRect { center, width, height, corner_radius, laps } => {
                make_rounded_rect_trajectory(center, width, height, corner_radius, self.speed, self.dt, laps)
            }
        }
    }

    pub fn anchor_positions(&self) -> Vec<Point2<f64>> {
        self.anchors.iter().map(|a| a.position).collect()
    }

    /// Walls with dimensions resolved for this seed (unchanged in fixed mode).
    fn draw_walls(&self, attempt: u32) -> Result<Vec<Wall<f64>>> {
        let Some(rnd) = &self.randomize_walls else {
            return Ok(self.walls.clone());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ WALL_STREAM);
        rng.set_stream(u64::from(attempt));
        let thickness = rng.random_range(rnd.thickness[0]..=rnd.thickness[1]);
        self.walls
            .iter()
            .zip(&rnd.lengths)
            .map(|(w, [lo, hi])| {
                let length = rng.random_range(*lo..=*hi);
                Wall::new(w.center, length, thickness, w.orientation, w.permittivity)
            })
            .collect()
    }
}

/// Number of anchors with an unobstructed path from `tag`.
pub fn los_count(tag: Point2<f64>, anchors: &[Point2<f64>], walls: &[Wall<f64>]) -> Result<usize> {
    let mut n = 0;
    for &a in anchors {
        if a == tag || path_obstructions(tag, a, walls)?.is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

/// Fails if some trajectory sample sees fewer than two LOS anchors.
pub fn check_los_guard(trajectory: &Trajectory<f64>, anchors: &[Point2<f64>], walls: &[Wall<f64>]) -> Result<()> {
    for (k, s) in trajectory.samples.iter().enumerate() {
        let n = los_count(s.position, anchors, walls)?;
        if n < 2 {
            return Err(Error::Scenario(format!(
                "only {n} LOS anchor(s) at epoch {k} (tag at ({}, {})); at least 2 required",
                s.position.x, s.position.y
            )));
        }
    }
    Ok(())
}

/// Output of [`simulate`]: the log plus the geometry that produced it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory<f64>,
    pub walls: Vec<Wall<f64>>,
    pub epochs: Vec<RangeEpoch<f64>>,
}

impl Simulation {
    pub fn truth(&self) -> Vec<(usize, Point2<f64>)> {
        self.trajectory.samples.iter().enumerate().map(|(k, s)| (k, s.position)).collect()
    }
}

pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    config.validate()?;
    let trajectory = config.build_trajectory()?;
    let anchors = config.anchor_positions();

    let walls = match &config.randomize_walls {
        None => {
            check_los_guard(&trajectory, &anchors, &config.walls)?;
            config.walls.clone()
        }
        Some(rnd) => {
            let mut last_err = None;
            let mut chosen = None;
            for attempt in 0..rnd.max_redraws.max(1) {
                let walls = config.draw_walls(attempt)?;
                match check_los_guard(&trajectory, &anchors, &walls) {
                    Ok(()) => {
                        chosen = Some(walls);
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            match chosen {
                Some(w) => w,
                None => return Err(last_err.unwrap()),
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut epochs = Vec::with_capacity(trajectory.len());
    for (k, sample) in trajectory.samples.iter().enumerate() {
        let mut r = Vec::with_capacity(anchors.len());
        for &a in &anchors {
            let z: f64 = rng.sample(StandardNormal);
            let d = sample.position.distance(a);
            let bias = path_bias(sample.position, a, &walls)?;
            r.push(Some((d + bias + config.sigma_m * z).max(0.0)));
        }
        epochs.push(RangeEpoch { k, t: sample.t, r, truth: Some(sample.position) });
    }
    Ok(Simulation { trajectory, walls, epochs })
}
