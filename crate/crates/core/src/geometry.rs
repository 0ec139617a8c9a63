//! Planar primitives: points, anchors, wall slabs and the segment/wall
//! crossing test that decides whether a ranging path is obstructed.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

/// A point (or displacement) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates the vector counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: T) -> Self {
        let (s, co) = angle.sin_cos();
        Self::new(co * self.x - s * self.y, s * self.x + co * self.y)
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A fixed ranging node at a surveyed position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor<T> {
    pub id: String,
    pub position: Point2<T>,
}

impl<T: Scalar> Anchor<T> {
    pub fn new(id: impl Into<String>, position: Point2<T>) -> Self {
        Self { id: id.into(), position }
    }
}

/// Centroid of a non-empty set of points.
pub fn centroid<T: Scalar>(points: impl IntoIterator<Item = Point2<T>>) -> Option<Point2<T>> {
    let mut sum = Point2::new(T::zero(), T::zero());
    let mut n = 0usize;
    for p in points {
        sum = sum + p;
        n += 1;
    }
    (n > 0).then(|| sum * (T::one() / T::from_usize(n).unwrap()))
}

/// A wall slab: a filled oriented rectangle `length × thickness` around
/// `center`, with its long axis at `orientation` radians from the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall<T> {
    pub center: Point2<T>,
    pub length: T,
    pub thickness: T,
    pub orientation: T,
    pub permittivity: T,
}

impl<T: Scalar> Wall<T> {
    pub fn new(center: Point2<T>, length: T, thickness: T, orientation: T, permittivity: T) -> Result<Self> {
        let wall = Self { center, length, thickness, orientation, permittivity };
        wall.validate()?;
        Ok(wall)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center.is_finite() && self.orientation.is_finite()) {
            return Err(Error::invalid("wall center and orientation must be finite"));
        }
        if !(self.thickness > T::zero() && self.length > self.thickness && self.length.is_finite()) {
            return Err(Error::invalid(format!(
                "wall needs length > thickness > 0 (length {}, thickness {})",
                self.length, self.thickness
            )));
        }
        if !(self.permittivity >= T::one() && self.permittivity.is_finite()) {
            return Err(Error::invalid(format!("wall permittivity must be >= 1, got {}", self.permittivity)));
        }
        Ok(())
    }

    /// Unit vector along the long axis.
    pub fn axis(&self) -> Point2<T> {
        let (s, co) = self.orientation.sin_cos();
        Point2::new(co, s)
    }

    /// Unit normal of the long faces.
    pub fn normal(&self) -> Point2<T> {
        let (s, co) = self.orientation.sin_cos();
        Point2::new(-s, co)
    }

    /// Coordinates of `p` in the wall frame (along-axis, along-normal).
    fn local_coords(&self, p: Point2<T>) -> (T, T) {
        let rel = p - self.center;
        (rel.dot(self.axis()), rel.dot(self.normal()))
    }

    /// True when `p` lies strictly inside the rectangle.
    pub fn contains(&self, p: Point2<T>) -> bool {
        let (u, v) = self.local_coords(p);
        u.abs() < self.length / c(2.0) && v.abs() < self.thickness / c(2.0)
    }

    /// Corners in counter-clockwise order, for plotting.
    pub fn corners(&self) -> [Point2<T>; 4] {
        let a = self.axis() * (self.length / c(2.0));
        let n = self.normal() * (self.thickness / c(2.0));
        let o = self.center;
        [o - a - n, o + a - n, o + a + n, o - a + n]
    }
}

/// A wall crossed by a ranging path, with the angle between the path and the
/// wall-face normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstruction<'a, T> {
    pub wall: &'a Wall<T>,
    pub incidence_angle: T,
}

/// Parametric interval `[t_enter, t_exit]` of the segment inside the open
/// rectangle, if it has positive length.
fn clip_interval<T: Scalar>(p: Point2<T>, q: Point2<T>, wall: &Wall<T>) -> Option<(T, T)> {
    let (pu, pv) = wall.local_coords(p);
    let (qu, qv) = wall.local_coords(q);
    let half = [wall.length / c(2.0), wall.thickness / c(2.0)];
    let start = [pu, pv];
    let delta = [qu - pu, qv - pv];

    let mut t0 = T::zero();
    let mut t1 = T::one();
    for axis in 0..2 {
        let (s, d, h) = (start[axis], delta[axis], half[axis]);
        if d == T::zero() {
            // Running along a slab boundary touches no interior.
            if s.abs() >= h {
                return None;
            }
            continue;
        }
        let a = (-h - s) / d;
        let b = (h - s) / d;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    let seg_len = (q - p).norm();
    // Positive measure: a corner graze collapses the interval to a point.
    let min_len = c::<T>(1e-12).max(T::epsilon() * c(16.0)) * (T::one() + seg_len);
    ((t1 - t0) * seg_len > min_len).then_some((t0, t1))
}

fn incidence_angle<T: Scalar>(p: Point2<T>, q: Point2<T>, wall: &Wall<T>) -> T {
    let d = q - p;
    let along = d.dot(wall.axis()).abs();
    let across = d.dot(wall.normal()).abs();
    let theta = along.atan2(across);
    let limit = T::FRAC_PI_2() - T::epsilon();
    if theta > limit {
        limit
    } else {
        theta
    }
}

/// Tests whether the segment `pq` passes through the interior of `wall`.
///
/// An endpoint strictly inside the wall counts as obstructed with incidence
/// angle 0.
pub fn segment_crosses_wall<'a, T: Scalar>(
    p: Point2<T>,
    q: Point2<T>,
    wall: &'a Wall<T>,
) -> Result<Option<Obstruction<'a, T>>> {
    Ok(crossing(p, q, wall)?.map(|(_, o)| o))
}

fn crossing<'a, T: Scalar>(p: Point2<T>, q: Point2<T>, wall: &'a Wall<T>) -> Result<Option<(T, Obstruction<'a, T>)>> {
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::invalid("segment endpoints must be finite"));
    }
    if p == q {
        return Err(Error::invalid("degenerate segment: endpoints coincide"));
    }
    if wall.contains(p) || wall.contains(q) {
        let t = if wall.contains(p) { T::zero() } else { clip_interval(p, q, wall).map_or(T::one(), |(t0, _)| t0) };
        return Ok(Some((t, Obstruction { wall, incidence_angle: T::zero() })));
    }
    Ok(clip_interval(p, q, wall).map(|(t0, _)| (t0, Obstruction { wall, incidence_angle: incidence_angle(p, q, wall) })))
}

/// All walls crossed by the segment `pq`, ordered by where the path enters
/// them (nearest to `p` first). An empty result means line of sight.
pub fn path_obstructions<'a, T: Scalar>(
    p: Point2<T>,
    q: Point2<T>,
    walls: &'a [Wall<T>],
) -> Result<Vec<Obstruction<'a, T>>> {
    let mut hits = Vec::new();
    for wall in walls {
        if let Some(hit) = crossing(p, q, wall)? {
            hits.push(hit);
        }
    }
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(hits.into_iter().map(|(_, o)| o).collect())
}
