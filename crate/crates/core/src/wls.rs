//! Weighted nonlinear least-squares position fix.
//!
//! Minimizes `Σ w_i² (r_i − ‖Z − Z_i‖)²` over the tag position `Z` with
//! Gauss–Newton steps on the residuals `ρ_i = w_i (r_i − ‖Z − Z_i‖)`. A step
//! that does not lower the cost is halved up to ten times; if none of the
//! halvings helps the solver stops at the best point with `converged = false`.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::{c, Scalar};

const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsProblem<T> {
    pub anchors: Vec<Point2<T>>,
    pub distances: Vec<T>,
    pub weights: Vec<T>,
    pub initial_guess: Point2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsOptions<T> {
    /// Stop once a step is shorter than this many meters.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for WlsOptions<T> {
    fn default() -> Self {
        Self { tol: c(1e-6), max_iter: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsSolution<T> {
    pub position: Point2<T>,
    pub iterations: usize,
    pub final_cost: T,
    pub converged: bool,
}

impl<T: Scalar> WlsProblem<T> {
    pub fn new(anchors: Vec<Point2<T>>, distances: Vec<T>, weights: Vec<T>, initial_guess: Point2<T>) -> Self {
        Self { anchors, distances, weights, initial_guess }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.anchors.len();
        if self.distances.len() != n || self.weights.len() != n {
            return Err(Error::invalid(format!(
                "length mismatch: {n} anchors, {} distances, {} weights",
                self.distances.len(),
                self.weights.len()
            )));
        }
        if n < 3 {
            return Err(Error::invalid(format!("need at least 3 anchors, got {n}")));
        }
        if self.weights.iter().any(|w| !(*w >= T::zero() && w.is_finite())) {
            return Err(Error::invalid("weights must be finite and >= 0"));
        }
        if self.distances.iter().any(|d| !(*d >= T::zero() && d.is_finite())) {
            return Err(Error::invalid("distances must be finite and >= 0"));
        }
        if !self.initial_guess.is_finite() || self.anchors.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("positions must be finite"));
        }
        let active = self.active_anchors();
        if active.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 positive weights, got {}", active.len())));
        }
        if active.len() >= 3 && collinear(&active) {
            return Err(Error::RankDeficient("all positively weighted anchors are collinear".into()));
        }
        Ok(())
    }

    fn active_anchors(&self) -> Vec<Point2<T>> {
        self.anchors.iter().zip(&self.weights).filter(|(_, w)| **w > T::zero()).map(|(a, _)| *a).collect()
    }
}

/// True when every point lies within 1e-9 m of the line through the two
/// points farthest apart.
fn collinear<T: Scalar>(points: &[Point2<T>]) -> bool {
    let mut best = (0, 0, T::zero());
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].distance(points[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, len) = best;
    if len == T::zero() {
        return true;
    }
    let dir = (points[j] - points[i]) * (T::one() / len);
    points.iter().all(|p| dir.cross(*p - points[i]).abs() <= c(1e-9))
}

/// Objective value at `z`.
pub fn wls_cost<T: Scalar>(problem: &WlsProblem<T>, z: Point2<T>) -> T {
    problem
        .anchors
        .iter()
        .zip(&problem.distances)
        .zip(&problem.weights)
        .fold(T::zero(), |acc, ((a, r), w)| {
            let rho = *w * (*r - z.distance(*a));
            acc + rho * rho
        })
}

/// Residuals `ρ_i` and their gradients `∂ρ_i/∂Z` at `z`. The gradient row of
/// an anchor coinciding with `z` is zero.
pub fn residuals_and_jacobian<T: Scalar>(problem: &WlsProblem<T>, z: Point2<T>) -> (Vec<T>, Vec<[T; 2]>) {
    let n = problem.anchors.len();
    let mut res = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    for ((a, r), w) in problem.anchors.iter().zip(&problem.distances).zip(&problem.weights) {
        let diff = z - *a;
        let dist = diff.norm();
        res.push(*w * (*r - dist));
        if dist > T::zero() {
            jac.push([-*w * diff.x / dist, -*w * diff.y / dist]);
        } else {
            jac.push([T::zero(), T::zero()]);
        }
    }
    (res, jac)
}

/// Solves `(JᵀJ) δ = −Jᵀρ`, adding a small diagonal load when `JᵀJ` is
/// numerically singular.
// The negated comparisons below also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn gauss_newton_step<T: Scalar>(res: &[T], jac: &[[T; 2]]) -> Option<Point2<T>> {
    let mut a = [[T::zero(); 2]; 2];
    let mut g = [T::zero(); 2];
    for (r, j) in res.iter().zip(jac) {
        for row in 0..2 {
            g[row] += j[row] * *r;
            for col in 0..2 {
                a[row][col] += j[row] * j[col];
            }
        }
    }
    let trace = a[0][0] + a[1][1];
    let mut det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det > c::<T>(1e-12) * trace * trace) {
        let load = c::<T>(1e-6) * trace.max(T::one());
        a[0][0] += load;
        a[1][1] += load;
        det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    }
    if !(det > T::zero() && det.is_finite()) {
        return None;
    }
    let dx = -(a[1][1] * g[0] - a[0][1] * g[1]) / det;
    let dy = -(a[0][0] * g[1] - a[1][0] * g[0]) / det;
    let step = Point2::new(dx, dy);
    step.is_finite().then_some(step)
}

pub fn wls_solve<T: Scalar>(problem: &WlsProblem<T>, opts: WlsOptions<T>) -> Result<WlsSolution<T>> {
    wls_solve_traced(problem, opts).map(|(sol, _)| sol)
}

/// Like [`wls_solve`], also returning the cost after every accepted step
/// (starting with the cost at the initial guess).
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn wls_solve_traced<T: Scalar>(problem: &WlsProblem<T>, opts: WlsOptions<T>) -> Result<(WlsSolution<T>, Vec<T>)> {
    problem.validate()?;
    if !(opts.tol > T::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut z = problem.initial_guess;
    let mut cost = wls_cost(problem, z);
    let mut trace = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (res, jac) = residuals_and_jacobian(problem, z);
        let step = gauss_newton_step(&res, &jac)
            .ok_or_else(|| Error::RankDeficient("normal equations are singular even after damping".into()))?;

        if step.norm() < opts.tol {
            let cand = z + step;
            let cand_cost = wls_cost(problem, cand);
            if cand_cost <= cost {
                z = cand;
                cost = cand_cost;
                trace.push(cost);
            }
            converged = true;
            break;
        }

        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = z + step * scale;
            let cand_cost = wls_cost(problem, cand);
            if cand_cost < cost {
                z = cand;
                cost = cand_cost;
                accepted = true;
                break;
            }
            scale *= c(0.5);
        }
        if !accepted {
            break;
        }
        trace.push(cost);
        if (step * scale).norm() < opts.tol {
            converged = true;
            break;
        }
    }

    Ok((WlsSolution { position: z, iterations, final_cost: cost, converged }, trace))
}
