//! Per-anchor distance filters.
//!
//! Each anchor gets an independent constant-velocity Kalman filter on the
//! state `[distance, distance rate]`:
//!
//! ```text
//! A = [[1, dt], [0, 1]]   Γ = [0, dt]ᵀ   H = [1, 0]
//! Q = σ_u²                R = σ_x²
//! ```
//!
//! The driving noise enters only through the rate component. The innovation
//! of a prediction, normalized by its variance, is the gating statistic used
//! to flag NLOS measurements.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Vec2<T> = [T; 2];
pub type Mat2<T> = [[T; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfParams<T> {
    pub dt: T,
    /// Driving-noise standard deviation.
    pub sigma_u: T,
    /// Measurement-noise standard deviation.
    pub sigma_x: T,
    /// Initial variance of the rate component. Zero reproduces the reference
    /// setup; a positive value helps when replaying real logs.
    pub initial_rate_var: T,
}

impl<T: Scalar> KfParams<T> {
    pub fn new(dt: T, sigma_u: T, sigma_x: T) -> Result<Self> {
        let params = Self { dt, sigma_u, sigma_x, initial_rate_var: T::zero() };
        params.validate()?;
        Ok(params)
    }

    pub fn with_initial_rate_var(mut self, var: T) -> Result<Self> {
        self.initial_rate_var = var;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(self.dt) && pos(self.sigma_u) && pos(self.sigma_x)) {
            return Err(Error::invalid("filter dt, sigma_u and sigma_x must be positive"));
        }
        if !(self.initial_rate_var >= T::zero() && self.initial_rate_var.is_finite()) {
            return Err(Error::invalid("initial rate variance must be >= 0"));
        }
        Ok(())
    }

    /// Measurement variance `R = σ_x²`.
    pub fn r(&self) -> T {
        self.sigma_x * self.sigma_x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfState<T> {
    pub x_hat: Vec2<T>,
    pub p: Mat2<T>,
    pub params: KfParams<T>,
    pub initialized: bool,
}

impl<T: Scalar> KfState<T> {
    /// A filter that has not seen a measurement yet.
    pub fn uninitialized(params: KfParams<T>) -> Self {
        let z = T::zero();
        Self { x_hat: [z, z], p: [[z, z], [z, z]], params, initialized: false }
    }

    /// Filtered distance `H·x̂`.
    pub fn distance(&self) -> T {
        self.x_hat[0]
    }

    pub fn rate(&self) -> T {
        self.x_hat[1]
    }

    /// Advances the filter by one step without a measurement.
    pub fn coast(&self, pred: &Prediction<T>) -> Self {
        Self { x_hat: pred.x_pred, p: pred.p_pred, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub x_pred: Vec2<T>,
    pub p_pred: Mat2<T>,
    /// Predicted distance `H·x_pred`.
    pub d: T,
    /// Innovation variance `H·P_pred·Hᵀ + R`.
    pub s: T,
}

pub fn kf_init<T: Scalar>(r0: T, params: KfParams<T>) -> Result<KfState<T>> {
    params.validate()?;
    if !(r0 >= T::zero() && r0.is_finite()) {
        return Err(Error::invalid(format!("initial distance must be finite and >= 0, got {r0}")));
    }
    let z = T::zero();
    Ok(KfState { x_hat: [r0, z], p: [[params.r(), z], [z, params.initial_rate_var]], params, initialized: true })
}

pub fn kf_predict<T: Scalar>(state: &KfState<T>) -> Result<Prediction<T>> {
    if !state.initialized {
        return Err(Error::Uninitialized);
    }
    let dt = state.params.dt;
    let [r, v] = state.x_hat;
    let [[p00, p01], [p10, p11]] = state.p;
    let x_pred = [r + dt * v, v];
    // A P Aᵀ, expanded for A = [[1, dt], [0, 1]].
    let a00 = p00 + dt * (p10 + p01) + dt * dt * p11;
    let a01 = p01 + dt * p11;
    let a10 = p10 + dt * p11;
    let qu = dt * dt * state.params.sigma_u * state.params.sigma_u;
    let p_pred = [[a00, a01], [a10, p11 + qu]];
    Ok(Prediction { x_pred, p_pred, d: x_pred[0], s: a00 + state.params.r() })
}

pub fn kf_update<T: Scalar>(state: &KfState<T>, pred: &Prediction<T>, y: T) -> Result<KfState<T>> {
    kf_update_with_variance(state, pred, y, state.params.r())
}

/// Measurement update with an explicit measurement variance (used when the
/// variance is inflated for suspected outliers).
pub fn kf_update_with_variance<T: Scalar>(
    state: &KfState<T>,
    pred: &Prediction<T>,
    y: T,
    r_var: T,
) -> Result<KfState<T>> {
    if !state.initialized {
        return Err(Error::Uninitialized);
    }
    if !y.is_finite() {
        return Err(Error::invalid(format!("measurement must be finite, got {y}")));
    }
    let [[p00, p01], [p10, p11]] = pred.p_pred;
    let s = p00 + r_var;
    let k = [p00 / s, p10 / s];
    let innov = y - pred.d;
    let x_hat = [pred.x_pred[0] + k[0] * innov, pred.x_pred[1] + k[1] * innov];
    // (I - K H) P_pred
    let n00 = p00 - k[0] * p00;
    let n01 = p01 - k[0] * p01;
    let n10 = p10 - k[1] * p00;
    let n11 = p11 - k[1] * p01;
    let half = T::lit(0.5);
    let off = (n01 + n10) * half;
    Ok(KfState { x_hat, p: [[n00, off], [off, n11]], params: state.params, initialized: true })
}

/// Squared Mahalanobis distance of measurement `r` from the prediction.
pub fn mahalanobis_sq<T: Scalar>(pred: &Prediction<T>, r: T) -> T {
    let e = r - pred.d;
    e * e / pred.s
}
