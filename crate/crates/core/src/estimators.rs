//! Per-epoch position estimators.
//!
//! * [`ls_step`]: unweighted least squares on the raw distances.
//! * [`rkf_step`]: per-anchor filters whose measurement variance is inflated
//!   while the innovation fails the χ² gate; fix from the filtered distances.
//! * [`wlsrkf_step`]: χ² gate with a positivity condition flags NLOS
//!   anchors, which enter the solve with their predicted distance and a
//!   weight `√(χ²/γ)`; their filters are then corrected with the distance
//!   from the solved position.
//!
//! A missing reading (`None`) drops that anchor from the epoch: its filter
//! coasts on the prediction and it gets weight 0 in the solve.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{centroid, Point2};
use crate::kfbank::{kf_init, kf_predict, kf_update, kf_update_with_variance, mahalanobis_sq, KfParams, KfState, Prediction};
use crate::rangesim::RangeEpoch;
use crate::scalar::{c, Scalar};
use crate::wls::{wls_solve, WlsOptions, WlsProblem};

/// Threshold used for the χ²₁ gate unless configured otherwise.
pub const DEFAULT_CHI2_THRESHOLD: f64 = 6.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig<T> {
    pub chi2_threshold: T,
    pub kf: KfParams<T>,
    pub wls: WlsOptions<T>,
    /// Fixes with fewer LOS anchors than this are flagged degraded.
    pub min_los: usize,
    /// Cap on variance inflations per anchor and epoch for the RKF baseline.
    pub max_inflations: usize,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(kf: KfParams<T>) -> Self {
        Self { chi2_threshold: c(DEFAULT_CHI2_THRESHOLD), kf, wls: WlsOptions::default(), min_los: 2, max_inflations: 20 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi2_threshold > T::zero() && self.chi2_threshold.is_finite()) {
            return Err(Error::invalid("chi2 threshold must be positive"));
        }
        if self.min_los < 2 {
            return Err(Error::invalid("min_los must be at least 2"));
        }
        self.kf.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Los,
    Nlos,
    /// No reading for this anchor in the epoch.
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Los => "LOS",
            Verdict::Nlos => "NLOS",
            Verdict::Skipped => "SKIP",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LOS" => Ok(Verdict::Los),
            "NLOS" => Ok(Verdict::Nlos),
            "SKIP" => Ok(Verdict::Skipped),
            other => Err(Error::invalid(format!("unknown verdict {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    Ok,
    /// Fewer LOS anchors than `min_los`.
    Degraded,
    /// First epoch: no prediction existed yet.
    Bootstrap,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Ok => "OK",
            Quality::Degraded => "DEGRADED",
            Quality::Bootstrap => "BOOTSTRAP",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "OK" => Ok(Quality::Ok),
            "DEGRADED" => Ok(Quality::Degraded),
            "BOOTSTRAP" => Ok(Quality::Bootstrap),
            other => Err(Error::invalid(format!("unknown quality {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorRecord<T> {
    pub verdict: Verdict,
    /// Gating statistic; `None` when no prediction was available.
    pub gamma: Option<T>,
    pub weight: T,
    /// Distance fed to the solver; `None` for skipped anchors.
    pub distance_used: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionFix<T> {
    pub k: usize,
    pub t: T,
    pub position: Point2<T>,
    pub anchors: Vec<AnchorRecord<T>>,
    pub quality: Quality,
    /// Whether the position solve met its step tolerance.
    pub converged: bool,
}

impl<T: Scalar> PositionFix<T> {
    pub fn los_count(&self) -> usize {
        self.anchors.iter().filter(|a| a.verdict == Verdict::Los).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Ls,
    Rkf,
    WlsRkf,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Ls, EstimatorKind::Rkf, EstimatorKind::WlsRkf];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "LS",
            EstimatorKind::Rkf => "RKF",
            EstimatorKind::WlsRkf => "WLS-RKF",
        }
    }

    /// Lowercase name for file names.
    pub fn slug(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Rkf => "rkf",
            EstimatorKind::WlsRkf => "wls-rkf",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ls" => Ok(EstimatorKind::Ls),
            "rkf" => Ok(EstimatorKind::Rkf),
            "wls-rkf" | "wlsrkf" => Ok(EstimatorKind::WlsRkf),
            other => Err(Error::invalid(format!("unknown estimator {other:?} (expected LS, RKF or WLS-RKF)"))),
        }
    }
}

/// NLOS iff the gate fails and the measurement exceeds the prediction.
/// Negative innovations are always LOS since NLOS bias is positive.
pub fn identify_nlos<T: Scalar>(gamma: T, r: T, d_pred: T, threshold: T) -> Verdict {
    if gamma > threshold && r > d_pred {
        Verdict::Nlos
    } else {
        Verdict::Los
    }
}

/// Weight of an NLOS anchor: the inverse of its normalized Mahalanobis distance.
pub fn nlos_weight<T: Scalar>(gamma: T, threshold: T) -> T {
    (threshold / gamma).sqrt()
}

fn check_epoch<T: Scalar>(epoch: &RangeEpoch<T>, n_anchors: usize) -> Result<()> {
    if epoch.r.len() != n_anchors {
        return Err(Error::invalid(format!("epoch has {} distances for {n_anchors} anchors", epoch.r.len())));
    }
    if let Some(bad) = epoch.r.iter().flatten().find(|r| !(**r >= T::zero() && r.is_finite())) {
        return Err(Error::invalid(format!("distance {bad} is not finite and nonnegative")));
    }
    if epoch.valid_count() < 3 {
        return Err(Error::invalid(format!("only {} valid distances; at least 3 required", epoch.valid_count())));
    }
    Ok(())
}

fn initial_guess<T: Scalar>(prev: Option<&PositionFix<T>>, anchors: &[Point2<T>], weights: &[T]) -> Point2<T> {
    match prev {
        Some(f) => f.position,
        None => centroid(anchors.iter().zip(weights).filter(|(_, w)| **w > T::zero()).map(|(a, _)| *a))
            .unwrap_or_default(),
    }
}

fn solve<T: Scalar>(
    anchors: &[Point2<T>],
    distances: Vec<T>,
    weights: Vec<T>,
    guess: Point2<T>,
    opts: WlsOptions<T>,
) -> Result<(Point2<T>, bool)> {
    let problem = WlsProblem::new(anchors.to_vec(), distances, weights, guess);
    let sol = wls_solve(&problem, opts)?;
    Ok((sol.position, sol.converged))
}

fn skipped<T: Scalar>() -> AnchorRecord<T> {
    AnchorRecord { verdict: Verdict::Skipped, gamma: None, weight: T::zero(), distance_used: None }
}

fn unweighted_fix<T: Scalar>(
    epoch: &RangeEpoch<T>,
    anchors: &[Point2<T>],
    distances: Vec<Option<T>>,
    guess: Option<&PositionFix<T>>,
    quality: Quality,
    opts: WlsOptions<T>,
) -> Result<PositionFix<T>> {
    let weights: Vec<T> = distances.iter().map(|d| if d.is_some() { T::one() } else { T::zero() }).collect();
    let init = initial_guess(guess, anchors, &weights);
    let records = distances
        .iter()
        .map(|d| match d {
            Some(d) => AnchorRecord { verdict: Verdict::Los, gamma: None, weight: T::one(), distance_used: Some(*d) },
            None => skipped(),
        })
        .collect();
    let (position, converged) =
        solve(anchors, distances.iter().map(|d| d.unwrap_or_else(T::zero)).collect(), weights, init, opts)?;
    Ok(PositionFix { k: epoch.k, t: epoch.t, position, anchors: records, quality, converged })
}

/// Unweighted least squares on the raw distances, warm-started at `init`.
pub fn ls_step<T: Scalar>(
    epoch: &RangeEpoch<T>,
    anchors: &[Point2<T>],
    init: Option<&PositionFix<T>>,
    opts: WlsOptions<T>,
) -> Result<PositionFix<T>> {
    check_epoch(epoch, anchors.len())?;
    let quality = if init.is_none() { Quality::Bootstrap } else { Quality::Ok };
    unweighted_fix(epoch, anchors, epoch.r.clone(), init, quality, opts)
}

/// Initializes every filter with a reading and solves unweighted.
fn bootstrap<T: Scalar>(
    bank: &mut [KfState<T>],
    epoch: &RangeEpoch<T>,
    anchors: &[Point2<T>],
    config: &EstimatorConfig<T>,
) -> Result<PositionFix<T>> {
    for (state, r) in bank.iter_mut().zip(&epoch.r) {
        if let Some(r) = r {
            *state = kf_init(*r, config.kf)?;
        }
    }
    unweighted_fix(epoch, anchors, epoch.r.clone(), None, Quality::Bootstrap, config.wls)
}

fn check_bank<T: Scalar>(bank: &[KfState<T>], anchors: &[Point2<T>]) -> Result<()> {
    if bank.len() != anchors.len() {
        return Err(Error::invalid(format!("filter bank has {} filters for {} anchors", bank.len(), anchors.len())));
    }
    Ok(())
}

/// Creates a bank of uninitialized filters, one per anchor.
pub fn new_bank<T: Scalar>(n: usize, params: KfParams<T>) -> Vec<KfState<T>> {
    vec![KfState::uninitialized(params); n]
}

/// One WLS-RKF epoch. `bank` is advanced in place.
pub fn wlsrkf_step<T: Scalar>(
    bank: &mut [KfState<T>],
    epoch: &RangeEpoch<T>,
    anchors: &[Point2<T>],
    config: &EstimatorConfig<T>,
    prev_fix: Option<&PositionFix<T>>,
) -> Result<PositionFix<T>> {
    check_bank(bank, anchors)?;
    check_epoch(epoch, anchors.len())?;
    if bank.iter().all(|s| !s.initialized) {
        return bootstrap(bank, epoch, anchors, config);
    }

    let n = anchors.len();
    let chi2 = config.chi2_threshold;
    let mut records = Vec::with_capacity(n);
    let mut preds: Vec<Option<Prediction<T>>> = vec![None; n];
    let mut distances = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);

    for i in 0..n {
        let state = &mut bank[i];
        let Some(r) = epoch.r[i] else {
            if state.initialized {
                *state = state.coast(&kf_predict(state)?);
            }
            records.push(skipped());
            distances.push(T::zero());
            weights.push(T::zero());
            continue;
        };
        if !state.initialized {
            // Anchor heard for the first time: start its filter, trust the reading.
            *state = kf_init(r, config.kf)?;
            records.push(AnchorRecord { verdict: Verdict::Los, gamma: None, weight: T::one(), distance_used: Some(r) });
            distances.push(r);
            weights.push(T::one());
            continue;
        }
        let pred = kf_predict(state)?;
        let gamma = mahalanobis_sq(&pred, r);
        let verdict = identify_nlos(gamma, r, pred.d, chi2);
        let (r_hat, w) = match verdict {
            Verdict::Nlos => {
                preds[i] = Some(pred);
                (pred.d, nlos_weight(gamma, chi2))
            }
            _ => {
                *state = kf_update(state, &pred, r)?;
                (state.distance(), T::one())
            }
        };
        records.push(AnchorRecord { verdict, gamma: Some(gamma), weight: w, distance_used: Some(r_hat) });
        distances.push(r_hat);
        weights.push(w);
    }

    let guess = initial_guess(prev_fix, anchors, &weights);
    let (position, converged) = solve(anchors, distances, weights, guess, config.wls)?;

    // Feed the solved geometry back into the filters that were not updated.
    for (i, pred) in preds.iter().enumerate() {
        if let Some(pred) = pred {
            let y = position.distance(anchors[i]);
            bank[i] = kf_update(&bank[i], pred, y)?;
        }
    }

    let fix = PositionFix { k: epoch.k, t: epoch.t, position, anchors: records, quality: Quality::Ok, converged };
    let quality = if fix.los_count() < config.min_los { Quality::Degraded } else { Quality::Ok };
    Ok(PositionFix { quality, ..fix })
}

/// Inflates the measurement variance by `γ/χ²` until the gate passes or the
/// cap is hit. Returns the final variance and the number of inflations.
pub fn inflate_variance<T: Scalar>(pred: &Prediction<T>, r: T, base_var: T, chi2: T, max_inflations: usize) -> (T, usize) {
    let p00 = pred.s - base_var;
    let mut var = base_var;
    let mut gamma = mahalanobis_sq(pred, r);
    let mut count = 0;
    while gamma > chi2 && count < max_inflations {
        var *= gamma / chi2;
        let e = r - pred.d;
        gamma = e * e / (p00 + var);
        count += 1;
    }
    (var, count)
}

/// One epoch of the robust-KF baseline. `bank` is advanced in place.
pub fn rkf_step<T: Scalar>(
    bank: &mut [KfState<T>],
    epoch: &RangeEpoch<T>,
    anchors: &[Point2<T>],
    config: &EstimatorConfig<T>,
    prev_fix: Option<&PositionFix<T>>,
) -> Result<PositionFix<T>> {
    check_bank(bank, anchors)?;
    check_epoch(epoch, anchors.len())?;
    if bank.iter().all(|s| !s.initialized) {
        return bootstrap(bank, epoch, anchors, config);
    }

    let chi2 = config.chi2_threshold;
    let mut records = Vec::with_capacity(anchors.len());
    let mut filtered = Vec::with_capacity(anchors.len());
    for (state, r) in bank.iter_mut().zip(&epoch.r) {
        let Some(r) = *r else {
            if state.initialized {
                *state = state.coast(&kf_predict(state)?);
            }
            records.push(skipped());
            filtered.push(None);
            continue;
        };
        if !state.initialized {
            *state = kf_init(r, config.kf)?;
            records.push(AnchorRecord { verdict: Verdict::Los, gamma: None, weight: T::one(), distance_used: Some(r) });
            filtered.push(Some(r));
            continue;
        }
        let pred = kf_predict(state)?;
        let gamma = mahalanobis_sq(&pred, r);
        let (var, inflations) = inflate_variance(&pred, r, config.kf.r(), chi2, config.max_inflations);
        *state = kf_update_with_variance(state, &pred, r, var)?;
        let verdict = if inflations > 0 { Verdict::Nlos } else { Verdict::Los };
        records.push(AnchorRecord { verdict, gamma: Some(gamma), weight: T::one(), distance_used: Some(state.distance()) });
        filtered.push(Some(state.distance().max(T::zero())));
    }

    let mut fix = unweighted_fix(epoch, anchors, filtered, prev_fix, Quality::Ok, config.wls)?;
    fix.anchors = records;
    if fix.los_count() < config.min_los {
        fix.quality = Quality::Degraded;
    }
    Ok(fix)
}

/// Runs one estimator over a whole log with a fresh filter bank.
pub fn run_pipeline<T: Scalar>(
    kind: EstimatorKind,
    log: &[RangeEpoch<T>],
    anchors: &[Point2<T>],
    config: &EstimatorConfig<T>,
) -> Result<Vec<PositionFix<T>>> {
    if log.is_empty() {
        return Err(Error::invalid("empty measurement log"));
    }
    config.validate()?;
    let mut bank = new_bank(anchors.len(), config.kf);
    let mut fixes: Vec<PositionFix<T>> = Vec::with_capacity(log.len());
    for epoch in log {
        let prev = fixes.last();
        let fix = match kind {
            EstimatorKind::Ls => ls_step(epoch, anchors, prev, config.wls),
            EstimatorKind::Rkf => rkf_step(&mut bank, epoch, anchors, config, prev),
            EstimatorKind::WlsRkf => wlsrkf_step(&mut bank, epoch, anchors, config, prev),
        }
        .map_err(|e| e.at_epoch(epoch.k))?;
        fixes.push(fix);
    }
    Ok(fixes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn square() -> Vec<Point2<f64>> {
        vec![p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0), p(0.0, 10.0)]
    }

    fn config() -> EstimatorConfig<f64> {
        EstimatorConfig::new(KfParams::new(0.05, 0.5, 0.02).unwrap())
    }

    fn epoch(k: usize, tag: Point2<f64>) -> RangeEpoch<f64> {
        RangeEpoch { k, t: k as f64 * 0.05, r: square().iter().map(|a| Some(a.distance(tag))).collect(), truth: Some(tag) }
    }

    #[test]
    fn identification_rule() {
        assert_eq!(identify_nlos(9.0, 5.3, 5.0, 6.2), Verdict::Nlos);
        assert_eq!(identify_nlos(9.0, 4.7, 5.0, 6.2), Verdict::Los);
        assert_eq!(identify_nlos(0.0, 5.0, 5.0, 6.2), Verdict::Los);
        assert_eq!(identify_nlos(6.2, 5.3, 5.0, 6.2), Verdict::Los);
    }

    #[test]
    fn parse_names() {
        assert_eq!("wls-rkf".parse::<EstimatorKind>().unwrap(), EstimatorKind::WlsRkf);
        assert_eq!("WLS_RKF".parse::<EstimatorKind>().unwrap(), EstimatorKind::WlsRkf);
        assert_eq!("LS".parse::<EstimatorKind>().unwrap(), EstimatorKind::Ls);
        assert!("ekf".parse::<EstimatorKind>().is_err());
        for q in [Quality::Ok, Quality::Degraded, Quality::Bootstrap] {
            assert_eq!(q.as_str().parse::<Quality>().unwrap(), q);
        }
        for v in [Verdict::Los, Verdict::Nlos, Verdict::Skipped] {
            assert_eq!(v.as_str().parse::<Verdict>().unwrap(), v);
        }
    }

    #[test]
    fn first_epoch_bootstraps() {
        let cfg = config();
        let mut bank = new_bank(4, cfg.kf);
        let e = epoch(0, p(5.0, 3.0));
        let fix = wlsrkf_step(&mut bank, &e, &square(), &cfg, None).unwrap();
        assert_eq!(fix.quality, Quality::Bootstrap);
        assert!(fix.position.distance(p(5.0, 3.0)) < 1e-6);
        for (s, r) in bank.iter().zip(&e.r) {
            assert!(s.initialized);
            assert_eq!(s.x_hat, [r.unwrap(), 0.0]);
        }
        let fixes = run_pipeline(EstimatorKind::WlsRkf, &[e], &square(), &cfg).unwrap();
        assert_eq!(fixes.len(), 1);
        assert_eq!(fixes[0].quality, Quality::Bootstrap);
    }

    #[test]
    fn empty_log_rejected() {
        assert!(run_pipeline::<f64>(EstimatorKind::Ls, &[], &square(), &config()).is_err());
    }

    #[test]
    fn too_few_readings_rejected_with_epoch_index() {
        let mut e = epoch(7, p(5.0, 3.0));
        e.r[0] = None;
        e.r[1] = None;
        let err = run_pipeline(EstimatorKind::WlsRkf, &[e], &square(), &config()).unwrap_err();
        assert!(matches!(err, Error::AtEpoch { k: 7, .. }), "{err}");
    }

    #[test]
    fn ls_exact_distances() {
        let fix = ls_step(&epoch(0, p(5.0, 3.0)), &square(), None, WlsOptions::default()).unwrap();
        assert!(fix.position.distance(p(5.0, 3.0)) < 1e-6);
        assert!(fix.anchors.iter().all(|a| a.weight == 1.0));
    }

    #[test]
    fn static_all_los_keeps_unit_weights() {
        let cfg = config();
        let log: Vec<_> = (0..50).map(|k| epoch(k, p(5.0, 3.0))).collect();
        let fixes = run_pipeline(EstimatorKind::WlsRkf, &log, &square(), &cfg).unwrap();
        for f in &fixes[1..] {
            assert_eq!(f.quality, Quality::Ok);
            assert!(f.anchors.iter().all(|a| a.verdict == Verdict::Los && a.weight == 1.0));
            assert!(f.position.distance(p(5.0, 3.0)) < 1e-6);
        }
    }

    #[test]
    fn injected_bias_is_flagged_and_mitigated() {
        let cfg = config();
        let anchors = square();
        let tag = p(5.0, 3.0);
        let mut bank = new_bank(4, cfg.kf);
        let mut prev = None;
        for k in 0..40 {
            prev = Some(wlsrkf_step(&mut bank, &epoch(k, tag), &anchors, &cfg, prev.as_ref()).unwrap());
        }
        let mut e = epoch(40, tag);
        e.r[2] = Some(e.r[2].unwrap() + 0.7);
        let before = bank.clone();
        let fix = wlsrkf_step(&mut bank, &e, &anchors, &cfg, prev.as_ref()).unwrap();
        let rec = fix.anchors[2];
        assert_eq!(rec.verdict, Verdict::Nlos);
        let gamma = rec.gamma.unwrap();
        assert!(gamma > 6.2);
        assert!(rec.weight < 1.0);
        assert!((rec.weight * (gamma / 6.2).sqrt() - 1.0).abs() < 1e-12);
        assert!(fix.position.distance(tag) < 0.05);
        assert!((bank[2].distance() - fix.position.distance(anchors[2])).abs() < 0.05);

        // Feedback replays exactly as a plain update with the solved range.
        let pred = kf_predict(&before[2]).unwrap();
        let replay = kf_update(&before[2], &pred, fix.position.distance(anchors[2])).unwrap();
        assert_eq!(replay, bank[2]);
    }

    #[test]
    fn missing_reading_skips_anchor() {
        let cfg = config();
        let mut log: Vec<_> = (0..10).map(|k| epoch(k, p(5.0, 3.0))).collect();
        log[5].r[2] = None;
        let fixes = run_pipeline(EstimatorKind::WlsRkf, &log, &square(), &cfg).unwrap();
        let rec = fixes[5].anchors[2];
        assert_eq!(rec.verdict, Verdict::Skipped);
        assert_eq!(rec.weight, 0.0);
        assert!(fixes[5].position.distance(p(5.0, 3.0)) < 1e-6);
        let fixes = run_pipeline(EstimatorKind::Rkf, &log, &square(), &cfg).unwrap();
        assert_eq!(fixes[5].anchors[2].verdict, Verdict::Skipped);
        let fixes = run_pipeline(EstimatorKind::Ls, &log, &square(), &cfg).unwrap();
        assert_eq!(fixes[5].anchors[2].verdict, Verdict::Skipped);
    }

    #[test]
    fn rkf_outlier_moves_less_than_plain_update() {
        let cfg = config();
        let s = kf_init(5.0, cfg.kf).unwrap();
        let pred = kf_predict(&s).unwrap();
        let r = pred.d + 10.0 * pred.s.sqrt();
        let (var, n) = inflate_variance(&pred, r, cfg.kf.r(), 6.2, 20);
        assert!(n > 0 && var > cfg.kf.r());
        let robust = kf_update_with_variance(&s, &pred, r, var).unwrap();
        let plain = kf_update(&s, &pred, r).unwrap();
        assert!(robust.distance() - pred.d < plain.distance() - pred.d);
        assert!(robust.distance() > pred.d);
        // The inflation stops once the gate passes.
        let e = r - pred.d;
        assert!(e * e / (pred.s - cfg.kf.r() + var) <= 6.2 + 1e-9);
    }

    #[test]
    fn degraded_when_too_few_los() {
        let cfg = EstimatorConfig { min_los: 4, ..config() };
        let anchors = square();
        let tag = p(5.0, 3.0);
        let mut bank = new_bank(4, cfg.kf);
        let mut prev = None;
        for k in 0..30 {
            prev = Some(wlsrkf_step(&mut bank, &epoch(k, tag), &anchors, &cfg, prev.as_ref()).unwrap());
        }
        let mut e = epoch(30, tag);
        e.r[3] = Some(e.r[3].unwrap() + 0.8);
        let fix = wlsrkf_step(&mut bank, &e, &anchors, &cfg, prev.as_ref()).unwrap();
        assert_eq!(fix.quality, Quality::Degraded);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig { min_los: 1, ..config() }.validate().is_err());
        assert!(EstimatorConfig { chi2_threshold: 0.0, ..config() }.validate().is_err());
    }
}
