//! Location-error statistics: RMS, 90th percentile and empirical CDF.
//!
//! Errors are carried in meters and reported in centimeters. Percentiles
//! interpolate linearly between closest ranks (`h = (n − 1)·p`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::PositionFix;
use crate::geometry::Point2;
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorMode {
    Euclidean,
    AxisX,
    AxisY,
}

impl ErrorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorMode::Euclidean => "euclidean",
            ErrorMode::AxisX => "x",
            ErrorMode::AxisY => "y",
        }
    }

    pub fn error<T: Scalar>(self, est: Point2<T>, truth: Point2<T>) -> T {
        match self {
            ErrorMode::Euclidean => est.distance(truth),
            ErrorMode::AxisX => (est.x - truth.x).abs(),
            ErrorMode::AxisY => (est.y - truth.y).abs(),
        }
    }
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(ErrorMode::Euclidean),
            "x" | "axis-x" => Ok(ErrorMode::AxisX),
            "y" | "axis-y" => Ok(ErrorMode::AxisY),
            other => Err(Error::invalid(format!("unknown metric {other:?} (expected euclidean, x or y)"))),
        }
    }
}

/// Per-epoch error magnitude under `mode`.
pub fn compute_errors<T: Scalar>(
    fixes: &[PositionFix<T>],
    truth: &[(usize, Point2<T>)],
    mode: ErrorMode,
) -> Result<Vec<(usize, T)>> {
    let lookup: HashMap<usize, Point2<T>> = truth.iter().copied().collect();
    fixes
        .iter()
        .map(|f| {
            let t = lookup.get(&f.k).ok_or_else(|| Error::invalid(format!("no ground truth for epoch {}", f.k)))?;
            Ok((f.k, mode.error(f.position, *t)))
        })
        .collect()
}

/// Epochs left out of a summary, as half-open index ranges `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Exclusion {
    pub ranges: Vec<(usize, Option<usize>)>,
    pub description: String,
}

impl Exclusion {
    pub fn none() -> Self {
        Self { ranges: Vec::new(), description: "none".into() }
    }

    pub fn range(start: usize, end: Option<usize>) -> Self {
        let mut e = Self::none();
        e.push(start, end);
        e
    }

    /// Excludes epochs before `first_of_lap2`.
    pub fn first_lap(first_of_lap2: usize) -> Self {
        Self { ranges: vec![(0, Some(first_of_lap2))], description: format!("lap1 (k<{first_of_lap2})") }
    }

    pub fn push(&mut self, start: usize, end: Option<usize>) {
        let text = match end {
            Some(e) => format!("{start}..{e}"),
            None => format!("{start}.."),
        };
        if self.ranges.is_empty() {
            self.description = text;
        } else {
            self.description = format!("{},{text}", self.description);
        }
        self.ranges.push((start, end));
    }

    pub fn excludes(&self, k: usize) -> bool {
        self.ranges.iter().any(|&(s, e)| k >= s && e.is_none_or(|e| k < e))
    }

    /// Parses comma-separated ranges such as `0..100,300..`.
    /// `lap1` is resolved by the caller, which knows the lap boundaries.
    pub fn parse_ranges(spec: &str) -> Result<Self> {
        let mut out = Self::none();
        if spec.trim().is_empty() || spec.trim() == "none" {
            return Ok(out);
        }
        for part in spec.split(',') {
            let part = part.trim();
            let (a, b) = part
                .split_once("..")
                .ok_or_else(|| Error::invalid(format!("exclusion {part:?} is not a range like 10..20 or 10..")))?;
            let start = if a.is_empty() { 0 } else { parse_index(a)? };
            let end = if b.is_empty() { None } else { Some(parse_index(b)?) };
            if end.is_some_and(|e| e < start) {
                return Err(Error::invalid(format!("exclusion {part:?} ends before it starts")));
            }
            out.push(start, end);
        }
        Ok(out)
    }
}

fn parse_index(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::invalid(format!("bad epoch index {s:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub estimator: String,
    pub mode: ErrorMode,
    pub n_epochs: usize,
    pub rms_cm: f64,
    pub p90_cm: f64,
    /// Sorted `(error cm, cumulative fraction)` pairs.
    pub cdf: Vec<(f64, f64)>,
    pub exclusion: String,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile_sorted<T: Scalar>(sorted: &[T], q: T) -> T {
    assert!(!sorted.is_empty());
    let h = T::from_usize(sorted.len() - 1).unwrap() * q;
    let lo = h.floor().to_usize().unwrap();
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
}

pub fn summarize<T: Scalar>(
    estimator: &str,
    errors: &[(usize, T)],
    exclusion: &Exclusion,
    mode: ErrorMode,
) -> Result<ErrorReport> {
    let mut kept: Vec<f64> =
        errors.iter().filter(|(k, _)| !exclusion.excludes(*k)).map(|(_, e)| e.to_f64().unwrap() * 100.0).collect();
    if kept.is_empty() {
        return Err(Error::invalid(format!("no epochs left after exclusion {}", exclusion.description)));
    }
    kept.sort_by(f64::total_cmp);
    let n = kept.len();
    let rms = (kept.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let p90 = percentile_sorted(&kept, c(0.9));
    let cdf = kept.iter().enumerate().map(|(i, e)| (*e, (i + 1) as f64 / n as f64)).collect();
    Ok(ErrorReport {
        estimator: estimator.to_string(),
        mode,
        n_epochs: n,
        rms_cm: rms,
        p90_cm: p90,
        cdf,
        exclusion: exclusion.description.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Quality;

    fn fix(k: usize, x: f64, y: f64) -> PositionFix<f64> {
        PositionFix { k, t: 0.0, position: Point2::new(x, y), anchors: vec![], quality: Quality::Ok, converged: true }
    }

    #[test]
    fn error_modes() {
        let truth = [(0, Point2::new(5.0, 3.0))];
        let f = [fix(0, 5.03, 3.04)];
        let e = compute_errors(&f, &truth, ErrorMode::Euclidean).unwrap();
        assert!((e[0].1 - 0.05).abs() < 1e-12);
        let e = compute_errors(&f, &truth, ErrorMode::AxisY).unwrap();
        assert!((e[0].1 - 0.04).abs() < 1e-12);
        let e = compute_errors(&f, &truth, ErrorMode::AxisX).unwrap();
        assert!((e[0].1 - 0.03).abs() < 1e-12);
        let e = compute_errors(&[fix(0, 5.0, 3.0)], &truth, ErrorMode::Euclidean).unwrap();
        assert_eq!(e[0].1, 0.0);
    }

    #[test]
    fn missing_truth_names_epoch() {
        let err = compute_errors(&[fix(3, 0.0, 0.0)], &[(0, Point2::new(0.0, 0.0))], ErrorMode::Euclidean).unwrap_err();
        assert!(err.to_string().contains('3'));
    }

    #[test]
    fn constant_error() {
        let errs: Vec<_> = (0..100).map(|k| (k, 0.02)).collect();
        let r = summarize("LS", &errs, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        assert!((r.rms_cm - 2.0).abs() < 1e-12);
        assert!((r.p90_cm - 2.0).abs() < 1e-12);
        assert_eq!(r.n_epochs, 100);
    }

    #[test]
    fn one_to_ten() {
        let errs: Vec<_> = (1..=10).map(|k| (k, k as f64 / 100.0)).collect();
        let r = summarize("LS", &errs, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        assert!((r.rms_cm - 38.5f64.sqrt()).abs() < 1e-9);
        assert!((r.rms_cm - 6.205).abs() < 1e-3);
        assert!((r.p90_cm - 9.1).abs() < 1e-9);
        assert_eq!(r.cdf.last().unwrap().1, 1.0);
        assert!(r.cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn exclusions() {
        let errs: Vec<_> = (0..10).map(|k| (k, 0.01)).collect();
        let ex = Exclusion::parse_ranges("0..3,8..").unwrap();
        assert_eq!(ex.description, "0..3,8..");
        let r = summarize("LS", &errs, &ex, ErrorMode::Euclidean).unwrap();
        assert_eq!(r.n_epochs, 5);
        assert_eq!(r.exclusion, "0..3,8..");
        assert!(summarize("LS", &errs, &Exclusion::range(0, None), ErrorMode::Euclidean).is_err());
        assert!(Exclusion::parse_ranges("5..2").is_err());
        assert!(Exclusion::parse_ranges("lap1").is_err());
        assert!(Exclusion::parse_ranges("none").unwrap().ranges.is_empty());
        assert!(Exclusion::first_lap(4).excludes(3));
        assert!(!Exclusion::first_lap(4).excludes(4));
    }
}
