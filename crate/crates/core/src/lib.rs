//! NLOS-robust range-based positioning.
//!
//! The crate implements a per-anchor Kalman-filter bank with χ² innovation
//! gating to flag non-line-of-sight ranges, a weighted Gauss–Newton position
//! solver that down-weights flagged anchors and feeds the solved geometry back
//! into their filters (WLS-RKF), plus unweighted LS and robust-KF baselines.
//! Around it sit a through-the-wall range simulator, error metrics and CSV /
//! JSON file formats.
//!
//! The filter, solver and geometry code is generic over [`Scalar`]
//! (`f32`/`f64`); the aliases below fix the common `f64` instantiation.
//!
//! ```
//! use nloskit::{compute_errors, run_pipeline, simulate, summarize, EstimatorKind, Exclusion, Scenario};
//!
//! let sc = Scenario::bundled("case1").expect("bundled scenario");
//! let sim = simulate(&sc.sim_config(sc.seed))?;
//! let anchors: Vec<_> = sc.anchors.iter().map(|a| a.position).collect();
//! let cfg = sc.estimator_config()?;
//!
//! let fixes = run_pipeline(EstimatorKind::WlsRkf, &sim.epochs, &anchors, &cfg)?;
//! let errors = compute_errors(&fixes, &sim.truth(), sc.metric())?;
//! let report = summarize("WLS-RKF", &errors, &Exclusion::none(), sc.metric())?;
//! assert!(report.rms_cm < 5.0);
//! # Ok::<(), nloskit::Error>(())
//! ```

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
pub mod kfbank;
pub mod metrics;
pub mod rangesim;
pub mod scalar;
pub mod scenario;
pub mod wls;

pub use error::{Error, Result};
pub use estimators::{
    identify_nlos, ls_step, rkf_step, run_pipeline, wlsrkf_step, AnchorRecord, EstimatorConfig, EstimatorKind,
    Quality, Verdict,
};
pub use geometry::{path_obstructions, segment_crosses_wall, Anchor, Obstruction, Point2, Wall};
pub use kfbank::{kf_init, kf_predict, kf_update, mahalanobis_sq, KfParams, KfState, Prediction};
pub use estimators::PositionFix;
pub use metrics::{compute_errors, summarize, ErrorMode, ErrorReport, Exclusion};
pub use rangesim::{make_line_trajectory, make_rounded_rect_trajectory, simulate, ttw_bias, RangeEpoch, ScenarioConfig, Simulation, Trajectory};
pub use scalar::Scalar;
pub use scenario::Scenario;
pub use wls::{wls_cost, wls_solve, WlsOptions, WlsProblem, WlsSolution};

pub type Point2d = Point2<f64>;
pub type Point2f = Point2<f32>;
pub type Fix = PositionFix<f64>;
pub type Filter = KfState<f64>;
pub type Filterf = KfState<f32>;
