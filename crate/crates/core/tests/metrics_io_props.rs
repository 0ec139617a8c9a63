use nloskit::io::{
    read_fixes, read_measurement_log, read_report_csv, read_truth, write_fixes, write_measurement_log, write_report_csv,
    write_truth, write_truth_rows,
};
use nloskit::metrics::percentile_sorted;
use nloskit::{run_pipeline, simulate, summarize, ErrorMode, EstimatorKind, Exclusion, Scenario};
use proptest::prelude::*;

fn errors() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec(0.0..2.0f64, 1..300).prop_map(|v| v.into_iter().enumerate().collect())
}

proptest! {
    #[test]
    fn rms_dominates_mean(errs in errors()) {
        let r = summarize("X", &errs, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        let mean = errs.iter().map(|(_, e)| e * 100.0).sum::<f64>() / errs.len() as f64;
        prop_assert!(r.rms_cm >= mean - 1e-9);
    }

    #[test]
    fn p90_is_bounded_and_monotone(errs in errors(), extra in 0.0..1.0f64) {
        let r = summarize("X", &errs, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        let lo = errs.iter().map(|e| e.1).fold(f64::INFINITY, f64::min) * 100.0;
        let hi = errs.iter().map(|e| e.1).fold(0.0, f64::max) * 100.0;
        prop_assert!(r.p90_cm >= lo - 1e-9 && r.p90_cm <= hi + 1e-9);
        let mut more = errs.clone();
        more.push((errs.len(), r.p90_cm / 100.0 + extra + 1e-9));
        let r2 = summarize("X", &more, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        prop_assert!(r2.p90_cm >= r.p90_cm - 1e-9);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(errs in errors()) {
        let r = summarize("X", &errs, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        prop_assert!(r.cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(r.cdf.last().unwrap().1, 1.0);
        let sorted: Vec<f64> = r.cdf.iter().map(|c| c.0).collect();
        prop_assert_eq!(percentile_sorted(&sorted, 0.9), r.p90_cm);
    }

    #[test]
    fn exclusion_only_drops_epochs(errs in errors(), a in 0usize..300, len in 0usize..300) {
        let ex = Exclusion::range(a, Some(a + len));
        let kept: Vec<_> = errs.iter().copied().filter(|(k, _)| !ex.excludes(*k)).collect();
        prop_assume!(!kept.is_empty());
        let r = summarize("X", &errs, &ex, ErrorMode::Euclidean).unwrap();
        let direct = summarize("X", &kept, &Exclusion::none(), ErrorMode::Euclidean).unwrap();
        prop_assert_eq!(r.n_epochs, kept.len());
        prop_assert_eq!(r.rms_cm, direct.rms_cm);
        prop_assert_eq!(r.cdf, direct.cdf);
    }
}

#[test]
fn simulated_files_round_trip_byte_for_byte() {
    let sc = Scenario::bundled("case4").unwrap();
    let sim = simulate(&sc.sim_config(2)).unwrap();
    let n = sc.anchors.len();

    let mut log = Vec::new();
    write_measurement_log(&mut log, &sim.epochs, n).unwrap();
    let back = read_measurement_log(log.as_slice()).unwrap();
    assert_eq!(back.epochs, sim.epochs);
    let mut again = Vec::new();
    write_measurement_log(&mut again, &back.epochs, n).unwrap();
    assert_eq!(log, again);

    let mut truth = Vec::new();
    write_truth(&mut truth, &sim.trajectory).unwrap();
    let rows = read_truth(truth.as_slice()).unwrap();
    let mut again = Vec::new();
    write_truth_rows(&mut again, &rows).unwrap();
    assert_eq!(truth, again);

    let anchors: Vec<_> = sc.anchors.iter().map(|a| a.position).collect();
    let cfg = sc.estimator_config().unwrap();
    let mut reports = Vec::new();
    for kind in EstimatorKind::ALL {
        let fixes = run_pipeline(kind, &sim.epochs, &anchors, &cfg).unwrap();
        let mut buf = Vec::new();
        write_fixes(&mut buf, &fixes, n).unwrap();
        let (m, back) = read_fixes(buf.as_slice()).unwrap();
        assert_eq!(m, n);
        assert!(back.iter().zip(&fixes).all(|(a, b)| a.position == b.position && a.anchors == b.anchors));
        let mut again = Vec::new();
        write_fixes(&mut again, &back, n).unwrap();
        assert_eq!(buf, again);
        let errors = nloskit::compute_errors(&fixes, &sim.truth(), ErrorMode::AxisY).unwrap();
        reports.push(summarize(kind.name(), &errors, &Exclusion::range(0, Some(100)), ErrorMode::AxisY).unwrap());
    }
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &reports).unwrap();
    let back = read_report_csv(buf.as_slice()).unwrap();
    let mut again = Vec::new();
    write_report_csv(&mut again, &back).unwrap();
    assert_eq!(buf, again);
    assert_eq!(back[2].estimator, "WLS-RKF");
    assert_eq!(back[2].mode, ErrorMode::AxisY);
}
