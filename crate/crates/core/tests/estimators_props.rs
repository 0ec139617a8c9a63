use nloskit::estimators::new_bank;
use nloskit::rangesim::TrajectorySpec;
use nloskit::{
    compute_errors, kf_predict, kf_update, run_pipeline, simulate, summarize, wls_solve, wlsrkf_step, ErrorMode,
    EstimatorConfig, EstimatorKind, Exclusion, Filter, Fix, Point2d, RangeEpoch, Scenario, ScenarioConfig, Verdict,
    WlsProblem,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn bundled(case: &str) -> (Scenario, EstimatorConfig<f64>, Vec<Point2d>) {
    let sc = Scenario::bundled(case).unwrap();
    let cfg = sc.estimator_config().unwrap();
    let anchors = sc.anchors.iter().map(|a| a.position).collect();
    (sc, cfg, anchors)
}

/// Case 3 geometry without walls, `laps` times around.
fn los_config(laps: u32, seed: u64) -> ScenarioConfig {
    let mut cfg = Scenario::bundled("case3").unwrap().sim_config(seed);
    cfg.walls.clear();
    if let TrajectorySpec::RoundedRect { center, width, height, corner_radius, .. } = cfg.trajectory {
        cfg.trajectory = TrajectorySpec::RoundedRect { center, width, height, corner_radius, laps };
    }
    cfg
}

#[test]
fn nlos_weights_follow_the_gate_ratio() {
    let (sc, cfg, anchors) = bundled("case2");
    let sim = simulate(&sc.sim_config(3)).unwrap();
    let fixes = run_pipeline(EstimatorKind::WlsRkf, &sim.epochs, &anchors, &cfg).unwrap();
    let mut flagged = 0;
    for f in &fixes {
        for a in &f.anchors {
            match a.verdict {
                Verdict::Nlos => {
                    flagged += 1;
                    let g = a.gamma.unwrap();
                    assert!((a.weight * (g / cfg.chi2_threshold).sqrt() - 1.0).abs() < 1e-12);
                    assert!(a.weight < 1.0);
                }
                Verdict::Los => assert_eq!(a.weight, 1.0),
                Verdict::Skipped => unreachable!(),
            }
        }
    }
    assert!(flagged > 100);
}

/// On epochs without a flag, one WLS-RKF step equals a plain KF update of
/// every filter followed by an unweighted solve on the filtered distances.
#[test]
fn los_epochs_reduce_to_kf_plus_unweighted_solve() {
    let (_, cfg, anchors) = bundled("case3");
    let sim = simulate(&los_config(10, 11)).unwrap();
    assert!(sim.epochs.len() >= 10_000);
    let mut bank = new_bank(anchors.len(), cfg.kf);
    let mut prev: Option<Fix> = None;
    let (mut alarms, mut checked) = (0usize, 0usize);
    for epoch in &sim.epochs {
        let before: Vec<Filter> = bank.clone();
        let fix = wlsrkf_step(&mut bank, epoch, &anchors, &cfg, prev.as_ref()).unwrap();
        let flagged = fix.anchors.iter().filter(|a| a.verdict == Verdict::Nlos).count();
        alarms += flagged;
        if let (Some(p), 0) = (&prev, flagged) {
            let plain: Vec<Filter> = before
                .iter()
                .zip(&epoch.r)
                .map(|(s, r)| kf_update(s, &kf_predict(s).unwrap(), r.unwrap()).unwrap())
                .collect();
            assert_eq!(plain, bank, "k={}", epoch.k);
            let prob =
                WlsProblem::new(anchors.clone(), plain.iter().map(|s| s.distance()).collect(), vec![1.0; 4], p.position);
            let reference = wls_solve(&prob, cfg.wls).unwrap();
            assert_eq!(reference.position, fix.position, "k={}", epoch.k);
            checked += 1;
        }
        prev = Some(fix);
    }
    let rate = alarms as f64 / (sim.epochs.len() * anchors.len()) as f64;
    assert!(rate < 0.02, "false-alarm rate {rate}");
    assert!(checked > 9_000);
}

#[test]
fn feedback_replays_bit_exactly() {
    let (sc, cfg, anchors) = bundled("case1");
    let sim = simulate(&sc.sim_config(1)).unwrap();
    let mut bank = new_bank(anchors.len(), cfg.kf);
    let mut prev: Option<Fix> = None;
    let mut replayed = 0;
    for epoch in &sim.epochs {
        let before = bank.clone();
        let fix = wlsrkf_step(&mut bank, epoch, &anchors, &cfg, prev.as_ref()).unwrap();
        for (i, a) in fix.anchors.iter().enumerate() {
            if a.verdict == Verdict::Nlos {
                let y = fix.position.distance(anchors[i]);
                let expected = kf_update(&before[i], &kf_predict(&before[i]).unwrap(), y).unwrap();
                assert_eq!(bank[i], expected);
                replayed += 1;
            }
        }
        prev = Some(fix);
    }
    assert!(replayed > 50);
}

#[test]
fn step_bias_is_detected_on_onset() {
    let (_, cfg, anchors) = bundled("case1");
    let noise = Normal::new(0.0, 0.02).unwrap();
    let trials = 1000;
    let mut detected = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let start = Point2d::new(rng.random_range(3.0..7.0), rng.random_range(3.0..7.0));
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let vel = Point2d::new(heading.cos(), heading.sin()) * 0.5;
        let victim = rng.random_range(0..anchors.len());
        let mut bank = new_bank(anchors.len(), cfg.kf);
        let mut prev: Option<Fix> = None;
        let warmup = 40;
        for k in 0..=warmup {
            let tag = start + vel * (k as f64 * 0.05);
            let mut r: Vec<Option<f64>> = anchors.iter().map(|a| Some(a.distance(tag) + noise.sample(&mut rng))).collect();
            if k == warmup {
                let s = kf_predict(&bank[victim]).unwrap().s;
                r[victim] = r[victim].map(|v| v + 10.0 * s.sqrt());
            }
            let epoch = RangeEpoch { k, t: k as f64 * 0.05, r, truth: Some(tag) };
            let fix = wlsrkf_step(&mut bank, &epoch, &anchors, &cfg, prev.as_ref()).unwrap();
            if k == warmup && fix.anchors[victim].verdict == Verdict::Nlos {
                detected += 1;
            }
            prev = Some(fix);
        }
    }
    assert!(detected as f64 >= 0.99 * trials as f64, "{detected}/{trials}");
}

#[test]
fn missing_reading_is_skipped() {
    let (sc, cfg, anchors) = bundled("case1");
    let mut log = simulate(&sc.sim_config(1)).unwrap().epochs;
    log[50].r[2] = None;
    for kind in EstimatorKind::ALL {
        let fixes = run_pipeline(kind, &log, &anchors, &cfg).unwrap();
        assert_eq!(fixes.len(), log.len());
        assert_eq!(fixes[50].anchors[2].verdict, Verdict::Skipped);
        assert_eq!(fixes[50].anchors[2].weight, 0.0);
        assert!(fixes[50].position.distance(log[50].truth.unwrap()) < 1.5);
    }
}

#[test]
fn rkf_drifts_under_sustained_nlos() {
    let (sc, cfg, anchors) = bundled("case1");
    let sim = simulate(&sc.sim_config(1)).unwrap();
    let rms = |kind| {
        let fixes = run_pipeline(kind, &sim.epochs, &anchors, &cfg).unwrap();
        let errors = compute_errors(&fixes, &sim.truth(), ErrorMode::Euclidean).unwrap();
        summarize(kind.name(), &errors, &Exclusion::none(), ErrorMode::Euclidean).unwrap().rms_cm
    };
    let (rkf, wls) = (rms(EstimatorKind::Rkf), rms(EstimatorKind::WlsRkf));
    assert!(rkf > 5.0 * wls, "RKF {rkf} cm vs WLS-RKF {wls} cm");
}

#[test]
fn pipelines_are_deterministic() {
    let (sc, cfg, anchors) = bundled("case4");
    let sim = simulate(&sc.sim_config(9)).unwrap();
    for kind in EstimatorKind::ALL {
        let a = run_pipeline(kind, &sim.epochs, &anchors, &cfg).unwrap();
        let b = run_pipeline(kind, &sim.epochs, &anchors, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn anchor_order_does_not_matter(seed in 0u64..1000, kind_idx in 0usize..3) {
        let kind = EstimatorKind::ALL[kind_idx];
        let (sc, cfg, anchors) = bundled("case2");
        let log: Vec<_> = simulate(&sc.sim_config(seed)).unwrap().epochs.into_iter().take(160).collect();
        let mut perm: Vec<usize> = (0..anchors.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted_anchors: Vec<_> = perm.iter().map(|&i| anchors[i]).collect();
        let permuted_log: Vec<_> = log
            .iter()
            .map(|e| RangeEpoch { r: perm.iter().map(|&i| e.r[i]).collect(), ..e.clone() })
            .collect();
        let a = run_pipeline(kind, &log, &anchors, &cfg).unwrap();
        let b = run_pipeline(kind, &permuted_log, &permuted_anchors, &cfg).unwrap();
        for (fa, fb) in a.iter().zip(&b) {
            prop_assert!(fa.position.distance(fb.position) < 1e-6, "k={}", fa.k);
            for (j, &i) in perm.iter().enumerate() {
                prop_assert_eq!(fa.anchors[i].verdict, fb.anchors[j].verdict);
            }
        }
    }
}
