use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use nurbs_ett::motion::{ccv_predict, ShapeState, TargetState};
use nurbs_ett::shape::to_local;
use nurbs_ett::sim::{
    fit_bounding_box, generate_scenario, sample_measurements, trajectory, ScenarioConfig,
    Segment, Superellipsoid, Visibility,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quiet(visibility: Visibility) -> ScenarioConfig {
    ScenarioConfig {
        steps: 30,
        noise_std: 0.0,
        segments: vec![Segment {
            start: 0,
            velocity: 3.0,
            curvature: 0.05,
            visibility,
        }],
        ..ScenarioConfig::static_preset()
    }
}

fn body(cfg: &ScenarioConfig) -> Superellipsoid {
    Superellipsoid {
        half: cfg.half_dims(),
        exponent: cfg.exponent,
    }
}

/// Boundary and interior samples of an axis-aligned or rotated rectangle.
fn rectangle(l: f64, w: f64, yaw: f64, interior: bool) -> Vec<Vector3<f64>> {
    let (s, c) = yaw.sin_cos();
    let mut local = Vec::new();
    for i in 0..=20 {
        let t = i as f64 / 20.0 - 0.5;
        local.extend([(t * l, -w / 2.0), (t * l, w / 2.0), (-l / 2.0, t * w), (l / 2.0, t * w)]);
        if interior {
            local.push((0.3 * t * l, 0.2 * t * w));
        }
    }
    local
        .into_iter()
        .map(|(x, y)| Vector3::new(5.0 + c * x - s * y, -2.0 + s * x + c * y, 0.1 * x))
        .collect()
}

fn on_rectangle_boundary(p: &Vector3<f64>, l: f64, w: f64, yaw: f64) -> bool {
    let q = to_local(p, &Vector3::new(5.0, -2.0, 0.0), yaw).0;
    let dx = (q.x.abs() - l / 2.0).abs();
    let dy = (q.y.abs() - w / 2.0).abs();
    (dx <= 1e-9 && q.y.abs() <= w / 2.0 + 1e-9) || (dy <= 1e-9 && q.x.abs() <= l / 2.0 + 1e-9)
}

#[test]
fn noise_free_points_lie_on_the_body() {
    let cfg = quiet(Visibility::AllSides);
    let b = body(&cfg);
    for f in generate_scenario(&cfg).unwrap() {
        for p in &f.measurements {
            let local = to_local(p, &f.truth.center, f.truth.yaw).0;
            assert!(b.implicit(&local).abs() < 1e-9);
        }
    }
}

#[test]
fn rear_view_stays_on_the_rear_face() {
    let cfg = quiet(Visibility::RearOnly);
    let b = body(&cfg);
    let mut seen = 0;
    for f in generate_scenario(&cfg).unwrap() {
        let sensor = to_local(&f.sensor, &f.truth.center, f.truth.yaw).0;
        for p in &f.measurements {
            let local = to_local(p, &f.truth.center, f.truth.yaw).0;
            assert!(local.x < -0.3 * cfg.length);
            assert!(b.normal(&local).dot(&(sensor - local)) > 0.0);
            seen += 1;
        }
    }
    assert_eq!(seen, 30 * cfg.points_per_frame);
}

#[test]
fn side_view_faces_the_sensor() {
    let cfg = quiet(Visibility::SideOnly);
    let b = body(&cfg);
    for f in generate_scenario(&cfg).unwrap() {
        let sensor = to_local(&f.sensor, &f.truth.center, f.truth.yaw).0;
        for p in &f.measurements {
            let local = to_local(p, &f.truth.center, f.truth.yaw).0;
            assert!(b.normal(&local).dot(&(sensor - local)) > 0.0);
        }
    }
}

#[test]
fn empirical_noise_matches_configured_sigma() {
    let cfg = ScenarioConfig {
        steps: 200,
        points_per_frame: 500,
        ..ScenarioConfig::static_preset()
    };
    let frames = generate_scenario(&cfg).unwrap();
    let mut sum = Vector3::zeros();
    let mut sq = Vector3::zeros();
    let mut n = 0.0;
    for f in &frames {
        for (m, s) in f.measurements.iter().zip(&f.sources) {
            let e = m - s;
            sum += e;
            sq += e.component_mul(&e);
            n += 1.0;
        }
    }
    assert_eq!(n as usize, 100_000);
    for a in 0..3 {
        let mean = sum[a] / n;
        let std = (sq[a] / n - mean * mean).sqrt();
        assert!((std - cfg.noise_std).abs() < 0.02 * cfg.noise_std, "axis {a}: {std}");
    }
}

#[test]
fn truth_follows_iterated_ccv_steps() {
    for cfg in [ScenarioConfig::static_preset(), ScenarioConfig::dynamic_preset()] {
        let truth = trajectory(&cfg);
        assert_eq!(truth.len(), cfg.steps);
        for k in 1..truth.len() {
            let prev = &truth[k - 1];
            let step = ccv_predict(
                &TargetState {
                    center: prev.center,
                    yaw: prev.yaw,
                    velocity: prev.velocity,
                    curvature: prev.curvature,
                    shape: ShapeState::ScaleOnly {
                        scale: Vector3::repeat(1.0),
                    },
                },
                cfg.dt,
            );
            assert_eq!(truth[k].center, step.center);
            assert_eq!(truth[k].yaw, step.yaw);
        }
    }
}

#[test]
fn single_segment_truth_equals_k_fold_prediction() {
    let cfg = quiet(Visibility::AllSides);
    let truth = trajectory(&cfg);
    let mut s = TargetState {
        center: truth[0].center,
        yaw: truth[0].yaw,
        velocity: 3.0,
        curvature: 0.05,
        shape: ShapeState::ScaleOnly {
            scale: Vector3::repeat(1.0),
        },
    };
    for t in &truth {
        assert_eq!(t.center, s.center);
        s = ccv_predict(&s, cfg.dt);
    }
}

#[test]
fn same_seed_same_frames() {
    let cfg = ScenarioConfig::dynamic_preset();
    assert_eq!(generate_scenario(&cfg).unwrap(), generate_scenario(&cfg).unwrap());
    let other = ScenarioConfig { seed: 2, ..cfg.clone() };
    assert_ne!(generate_scenario(&cfg).unwrap()[5].measurements, generate_scenario(&other).unwrap()[5].measurements);
}

#[test]
fn frames_have_the_requested_size() {
    for cfg in [ScenarioConfig::static_preset(), ScenarioConfig::dynamic_preset()] {
        for f in generate_scenario(&cfg).unwrap() {
            assert_eq!(f.measurements.len(), cfg.points_per_frame);
        }
    }
}

#[test]
fn invisible_body_yields_empty_frames() {
    let cfg = ScenarioConfig {
        steps: 3,
        min_incidence: 1.5,
        ..quiet(Visibility::RearOnly)
    };
    for f in generate_scenario(&cfg).unwrap() {
        assert!(f.measurements.is_empty());
        assert!(f.bbox.is_none());
    }
}

#[test]
fn full_hull_fraction_samples_the_rectangle_boundary() {
    let cloud = rectangle(4.0, 1.6, 0.4, true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let picked = sample_measurements(&cloud, 50, 1.0, &mut rng);
    assert_eq!(picked.len(), 50);
    assert!(picked.iter().all(|p| on_rectangle_boundary(p, 4.0, 1.6, 0.4)));
}

#[test]
fn zero_hull_fraction_draws_from_the_cloud() {
    let cloud = rectangle(4.0, 1.6, 0.0, true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let picked = sample_measurements(&cloud, 50, 0.0, &mut rng);
    assert_eq!(picked.len(), 50);
    assert!(picked.iter().all(|p| cloud.contains(p)));
    assert!(picked.iter().any(|p| !on_rectangle_boundary(p, 4.0, 1.6, 0.0)));
}

#[test]
fn small_cloud_is_sampled_with_replacement() {
    let cloud = rectangle(2.0, 1.0, 0.0, false)[..6].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(sample_measurements(&cloud, 50, 0.5, &mut rng).len(), 50);
}

/// Minimum-area direction by brute force over 0.01° steps.
fn scan_yaw(points: &[Vector3<f64>]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..9000 {
        let a = (k as f64 / 100.0).to_radians();
        let (e, n) = (Vector2::new(a.cos(), a.sin()), Vector2::new(-a.sin(), a.cos()));
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for p in points {
            let q = Vector2::new(p.xy().dot(&e), p.xy().dot(&n));
            lo = lo.inf(&q);
            hi = hi.sup(&q);
        }
        let area = (hi - lo).x * (hi - lo).y;
        if area < best.0 {
            best = (area, a);
        }
    }
    best.1
}

fn quarter_turn_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI / 2.0);
    d.min(PI / 2.0 - d)
}

#[test]
fn rotated_rectangle_yaw_recovered() {
    let yaw = 37f64.to_radians();
    let pts = rectangle(4.5, 1.8, yaw, true);
    let b = fit_bounding_box(&pts).unwrap();
    assert!(quarter_turn_gap(b.yaw, yaw) < 0.5f64.to_radians());
    assert!(quarter_turn_gap(b.yaw, scan_yaw(&pts)) < 0.5f64.to_radians());
    assert!((b.length - 4.5).abs() < 1e-9);
    assert!((b.width - 1.8).abs() < 1e-9);
}

#[test]
fn flat_cluster_gives_zero_height() {
    let pts = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)].map(|(x, y)| Vector3::new(x, y, 0.4));
    let b = fit_bounding_box(&pts).unwrap();
    assert_eq!(b.height, 0.0);
    assert!((b.length - 2.0).abs() < 1e-9 && (b.width - 1.0).abs() < 1e-9);
    assert!(!b.degenerate);
}

#[test]
fn collinear_cloud_falls_back_to_axis_box() {
    let pts: Vec<_> = (0..6).map(|k| Vector3::new(k as f64, 2.0 * k as f64, 0.0)).collect();
    assert!(fit_bounding_box(&pts).unwrap().degenerate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fitted_box_encloses_points_and_beats_axis_box(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 4..60),
    ) {
        let pts: Vec<_> = pts.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect();
        let b = fit_bounding_box(&pts).unwrap();
        prop_assert!(pts.iter().all(|p| b.contains(p, 1e-9)));
        prop_assert!(b.length >= b.width);
        prop_assert!(b.yaw > -PI / 2.0 && b.yaw <= PI / 2.0);
        let (lo, hi) = pts.iter().fold(
            (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.xy()), hi.sup(&p.xy())),
        );
        prop_assert!(b.length * b.width <= (hi - lo).x * (hi - lo).y + 1e-9);
    }

    #[test]
    fn sample_size_is_exact(n in 1usize..120, frac in 0.0f64..=1.0, seed in 0u64..1000) {
        let cloud = rectangle(3.0, 1.5, 0.2, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(sample_measurements(&cloud, n, frac, &mut rng).len(), n);
    }
}
