use nalgebra::Vector3;
use nurbs_ett::motion::{
    ccv_predict, process_model, wrap_angle, CurvatureRegularizer, ProcessNoiseConfig, ShapeState,
    TargetState, WeightDynamics, SCALE_FLOOR, WEIGHT_FLOOR,
};
use nurbs_ett::nurbs::gaussian_curvature;
use nurbs_ett::shape::{CandidateSet, ShapeTemplate};
use nurbs_ett::tracker::{build_prototype, NurbsLayout};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn template() -> ShapeTemplate {
    let layout = NurbsLayout::m1();
    let base = build_prototype(&layout, Vector3::new(2.2, 0.9, 0.75)).unwrap();
    ShapeTemplate::new(base, layout.closed_u).unwrap()
}

fn weighted(t: &ShapeTemplate, weights: Vec<f64>) -> TargetState {
    assert_eq!(weights.len(), t.effective_weight_count());
    TargetState {
        center: Vector3::new(3.0, -1.0, 0.75),
        yaw: 0.4,
        velocity: 5.0,
        curvature: 0.02,
        shape: ShapeState::ScaleAndWeights {
            scale: Vector3::new(1.0, 1.0, 1.0),
            weights,
        },
    }
}

fn plain(v: f64, c: f64, yaw: f64) -> TargetState {
    TargetState {
        center: Vector3::new(-2.0, 4.0, 0.7),
        yaw,
        velocity: v,
        curvature: c,
        shape: ShapeState::ScaleOnly {
            scale: Vector3::new(1.0, 1.0, 1.0),
        },
    }
}

/// Node curvature oracle evaluated straight from the surface.
fn node_curvatures(t: &ShapeTemplate, reg: &CurvatureRegularizer, weights: &[f64]) -> Vec<f64> {
    let s = t.surface(Vector3::repeat(1.0), Some(weights)).unwrap();
    reg.node_params()
        .iter()
        .map(|&(u, v)| gaussian_curvature(&s.differentials(u, v)).unwrap_or(0.0))
        .collect()
}

#[test]
fn zero_damping_leaves_weights_untouched() {
    let t = template();
    let reg = CurvatureRegularizer::new(&t, CandidateSet::Uniform { res_u: 12, res_v: 8 }).unwrap();
    let w: Vec<f64> = (0..t.effective_weight_count()).map(|k| 0.6 + 0.05 * (k % 9) as f64).collect();
    let s = weighted(&t, w.clone());
    let cfg = ProcessNoiseConfig {
        damping: 0.0,
        ..Default::default()
    };
    let dyn_ = WeightDynamics { template: &t, regularizer: &reg };
    let noise = vec![0.0; s.dim() + 2];
    let out = process_model(&s, &noise, &cfg, Some(dyn_)).unwrap();
    assert_eq!(out.shape.weights().unwrap(), w.as_slice());
}

#[test]
fn increments_follow_node_curvature_ratio() {
    let t = template();
    // A two-by-two field sits on the poles, so the maximum comes from the nodes.
    let reg = CurvatureRegularizer::new(&t, CandidateSet::Uniform { res_u: 2, res_v: 2 }).unwrap();
    let w: Vec<f64> = (0..t.effective_weight_count()).map(|k| 0.8 + 0.1 * (k % 5) as f64).collect();
    let full = t.expand_weights(&w);
    let view = t.view(&full, Vector3::repeat(1.0));
    let nu = 0.01;
    let inc = reg.increments(&view, nu);
    let k = node_curvatures(&t, &reg, &w);
    let k_max = k.iter().copied().fold(0.0, f64::max);
    assert!(k_max > 0.0);
    let arg = k.iter().position(|&x| x == k_max).unwrap();
    assert_eq!(inc[arg], nu);
    for (d, kn) in inc.iter().zip(&k) {
        let want = nu * (kn / k_max).clamp(0.0, 1.0);
        assert!((d - want).abs() < 1e-15);
    }
}

#[test]
fn increments_bounded_by_damping() {
    let t = template();
    let reg = CurvatureRegularizer::new(&t, CandidateSet::Uniform { res_u: 12, res_v: 8 }).unwrap();
    let mut state = 99u64;
    for _ in 0..20 {
        let w: Vec<f64> = (0..t.effective_weight_count())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                0.2 + 2.0 * ((state >> 11) as f64 / (1u64 << 53) as f64)
            })
            .collect();
        let full = t.expand_weights(&w);
        let inc = reg.increments(&t.view(&full, Vector3::repeat(1.0)), 0.05);
        assert!(inc.iter().all(|&d| (0.0..=0.05).contains(&d)));
    }
}

#[test]
fn sampled_transitions_average_to_deterministic_step() {
    let cfg = ProcessNoiseConfig {
        q_center: [0.04, 0.09, 0.01],
        ..Default::default()
    };
    let s = plain(8.0, 0.05, 1.1);
    let det = ccv_predict(&s, cfg.dt);
    let n = 100_000;
    let std = cfg.variances(s.dim()).iter().map(|v| v.sqrt()).collect::<Vec<_>>();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut sum = Vector3::zeros();
    for _ in 0..n {
        let mut noise: Vec<f64> = std.iter().map(|s| s * unit.sample(&mut rng)).collect();
        noise.extend([0.0, 0.0]);
        sum += process_model(&s, &noise, &cfg, None).unwrap().center;
    }
    let mean = sum / n as f64;
    for a in 0..3 {
        let bound = 3.0 * cfg.q_center[a].sqrt() / (n as f64).sqrt();
        assert!((mean[a] - det.center[a]).abs() < bound, "axis {a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn one_step_equals_split_steps(
        v in 0.0f64..20.0, c in -0.2f64..0.2, yaw in -3.1f64..3.1,
        t1 in 0.01f64..1.0, t2 in 0.01f64..1.0,
    ) {
        let s = plain(v, c, yaw);
        let two = ccv_predict(&ccv_predict(&s, t1), t2);
        let one = ccv_predict(&s, t1 + t2);
        prop_assert!((two.center - one.center).norm() < 1e-9);
        prop_assert!(wrap_angle(two.yaw - one.yaw).abs() < 1e-9);
    }

    #[test]
    fn shape_coordinates_stay_positive(
        noise in prop::collection::vec(-10.0f64..10.0, 3),
        weight_noise in -10.0f64..10.0,
    ) {
        let t = template();
        let reg = CurvatureRegularizer::new(&t, CandidateSet::Uniform { res_u: 6, res_v: 4 }).unwrap();
        let s = weighted(&t, vec![1.0; t.effective_weight_count()]);
        let mut n = vec![0.0; s.dim() + 2];
        n[6..9].copy_from_slice(&noise[..3]);
        for x in &mut n[9..s.dim()] {
            *x = weight_noise;
        }
        let out = process_model(&s, &n, &ProcessNoiseConfig::default(), Some(WeightDynamics { template: &t, regularizer: &reg })).unwrap();
        prop_assert!(out.shape.scale().iter().all(|&x| x >= SCALE_FLOOR));
        prop_assert!(out.shape.weights().unwrap().iter().all(|&w| w >= WEIGHT_FLOOR));
    }

    #[test]
    fn heading_stays_wrapped(v in 0.0f64..30.0, c in -1.0f64..1.0, yaw in -3.14f64..3.14) {
        let mut s = plain(v, c, yaw);
        for _ in 0..50 {
            s = ccv_predict(&s, 0.1);
            prop_assert!(s.yaw > -std::f64::consts::PI && s.yaw <= std::f64::consts::PI);
        }
    }
}
