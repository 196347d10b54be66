use nalgebra::{Matrix3, Vector3};
use nurbs_ett::nurbs::NurbsSurface;
use nurbs_ett::shape::{
    from_local, mahalanobis, shape_function, to_local, CandidateSet, GridLayout, LocalPoint,
    NoiseMetric, ParamGrid, Pose,
};
use nurbs_ett::tracker::{build_prototype, NurbsLayout};
use proptest::prelude::*;

fn car() -> NurbsSurface {
    build_prototype(&NurbsLayout::m2(), Vector3::new(2.2, 0.9, 0.75)).unwrap()
}

fn grid_of(s: &NurbsSurface, res: usize) -> GridLayout {
    GridLayout::for_surface(s, CandidateSet::Uniform { res_u: res, res_v: res }).unwrap()
}

fn metric(std: f64) -> NoiseMetric {
    NoiseMetric::new(Matrix3::identity() * std * std).unwrap()
}

fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos()
}

fn direction() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

#[test]
fn diagonal_noise_reduces_axis_distance() {
    let r = Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0));
    let d = mahalanobis(&LocalPoint(Vector3::new(2.0, 0.0, 0.0)), &Vector3::zeros(), &r).unwrap();
    assert!((d - 1.0).abs() < 1e-15);
    let e = mahalanobis(&LocalPoint(Vector3::new(3.0, 4.0, 0.0)), &Vector3::zeros(), &Matrix3::identity()).unwrap();
    assert!((e - 5.0).abs() < 1e-15);
}

#[test]
fn doubled_node_is_outside_by_node_norm() {
    let s = car();
    let layout = grid_of(&s, 32);
    let grid = ParamGrid::build(&layout, s.view());
    let m = metric(0.1);
    for p in grid.points().iter().step_by(37) {
        let d = grid.signed_distance(&LocalPoint(2.0 * p), &m).unwrap();
        let want = -m.distance(&(2.0 * p - p));
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
    }
}

#[test]
fn coarse_closest_within_one_cell_of_fine_search() {
    let s = car();
    let coarse_layout = grid_of(&s, 32);
    let fine_layout = grid_of(&s, 512);
    let coarse = ParamGrid::build(&coarse_layout, s.view());
    let fine = ParamGrid::build(&fine_layout, s.view());
    let pts = coarse.points();
    let mut cell: f64 = 0.0;
    for a in 0..32 {
        for b in 0..32 {
            let p = &pts[a * 32 + b];
            if a + 1 < 32 {
                cell = cell.max(angle(p, &pts[(a + 1) * 32 + b]));
            }
            if b + 1 < 32 {
                cell = cell.max(angle(p, &pts[a * 32 + b + 1]));
            }
        }
    }
    let mut state = 12345u64;
    for _ in 0..200 {
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let z = Vector3::new(next() * 3.0, next() * 1.5, next());
        let zl = LocalPoint(z);
        let c = coarse.closest(&zl).unwrap();
        let f = fine.closest(&zl).unwrap();
        assert!(angle(&z, &c.point) - angle(&z, &f.point) < cell);
    }
}

#[test]
fn d_max_is_the_interior_supremum() {
    let s = car();
    let layout = grid_of(&s, 24);
    let grid = ParamGrid::build(&layout, s.view());
    let m = metric(0.2);
    let d_max = grid.d_max(&m).unwrap();
    let at_center = grid.signed_distance(&LocalPoint(Vector3::zeros()), &m).unwrap();
    assert_eq!(at_center, d_max);
    let mut best = f64::NEG_INFINITY;
    for p in grid.points() {
        for k in 1..200 {
            let lambda = k as f64 / 200.0;
            best = best.max(grid.signed_distance(&LocalPoint(lambda * p), &m).unwrap());
        }
    }
    assert!(best <= d_max + 1e-12);
    assert!(best >= 0.99 * d_max);
}

#[test]
fn d_max_scales_with_uniform_scaling() {
    let s = car();
    let layout = grid_of(&s, 24);
    let m = metric(0.1);
    let base = ParamGrid::build(&layout, s.view()).d_max(&m).unwrap();
    let big = s.clone().with_scaling(Vector3::repeat(2.5)).unwrap();
    let scaled = ParamGrid::build(&layout, big.view()).d_max(&m).unwrap();
    assert!((scaled - 2.5 * base).abs() < 1e-9 * scaled);
}

#[test]
fn d_max_bounds_random_interior_samples() {
    let s = car();
    let layout = grid_of(&s, 32);
    let grid = ParamGrid::build(&layout, s.view());
    let m = metric(0.1);
    let d_max = grid.d_max(&m).unwrap();
    let pts = grid.points();
    for k in 0..1000 {
        let p = pts[(k * 7919) % pts.len()];
        let lambda = ((k * 104729) % 1000) as f64 / 1000.0;
        let d = grid.signed_distance(&LocalPoint(lambda * p), &m).unwrap();
        assert!(d <= d_max);
    }
}

#[test]
fn world_shape_function_uses_pose() {
    let s = car();
    let layout = grid_of(&s, 32);
    let grid = ParamGrid::build(&layout, s.view());
    let m = metric(0.1);
    let pose = Pose {
        center: Vector3::new(10.0, -4.0, 0.8),
        yaw: 0.7,
    };
    let inside = from_local(&LocalPoint(Vector3::new(0.5, 0.1, 0.0)), &pose.center, pose.yaw);
    let outside = from_local(&LocalPoint(Vector3::new(4.0, 0.0, 0.0)), &pose.center, pose.yaw);
    assert!(shape_function(&grid, &pose, &inside, &m).unwrap() > 0.0);
    assert!(shape_function(&grid, &pose, &outside, &m).unwrap() < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn local_frame_round_trip(
        x in -50.0f64..50.0, y in -50.0f64..50.0, z in -5.0f64..5.0,
        cx in -50.0f64..50.0, cy in -50.0f64..50.0, yaw in -4.0f64..4.0,
    ) {
        let c = Vector3::new(cx, cy, 0.5);
        let w = Vector3::new(x, y, z);
        let back = from_local(&to_local(&w, &c, yaw), &c, yaw);
        prop_assert!((back - w).norm() < 1e-12 * (1.0 + w.norm()));
    }

    #[test]
    fn radial_sign_consistency(pick in 0usize..1024, lambda in 0.01f64..0.99, beyond in 1.01f64..5.0) {
        let s = car();
        let layout = grid_of(&s, 32);
        let grid = ParamGrid::build(&layout, s.view());
        let m = metric(0.1);
        let p = grid.points()[pick % grid.points().len()];
        prop_assert!(grid.signed_distance(&LocalPoint(lambda * p), &m).unwrap() >= 0.0);
        prop_assert!(grid.signed_distance(&LocalPoint(beyond * p), &m).unwrap() <= 0.0);
    }

    #[test]
    fn nodes_lie_on_the_level_set(pick in 0usize..1024) {
        let s = car();
        let layout = grid_of(&s, 32);
        let grid = ParamGrid::build(&layout, s.view());
        let p = grid.points()[pick % grid.points().len()];
        let d = grid.signed_distance(&LocalPoint(p), &metric(0.1)).unwrap();
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn surface_samples_stay_near_the_level_set(u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let s = car();
        let layout = grid_of(&s, 64);
        let grid = ParamGrid::build(&layout, s.view());
        let m = metric(0.1);
        let z = s.eval(u, v);
        // Node spacing on this grid stays below 0.25 m.
        prop_assert!(grid.signed_distance(&LocalPoint(z), &m).unwrap().abs() < 0.25 / 0.1);
    }

    #[test]
    fn closest_ignores_positive_rescaling(z in direction(), k in 0.01f64..100.0) {
        let s = car();
        let layout = grid_of(&s, 32);
        let grid = ParamGrid::build(&layout, s.view());
        let a = grid.closest(&LocalPoint(z)).unwrap();
        let b = grid.closest(&LocalPoint(z * k)).unwrap();
        prop_assert_eq!(a.index, b.index);
    }

    #[test]
    fn tree_search_equals_linear_scan(z in direction()) {
        let s = car();
        let layout = grid_of(&s, 32);
        let grid = ParamGrid::build(&layout, s.view());
        let a = grid.closest(&LocalPoint(z)).unwrap();
        let b = grid.closest_exhaustive(&LocalPoint(z)).unwrap();
        prop_assert_eq!(a.point, b.point);
    }
}
