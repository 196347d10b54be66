//! Synthetic LiDAR scenarios around a superellipsoid vehicle.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Measurement;
use crate::motion::{ccv_predict, wrap_angle, ShapeState, TargetState};
use crate::shape::{from_local, to_local, LocalPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Visibility {
    AllSides,
    RearOnly,
    SideOnly,
}

/// Motion and sensor placement from frame `start` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: usize,
    pub velocity: f64,
    pub curvature: f64,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub steps: usize,
    pub dt: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Superellipsoid exponent; 2 is an ellipsoid, larger is boxier.
    pub exponent: f64,
    pub initial_pose: InitialPose,
    pub segments: Vec<Segment>,
    /// Horizontal sensor offset from the target centre, m.
    pub sensor_distance: f64,
    /// Sensor height above ground, m.
    pub sensor_height: f64,
    pub points_per_frame: usize,
    pub hull_fraction: f64,
    pub noise_std: f64,
    /// Raw surface samples per frame before culling.
    pub candidates: usize,
    /// Minimum cosine between surface normal and sensor ray.
    pub min_incidence: f64,
    /// Share of measurements replaced by ground clutter.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::static_preset()
    }
}

impl ScenarioConfig {
    /// Parked car observed from every side, 50 points per frame.
    pub fn static_preset() -> Self {
        Self {
            steps: 200,
            dt: 0.1,
            length: 4.5,
            width: 1.8,
            height: 1.5,
            exponent: 4.0,
            initial_pose: InitialPose {
                x: 12.0,
                y: 5.0,
                yaw: 0.3,
            },
            segments: vec![Segment {
                start: 0,
                velocity: 0.0,
                curvature: 0.0,
                visibility: Visibility::AllSides,
            }],
            sensor_distance: 10.0,
            sensor_height: 1.8,
            points_per_frame: 50,
            hull_fraction: 0.5,
            noise_std: 0.1,
            candidates: 800,
            min_incidence: 0.5,
            outlier_fraction: 0.0,
            seed: 1,
        }
    }

    /// Car driving straight and through two bends, seen alternately from
    /// the side and from behind, 20 points per frame.
    pub fn dynamic_preset() -> Self {
        let seg = |start, curvature, visibility| Segment {
            start,
            velocity: 8.0,
            curvature,
            visibility,
        };
        Self {
            steps: 300,
            initial_pose: InitialPose {
                x: 0.0,
                y: 0.0,
                yaw: 0.2,
            },
            segments: vec![
                seg(0, 0.0, Visibility::SideOnly),
                seg(75, 0.02, Visibility::RearOnly),
                seg(150, 0.0, Visibility::SideOnly),
                seg(225, -0.02, Visibility::RearOnly),
            ],
            points_per_frame: 20,
            ..Self::static_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.into()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.length > 0.0 && self.width > 0.0 && self.height > 0.0) {
            return bad("vehicle dimensions must be positive");
        }
        if !(self.exponent >= 1.0) {
            return bad("exponent must be at least 1");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.hull_fraction) {
            return bad("hull_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1]");
        }
        if self.segments.is_empty() || self.segments[0].start != 0 {
            return bad("segments must start at frame 0");
        }
        if self.segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return bad("segment starts must be strictly increasing");
        }
        Ok(())
    }

    pub fn segment_at(&self, frame: usize) -> &Segment {
        self.segments
            .iter()
            .rev()
            .find(|s| s.start <= frame)
            .unwrap_or(&self.segments[0])
    }

    pub fn half_dims(&self) -> Vector3<f64> {
        Vector3::new(self.length, self.width, self.height) * 0.5
    }
}

/// Analytic vehicle body `Σ |p_i / a_i|^e = 1` in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superellipsoid {
    pub half: Vector3<f64>,
    pub exponent: f64,
}

impl Superellipsoid {
    pub fn implicit(&self, p: &Vector3<f64>) -> f64 {
        (0..3)
            .map(|i| (p[i] / self.half[i]).abs().powf(self.exponent))
            .sum::<f64>()
            - 1.0
    }

    /// Boundary point along the ray through `dir`.
    pub fn project(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        let k = (0..3)
            .map(|i| (dir[i] / self.half[i]).abs().powf(self.exponent))
            .sum::<f64>()
            .powf(1.0 / self.exponent);
        dir / k
    }

    pub fn normal(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let e = self.exponent;
        Vector3::from_fn(|i, _| {
            p[i].signum() * (p[i].abs() / self.half[i]).powf(e - 1.0) / self.half[i]
        })
        .normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub velocity: f64,
    pub curvature: f64,
}

impl TruthState {
    fn as_target(&self) -> TargetState {
        TargetState {
            center: self.center,
            yaw: self.yaw,
            velocity: self.velocity,
            curvature: self.curvature,
            shape: ShapeState::ScaleOnly {
                scale: Vector3::repeat(1.0),
            },
        }
    }
}

/// Minimum-area rectangle in x-y extruded over the z range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vector3<f64>,
    /// Direction of the long side, in `(-π/2, π/2]`.
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Set when the points were collinear in x-y and an axis-aligned box was used.
    pub degenerate: bool,
}

impl OrientedBox {
    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        let l = to_local(p, &self.center, self.yaw).0;
        l.x.abs() <= self.length / 2.0 + tol
            && l.y.abs() <= self.width / 2.0 + tol
            && l.z.abs() <= self.height / 2.0 + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub index: usize,
    pub truth: TruthState,
    /// Full vehicle length, width and height.
    pub dims: Vector3<f64>,
    pub sensor: Vector3<f64>,
    /// Visible surface samples without noise.
    pub cloud: Vec<Vector3<f64>>,
    /// Noise-free origin of every measurement.
    pub sources: Vec<Vector3<f64>>,
    pub measurements: Vec<Vector3<f64>>,
    /// Box around the noise-free visible cloud.
    pub bbox: Option<OrientedBox>,
}

impl GroundTruthFrame {
    pub fn measurement_set(&self, std: f64) -> Vec<Measurement> {
        self.measurements
            .iter()
            .map(|p| Measurement::isotropic(*p, std))
            .collect()
    }
}

/// Ground-truth trajectory: frame `k` is `k` CCV steps from the start,
/// with speed and curvature switched at segment boundaries.
pub fn trajectory(config: &ScenarioConfig) -> Vec<TruthState> {
    let seg = config.segment_at(0);
    let mut state = TruthState {
        center: Vector3::new(config.initial_pose.x, config.initial_pose.y, config.height / 2.0),
        yaw: wrap_angle(config.initial_pose.yaw),
        velocity: seg.velocity,
        curvature: seg.curvature,
    };
    let mut out = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        if k > 0 {
            let next = ccv_predict(&state.as_target(), config.dt);
            let seg = config.segment_at(k);
            state = TruthState {
                center: next.center,
                yaw: next.yaw,
                velocity: seg.velocity,
                curvature: seg.curvature,
            };
        }
        out.push(state);
    }
    out
}

fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    rng
}

fn sensor_offset(config: &ScenarioConfig, visibility: Visibility) -> Vector3<f64> {
    let z = config.sensor_height - config.height / 2.0;
    let d = config.sensor_distance;
    match visibility {
        Visibility::RearOnly => Vector3::new(-d, 0.0, z),
        Visibility::SideOnly | Visibility::AllSides => Vector3::new(0.0, -d, z),
    }
}

pub fn generate_frame(config: &ScenarioConfig, index: usize, truth: TruthState) -> GroundTruthFrame {
    let body = Superellipsoid {
        half: config.half_dims(),
        exponent: config.exponent,
    };
    let visibility = config.segment_at(index).visibility;
    let sensor_local = sensor_offset(config, visibility);
    let mut rng = frame_rng(config.seed, index);

    let mut surface = Vec::new();
    for _ in 0..config.candidates {
        let dir = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        if dir.norm() < 1e-12 {
            continue;
        }
        let p = body.project(&dir);
        let keep = match visibility {
            Visibility::AllSides => true,
            _ => {
                let ray = (sensor_local - p).normalize();
                body.normal(&p).dot(&ray) >= config.min_incidence
            }
        };
        if keep {
            surface.push(from_local(&LocalPoint(p), &truth.center, truth.yaw));
        }
    }

    let picked = sample_indices_for(&surface, config.points_per_frame, config.hull_fraction, &mut rng);
    let sources: Vec<Vector3<f64>> = picked.iter().map(|&i| surface[i]).collect();
    let noise = Normal::new(0.0, config.noise_std).expect("validated noise");
    let mut measurements: Vec<Vector3<f64>> = sources
        .iter()
        .map(|p| p + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
        .collect();
    let n_out = (config.outlier_fraction * measurements.len() as f64).round() as usize;
    let reach = config.length;
    for m in measurements.iter_mut().take(n_out) {
        *m = Vector3::new(
            truth.center.x + rng.gen_range(-reach..reach),
            truth.center.y + rng.gen_range(-reach..reach),
            rng.gen_range(0.0..0.2),
        );
    }
    let bbox = (surface.len() >= 4).then(|| fit_bounding_box(&surface).ok()).flatten();
    GroundTruthFrame {
        index,
        truth,
        dims: Vector3::new(config.length, config.width, config.height),
        sensor: from_local(&LocalPoint(sensor_local), &truth.center, truth.yaw),
        cloud: surface,
        sources,
        measurements,
        bbox,
    }
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Vec<GroundTruthFrame>> {
    config.validate()?;
    Ok(trajectory(config)
        .into_iter()
        .enumerate()
        .map(|(k, t)| generate_frame(config, k, t))
        .collect())
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Indices of the x-y convex hull, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Vector3<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (points[a], points[b]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
    });
    idx.dedup_by(|a, b| points[*a].xy() == points[*b].xy());
    if idx.len() < 3 {
        return idx;
    }
    let xy = |i: usize| points[i].xy();
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(&xy(hull[hull.len() - 2]), &xy(hull[hull.len() - 1]), &xy(i)) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-300)).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Cloud points lying on the x-y hull boundary.
pub fn hull_boundary(cloud: &[Vector3<f64>]) -> Vec<usize> {
    let hull = convex_hull(cloud);
    if hull.len() < 3 {
        return hull;
    }
    let edges: Vec<(Vector2<f64>, Vector2<f64>)> = (0..hull.len())
        .map(|k| (cloud[hull[k]].xy(), cloud[hull[(k + 1) % hull.len()]].xy()))
        .collect();
    (0..cloud.len())
        .filter(|&i| {
            let p = cloud[i].xy();
            edges.iter().any(|(a, b)| segment_distance(&p, a, b) <= 1e-9)
        })
        .collect()
}

fn draw<R: Rng>(pool: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    if pool.is_empty() || count == 0 {
        return Vec::new();
    }
    if pool.len() >= count {
        sample_indices(rng, pool.len(), count)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    } else {
        (0..count).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
    }
}

/// Indices of `round(hull_fraction · n)` points on the hull boundary and
/// the rest from the whole cloud; draws repeat only when a pool is too small.
pub fn sample_indices_for<R: Rng>(
    cloud: &[Vector3<f64>],
    n: usize,
    hull_fraction: f64,
    rng: &mut R,
) -> Vec<usize> {
    if cloud.is_empty() {
        return Vec::new();
    }
    let n_hull = ((hull_fraction * n as f64).round() as usize).min(n);
    let boundary = if n_hull > 0 { hull_boundary(cloud) } else { Vec::new() };
    let all: Vec<usize> = (0..cloud.len()).collect();
    let mut picked = draw(&boundary, n_hull, rng);
    let rest = n - picked.len();
    picked.extend(draw(&all, rest, rng));
    picked
}

pub fn sample_measurements<R: Rng>(
    cloud: &[Vector3<f64>],
    n: usize,
    hull_fraction: f64,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    sample_indices_for(cloud, n, hull_fraction, rng)
        .into_iter()
        .map(|i| cloud[i])
        .collect()
}

fn normalize_box_yaw(yaw: f64) -> f64 {
    let mut y = wrap_angle(yaw);
    if y > PI / 2.0 {
        y -= PI;
    } else if y <= -PI / 2.0 {
        y += PI;
    }
    y
}

/// Rotating calipers over the x-y hull.
pub fn fit_bounding_box(points: &[Vector3<f64>]) -> Result<OrientedBox> {
    if points.len() < 4 {
        return Err(Error::Contract(format!(
            "box fitting needs at least 4 points, got {}",
            points.len()
        )));
    }
    let (zmin, zmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let z_mid = 0.5 * (zmin + zmax);
    let height = zmax - zmin;
    let hull = convex_hull(points);
    let area2: f64 = (0..hull.len())
        .map(|k| {
            let a = points[hull[k]].xy();
            let b = points[hull[(k + 1) % hull.len()]].xy();
            a.x * b.y - a.y * b.x
        })
        .sum();
    let span = points
        .iter()
        .map(|p| p.xy())
        .fold(0.0_f64, |m, p| m.max((p - points[0].xy()).norm()));
    if hull.len() < 3 || area2.abs() <= 1e-12 * span.max(1.0).powi(2) {
        let (lo, hi) = points.iter().fold(
            (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.xy()), hi.sup(&p.xy())),
        );
        let ext = hi - lo;
        let mid = (lo + hi) * 0.5;
        let (length, width, yaw) = if ext.x >= ext.y {
            (ext.x, ext.y, 0.0)
        } else {
            (ext.y, ext.x, PI / 2.0)
        };
        return Ok(OrientedBox {
            center: Vector3::new(mid.x, mid.y, z_mid),
            yaw,
            length,
            width,
            height,
            degenerate: true,
        });
    }

    let mut best: Option<(f64, f64, Vector2<f64>, Vector2<f64>)> = None;
    for k in 0..hull.len() {
        let a = points[hull[k]].xy();
        let b = points[hull[(k + 1) % hull.len()]].xy();
        let e = (b - a).normalize();
        let n = Vector2::new(-e.y, e.x);
        let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
        for &i in &hull {
            let p = points[i].xy();
            let q = Vector2::new(p.dot(&e), p.dot(&n));
            lo = lo.inf(&q);
            hi = hi.sup(&q);
        }
        let ext = hi - lo;
        let area = ext.x * ext.y;
        if best.map_or(true, |b| area < b.0) {
            best = Some((area, e.y.atan2(e.x), lo, hi));
        }
    }
    let (_, angle, lo, hi) = best.expect("hull has edges");
    let ext = hi - lo;
    let mid = (lo + hi) * 0.5;
    let (s, c) = angle.sin_cos();
    let center = Vector2::new(c * mid.x - s * mid.y, s * mid.x + c * mid.y);
    let (length, width, yaw) = if ext.x >= ext.y {
        (ext.x, ext.y, angle)
    } else {
        (ext.y, ext.x, angle + PI / 2.0)
    };
    Ok(OrientedBox {
        center: Vector3::new(center.x, center.y, z_mid),
        yaw: normalize_box_yaw(yaw),
        length,
        width,
        height,
        degenerate: false,
    })
}
