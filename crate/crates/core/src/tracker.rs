//! Per-frame tracking pipelines.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Measurement;
use crate::motion::{
    wrap_angle, CurvatureRegularizer, ProcessNoiseConfig, ShapeState, TargetState,
    WeightDynamics, SCALE, WEIGHTS, YAW,
};
use crate::nurbs::{ControlNet, KnotVector, NurbsSurface};
use crate::shape::{CandidateSet, GridLayout, ParamGrid, ShapeTemplate};
use crate::sim::{fit_bounding_box, OrientedBox};
use crate::ukf::{self, AlphaPrior, GaussianBelief, LevelSetConfig, ShapeModel, UpdateOutcome, UtParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    M1,
    M2,
    Sp,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "sp" => Ok(Method::Sp),
            other => Err(Error::Contract(format!("unknown method `{other}`"))),
        }
    }
}

/// Control-net layout. `n_u` and `n_v` are the largest control indices, so
/// the net holds `(n_u + 1) × (n_v + 1)` points. `corner_weight` is the
/// prototype weight of the ring corners; M1 starts from unit weights
/// regardless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NurbsLayout {
    pub n_u: usize,
    pub n_v: usize,
    pub degree_u: usize,
    pub degree_v: usize,
    pub closed_u: bool,
    #[serde(default = "unit_weight")]
    pub corner_weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl NurbsLayout {
    pub fn m1() -> Self {
        Self {
            n_u: 7,
            n_v: 4,
            degree_u: 3,
            degree_v: 3,
            closed_u: true,
            corner_weight: 1.0,
        }
    }

    pub fn m2() -> Self {
        Self {
            n_u: 5,
            n_v: 4,
            degree_u: 2,
            degree_v: 2,
            closed_u: true,
            corner_weight: 3.0,
        }
    }
}

/// Prior standard deviations of the first belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialStd {
    pub position: f64,
    pub yaw: f64,
    pub velocity: f64,
    pub curvature: f64,
    pub scale: f64,
    pub weight: f64,
}

impl Default for InitialStd {
    fn default() -> Self {
        Self {
            position: 0.5,
            yaw: 0.2,
            velocity: 1.0,
            curvature: 0.01,
            scale: 0.05,
            weight: 0.1,
        }
    }
}

/// Settings of the box-based point tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointTrackerConfig {
    /// Acceleration noise, (m/s²)².
    pub accel_var: f64,
    /// Random walk of the box dimensions per step, m².
    pub dims_var: f64,
    pub center_std: f64,
    pub dims_std: f64,
    pub initial_velocity_std: f64,
    /// Below this speed the heading follows the box instead of the velocity.
    pub heading_speed: f64,
}

impl Default for PointTrackerConfig {
    fn default() -> Self {
        Self {
            accel_var: 0.2,
            dims_var: 1e-4,
            center_std: 0.3,
            dims_std: 0.3,
            initial_velocity_std: 1.0,
            heading_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub method: Method,
    /// Defaults to the method's standard layout when absent.
    pub layout: Option<NurbsLayout>,
    /// Half-dimensions of the prototype surface, m.
    pub base_dims: [f64; 3],
    pub predict_ut: UtParams,
    /// Spread over the augmented state of the level-set update.
    pub update_ut: UtParams,
    pub process: ProcessNoiseConfig,
    /// Per-axis measurement noise standard deviation assumed by the filter, m.
    pub measurement_std: f64,
    pub candidates: CandidateSet,
    /// Parameter grid over which the maximum curvature is taken.
    pub curvature_field: CandidateSet,
    pub level_set: LevelSetConfig,
    pub initial_std: InitialStd,
    pub point_tracker: PointTrackerConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            method: Method::M2,
            layout: None,
            base_dims: [2.0, 0.85, 0.7],
            predict_ut: UtParams::default(),
            update_ut: UtParams {
                alpha: 0.1,
                ..UtParams::default()
            },
            process: ProcessNoiseConfig::default(),
            measurement_std: 0.2,
            candidates: CandidateSet::default(),
            curvature_field: CandidateSet::Uniform { res_u: 12, res_v: 8 },
            level_set: LevelSetConfig {
                alpha: AlphaPrior::uniform(0.005),
                ..LevelSetConfig::default()
            },
            initial_std: InitialStd::default(),
            point_tracker: PointTrackerConfig::default(),
        }
    }
}

impl TrackerConfig {
    /// Parked-car settings.
    pub fn static_preset(method: Method) -> Self {
        let mut c = Self {
            method,
            ..Self::default()
        };
        c.process.accel_var = 1e-4;
        c.process.curvature_rate_var = 1e-4;
        c.process.q_weight = 0.1;
        c.initial_std.velocity = 0.1;
        c.point_tracker.accel_var = 1e-4;
        c.point_tracker.initial_velocity_std = 0.1;
        c
    }

    /// Moving-car settings.
    pub fn dynamic_preset(method: Method) -> Self {
        let mut c = Self {
            method,
            ..Self::default()
        };
        c.process.accel_var = 0.2;
        c.process.curvature_rate_var = 0.05;
        c.process.q_weight = 0.01;
        c.initial_std.position = 1.0;
        c
    }

    pub fn layout(&self) -> NurbsLayout {
        self.layout.unwrap_or(match self.method {
            Method::M1 => NurbsLayout::m1(),
            _ => NurbsLayout::m2(),
        })
    }

    pub fn measurement_cov(&self) -> Matrix3<f64> {
        Matrix3::identity() * (self.measurement_std * self.measurement_std)
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        if self.base_dims.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Contract("base_dims must be positive".into()));
        }
        if !(self.measurement_std > 0.0) {
            return Err(Error::Contract("measurement_std must be positive".into()));
        }
        self.predict_ut.weights(1)?;
        self.update_ut.weights(1)?;
        Ok(())
    }
}

/// Vehicle-like prototype: a ring of control columns (closed or open in u),
/// clamped in v from an underbody pole to a roof pole, centred on the
/// origin with half-extents `base_dims`.
pub fn build_prototype(layout: &NurbsLayout, base_dims: Vector3<f64>) -> Result<NurbsSurface> {
    let cols = layout.n_u + 1;
    let rows = layout.n_v + 1;
    if layout.n_u < layout.degree_u || layout.n_v < layout.degree_v {
        return Err(Error::InvalidLayout(
            "control counts must exceed the degrees".into(),
        ));
    }
    let ring = if layout.closed_u { cols - 1 } else { cols };
    if ring < 3 || rows < 3 {
        return Err(Error::InvalidLayout(format!(
            "{cols}x{rows} control net is too small to enclose the origin"
        )));
    }
    let outline = ring_outline(ring, layout.closed_u);
    let belts = rows - 2;
    let net: Vec<Vec<Vector3<f64>>> = (0..cols)
        .map(|i| {
            let (x, y) = outline[i % outline.len()];
            (0..rows)
                .map(|j| match j {
                    0 => Vector3::new(0.0, 0.0, -1.0),
                    j if j == rows - 1 => Vector3::new(0.0, 0.0, 1.0),
                    j => {
                        let z = if belts == 1 {
                            0.0
                        } else {
                            -1.0 + 2.0 * (j - 1) as f64 / (belts - 1) as f64
                        };
                        Vector3::new(x, y, z)
                    }
                })
                .collect()
        })
        .collect();
    if !(layout.corner_weight > 0.0) {
        return Err(Error::InvalidLayout("corner weight must be positive".into()));
    }
    let weights = (0..cols)
        .flat_map(|i| {
            let (x, y) = outline[i % outline.len()];
            let corner = x.abs() == 1.0 && y.abs() == 1.0;
            (0..rows).map(move |j| {
                if corner && j > 0 && j < rows - 1 {
                    layout.corner_weight
                } else {
                    1.0
                }
            })
        })
        .collect();
    let net = ControlNet::from_rows(net)?;
    let unit = NurbsSurface::new(
        net.clone(),
        weights,
        KnotVector::clamped_uniform(net.count_u(), layout.degree_u)?,
        KnotVector::clamped_uniform(net.count_v(), layout.degree_v)?,
        Vector3::repeat(1.0),
    )?;
    let probe = GridLayout::for_surface(&unit, CandidateSet::Uniform { res_u: 97, res_v: 65 })?;
    let (lo, hi) = ParamGrid::build(&probe, unit.view()).extents();
    let mid = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    if half.iter().any(|h| !(*h > 1e-9)) {
        return Err(Error::InvalidLayout("prototype collapsed to a flat surface".into()));
    }
    let mut net = unit.net().clone();
    for p in net.points_mut() {
        *p = (*p - mid).component_div(&half).component_mul(&base_dims);
    }
    NurbsSurface::new(
        net,
        unit.weights().to_vec(),
        unit.knots_u().clone(),
        unit.knots_v().clone(),
        Vector3::repeat(1.0),
    )
}

/// Unit-square ring starting at the middle of the rear edge, so a clamped
/// seam meets a straight edge and stays tangent-continuous. Corners come
/// first, then side, front and rear midpoints.
fn ring_outline(ring: usize, closed: bool) -> Vec<(f64, f64)> {
    const SLOTS: [(f64, f64); 8] = [
        (-1.0, -1.0),
        (1.0, -1.0),
        (1.0, 1.0),
        (-1.0, 1.0),
        (0.0, -1.0),
        (0.0, 1.0),
        (1.0, 0.0),
        (-1.0, 0.0),
    ];
    let perimeter = |p: &(f64, f64)| {
        // Clockwise-from-rear position along the square, in [0, 8).
        let (x, y) = *p;
        if x <= -1.0 && y < 0.0 {
            -y
        } else if y <= -1.0 {
            2.0 + x
        } else if x >= 1.0 {
            4.0 + y
        } else if y >= 1.0 {
            6.0 - x
        } else {
            8.0 - y
        }
    };
    let extra = if closed { ring - 1 } else { ring.saturating_sub(2) };
    let mut pts: Vec<(f64, f64)> = if extra <= SLOTS.len() - 1 && extra >= 2 {
        SLOTS[..extra].to_vec()
    } else {
        (1..=extra)
            .map(|k| {
                let (s, c) = (PI + 2.0 * PI * k as f64 / (extra + 1) as f64).sin_cos();
                let m = c.abs().max(s.abs());
                (c / m, s / m)
            })
            .collect()
    };
    pts.sort_by(|a, b| perimeter(a).total_cmp(&perimeter(b)));
    pts.insert(0, (-1.0, 0.0));
    if closed {
        pts.push((-1.0, 0.0));
    } else {
        pts.push((-1.0, 1e-3));
    }
    pts
}

/// Per-frame tracker output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub velocity: f64,
    pub curvature: f64,
    /// Encasing rectangle and vertical extent, m.
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Wall time of predict and update, ms.
    pub time_ms: f64,
}

/// Common interface of all pipelines.
pub trait Tracker {
    /// Initializes on the first call, then predicts and updates.
    fn process(&mut self, frame: &[Measurement]) -> Result<Estimate>;
}

/// Centroid and dominant horizontal direction of a point set.
pub fn initial_pose(points: &[Vector3<f64>]) -> Result<(Vector3<f64>, f64)> {
    if points.len() < 4 {
        return Err(Error::InsufficientInitialization {
            needed: 4,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - centroid;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    let mut yaw = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if yaw <= -PI / 2.0 {
        yaw += PI;
    }
    Ok((centroid, yaw))
}

/// Serializable shape of a tracker, enough to rebuild its mean surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSnapshot {
    pub layout: NurbsLayout,
    pub base_dims: [f64; 3],
    pub scale: [f64; 3],
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl ShapeSnapshot {
    pub fn prototype(layout: NurbsLayout, base_dims: [f64; 3]) -> Self {
        Self {
            layout,
            base_dims,
            scale: [1.0; 3],
            weights: None,
        }
    }

    pub fn surface(&self) -> Result<NurbsSurface> {
        let base = build_prototype(&self.layout, Vector3::from(self.base_dims))?;
        let template = ShapeTemplate::new(base, self.layout.closed_u)?;
        template.surface(Vector3::from(self.scale), self.weights.as_deref())
    }
}

/// NURBS level-set tracker (M1 with weights, M2 scaling only).
#[derive(Debug)]
pub struct NurbsTracker {
    config: TrackerConfig,
    template: ShapeTemplate,
    grid: GridLayout,
    regularizer: Option<CurvatureRegularizer>,
    belief: Option<GaussianBelief>,
}

impl NurbsTracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if config.method == Method::Sp {
            return Err(Error::Contract("the NURBS tracker needs method m1 or m2".into()));
        }
        let layout = config.layout();
        let base = build_prototype(&layout, Vector3::from(config.base_dims))?;
        let template = ShapeTemplate::new(base, layout.closed_u)?;
        let grid = GridLayout::for_surface(template.base(), config.candidates)?;
        let regularizer = match config.method {
            Method::M1 => Some(CurvatureRegularizer::new(&template, config.curvature_field)?),
            _ => None,
        };
        Ok(Self {
            config,
            template,
            grid,
            regularizer,
            belief: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn template(&self) -> &ShapeTemplate {
        &self.template
    }

    pub fn belief(&self) -> Option<&GaussianBelief> {
        self.belief.as_ref()
    }

    pub fn set_belief(&mut self, belief: GaussianBelief) -> Result<()> {
        if belief.dim() != self.state_dim() {
            return Err(Error::Contract("belief dimension does not match tracker".into()));
        }
        self.belief = Some(belief);
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.config.method {
            Method::M1 => WEIGHTS + self.template.effective_weight_count(),
            _ => WEIGHTS,
        }
    }

    /// Prior belief centred on the first frame.
    pub fn initialize(&self, frame: &[Measurement]) -> Result<GaussianBelief> {
        let pts: Vec<Vector3<f64>> = frame.iter().map(|m| m.point).collect();
        let (center, yaw) = initial_pose(&pts)?;
        let shape = match self.config.method {
            Method::M1 => ShapeState::ScaleAndWeights {
                scale: Vector3::repeat(1.0),
                weights: vec![1.0; self.template.effective_weight_count()],
            },
            _ => ShapeState::ScaleOnly {
                scale: Vector3::repeat(1.0),
            },
        };
        let state = TargetState {
            center,
            yaw,
            velocity: 0.0,
            curvature: 0.0,
            shape,
        };
        let s = &self.config.initial_std;
        let dim = state.dim();
        let mut std = vec![s.position, s.position, s.position, s.yaw, s.velocity, s.curvature];
        std.extend([s.scale; 3]);
        std.resize(dim, s.weight);
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(dim, std.iter().map(|x| x * x)));
        GaussianBelief::new(state.to_vector(), cov)
    }

    fn dynamics(&self) -> Option<WeightDynamics<'_>> {
        self.regularizer.as_ref().map(|r| WeightDynamics {
            template: &self.template,
            regularizer: r,
        })
    }

    pub fn predict(&self, belief: &GaussianBelief) -> Result<GaussianBelief> {
        ukf::predict(belief, &self.config.process, &self.config.predict_ut, self.dynamics())
    }

    pub fn update(&self, belief: &GaussianBelief, frame: &[Measurement]) -> Result<UpdateOutcome> {
        let model = ShapeModel {
            template: &self.template,
            layout: &self.grid,
        };
        ukf::update(belief, frame, model, &self.config.level_set, &self.config.update_ut)
    }

    /// Predict then update; a frame without points only predicts.
    pub fn step(&self, belief: &GaussianBelief, frame: &[Measurement]) -> Result<GaussianBelief> {
        let prior = self.predict(belief)?;
        Ok(self.update(&prior, frame)?.into_belief())
    }

    /// Mean surface of a belief.
    pub fn surface(&self, belief: &GaussianBelief) -> Result<NurbsSurface> {
        let x = belief.mean.as_slice();
        let scale = Vector3::new(x[SCALE], x[SCALE + 1], x[SCALE + 2]);
        let weights = (x.len() > WEIGHTS).then(|| &x[WEIGHTS..]);
        self.template.surface(scale, weights)
    }

    pub fn snapshot(&self) -> Option<ShapeSnapshot> {
        let x = self.belief.as_ref()?.mean.as_slice();
        Some(ShapeSnapshot {
            layout: self.config.layout(),
            base_dims: self.config.base_dims,
            scale: [x[SCALE], x[SCALE + 1], x[SCALE + 2]],
            weights: (x.len() > WEIGHTS).then(|| x[WEIGHTS..].to_vec()),
        })
    }

    pub fn estimate(&self, belief: &GaussianBelief, time_ms: f64) -> Result<Estimate> {
        let surface = self.surface(belief)?;
        let grid = ParamGrid::build(&self.grid, surface.view());
        let (lo, hi) = grid.extents();
        let x = &belief.mean;
        Ok(Estimate {
            center: Vector3::new(x[0], x[1], x[2]),
            yaw: x[YAW],
            velocity: x[crate::motion::VELOCITY],
            curvature: x[crate::motion::CURVATURE],
            length: hi.x - lo.x,
            width: hi.y - lo.y,
            height: hi.z - lo.z,
            time_ms,
        })
    }
}

impl Tracker for NurbsTracker {
    fn process(&mut self, frame: &[Measurement]) -> Result<Estimate> {
        let (belief, time_ms) = match &self.belief {
            None => (self.initialize(frame)?, 0.0),
            Some(b) => {
                let t = Instant::now();
                let next = self.step(b, frame)?;
                (next, t.elapsed().as_secs_f64() * 1e3)
            }
        };
        let est = self.estimate(&belief, time_ms)?;
        self.belief = Some(belief);
        Ok(est)
    }
}

type SpState = SVector<f64, 7>;
type SpCov = SMatrix<f64, 7, 7>;

/// Constant-velocity Kalman filter on fitted boxes: `[x, y, vx, vy, l, w, h]`.
#[derive(Debug, Clone)]
pub struct PointTracker {
    config: PointTrackerConfig,
    dt: f64,
    state: Option<(SpState, SpCov)>,
    z: f64,
    yaw: f64,
}

impl PointTracker {
    pub fn new(config: PointTrackerConfig, dt: f64) -> Self {
        Self {
            config,
            dt,
            state: None,
            z: 0.0,
            yaw: 0.0,
        }
    }

    pub fn from_tracker_config(c: &TrackerConfig) -> Self {
        Self::new(c.point_tracker, c.process.dt)
    }

    pub fn mean(&self) -> Option<&SpState> {
        self.state.as_ref().map(|s| &s.0)
    }

    pub fn covariance(&self) -> Option<&SpCov> {
        self.state.as_ref().map(|s| &s.1)
    }

    fn measurement_noise(&self) -> SMatrix<f64, 5, 5> {
        let c = self.config.center_std.powi(2);
        let d = self.config.dims_std.powi(2);
        SMatrix::from_diagonal(&SVector::<f64, 5>::from([c, c, d, d, d]))
    }

    fn observe(b: &OrientedBox) -> SVector<f64, 5> {
        SVector::from([b.center.x, b.center.y, b.length, b.width, b.height])
    }

    fn initialize(&mut self, b: &OrientedBox) {
        let mut x = SpState::zeros();
        let z = Self::observe(b);
        x[0] = z[0];
        x[1] = z[1];
        x.fixed_rows_mut::<3>(4).copy_from(&z.fixed_rows::<3>(2));
        let r = self.measurement_noise();
        let v = self.config.initial_velocity_std.powi(2);
        let p = SpCov::from_diagonal(&SpState::from([
            r[(0, 0)],
            r[(1, 1)],
            v,
            v,
            r[(2, 2)],
            r[(3, 3)],
            r[(4, 4)],
        ]));
        self.state = Some((x, p));
        self.yaw = b.yaw;
    }

    /// One predict/update cycle against a fitted box.
    pub fn step_box(&mut self, b: &OrientedBox) {
        self.z = b.center.z;
        let Some((x, p)) = self.state else {
            self.initialize(b);
            return;
        };
        let dt = self.dt;
        let mut f = SpCov::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let q_a = self.config.accel_var;
        let mut q = SpCov::zeros();
        for (pos, vel) in [(0, 2), (1, 3)] {
            q[(pos, pos)] = q_a * dt.powi(4) / 4.0;
            q[(pos, vel)] = q_a * dt.powi(3) / 2.0;
            q[(vel, pos)] = q_a * dt.powi(3) / 2.0;
            q[(vel, vel)] = q_a * dt * dt;
        }
        for i in 4..7 {
            q[(i, i)] = self.config.dims_var;
        }
        let x = f * x;
        let p = f * p * f.transpose() + q;

        let mut h = SMatrix::<f64, 5, 7>::zeros();
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        h[(2, 4)] = 1.0;
        h[(3, 5)] = 1.0;
        h[(4, 6)] = 1.0;
        let s = h * p * h.transpose() + self.measurement_noise();
        let Some(s_inv) = s.try_inverse() else {
            self.state = Some((x, p));
            return;
        };
        let k = p * h.transpose() * s_inv;
        let x = x + k * (Self::observe(b) - h * x);
        let i_kh = SpCov::identity() - k * h;
        let p = i_kh * p * i_kh.transpose() + k * self.measurement_noise() * k.transpose();
        self.state = Some((x, (p + p.transpose()) * 0.5));

        let vel = Vector2::new(x[2], x[3]);
        self.yaw = if vel.norm() >= self.config.heading_speed {
            vel.y.atan2(vel.x)
        } else {
            let flipped = wrap_angle(b.yaw + PI);
            if wrap_angle(b.yaw - self.yaw).abs() <= wrap_angle(flipped - self.yaw).abs() {
                b.yaw
            } else {
                flipped
            }
        };
    }

    pub fn estimate(&self, time_ms: f64) -> Option<Estimate> {
        let (x, _) = self.state.as_ref()?;
        Some(Estimate {
            center: Vector3::new(x[0], x[1], self.z),
            yaw: self.yaw,
            velocity: x[2].hypot(x[3]),
            curvature: 0.0,
            length: x[4],
            width: x[5],
            height: x[6],
            time_ms,
        })
    }
}

impl Tracker for PointTracker {
    fn process(&mut self, frame: &[Measurement]) -> Result<Estimate> {
        let pts: Vec<Vector3<f64>> = frame.iter().map(|m| m.point).collect();
        let t = Instant::now();
        let fresh = self.state.is_none();
        if pts.len() >= 4 {
            let b = fit_bounding_box(&pts)?;
            self.step_box(&b);
        } else if fresh {
            return Err(Error::InsufficientInitialization {
                needed: 4,
                got: pts.len(),
            });
        }
        let time_ms = if fresh { 0.0 } else { t.elapsed().as_secs_f64() * 1e3 };
        self.estimate(time_ms).ok_or(Error::EmptyReport)
    }
}

/// Builds the pipeline selected by `config.method`.
pub fn make_tracker(config: &TrackerConfig) -> Result<Box<dyn Tracker>> {
    Ok(match config.method {
        Method::Sp => Box::new(PointTracker::from_tracker_config(config)),
        _ => Box::new(NurbsTracker::new(config.clone())?),
    })
}

/// Runs a tracker over a frame sequence.
pub fn run(tracker: &mut dyn Tracker, frames: &[Vec<Measurement>]) -> Result<Vec<Estimate>> {
    frames.iter().map(|f| tracker.process(f)).collect()
}
