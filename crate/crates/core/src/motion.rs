//! Process models: constant curvature and velocity kinematics, random-walk
//! scaling, and curvature-regularized weight dynamics.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nurbs::{gaussian_curvature, ParamSample, SurfaceView};
use crate::shape::{CandidateSet, GridLayout, ShapeTemplate};

pub const CENTER: usize = 0;
pub const YAW: usize = 3;
pub const VELOCITY: usize = 4;
pub const CURVATURE: usize = 5;
pub const SCALE: usize = 6;
pub const WEIGHTS: usize = 9;

/// Below this |c| the arc is replaced by its straight-line limit.
pub const CURVATURE_EPS: f64 = 1e-6;
pub const SCALE_FLOOR: f64 = 1e-3;
pub const WEIGHT_FLOOR: f64 = 1e-2;

/// Wraps to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShapeState {
    ScaleOnly { scale: Vector3<f64> },
    ScaleAndWeights { scale: Vector3<f64>, weights: Vec<f64> },
}

impl ShapeState {
    pub fn scale(&self) -> &Vector3<f64> {
        match self {
            ShapeState::ScaleOnly { scale } | ShapeState::ScaleAndWeights { scale, .. } => scale,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            ShapeState::ScaleOnly { .. } => None,
            ShapeState::ScaleAndWeights { weights, .. } => Some(weights),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub velocity: f64,
    pub curvature: f64,
    pub shape: ShapeState,
}

impl TargetState {
    pub fn dim(&self) -> usize {
        WEIGHTS + self.shape.weights().map_or(0, <[f64]>::len)
    }

    /// Flattened as `[m_x, m_y, m_z, ψ, v, c, s_x, s_y, s_z, ω…]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out.fixed_rows_mut::<3>(CENTER).copy_from(&self.center);
        out[YAW] = self.yaw;
        out[VELOCITY] = self.velocity;
        out[CURVATURE] = self.curvature;
        out.fixed_rows_mut::<3>(SCALE).copy_from(self.shape.scale());
        if let Some(w) = self.shape.weights() {
            out.rows_mut(WEIGHTS, w.len()).copy_from_slice(w);
        }
        out
    }

    /// Inverse of [`TargetState::to_vector`]; any coordinates past the
    /// scaling are read as weights.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() < WEIGHTS {
            return Err(Error::Contract(format!(
                "state vector needs at least {WEIGHTS} coordinates, got {}",
                x.len()
            )));
        }
        let scale = Vector3::new(x[SCALE], x[SCALE + 1], x[SCALE + 2]);
        let shape = if x.len() == WEIGHTS {
            ShapeState::ScaleOnly { scale }
        } else {
            ShapeState::ScaleAndWeights {
                scale,
                weights: x[WEIGHTS..].to_vec(),
            }
        };
        Ok(Self {
            center: Vector3::new(x[0], x[1], x[2]),
            yaw: x[YAW],
            velocity: x[VELOCITY],
            curvature: x[CURVATURE],
            shape,
        })
    }

    /// Restores the positivity floors and wraps the heading.
    pub fn clamp_invariants(&mut self) {
        self.yaw = wrap_angle(self.yaw);
        match &mut self.shape {
            ShapeState::ScaleOnly { scale } => clamp_scale(scale),
            ShapeState::ScaleAndWeights { scale, weights } => {
                clamp_scale(scale);
                weights.iter_mut().for_each(|w| *w = w.max(WEIGHT_FLOOR));
            }
        }
    }
}

fn clamp_scale(s: &mut Vector3<f64>) {
    s.iter_mut().for_each(|x| *x = x.max(SCALE_FLOOR));
}

/// Clamps the shape coordinates of a flattened state in place.
pub fn clamp_vector(x: &mut [f64]) {
    x[YAW] = wrap_angle(x[YAW]);
    for s in &mut x[SCALE..WEIGHTS] {
        *s = s.max(SCALE_FLOOR);
    }
    for w in &mut x[WEIGHTS..] {
        *w = w.max(WEIGHT_FLOOR);
    }
}

/// Per-step noise settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessNoiseConfig {
    /// Seconds per step.
    pub dt: f64,
    pub q_center: [f64; 3],
    pub q_yaw: f64,
    pub q_velocity: f64,
    pub q_curvature: f64,
    pub q_scale: f64,
    pub q_weight: f64,
    /// Input variance of the acceleration, (m/s²)².
    pub accel_var: f64,
    /// Input variance of the curvature rate, (1/(m·s))².
    pub curvature_rate_var: f64,
    /// Weight regularization gain ν.
    pub damping: f64,
}

impl Default for ProcessNoiseConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            q_center: [1e-3, 1e-3, 1e-4],
            q_yaw: 1e-4,
            q_velocity: 0.0,
            q_curvature: 0.0,
            q_scale: 1e-7,
            q_weight: 0.1,
            accel_var: 1e-4,
            curvature_rate_var: 1e-4,
            damping: 0.001,
        }
    }
}

impl ProcessNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let vars = [
            self.q_center[0],
            self.q_center[1],
            self.q_center[2],
            self.q_yaw,
            self.q_velocity,
            self.q_curvature,
            self.q_scale,
            self.q_weight,
            self.accel_var,
            self.curvature_rate_var,
        ];
        if vars.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Contract("noise variances must be non-negative".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Contract("dt must be positive".into()));
        }
        Ok(())
    }

    /// Diagonal of the total per-step noise, inputs folded into v and c.
    pub fn variances(&self, dim: usize) -> Vec<f64> {
        let dt2 = self.dt * self.dt;
        let mut q = vec![0.0; dim];
        q[..3].copy_from_slice(&self.q_center);
        q[YAW] = self.q_yaw;
        q[VELOCITY] = self.q_velocity + self.accel_var * dt2;
        q[CURVATURE] = self.q_curvature + self.curvature_rate_var * dt2;
        for v in &mut q[SCALE..WEIGHTS] {
            *v = self.q_scale;
        }
        for v in &mut q[WEIGHTS..] {
            *v = self.q_weight;
        }
        q
    }
}

/// Deterministic CCV step.
pub fn ccv_predict(state: &TargetState, dt: f64) -> TargetState {
    let mut next = state.clone();
    let (v, c, psi) = (state.velocity, state.curvature, state.yaw);
    if c.abs() > CURVATURE_EPS {
        let psi1 = psi + v * c * dt;
        next.center.x += (psi1.sin() - psi.sin()) / c;
        next.center.y += (psi.cos() - psi1.cos()) / c;
        next.yaw = wrap_angle(psi1);
    } else {
        next.center.x += v * dt * psi.cos();
        next.center.y += v * dt * psi.sin();
    }
    next
}

/// Evaluates normalized Gaussian curvature at the Greville node of every
/// estimated weight.
#[derive(Debug, Clone)]
pub struct CurvatureRegularizer {
    nodes: Vec<ParamSample>,
    field: GridLayout,
}

impl CurvatureRegularizer {
    pub fn new(template: &ShapeTemplate, field: CandidateSet) -> Result<Self> {
        let base = template.base();
        let gu = base.knots_u().greville();
        let gv = base.knots_v().greville();
        let nodes = template
            .effective_nodes()
            .into_iter()
            .map(|(i, j)| base.sample(gu[i], gv[j]))
            .collect();
        Ok(Self {
            nodes,
            field: GridLayout::for_surface(base, field)?,
        })
    }

    pub fn node_params(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|s| (s.u, s.v)).collect()
    }

    fn curvature(view: &SurfaceView<'_>, s: &ParamSample) -> f64 {
        gaussian_curvature(&view.differentials(s)).unwrap_or(0.0)
    }

    /// `ν · K(node) / max K`, with the ratio clamped to `[0, 1]`.
    pub fn increments(&self, view: &SurfaceView<'_>, damping: f64) -> Vec<f64> {
        let at_nodes: Vec<f64> = self.nodes.iter().map(|s| Self::curvature(view, s)).collect();
        let k_max = self
            .field
            .samples()
            .iter()
            .map(|s| Self::curvature(view, s))
            .chain(at_nodes.iter().copied())
            .fold(0.0, f64::max);
        if !(k_max > 1e-12) || damping == 0.0 {
            return vec![0.0; at_nodes.len()];
        }
        at_nodes
            .iter()
            .map(|k| damping * (k / k_max).clamp(0.0, 1.0))
            .collect()
    }
}

/// Bundles the template and regularizer needed to propagate weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightDynamics<'a> {
    pub template: &'a ShapeTemplate,
    pub regularizer: &'a CurvatureRegularizer,
}

/// Deterministic weight step `ω + ν·K/max K` of a weighted state.
pub fn weight_predict(
    state: &TargetState,
    dynamics: WeightDynamics<'_>,
    damping: f64,
) -> Result<Vec<f64>> {
    let ShapeState::ScaleAndWeights { scale, weights } = &state.shape else {
        return Err(Error::Contract("weight dynamics need a weighted state".into()));
    };
    if weights.len() != dynamics.template.effective_weight_count() {
        return Err(Error::Contract("weight count does not match template".into()));
    }
    let full = dynamics.template.expand_weights(weights);
    let view = dynamics.template.view(&full, *scale);
    let inc = dynamics.regularizer.increments(&view, damping);
    Ok(weights.iter().zip(inc).map(|(w, d)| w + d).collect())
}

/// Full transition with explicit noise draws.
///
/// `noise` holds one additive increment per state coordinate followed by
/// the velocity and curvature input increments.
pub fn process_model(
    state: &TargetState,
    noise: &[f64],
    config: &ProcessNoiseConfig,
    dynamics: Option<WeightDynamics<'_>>,
) -> Result<TargetState> {
    let dim = state.dim();
    if noise.len() != dim + 2 {
        return Err(Error::Contract(format!(
            "expected {} noise draws, got {}",
            dim + 2,
            noise.len()
        )));
    }
    let mut next = ccv_predict(state, config.dt);
    if let ShapeState::ScaleAndWeights { weights, .. } = &mut next.shape {
        let dynamics = dynamics
            .ok_or_else(|| Error::Contract("weighted state needs weight dynamics".into()))?;
        *weights = weight_predict(state, dynamics, config.damping)?;
    }
    next.velocity += noise[dim];
    next.curvature += noise[dim + 1];

    let mut x = next.to_vector();
    for (xi, n) in x.iter_mut().zip(&noise[..dim]) {
        *xi += n;
    }
    clamp_vector(x.as_mut_slice());
    TargetState::from_slice(x.as_slice())
}
