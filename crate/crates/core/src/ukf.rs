//! Unscented Kalman filtering.
//!
//! The generic transform ([`sigma_points`], [`unscented_predict`],
//! [`unscented_update`]) works on dense beliefs. The level-set update
//! augments the state with per-measurement additive noise `w_l` and
//! multiplicative level scalings `α_l`, and exploits the block-diagonal
//! augmented covariance: sigma points that only move one measurement's
//! noise leave every other entry of the stacked pseudo-measurement at its
//! central value, so those entries are copied instead of re-evaluated.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::Measurement;
use crate::motion::{
    self, clamp_vector, wrap_angle, ProcessNoiseConfig, TargetState, WeightDynamics, SCALE,
    WEIGHTS, YAW,
};
use crate::shape::{to_local, GridLayout, NoiseMetric, ParamGrid, Pose, ShapeTemplate};

/// Largest frame the level-set update accepts.
pub const MAX_MEASUREMENTS: usize = 128;

const JITTER: [f64; 3] = [0.0, 1e-9, 1e-6];

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Contract(format!(
                "covariance {}x{} does not match mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Symmetrizes the covariance and lifts non-positive eigenvalues.
    pub fn condition(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        self.cov = sym;
        if self.cov.clone().cholesky().is_some() {
            return;
        }
        let eig = self.cov.clone().symmetric_eigen();
        let vals = eig.eigenvalues.map(|l| l.max(1e-12));
        let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        self.cov = (&rebuilt + rebuilt.transpose()) * 0.5;
    }
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

/// Weights of a `2L + 1` point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaWeights {
    pub mean0: f64,
    pub cov0: f64,
    pub other: f64,
    /// `sqrt(L + λ)`.
    pub spread: f64,
}

impl UtParams {
    pub fn weights(&self, dim: usize) -> Result<SigmaWeights> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Contract("UT alpha must lie in (0, 1]".into()));
        }
        let l = dim as f64;
        let lambda = self.alpha * self.alpha * (l + self.kappa) - l;
        let denom = l + lambda;
        if !(denom > 0.0) {
            return Err(Error::Contract("L + lambda must be positive".into()));
        }
        let mean0 = lambda / denom;
        Ok(SigmaWeights {
            mean0,
            cov0: mean0 + (1.0 - self.alpha * self.alpha + self.beta),
            other: 0.5 / denom,
            spread: denom.sqrt(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub points: Vec<DVector<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

/// Lower Cholesky factor, retrying with growing diagonal jitter.
pub fn cholesky_jittered(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    for j in JITTER {
        let m = cov + DMatrix::<f64>::identity(n, n) * j;
        if let Some(c) = m.cholesky() {
            return Ok(c.l());
        }
    }
    Err(Error::Numerical("covariance is not positive definite".into()))
}

fn solve_spd(s: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    for j in JITTER {
        let m = s + DMatrix::<f64>::identity(n, n) * j;
        if let Some(c) = m.cholesky() {
            return Ok(c.solve(rhs));
        }
    }
    Err(Error::Numerical("innovation covariance is singular".into()))
}

pub fn sigma_points(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    params: &UtParams,
) -> Result<SigmaPoints> {
    let n = mean.len();
    let w = params.weights(n)?;
    let l = cholesky_jittered(cov)?;
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.clone());
    for j in 0..n {
        points.push(mean + l.column(j) * w.spread);
    }
    for j in 0..n {
        points.push(mean - l.column(j) * w.spread);
    }
    let mut mean_weights = vec![w.other; 2 * n + 1];
    let mut cov_weights = vec![w.other; 2 * n + 1];
    mean_weights[0] = w.mean0;
    cov_weights[0] = w.cov0;
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Weighted mean with circular averaging on `angles`.
pub fn weighted_mean(points: &[DVector<f64>], weights: &[f64], angles: &[usize]) -> DVector<f64> {
    let mut m = DVector::zeros(points[0].len());
    for (p, w) in points.iter().zip(weights) {
        m.axpy(*w, p, 1.0);
    }
    for &a in angles {
        let (s, c) = points
            .iter()
            .zip(weights)
            .fold((0.0, 0.0), |(s, c), (p, w)| (s + w * p[a].sin(), c + w * p[a].cos()));
        m[a] = s.atan2(c);
    }
    m
}

fn residual(a: &DVector<f64>, b: &DVector<f64>, angles: &[usize]) -> DVector<f64> {
    let mut d = a - b;
    for &i in angles {
        d[i] = wrap_angle(d[i]);
    }
    d
}

/// Propagates a belief through `f` and adds `q`.
pub fn unscented_predict<F>(
    belief: &GaussianBelief,
    f: F,
    q: &DMatrix<f64>,
    params: &UtParams,
    angles: &[usize],
) -> Result<GaussianBelief>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let sp = sigma_points(&belief.mean, &belief.cov, params)?;
    let moved = sp.points.iter().map(&f).collect::<Result<Vec<_>>>()?;
    let mean = weighted_mean(&moved, &sp.mean_weights, angles);
    let mut cov = q.clone();
    for (p, w) in moved.iter().zip(&sp.cov_weights) {
        let d = residual(p, &mean, angles);
        cov.ger(*w, &d, &d, 1.0);
    }
    let mut out = GaussianBelief::new(mean, cov)?;
    out.condition();
    Ok(out)
}

/// Standard UT measurement update against `z` with additive noise `r`.
pub fn unscented_update<H>(
    belief: &GaussianBelief,
    h: H,
    r: &DMatrix<f64>,
    z: &DVector<f64>,
    params: &UtParams,
    angles: &[usize],
) -> Result<GaussianBelief>
where
    H: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let sp = sigma_points(&belief.mean, &belief.cov, params)?;
    let zs = sp.points.iter().map(&h).collect::<Result<Vec<_>>>()?;
    let z_hat = weighted_mean(&zs, &sp.mean_weights, &[]);
    let x_hat = weighted_mean(&sp.points, &sp.mean_weights, angles);
    let mut s = r.clone();
    let mut pxz = DMatrix::zeros(belief.dim(), z.len());
    for ((x, zi), w) in sp.points.iter().zip(&zs).zip(&sp.cov_weights) {
        let dz = zi - &z_hat;
        let dx = residual(x, &x_hat, angles);
        s.ger(*w, &dz, &dz, 1.0);
        pxz.ger(*w, &dx, &dz, 1.0);
    }
    apply_gain(belief, &pxz, &s, &(z - z_hat), angles)
}

fn apply_gain(
    belief: &GaussianBelief,
    pxz: &DMatrix<f64>,
    s: &DMatrix<f64>,
    innovation: &DVector<f64>,
    angles: &[usize],
) -> Result<GaussianBelief> {
    let gain_t = solve_spd(s, &pxz.transpose())?;
    let gain = gain_t.transpose();
    let mut mean = &belief.mean + &gain * innovation;
    for &a in angles {
        mean[a] = wrap_angle(mean[a]);
    }
    let cov = &belief.cov - &gain * pxz.transpose();
    let mut out = GaussianBelief::new(mean, cov)?;
    out.condition();
    Ok(out)
}

/// Moments of the multiplicative level scaling α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaPrior {
    pub mean: f64,
    pub var: f64,
}

impl Default for AlphaPrior {
    /// Moments of U(0, 1).
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl AlphaPrior {
    /// Moments of U(0, upper).
    pub fn uniform(upper: f64) -> Self {
        Self {
            mean: 0.5 * upper,
            var: upper * upper / 12.0,
        }
    }
}

/// State belief augmented with per-measurement noise and level scalings.
///
/// Coordinate order: state, then `w_1 … w_n` (three each), then `α_1 … α_n`.
#[derive(Debug, Clone)]
pub struct AugmentedBelief<'a> {
    pub base: &'a GaussianBelief,
    pub noise: Vec<Matrix3<f64>>,
    pub alpha: AlphaPrior,
}

impl AugmentedBelief<'_> {
    pub fn dim(&self) -> usize {
        self.base.dim() + 4 * self.noise.len()
    }

    pub fn to_dense(&self) -> GaussianBelief {
        let nx = self.base.dim();
        let n = self.noise.len();
        let dim = self.dim();
        let mut mean = DVector::zeros(dim);
        mean.rows_mut(0, nx).copy_from(&self.base.mean);
        let mut cov = DMatrix::zeros(dim, dim);
        cov.view_mut((0, 0), (nx, nx)).copy_from(&self.base.cov);
        for (l, r) in self.noise.iter().enumerate() {
            let o = nx + 3 * l;
            cov.view_mut((o, o), (3, 3)).copy_from(r);
        }
        for l in 0..n {
            let o = nx + 3 * n + l;
            mean[o] = self.alpha.mean;
            cov[(o, o)] = self.alpha.var;
        }
        GaussianBelief { mean, cov }
    }

    pub fn sigma_points(&self, params: &UtParams) -> Result<SigmaPoints> {
        let dense = self.to_dense();
        sigma_points(&dense.mean, &dense.cov, params)
    }
}

/// Settings of the level-set pseudo-measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelSetConfig {
    pub alpha: AlphaPrior,
    /// Added to the innovation covariance diagonal.
    pub pseudo_noise_floor: f64,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaPrior::default(),
            pseudo_noise_floor: 1e-6,
        }
    }
}

/// Prototype surface and candidate grid shared by every sigma point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeModel<'a> {
    pub template: &'a ShapeTemplate,
    pub layout: &'a GridLayout,
}

/// Shape hypothesis of one sigma point, ready to score measurements.
pub struct PreparedShape<'a> {
    pub grid: ParamGrid<'a>,
    pub pose: Pose,
    d_max: Vec<f64>,
}

impl<'a> ShapeModel<'a> {
    /// Builds the grid of a state vector; shape coordinates are clamped to
    /// their floors first.
    pub fn prepare(&self, x: &[f64], metrics: &[NoiseMetric]) -> Result<PreparedShape<'a>> {
        let scale = Vector3::new(
            x[SCALE].max(motion::SCALE_FLOOR),
            x[SCALE + 1].max(motion::SCALE_FLOOR),
            x[SCALE + 2].max(motion::SCALE_FLOOR),
        );
        let n_eff = self.template.effective_weight_count();
        let full = if x.len() > WEIGHTS {
            if x.len() - WEIGHTS != n_eff {
                return Err(Error::Contract("state weight count does not match template".into()));
            }
            let eff: Vec<f64> = x[WEIGHTS..].iter().map(|w| w.max(motion::WEIGHT_FLOOR)).collect();
            self.template.expand_weights(&eff)
        } else {
            self.template.base().weights().to_vec()
        };
        let grid = ParamGrid::build(self.layout, self.template.view(&full, scale));
        let d_max = metrics.iter().map(|m| grid.d_max(m)).collect::<Result<Vec<_>>>()?;
        Ok(PreparedShape {
            grid,
            pose: Pose {
                center: Vector3::new(x[0], x[1], x[2]),
                yaw: x[YAW],
            },
            d_max,
        })
    }
}

impl PreparedShape<'_> {
    /// `α · d_max − d(y − w)`.
    pub fn pseudo(
        &self,
        y: &Vector3<f64>,
        w: &Vector3<f64>,
        alpha: f64,
        metric: &NoiseMetric,
        group: usize,
    ) -> Result<f64> {
        let local = to_local(&(y - w), &self.pose.center, self.pose.yaw);
        Ok(alpha * self.d_max[group] - self.grid.signed_distance(&local, metric)?)
    }

    pub fn d_max(&self, group: usize) -> f64 {
        self.d_max[group]
    }
}

/// Distinct noise covariances and the group index of each measurement.
fn metric_groups(meas: &[Measurement]) -> Result<(Vec<NoiseMetric>, Vec<usize>)> {
    let mut metrics: Vec<NoiseMetric> = Vec::new();
    let mut groups = Vec::with_capacity(meas.len());
    for m in meas {
        match metrics.iter().position(|g| *g.cov() == m.cov) {
            Some(k) => groups.push(k),
            None => {
                metrics.push(NoiseMetric::new(m.cov)?);
                groups.push(metrics.len() - 1);
            }
        }
    }
    Ok((metrics, groups))
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Updated(GaussianBelief),
    /// The frame held no measurements; the belief is returned unchanged.
    Empty(GaussianBelief),
}

impl UpdateOutcome {
    pub fn into_belief(self) -> GaussianBelief {
        match self {
            UpdateOutcome::Updated(b) | UpdateOutcome::Empty(b) => b,
        }
    }
}

fn finish(mut belief: GaussianBelief) -> GaussianBelief {
    clamp_vector(belief.mean.as_mut_slice());
    belief
}

fn check_frame(meas: &[Measurement]) -> Result<()> {
    if meas.len() > MAX_MEASUREMENTS {
        return Err(Error::Contract(format!(
            "{} measurements exceed the per-update limit of {MAX_MEASUREMENTS}",
            meas.len()
        )));
    }
    Ok(())
}

/// Stacked level-set update against the zero pseudo-measurement.
pub fn update(
    belief: &GaussianBelief,
    meas: &[Measurement],
    model: ShapeModel<'_>,
    config: &LevelSetConfig,
    params: &UtParams,
) -> Result<UpdateOutcome> {
    if meas.is_empty() {
        return Ok(UpdateOutcome::Empty(belief.clone()));
    }
    check_frame(meas)?;
    let nx = belief.dim();
    let n = meas.len();
    let w = params.weights(nx + 4 * n)?;
    let lx = cholesky_jittered(&belief.cov)?;
    let (metrics, groups) = metric_groups(meas)?;
    let alpha_std = config.alpha.var.sqrt();
    let zero = Vector3::zeros();

    let stacked = |x: &[f64]| -> Result<DVector<f64>> {
        let prep = model.prepare(x, &metrics)?;
        let mut g = DVector::zeros(n);
        for (l, m) in meas.iter().enumerate() {
            g[l] = prep.pseudo(&m.point, &zero, config.alpha.mean, &metrics[groups[l]], groups[l])?;
        }
        Ok(g)
    };

    // Central point.
    let center = model.prepare(belief.mean.as_slice(), &metrics)?;
    let mut g0 = DVector::zeros(n);
    let mut d0 = vec![0.0; n];
    for (l, m) in meas.iter().enumerate() {
        let local = to_local(&m.point, &center.pose.center, center.pose.yaw);
        d0[l] = center.grid.signed_distance(&local, &metrics[groups[l]])?;
        g0[l] = config.alpha.mean * center.d_max(groups[l]) - d0[l];
    }

    // State-perturbing points.
    let mut plus = Vec::with_capacity(nx);
    let mut minus = Vec::with_capacity(nx);
    for j in 0..nx {
        let offset = lx.column(j) * w.spread;
        plus.push(stacked((&belief.mean + &offset).as_slice())?);
        minus.push(stacked((&belief.mean - &offset).as_slice())?);
    }

    // Noise-perturbing points: only entry l moves; keep its offsets.
    let mut d1 = DVector::<f64>::zeros(n);
    let mut d2 = DVector::<f64>::zeros(n);
    for (l, m) in meas.iter().enumerate() {
        let metric = &metrics[groups[l]];
        let factor = metric.factor();
        let dm = center.d_max(groups[l]);
        for c in 0..3 {
            let off: Vector3<f64> = factor.column(c) * w.spread;
            for sign in [1.0, -1.0] {
                let g = center.pseudo(&m.point, &(off * sign), config.alpha.mean, metric, groups[l])?;
                let delta = g - g0[l];
                d1[l] += delta;
                d2[l] += delta * delta;
            }
        }
        for sign in [1.0, -1.0] {
            let delta = sign * w.spread * alpha_std * dm;
            d1[l] += delta;
            d2[l] += delta * delta;
        }
    }

    let noise_points = (8 * n) as f64;
    let mut g_hat = &g0 * (w.mean0 + w.other * noise_points) + &d1 * w.other;
    for (p, m) in plus.iter().zip(&minus) {
        g_hat += (p + m) * w.other;
    }

    let a = &g0 - &g_hat;
    let mut s = DMatrix::from_diagonal_element(n, n, config.pseudo_noise_floor);
    s.ger(w.cov0 + w.other * noise_points, &a, &a, 1.0);
    s.ger(w.other, &d1, &a, 1.0);
    s.ger(w.other, &a, &d1, 1.0);
    for l in 0..n {
        s[(l, l)] += w.other * d2[l];
    }
    let mut pxz = DMatrix::zeros(nx, n);
    for (j, (p, m)) in plus.iter().zip(&minus).enumerate() {
        let dp = p - &g_hat;
        let dm = m - &g_hat;
        s.ger(w.other, &dp, &dp, 1.0);
        s.ger(w.other, &dm, &dm, 1.0);
        let offset = lx.column(j) * w.spread;
        pxz.ger(w.other, &offset, &(p - m), 1.0);
    }

    let post = apply_gain(belief, &pxz, &s, &(-g_hat), &[YAW])?;
    Ok(UpdateOutcome::Updated(finish(post)))
}

/// Same update evaluated point by point over the dense augmented belief.
/// Quadratic in the frame size; kept as a cross-check for [`update`].
pub fn update_dense(
    belief: &GaussianBelief,
    meas: &[Measurement],
    model: ShapeModel<'_>,
    config: &LevelSetConfig,
    params: &UtParams,
) -> Result<UpdateOutcome> {
    if meas.is_empty() {
        return Ok(UpdateOutcome::Empty(belief.clone()));
    }
    check_frame(meas)?;
    let nx = belief.dim();
    let n = meas.len();
    let (metrics, groups) = metric_groups(meas)?;
    let aug = AugmentedBelief {
        base: belief,
        noise: meas.iter().map(|m| m.cov).collect(),
        alpha: config.alpha,
    };
    let dense = aug.to_dense();
    let h = |xa: &DVector<f64>| -> Result<DVector<f64>> {
        let prep = model.prepare(&xa.as_slice()[..nx], &metrics)?;
        let mut g = DVector::zeros(n);
        for (l, m) in meas.iter().enumerate() {
            let o = nx + 3 * l;
            let wl = Vector3::new(xa[o], xa[o + 1], xa[o + 2]);
            let al = xa[nx + 3 * n + l];
            g[l] = prep.pseudo(&m.point, &wl, al, &metrics[groups[l]], groups[l])?;
        }
        Ok(g)
    };
    let r = DMatrix::from_diagonal_element(n, n, config.pseudo_noise_floor);
    let post = unscented_update(&dense, h, &r, &DVector::zeros(n), params, &[YAW])?;
    let state = GaussianBelief::new(
        post.mean.rows(0, nx).into_owned(),
        post.cov.view((0, 0), (nx, nx)).into_owned(),
    )?;
    Ok(UpdateOutcome::Updated(finish(state)))
}

/// Time update of a target belief through the CCV/shape process model.
pub fn predict(
    belief: &GaussianBelief,
    config: &ProcessNoiseConfig,
    params: &UtParams,
    dynamics: Option<WeightDynamics<'_>>,
) -> Result<GaussianBelief> {
    let dim = belief.dim();
    let zeros = vec![0.0; dim + 2];
    let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let state = TargetState::from_slice(x.as_slice())?;
        Ok(motion::process_model(&state, &zeros, config, dynamics)?.to_vector())
    };
    let q = DMatrix::from_diagonal(&DVector::from_vec(config.variances(dim)));
    let mut out = unscented_predict(belief, f, &q, params, &[YAW])?;
    clamp_vector(out.mean.as_mut_slice());
    Ok(out)
}
