//! Level-set shape function over a NURBS surface.
//!
//! Measurement sources are expressed in the target frame, matched to the
//! surface node with the smallest angular offset as seen from the local
//! origin, and scored with a signed Mahalanobis distance: positive inside
//! (radially below the surface), negative outside.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::nurbs::{KnotVector, NurbsSurface, ParamSample, SurfaceView};

/// A point in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPoint(pub Vector3<f64>);

impl LocalPoint {
    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Target center and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub center: Vector3<f64>,
    pub yaw: f64,
}

pub fn to_local(world: &Vector3<f64>, center: &Vector3<f64>, yaw: f64) -> LocalPoint {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    LocalPoint(rot.inverse_transform_vector(&(world - center)))
}

pub fn from_local(local: &LocalPoint, center: &Vector3<f64>, yaw: f64) -> Vector3<f64> {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    rot * local.0 + center
}

/// Mahalanobis metric of a 3×3 noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMetric {
    cov: Matrix3<f64>,
    chol: Matrix3<f64>,
}

impl NoiseMetric {
    pub fn new(cov: Matrix3<f64>) -> Result<Self> {
        if cov.iter().any(|x| !x.is_finite()) || (cov - cov.transpose()).amax() > 1e-12 {
            return Err(Error::SingularCovariance);
        }
        let chol = cov.cholesky().ok_or(Error::SingularCovariance)?.l();
        if chol.diagonal().iter().any(|&d| !(d > 1e-150)) {
            return Err(Error::SingularCovariance);
        }
        Ok(Self { cov, chol })
    }

    pub fn cov(&self) -> &Matrix3<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub fn factor(&self) -> &Matrix3<f64> {
        &self.chol
    }

    pub fn distance(&self, diff: &Vector3<f64>) -> f64 {
        let l = &self.chol;
        let y0 = diff.x / l[(0, 0)];
        let y1 = (diff.y - l[(1, 0)] * y0) / l[(1, 1)];
        let y2 = (diff.z - l[(2, 0)] * y0 - l[(2, 1)] * y1) / l[(2, 2)];
        (y0 * y0 + y1 * y1 + y2 * y2).sqrt()
    }
}

/// `sqrt((z − s)ᵀ R⁻¹ (z − s))`.
pub fn mahalanobis(
    z_local: &LocalPoint,
    surface_point: &Vector3<f64>,
    noise_cov: &Matrix3<f64>,
) -> Result<f64> {
    Ok(NoiseMetric::new(*noise_cov)?.distance(&(z_local.0 - surface_point)))
}

/// A prototype surface plus the mapping from net weights to the
/// (possibly smaller) set of independently estimated weights.
///
/// In a closed-in-u layout the last column of the net repeats the first,
/// and both share one weight so the seam stays watertight.
#[derive(Debug, Clone)]
pub struct ShapeTemplate {
    base: NurbsSurface,
    closed_u: bool,
    weight_map: Vec<usize>,
    n_effective: usize,
}

impl ShapeTemplate {
    pub fn new(base: NurbsSurface, closed_u: bool) -> Result<Self> {
        let net = base.net();
        let (cu, cv) = (net.count_u(), net.count_v());
        if closed_u {
            if cu < 3 {
                return Err(Error::InvalidLayout(
                    "a closed ring needs at least 3 columns".into(),
                ));
            }
            for j in 0..cv {
                if (net.get(0, j) - net.get(cu - 1, j)).norm() > 1e-12 {
                    return Err(Error::InvalidLayout(
                        "closed layout requires the last column to repeat the first".into(),
                    ));
                }
            }
        }
        let unique_u = if closed_u { cu - 1 } else { cu };
        let weight_map = (0..cu)
            .flat_map(|i| {
                let ii = if closed_u && i == cu - 1 { 0 } else { i };
                (0..cv).map(move |j| ii * cv + j)
            })
            .collect();
        Ok(Self {
            base,
            closed_u,
            weight_map,
            n_effective: unique_u * cv,
        })
    }

    pub fn base(&self) -> &NurbsSurface {
        &self.base
    }

    pub fn closed_u(&self) -> bool {
        self.closed_u
    }

    pub fn effective_weight_count(&self) -> usize {
        self.n_effective
    }

    /// Net index → effective weight index.
    pub fn weight_map(&self) -> &[usize] {
        &self.weight_map
    }

    pub fn expand_weights(&self, effective: &[f64]) -> Vec<f64> {
        self.weight_map.iter().map(|&k| effective[k]).collect()
    }

    /// Representative `(i, j)` of every effective weight.
    pub fn effective_nodes(&self) -> Vec<(usize, usize)> {
        let cv = self.base.net().count_v();
        (0..self.n_effective).map(|k| (k / cv, k % cv)).collect()
    }

    pub fn view<'a>(&'a self, full_weights: &'a [f64], scale: Vector3<f64>) -> SurfaceView<'a> {
        SurfaceView {
            net: self.base.net(),
            weights: full_weights,
            scaling: scale,
            degree_u: self.base.knots_u().degree(),
            degree_v: self.base.knots_v().degree(),
        }
    }

    pub fn surface(&self, scale: Vector3<f64>, effective: Option<&[f64]>) -> Result<NurbsSurface> {
        let s = self.base.clone().with_scaling(scale)?;
        match effective {
            Some(w) if w.len() == self.n_effective => s.with_weights(self.expand_weights(w)),
            Some(w) => Err(Error::Contract(format!(
                "{} weights for {} effective coordinates",
                w.len(),
                self.n_effective
            ))),
            None => Ok(s),
        }
    }
}

/// Which parameter pairs compete in the closest-point search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSet {
    /// Inclusive uniform grid over `[0,1]²`.
    Uniform { res_u: usize, res_v: usize },
    /// Distinct knot values of both knot vectors.
    Knots,
}

impl Default for CandidateSet {
    fn default() -> Self {
        CandidateSet::Uniform { res_u: 32, res_v: 32 }
    }
}

/// Parameter nodes with cached basis values; depends only on the knots.
#[derive(Debug, Clone)]
pub struct GridLayout {
    samples: Vec<ParamSample>,
    res_u: usize,
    res_v: usize,
}

impl GridLayout {
    pub fn new(knots_u: &KnotVector, knots_v: &KnotVector, set: CandidateSet) -> Result<Self> {
        let (us, vs) = match set {
            CandidateSet::Uniform { res_u, res_v } => {
                if res_u < 2 || res_v < 2 {
                    return Err(Error::Contract("grid resolution must be at least 2".into()));
                }
                (linspace(res_u), linspace(res_v))
            }
            CandidateSet::Knots => (knots_u.unique(), knots_v.unique()),
        };
        let samples = us
            .iter()
            .flat_map(|&u| vs.iter().map(move |&v| (u, v)))
            .map(|(u, v)| ParamSample::new(knots_u, knots_v, u, v))
            .collect();
        Ok(Self {
            samples,
            res_u: us.len(),
            res_v: vs.len(),
        })
    }

    pub fn for_surface(surface: &NurbsSurface, set: CandidateSet) -> Result<Self> {
        Self::new(surface.knots_u(), surface.knots_v(), set)
    }

    pub fn samples(&self) -> &[ParamSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.res_u, self.res_v)
    }
}

fn linspace(n: usize) -> Vec<f64> {
    (0..n).map(|a| a as f64 / (n - 1) as f64).collect()
}

/// Closest-point result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHit {
    pub index: usize,
    pub u: f64,
    pub v: f64,
    pub point: Vector3<f64>,
}

/// Surface points of one shape hypothesis on a [`GridLayout`].
#[derive(Debug, Clone)]
pub struct ParamGrid<'a> {
    layout: &'a GridLayout,
    points: Vec<Vector3<f64>>,
    dirs: Vec<[f64; 3]>,
    index: DirectionIndex,
}

impl<'a> ParamGrid<'a> {
    pub fn build(layout: &'a GridLayout, surface: SurfaceView<'_>) -> Self {
        let points: Vec<Vector3<f64>> = layout.samples.iter().map(|s| surface.point(s)).collect();
        let dirs: Vec<[f64; 3]> = points
            .iter()
            .map(|p| {
                let n = p.norm();
                if n > 0.0 {
                    [p.x / n, p.y / n, p.z / n]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        let index = DirectionIndex::build(&dirs);
        Self {
            layout,
            points,
            dirs,
            index,
        }
    }

    pub fn layout(&self) -> &GridLayout {
        self.layout
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    fn hit(&self, index: usize) -> GridHit {
        let s = &self.layout.samples[index];
        GridHit {
            index,
            u: s.u,
            v: s.v,
            point: self.points[index],
        }
    }

    fn unit(z: &LocalPoint) -> Result<[f64; 3]> {
        let n = z.0.norm();
        if !(n > 1e-12) {
            return Err(Error::CenterPoint);
        }
        Ok([z.0.x / n, z.0.y / n, z.0.z / n])
    }

    /// Node with the smallest angle to `z`; ties go to the lowest (u, v) index.
    pub fn closest(&self, z: &LocalPoint) -> Result<GridHit> {
        let q = Self::unit(z)?;
        Ok(self.hit(self.index.nearest(&q)))
    }

    /// Linear scan with the same criterion as [`ParamGrid::closest`].
    pub fn closest_exhaustive(&self, z: &LocalPoint) -> Result<GridHit> {
        let q = Self::unit(z)?;
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, d) in self.dirs.iter().enumerate() {
            let d2 = chord2(d, &q);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        Ok(self.hit(best.1))
    }

    /// True when every axis half-space holds at least one surface point.
    pub fn encloses_origin(&self) -> bool {
        (0..3).all(|a| {
            self.points.iter().any(|p| p[a] > 0.0) && self.points.iter().any(|p| p[a] < 0.0)
        })
    }

    /// Maximum of the shape function: the limit at the local origin, i.e.
    /// the largest Mahalanobis norm of any surface node.
    pub fn d_max(&self, metric: &NoiseMetric) -> Result<f64> {
        if !self.encloses_origin() {
            return Err(Error::InvalidShape);
        }
        Ok(self
            .points
            .iter()
            .map(|p| metric.distance(p))
            .fold(0.0, f64::max))
    }

    /// Signed distance of a target-frame point.
    pub fn signed_distance(&self, z: &LocalPoint, metric: &NoiseMetric) -> Result<f64> {
        match self.closest(z) {
            Ok(hit) => {
                let m = metric.distance(&(z.0 - hit.point));
                Ok(if z.0.norm() <= hit.point.norm() { m } else { -m })
            }
            Err(Error::CenterPoint) => self.d_max(metric),
            Err(e) => Err(e),
        }
    }

    /// Radial star-convex membership test.
    pub fn contains(&self, z: &LocalPoint) -> bool {
        match self.closest(z) {
            Ok(hit) => z.0.norm() <= hit.point.norm(),
            Err(_) => true,
        }
    }

    /// Componentwise min and max over all nodes.
    pub fn extents(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Signed shape function of a world point for a posed grid.
pub fn shape_function(
    grid: &ParamGrid<'_>,
    pose: &Pose,
    z_world: &Vector3<f64>,
    metric: &NoiseMetric,
) -> Result<f64> {
    grid.signed_distance(&to_local(z_world, &pose.center, pose.yaw), metric)
}

pub fn d_max(grid: &ParamGrid<'_>, metric: &NoiseMetric) -> Result<f64> {
    grid.d_max(metric)
}

#[inline]
fn chord2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Exact nearest-neighbour index over unit directions (implicit k-d tree).
#[derive(Debug, Clone)]
struct DirectionIndex {
    nodes: Vec<(usize, [f64; 3])>,
}

impl DirectionIndex {
    fn build(dirs: &[[f64; 3]]) -> Self {
        let mut nodes: Vec<(usize, [f64; 3])> = dirs.iter().copied().enumerate().collect();
        Self::split(&mut nodes, 0);
        Self { nodes }
    }

    fn split(items: &mut [(usize, [f64; 3])], depth: usize) {
        if items.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| {
            a.1[axis].total_cmp(&b.1[axis]).then(a.0.cmp(&b.0))
        });
        let (left, right) = items.split_at_mut(mid);
        Self::split(left, depth + 1);
        Self::split(&mut right[1..], depth + 1);
    }

    fn nearest(&self, q: &[f64; 3]) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        Self::search(&self.nodes, 0, q, &mut best);
        best.1
    }

    fn search(items: &[(usize, [f64; 3])], depth: usize, q: &[f64; 3], best: &mut (f64, usize)) {
        if items.is_empty() {
            return;
        }
        let mid = items.len() / 2;
        let (idx, p) = &items[mid];
        let d2 = chord2(p, q);
        if d2 < best.0 || (d2 == best.0 && *idx < best.1) {
            *best = (d2, *idx);
        }
        if items.len() == 1 {
            return;
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (&items[..mid], &items[mid + 1..])
        } else {
            (&items[mid + 1..], &items[..mid])
        };
        Self::search(near, depth + 1, q, best);
        if diff * diff <= best.0 {
            Self::search(far, depth + 1, q, best);
        }
    }
}
