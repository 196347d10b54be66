//! B-spline bases and rational tensor-product surfaces.
//!
//! Surfaces carry a per-axis scaling that is applied after the rational
//! projection, so `S(u, v) = s ∘ (Σ N_i N_j w_ij P_ij) / (Σ N_i N_j w_ij)`.
//! Derivatives are analytic: basis derivatives feed the weighted numerator
//! and denominator sums, and the quotient rule recovers the rational
//! partials up to second order.

use std::io::Write;

use nalgebra::{Matrix2, Vector3};

use crate::error::{Error, Result};

/// `‖du × dv‖` below this marks the tangent plane as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-9;

/// Clamped knot sequence on `[0, 1]` together with its degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot carry degree {}",
                knots.len(),
                p
            )));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let m = knots.len() - 1;
        let clamped_start = knots[..=p].iter().all(|&k| k == 0.0);
        let clamped_end = knots[m - p..].iter().all(|&k| k == 1.0);
        if !clamped_start || !clamped_end {
            return Err(Error::InvalidKnots(
                "knots must be clamped to 0 and 1".into(),
            ));
        }
        Ok(Self { knots, degree })
    }

    /// Clamped knots with uniformly spaced interior knots for `n_basis`
    /// control points.
    pub fn clamped_uniform(n_basis: usize, degree: usize) -> Result<Self> {
        if n_basis < degree + 1 {
            return Err(Error::InvalidKnots(format!(
                "{n_basis} control points cannot carry degree {degree}"
            )));
        }
        let interior = n_basis - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        for i in 1..=interior {
            knots.push(i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Self::new(knots, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values, ascending.
    pub fn unique(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Greville abscissae: the parameter associated with each control point.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_basis())
            .map(|i| {
                if p == 0 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }

    /// Knot span index containing `t`; the last span is closed on the right.
    pub fn find_span(&self, t: f64) -> usize {
        let n = self.num_basis() - 1;
        let p = self.degree;
        if t >= self.knots[n + 1] {
            return n;
        }
        if t <= self.knots[p] {
            return p;
        }
        let (mut low, mut high) = (p, n + 1);
        let mut mid = (low + high) / 2;
        while t < self.knots[mid] || t >= self.knots[mid + 1] {
            if t < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
            mid = (low + high) / 2;
        }
        mid
    }

    /// Single basis function `N_{i,p}(t)`.
    pub fn eval_basis(&self, i: usize, t: f64) -> Result<f64> {
        let n = self.num_basis();
        if i >= n {
            return Err(Error::Contract(format!(
                "basis index {i} out of range (0..{n})"
            )));
        }
        let t = t.clamp(0.0, 1.0);
        let p = self.degree;
        let u = &self.knots;
        let m = u.len() - 1;
        if (i == 0 && t == u[0]) || (i == n - 1 && t == u[m]) {
            return Ok(1.0);
        }
        if t < u[i] || t >= u[i + p + 1] {
            return Ok(0.0);
        }
        let mut table: Vec<f64> = (0..=p)
            .map(|j| {
                if t >= u[i + j] && t < u[i + j + 1] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for k in 1..=p {
            let mut saved = if table[0] == 0.0 {
                0.0
            } else {
                (t - u[i]) * table[0] / (u[i + k] - u[i])
            };
            for j in 0..=(p - k) {
                let left = u[i + j + 1];
                let right = u[i + j + k + 1];
                if table[j + 1] == 0.0 {
                    table[j] = saved;
                    saved = 0.0;
                } else {
                    let temp = table[j + 1] / (right - left);
                    table[j] = saved + (right - t) * temp;
                    saved = (t - left) * temp;
                }
            }
        }
        Ok(table[0])
    }

    /// Non-zero basis functions and their derivatives up to `order` at `t`.
    /// Row `k` holds the `k`-th derivatives of `N_{span-p..=span}`.
    pub fn basis_derivs(&self, span: usize, t: f64, order: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=order {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p as isize - k as isize;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let col = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[(pk + 1) as usize][col];
                    d += a[s2][j] * ndu[col][pk as usize];
                }
                if r as isize <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    d += a[s2][k] * ndu[r][pk as usize];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=order {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= p.saturating_sub(k) as f64;
        }
        ders
    }
}

/// Rectangular grid of control points, `i` along u and `j` along v.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlNet {
    count_u: usize,
    count_v: usize,
    points: Vec<Vector3<f64>>,
}

impl ControlNet {
    /// `rows[i][j]` is the control point `P_ij`.
    pub fn from_rows(rows: Vec<Vec<Vector3<f64>>>) -> Result<Self> {
        let count_u = rows.len();
        let count_v = rows.first().map_or(0, Vec::len);
        if count_u == 0 || count_v == 0 || rows.iter().any(|r| r.len() != count_v) {
            return Err(Error::InvalidLayout("control net must be rectangular".into()));
        }
        Ok(Self {
            count_u,
            count_v,
            points: rows.into_iter().flatten().collect(),
        })
    }

    pub fn count_u(&self) -> usize {
        self.count_u
    }

    pub fn count_v(&self) -> usize {
        self.count_v
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.count_v + j
    }

    pub fn get(&self, i: usize, j: usize) -> &Vector3<f64> {
        &self.points[self.index(i, j)]
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.points
    }
}

/// Basis values and derivatives (up to second order) cached for one `(u, v)`.
#[derive(Debug, Clone)]
pub struct ParamSample {
    pub u: f64,
    pub v: f64,
    span_u: usize,
    span_v: usize,
    basis_u: Vec<Vec<f64>>,
    basis_v: Vec<Vec<f64>>,
}

impl ParamSample {
    pub fn new(knots_u: &KnotVector, knots_v: &KnotVector, u: f64, v: f64) -> Self {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        let span_u = knots_u.find_span(u);
        let span_v = knots_v.find_span(v);
        let order_u = knots_u.degree().min(2);
        let order_v = knots_v.degree().min(2);
        let mut basis_u = knots_u.basis_derivs(span_u, u, order_u);
        let mut basis_v = knots_v.basis_derivs(span_v, v, order_v);
        basis_u.resize(3, vec![0.0; knots_u.degree() + 1]);
        basis_v.resize(3, vec![0.0; knots_v.degree() + 1]);
        Self {
            u,
            v,
            span_u,
            span_v,
            basis_u,
            basis_v,
        }
    }
}

/// Geometry of a surface at one parameter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDifferentials {
    pub u: f64,
    pub v: f64,
    pub position: Vector3<f64>,
    pub du: Vector3<f64>,
    pub dv: Vector3<f64>,
    pub duu: Vector3<f64>,
    pub duv: Vector3<f64>,
    pub dvv: Vector3<f64>,
    /// Unit normal; zero when the tangent plane is degenerate.
    pub normal: Vector3<f64>,
    pub first_form: Matrix2<f64>,
    pub second_form: Matrix2<f64>,
    pub degenerate: bool,
}

/// Borrowed surface: a control net plus explicit weights and scaling.
///
/// Lets callers evaluate a template net under many weight/scale
/// hypotheses without cloning the net.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceView<'a> {
    pub net: &'a ControlNet,
    pub weights: &'a [f64],
    pub scaling: Vector3<f64>,
    pub degree_u: usize,
    pub degree_v: usize,
}

impl SurfaceView<'_> {
    pub fn point(&self, s: &ParamSample) -> Vector3<f64> {
        let (p, q) = (self.degree_u, self.degree_v);
        let mut num = Vector3::zeros();
        let mut den = 0.0;
        for a in 0..=p {
            let nu = s.basis_u[0][a];
            if nu == 0.0 {
                continue;
            }
            let i = s.span_u - p + a;
            for b in 0..=q {
                let idx = self.net.index(i, s.span_v - q + b);
                let c = nu * s.basis_v[0][b] * self.weights[idx];
                num += self.net.points[idx] * c;
                den += c;
            }
        }
        (num / den).component_mul(&self.scaling)
    }

    pub fn differentials(&self, s: &ParamSample) -> SurfaceDifferentials {
        let (p, q) = (self.degree_u, self.degree_v);
        // a[k][l]: weighted numerator derivative, w[k][l]: denominator derivative.
        let mut a = [[Vector3::<f64>::zeros(); 3]; 3];
        let mut w = [[0.0f64; 3]; 3];
        for ia in 0..=p {
            let i = s.span_u - p + ia;
            for jb in 0..=q {
                let idx = self.net.index(i, s.span_v - q + jb);
                let wt = self.weights[idx];
                let pt = self.net.points[idx];
                for k in 0..3 {
                    let nu = s.basis_u[k][ia];
                    if nu == 0.0 {
                        continue;
                    }
                    for l in 0..(3 - k) {
                        let c = nu * s.basis_v[l][jb] * wt;
                        a[k][l] += pt * c;
                        w[k][l] += c;
                    }
                }
            }
        }
        let w0 = w[0][0];
        let s00 = a[0][0] / w0;
        let s10 = (a[1][0] - s00 * w[1][0]) / w0;
        let s01 = (a[0][1] - s00 * w[0][1]) / w0;
        let s20 = (a[2][0] - s10 * (2.0 * w[1][0]) - s00 * w[2][0]) / w0;
        let s02 = (a[0][2] - s01 * (2.0 * w[0][1]) - s00 * w[0][2]) / w0;
        let s11 = (a[1][1] - s01 * w[1][0] - s10 * w[0][1] - s00 * w[1][1]) / w0;

        let sc = &self.scaling;
        let position = s00.component_mul(sc);
        let du = s10.component_mul(sc);
        let dv = s01.component_mul(sc);
        let duu = s20.component_mul(sc);
        let duv = s11.component_mul(sc);
        let dvv = s02.component_mul(sc);

        let cross = du.cross(&dv);
        let norm = cross.norm();
        let degenerate = norm < DEGENERATE_TOL;
        let normal = if degenerate {
            Vector3::zeros()
        } else {
            cross / norm
        };
        let f = du.dot(&dv);
        let first_form = Matrix2::new(du.dot(&du), f, f, dv.dot(&dv));
        let m = duv.dot(&normal);
        let second_form = Matrix2::new(duu.dot(&normal), m, m, dvv.dot(&normal));
        SurfaceDifferentials {
            u: s.u,
            v: s.v,
            position,
            du,
            dv,
            duu,
            duv,
            dvv,
            normal,
            first_form,
            second_form,
            degenerate,
        }
    }
}

/// Scaled rational tensor-product surface.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsSurface {
    net: ControlNet,
    weights: Vec<f64>,
    knots_u: KnotVector,
    knots_v: KnotVector,
    scaling: Vector3<f64>,
}

impl NurbsSurface {
    pub fn new(
        net: ControlNet,
        weights: Vec<f64>,
        knots_u: KnotVector,
        knots_v: KnotVector,
        scaling: Vector3<f64>,
    ) -> Result<Self> {
        if knots_u.num_basis() != net.count_u() || knots_v.num_basis() != net.count_v() {
            return Err(Error::InvalidLayout(format!(
                "net {}x{} does not match knot vectors ({} and {} basis functions)",
                net.count_u(),
                net.count_v(),
                knots_u.num_basis(),
                knots_v.num_basis()
            )));
        }
        if weights.len() != net.len() {
            return Err(Error::InvalidLayout(format!(
                "{} weights for {} control points",
                weights.len(),
                net.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Contract("weights must be positive".into()));
        }
        if scaling.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Contract("scaling must be positive".into()));
        }
        Ok(Self {
            net,
            weights,
            knots_u,
            knots_v,
            scaling,
        })
    }

    /// Unit weights and scaling over clamped uniform knots.
    pub fn uniform(net: ControlNet, degree_u: usize, degree_v: usize) -> Result<Self> {
        let knots_u = KnotVector::clamped_uniform(net.count_u(), degree_u)?;
        let knots_v = KnotVector::clamped_uniform(net.count_v(), degree_v)?;
        let weights = vec![1.0; net.len()];
        Self::new(net, weights, knots_u, knots_v, Vector3::repeat(1.0))
    }

    pub fn net(&self) -> &ControlNet {
        &self.net
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.knots_v
    }

    pub fn scaling(&self) -> Vector3<f64> {
        self.scaling
    }

    pub fn with_scaling(mut self, scaling: Vector3<f64>) -> Result<Self> {
        if scaling.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Contract("scaling must be positive".into()));
        }
        self.scaling = scaling;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.net.len() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Contract(
                "weights must be positive and match the net".into(),
            ));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn view(&self) -> SurfaceView<'_> {
        SurfaceView {
            net: &self.net,
            weights: &self.weights,
            scaling: self.scaling,
            degree_u: self.knots_u.degree(),
            degree_v: self.knots_v.degree(),
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> ParamSample {
        ParamSample::new(&self.knots_u, &self.knots_v, u, v)
    }

    pub fn eval(&self, u: f64, v: f64) -> Vector3<f64> {
        self.view().point(&self.sample(u, v))
    }

    pub fn differentials(&self, u: f64, v: f64) -> SurfaceDifferentials {
        self.view().differentials(&self.sample(u, v))
    }

    /// Triangulated `grid_u × grid_v` tessellation of the parameter domain.
    pub fn tessellate(&self, grid_u: usize, grid_v: usize) -> Result<Mesh> {
        if grid_u < 2 || grid_v < 2 {
            return Err(Error::Contract("tessellation grid must be at least 2x2".into()));
        }
        let view = self.view();
        let mut vertices = Vec::with_capacity(grid_u * grid_v);
        for a in 0..grid_u {
            let u = a as f64 / (grid_u - 1) as f64;
            for b in 0..grid_v {
                let v = b as f64 / (grid_v - 1) as f64;
                vertices.push(view.point(&self.sample(u, v)));
            }
        }
        let mut faces = Vec::with_capacity(2 * (grid_u - 1) * (grid_v - 1));
        for a in 0..grid_u - 1 {
            for b in 0..grid_v - 1 {
                let i00 = a * grid_v + b;
                let i10 = (a + 1) * grid_v + b;
                let i01 = i00 + 1;
                let i11 = i10 + 1;
                faces.push([i00, i10, i11]);
                faces.push([i00, i11, i01]);
            }
        }
        Ok(Mesh { vertices, faces })
    }
}

/// `det(II) / det(I)` at a non-degenerate point.
pub fn gaussian_curvature(diff: &SurfaceDifferentials) -> Result<f64> {
    let det_first = diff.first_form.determinant();
    if diff.degenerate || det_first <= DEGENERATE_TOL * DEGENERATE_TOL {
        return Err(Error::DegenerateCurvature {
            u: diff.u,
            v: diff.v,
        });
    }
    Ok(diff.second_form.determinant() / det_first)
}

/// Triangle mesh with zero-based face indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn write_obj<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {:.9} {:.9} {:.9}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Textbook recursive Cox–de Boor, right-closed on the final interval.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
        if p == 0 {
            let last = knots.len() - 1;
            let in_span = knots[i] <= t && t < knots[i + 1];
            let closes_end =
                t == knots[last] && knots[i + 1] == knots[last] && knots[i] < knots[i + 1];
            return if in_span || closes_end { 1.0 } else { 0.0 };
        }
        let mut out = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            out += (t - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            out += (knots[i + p + 1] - t) / d2 * cox_de_boor(knots, i + 1, p - 1, t);
        }
        out
    }

    fn planar_net(nu: usize, nv: usize) -> ControlNet {
        ControlNet::from_rows(
            (0..nu)
                .map(|i| {
                    (0..nv)
                        .map(|j| Vector3::new(i as f64, (j as f64).powi(2) * 0.3, 0.0))
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn clamped_endpoint_is_one() {
        let k = KnotVector::clamped_uniform(6, 3).unwrap();
        assert_eq!(k.eval_basis(0, 0.0).unwrap(), 1.0);
        assert_eq!(k.eval_basis(5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_midpoint_matches_recursion() {
        let k = KnotVector::clamped_uniform(5, 2).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0]);
        // Frozen from the recursive oracle: N_{1}(0.5) = 0.125, N_{2}(0.5) = 0.75.
        let expected = [0.0, 0.125, 0.75, 0.125, 0.0];
        for (i, e) in expected.iter().enumerate() {
            let oracle = cox_de_boor(k.knots(), i, 2, 0.5);
            assert_relative_eq!(oracle, *e, epsilon = 1e-15);
            assert_relative_eq!(k.eval_basis(i, 0.5).unwrap(), *e, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_basis_matches_recursion_everywhere() {
        for (n, p) in [(5, 2), (7, 3), (4, 1), (9, 4)] {
            let k = KnotVector::clamped_uniform(n, p).unwrap();
            for s in 0..=200 {
                let t = s as f64 / 200.0;
                for i in 0..n {
                    let a = k.eval_basis(i, t).unwrap();
                    let b = cox_de_boor(k.knots(), i, p, t);
                    assert!((a - b).abs() < 1e-13, "n={n} p={p} i={i} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn basis_index_out_of_range() {
        let k = KnotVector::clamped_uniform(4, 2).unwrap();
        assert!(matches!(k.eval_basis(4, 0.2), Err(Error::Contract(_))));
    }

    #[test]
    fn rejects_unclamped_and_decreasing_knots() {
        assert!(KnotVector::new(vec![0.0, 0.0, 0.5, 0.4, 1.0, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.0, 0.1, 0.5, 1.0, 1.0, 1.0], 2).is_err());
    }

    #[test]
    fn basis_derivatives_match_finite_differences() {
        let k = KnotVector::clamped_uniform(7, 3).unwrap();
        let h = 1e-6;
        for &t in &[0.13, 0.41, 0.77] {
            let span = k.find_span(t);
            let d = k.basis_derivs(span, t, 2);
            let lo = k.basis_derivs(span, t - h, 0);
            let hi = k.basis_derivs(span, t + h, 0);
            for j in 0..=3 {
                let fd = (hi[0][j] - lo[0][j]) / (2.0 * h);
                assert!((fd - d[1][j]).abs() < 1e-6 * (1.0 + d[1][j].abs()));
            }
        }
    }

    #[test]
    fn planar_net_stays_planar() {
        let surf = NurbsSurface::uniform(planar_net(5, 4), 2, 3).unwrap();
        for a in 0..=10 {
            for b in 0..=10 {
                let p = surf.eval(a as f64 / 10.0, b as f64 / 10.0);
                assert_eq!(p.z, 0.0);
            }
        }
        let d = surf.differentials(0.37, 0.52);
        assert!(d.second_form.iter().all(|&x| x.abs() < 1e-12));
        assert_eq!(gaussian_curvature(&d).unwrap().abs(), 0.0);
    }

    #[test]
    fn scaling_is_componentwise() {
        let surf = NurbsSurface::uniform(planar_net(4, 4), 2, 2).unwrap();
        let a = surf.eval(0.3, 0.6);
        let b = surf
            .clone()
            .with_scaling(Vector3::new(2.0, 1.0, 1.0))
            .unwrap()
            .eval(0.3, 0.6);
        assert_eq!(b.x, 2.0 * a.x);
        assert_eq!(b.y, a.y);
        assert_eq!(b.z, a.z);
    }

    #[test]
    fn surface_endpoints_interpolate_corners() {
        let surf = NurbsSurface::uniform(planar_net(5, 4), 3, 2).unwrap();
        assert_relative_eq!(surf.eval(0.0, 0.0), *surf.net().get(0, 0), epsilon = 1e-14);
        assert_relative_eq!(surf.eval(1.0, 1.0), *surf.net().get(4, 3), epsilon = 1e-14);
    }

    #[test]
    fn rejects_mismatched_layout() {
        let net = planar_net(4, 4);
        let ku = KnotVector::clamped_uniform(5, 2).unwrap();
        let kv = KnotVector::clamped_uniform(4, 2).unwrap();
        let r = NurbsSurface::new(net, vec![1.0; 16], ku, kv, Vector3::repeat(1.0));
        assert!(matches!(r, Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn tessellation_counts() {
        let surf = NurbsSurface::uniform(planar_net(4, 4), 2, 2).unwrap();
        let mesh = surf.tessellate(6, 5).unwrap();
        assert_eq!(mesh.vertices.len(), 30);
        assert_eq!(mesh.faces.len(), 2 * 5 * 4);
        let mut buf = Vec::new();
        mesh.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 30);
        assert!(text.lines().any(|l| l == "f 1 6 7"));
    }
}
