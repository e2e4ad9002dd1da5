//! Piecewise-linear discontinuous elements and the element-local DODSD system.
//!
//! On each triangle the P1 basis is the barycentric (nodal) basis, so the
//! three coefficients of a field on `K` are its values at the vertices of `K`.
//! For a direction `omega` and streamline-diffusion parameter `delta` the
//! local system is
//!
//! ```text
//! A[i][j] = (omega.grad phi_j + sigma_t phi_j, phi_i + delta omega.grad phi_i)_K
//!         + sum_{inflow e} <phi_j, phi_i |omega.n|>_e
//! b[i]    = (s, phi_i + delta omega.grad phi_i)_K
//!         + sum_{inflow e} <u_upwind, phi_i |omega.n|>_e
//! ```
//!
//! `delta = 0` gives the plain upwind DG (DODG) scheme.

use crate::mesh::{Point, TriangleMesh};
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::{Result, RteError};

/// Geometry and constant basis gradients of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementBasis {
    pub points: [Point; 3],
    pub area: f64,
    /// `grads[i]` is the gradient of the barycentric coordinate `phi_i`.
    pub grads: [[f64; 2]; 3],
    /// Outward unit normal of local edge `j` (opposite vertex `j`).
    pub normals: [[f64; 2]; 3],
    pub edge_lengths: [f64; 3],
}

impl ElementBasis {
    pub fn new(points: [Point; 3]) -> Result<Self> {
        let [p0, p1, p2] = points;
        let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        if !(area > 0.0) {
            return Err(RteError::InvalidMesh(format!("degenerate or clockwise triangle (area {area:e})")));
        }
        let mut grads = [[0.0; 2]; 3];
        let mut normals = [[0.0; 2]; 3];
        let mut edge_lengths = [0.0; 3];
        for i in 0..3 {
            let a = points[(i + 1) % 3];
            let b = points[(i + 2) % 3];
            grads[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = d[0].hypot(d[1]);
            normals[i] = [d[1] / len, -d[0] / len];
            edge_lengths[i] = len;
        }
        Ok(Self { points, area, grads, normals, edge_lengths })
    }

    /// Bases for every triangle of `mesh`.
    pub fn for_mesh(mesh: &TriangleMesh) -> Result<Vec<Self>> {
        (0..mesh.n_triangles())
            .map(|t| Self::new(mesh.triangle_points(t)).map_err(|e| annotate_element(e, t)))
            .collect()
    }

    pub fn point_at(&self, bary: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.points;
        [bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0], bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1]]
    }

    /// Barycentric coordinates of local edge `j` at parameter `t`, running
    /// from local vertex `(j+1)%3` (`t = 0`) to `(j+2)%3` (`t = 1`).
    pub fn edge_bary(j: usize, t: f64) -> [f64; 3] {
        let mut bary = [0.0; 3];
        bary[(j + 1) % 3] = 1.0 - t;
        bary[(j + 2) % 3] = t;
        bary
    }

    /// `omega . grad phi_i` for each basis function.
    pub fn directional(&self, omega: [f64; 2]) -> [f64; 3] {
        self.grads.map(|g| omega[0] * g[0] + omega[1] * g[1])
    }

    pub fn omega_dot_normal(&self, omega: [f64; 2], j: usize) -> f64 {
        omega[0] * self.normals[j][0] + omega[1] * self.normals[j][1]
    }

    pub fn diameter(&self) -> f64 {
        self.edge_lengths.iter().copied().fold(0.0, f64::max)
    }
}

fn annotate_element(err: RteError, element: usize) -> RteError {
    match err {
        RteError::InvalidMesh(m) => RteError::InvalidMesh(format!("element {element}: {m}")),
        other => other,
    }
}

/// Upwind trace `u_-` on an inflow edge.
#[derive(Clone, Copy)]
pub enum Trace<'a> {
    Zero,
    /// Linear data given by its values at the two edge endpoints, ordered as
    /// local vertices `(j+1)%3`, `(j+2)%3`.
    Linear([f64; 2]),
    /// Arbitrary data evaluated at physical points of the edge.
    Function(&'a (dyn Fn(Point) -> f64 + Sync)),
}

#[derive(Clone, Copy)]
pub struct InflowFace<'a> {
    pub local_edge: usize,
    pub trace: Trace<'a>,
}

/// Quadrature used by assembly.
#[derive(Clone, Debug)]
pub struct AssemblyRules {
    pub triangle: TriangleRule,
    pub edge: EdgeRule,
}

impl Default for AssemblyRules {
    fn default() -> Self {
        Self { triangle: TriangleRule::degree4(), edge: EdgeRule::degree5() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSystem {
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
}

/// Reason a local solve was refused.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSystem(pub String);

impl std::fmt::Display for SingularSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Assembles the element-local DODSD system for one direction.
///
/// `sigma_t` is sampled at volume quadrature points; `source(bary, x)` is the
/// full right-hand side (scattering plus external source) at a point of `K`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_local(
    basis: &ElementBasis,
    omega: [f64; 2],
    delta: f64,
    sigma_t: &dyn Fn(Point) -> f64,
    inflow: &[InflowFace<'_>],
    source: &dyn Fn([f64; 3], Point) -> f64,
    rules: &AssemblyRules,
) -> LocalSystem {
    let d = basis.directional(omega);
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];

    for (bary, w) in rules.triangle.iter() {
        let x = basis.point_at(bary);
        let wa = w * basis.area;
        let st = sigma_t(x);
        let s = source(bary, x);
        for i in 0..3 {
            let test = bary[i] + delta * d[i];
            for j in 0..3 {
                a[i][j] += wa * (d[j] + st * bary[j]) * test;
            }
            b[i] += wa * s * test;
        }
    }

    for face in inflow {
        let j = face.local_edge;
        let flux = basis.omega_dot_normal(omega, j).abs();
        let scale = flux * basis.edge_lengths[j];
        for (t, w) in rules.edge.iter() {
            let bary = ElementBasis::edge_bary(j, t);
            let upwind = match face.trace {
                Trace::Zero => 0.0,
                Trace::Linear([u0, u1]) => (1.0 - t) * u0 + t * u1,
                Trace::Function(f) => f(basis.point_at(bary)),
            };
            for i in 0..3 {
                let ws = w * scale * bary[i];
                if ws == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    a[i][k] += ws * bary[k];
                }
                b[i] += ws * upwind;
            }
        }
    }

    LocalSystem { a, b }
}

impl LocalSystem {
    pub fn norm_inf(&self) -> f64 {
        self.a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Gaussian elimination with partial pivoting.
    pub fn solve(&self) -> std::result::Result<[f64; 3], SingularSystem> {
        let scale = self.norm_inf();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(SingularSystem(format!("matrix norm is {scale}")));
        }
        let mut m = self.a;
        let mut r = self.b;
        for col in 0..3 {
            let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).expect("non-empty range");
            if m[piv][col].abs() < 1e-14 * scale {
                return Err(SingularSystem(format!(
                    "pivot {:e} below 1e-14 * |A| = {:e}",
                    m[piv][col].abs(),
                    1e-14 * scale
                )));
            }
            m.swap(col, piv);
            r.swap(col, piv);
            for row in col + 1..3 {
                let f = m[row][col] / m[col][col];
                let pivot_row = m[col];
                for (x, p) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                r[row] -= f * r[col];
            }
        }
        let mut u = [0.0; 3];
        for row in (0..3).rev() {
            let tail: f64 = (row + 1..3).map(|k| m[row][k] * u[k]).sum();
            u[row] = (r[row] - tail) / m[row][row];
        }

        let u_norm = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let b_norm = self.b.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let residual = (0..3)
            .map(|i| (self.a[i][0] * u[0] + self.a[i][1] * u[1] + self.a[i][2] * u[2] - self.b[i]).abs())
            .fold(0.0, f64::max);
        if !(residual <= 1e-10 * (scale * u_norm + b_norm)) {
            return Err(SingularSystem(format!("residual {residual:e} too large after elimination")));
        }
        Ok(u)
    }
}

/// Element-local solve; see [`LocalSystem::solve`].
pub fn solve_local(sys: &LocalSystem) -> std::result::Result<[f64; 3], SingularSystem> {
    sys.solve()
}

/// `coeffs[(l * n_elems + k) * 3 + j]`: value of direction `l` at local vertex
/// `j` of element `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DGSolution {
    n_dirs: usize,
    n_elems: usize,
    coeffs: Vec<f64>,
}

impl DGSolution {
    pub fn zeros(n_dirs: usize, n_elems: usize) -> Self {
        Self { n_dirs, n_elems, coeffs: vec![0.0; n_dirs * n_elems * 3] }
    }

    pub fn from_coeffs(n_dirs: usize, n_elems: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n_dirs * n_elems * 3 {
            return Err(RteError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                n_dirs * n_elems * 3,
                coeffs.len()
            )));
        }
        Ok(Self { n_dirs, n_elems, coeffs })
    }

    pub fn n_dirs(&self) -> usize {
        self.n_dirs
    }

    pub fn n_elems(&self) -> usize {
        self.n_elems
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        &self.coeffs[l * self.n_elems * 3..(l + 1) * self.n_elems * 3]
    }

    pub fn direction_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.n_elems * 3;
        &mut self.coeffs[l * n..(l + 1) * n]
    }

    /// Mutable per-direction slices, for parallel sweeps.
    pub fn directions_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        let n = (self.n_elems * 3).max(1);
        self.coeffs.chunks_mut(n)
    }

    pub fn element(&self, l: usize, k: usize) -> [f64; 3] {
        let o = (l * self.n_elems + k) * 3;
        [self.coeffs[o], self.coeffs[o + 1], self.coeffs[o + 2]]
    }

    pub fn set_element(&mut self, l: usize, k: usize, c: [f64; 3]) {
        let o = (l * self.n_elems + k) * 3;
        self.coeffs[o..o + 3].copy_from_slice(&c);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    /// Field value of direction `l` on element `k` at barycentric `point`.
    pub fn eval(&self, l: usize, k: usize, point: [f64; 3]) -> Result<f64> {
        if l >= self.n_dirs || k >= self.n_elems {
            return Err(RteError::IndexOutOfRange(format!(
                "direction {l} / element {k} outside {} x {}",
                self.n_dirs, self.n_elems
            )));
        }
        let c = self.element(l, k);
        Ok(c[0] * point[0] + c[1] * point[1] + c[2] * point[2])
    }
}

/// See [`DGSolution::eval`].
pub fn eval_field(sol: &DGSolution, l: usize, k: usize, point: [f64; 3]) -> Result<f64> {
    sol.eval(l, k, point)
}

/// `||v||^2_{0,K}` for P1 nodal coefficients `c`.
pub fn p1_mass_norm_sq(area: f64, c: [f64; 3]) -> f64 {
    let s = c[0] + c[1] + c[2];
    area / 12.0 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + s * s)
}

/// Element-wise L2 projection of `u(x, l)` onto P1 for every direction.
pub fn project_exact(u: &dyn Fn(Point, usize) -> f64, mesh: &TriangleMesh, n_dirs: usize) -> Result<DGSolution> {
    let bases = ElementBasis::for_mesh(mesh)?;
    let rule = TriangleRule::degree6();
    let mut sol = DGSolution::zeros(n_dirs, mesh.n_triangles());
    for l in 0..n_dirs {
        for (k, basis) in bases.iter().enumerate() {
            let mut r = [0.0; 3];
            for (bary, w) in rule.iter() {
                let v = u(basis.point_at(bary), l);
                for i in 0..3 {
                    r[i] += w * v * bary[i];
                }
            }
            // r holds moments divided by the area; the P1 mass matrix is
            // (area/12)(I + 11^T) with inverse (12/area)(I - 11^T/4).
            let s = r[0] + r[1] + r[2];
            sol.set_element(l, k, r.map(|ri| 3.0 * (4.0 * ri - s)));
        }
    }
    Ok(sol)
}
