//! Source iteration for the coupled discrete-ordinate system, plus the
//! global bilinear form `a_h` and the stability norm `|||.|||`.
//!
//! One iteration sweeps every direction with the scattering term lagged from
//! the previous iterate:
//!
//! ```text
//! sweep_l( sigma_s * sum_i G[l][i] u^{i, j-1} + f_l )  ->  u^{l, j}
//! ```
//!
//! Directions are independent within an iteration and are swept in parallel
//! unless the configuration asks for sequential execution. Reductions are
//! always performed in direction order, so results do not depend on thread
//! count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::angular::{AngularQuadrature, PhaseFunction, ScatterMatrix};
use crate::dg::{p1_mass_norm_sq, AssemblyRules, DGSolution, ElementBasis};
use crate::mesh::{Point, TriangleMesh};
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::sweep::{build_schedule, sweep_direction, Delta, DirectionData, SweepSchedule};
use crate::{Result, RteError, EPS_NORMAL};

pub type SpatialFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// `(x, direction index) -> value`.
pub type DirectionalFn = Arc<dyn Fn(Point, usize) -> f64 + Send + Sync>;

/// Coefficients, kernel, sources and boundary data of a transport problem.
#[derive(Clone)]
pub struct TransportProblem {
    pub sigma_t: SpatialFn,
    pub sigma_s: SpatialFn,
    pub phase: PhaseFunction,
    pub f: DirectionalFn,
    /// Prescribed `u` on the inflow boundary of each direction.
    pub inflow: DirectionalFn,
    pub quad: AngularQuadrature,
}

impl TransportProblem {
    /// Constant cross sections with zero inflow data.
    pub fn homogeneous(
        sigma_t: f64,
        sigma_s: f64,
        phase: PhaseFunction,
        quad: AngularQuadrature,
        f: DirectionalFn,
    ) -> Self {
        Self {
            sigma_t: Arc::new(move |_| sigma_t),
            sigma_s: Arc::new(move |_| sigma_s),
            phase,
            f,
            inflow: Arc::new(|_, _| 0.0),
            quad,
        }
    }

    pub fn scatter_matrix(&self) -> Result<ScatterMatrix> {
        ScatterMatrix::new(&self.phase, &self.quad)
    }

    /// Checks `sigma_s >= 0` and `sigma_t - sigma_s >= c0 > 0` at the assembly
    /// quadrature points; returns the sampled `c0`.
    pub fn check_assumptions(&self, mesh: &TriangleMesh) -> Result<f64> {
        if self.quad.dim != 2 {
            return Err(RteError::InvalidArgument("the transport solver is two-dimensional".into()));
        }
        let mut c0 = f64::INFINITY;
        for x in sample_points(mesh)? {
            let (st, ss) = ((self.sigma_t)(x), (self.sigma_s)(x));
            if !(ss >= 0.0) {
                return Err(RteError::AssumptionViolation(format!("sigma_s = {ss} < 0 at {x:?}")));
            }
            c0 = c0.min(st - ss);
        }
        if !(c0 > 0.0) {
            return Err(RteError::AssumptionViolation(format!("sigma_t - sigma_s has minimum {c0}, need > 0")));
        }
        Ok(c0)
    }

    /// `min(sigma_t - m sigma_s)` over the sample points.
    pub fn c0_prime(&self, mesh: &TriangleMesh, g: &ScatterMatrix) -> Result<f64> {
        let m = g.m_bound();
        Ok(sample_points(mesh)?
            .into_iter()
            .map(|x| (self.sigma_t)(x) - m * (self.sigma_s)(x))
            .fold(f64::INFINITY, f64::min))
    }
}

fn sample_points(mesh: &TriangleMesh) -> Result<Vec<Point>> {
    let rule = TriangleRule::degree4();
    let bases = ElementBasis::for_mesh(mesh)?;
    Ok(bases.iter().flat_map(|b| rule.points.iter().map(|&p| b.point_at(p))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Streamline-diffusion test functions, `delta = c_bar * h`.
    Dodsd,
    /// Plain upwind DG, `delta = 0`.
    Dodg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaMode {
    /// `delta = c_bar * h` with the mesh-wide `h`.
    Global,
    /// `delta_K = c_bar * h_K`.
    ElementLocal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub c_bar: f64,
    /// Relative weighted-L2 update at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub delta_mode: DeltaMode,
    /// Sweep directions on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Dodsd,
            c_bar: 1.0,
            tol: 1e-10,
            max_iter: 1000,
            delta_mode: DeltaMode::Global,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn dodg() -> Self {
        Self { method: Method::Dodg, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(RteError::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(RteError::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.c_bar >= 0.0) || !self.c_bar.is_finite() {
            return Err(RteError::InvalidArgument(format!("c_bar must be finite and >= 0, got {}", self.c_bar)));
        }
        Ok(())
    }

    /// Mesh-wide `delta` (zero for DODG).
    pub fn delta(&self, h: f64) -> f64 {
        match self.method {
            Method::Dodsd => self.c_bar * h,
            Method::Dodg => 0.0,
        }
    }

    fn element_deltas(&self, mesh: &TriangleMesh) -> Vec<f64> {
        match (self.method, self.delta_mode) {
            (Method::Dodg, _) => vec![0.0; mesh.n_triangles()],
            (Method::Dodsd, DeltaMode::Global) => vec![self.c_bar * mesh.h; mesh.n_triangles()],
            (Method::Dodsd, DeltaMode::ElementLocal) => {
                (0..mesh.n_triangles()).map(|k| self.c_bar * mesh.diameter(k)).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative update after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Mesh-wide delta (the largest element value in element-local mode).
    pub delta_used: f64,
}

/// `(S_d u)^l = sum_i G[l][i] u^i`, coefficient-wise (exact for P1 fields).
pub fn apply_scatter(sol: &DGSolution, g: &ScatterMatrix, parallel: bool) -> DGSolution {
    let n = sol.n_elems() * 3;
    let mut out = DGSolution::zeros(sol.n_dirs(), sol.n_elems());
    let row = |l: usize, dst: &mut [f64]| {
        for (i, &gli) in g.row(l).iter().enumerate() {
            if gli == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(sol.direction(i)) {
                *d += gli * s;
            }
        }
    };
    if n == 0 {
        return out;
    }
    if parallel {
        out.coeffs_mut().par_chunks_mut(n).enumerate().for_each(|(l, dst)| row(l, dst));
    } else {
        out.coeffs_mut().chunks_mut(n).enumerate().for_each(|(l, dst)| row(l, dst));
    }
    out
}

/// Scattering right-hand side of one direction,
/// `x -> sigma_s(x) sum_i G[l][i] u^i(x)`, evaluated on a given element.
pub struct ScatteringSource<'a> {
    coeffs: Vec<[f64; 3]>,
    sigma_s: &'a (dyn Fn(Point) -> f64 + Sync),
}

impl ScatteringSource<'_> {
    pub fn eval(&self, k: usize, bary: [f64; 3], x: Point) -> f64 {
        let c = self.coeffs[k];
        (self.sigma_s)(x) * (c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2])
    }
}

pub fn scattering_source<'a>(
    sol: &DGSolution,
    g: &ScatterMatrix,
    sigma_s: &'a (dyn Fn(Point) -> f64 + Sync),
    l: usize,
) -> ScatteringSource<'a> {
    let mut coeffs = vec![[0.0; 3]; sol.n_elems()];
    for (i, &gli) in g.row(l).iter().enumerate() {
        for (k, c) in coeffs.iter_mut().enumerate() {
            let u = sol.element(i, k);
            for j in 0..3 {
                c[j] += gli * u[j];
            }
        }
    }
    ScatteringSource { coeffs, sigma_s }
}

/// `sum_l w_l sum_K ||v^l||^2_{0,K}` from exact P1 mass matrices.
pub fn weighted_l2_sq(sol: &DGSolution, mesh: &TriangleMesh, weights: &[f64]) -> f64 {
    let areas: Vec<f64> = (0..mesh.n_triangles()).map(|k| mesh.area(k)).collect();
    let per_dir: Vec<f64> = (0..sol.n_dirs())
        .map(|l| (0..sol.n_elems()).map(|k| p1_mass_norm_sq(areas[k], sol.element(l, k))).sum::<f64>())
        .collect();
    per_dir.iter().zip(weights).map(|(s, w)| w * s).sum()
}

/// Everything that stays fixed across source iterations.
pub struct PreparedSolver<'a> {
    problem: &'a TransportProblem,
    mesh: &'a TriangleMesh,
    config: SolverConfig,
    bases: Vec<ElementBasis>,
    schedules: Vec<SweepSchedule>,
    scatter: ScatterMatrix,
    deltas: Vec<f64>,
    rules: AssemblyRules,
    decoupled: bool,
}

impl<'a> PreparedSolver<'a> {
    pub fn new(problem: &'a TransportProblem, mesh: &'a TriangleMesh, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        problem.check_assumptions(mesh)?;
        let bases = ElementBasis::for_mesh(mesh)?;
        let scatter = problem.scatter_matrix()?;
        let build = |l: usize| build_schedule(mesh, problem.quad.omega2(l));
        let schedules = if config.parallel {
            (0..problem.quad.len()).into_par_iter().map(build).collect::<Result<Vec<_>>>()?
        } else {
            (0..problem.quad.len()).map(build).collect::<Result<Vec<_>>>()?
        };
        let no_scattering = sample_points(mesh)?.into_iter().all(|x| (problem.sigma_s)(x) == 0.0);
        Ok(Self {
            problem,
            mesh,
            config,
            bases,
            schedules,
            deltas: config.element_deltas(mesh),
            decoupled: no_scattering || scatter.is_zero(),
            scatter,
            rules: AssemblyRules::default(),
        })
    }

    pub fn schedules(&self) -> &[SweepSchedule] {
        &self.schedules
    }

    pub fn scatter(&self) -> &ScatterMatrix {
        &self.scatter
    }

    /// Sweeps every direction once with the scattering term built from `prev`
    /// (or without scattering when `prev` is `None`).
    pub fn sweep_all(&self, prev: Option<&DGSolution>) -> Result<DGSolution> {
        let n_dirs = self.problem.quad.len();
        let n = self.mesh.n_triangles();
        let scat = prev.map(|u| apply_scatter(u, &self.scatter, self.config.parallel));
        let mut next = DGSolution::zeros(n_dirs, n);
        let sigma_t = &*self.problem.sigma_t;
        let sigma_s = &*self.problem.sigma_s;
        let f = &*self.problem.f;
        let inflow = &*self.problem.inflow;

        let one = |l: usize, out: &mut [f64]| -> Result<()> {
            let scat_l = scat.as_ref().map(|s| s.direction(l));
            let source = |k: usize, bary: [f64; 3], x: Point| {
                let s = match scat_l {
                    Some(c) => sigma_s(x) * (c[3 * k] * bary[0] + c[3 * k + 1] * bary[1] + c[3 * k + 2] * bary[2]),
                    None => 0.0,
                };
                s + f(x, l)
            };
            let inflow_l = |x: Point| inflow(x, l);
            let data = DirectionData {
                omega: self.problem.quad.omega2(l),
                delta: Delta::PerElement(&self.deltas),
                sigma_t,
                source: &source,
                inflow: &inflow_l,
            };
            sweep_direction(self.mesh, &self.bases, &self.schedules[l], &data, &self.rules, out).map_err(|e| match e {
                RteError::Stability { element, layer, detail, .. } => {
                    RteError::Stability { element, direction: Some(l), layer, detail }
                }
                other => other,
            })
        };

        if n > 0 {
            if self.config.parallel {
                next.coeffs_mut().par_chunks_mut(3 * n).enumerate().try_for_each(|(l, out)| one(l, out))?;
            } else {
                next.coeffs_mut().chunks_mut(3 * n).enumerate().try_for_each(|(l, out)| one(l, out))?;
            }
        }
        Ok(next)
    }

    pub fn solve(&self) -> Result<(DGSolution, SolveReport)> {
        let weights = &self.problem.quad.weights;
        let mut current: Option<DGSolution> = None;
        let mut history = Vec::new();
        for it in 1..=self.config.max_iter {
            let next = self.sweep_all(current.as_ref())?;
            let norm = weighted_l2_sq(&next, self.mesh, weights).sqrt();
            let residual = if self.decoupled {
                // nothing couples the directions: the first sweep is the fixed point
                0.0
            } else {
                let mut diff = next.clone();
                if let Some(prev) = &current {
                    diff.coeffs_mut().iter_mut().zip(prev.coeffs()).for_each(|(d, p)| *d -= p);
                }
                let dn = weighted_l2_sq(&diff, self.mesh, weights).sqrt();
                if dn == 0.0 {
                    0.0
                } else {
                    dn / norm
                }
            };
            history.push(residual);
            current = Some(next);
            if residual <= self.config.tol {
                let report = SolveReport {
                    iterations: it,
                    residual_history: history,
                    converged: true,
                    delta_used: self.deltas.iter().copied().fold(0.0, f64::max),
                };
                return Ok((current.expect("set above"), report));
            }
        }
        Err(RteError::NonConvergence { iterations: self.config.max_iter, residual_history: history })
    }
}

/// Solves `problem` on `mesh` by source iteration.
pub fn solve(
    problem: &TransportProblem,
    mesh: &TriangleMesh,
    config: SolverConfig,
) -> Result<(DGSolution, SolveReport)> {
    PreparedSolver::new(problem, mesh, config)?.solve()
}

/// Shared face loop: calls `visit(l, k, j, |omega.n|, neighbour)` for every
/// inflow edge `j` of every element `k` and direction `l`.
fn for_each_inflow_face(
    mesh: &TriangleMesh,
    bases: &[ElementBasis],
    quad: &AngularQuadrature,
    mut visit: impl FnMut(usize, usize, usize, f64, Option<(usize, [usize; 2])>),
) {
    for l in 0..quad.len() {
        let omega = quad.omega2(l);
        for (k, b) in bases.iter().enumerate() {
            for j in 0..3 {
                let on = b.omega_dot_normal(omega, j);
                if on < -EPS_NORMAL {
                    visit(l, k, j, -on, mesh.neighbor_across(k, j));
                }
            }
        }
    }
}

fn dot3(c: [f64; 3], b: [f64; 3]) -> f64 {
    c[0] * b[0] + c[1] * b[1] + c[2] * b[2]
}

/// Global bilinear form
///
/// ```text
/// a_h(u, v) = sum_l w_l sum_K (omega.grad u + sigma_t u - sigma_s S_d u, v + delta omega.grad v)_K
///           + sum_l w_l sum_K <[u], v_+ |omega.n|>_{inflow edges of K}
/// ```
///
/// with `u_- = 0` on the inflow boundary.
pub fn apply_ah(
    u: &DGSolution,
    v: &DGSolution,
    problem: &TransportProblem,
    mesh: &TriangleMesh,
    delta: f64,
) -> Result<f64> {
    check_shapes(u, v, problem.quad.len(), mesh)?;
    let g = problem.scatter_matrix()?;
    let bases = ElementBasis::for_mesh(mesh)?;
    let su = apply_scatter(u, &g, false);
    let tri = TriangleRule::degree4();
    let edge = EdgeRule::degree5();
    let quad = &problem.quad;

    let mut per_dir = vec![0.0; quad.len()];
    for (l, acc) in per_dir.iter_mut().enumerate() {
        let omega = quad.omega2(l);
        for (k, b) in bases.iter().enumerate() {
            let d = b.directional(omega);
            let (uc, vc, sc) = (u.element(l, k), v.element(l, k), su.element(l, k));
            let du = dot3(d, uc);
            let dv = dot3(d, vc);
            for (bary, w) in tri.iter() {
                let x = b.point_at(bary);
                let r = du + (problem.sigma_t)(x) * dot3(uc, bary) - (problem.sigma_s)(x) * dot3(sc, bary);
                *acc += w * b.area * r * (dot3(vc, bary) + delta * dv);
            }
        }
    }
    for_each_inflow_face(mesh, &bases, quad, |l, k, j, flux, nb| {
        let (uc, vc) = (u.element(l, k), v.element(l, k));
        let up = nb.map(|(n, [pa, pb])| {
            let c = u.element(l, n);
            [c[pa], c[pb]]
        });
        let len = bases[k].edge_lengths[j];
        for (t, w) in edge.iter() {
            let bary = ElementBasis::edge_bary(j, t);
            let u_minus = up.map_or(0.0, |[a, b]| (1.0 - t) * a + t * b);
            per_dir[l] += w * len * flux * (dot3(uc, bary) - u_minus) * dot3(vc, bary);
        }
    });
    Ok(per_dir.iter().zip(&quad.weights).map(|(s, w)| w * s).sum())
}

/// Linear functional matching [`apply_ah`]: volume source plus the prescribed
/// inflow data entering through boundary jumps.
pub fn apply_rhs(v: &DGSolution, problem: &TransportProblem, mesh: &TriangleMesh, delta: f64) -> Result<f64> {
    check_shapes(v, v, problem.quad.len(), mesh)?;
    let bases = ElementBasis::for_mesh(mesh)?;
    let tri = TriangleRule::degree4();
    let edge = EdgeRule::degree5();
    let quad = &problem.quad;
    let mut per_dir = vec![0.0; quad.len()];
    for (l, acc) in per_dir.iter_mut().enumerate() {
        let omega = quad.omega2(l);
        for (k, b) in bases.iter().enumerate() {
            let vc = v.element(l, k);
            let dv = dot3(b.directional(omega), vc);
            for (bary, w) in tri.iter() {
                let x = b.point_at(bary);
                *acc += w * b.area * (problem.f)(x, l) * (dot3(vc, bary) + delta * dv);
            }
        }
    }
    for_each_inflow_face(mesh, &bases, quad, |l, k, j, flux, nb| {
        if nb.is_some() {
            return;
        }
        let vc = v.element(l, k);
        let len = bases[k].edge_lengths[j];
        for (t, w) in edge.iter() {
            let bary = ElementBasis::edge_bary(j, t);
            let x = bases[k].point_at(bary);
            per_dir[l] += w * len * flux * (problem.inflow)(x, l) * dot3(vc, bary);
        }
    });
    Ok(per_dir.iter().zip(&quad.weights).map(|(s, w)| w * s).sum())
}

/// The four contributions to `|||v|||^2`, each already weighted by `w_l`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormTerms {
    /// `sum ||v||^2` (without the `c0'` factor).
    pub l2: f64,
    /// Outflow-boundary term `<v_-, v_- omega.n>`.
    pub outflow: f64,
    /// `sum ||omega.grad v||^2` (without `delta`).
    pub streamline: f64,
    /// Jump term `<[v], [v] |omega.n|>` over inflow edges, `v_- = 0` on the boundary.
    pub jump: f64,
}

pub fn norm_terms(v: &DGSolution, quad: &AngularQuadrature, mesh: &TriangleMesh) -> Result<NormTerms> {
    if v.n_dirs() != quad.len() || v.n_elems() != mesh.n_triangles() {
        return Err(RteError::InvalidArgument("field does not match mesh/quadrature".into()));
    }
    let bases = ElementBasis::for_mesh(mesh)?;
    let edge = EdgeRule::degree5();
    let mut terms = NormTerms::default();
    for l in 0..quad.len() {
        let omega = quad.omega2(l);
        let w = quad.weights[l];
        for (k, b) in bases.iter().enumerate() {
            let c = v.element(l, k);
            terms.l2 += w * p1_mass_norm_sq(b.area, c);
            terms.streamline += w * b.area * dot3(b.directional(omega), c).powi(2);
            for j in 0..3 {
                let on = b.omega_dot_normal(omega, j);
                if on >= -EPS_NORMAL && mesh.neighbor_across(k, j).is_none() {
                    for (t, wq) in edge.iter() {
                        let val = dot3(c, ElementBasis::edge_bary(j, t));
                        terms.outflow += w * wq * b.edge_lengths[j] * on.max(0.0) * val * val;
                    }
                }
            }
        }
    }
    for_each_inflow_face(mesh, &bases, quad, |l, k, j, flux, nb| {
        let c = v.element(l, k);
        let up = nb.map(|(n, [pa, pb])| {
            let cn = v.element(l, n);
            [cn[pa], cn[pb]]
        });
        for (t, wq) in edge.iter() {
            let minus = up.map_or(0.0, |[a, b]| (1.0 - t) * a + t * b);
            let jump = dot3(c, ElementBasis::edge_bary(j, t)) - minus;
            terms.jump += quad.weights[l] * wq * bases[k].edge_lengths[j] * flux * jump * jump;
        }
    });
    Ok(terms)
}

/// `|||v|||` with coefficient `c0_prime` on the L2 term.
pub fn triple_norm_stability(
    v: &DGSolution,
    problem: &TransportProblem,
    mesh: &TriangleMesh,
    delta: f64,
    c0_prime: f64,
) -> Result<f64> {
    if !(c0_prime > 0.0) {
        return Err(RteError::AssumptionViolation(format!(
            "sigma_t - m sigma_s must stay positive, got c0' = {c0_prime}"
        )));
    }
    let t = norm_terms(v, &problem.quad, mesh)?;
    Ok((c0_prime * t.l2 + t.outflow + delta * t.streamline + t.jump).sqrt())
}

/// `sum_l w_l sum_K (weight a^l, b^l)_K` by quadrature.
pub fn weighted_inner(
    a: &DGSolution,
    b: &DGSolution,
    quad: &AngularQuadrature,
    mesh: &TriangleMesh,
    weight: &dyn Fn(Point) -> f64,
) -> Result<f64> {
    check_shapes(a, b, quad.len(), mesh)?;
    let bases = ElementBasis::for_mesh(mesh)?;
    let tri = TriangleRule::degree4();
    let mut total = 0.0;
    for l in 0..quad.len() {
        let mut s = 0.0;
        for (k, basis) in bases.iter().enumerate() {
            let (ac, bc) = (a.element(l, k), b.element(l, k));
            for (bary, w) in tri.iter() {
                s += w * basis.area * weight(basis.point_at(bary)) * dot3(ac, bary) * dot3(bc, bary);
            }
        }
        total += quad.weights[l] * s;
    }
    Ok(total)
}

fn check_shapes(u: &DGSolution, v: &DGSolution, nd: usize, mesh: &TriangleMesh) -> Result<()> {
    let ne = mesh.n_triangles();
    for s in [u, v] {
        if s.n_dirs() != nd || s.n_elems() != ne {
            return Err(RteError::InvalidArgument(format!(
                "field is {} x {}, expected {nd} directions x {ne} elements",
                s.n_dirs(),
                s.n_elems()
            )));
        }
    }
    Ok(())
}
