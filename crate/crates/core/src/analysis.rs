//! Manufactured solutions, discrete error norms and convergence studies.
//!
//! The four benchmark cases on the unit square use `sigma_t = 10`,
//! `sigma_s = 0.1`:
//!
//! | case | kernel                   | exact `u`                          | directions |
//! |------|--------------------------|------------------------------------|-----------:|
//! | 1    | Henyey-Greenstein 0.2    | `sin(pi x) sin(pi y)`              | 20 |
//! | 2    | Henyey-Greenstein 0.5    | `sin(pi x) sin(pi y)`              | 40 |
//! | 3    | Henyey-Greenstein 0.9    | `sin(pi x) sin(pi y)`              | 60 |
//! | 4    | `(1 + t/2) / (2 pi)`     | `exp(-a x - b y)(1 + c cos theta)` | 20 |
//!
//! with `a = b = sigma_a / 3`, `c = sigma_a / (sigma_a + 6 sigma_s)` and
//! `sigma_a = sigma_t - sigma_s`. The source `f` is built with the continuous
//! scattering operator, so measured errors include the angular error.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::angular::{AngularQuadrature, PhaseFunction};
use crate::dg::{DGSolution, ElementBasis};
use crate::mesh::{Point, TriangleMesh};
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::solver::{solve, Method, SolverConfig, TransportProblem};
use crate::{Result, RteError, EPS_NORMAL};

/// Errors at or below this value are treated as exact when computing rates.
pub const RATE_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExactSolution {
    /// `sin(pi x) sin(pi y)`, independent of direction.
    SinSin,
    /// `exp(-a x - b y) (1 + c cos theta)`.
    ExpCos { a: f64, b: f64, c: f64 },
    /// `a x + b y + c`, independent of direction.
    Linear { a: f64, b: f64, c: f64 },
}

impl ExactSolution {
    /// Constants of case 4 for the given cross sections.
    pub fn exp_cos_for(sigma_t: f64, sigma_s: f64) -> Self {
        let sigma_a = sigma_t - sigma_s;
        Self::ExpCos { a: sigma_a / 3.0, b: sigma_a / 3.0, c: sigma_a / (sigma_a + 6.0 * sigma_s) }
    }

    pub fn value(&self, x: Point, theta: f64) -> f64 {
        match *self {
            Self::SinSin => (PI * x[0]).sin() * (PI * x[1]).sin(),
            Self::ExpCos { a, b, c } => (-a * x[0] - b * x[1]).exp() * (1.0 + c * theta.cos()),
            Self::Linear { a, b, c } => a * x[0] + b * x[1] + c,
        }
    }

    pub fn gradient(&self, x: Point, theta: f64) -> [f64; 2] {
        match *self {
            Self::SinSin => [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
            Self::ExpCos { a, b, .. } => {
                let u = self.value(x, theta);
                [-a * u, -b * u]
            }
            Self::Linear { a, b, .. } => [a, b],
        }
    }

    /// Continuous `(S u)(x, theta)` for a normalised 2D kernel.
    pub fn scattered(&self, x: Point, theta: f64, phase: &PhaseFunction) -> Result<f64> {
        match *self {
            Self::SinSin | Self::Linear { .. } => Ok(self.value(x, theta)),
            Self::ExpCos { a, b, c } => {
                let kappa = phase.first_moment_2d().ok_or_else(|| {
                    RteError::InvalidArgument("direction-dependent solutions need a 2D kernel".into())
                })?;
                Ok((-a * x[0] - b * x[1]).exp() * (1.0 + c * kappa * theta.cos()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedCase {
    /// 1..=4 for the benchmark cases, 0 for custom cases.
    pub id: usize,
    pub phase: PhaseFunction,
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub n_dirs: usize,
    pub solution: ExactSolution,
}

pub fn make_case(id: usize) -> Result<ManufacturedCase> {
    let (sigma_t, sigma_s) = (10.0, 0.1);
    let (phase, n_dirs, solution) = match id {
        1 => (PhaseFunction::henyey_greenstein(0.2, 2)?, 20, ExactSolution::SinSin),
        2 => (PhaseFunction::henyey_greenstein(0.5, 2)?, 40, ExactSolution::SinSin),
        3 => (PhaseFunction::henyey_greenstein(0.9, 2)?, 60, ExactSolution::SinSin),
        4 => (PhaseFunction::LinearAnisotropic, 20, ExactSolution::exp_cos_for(sigma_t, sigma_s)),
        _ => return Err(RteError::InvalidArgument(format!("unknown case {id}, expected 1..=4"))),
    };
    Ok(ManufacturedCase { id, phase, sigma_t, sigma_s, n_dirs, solution })
}

impl ManufacturedCase {
    /// A case with arbitrary coefficients. Case-4 style solutions have their
    /// constants recomputed from the cross sections.
    pub fn custom(
        solution: ExactSolution,
        phase: PhaseFunction,
        sigma_t: f64,
        sigma_s: f64,
        n_dirs: usize,
    ) -> Result<Self> {
        if !(sigma_s >= 0.0) || !(sigma_t - sigma_s > 0.0) {
            return Err(RteError::AssumptionViolation(format!(
                "need sigma_s >= 0 and sigma_t - sigma_s > 0, got sigma_t = {sigma_t}, sigma_s = {sigma_s}"
            )));
        }
        if phase.dim() != 2 {
            return Err(RteError::InvalidArgument("manufactured cases are two-dimensional".into()));
        }
        if n_dirs < 2 {
            return Err(RteError::InvalidArgument(format!("need at least 2 directions, got {n_dirs}")));
        }
        let solution = match solution {
            ExactSolution::ExpCos { .. } => ExactSolution::exp_cos_for(sigma_t, sigma_s),
            other => other,
        };
        Ok(Self { id: 0, phase, sigma_t, sigma_s, n_dirs, solution })
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_dirs as f64
    }

    pub fn quadrature(&self) -> Result<AngularQuadrature> {
        AngularQuadrature::trapezoid_circle(self.n_dirs)
    }

    pub fn exact_u(&self, x: Point, theta: f64) -> f64 {
        self.solution.value(x, theta)
    }

    pub fn exact_grad(&self, x: Point, theta: f64) -> [f64; 2] {
        self.solution.gradient(x, theta)
    }

    /// `f = omega . grad u + sigma_t u - sigma_s S u`.
    pub fn exact_f(&self, x: Point, theta: f64) -> f64 {
        let g = self.exact_grad(x, theta);
        let su = self.solution.scattered(x, theta, &self.phase).expect("validated at construction");
        theta.cos() * g[0] + theta.sin() * g[1] + self.sigma_t * self.exact_u(x, theta) - self.sigma_s * su
    }

    /// Transport problem whose exact solution is this case; inflow data is the
    /// trace of the exact solution.
    pub fn problem(&self) -> Result<TransportProblem> {
        // fail early for kernels without a closed-form first moment
        self.solution.scattered([0.0, 0.0], 0.0, &self.phase)?;
        let quad = self.quadrature()?;
        let angles: Arc<Vec<f64>> = Arc::new((0..quad.len()).map(|l| quad.angle(l)).collect());
        let (st, ss) = (self.sigma_t, self.sigma_s);
        let case_f = self.clone();
        let case_u = self.clone();
        let angles_f = Arc::clone(&angles);
        Ok(TransportProblem {
            sigma_t: Arc::new(move |_| st),
            sigma_s: Arc::new(move |_| ss),
            phase: self.phase,
            f: Arc::new(move |x, l| case_f.exact_f(x, angles_f[l])),
            inflow: Arc::new(move |x, l| case_u.exact_u(x, angles[l])),
            quad,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub level: usize,
    pub h: f64,
    pub n_elems: usize,
    pub n_dirs: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub eh: f64,
    pub iterations: usize,
}

impl ErrorReport {
    pub fn norms(&self) -> [f64; 5] {
        [self.e1, self.e2, self.e3, self.e4, self.eh]
    }
}

/// The four reporting norms of `u - u_h`:
///
/// - `e1`: weighted L2 error;
/// - `e2`: outflow-boundary error `<e, e omega.n>`;
/// - `e3`: `h_K`-weighted streamline-derivative error;
/// - `e4`: upwind jumps of the error on inflow edges (`e_- = 0` on the boundary);
///
/// and `eh = sqrt(e1^2 + e2^2 + e3^2 + e4^2)`.
pub fn error_norms(
    sol: &DGSolution,
    case: &ManufacturedCase,
    mesh: &TriangleMesh,
    quad: &AngularQuadrature,
) -> Result<ErrorReport> {
    if sol.n_dirs() != quad.len() || sol.n_elems() != mesh.n_triangles() {
        return Err(RteError::InvalidArgument("solution does not match mesh/quadrature".into()));
    }
    let bases = ElementBasis::for_mesh(mesh)?;
    let tri = TriangleRule::degree6();
    let edge = EdgeRule::degree7();

    let per_dir: Vec<[f64; 4]> = (0..quad.len())
        .into_par_iter()
        .map(|l| {
            let theta = quad.angle(l);
            let omega = quad.omega2(l);
            let mut acc = [0.0; 4];
            for (k, b) in bases.iter().enumerate() {
                let c = sol.element(l, k);
                let d = b.directional(omega);
                let duh = d[0] * c[0] + d[1] * c[1] + d[2] * c[2];
                let hk = b.diameter();
                for (bary, w) in tri.iter() {
                    let x = b.point_at(bary);
                    let err = case.exact_u(x, theta) - (c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2]);
                    let g = case.exact_grad(x, theta);
                    let derr = omega[0] * g[0] + omega[1] * g[1] - duh;
                    acc[0] += w * b.area * err * err;
                    acc[2] += w * b.area * hk * derr * derr;
                }
                for j in 0..3 {
                    let on = b.omega_dot_normal(omega, j);
                    let nb = mesh.neighbor_across(k, j);
                    let len = b.edge_lengths[j];
                    if on >= -EPS_NORMAL {
                        if nb.is_none() && on > 0.0 {
                            for (t, w) in edge.iter() {
                                let bary = ElementBasis::edge_bary(j, t);
                                let x = b.point_at(bary);
                                let err = case.exact_u(x, theta) - (c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2]);
                                acc[1] += w * len * on * err * err;
                            }
                        }
                        continue;
                    }
                    let up = nb.map(|(n, [pa, pb])| {
                        let cn = sol.element(l, n);
                        [cn[pa], cn[pb]]
                    });
                    for (t, w) in edge.iter() {
                        let bary = ElementBasis::edge_bary(j, t);
                        let x = b.point_at(bary);
                        let u = case.exact_u(x, theta);
                        let plus = u - (c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2]);
                        let minus = up.map_or(0.0, |[ua, ub]| u - ((1.0 - t) * ua + t * ub));
                        acc[3] += w * len * (-on) * (plus - minus).powi(2);
                    }
                }
            }
            acc
        })
        .collect();

    let mut sums = [0.0; 4];
    for (acc, w) in per_dir.iter().zip(&quad.weights) {
        for i in 0..4 {
            sums[i] += w * acc[i];
        }
    }
    let [e1, e2, e3, e4] = sums.map(f64::sqrt);
    Ok(ErrorReport {
        level: mesh.level,
        h: mesh.h,
        n_elems: mesh.n_triangles(),
        n_dirs: quad.len(),
        e1,
        e2,
        e3,
        e4,
        eh: (sums[0] + sums[1] + sums[2] + sums[3]).sqrt(),
        iterations: 0,
    })
}

/// Observed order between two successive errors on meshes with halved `h`;
/// NaN when either error is at round-off level.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    if coarse > RATE_FLOOR && fine > RATE_FLOOR {
        (coarse / fine).log2()
    } else {
        f64::NAN
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
    /// `rates[p]` compares rows `p` and `p + 1`: `[e1, e2, e3, e4, eh]`.
    pub rates: Vec<[f64; 5]>,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ErrorReport>) -> Self {
        let rates = rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].norms(), w[1].norms());
                std::array::from_fn(|i| observed_rate(a[i], b[i]))
            })
            .collect();
        Self { rows, rates }
    }

    pub fn finest_rates(&self) -> Option<[f64; 5]> {
        self.rates.last().copied()
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    /// Grid parameter of the structured initial mesh.
    pub n0: usize,
    pub solver: SolverConfig,
    /// Replaces the structured initial mesh when set.
    pub base_mesh: Option<TriangleMesh>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { n0: 10, solver: SolverConfig::default(), base_mesh: None }
    }
}

impl StudyConfig {
    pub fn initial_mesh(&self) -> Result<TriangleMesh> {
        match &self.base_mesh {
            Some(m) => Ok(m.clone()),
            None => TriangleMesh::structured_unit_square(self.n0),
        }
    }

    /// The sequence of regularly refined meshes `T_0 .. T_{levels-1}`.
    pub fn meshes(&self, levels: usize) -> Result<Vec<TriangleMesh>> {
        let mut meshes = vec![self.initial_mesh()?];
        for _ in 1..levels {
            let next = meshes.last().expect("non-empty").refine_regular()?;
            meshes.push(next);
        }
        Ok(meshes)
    }
}

/// Solves `case` on one mesh and measures the errors.
pub fn solve_and_measure(case: &ManufacturedCase, mesh: &TriangleMesh, solver: SolverConfig) -> Result<ErrorReport> {
    let problem = case.problem()?;
    let (sol, report) = solve(&problem, mesh, solver)?;
    let mut errors = error_norms(&sol, case, mesh, &problem.quad)?;
    errors.iterations = report.iterations;
    Ok(errors)
}

/// Solves on `levels` nested meshes and collects errors and observed rates.
pub fn convergence_study(case: &ManufacturedCase, levels: usize, config: &StudyConfig) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(RteError::InvalidArgument(format!("a convergence study needs at least 2 levels, got {levels}")));
    }
    let rows = config
        .meshes(levels)?
        .iter()
        .enumerate()
        .map(|(level, mesh)| {
            solve_and_measure(case, mesh, config.solver)
                .map(|mut r| {
                    r.level = level;
                    r
                })
                .map_err(|e| RteError::AtLevel { level, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_rows(rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodComparison {
    pub dodsd: ConvergenceTable,
    pub dodg: ConvergenceTable,
}

impl MethodComparison {
    /// `eh(DODSD) / eh(DODG)` per level.
    pub fn eh_ratios(&self) -> Vec<f64> {
        self.dodsd.rows.iter().zip(&self.dodg.rows).map(|(a, b)| a.eh / b.eh).collect()
    }
}

/// Runs the same study with DODSD (the configured `c_bar`) and with DODG.
pub fn compare_methods(case: &ManufacturedCase, levels: usize, config: &StudyConfig) -> Result<MethodComparison> {
    let dodsd_cfg = StudyConfig { solver: SolverConfig { method: Method::Dodsd, ..config.solver }, ..config.clone() };
    let dodg_cfg = StudyConfig { solver: SolverConfig { method: Method::Dodg, ..config.solver }, ..config.clone() };
    Ok(MethodComparison {
        dodsd: convergence_study(case, levels, &dodsd_cfg)?,
        dodg: convergence_study(case, levels, &dodg_cfg)?,
    })
}
