//! Angular discretization: discrete-ordinate direction sets, phase functions,
//! the scattering matrix `G[l][i] = w_i g(omega_l . omega_i)` and its row-sum
//! bound `m`.

use std::f64::consts::PI;

use crate::quadrature::gauss_legendre;
use crate::{Result, RteError};

/// Directions `omega_l` with positive weights `w_l`.
///
/// Directions are stored as 3-vectors; in 2D the third component is zero and
/// `angles` holds the polar angle of each direction.
#[derive(Clone, Debug)]
pub struct AngularQuadrature {
    pub dim: usize,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub angles: Option<Vec<f64>>,
}

impl AngularQuadrature {
    /// Periodic trapezoid rule on the unit circle: `theta_i = i * 2pi / n`,
    /// every weight `2pi / n`.
    pub fn trapezoid_circle(n_dirs: usize) -> Result<Self> {
        if n_dirs < 2 {
            return Err(RteError::InvalidArgument(format!("need at least 2 directions, got {n_dirs}")));
        }
        let step = 2.0 * PI / n_dirs as f64;
        let angles: Vec<f64> = (0..n_dirs).map(|i| i as f64 * step).collect();
        let quad = Self {
            dim: 2,
            directions: angles.iter().map(|&t| [t.cos(), t.sin(), 0.0]).collect(),
            weights: vec![step; n_dirs],
            angles: Some(angles),
        };
        quad.validate()?;
        Ok(quad)
    }

    /// Product rule on the unit sphere: `m` Gauss-Legendre nodes in
    /// `cos(theta)` times `2m` equally spaced azimuths, `2m^2` directions.
    pub fn gauss_legendre_sphere(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(RteError::InvalidArgument("sphere rule needs m >= 1".into()));
        }
        let (mu, wbar) = gauss_legendre(m)?;
        let dpsi = PI / m as f64;
        let mut directions = Vec::with_capacity(2 * m * m);
        let mut weights = Vec::with_capacity(2 * m * m);
        for j in 0..2 * m {
            let psi = j as f64 * dpsi;
            for (&c, &w) in mu.iter().zip(&wbar) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                directions.push([s * psi.cos(), s * psi.sin(), c]);
                weights.push(dpsi * w);
            }
        }
        let quad = Self { dim: 3, directions, weights, angles: None };
        quad.validate()?;
        Ok(quad)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// In-plane direction `l` (2D quadratures).
    pub fn omega2(&self, l: usize) -> [f64; 2] {
        let d = self.directions[l];
        [d[0], d[1]]
    }

    /// Polar angle of direction `l`; computed from the direction if not stored.
    pub fn angle(&self, l: usize) -> f64 {
        match &self.angles {
            Some(a) => a[l],
            None => self.directions[l][1].atan2(self.directions[l][0]),
        }
    }

    /// Angular step of a uniform 2D rule.
    pub fn h_theta(&self) -> Option<f64> {
        (self.dim == 2).then(|| 2.0 * PI / self.len() as f64)
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.directions.iter().zip(&self.weights).map(|(d, w)| w * f(d)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(RteError::InvalidArgument(format!("unsupported dimension {}", self.dim)));
        }
        if self.directions.len() != self.weights.len() {
            return Err(RteError::InvalidArgument("direction/weight count mismatch".into()));
        }
        if let Some(w) = self.weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(RteError::InvalidArgument(format!("non-positive quadrature weight {w}")));
        }
        for d in &self.directions {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-12 || (self.dim == 2 && d[2] != 0.0) {
                return Err(RteError::InvalidArgument(format!("direction {d:?} is not a unit vector")));
            }
        }
        let (total, tol) = if self.dim == 2 { (2.0 * PI, 1e-12) } else { (4.0 * PI, 1e-10) };
        let sum: f64 = self.weights.iter().sum();
        if (sum - total).abs() > tol {
            return Err(RteError::InvalidArgument(format!("weights sum to {sum}, expected {total}")));
        }
        Ok(())
    }
}

/// Scattering kernel `g(t)`, `t = omega . omega_hat`, normalised so that
/// its integral over the circle (2D) or sphere (3D) is one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseFunction {
    HenyeyGreenstein {
        eta: f64,
        dim: usize,
    },
    /// `(1 + t/2) / (2 pi)` on the circle.
    LinearAnisotropic,
}

impl PhaseFunction {
    pub fn henyey_greenstein(eta: f64, dim: usize) -> Result<Self> {
        if !(eta.abs() < 1.0) {
            return Err(RteError::InvalidArgument(format!("anisotropy factor must satisfy |eta| < 1, got {eta}")));
        }
        if dim != 2 && dim != 3 {
            return Err(RteError::InvalidArgument(format!("unsupported dimension {dim}")));
        }
        Ok(Self::HenyeyGreenstein { eta, dim })
    }

    pub fn isotropic(dim: usize) -> Result<Self> {
        Self::henyey_greenstein(0.0, dim)
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::HenyeyGreenstein { dim, .. } => dim,
            Self::LinearAnisotropic => 2,
        }
    }

    /// Evaluates `g(t)`; `t` is clamped to `[-1, 1]` first.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        match *self {
            Self::HenyeyGreenstein { eta, dim } => {
                let base = 1.0 + eta * eta - 2.0 * eta * t;
                if dim == 2 {
                    (1.0 - eta * eta) / (2.0 * PI * base)
                } else {
                    (1.0 - eta * eta) / (4.0 * PI * base * base.sqrt())
                }
            }
            Self::LinearAnisotropic => (1.0 + 0.5 * t) / (2.0 * PI),
        }
    }

    /// First angular moment `kappa` of a 2D kernel:
    /// `integral g(cos(theta - phi)) cos(phi) dphi = kappa cos(theta)`.
    pub fn first_moment_2d(&self) -> Option<f64> {
        match *self {
            Self::HenyeyGreenstein { eta, dim: 2 } => Some(eta),
            Self::LinearAnisotropic => Some(0.25),
            _ => None,
        }
    }
}

/// Dense `(L+1) x (L+1)` coupling matrix `G[l][i] = w_i g(omega_l . omega_i)`.
#[derive(Clone, Debug)]
pub struct ScatterMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ScatterMatrix {
    pub fn new(phase: &PhaseFunction, quad: &AngularQuadrature) -> Result<Self> {
        if phase.dim() != quad.dim {
            return Err(RteError::InvalidArgument(format!(
                "phase function is {}D but the quadrature is {}D",
                phase.dim(),
                quad.dim
            )));
        }
        let n = quad.len();
        let mut entries = Vec::with_capacity(n * n);
        for a in &quad.directions {
            for (b, w) in quad.directions.iter().zip(&quad.weights) {
                let t = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                entries.push(w * phase.eval(t));
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a matrix from explicit entries (row-major).
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(RteError::InvalidArgument(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        if entries.iter().any(|&e| !(e >= 0.0)) {
            return Err(RteError::InvalidArgument("scatter matrix entries must be nonnegative".into()));
        }
        Ok(Self { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.entries[l * self.n..(l + 1) * self.n]
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.entries[l * self.n + i]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|l| self.row(l).iter().sum()).collect()
    }

    /// `m = max_l sum_i G[l][i]`.
    pub fn m_bound(&self) -> f64 {
        self.row_sums().into_iter().fold(0.0, f64::max)
    }

    /// Largest `|row sum - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        self.row_sums().into_iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0.0)
    }
}
