//! Numerical integration rules on `[-1, 1]`, on edges and on triangles.
//!
//! Triangle rules are stored in barycentric coordinates with weights that sum
//! to one, so `integral over K ~= area(K) * sum_q w_q f(x_q)`. Edge rules use
//! the parameter `t in [0, 1]` and weights summing to one.

use std::f64::consts::PI;

use crate::{Result, RteError};

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
///
/// Nodes are found by Newton iteration on the Legendre recurrence, started
/// from the Chebyshev-like guess `cos(pi (i - 1/4) / (n + 1/2))`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(RteError::InvalidArgument("Gauss-Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Debug)]
pub struct EdgeRule {
    /// Positions along the edge in `[0, 1]`.
    pub points: Vec<f64>,
    /// Sum to one.
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn gauss(n: usize) -> Result<Self> {
        let (x, w) = gauss_legendre(n)?;
        Ok(Self { points: x.iter().map(|&x| 0.5 * (x + 1.0)).collect(), weights: w.iter().map(|&w| 0.5 * w).collect() })
    }

    /// 3-point Gauss, exact through degree 5.
    pub fn degree5() -> Self {
        Self::gauss(3).expect("3 > 0")
    }

    /// 4-point Gauss, exact through degree 7.
    pub fn degree7() -> Self {
        Self::gauss(4).expect("4 > 0")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    /// Sum to one.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// 6-point degree-4 rule (Dunavant).
    #[allow(clippy::excessive_precision)]
    pub fn degree4() -> Self {
        let mut rule = Self { points: Vec::new(), weights: Vec::new(), degree: 4 };
        rule.push_orbit21(0.445_948_490_915_964_886_3, 0.223_381_589_678_011_465_7);
        rule.push_orbit21(0.091_576_213_509_770_743_4, 0.109_951_743_655_321_867_6);
        rule
    }

    /// 12-point degree-6 rule (Dunavant).
    #[allow(clippy::excessive_precision)]
    pub fn degree6() -> Self {
        let mut rule = Self { points: Vec::new(), weights: Vec::new(), degree: 6 };
        rule.push_orbit21(0.249_286_745_170_910_421_1, 0.116_786_275_726_379_366_0);
        rule.push_orbit21(0.063_089_014_491_502_228_3, 0.050_844_906_370_206_817_0);
        rule.push_orbit111(0.053_145_049_844_816_947_4, 0.310_352_451_033_784_405_4, 0.082_851_075_618_373_575_2);
        rule
    }

    /// Collapsed tensor-product Gauss rule (Duffy transform) exact for
    /// polynomials of total degree `degree`. All weights are positive.
    pub fn collapsed_gauss(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre(n).expect("n > 0");
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&xi, &wi) in x.iter().zip(&w) {
            // s in [0,1] along the collapsed direction, weighted by (1 - s)
            let s = 0.5 * (xi + 1.0);
            for (&xj, &wj) in x.iter().zip(&w) {
                let r = 0.5 * (xj + 1.0);
                let l1 = s;
                let l2 = (1.0 - s) * r;
                points.push([1.0 - l1 - l2, l1, l2]);
                // reference area 1/2 is normalised away: factor 2 * (1/2)(1/2)(1 - s)
                weights.push(0.5 * wi * wj * (1.0 - s));
            }
        }
        Self { points, weights, degree: 2 * n - 2 }
    }

    fn push_orbit21(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn push_orbit111(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}
