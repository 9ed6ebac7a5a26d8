//! Gauss–Legendre rules on intervals and collapsed (Duffy) product rules on
//! the reference triangle {(0,0), (1,0), (0,1)}.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], exact to degree 2n − 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Legendre polynomial P_n and its derivative at z.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, z);
    let mut d0 = 0.0;
    let mut d1 = 1.0;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        let d2 = d0 + (2.0 * kf - 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Gauss–Legendre rule mapped to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

/// Quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Collapsed Gauss product rule exact for polynomials of total degree `degree`.
    ///
    /// The square (s, t) is mapped by x = s, y = t(1 − s); the Jacobian 1 − s
    /// raises the degree in s by one, so n = ⌈(degree + 2)/2⌉ points per
    /// direction suffice.
    pub fn with_degree(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let (s, ws) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (si, wsi) in s.iter().zip(&ws) {
            for (ti, wti) in s.iter().zip(&ws) {
                points.push([*si, ti * (1.0 - si)]);
                weights.push(wsi * wti * (1.0 - si));
            }
        }
        Self { points, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss rule on [0, 1] with its degree of exactness.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn with_points(n: usize) -> Self {
        let (points, weights) = gauss_legendre_unit(n);
        Self { points, weights }
    }

    pub fn with_degree(degree: usize) -> Self {
        Self::with_points(degree / 2 + 1)
    }

    pub fn degree(&self) -> usize {
        2 * self.points.len() - 1
    }
}
