//! Truncated Taylor arithmetic in (t, x, y).
//!
//! A jet stores normalised Taylor coefficients u^{(a,b,c)}/(a! b! c!) for the
//! index set {a = 0, b + c ≤ 3} ∪ {(1,0,0), (1,1,0), (1,0,1)}: all spatial
//! partials to order three plus u_t, u_tx, u_ty. The set is closed under
//! taking smaller multi-indices, so products truncate consistently.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const JET_LEN: usize = 13;

/// Multi-indices (t, x, y) of the stored coefficients.
pub const INDEX: [(usize, usize, usize); JET_LEN] = [
    (0, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
    (1, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
];

const fn position(a: usize, b: usize, c: usize) -> Option<usize> {
    let mut k = 0;
    while k < JET_LEN {
        let m = INDEX[k];
        if m.0 == a && m.1 == b && m.2 == c {
            return Some(k);
        }
        k += 1;
    }
    None
}

const PRODUCT_LEN: usize = 45;

/// (k, i, j) with INDEX[i] + INDEX[j] = INDEX[k], built at compile time.
const PRODUCT: [(usize, usize, usize); PRODUCT_LEN] = {
    let mut out = [(0, 0, 0); PRODUCT_LEN];
    let mut n = 0;
    let mut k = 0;
    while k < JET_LEN {
        let (a, b, c) = INDEX[k];
        let mut i = 0;
        while i < JET_LEN {
            let (ai, bi, ci) = INDEX[i];
            if ai <= a && bi <= b && ci <= c {
                match position(a - ai, b - bi, c - ci) {
                    Some(j) => out[n] = (k, i, j),
                    None => panic!("index set is not downward closed"),
                }
                n += 1;
            }
            i += 1;
        }
        k += 1;
    }
    assert!(n == PRODUCT_LEN);
    out
};

/// Variables (bit 0: t, bit 1: x, bit 2: y) an index differentiates in.
const SUPPORT: [u8; JET_LEN] = {
    let mut out = [0u8; JET_LEN];
    let mut k = 0;
    while k < JET_LEN {
        let (a, b, c) = INDEX[k];
        out[k] = (a > 0) as u8 | ((b > 0) as u8) << 1 | ((c > 0) as u8) << 2;
        k += 1;
    }
    out
};

/// PRODUCT filtered to factors depending only on the variables in masks m and n.
struct MaskedProducts {
    len: [[usize; 8]; 8],
    entries: [[[(u8, u8, u8); PRODUCT_LEN]; 8]; 8],
}

const MASKED: MaskedProducts = {
    let mut out = MaskedProducts { len: [[0; 8]; 8], entries: [[[(0, 0, 0); PRODUCT_LEN]; 8]; 8] };
    let mut m = 0;
    while m < 8 {
        let mut n = 0;
        while n < 8 {
            let mut e = 0;
            let mut len = 0;
            while e < PRODUCT_LEN {
                let (k, i, j) = PRODUCT[e];
                if SUPPORT[i] & !(m as u8) == 0 && SUPPORT[j] & !(n as u8) == 0 {
                    out.entries[m][n][len] = (k as u8, i as u8, j as u8);
                    len += 1;
                }
                e += 1;
            }
            out.len[m][n] = len;
            n += 1;
        }
        m += 1;
    }
    out
};

/// a! b! c! for each stored index.
const SCALE: [f64; JET_LEN] = [1.0, 1.0, 1.0, 2.0, 1.0, 2.0, 6.0, 2.0, 2.0, 6.0, 1.0, 1.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; JET_LEN],
    /// Variables the jet may depend on; coefficients outside vanish.
    mask: u8,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = v;
        Self { c, mask: 0 }
    }

    pub fn var_t(t: f64) -> Self {
        let mut j = Self::constant(t);
        j.c[10] = 1.0;
        j.mask = 1;
        j
    }

    pub fn var_x(x: f64) -> Self {
        let mut j = Self::constant(x);
        j.c[1] = 1.0;
        j.mask = 2;
        j
    }

    pub fn var_y(y: f64) -> Self {
        let mut j = Self::constant(y);
        j.c[2] = 1.0;
        j.mask = 4;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64; JET_LEN] {
        &self.c
    }

    /// All stored partials, ordered as [`INDEX`].
    pub fn derivatives(&self) -> [f64; JET_LEN] {
        let mut d = self.c;
        for (v, s) in d.iter_mut().zip(SCALE) {
            *v *= s;
        }
        d
    }

    /// Partial derivative ∂ₜᵃ∂ₓᵇ∂ᵧᶜ, if stored.
    pub fn derivative(&self, a: usize, b: usize, c: usize) -> Option<f64> {
        let k = position(a, b, c)?;
        Some(self.c[k] * SCALE[k])
    }

    /// f(self) from f and its first three derivatives at the value.
    pub fn compose(&self, d: [f64; 4]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let mut out = Self::constant(d[0]);
        for k in 1..JET_LEN {
            out.c[k] = d[1] * delta.c[k] + 0.5 * d[2] * d2.c[k] + d[3] / 6.0 * d3.c[k];
        }
        out.mask = self.mask;
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose([e; 4])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn recip(&self) -> Self {
        let v = self.c[0];
        let r = 1.0 / v;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sqr(&self) -> Self {
        *self * *self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += b;
        }
        self.mask |= o.mask;
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a -= b;
        }
        self.mask |= o.mask;
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.c.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (m, n) = (self.mask as usize, o.mask as usize);
        let mut c = [0.0; JET_LEN];
        for &(k, i, j) in &MASKED.entries[m][n][..MASKED.len[m][n]] {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { c, mask: self.mask | o.mask }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.c[0] += o;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, o: f64) -> Jet {
        self.c[0] -= o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, o: f64) -> Jet {
        self.c.iter_mut().for_each(|v| *v *= o);
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        -o + self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn product_of_variables() {
        let j = Jet::var_x(0.3) * Jet::var_y(0.7);
        assert_eq!(j.derivative(0, 1, 1), Some(1.0));
        assert_eq!(j.derivative(0, 0, 0), Some(0.3 * 0.7));
        assert_eq!(j.derivative(0, 3, 0), Some(0.0));
        assert_eq!(j.derivative(2, 0, 0), None);
    }

    #[test]
    fn cubic_derivatives() {
        // u = x³ y t → u_xxx = 6 y t, u_tx = 3x² y, u_xxy = 6 x t.
        let (t, x, y) = (0.5, 0.2, 0.9);
        let u = Jet::var_x(x) * Jet::var_x(x) * Jet::var_x(x) * Jet::var_y(y) * Jet::var_t(t);
        assert!((u.derivative(0, 3, 0).unwrap() - 6.0 * y * t).abs() < 1e-14);
        assert!((u.derivative(1, 1, 0).unwrap() - 3.0 * x * x * y).abs() < 1e-14);
        assert!((u.derivative(0, 2, 1).unwrap() - 6.0 * x * t).abs() < 1e-14);
    }

    fn full_product(a: &Jet, b: &Jet) -> [f64; JET_LEN] {
        let mut c = [0.0; JET_LEN];
        for &(k, i, j) in PRODUCT.iter() {
            c[k] += a.c[i] * b.c[j];
        }
        c
    }

    proptest! {
        #[test]
        fn masked_product_equals_full_product(
            ca in proptest::array::uniform13(-1.0f64..1.0),
            cb in proptest::array::uniform13(-1.0f64..1.0),
            m in 0u8..8,
            n in 0u8..8,
        ) {
            let restrict = |c: [f64; JET_LEN], mask: u8| {
                let mut c = c;
                for (v, s) in c.iter_mut().zip(SUPPORT) {
                    if s & !mask != 0 {
                        *v = 0.0;
                    }
                }
                Jet { c, mask }
            };
            let (a, b) = (restrict(ca, m), restrict(cb, n));
            prop_assert_eq!((a * b).c, full_product(&a, &b));
        }

        #[test]
        fn exp_sin_and_recip_match_closed_forms(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            // e^{xy}: ∂ₓ³ = y³ e^{xy}; ∂ₓ²∂ᵧ = (2y + x y²) e^{xy}
            let e = (Jet::var_x(x) * Jet::var_y(y)).exp();
            let v = (x * y).exp();
            prop_assert!((e.derivative(0, 3, 0).unwrap() - y.powi(3) * v).abs() < 1e-12);
            prop_assert!((e.derivative(0, 2, 1).unwrap() - (2.0 * y + x * y * y) * v).abs() < 1e-12);
            // sin(x + 2y): ∂ₓ∂ᵧ² = −4 cos(x + 2y)
            let s = (Jet::var_x(x) + 2.0 * Jet::var_y(y)).sin();
            prop_assert!((s.derivative(0, 1, 2).unwrap() + 4.0 * (x + 2.0 * y).cos()).abs() < 1e-12);
            // 1/(3 + x): third derivative −6/(3 + x)⁴
            let r = (Jet::var_x(x) + 3.0).recip();
            prop_assert!((r.derivative(0, 3, 0).unwrap() + 6.0 / (3.0 + x).powi(4)).abs() < 1e-12);
            let c = Jet::var_y(y).cos();
            prop_assert!((c.derivative(0, 0, 3).unwrap() - y.sin()).abs() < 1e-12);
        }
    }
}
