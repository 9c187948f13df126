//! Truncated second-order Taylor jets in up to [`MAX_DIM`] variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest chart dimension supported by jets.
pub const MAX_DIM: usize = 6;
const TRI: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Packed index of the symmetric pair (i, j).
#[inline]
pub fn tri_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

/// Value, gradient and Hessian of a scalar function at a point.
///
/// The Hessian is kept as a packed upper triangle, so it is symmetric by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    n: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [f64; TRI],
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Self {
        assert!(n <= MAX_DIM, "jet dimension {n} exceeds {MAX_DIM}");
        Jet2 {
            n,
            value,
            grad: [0.0; MAX_DIM],
            hess: [0.0; TRI],
        }
    }

    /// The coordinate function `x_index` evaluated at `value`.
    pub fn variable(n: usize, index: usize, value: f64) -> Self {
        let mut j = Jet2::constant(n, value);
        j.grad[index] = 1.0;
        j
    }

    pub fn from_parts(value: f64, grad: &[f64], hess: impl Fn(usize, usize) -> f64) -> Self {
        let n = grad.len();
        let mut j = Jet2::constant(n, value);
        j.grad[..n].copy_from_slice(grad);
        for b in 0..n {
            for a in 0..=b {
                j.hess[tri_index(a, b)] = hess(a, b);
            }
        }
        j
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn grad(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.n]
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[tri_index(i, j)]
    }

    #[inline]
    fn tri_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Composition `f(self)` given f, f', f'' at the current value.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let mut out = Jet2::constant(self.n, f0);
        for i in 0..self.n {
            out.grad[i] = f1 * self.grad[i];
        }
        for b in 0..self.n {
            for a in 0..=b {
                let k = tri_index(a, b);
                out.hess[k] = f1 * self.hess[k] + f2 * self.grad[a] * self.grad[b];
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        let mut out = *self;
        out.value *= c;
        for g in &mut out.grad[..self.n] {
            *g *= c;
        }
        let t = self.tri_len();
        for h in &mut out.hess[..t] {
            *h *= c;
        }
        out
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Jet2 {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Jet2 {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Jet2 {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn recip(&self) -> Jet2 {
        let inv = 1.0 / self.value;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    pub fn powi(&self, k: i32) -> Jet2 {
        match k {
            0 => Jet2::constant(self.n, 1.0),
            1 => *self,
            2 => self * self,
            _ => {
                let v = self.value;
                let kf = k as f64;
                self.chain(
                    v.powi(k),
                    kf * v.powi(k - 1),
                    kf * (kf - 1.0) * v.powi(k - 2),
                )
            }
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, rhs.n);
        let mut out = *self;
        out.value += rhs.value;
        for i in 0..self.n {
            out.grad[i] += rhs.grad[i];
        }
        for k in 0..self.tri_len() {
            out.hess[k] += rhs.hess[k];
        }
        out
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, rhs.n);
        let mut out = *self;
        out.value -= rhs.value;
        for i in 0..self.n {
            out.grad[i] -= rhs.grad[i];
        }
        for k in 0..self.tri_len() {
            out.hess[k] -= rhs.hess[k];
        }
        out
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, rhs.n);
        let (u, v) = (self.value, rhs.value);
        let mut out = Jet2::constant(self.n, u * v);
        for i in 0..self.n {
            out.grad[i] = u * rhs.grad[i] + v * self.grad[i];
        }
        for b in 0..self.n {
            for a in 0..=b {
                let k = tri_index(a, b);
                out.hess[k] = u * rhs.hess[k]
                    + v * self.hess[k]
                    + self.grad[a] * rhs.grad[b]
                    + self.grad[b] * rhs.grad[a];
            }
        }
        out
    }
}

impl Div for &Jet2 {
    type Output = Jet2;
    fn div(self, rhs: &Jet2) -> Jet2 {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Jet2 {
            type Output = Jet2;
            #[inline]
            fn $m(self, rhs: Jet2) -> Jet2 {
                (&self).$m(&rhs)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul, Div div);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_product() {
        let x = Jet2::variable(2, 0, 2.0);
        let y = Jet2::variable(2, 1, 3.0);
        let p = &x * &y;
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.gradient(), &[3.0, 2.0]);
        assert_eq!(p.hess(0, 1), 1.0);
        assert_eq!(p.hess(1, 0), 1.0);
        assert_eq!(p.hess(0, 0), 0.0);
    }

    #[test]
    fn tri_index_is_dense() {
        let mut seen = vec![false; TRI];
        for j in 0..MAX_DIM {
            for i in 0..=j {
                let k = tri_index(i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, tri_index(j, i));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn quotient_rule() {
        // f = x/y at (1,2): f_x = 1/2, f_y = -1/4, f_xy = -1/4, f_yy = 2x/y^3 = 1/4
        let x = Jet2::variable(2, 0, 1.0);
        let y = Jet2::variable(2, 1, 2.0);
        let q = x / y;
        assert!((q.value() - 0.5).abs() < 1e-15);
        assert!((q.grad(0) - 0.5).abs() < 1e-15);
        assert!((q.grad(1) + 0.25).abs() < 1e-15);
        assert!((q.hess(0, 1) + 0.25).abs() < 1e-15);
        assert!((q.hess(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(q.hess(0, 0), 0.0);
    }

    #[test]
    fn integer_powers() {
        let x = Jet2::variable(1, 0, 1.5);
        for k in -3..=5 {
            let p = x.powi(k);
            let kf = k as f64;
            assert!((p.value() - 1.5f64.powi(k)).abs() < 1e-12);
            assert!((p.grad(0) - kf * 1.5f64.powi(k - 1)).abs() < 1e-12);
            assert!((p.hess(0, 0) - kf * (kf - 1.0) * 1.5f64.powi(k - 2)).abs() < 1e-12);
        }
    }
}
