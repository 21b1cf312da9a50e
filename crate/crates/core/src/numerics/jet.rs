//! Truncated Taylor series ("jets") for exact higher-order derivatives.
//!
//! A [`Jet`] of order `K` stores `f(s0), f'(s0), f''(s0)/2!, ..., f^(K)(s0)/K!`.
//! Arithmetic is truncated polynomial algebra, so composing jet-valued
//! primitives yields every derivative up to `K` without step-size tuning.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest order a jet can carry.
pub const MAX_ORDER: usize = 8;

const N: usize = MAX_ORDER + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; N],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        debug_assert!(order <= MAX_ORDER);
        let mut c = [0.0; N];
        c[0] = value;
        Jet { c, order }
    }

    /// The independent variable `s` expanded at `s0`.
    pub fn variable(s0: f64, order: usize) -> Self {
        let mut j = Jet::constant(s0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    /// `s = s0 (1 + t)` expanded in `t` at zero. Coefficient `k` of a function
    /// of this jet equals `s0^k f^(k)(s0) / k!`, which keeps all coefficients
    /// on a comparable scale when `s0` is large.
    pub fn scaled_variable(s0: f64, order: usize) -> Self {
        let mut j = Jet::constant(s0, order);
        if order >= 1 {
            j.c[1] = s0;
        }
        j
    }

    pub fn from_coefficients(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > N {
            return Err(Error::UnsupportedOrder {
                order: coeffs.len().saturating_sub(1),
                max: MAX_ORDER,
            });
        }
        let mut c = [0.0; N];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Jet { c, order: coeffs.len() - 1 })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    /// `k`-th derivative, i.e. `k! * coeff(k)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    /// Max-norm over the coefficients.
    pub fn norm(&self) -> f64 {
        self.coefficients().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients().iter().all(|x| x.is_finite())
    }

    fn with_order(order: usize) -> Self {
        Jet { c: [0.0; N], order }
    }

    fn joint(&self, other: &Jet) -> usize {
        self.order.min(other.order)
    }

    pub fn scale(mut self, k: f64) -> Self {
        for x in &mut self.c[..=self.order] {
            *x *= k;
        }
        self
    }

    pub fn add_scalar(mut self, k: f64) -> Self {
        self.c[0] += k;
        self
    }

    pub fn exp(&self) -> Jet {
        let mut e = Jet::with_order(self.order);
        e.c[0] = self.c[0].exp();
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e.c[k - j];
            }
            e.c[k] = acc / k as f64;
        }
        e
    }

    /// `exp(a) - 1` with full precision in the constant term.
    pub fn exp_m1(&self) -> Jet {
        let mut e = self.exp();
        e.c[0] = self.c[0].exp_m1();
        e
    }

    pub fn ln(&self) -> Jet {
        self.log_about(self.c[0], self.c[0].ln())
    }

    /// `ln(1 + a)` with full precision in the constant term.
    pub fn ln_1p(&self) -> Jet {
        self.log_about(1.0 + self.c[0], self.c[0].ln_1p())
    }

    fn log_about(&self, base: f64, value: f64) -> Jet {
        let mut l = Jet::with_order(self.order);
        l.c[0] = value;
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l.c[j] * self.c[k - j];
            }
            l.c[k] = (self.c[k] - acc / k as f64) / base;
        }
        l
    }

    /// `a^p` for a real exponent; requires a positive constant term.
    pub fn powf(&self, p: f64) -> Jet {
        let a0 = self.c[0];
        let mut b = Jet::with_order(self.order);
        b.c[0] = a0.powf(p);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * self.c[j] * b.c[k - j];
            }
            b.c[k] = acc / (k as f64 * a0);
        }
        b
    }

    pub fn recip(&self) -> Jet {
        Jet::constant(1.0, self.order) / *self
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, x| acc * x as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = Jet::with_order(self.joint(&rhs));
        for k in 0..=out.order {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::with_order(self.joint(&rhs));
        for k in 0..=out.order {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = acc;
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let mut q = Jet::with_order(self.joint(&rhs));
        for k in 0..=q.order {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q.c[k - j];
            }
            q.c[k] = acc / rhs.c[0];
        }
        q
    }
}

/// `k`-th derivative of `f` at `s0` by propagating a jet seeded with `(s0, 1, 0, ...)`.
pub fn kth_derivative<F>(f: F, s0: f64, k: usize) -> Result<f64>
where
    F: Fn(Jet) -> Result<Jet>,
{
    if k > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: k, max: MAX_ORDER });
    }
    let out = f(Jet::variable(s0, k))?;
    if out.order() < k {
        return Err(Error::Unsupported(format!(
            "expression truncated the jet to order {}",
            out.order()
        )));
    }
    let d = out.derivative(k);
    if !d.is_finite() {
        return Err(Error::Unsupported(format!("non-finite derivative at s0 = {s0}")));
    }
    Ok(d)
}

/// Central finite-difference estimate of the `k`-th derivative refined by
/// Richardson extrapolation over successively halved steps.
pub fn finite_difference<F>(f: F, x: f64, k: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if k == 0 {
        return f(x);
    }
    let stencil = |h: f64| -> f64 {
        // k-th central difference: sum_j (-1)^j C(k, j) f(x + (k/2 - j) h) / h^k
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * f(x + (k as f64 / 2.0 - j as f64) * h);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        acc / h.powi(k as i32)
    };
    let scale = x.abs().max(1.0);
    let mut h = scale * 0.2_f64.powf(1.0 / (k as f64).sqrt());
    const ROWS: usize = 8;
    let mut table = [[0.0; ROWS]; ROWS];
    let mut best = f64::NAN;
    let mut best_err = f64::INFINITY;
    for i in 0..ROWS {
        table[i][0] = stencil(h);
        let mut fac = 4.0;
        for j in 1..=i {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (fac - 1.0);
            fac *= 4.0;
        }
        if i > 0 {
            let err = (table[i][i] - table[i - 1][i - 1]).abs();
            if err < best_err {
                best_err = err;
                best = table[i][i];
            }
        }
        h /= 2.0;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_negative_variable() {
        let d = kth_derivative(|s| Ok((-s).exp()), 0.0, 3).unwrap();
        assert_relative_eq!(d, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_square() {
        let d = kth_derivative(|s| Ok(s.add_scalar(1.0).powf(-2.0)), 1.0, 1).unwrap();
        assert_relative_eq!(d, -0.25, epsilon = 1e-12);
    }

    #[test]
    fn order_limit() {
        let err = kth_derivative(|s| Ok(s), 1.0, MAX_ORDER + 1).unwrap_err();
        assert!(matches!(err, Error::UnsupportedOrder { .. }));
    }

    #[test]
    fn ln_and_exp_are_inverse() {
        let x = Jet::variable(0.7, 6);
        let y = x.ln().exp();
        for k in 0..=6 {
            assert_relative_eq!(y.coeff(k), x.coeff(k), epsilon = 1e-13);
        }
        let z = x.ln_1p().exp_m1();
        for k in 0..=6 {
            assert_relative_eq!(z.coeff(k), x.coeff(k), epsilon = 1e-13);
        }
    }

    #[test]
    fn division_matches_reciprocal_product() {
        let a = Jet::from_coefficients(&[1.5, -0.3, 0.2, 0.1]).unwrap();
        let b = Jet::from_coefficients(&[2.0, 0.5, -0.25, 0.75]).unwrap();
        let q = a / b;
        let back = q * b;
        for k in 0..=3 {
            assert_relative_eq!(back.coeff(k), a.coeff(k), epsilon = 1e-14);
        }
    }

    #[test]
    fn scaled_variable_coefficients() {
        // f(s) = 1/s at s0 = 4: s0^k f^(k)(s0)/k! = (-1)^k / s0
        let j = Jet::scaled_variable(4.0, 4).recip();
        for k in 0..=4 {
            let expect = if k % 2 == 0 { 0.25 } else { -0.25 };
            assert_relative_eq!(j.coeff(k), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn finite_difference_agrees_with_jet() {
        let f = |s: Jet| s.scale(0.5).powf(1.5) * (-s).exp().add_scalar(2.0);
        for k in 1..=4 {
            let exact = kth_derivative(|s| Ok(f(s)), 1.3, k).unwrap();
            let fd = finite_difference(|x| f(Jet::constant(x, 0)).value(), 1.3, k);
            assert_relative_eq!(fd, exact, max_relative = 1e-6);
        }
    }
}
