//! Special functions: modified Bessel K, truncated Taylor jets, and the
//! hypergeometric series for radial eigenfunctions near the origin.

use std::ops::{Add, Mul, Sub};

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `e^x K_nu(x)` for `x > 0` from `∫_0^∞ e^{-x(cosh t - 1)} cosh(nu t) dt`.
///
/// The integrand is entire and even in `t`, so the plain trapezoid rule
/// converges geometrically; the step shrinks like `1/√x` for large `x`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled requires x > 0");
    let nu = nu.abs();
    let h = if x > 9.0 { 0.3 / x.sqrt() } else { 0.1 };
    let integrand = |t: f64| {
        let s = (0.5 * t).sinh();
        (-2.0 * x * s * s).exp() * (nu * t).cosh()
    };
    let mut acc = 0.5 * integrand(0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        let v = integrand(t);
        acc += v;
        // past the peak and negligible
        if x * (t.cosh() - 1.0) > nu * t + 45.0 {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    acc * h
}

/// `K_nu(x)`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Truncated Taylor expansion `sum_k c_k e^k` about a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet(c)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Jet of `sinh` at `x`.
    pub fn sinh(x: f64, order: usize) -> Self {
        let (s, c) = (x.sinh(), x.cosh());
        Jet(taylor_from_cycle(&[s, c], order))
    }

    /// Jet of `cosh` at `x`.
    pub fn cosh(x: f64, order: usize) -> Self {
        let (s, c) = (x.sinh(), x.cosh());
        Jet(taylor_from_cycle(&[c, s], order))
    }

    /// Jet of `sin(w t)` at `t = x`.
    pub fn sin_scaled(w: f64, x: f64, order: usize) -> Self {
        let (s, c) = (w * x).sin_cos();
        let cycle = [s, c, -s, -c];
        let mut out = Vec::with_capacity(order + 1);
        let mut wp = 1.0;
        let mut fact = 1.0;
        for k in 0..=order {
            if k > 0 {
                wp *= w;
                fact *= k as f64;
            }
            out.push(cycle[k % 4] * wp / fact);
        }
        Jet(out)
    }

    /// Derivative; the result has one order fewer.
    pub fn derivative(&self) -> Self {
        if self.0.len() == 1 {
            return Jet(vec![0.0]);
        }
        Jet(self.0[1..]
            .iter()
            .enumerate()
            .map(|(k, c)| (k + 1) as f64 * c)
            .collect())
    }

    pub fn truncate(&self, order: usize) -> Self {
        Jet(self.0[..=order.min(self.order())].to_vec())
    }

    pub fn scale(&self, a: f64) -> Self {
        Jet(self.0.iter().map(|c| a * c).collect())
    }

    pub fn recip(&self) -> Self {
        let n = self.0.len();
        let a0 = self.0[0];
        let mut out = vec![0.0; n];
        out[0] = 1.0 / a0;
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.0[j] * out[k - j];
            }
            out[k] = -s / a0;
        }
        Jet(out)
    }

    pub fn div(&self, other: &Jet) -> Self {
        self * &other.recip()
    }
}

fn taylor_from_cycle(cycle: &[f64], order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(cycle[k % cycle.len()] / fact);
    }
    out
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.0.len().min(rhs.0.len());
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            for j in 0..=k {
                *o += self.0[j] * rhs.0[k - j];
            }
        }
        Jet(out)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.0.len().min(rhs.0.len());
        Jet((0..n).map(|k| self.0[k] + rhs.0[k]).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.0.len().min(rhs.0.len());
        Jet((0..n).map(|k| self.0[k] - rhs.0[k]).collect())
    }
}

/// `2F1((rho + i lam)/2, (rho - i lam)/2; n/2; -sinh^2 r)`, the radial
/// eigenfunction on `H^n` expanded at the origin. Accurate when
/// `(lam^2 + rho^2 + 4) sinh^2 r <= 1`.
pub fn spherical_series(n: usize, lam: f64, r: f64) -> f64 {
    let rho = (n as f64 - 1.0) / 2.0;
    let c = n as f64 / 2.0;
    let z = -r.sinh().powi(2);
    let mut term = 1.0;
    let mut acc = 1.0;
    for j in 0..200 {
        let jf = j as f64;
        let a = rho / 2.0 + jf;
        term *= (a * a + lam * lam / 4.0) / ((c + jf) * (1.0 + jf)) * z;
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
    }
    acc
}

/// Whether [`spherical_series`] is in its fast-converging range.
pub fn series_applies(n: usize, lam: f64, r: f64) -> bool {
    let rho = (n as f64 - 1.0) / 2.0;
    (lam * lam + rho * rho + 4.0) * r.sinh().powi(2) <= 1.0
}
