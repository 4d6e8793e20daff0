//! G*, its normalization G, the limit function 𝒢, and conjugation factors.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::{cbrt, exp, powf, sqrt};
use crate::params::{ModelParams, Quantity, Txi};
use crate::C64;

/// `log G*(w|n,m,a)` with principal logarithms. Only `exp` of it is meaningful
/// (integer exponents), so the branch choice is immaterial.
pub fn log_gstar(w: C64, n: f64, m: f64, a: f64, q: f64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let mut s = C64::new(0.0, 0.0);
    if n != 0.0 {
        s += w.ln() * n;
    }
    if a + m != 0.0 {
        s += (one - w).ln() * (a + m);
    }
    if m != 0.0 {
        s -= (one - w / (1.0 - q)).ln() * m;
    }
    s
}

fn check_poles(w: C64, q: f64) -> Result<()> {
    let tol = 1e-300;
    for (p, name) in [(0.0, "0"), (1.0 - q, "1-q"), (1.0, "1")] {
        if (w - C64::new(p, 0.0)).norm() <= tol {
            bail!(Pole, "G* evaluated at its pole w = {}", name);
        }
    }
    Ok(())
}

/// `G*(w|n,m,a) = w^n (1-w)^{a+m} / (1 - w/(1-q))^m`.
pub fn gstar(w: C64, n: i64, m: i64, a: i64, q: f64) -> Result<C64> {
    check_poles(w, q)?;
    Ok(log_gstar(w, n as f64, m as f64, a as f64, q).exp())
}

/// `G(w|n,m,a) = G*(w|n,m,a) / G*(w_c|n,m,a)` through the log difference.
pub fn g_norm(w: C64, n: i64, m: i64, a: i64, q: f64) -> Result<C64> {
    check_poles(w, q)?;
    Ok(g_norm_unchecked(w, n, m, a, q))
}

#[inline]
pub(crate) fn g_norm_unchecked(w: C64, n: i64, m: i64, a: i64, q: f64) -> C64 {
    let wc = C64::new(1.0 - sqrt(q), 0.0);
    let (n, m, a) = (n as f64, m as f64, a as f64);
    (log_gstar(w, n, m, a, q) - log_gstar(wc, n, m, a, q)).exp()
}

/// Exponent of `𝒢(w|t,x,ξ)`.
#[inline]
pub fn log_script_g(w: C64, g: Txi) -> C64 {
    let w2 = w * w;
    w2 * w * (g.t / 3.0) + w2 * (powf(g.t, 2.0 / 3.0) * g.x) - w * (cbrt(g.t) * g.xi)
}

/// `𝒢(w|t,x,ξ) = exp(t w³/3 + t^{2/3} x w² − t^{1/3} ξ w)`.
pub fn script_g(w: C64, t: f64, x: f64, xi: f64) -> C64 {
    log_script_g(w, Txi::new(t, x, xi)).exp()
}

/// Discrete conjugation data for an instance: `d(i) = μ (n(i) − i)/ν_T`.
#[derive(Debug, Clone)]
pub struct Conjugation {
    log_d: Vec<f64>,
    log_c: Vec<f64>,
}

impl Conjugation {
    pub fn new(params: &ModelParams, mu: f64, nu_t: f64) -> Self {
        let nn = params.dim();
        let wc = C64::new(1.0 - sqrt(params.q), 0.0);
        let mut log_d = Vec::with_capacity(nn);
        let mut log_c = Vec::with_capacity(nn);
        for k in 1..=nn {
            let d = if mu == 0.0 {
                0.0
            } else {
                mu * (params.blockval(Quantity::N, k) - k as i64) as f64 / nu_t
            };
            let g = log_gstar(
                wc,
                k as f64,
                params.blockval(Quantity::M, k) as f64,
                params.blockval(Quantity::A, k) as f64,
                params.q,
            );
            log_d.push(d);
            log_c.push(g.re + d);
        }
        Conjugation { log_d, log_c }
    }

    /// `log c(k)` (the G* factor at w_c is positive).
    pub fn log_c(&self, k: usize) -> f64 {
        self.log_c[k - 1]
    }

    /// `c(i,j) = d(i)/d(j)`.
    pub fn c(&self, i: usize, j: usize) -> f64 {
        exp(self.log_d[i - 1] - self.log_d[j - 1])
    }

    pub fn log_d(&self, i: usize) -> f64 {
        self.log_d[i - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gstar_basics() {
        let q = 0.3;
        assert!((gstar(c(0.2, 0.7), 0, 0, 0, q).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((gstar(c(0.5, 0.0), 1, 0, 0, q).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        assert!(gstar(c(1.0 - q, 0.0), 1, 1, 0, q).is_err());
        let w = c(0.4, -0.3);
        let direct = w.powi(3) * (c(1.0, 0.0) - w).powi(5) / (c(1.0, 0.0) - w / (1.0 - q)).powi(2);
        assert!((gstar(w, 3, 2, 3, q).unwrap() - direct).norm() < 1e-14);
    }

    #[test]
    fn g_norm_at_wc() {
        let q: f64 = 0.45;
        let wc = c(1.0 - q.sqrt(), 0.0);
        assert!((g_norm(wc, 7, 3, -2, q).unwrap() - c(1.0, 0.0)).norm() < 1e-13);
        let w = c(0.1, 0.2);
        let r = gstar(w, 2, 1, 3, q).unwrap() / gstar(wc, 2, 1, 3, q).unwrap();
        assert!((g_norm(w, 2, 1, 3, q).unwrap() - r).norm() < 1e-13 * r.norm());
    }

    #[test]
    fn script_g_basics() {
        assert!((script_g(c(0.0, 0.0), 2.0, 0.3, -1.0) - c(1.0, 0.0)).norm() < 1e-15);
        let w = c(0.3, 0.8);
        assert!((script_g(w, 2.0, 0.0, 0.0) - (w * w * w * (2.0 / 3.0)).exp()).norm() < 1e-14);
    }

    #[test]
    fn conjugation_ratios() {
        let p = ModelParams::new(0.4, vec![2, 4, 5], vec![1, 3, 4], vec![3, 5, 6]).unwrap();
        let cj = Conjugation::new(&p, 1.3, 2.0);
        for i in 1..=4 {
            assert!((cj.c(i, i) - 1.0).abs() < 1e-15);
            for j in 1..=4 {
                for k in 1..=4 {
                    assert!((cj.c(i, j) * cj.c(j, k) - cj.c(i, k)).abs() < 1e-12);
                }
            }
        }
        let c0 = Conjugation::new(&p, 0.0, 2.0);
        assert_eq!(c0.c(1, 4), 1.0);
    }
}
