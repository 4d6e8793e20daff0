//! Instance parameters, scaling constants, Δ-notation and the θ/ε bookkeeping.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::math::{cbrt, powf, round, sqrt};
use crate::C64;

/// Discrete instance: `P(G(m_k, n_k) < a_k, k = 1..p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub p: usize,
    pub m: Vec<i64>,
    pub n: Vec<i64>,
    pub a: Vec<i64>,
}

impl ModelParams {
    pub fn new(q: f64, m: Vec<i64>, n: Vec<i64>, a: Vec<i64>) -> Result<Self> {
        let s = ModelParams { q, p: m.len(), m, n, a };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if self.p == 0 {
            bail!(Domain, "p must be at least 1");
        }
        if self.m.len() != self.p || self.n.len() != self.p || self.a.len() != self.p {
            bail!(Domain, "m, n, a must all have length p = {}", self.p);
        }
        for (name, v) in [("m", &self.m), ("n", &self.n)] {
            if v[0] < 1 {
                bail!(Monotone, "{}_1 = {} must be positive", name, v[0]);
            }
            for k in 1..v.len() {
                if v[k] <= v[k - 1] {
                    bail!(Monotone, "{} not strictly increasing at k={}", name, k + 1);
                }
            }
        }
        Ok(())
    }

    /// Total dimension `N = n_p`.
    pub fn dim(&self) -> usize {
        self.n[self.p - 1] as usize
    }

    /// Any `a_k <= 0` makes the event empty.
    pub fn trivially_zero(&self) -> bool {
        self.a.iter().any(|&a| a <= 0)
    }

    /// `y_k` with the convention `y_0 = 0`; `k` is 1-based.
    pub fn get(&self, kind: Quantity, k: usize) -> i64 {
        if k == 0 {
            return 0;
        }
        match kind {
            Quantity::M => self.m[k - 1],
            Quantity::N => self.n[k - 1],
            Quantity::A => self.a[k - 1],
            _ => panic!("discrete instances carry only m, n, a"),
        }
    }

    pub fn delta(&self, kind: Quantity, k1: usize, k2: usize) -> Result<i64> {
        check_pair(k1, k2, self.p)?;
        if !matches!(kind, Quantity::M | Quantity::N | Quantity::A) {
            bail!(Domain, "discrete instances carry only m, n, a");
        }
        Ok(self.get(kind, k2) - self.get(kind, k1))
    }

    /// Block `r` (1-based) containing row index `i` (1-based).
    pub fn block_of(&self, i: usize) -> usize {
        let i = i as i64;
        self.n.iter().position(|&nk| i <= nk).map(|r| r + 1).unwrap_or(self.p)
    }

    pub fn rstar(&self, r: usize) -> usize {
        r.min(self.p - 1)
    }

    /// Block functions `n(i), m(i), a(i)` = value at index `min(r, p-1)`.
    pub fn blockval(&self, kind: Quantity, i: usize) -> i64 {
        let r = self.block_of(i);
        self.get(kind, self.rstar(r))
    }

    /// Half-open block range `(n_{r-1}, n_r]` as 1-based inclusive bounds.
    pub fn block_range(&self, r: usize) -> (usize, usize) {
        (
            self.get(Quantity::N, r - 1) as usize + 1,
            self.get(Quantity::N, r) as usize,
        )
    }
}

/// Continuum instance under the KPZ scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct KpzParams {
    pub q: f64,
    pub T: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

impl KpzParams {
    pub fn p(&self) -> usize {
        self.t.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if !(self.T > 0.0) {
            bail!(Domain, "T must be positive");
        }
        check_times(&self.t, &self.x, &self.xi)?;
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                bail!(Domain, "mu must be nonnegative");
            }
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| default_mu(&self.t, &self.x))
    }

    pub fn get(&self, kind: Quantity, k: usize) -> f64 {
        get_txi(&self.t, &self.x, &self.xi, kind, k)
    }

    pub fn delta(&self, kind: Quantity, k1: usize, k2: usize) -> Result<f64> {
        check_pair(k1, k2, self.p())?;
        match kind {
            Quantity::T | Quantity::X | Quantity::Xi => Ok(delta_txi(&self.t, &self.x, &self.xi, kind, k1, k2)),
            _ => {
                let c = compute_constants(self.q, self.T)?;
                let f = |k: usize| self.raw_discrete(&c, kind, k);
                Ok(f(k2) - f(k1))
            }
        }
    }

    /// Unrounded `n_k, m_k, a_k` from the scaling relations (0 for k = 0).
    pub fn raw_discrete(&self, c: &ScalingConstants, kind: Quantity, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let tt = self.t[k - 1] * self.T;
        match kind {
            Quantity::N => tt - c.c1 * self.x[k - 1] * powf(tt, 2.0 / 3.0),
            Quantity::M => tt + c.c1 * self.x[k - 1] * powf(tt, 2.0 / 3.0),
            Quantity::A => c.c2 * tt + c.c3 * self.xi[k - 1] * cbrt(tt),
            _ => self.get(kind, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    T,
    X,
    Xi,
    N,
    M,
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub w_c: f64,
    pub nu_t: f64,
}

pub fn compute_constants(q: f64, big_t: f64) -> Result<ScalingConstants> {
    check_q(q)?;
    if !(big_t > 0.0) {
        bail!(Domain, "T must be positive, got {}", big_t);
    }
    let s = sqrt(q);
    let c0 = powf(q, -1.0 / 3.0) * cbrt(1.0 + s);
    let c1 = powf(q, -1.0 / 6.0) * powf(1.0 + s, 2.0 / 3.0);
    let c2 = 2.0 * s / (1.0 - s);
    let c3 = powf(q, 1.0 / 6.0) * cbrt(1.0 + s) / (1.0 - s);
    let c4 = cbrt(q) * (1.0 - s) / cbrt(1.0 + s);
    Ok(ScalingConstants {
        c0,
        c1,
        c2,
        c3,
        c4,
        w_c: 1.0 - s,
        nu_t: c0 * cbrt(big_t),
    })
}

/// Round the scaling relations to the nearest integers and check monotonicity.
pub fn discretize(kpz: &KpzParams) -> Result<ModelParams> {
    kpz.validate()?;
    let c = compute_constants(kpz.q, kpz.T)?;
    let p = kpz.p();
    let pick = |kind| {
        (1..=p)
            .map(|k| round(kpz.raw_discrete(&c, kind, k)) as i64)
            .collect::<Vec<_>>()
    };
    let (m, n, a) = (pick(Quantity::M), pick(Quantity::N), pick(Quantity::A));
    ModelParams::new(kpz.q, m, n, a).map_err(|e| match e {
        Error::Monotone(s) => Error::Monotone(format!("{} after rounding (T too small for this t-spacing)", s)),
        e => e,
    })
}

/// The sufficient conjugation bound plus one.
pub fn default_mu(t: &[f64], x: &[f64]) -> f64 {
    let w: Vec<f64> = t.iter().zip(x).map(|(&t, &x)| x * powf(t, 2.0 / 3.0)).collect();
    let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut dt = f64::INFINITY;
    for k in 0..t.len() {
        let prev = if k == 0 { 0.0 } else { t[k - 1] };
        dt = dt.min(cbrt(t[k] - prev));
    }
    (hi - lo) / dt + 1.0
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        bail!(Domain, "q must lie in (0,1), got {}", q);
    }
    Ok(())
}

pub(crate) fn check_times(t: &[f64], x: &[f64], xi: &[f64]) -> Result<()> {
    if t.is_empty() {
        bail!(Domain, "need at least one time");
    }
    if x.len() != t.len() || xi.len() != t.len() {
        bail!(Domain, "t, x, xi must have equal lengths");
    }
    if !(t[0] > 0.0) {
        bail!(Monotone, "t_1 must be positive");
    }
    for k in 1..t.len() {
        if !(t[k] > t[k - 1]) {
            bail!(Monotone, "t not strictly increasing at k={}", k + 1);
        }
    }
    Ok(())
}

fn check_pair(k1: usize, k2: usize, p: usize) -> Result<()> {
    if k1 >= k2 || k2 > p {
        bail!(Index, "need 0 <= k1 < k2 <= p, got ({}, {}) with p = {}", k1, k2, p);
    }
    Ok(())
}

pub(crate) fn get_txi(t: &[f64], x: &[f64], xi: &[f64], kind: Quantity, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    match kind {
        Quantity::T => t[k - 1],
        Quantity::X => x[k - 1],
        Quantity::Xi => xi[k - 1],
        _ => panic!("continuum quantity expected"),
    }
}

/// Δ_{k1,k2} of t, x or ξ, with the time reweighting of x and ξ.
pub(crate) fn delta_txi(t: &[f64], x: &[f64], xi: &[f64], kind: Quantity, k1: usize, k2: usize) -> f64 {
    let g = |kk, k| get_txi(t, x, xi, kk, k);
    let dt = g(Quantity::T, k2) - g(Quantity::T, k1);
    match kind {
        Quantity::T => dt,
        Quantity::X => {
            g(Quantity::X, k2) * powf(g(Quantity::T, k2) / dt, 2.0 / 3.0)
                - g(Quantity::X, k1) * powf(g(Quantity::T, k1) / dt, 2.0 / 3.0)
        }
        Quantity::Xi => {
            g(Quantity::Xi, k2) * cbrt(g(Quantity::T, k2) / dt) - g(Quantity::Xi, k1) * cbrt(g(Quantity::T, k1) / dt)
        }
        _ => panic!("continuum quantity expected"),
    }
}

/// `χ_1(x) = 1{x<0}`, `χ_2(x) = 1{x>=0}`.
pub fn chi(eps: u8, x: f64) -> bool {
    if eps % 2 == 1 {
        x < 0.0
    } else {
        x >= 0.0
    }
}

/// `ε^k = (2,…,2,1,…,1)` with `k-1` leading twos, length `p-1`.
pub fn eps_k(k: usize, p: usize) -> Vec<u8> {
    (1..p).map(|i| if i < k { 2 } else { 1 }).collect()
}

/// All `ε ∈ {1,2}^{p-1}` allowed for the pair `(k1,k2)`: forced to 2 below
/// `max(k1,1)`, forced to 1 above `min(k2,p-1)`, free in between.
pub fn sumcond_eps(k1: usize, k2: usize, p: usize) -> Vec<Vec<u8>> {
    let lo = k1.max(1);
    let hi = k2.min(p - 1);
    let free: Vec<usize> = (lo..=hi).filter(|&i| i >= 1 && i < p).collect();
    let mut out = Vec::new();
    for mask in 0..(1u32 << free.len()) {
        let mut e: Vec<u8> = (1..p).map(|i| if i < lo { 2 } else { 1 }).collect();
        for (b, &i) in free.iter().enumerate() {
            e[i - 1] = if mask >> b & 1 == 1 { 2 } else { 1 };
        }
        out.push(e);
    }
    out
}

/// Accessors for the θ-weights of the block formulas.
#[derive(Debug, Clone)]
pub struct ThetaTools {
    theta: Vec<C64>,
}

impl ThetaTools {
    pub fn new(theta: &[C64]) -> Result<Self> {
        if theta.iter().any(|t| t.norm() == 0.0) {
            bail!(Domain, "theta components must be nonzero");
        }
        Ok(ThetaTools { theta: theta.to_vec() })
    }

    pub fn p(&self) -> usize {
        self.theta.len() + 1
    }

    /// θ(r|ε), `r` in 1..=p.
    pub fn theta_r(&self, r: usize, eps: &[u8]) -> C64 {
        let mut v = C64::new(1.0, 0.0);
        for k in 1..self.p() {
            let e = if k < r {
                2 - eps[k - 1] as i32
            } else {
                1 - eps[k - 1] as i32
            };
            v *= self.theta[k - 1].powi(e);
        }
        v
    }

    /// θ^ε(i), computed from the per-index definition.
    pub fn theta_i(&self, i: usize, eps: &[u8], n: &[i64]) -> C64 {
        let mut v = C64::new(1.0, 0.0);
        for k in 1..self.p() {
            let ind = (i as i64 <= n[k - 1]) as i32;
            v *= self.theta[k - 1].powi(2 - eps[k - 1] as i32 - ind);
        }
        v
    }

    /// Θ(r|k); zero outside `1 <= k < min(r, p-1)`.
    pub fn big_theta(&self, r: usize, k: usize) -> C64 {
        let p = self.p();
        if k < 1 || k >= r.min(p - 1) {
            return C64::new(0.0, 0.0);
        }
        self.theta_r(r, &eps_k(k, p)) - self.theta_r(r, &eps_k(k + 1, p))
    }
}

/// `(-1)^{ε[k1,k2]}`.
pub fn sign_eps(k1: usize, k2: usize, eps: &[u8]) -> f64 {
    let p = eps.len() + 1;
    let lo = k1.max(1);
    let hi = k2.min(p - 1);
    let s: u32 = (lo..=hi).filter(|&k| k >= 1 && k < p).map(|k| eps[k - 1] as u32).sum();
    if s.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `(-1)^k` as a float.
pub fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Convenience: a continuum triple `(t, x, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Txi {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
}

impl Txi {
    pub fn new(t: f64, x: f64, xi: f64) -> Self {
        Txi { t, x, xi }
    }

    /// `(t, -x, ξ)`.
    pub fn flip_x(self) -> Self {
        Txi { x: -self.x, ..self }
    }
}

/// Δ_{k1,k2}(t,x,ξ) for plain vectors; `k1 < k2 <= p` is the caller's job.
pub fn delta_triple(t: &[f64], x: &[f64], xi: &[f64], k1: usize, k2: usize) -> Txi {
    Txi {
        t: delta_txi(t, x, xi, Quantity::T, k1, k2),
        x: delta_txi(t, x, xi, Quantity::X, k1, k2),
        xi: delta_txi(t, x, xi, Quantity::Xi, k1, k2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constants_at_quarter() {
        let c = compute_constants(0.25, 1.0).unwrap();
        assert!((c.c2 - 2.0).abs() < 1e-15);
        assert!((c.c0 - 1.817_120_592_832_139_7).abs() < 1e-12);
        assert!((c.c0 * c.c4 - c.w_c).abs() < 1e-15);
    }

    #[test]
    fn c0c4_identity_grid() {
        for i in 1..10 {
            let q = i as f64 / 10.0;
            let c = compute_constants(q, 3.0).unwrap();
            assert!((c.c0 * c.c4 - (1.0 - q.sqrt())).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_q() {
        assert!(matches!(compute_constants(1.0, 1.0), Err(Error::Domain(_))));
        assert!(compute_constants(0.0, 1.0).is_err());
    }

    #[test]
    fn discretize_examples() {
        let k = KpzParams {
            q: 0.5,
            T: 100.0,
            t: vec![1.0],
            x: vec![0.0],
            xi: vec![0.0],
            mu: None,
        };
        let m = discretize(&k).unwrap();
        let c = compute_constants(0.5, 100.0).unwrap();
        assert_eq!((m.n[0], m.m[0], m.a[0]), (100, 100, (c.c2 * 100.0).round() as i64));
        let k2 = KpzParams {
            q: 0.3,
            T: 1000.0,
            t: vec![1.0, 2.0],
            x: vec![0.0; 2],
            xi: vec![0.0; 2],
            mu: None,
        };
        assert_eq!(discretize(&k2).unwrap().n, vec![1000, 2000]);
    }

    #[test]
    fn discretize_monotone_error() {
        let k = KpzParams {
            q: 0.5,
            T: 1.0,
            t: vec![1.0, 1.1],
            x: vec![0.0; 2],
            xi: vec![0.0; 2],
            mu: None,
        };
        assert!(matches!(discretize(&k), Err(Error::Monotone(_))));
    }

    #[test]
    fn delta_examples() {
        let k = KpzParams {
            q: 0.5,
            T: 10.0,
            t: vec![1.0, 2.0],
            x: vec![0.0, 1.0],
            xi: vec![0.0; 2],
            mu: None,
        };
        assert!((k.delta(Quantity::X, 1, 2).unwrap() - 2f64.powf(2.0 / 3.0)).abs() < 1e-14);
        assert_eq!(k.delta(Quantity::T, 0, 2).unwrap(), 2.0);
        assert!(matches!(k.delta(Quantity::T, 2, 2), Err(Error::Index(_))));
        // Δn = Δt T − c1 Δx (Δt T)^(2/3)
        let c = compute_constants(0.5, 10.0).unwrap();
        let dn = k.delta(Quantity::N, 1, 2).unwrap();
        let dx = k.delta(Quantity::X, 1, 2).unwrap();
        assert!((dn - (10.0 - c.c1 * dx * 10f64.powf(2.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn theta_block_identity() {
        let th = [C64::new(0.3, 1.7), C64::new(-2.0, 0.5), C64::new(1.1, -0.4)];
        let tt = ThetaTools::new(&th).unwrap();
        let n = [2i64, 5, 7, 9];
        for k in 1..=4 {
            let e = eps_k(k, 4);
            for i in (n.get(k.wrapping_sub(2)).map_or(1, |&v| v as usize + 1))..=n[k - 1] as usize {
                let v = tt.theta_i(i, &e, &n);
                assert!((v - C64::new(1.0, 0.0)).norm() < 1e-14, "k={} i={}", k, i);
            }
        }
        assert_eq!(tt.big_theta(2, 2), C64::new(0.0, 0.0));
        assert!(ThetaTools::new(&[C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn chi_partition() {
        assert!(chi(1, -1.0));
        assert!(chi(2, 0.0));
        for &x in &[-3.0, -0.1, 0.0, 0.2, 9.0] {
            assert_eq!(chi(1, x) as u8 + chi(2, x) as u8, 1);
        }
    }

    #[test]
    fn sumcond_counts() {
        // p=2: (0,1),(0,2),(1,2) each have ε_1 free
        for (k1, k2) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(sumcond_eps(k1, k2, 2).len(), 2);
        }
        // p=3, (2,3): ε_1 forced 2, ε_2 free
        let e = sumcond_eps(2, 3, 3);
        assert_eq!(e, vec![vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn default_mu_zero_x() {
        assert!((default_mu(&[1.0, 2.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
