//! Finite-N determinantal formula: the matrices `A(θ)`, `B(θ)` built from
//! chained contour integrals, the θ-integral, and the one-point determinant.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{chain_eval, link, Stage};
use crate::error::{bail, Result};
use crate::exec::Exec;
use crate::integrands::{log_gstar, Conjugation};
use crate::linalg::{lu_det, BlockMatrixC, CMat};
use crate::math::{cbrt, exp, ln, powi, sqrt};
use crate::params::{parity, sign_eps, sumcond_eps, ModelParams, Quantity, ThetaTools};
use crate::quad::Contour;
use crate::theta::{theta_laurent, theta_trapezoid, ThetaMode};
use crate::C64;

/// Distances of the ζ-circles from `w_c`, in units of the contour scale.
pub const D1: f64 = 0.8;
pub const D2: f64 = 1.6;
/// `ThetaMode::Auto` extracts Laurent coefficients when that takes at most this many determinants.
pub const LAURENT_AUTO_MAX: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExactSettings {
    /// Nodes per contour in the first pass.
    pub nodes: usize,
    pub theta_mode: ThetaMode,
    pub r_theta: f64,
    /// Starting θ-nodes per variable (trapezoid mode); defaults to a power of two above `N`.
    pub theta_nodes: Option<usize>,
    /// Absolute tolerance for successive node doublings.
    pub tol: f64,
    pub max_doublings: usize,
    /// Conjugation constant (the determinant does not depend on it).
    pub mu: f64,
    /// Largest accepted imaginary part of the probability.
    pub imag_tol: f64,
}

impl Default for ExactSettings {
    fn default() -> Self {
        ExactSettings {
            nodes: 64,
            theta_mode: ThetaMode::Auto,
            r_theta: 2.0,
            theta_nodes: None,
            tol: 1e-9,
            max_doublings: 4,
            mu: 0.0,
            imag_tol: 1e-6,
        }
    }
}

/// Offsets `D_k ∈ [0.5, 2.5]` for the variables `z_{k1+1}, …, z_{k2}`:
/// `D_k < D_{k+1}` iff `ε_k = 1`. Binary offsets, stretched to the full range;
/// a lone variable sits at 1.5.
pub fn d_offsets(eps: &[u8], k1: usize, k2: usize) -> Vec<f64> {
    d_offsets_in(eps, k1, k2, 0.5, 2.5)
}

/// `d_offsets` stretched to `[lo, hi]` instead; a lone variable gets the midpoint.
pub fn d_offsets_in(eps: &[u8], k1: usize, k2: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(k2 - k1);
    let mut acc = 0.0;
    for k in k1 + 1..=k2 {
        s.push(acc);
        if k < k2 {
            let step = powi(0.5, (k - k1) as i32);
            acc += if eps[k - 1] == 2 { step } else { -step };
        }
    }
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if smax > smin {
        s.iter().map(|v| hi - (hi - lo) * (v - smin) / (smax - smin)).collect()
    } else {
        vec![0.5 * (lo + hi); s.len()]
    }
}

/// Contour scales of an instance: ζ-circles at `w_c(1 − d·h_ζ)`, z-circles around 1
/// with radius `√q·exp(−D·h_z)`. Any `h_z < |ln q|/5` is admissible. The cap
/// `|ln q|/c` trades circle spacing (small `N`) against distance from the pole at
/// `q` (large `N`); `c` grows from 8 at `N <= 40` to 12 at `N = 160`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub q: f64,
    pub w_c: f64,
    pub h_zeta: f64,
    pub h_z: f64,
}

impl Scales {
    pub fn new(params: &ModelParams) -> Self {
        let q = params.q;
        let w_c = 1.0 - sqrt(q);
        let nn = params.dim() as f64;
        let kappa = cbrt(nn).max(1.0);
        let c = 8.0 + 2.0 * libm::log2(nn / 40.0).max(0.0);
        Scales {
            q,
            w_c,
            h_zeta: (1.0 / kappa).min(0.5 / D2),
            h_z: (1.0 / kappa).min(-ln(q) / c),
        }
    }

    pub fn tau(&self, d: f64) -> f64 {
        self.w_c * (1.0 - d * self.h_zeta)
    }

    pub fn radius(&self, d: f64) -> f64 {
        sqrt(self.q) * exp(-d * self.h_z)
    }
}

/// Radii for one chained integral over `ζ_1, z_{k1+1}, …, z_{k2}, ζ_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub k1: usize,
    pub k2: usize,
    /// `R_{k1+1}, …, R_{k2}`.
    pub r: Vec<f64>,
}

impl RadiiConfig {
    /// Validates `τ_2 < τ_1 < w_c`, `q < R_k < √q` and the ε-ordering of consecutive radii.
    pub fn new(q: f64, tau1: f64, tau2: f64, k1: usize, k2: usize, r: Vec<f64>, eps: &[u8]) -> Result<Self> {
        let w_c = 1.0 - sqrt(q);
        if !(0.0 < tau2 && tau2 < tau1 && tau1 < w_c) {
            bail!(Constraint, "need 0 < tau2 < tau1 < 1-sqrt(q), got {} {}", tau2, tau1);
        }
        if k2 <= k1 || r.len() != k2 - k1 {
            bail!(Index, "need one radius per k in ({}, {}]", k1, k2);
        }
        if let Some(&bad) = r.iter().find(|&&x| !(q < x && x < sqrt(q))) {
            bail!(Constraint, "radius {} outside (q, sqrt q)", bad);
        }
        for k in k1 + 1..k2 {
            let (a, b) = (r[k - k1 - 1], r[k - k1]);
            let ok = if eps[k - 1] == 2 { a < b } else { a > b };
            if !ok {
                bail!(
                    Constraint,
                    "radii R_{} = {} and R_{} = {} violate eps_{} = {}",
                    k,
                    a,
                    k + 1,
                    b,
                    k,
                    eps[k - 1]
                );
            }
        }
        Ok(RadiiConfig { tau1, tau2, k1, k2, r })
    }

    /// `R_k` for `k1 < k <= k2`.
    pub fn radius(&self, k: usize) -> f64 {
        self.r[k - self.k1 - 1]
    }
}

pub fn radii_for_eps(params: &ModelParams, eps: &[u8], k1: usize, k2: usize) -> Result<RadiiConfig> {
    radii_with(params, Scales::new(params), eps, k1, k2)
}

fn radii_with(params: &ModelParams, s: Scales, eps: &[u8], k1: usize, k2: usize) -> Result<RadiiConfig> {
    if k1 >= k2 || k2 > params.p || eps.len() + 1 != params.p {
        bail!(Index, "need 0 <= k1 < k2 <= p and eps of length p-1");
    }
    let r = d_offsets(eps, k1, k2).into_iter().map(|d| s.radius(d)).collect();
    RadiiConfig::new(params.q, s.tau(D1), s.tau(D2), k1, k2, r, eps)
}

/// How a stored matrix enters `A(θ) + B(θ)`.
#[derive(Debug, Clone, PartialEq)]
enum Coef {
    /// `1 + Θ(r|s)`.
    OnePlusBigTheta,
    /// `Θ(r|k)`.
    BigTheta(usize),
    /// `sign · θ(r|ε)`.
    Theta(f64, Vec<u8>),
}

/// θ-independent data of `I + A(θ) + B(θ)` for one instance and node count.
#[derive(Debug, Clone)]
pub struct ExactEngine {
    params: ModelParams,
    pieces: Vec<CMat>,
    terms: Vec<(Coef, usize)>,
    block: Vec<usize>,
    pub nodes: usize,
}

struct Ctx<'a> {
    p: &'a ModelParams,
    s: Scales,
    conj: Conjugation,
    nodes: usize,
    block: Vec<usize>,
}

impl Ctx<'_> {
    fn get(&self, kind: Quantity, k: usize) -> i64 {
        self.p.get(kind, k)
    }

    fn bv(&self, kind: Quantity, i: usize) -> i64 {
        self.p.blockval(kind, i)
    }

    fn log_g(&self, w: C64, n: i64, m: i64, a: i64) -> C64 {
        let wc = C64::new(self.s.w_c, 0.0);
        let (n, m, a) = (n as f64, m as f64, a as f64);
        log_gstar(w, n, m, a, self.s.q) - log_gstar(wc, n, m, a, self.s.q)
    }

    fn g(&self, w: C64, n: i64, m: i64, a: i64) -> C64 {
        self.log_g(w, n, m, a).exp()
    }

    fn g_inv(&self, w: C64, n: i64, m: i64, a: i64) -> C64 {
        (-self.log_g(w, n, m, a)).exp()
    }

    fn zeta(&self, d: f64) -> Result<Contour> {
        Contour::circle(C64::new(0.0, 0.0), self.s.tau(d), self.nodes)
    }

    fn zcirc(&self, r: f64) -> Result<Contour> {
        Contour::circle(C64::new(1.0, 0.0), r, self.nodes)
    }

    fn plain(c: &Contour) -> Stage {
        Stage::new(c.nodes.clone(), c.weights.clone(), |_| C64::new(1.0, 0.0))
    }

    fn delta_site(&self, c: &Contour, k: usize) -> Stage {
        let (dn, dm, da) = (
            self.get(Quantity::N, k) - self.get(Quantity::N, k - 1),
            self.get(Quantity::M, k) - self.get(Quantity::M, k - 1),
            self.get(Quantity::A, k) - self.get(Quantity::A, k - 1),
        );
        Stage::new(c.nodes.clone(), c.weights.clone(), |z| self.g(z, dn, dm, da))
    }

    /// `c(i,j)/w_c` times the block mask, applied in place.
    fn finish(&self, mut m: CMat, mask: impl Fn(usize, usize) -> bool) -> CMat {
        let nn = self.p.dim();
        for i in 0..nn {
            for j in 0..nn {
                let keep = mask(self.block[i], self.block[j]);
                m[(i, j)] = if keep {
                    m[(i, j)] * (self.conj.c(i + 1, j + 1) / self.s.w_c)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        }
        m
    }

    fn rstar(&self, r: usize) -> usize {
        self.p.rstar(r)
    }

    /// `∮_{τ_2} dζ_2 (…) / G(ζ_2 | n_k − j + 1, m_k − m(j), a_k − a(j))` as the right factor.
    fn zeta2_right(&self, c: &Contour, k: usize) -> CMat {
        let nn = self.p.dim();
        let (nk, mk, ak) = (
            self.get(Quantity::N, k),
            self.get(Quantity::M, k),
            self.get(Quantity::A, k),
        );
        CMat::from_fn(nn, c.len(), |j, b| {
            let jj = j + 1;
            if jj as i64 > nk {
                return C64::new(0.0, 0.0);
            }
            self.g_inv(
                c.nodes[b],
                nk - jj as i64 + 1,
                mk - self.bv(Quantity::M, jj),
                ak - self.bv(Quantity::A, jj),
            )
        })
    }

    /// Left factor over ζ_1 for the chains starting after level `k1`.
    fn zeta1_left(&self, c: &Contour, k1: usize) -> CMat {
        let nn = self.p.dim();
        let (n1, m1, a1) = (
            self.get(Quantity::N, k1),
            self.get(Quantity::M, k1),
            self.get(Quantity::A, k1),
        );
        CMat::from_fn(nn, c.len(), |i, a| {
            let ii = i + 1;
            if ii as i64 <= n1 {
                return C64::new(0.0, 0.0);
            }
            c.weights[a]
                * self.g_inv(
                    c.nodes[a],
                    ii as i64 - n1,
                    self.bv(Quantity::M, ii) - m1,
                    self.bv(Quantity::A, ii) - a1,
                )
        })
    }

    /// Links `ζ_1 → z_{k1+1} → … → z_{top}`; the last stage has no site factor when `bare_last`.
    fn z_links(
        &self,
        zeta1: &Contour,
        radii: &RadiiConfig,
        top: usize,
        bare_last: bool,
    ) -> Result<(Vec<CMat>, Vec<Contour>)> {
        let k1 = radii.k1;
        let mut links = Vec::new();
        let mut circles = Vec::new();
        for k in k1 + 1..=top {
            let c = self.zcirc(radii.radius(k))?;
            let stage = if bare_last && k == top {
                Self::plain(&c)
            } else {
                self.delta_site(&c, k)
            };
            let l = if k == k1 + 1 {
                if k1 == 0 {
                    link(&zeta1.nodes, &stage, |a, b| (1.0 - a) / ((1.0 - b) * (b - a)))
                } else {
                    link(&zeta1.nodes, &stage, |a, b| 1.0 / (b - a))
                }
            } else {
                link(
                    &circles.last().map(|c: &Contour| c.nodes.clone()).unwrap(),
                    &stage,
                    |a, b| 1.0 / (a - b),
                )
            };
            links.push(l);
            circles.push(c);
        }
        Ok((links, circles))
    }

    fn piece_b(&self) -> Result<CMat> {
        let nn = self.p.dim();
        let c = self.zeta(D1)?;
        let mut out = CMat::zeros(nn, nn);
        for i in 0..nn {
            for j in 0..nn {
                let (r, s) = (self.block[i], self.block[j]);
                let rs = self.rstar(r);
                if !(s < rs) || j > i {
                    continue;
                }
                let dm = self.get(Quantity::M, rs) - self.get(Quantity::M, s);
                let da = self.get(Quantity::A, rs) - self.get(Quantity::A, s);
                let n = (i as i64) - (j as i64) + 1;
                let mut acc = C64::new(0.0, 0.0);
                for (w, h) in c.nodes.iter().zip(&c.weights) {
                    acc += h * self.g_inv(*w, n, dm, da);
                }
                out[(i, j)] = acc;
            }
        }
        Ok(self.finish(out, |r, s| s < self.rstar(r)))
    }

    fn piece_lk(&self, k: usize) -> Result<CMat> {
        let nn = self.p.dim();
        let (c1, c2) = (self.zeta(D1)?, self.zeta(D2)?);
        let (nk, mk, ak) = (
            self.get(Quantity::N, k),
            self.get(Quantity::M, k),
            self.get(Quantity::A, k),
        );
        let left = CMat::from_fn(nn, c1.len(), |i, a| {
            let ii = i + 1;
            c1.weights[a]
                * self.g(
                    c1.nodes[a],
                    nk - ii as i64,
                    mk - self.bv(Quantity::M, ii),
                    ak - self.bv(Quantity::A, ii),
                )
        });
        let l = link(&c1.nodes, &Self::plain(&c2), |a, b| 1.0 / (a - b));
        let m = chain_eval(&left, &[l], &self.zeta2_right(&c2, k));
        Ok(self.finish(m, |r, s| s < k && k < self.rstar(r)))
    }

    fn piece_leps(&self, k1: usize, k2: usize, radii: &RadiiConfig) -> Result<CMat> {
        let c1 = Contour::circle(C64::new(0.0, 0.0), radii.tau1, self.nodes)?;
        let c2 = Contour::circle(C64::new(0.0, 0.0), radii.tau2, self.nodes)?;
        let (mut links, circles) = self.z_links(&c1, radii, k2, false)?;
        links.push(link(&circles.last().unwrap().nodes, &Self::plain(&c2), |a, b| {
            1.0 / (a - b)
        }));
        let m = chain_eval(&self.zeta1_left(&c1, k1), &links, &self.zeta2_right(&c2, k2));
        Ok(self.finish(m, |r, s| k1 < self.rstar(r) && self.rstar(s) < k2))
    }

    fn piece_j(&self, k1: usize, k2: usize, radii: &RadiiConfig) -> Result<CMat> {
        let nn = self.p.dim();
        let c1 = Contour::circle(C64::new(0.0, 0.0), radii.tau1, self.nodes)?;
        let (links, circles) = self.z_links(&c1, radii, k2, true)?;
        let last = circles.last().unwrap();
        let nlo = self.get(Quantity::N, k2 - 1);
        let nhi = self.get(Quantity::N, k2);
        let dm = self.get(Quantity::M, k2) - self.get(Quantity::M, k2 - 1);
        let da = self.get(Quantity::A, k2) - self.get(Quantity::A, k2 - 1);
        let right = CMat::from_fn(nn, last.len(), |j, b| {
            let jj = (j + 1) as i64;
            if jj <= nlo || jj > nhi {
                return C64::new(0.0, 0.0);
            }
            self.g(last.nodes[b], jj - 1 - nlo, dm, da)
        });
        let m = chain_eval(&self.zeta1_left(&c1, k1), &links, &right);
        Ok(self.finish(m, |r, s| k1 < self.rstar(r) && s == k2))
    }

    fn piece_lp(&self) -> Result<CMat> {
        let nn = self.p.dim();
        let p = self.p.p;
        let zc = self.zcirc(self.s.radius(1.5))?;
        let c2 = self.zeta(D2)?;
        let np1 = self.get(Quantity::N, p - 1);
        let (np, dm, da) = (
            self.get(Quantity::N, p),
            self.get(Quantity::M, p) - self.get(Quantity::M, p - 1),
            self.get(Quantity::A, p) - self.get(Quantity::A, p - 1),
        );
        let left = CMat::from_fn(nn, zc.len(), |i, a| {
            let ii = (i + 1) as i64;
            if ii <= np1 {
                return C64::new(0.0, 0.0);
            }
            zc.weights[a] * self.g(zc.nodes[a], np - ii, dm, da)
        });
        let l = link(&zc.nodes, &Self::plain(&c2), |a, b| 1.0 / (a - b));
        let m = chain_eval(&left, &[l], &self.zeta2_right(&c2, p));
        Ok(self.finish(m, |r, _| r == p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Leps(usize, usize, Vec<u8>),
    J(usize, usize, Vec<u8>),
}

impl ExactEngine {
    pub fn new(params: &ModelParams, nodes: usize, mu: f64) -> Result<Self> {
        Self::with_scales(params, nodes, mu, Scales::new(params))
    }

    /// As `new`, with explicit contour scales (any admissible choice gives the same matrix).
    pub fn with_scales(params: &ModelParams, nodes: usize, mu: f64, scales: Scales) -> Result<Self> {
        params.validate()?;
        let p = params.p;
        if p < 2 {
            bail!(Domain, "the block formula needs p >= 2");
        }
        let nn = params.dim();
        let block: Vec<usize> = (1..=nn).map(|i| params.block_of(i)).collect();
        let nu = cbrt(nn as f64).max(1.0);
        let ctx = Ctx {
            p: params,
            s: scales,
            conj: Conjugation::new(params, mu, nu),
            nodes,
            block: block.clone(),
        };
        let mut pieces = Vec::new();
        let mut terms = Vec::new();

        if p >= 3 {
            pieces.push(ctx.piece_b()?);
            terms.push((Coef::OnePlusBigTheta, pieces.len() - 1));
        }
        for k in 1..p.saturating_sub(2) + 1 {
            if k + 2 > p {
                break;
            }
            pieces.push(ctx.piece_lk(k)?);
            terms.push((Coef::BigTheta(k), pieces.len() - 1));
        }
        let mut cache: BTreeMap<Key, usize> = BTreeMap::new();
        for k1 in 0..p {
            for k2 in k1 + 1..=p {
                let sign0 = parity((k1 + k2.min(p - 1)) as i64);
                if k1 == p - 1 {
                    // only L[p|p] survives for (p-1, p)
                    pieces.push(ctx.piece_lp()?);
                    let idx = pieces.len() - 1;
                    for eps in sumcond_eps(k1, k2, p) {
                        terms.push((Coef::Theta(sign0 * sign_eps(k1, k2, &eps), eps.clone()), idx));
                    }
                    continue;
                }
                for eps in sumcond_eps(k1, k2, p) {
                    let sign = sign0 * sign_eps(k1, k2, &eps);
                    let inner: Vec<u8> = (k1 + 1..k2).map(|k| eps[k - 1]).collect();
                    let radii = radii_with(params, scales, &eps, k1, k2)?;
                    let key = Key::Leps(k1, k2, inner.clone());
                    let idx = match cache.get(&key) {
                        Some(&i) => i,
                        None => {
                            pieces.push(ctx.piece_leps(k1, k2, &radii)?);
                            cache.insert(key, pieces.len() - 1);
                            pieces.len() - 1
                        }
                    };
                    terms.push((Coef::Theta(sign, eps.clone()), idx));
                    if k2 < p {
                        let key = Key::J(k1, k2, inner);
                        let idx = match cache.get(&key) {
                            Some(&i) => i,
                            None => {
                                pieces.push(ctx.piece_j(k1, k2, &radii)?);
                                cache.insert(key, pieces.len() - 1);
                                pieces.len() - 1
                            }
                        };
                        terms.push((Coef::Theta(sign, eps.clone()), idx));
                    }
                }
            }
        }
        Ok(ExactEngine {
            params: params.clone(),
            pieces,
            terms,
            block,
            nodes,
        })
    }

    /// `A(θ) + B(θ)` as one matrix.
    pub fn a_plus_b(&self, theta: &[C64]) -> Result<CMat> {
        let p = self.params.p;
        if theta.len() + 1 != p {
            bail!(Index, "expected {} θ-components", p - 1);
        }
        let tt = ThetaTools::new(theta)?;
        let nn = self.params.dim();
        let mut out = CMat::zeros(nn, nn);
        let mut coef = vec![C64::new(0.0, 0.0); (p + 1) * (p + 1)];
        for (c, idx) in &self.terms {
            for r in 1..=p {
                for s in 1..=p {
                    coef[r * (p + 1) + s] = match c {
                        Coef::OnePlusBigTheta => tt.big_theta(r, s) + 1.0,
                        Coef::BigTheta(k) => tt.big_theta(r, *k),
                        Coef::Theta(sg, eps) => tt.theta_r(r, eps) * *sg,
                    };
                }
            }
            let m = &self.pieces[*idx];
            for i in 0..nn {
                let r = self.block[i];
                for j in 0..nn {
                    let v = m.data[i * nn + j];
                    if v.re != 0.0 || v.im != 0.0 {
                        out.data[i * nn + j] += coef[r * (p + 1) + self.block[j]] * v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn det(&self, theta: &[C64]) -> Result<C64> {
        let mut m = self.a_plus_b(theta)?;
        let nn = self.params.dim();
        for i in 0..nn {
            m.data[i * nn + i] += 1.0;
        }
        lu_det(&m)
    }

    /// Exponent range of the determinant in each `θ_k`: `[-n_k, N - n_k]`.
    pub fn laurent_range(&self) -> (Vec<i64>, Vec<i64>) {
        let nn = self.params.dim() as i64;
        let lo = self.params.n[..self.params.p - 1].iter().map(|&n| -n).collect();
        let hi = self.params.n[..self.params.p - 1].iter().map(|&n| nn - n).collect();
        (lo, hi)
    }
}

/// Matrix `B(θ)` alone.
pub fn build_b(theta: &[C64], params: &ModelParams, nodes: usize) -> Result<BlockMatrixC> {
    let tt = ThetaTools::new(theta)?;
    if theta.len() + 1 != params.p {
        bail!(Index, "expected {} θ-components", params.p - 1);
    }
    let nn = params.dim();
    let mut m = if params.p >= 3 {
        let ctx = ctx_for(params, nodes, 0.0);
        ctx.piece_b()?
    } else {
        CMat::zeros(nn, nn)
    };
    for i in 0..nn {
        for j in 0..nn {
            let f = tt.big_theta(params.block_of(i + 1), params.block_of(j + 1)) + 1.0;
            m[(i, j)] *= f;
        }
    }
    BlockMatrixC::new(params.n.iter().map(|&x| x as usize).collect(), m)
}

/// Matrix `A(θ) = A_1(θ) + A_2(θ)`.
pub fn build_a(theta: &[C64], params: &ModelParams, nodes: usize) -> Result<BlockMatrixC> {
    let eng = ExactEngine::new(params, nodes, 0.0)?;
    let mut ab = eng.a_plus_b(theta)?;
    let b = build_b(theta, params, nodes)?;
    ab.axpy(C64::new(-1.0, 0.0), &b.mat);
    BlockMatrixC::new(params.n.iter().map(|&x| x as usize).collect(), ab)
}

fn ctx_for(params: &ModelParams, nodes: usize, mu: f64) -> Ctx<'_> {
    let nn = params.dim();
    Ctx {
        p: params,
        s: Scales::new(params),
        conj: Conjugation::new(params, mu, cbrt(nn as f64).max(1.0)),
        nodes,
        block: (1..=nn).map(|i| params.block_of(i)).collect(),
    }
}

/// `det(I + A(θ) + B(θ))`.
pub fn det_theta(theta: &[C64], params: &ModelParams, settings: &ExactSettings) -> Result<C64> {
    ExactEngine::new(params, settings.nodes, settings.mu)?.det(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExactOutcome {
    pub value: f64,
    pub imag_part: f64,
    pub contour_nodes: usize,
    pub theta_nodes: usize,
    /// Change between the last two contour-node levels.
    pub change: f64,
}

fn theta_integral<E: Exec>(eng: &ExactEngine, settings: &ExactSettings, exec: &E) -> Result<(C64, usize)> {
    let f = |t: &[C64]| eng.det(t);
    let p = eng.params.p;
    let (lo, hi) = eng.laurent_range();
    let laurent = match settings.theta_mode {
        ThetaMode::Laurent => true,
        ThetaMode::Trapezoid => false,
        ThetaMode::Auto => lo
            .iter()
            .zip(&hi)
            .try_fold(1usize, |acc, (a, b)| acc.checked_mul((b - a + 1) as usize))
            .is_some_and(|c| c <= LAURENT_AUTO_MAX),
    };
    if laurent {
        let o = theta_laurent(&lo, &hi, &f, exec)?;
        return Ok((o.value, o.nodes));
    }
    let start = settings
        .theta_nodes
        .unwrap_or_else(|| (eng.params.dim() + 2).next_power_of_two());
    let o = theta_trapezoid(
        p - 1,
        settings.r_theta,
        start,
        settings.tol,
        settings.max_doublings,
        &f,
        exec,
    )?;
    Ok((o.value, o.nodes))
}

/// `P(G(m_k,n_k) < a_k, k = 1..p)` from the block determinant, doubling contour
/// nodes until two levels agree to `settings.tol`. `p = 1` uses [`single_point_prob`].
pub fn multipoint_prob_exact<E: Exec>(
    params: &ModelParams,
    settings: &ExactSettings,
    exec: &E,
) -> Result<ExactOutcome> {
    params.validate()?;
    if params.trivially_zero() {
        return Ok(ExactOutcome {
            value: 0.0,
            imag_part: 0.0,
            contour_nodes: 0,
            theta_nodes: 0,
            change: 0.0,
        });
    }
    if params.dim() > 300 {
        bail!(Budget, "N = {} is beyond the exact route", params.dim());
    }
    if params.p == 1 {
        return single_point_prob(params.n[0], params.m[0], params.a[0], params.q, settings);
    }
    let mut nodes = settings.nodes;
    let eng = ExactEngine::new(params, nodes, settings.mu)?;
    let (mut prev, _) = theta_integral(&eng, settings, exec)?;
    for _ in 0..settings.max_doublings {
        nodes *= 2;
        let eng = ExactEngine::new(params, nodes, settings.mu)?;
        let (cur, tn) = theta_integral(&eng, settings, exec)?;
        let change = (cur - prev).norm();
        if change < settings.tol {
            if cur.im.abs() > settings.imag_tol {
                bail!(
                    NonConvergence,
                    "imaginary part {} exceeds {}",
                    cur.im,
                    settings.imag_tol
                );
            }
            return Ok(ExactOutcome {
                value: cur.re,
                imag_part: cur.im,
                contour_nodes: nodes,
                theta_nodes: tn,
                change,
            });
        }
        prev = cur;
    }
    bail!(NonConvergence, "contour quadrature did not settle with {} nodes", nodes)
}

/// The one-point matrix `M(i,j)`, conjugated by `w_c^{i-j}`.
pub fn single_point_matrix(n: i64, m: i64, a: i64, q: f64, nodes: usize) -> Result<CMat> {
    let params = ModelParams::new(q, vec![m], vec![n], vec![a])?;
    let ctx = ctx_for(&params, nodes, 0.0);
    let zc = ctx.zcirc(ctx.s.radius(1.5))?;
    let c = ctx.zeta(1.0)?;
    let nn = n as usize;
    let left = CMat::from_fn(nn, zc.len(), |i, k| {
        zc.weights[k] * ctx.g(zc.nodes[k], n - (i as i64 + 1), m, a - 1)
    });
    let l = link(&zc.nodes, &Ctx::plain(&c), |z, w| 1.0 / (z - w));
    let right = CMat::from_fn(nn, c.len(), |j, k| {
        ctx.g_inv(c.nodes[k], n - (j as i64 + 1) + 1, m, a - 1)
    });
    let mut out = chain_eval(&left, &[l], &right);
    out.data.iter_mut().for_each(|v| *v /= ctx.s.w_c);
    Ok(out)
}

/// `P(G(m,n) < a) = det(I + M)`, doubling nodes until stable.
pub fn single_point_prob(n: i64, m: i64, a: i64, q: f64, settings: &ExactSettings) -> Result<ExactOutcome> {
    if n < 1 || m < 1 {
        bail!(Domain, "n and m must be positive");
    }
    if a <= 0 {
        return Ok(ExactOutcome {
            value: 0.0,
            imag_part: 0.0,
            contour_nodes: 0,
            theta_nodes: 0,
            change: 0.0,
        });
    }
    let det = |nodes| -> Result<C64> {
        let mut mm = single_point_matrix(n, m, a, q, nodes)?;
        for i in 0..n as usize {
            mm[(i, i)] += 1.0;
        }
        lu_det(&mm)
    };
    let mut nodes = settings.nodes;
    let mut prev = det(nodes)?;
    for _ in 0..settings.max_doublings {
        nodes *= 2;
        let cur = det(nodes)?;
        let change = (cur - prev).norm();
        if change < settings.tol {
            return Ok(ExactOutcome {
                value: cur.re,
                imag_part: cur.im,
                contour_nodes: nodes,
                theta_nodes: 0,
                change,
            });
        }
        prev = cur;
    }
    bail!(
        NonConvergence,
        "one-point determinant did not settle with {} nodes",
        nodes
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::oracle::dp_exact_prob;

    fn mp(q: f64, m: &[i64], n: &[i64], a: &[i64]) -> ModelParams {
        ModelParams::new(q, m.to_vec(), n.to_vec(), a.to_vec()).unwrap()
    }

    #[test]
    fn single_point_small() {
        let s = ExactSettings::default();
        for a in 1..5 {
            let v = single_point_prob(1, 1, a, 0.3, &s).unwrap();
            assert!((v.value - (1.0 - 0.3f64.powi(a as i32))).abs() < 1e-10);
        }
        let v = single_point_prob(3, 3, 5, 0.5, &s).unwrap();
        let d = dp_exact_prob(&mp(0.5, &[3], &[3], &[5])).unwrap();
        assert!((v.value - d).abs() < 1e-8, "{} {}", v.value, d);
    }

    #[test]
    fn p2_forced_zero_event() {
        let s = ExactSettings::default();
        let v = multipoint_prob_exact(&mp(0.5, &[1, 2], &[1, 2], &[1, 1]), &s, &Serial).unwrap();
        assert!((v.value - 0.0625).abs() < 1e-8, "{:?}", v);
    }

    #[test]
    fn p2_vs_dp() {
        let s = ExactSettings::default();
        let p = mp(0.4, &[1, 2], &[1, 3], &[2, 4]);
        let v = multipoint_prob_exact(&p, &s, &Serial).unwrap();
        let d = dp_exact_prob(&p).unwrap();
        assert!((v.value - d).abs() < 1e-6, "{:?} {}", v, d);
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn conjugation_and_radii_do_not_matter() {
        let p = mp(0.4, &[2, 3, 5], &[2, 4, 5], &[3, 5, 7]);
        let th = [C64::new(1.2, 1.6), C64::new(-0.6, 1.9)];
        let base = ExactEngine::new(&p, 512, 0.0).unwrap().det(&th).unwrap();
        let mu = ExactEngine::new(&p, 512, 1.0).unwrap().det(&th).unwrap();
        assert!(rel(mu, base) < 1e-8, "{} {}", mu, base);
        let mut sc = Scales::new(&p);
        sc.h_zeta *= 0.85;
        sc.h_z *= 0.85;
        let moved = ExactEngine::with_scales(&p, 512, 0.0, sc).unwrap().det(&th).unwrap();
        assert!(rel(moved, base) < 1e-8, "{} {}", moved, base);
        let conj = ExactEngine::new(&p, 512, 0.0)
            .unwrap()
            .det(&[th[0].conj(), th[1].conj()])
            .unwrap();
        assert!(rel(conj, base.conj()) < 1e-12);
    }

    #[test]
    fn b_structure() {
        let th2 = [C64::new(0.3, 1.1)];
        let b = build_b(&th2, &mp(0.4, &[1, 2], &[1, 3], &[2, 4]), 64).unwrap();
        assert_eq!(b.mat.max_abs(), 0.0);
        let p = mp(0.4, &[2, 3, 5, 6], &[1, 3, 4, 6], &[3, 5, 7, 9]);
        let th = [C64::new(1.2, 1.6), C64::new(-0.6, 1.9), C64::new(2.0, 0.1)];
        let b = build_b(&th, &p, 128).unwrap();
        let nn = p.dim();
        for i in 1..=nn {
            for j in 1..=nn {
                let (r, s) = (p.block_of(i), p.block_of(j));
                let v = b.block_entry(r, i, s, j);
                if !(s < p.rstar(r)) || j > i {
                    assert!(v.norm() < 1e-13, "B({},{}) = {}", i, j, v);
                }
            }
        }
        assert!(b.mat.max_abs() > 1e-3);
        let mut pw = b.mat.clone();
        for _ in 1..p.p - 1 {
            pw = pw.matmul(&b.mat);
        }
        assert!(pw.max_abs() < 1e-12, "{}", pw.max_abs());
    }

    #[test]
    fn node_doubling() {
        let p = mp(0.4, &[2, 3, 5], &[2, 4, 5], &[3, 5, 7]);
        let th = [C64::new(0.4, 1.9), C64::new(1.5, -1.3)];
        let a = build_b(&th, &p, 256).unwrap();
        let b = build_b(&th, &p, 512).unwrap();
        let mut d = a.mat.clone();
        d.axpy(C64::new(-1.0, 0.0), &b.mat);
        assert!(d.max_abs() < 1e-10);
        let a = build_a(&th, &p, 256).unwrap();
        // L[p|p] only on row block p
        let e = ExactEngine::new(&mp(0.4, &[1, 2], &[1, 3], &[2, 4]), 128, 0.0).unwrap();
        let m = e.a_plus_b(&[C64::new(2.0, 0.0)]).unwrap();
        assert!(m.data.iter().all(|v| v.re.is_finite()));
        assert!(a.mat.max_abs() > 0.0);
    }

    #[test]
    fn monotone_in_a() {
        let s = ExactSettings::default();
        let mut last = -1.0;
        for a2 in 3..6 {
            let v = multipoint_prob_exact(&mp(0.4, &[1, 2], &[1, 3], &[2, a2]), &s, &Serial)
                .unwrap()
                .value;
            assert!(v >= last - 1e-9 && v <= 1.0 + 1e-6, "{} after {}", v, last);
            last = v;
        }
    }

    #[test]
    fn p3_vs_dp() {
        let s = ExactSettings::default();
        let p = mp(0.4, &[1, 2, 3], &[1, 2, 3], &[2, 3, 4]);
        let v = multipoint_prob_exact(&p, &s, &Serial).unwrap();
        let d = dp_exact_prob(&p).unwrap();
        assert!((v.value - d).abs() < 1e-5, "{:?} {}", v, d);
    }
}

#[cfg(test)]
mod cb_tests {
    use super::*;
    use crate::oracle::nabla_w;

    /// `L(θ)` from the transfer-kernel convolution, with `A`, `B` the triangular
    /// orthogonalizing matrices built from residues at the origin.
    fn cauchy_binet(params: &ModelParams, theta: &[C64]) -> CMat {
        let p = params.p;
        let nn = params.dim();
        let q = params.q;
        let conj = Conjugation::new(params, 0.0, 1.0);
        let c = Contour::circle(C64::new(0.0, 0.0), 0.5 * (1.0 - q), 256).unwrap();
        let res = |n: i64, m: i64, a: i64| -> C64 {
            let mut s = C64::new(0.0, 0.0);
            for (w, h) in c.nodes.iter().zip(&c.weights) {
                s += h * (-log_gstar(*w, n as f64, m as f64, a as f64, q)).exp();
            }
            s
        };
        let bv = |k: Quantity, i: usize| params.blockval(k, i);
        let g = |k: Quantity, r: usize| params.get(k, r);
        let amat = CMat::from_fn(nn, nn, |i, k| {
            let (ii, kk) = (i + 1, k + 1);
            res(ii as i64 - kk as i64 + 1, bv(Quantity::M, ii), bv(Quantity::A, ii) - 1)
                * conj.log_c(ii).exp()
                * parity(kk as i64)
        });
        let bmat = CMat::from_fn(nn, nn, |k, j| {
            let (kk, jj) = (k + 1, j + 1);
            res(
                kk as i64 - jj as i64 + 1,
                g(Quantity::M, p) - bv(Quantity::M, jj),
                g(Quantity::A, p) - bv(Quantity::A, jj),
            ) * (-conj.log_c(jj)).exp()
                * parity(kk as i64)
        });
        let (n1, m1, a1) = (g(Quantity::N, 1), g(Quantity::M, 1), g(Quantity::A, 1));
        let np1 = g(Quantity::N, p - 1);
        let (dmp, dap) = (
            g(Quantity::M, p) - g(Quantity::M, p - 1),
            g(Quantity::A, p) - g(Quantity::A, p - 1),
        );
        // coordinate window
        let span = g(Quantity::A, p) + g(Quantity::N, p) + 6;
        let lo = -span - 2;
        let hi = span + 2;
        let xs: Vec<i64> = (lo..=hi).collect();
        let f01 = |i: usize, x: i64| -> C64 {
            let mut s = C64::new(0.0, 0.0);
            for k in 1..=nn {
                s += amat[(i - 1, k - 1)] * nabla_w(n1 - k as i64, m1, x + a1, q);
            }
            s * parity(n1)
        };
        let fmid = |r: usize, x: i64, y: i64| -> f64 {
            let dn = g(Quantity::N, r) - g(Quantity::N, r - 1);
            let dm = g(Quantity::M, r) - g(Quantity::M, r - 1);
            let da = g(Quantity::A, r) - g(Quantity::A, r - 1);
            nabla_w(dn, dm, y - x + da, q) * parity(dn)
        };
        let flast = |x: i64, j: usize| -> C64 {
            let mut s = C64::new(0.0, 0.0);
            for k in 1..=nn {
                s += bmat[(k - 1, j - 1)] * nabla_w(k as i64 - 1 - np1, dmp, dap - x, q);
            }
            s * parity(np1)
        };
        let tpow = |k: usize, x: i64| if x < 0 { theta[k - 1] } else { C64::new(1.0, 0.0) };
        let last: Vec<Vec<C64>> = xs.iter().map(|&x| (1..=nn).map(|j| flast(x, j)).collect()).collect();
        CMat::from_fn(nn, nn, |i, j| {
            let ii = i + 1;
            // v(x_1) = f01(i, x_1) θ_1^{…}; propagate through the middle kernels
            let mut v: Vec<C64> = xs.iter().map(|&x| f01(ii, x) * tpow(1, x)).collect();
            for r in 2..p {
                v = xs
                    .iter()
                    .map(|&y| {
                        let mut s = C64::new(0.0, 0.0);
                        for (a, &x) in xs.iter().enumerate() {
                            s += v[a] * fmid(r, x, y);
                        }
                        s * tpow(r, y)
                    })
                    .collect();
            }
            let mut s = C64::new(0.0, 0.0);
            for (a, _) in xs.iter().enumerate() {
                s += v[a] * last[a][j];
            }
            for k in 1..p {
                if ii as i64 <= params.n[k - 1] {
                    s /= theta[k - 1];
                }
            }
            s
        })
    }

    fn compare(params: &ModelParams, theta: &[C64]) -> f64 {
        let l = cauchy_binet(params, theta);
        let eng = ExactEngine::new(params, 1024, 0.0).unwrap();
        let mut ab = eng.a_plus_b(theta).unwrap();
        for i in 0..params.dim() {
            ab[(i, i)] += 1.0;
        }
        let mut worst = 0.0f64;
        for i in 0..params.dim() {
            for j in 0..params.dim() {
                let d = (l[(i, j)] - ab[(i, j)]).norm();
                if d > 1e-8 {
                    std::eprintln!("({},{}) cb {:.10} ab {:.10}", i + 1, j + 1, l[(i, j)], ab[(i, j)]);
                }
                worst = worst.max(d);
            }
        }
        worst
    }

    #[test]
    fn block_matrix_equals_cauchy_binet_p2() {
        let p = ModelParams::new(0.4, vec![1, 2], vec![1, 3], vec![2, 4]).unwrap();
        assert!(compare(&p, &[C64::new(1.3, 0.4)]) < 1e-8);
    }

    #[test]
    fn block_matrix_equals_cauchy_binet_p3() {
        let p = ModelParams::new(0.4, vec![1, 2, 3], vec![1, 2, 3], vec![2, 3, 4]).unwrap();
        assert!(compare(&p, &[C64::new(1.3, 0.4), C64::new(0.7, -0.9)]) < 1e-8);
    }
}
