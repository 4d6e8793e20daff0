//! The KPZ-limit kernel `F(θ)` on `L²(ℝ<0)^{p−1} ⊕ L²(ℝ>0)`, its Fredholm
//! determinant and the θ-integral giving the limiting multi-time law.
//!
//! Every basic kernel is a chain of line integrals: the first variable carries
//! `e^{−wu}`, the last `e^{wv}`, consecutive variables are coupled by
//! `±1/(w_j − w_{j+1})`. The contour form integrates the chain on truncated
//! vertical lines. The Airy form expands each coupling as a λ-integral and
//! integrates every variable in closed form.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::airy::ai;
use crate::chain::{chain_eval, link, Stage};
use crate::error::{bail, Result};
use crate::exact::d_offsets_in;
use crate::exec::Exec;
use crate::integrands::log_script_g;
use crate::linalg::{nystrom_det_sampled, CMat, NystromGrid};
use crate::math::{cbrt, ceil, exp, powf, sqrt};
use crate::params::{check_times, default_mu, delta_triple, sign_eps, sumcond_eps, ThetaTools, Txi};
use crate::quad::{gl_composite, Contour};
use crate::theta::theta_trapezoid;
use crate::tw::tracy_widom;
use crate::C64;

/// Largest `|ξ_k|` accepted for p >= 2. Kernel pieces carry `e^{d t^{1/3} |ξ|}`
/// factors that cancel in the determinant, and accuracy drops beyond this.
pub const XI_MAX: f64 = 10.0;
pub const X_MAX: f64 = 3.0;

/// Continuum instance `(t_k, x_k, ξ_k)`, `k = 1..p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitInstance {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

impl LimitInstance {
    pub fn new(t: Vec<f64>, x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        let inst = LimitInstance { t, x, xi, mu: None };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_times(&self.t, &self.x, &self.xi)?;
        if self.t.len() > 1 {
            if let Some(v) = self.xi.iter().find(|v| v.abs() > XI_MAX) {
                bail!(Domain, "|ξ| <= {} is required for p >= 2, got {}", XI_MAX, v);
            }
            if let Some(v) = self.x.iter().find(|v| v.abs() > X_MAX) {
                bail!(Domain, "|x| <= {} is required for p >= 2, got {}", X_MAX, v);
            }
        }
        if let Some(mu) = self.mu {
            if !(mu >= 0.0 && mu.is_finite()) {
                bail!(Domain, "mu must be finite and nonnegative");
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.t.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| default_mu(&self.t, &self.x))
    }

    /// `Δ_{k1,k2}(t,x,ξ)`.
    pub fn delta(&self, k1: usize, k2: usize) -> Result<Txi> {
        if k1 >= k2 || k2 > self.p() {
            bail!(Index, "need 0 <= k1 < k2 <= p, got ({}, {})", k1, k2);
        }
        Ok(delta_triple(&self.t, &self.x, &self.xi, k1, k2))
    }
}

/// Line positions: ζ-lines at `−d1, −d2, −d3`, a lone `z_p` at `big_d`,
/// `z`-chains spread over `[z_lo, z_hi]` by `d_for_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abscissas {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub big_d: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Default for Abscissas {
    fn default() -> Self {
        Abscissas {
            d1: 0.8,
            d2: 1.6,
            d3: 0.8,
            big_d: 1.0,
            z_lo: 0.5,
            z_hi: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSettings {
    pub abscissas: Abscissas,
    /// Multiplier on the automatic Gauss–Legendre count per line.
    pub line_scale: f64,
    /// Truncation of each half-line, in units of `t_p^{1/3}`.
    pub grid_length: f64,
    pub grid_nodes: usize,
    /// λ-integrals of the Airy form run over `[0, lambda_max]`.
    pub lambda_max: f64,
    pub lambda_panels: usize,
    pub r_theta: f64,
    pub theta_nodes: usize,
    pub tol: f64,
    pub max_doublings: usize,
    pub imag_tol: f64,
}

impl Default for LimitSettings {
    fn default() -> Self {
        LimitSettings {
            abscissas: Abscissas::default(),
            line_scale: 1.0,
            grid_length: 12.0,
            grid_nodes: 48,
            lambda_max: 40.0,
            lambda_panels: 48,
            r_theta: 2.0,
            theta_nodes: 8,
            tol: 1e-9,
            max_doublings: 5,
            imag_tol: 1e-6,
        }
    }
}

/// The seven basic kernel families.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// `F[p|p]`
    Pp,
    /// `F[k,k|∅]`
    Kk { k: usize },
    /// `F[p,k|p]`
    Pk { k: usize },
    /// `F[k1,k1,k2|∅]`
    Kkk { k1: usize, k2: usize },
    /// `F^ε[k1|(k1,k2]]`
    J { k1: usize, k2: usize, eps: Vec<u8> },
    /// `F^ε[k1,k2|(k1,k2]]`
    L { k1: usize, k2: usize, eps: Vec<u8> },
    /// `F^ε[k1,k2,k3|(k1,k2]]`
    Lk {
        k1: usize,
        k2: usize,
        k3: usize,
        eps: Vec<u8>,
    },
}

impl Family {
    /// The family number 1..=7.
    pub fn number(&self) -> u8 {
        match self {
            Family::Pp => 1,
            Family::Kk { .. } => 2,
            Family::Pk { .. } => 3,
            Family::Kkk { .. } => 4,
            Family::J { .. } => 5,
            Family::L { .. } => 6,
            Family::Lk { .. } => 7,
        }
    }

    /// Same kernel up to ε entries that do not enter it.
    fn canonical(&self) -> Family {
        let inner = |k1: usize, k2: usize, eps: &[u8]| (k1 + 1..k2).map(|k| eps[k - 1]).collect();
        match self {
            Family::J { k1, k2, eps } => Family::J {
                k1: *k1,
                k2: *k2,
                eps: inner(*k1, *k2, eps),
            },
            Family::L { k1, k2, eps } => Family::L {
                k1: *k1,
                k2: *k2,
                eps: inner(*k1, *k2, eps),
            },
            Family::Lk { k1, k2, k3, eps } => Family::Lk {
                k1: *k1,
                k2: *k2,
                k3: *k3,
                eps: inner(*k1, *k2, eps),
            },
            f => f.clone(),
        }
    }
}

/// `D_k` for `k1 < k <= k2` from the binary-offset rule, rescaled to `[0.5, 2.5]`.
pub fn d_for_eps(eps: &[u8], k1: usize, k2: usize) -> Result<Vec<f64>> {
    d_for_eps_in(eps, k1, k2, 0.5, 2.5)
}

pub fn d_for_eps_in(eps: &[u8], k1: usize, k2: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if k1 >= k2 || k2 > eps.len() + 1 {
        bail!(Index, "need k1 < k2 <= p, got ({}, {})", k1, k2);
    }
    if !(lo > 0.0 && hi > lo) {
        bail!(Constraint, "D-range must satisfy 0 < lo < hi");
    }
    let d = d_offsets_in(eps, k1, k2, lo, hi);
    check_d_order(eps, k1, k2, &d)?;
    Ok(d)
}

/// Distinct, positive, and `D_k < D_{k+1}` iff `ε_k = 1`.
pub fn check_d_order(eps: &[u8], k1: usize, k2: usize, d: &[f64]) -> Result<()> {
    if d.len() != k2 - k1 {
        bail!(Constraint, "expected {} abscissas, got {}", k2 - k1, d.len());
    }
    if d.iter().any(|&x| !(x > 0.0)) {
        bail!(Constraint, "z-abscissas must be positive");
    }
    for i in 0..d.len() {
        for j in 0..i {
            if d[i] == d[j] {
                bail!(Constraint, "z-abscissas must be distinct");
            }
        }
    }
    for k in k1 + 1..k2 {
        let (a, b) = (d[k - k1 - 1], d[k - k1]);
        let ok = if eps[k - 1] == 1 { a < b } else { a > b };
        if !ok {
            bail!(
                Constraint,
                "D_{} vs D_{} contradicts ε_{} = {}",
                k,
                k + 1,
                k,
                eps[k - 1]
            );
        }
    }
    Ok(())
}

/// One chain variable: `up` lines carry `𝒢(w|g)` and sit right of the axis,
/// the others carry `1/𝒢(w|g)` and sit left.
#[derive(Debug, Clone, Copy)]
struct Var {
    up: bool,
    at: f64,
    g: Txi,
}

#[derive(Debug, Clone)]
struct ChainSpec {
    vars: Vec<Var>,
    /// coupling `j` is `signs[j] / (w_j − w_{j+1})`
    signs: Vec<f64>,
}

fn z(at: f64, g: Txi) -> Var {
    Var { up: true, at, g }
}

fn zeta(d: f64, g: Txi) -> Var {
    Var { up: false, at: -d, g }
}

fn check_pos(a: &Abscissas) -> Result<()> {
    if !(a.d1 > 0.0 && a.d2 > 0.0 && a.d3 > 0.0 && a.big_d > 0.0) {
        bail!(Constraint, "all line abscissas need d > 0 and D > 0");
    }
    Ok(())
}

fn need_d1_d3_below_d2(a: &Abscissas, d1: bool, d3: bool) -> Result<()> {
    if d1 && !(a.d1 < a.d2) {
        bail!(Constraint, "need d1 < d2, got {} and {}", a.d1, a.d2);
    }
    if d3 && !(a.d3 < a.d2) {
        bail!(Constraint, "need d3 < d2, got {} and {}", a.d3, a.d2);
    }
    Ok(())
}

fn eps_ok(eps: &[u8], p: usize) -> Result<()> {
    if eps.len() != p - 1 || eps.iter().any(|&e| e != 1 && e != 2) {
        bail!(Domain, "ε must lie in {{1,2}}^{}", p - 1);
    }
    Ok(())
}

/// The chain of a family at blocks `(r, s)`, or `None` where its indicator vanishes.
fn family_spec(fam: &Family, r: usize, s: usize, inst: &LimitInstance, ab: &Abscissas) -> Result<Option<ChainSpec>> {
    let p = inst.p();
    if p < 2 {
        bail!(Domain, "basic kernels need p >= 2");
    }
    if r < 1 || r > p || s < 1 || s > p {
        bail!(Index, "block indices must lie in 1..={}", p);
    }
    check_pos(ab)?;
    let rs = r.min(p - 1);
    let ss = s.min(p - 1);
    let dl = |a, b| inst.delta(a, b);
    let zs = |k1: usize, k2: usize, eps: &[u8]| -> Result<Vec<Var>> {
        eps_ok(eps, p)?;
        let d = d_for_eps_in(eps, k1, k2, ab.z_lo, ab.z_hi)?;
        (k1 + 1..=k2).map(|k| Ok(z(d[k - k1 - 1], dl(k - 1, k)?))).collect()
    };
    let spec = match fam {
        Family::Pp => {
            if r != p {
                return Ok(None);
            }
            ChainSpec {
                vars: vec![z(ab.big_d, dl(p - 1, p)?), zeta(ab.d1, dl(ss, p)?)],
                signs: vec![1.0],
            }
        }
        Family::Kk { k } => {
            let k = *k;
            need_d1_d3_below_d2(ab, true, false)?;
            if !(s < k && k < rs) {
                return Ok(None);
            }
            ChainSpec {
                vars: vec![zeta(ab.d1, dl(k, rs)?), zeta(ab.d2, dl(s, k)?)],
                signs: vec![1.0],
            }
        }
        Family::Pk { k } => {
            let k = *k;
            need_d1_d3_below_d2(ab, false, true)?;
            if !(r == p && s < k && k < p) {
                return Ok(None);
            }
            ChainSpec {
                vars: vec![
                    z(ab.big_d, dl(p - 1, p)?),
                    zeta(ab.d2, dl(k, p)?),
                    zeta(ab.d3, dl(s, k)?),
                ],
                signs: vec![1.0, 1.0],
            }
        }
        Family::Kkk { k1, k2 } => {
            let (k1, k2) = (*k1, *k2);
            need_d1_d3_below_d2(ab, true, true)?;
            if !(k1 < rs && s < k2 && k2 < k1) {
                return Ok(None);
            }
            ChainSpec {
                vars: vec![
                    zeta(ab.d1, dl(k1, rs)?),
                    zeta(ab.d2, dl(k2, k1)?),
                    zeta(ab.d3, dl(s, k2)?),
                ],
                signs: vec![1.0, 1.0],
            }
        }
        Family::J { k1, k2, eps } => {
            let (k1, k2) = (*k1, *k2);
            if !(k1 < rs && s == k2 && k2 < p && k1 < k2) {
                return Ok(None);
            }
            let mut vars = vec![zeta(ab.d1, dl(k1, rs)?)];
            vars.extend(zs(k1, k2, eps)?);
            let mut signs = vec![-1.0];
            signs.extend(core::iter::repeat_n(1.0, k2 - k1 - 1));
            ChainSpec { vars, signs }
        }
        Family::L { k1, k2, eps } => {
            let (k1, k2) = (*k1, *k2);
            if !(k1 < rs && ss < k2 && k1 < k2) {
                return Ok(None);
            }
            let mut vars = vec![zeta(ab.d1, dl(k1, rs)?)];
            vars.extend(zs(k1, k2, eps)?);
            vars.push(zeta(ab.d2, dl(ss, k2)?));
            let mut signs = vec![-1.0];
            signs.extend(core::iter::repeat_n(1.0, k2 - k1));
            ChainSpec { vars, signs }
        }
        Family::Lk { k1, k2, k3, eps } => {
            let (k1, k2, k3) = (*k1, *k2, *k3);
            need_d1_d3_below_d2(ab, true, true)?;
            if !(k1 < rs && s < k3 && k3 < k2 && k1 < k2) {
                return Ok(None);
            }
            let mut vars = vec![zeta(ab.d1, dl(k1, rs)?)];
            vars.extend(zs(k1, k2, eps)?);
            vars.push(zeta(ab.d2, dl(k3, k2)?));
            vars.push(zeta(ab.d3, dl(s, k3)?));
            let mut signs = vec![-1.0];
            signs.extend(core::iter::repeat_n(1.0, k2 - k1 + 1));
            ChainSpec { vars, signs }
        }
    };
    Ok(Some(spec))
}

/// Gaussian rate of `|𝒢^{±1}|` along the line through `v.at`.
fn line_beta(v: &Var) -> f64 {
    let t23 = powf(v.g.t, 2.0 / 3.0);
    if v.up {
        v.g.t * v.at + t23 * v.g.x
    } else {
        -v.g.t * v.at - t23 * v.g.x
    }
}

fn line_for(v: &Var, coord: f64, scale: f64) -> Result<Contour> {
    let beta = line_beta(v);
    if !(beta > 0.0) {
        bail!(
            Constraint,
            "no decay on the line Re w = {} for (t, x) = ({}, {}); move the abscissa",
            v.at,
            v.g.t,
            v.g.x
        );
    }
    let h = sqrt(36.85 / beta);
    // phase swept along the truncated line
    let phase = v.g.t * h * h * h / 3.0
        + 2.0 * powf(v.g.t, 2.0 / 3.0) * (v.g.x * v.at).abs() * h
        + cbrt(v.g.t) * v.g.xi.abs() * h
        + coord * h
        + v.g.t * v.at * v.at * h;
    let n = ceil(scale * (0.8 * phase + 48.0)) as usize;
    let n = n.div_ceil(8) * 8;
    if n > 8192 {
        bail!(Budget, "line at {} would need {} nodes", v.at, n);
    }
    Contour::gaussian_vline(v.at, beta, n)
}

fn conj(m: &mut CMat, us: &[f64], vs: &[f64], mu: f64) {
    if mu == 0.0 {
        return;
    }
    for (a, &u) in us.iter().enumerate() {
        for (b, &v) in vs.iter().enumerate() {
            m[(a, b)] *= exp(mu * (v - u));
        }
    }
}

fn coord_max(us: &[f64], vs: &[f64]) -> f64 {
    us.iter().chain(vs).fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Contour form of a chain on `us × vs`, including `e^{μ(v−u)}`.
fn contour_block(spec: &ChainSpec, us: &[f64], vs: &[f64], mu: f64, scale: f64) -> Result<CMat> {
    let cm = coord_max(us, vs);
    let n = spec.vars.len();
    let stages: Vec<Stage> = spec
        .vars
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let c = line_for(v, if j == 0 || j + 1 == n { cm } else { 0.0 }, scale)?;
            let (up, g) = (v.up, v.g);
            Ok(Stage::new(c.nodes, c.weights, move |w| {
                let l = log_script_g(w, g);
                if up {
                    l.exp()
                } else {
                    (-l).exp()
                }
            }))
        })
        .collect::<Result<_>>()?;
    let first = &stages[0];
    let left = CMat::from_fn(us.len(), first.len(), |a, al| {
        first.mass[al] * (-first.nodes[al] * us[a]).exp()
    });
    let links: Vec<CMat> = (1..n)
        .map(|j| {
            let sg = spec.signs[j - 1];
            link(&stages[j - 1].nodes, &stages[j], |a, b| sg / (a - b))
        })
        .collect();
    let last = &stages[n - 1];
    let right = CMat::from_fn(vs.len(), last.len(), |b, be| (last.nodes[be] * vs[b]).exp());
    let mut m = chain_eval(&left, &links, &right);
    conj(&mut m, us, vs, mu);
    if m.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        bail!(NonFinite, "kernel chain overflowed");
    }
    Ok(m)
}

/// `∮ 𝒢(w|g)^{±1} e^{wE} dw` along the variable's line, in closed form.
fn var_integral(v: &Var, e: f64) -> f64 {
    let (g, delta) = if v.up { (v.g, -e) } else { (v.g.flip_x(), e) };
    let tm = 1.0 / cbrt(g.t);
    let arg = g.xi + tm * delta;
    let a = ai(g.x * g.x + arg);
    if a == 0.0 {
        return 0.0;
    }
    tm * a * exp(2.0 / 3.0 * g.x * g.x * g.x + g.x * arg)
}

/// Airy form of a chain: `1/(a−b)` becomes `∫_0^∞ e^{−λ(a−b)}dλ` when `Re a > Re b`
/// and `−∫_0^∞ e^{λ(a−b)}dλ` otherwise.
fn airy_block(spec: &ChainSpec, us: &[f64], vs: &[f64], mu: f64, lam: &(Vec<f64>, Vec<f64>)) -> Result<CMat> {
    let n = spec.vars.len();
    let mut dir = Vec::with_capacity(n - 1);
    let mut factor = 1.0;
    for j in 0..n - 1 {
        let (a, b) = (spec.vars[j].at, spec.vars[j + 1].at);
        if a == b {
            bail!(Constraint, "coupled lines coincide at {}", a);
        }
        if a > b {
            dir.push(-1.0);
        } else {
            dir.push(1.0);
            factor = -factor;
        }
        factor *= spec.signs[j];
    }
    let (ln, lw) = lam;
    let c = |x: f64| C64::new(x, 0.0);
    let v0 = &spec.vars[0];
    let left = CMat::from_fn(us.len(), ln.len(), |a, al| {
        c(var_integral(v0, -us[a] + dir[0] * ln[al]) * lw[al])
    });
    let links: Vec<CMat> = (1..n - 1)
        .map(|j| {
            let v = &spec.vars[j];
            CMat::from_fn(ln.len(), ln.len(), |al, be| {
                c(var_integral(v, -dir[j - 1] * ln[al] + dir[j] * ln[be]) * lw[be])
            })
        })
        .collect();
    let vl = &spec.vars[n - 1];
    let right = CMat::from_fn(vs.len(), ln.len(), |b, be| {
        c(var_integral(vl, vs[b] - dir[n - 2] * ln[be]))
    });
    let mut m = chain_eval(&left, &links, &right);
    for z in m.data.iter_mut() {
        *z *= factor;
    }
    conj(&mut m, us, vs, mu);
    Ok(m)
}

fn lambda_rule(s: &LimitSettings) -> (Vec<f64>, Vec<f64>) {
    gl_composite(s.lambda_panels, 8, 0.0, s.lambda_max)
}

/// `∮_{Γ_{−d1}}dζ ∮_{Γ_D}dz 𝒢(z|g) e^{ζv−zu} / (𝒢(ζ|g)(z−ζ))` on `us × vs`.
pub(crate) fn pair_block(g: Txi, us: &[f64], vs: &[f64], settings: &LimitSettings) -> Result<CMat> {
    let ab = &settings.abscissas;
    check_pos(ab)?;
    let spec = ChainSpec {
        vars: vec![z(ab.big_d, g), zeta(ab.d1, g)],
        signs: vec![1.0],
    };
    contour_block(&spec, us, vs, 0.0, settings.line_scale)
}

/// Block `(r, s)` of a basic kernel on `us × vs` by the contour form.
pub fn kernel_block(
    fam: &Family,
    r: usize,
    s: usize,
    us: &[f64],
    vs: &[f64],
    inst: &LimitInstance,
    settings: &LimitSettings,
) -> Result<CMat> {
    match family_spec(fam, r, s, inst, &settings.abscissas)? {
        None => Ok(CMat::zeros(us.len(), vs.len())),
        Some(spec) => contour_block(&spec, us, vs, inst.mu(), settings.line_scale),
    }
}

/// Block `(r, s)` of a basic kernel on `us × vs` by the Airy form.
pub fn airy_kernel_block(
    fam: &Family,
    r: usize,
    s: usize,
    us: &[f64],
    vs: &[f64],
    inst: &LimitInstance,
    settings: &LimitSettings,
) -> Result<CMat> {
    match family_spec(fam, r, s, inst, &settings.abscissas)? {
        None => Ok(CMat::zeros(us.len(), vs.len())),
        Some(spec) => airy_block(&spec, us, vs, inst.mu(), &lambda_rule(settings)),
    }
}

/// One entry `F_fam(r,u; s,v)` by the contour form.
pub fn eval_basic_kernel(
    fam: &Family,
    r: usize,
    u: f64,
    s: usize,
    v: f64,
    inst: &LimitInstance,
    settings: &LimitSettings,
) -> Result<C64> {
    Ok(kernel_block(fam, r, s, &[u], &[v], inst, settings)?[(0, 0)])
}

/// One entry by the Airy form; the kernel is real.
pub fn airy_form_kernel(
    fam: &Family,
    r: usize,
    u: f64,
    s: usize,
    v: f64,
    inst: &LimitInstance,
    settings: &LimitSettings,
) -> Result<f64> {
    Ok(airy_kernel_block(fam, r, s, &[u], &[v], inst, settings)?[(0, 0)].re)
}

/// θ-dependent weight of one basic kernel inside `F(θ)`.
#[derive(Debug, Clone)]
enum Coef {
    /// `−(1+Θ(r|k))(1+Θ(k|s))`
    F0(usize),
    /// `Θ(r|k)`
    F1(usize),
    /// `sign·θ(r|ε)`
    F2(f64, Vec<u8>),
    /// `−Θ(r|k1)(1+Θ(k2|s))`
    F3(usize, usize),
    /// `−sign·θ(r|ε)·scale·(1+Θ(kk|s))`
    F4 {
        sign: f64,
        eps: Vec<u8>,
        kk: usize,
        scale: f64,
    },
    /// `−sign·θ(r|ε)·(1+Θ(kk|s))` on blocks with `s < kk`, zero elsewhere
    F5 { sign: f64, eps: Vec<u8>, kk: usize },
}

impl Coef {
    fn eval(&self, th: &ThetaTools, r: usize, s: usize) -> C64 {
        let one = C64::new(1.0, 0.0);
        match self {
            Coef::F0(k) => -(one + th.big_theta(r, *k)) * (one + th.big_theta(*k, s)),
            Coef::F1(k) => th.big_theta(r, *k),
            Coef::F2(sign, eps) => th.theta_r(r, eps) * *sign,
            Coef::F3(k1, k2) => -th.big_theta(r, *k1) * (one + th.big_theta(*k2, s)),
            Coef::F4 { sign, eps, kk, scale } => -th.theta_r(r, eps) * (one + th.big_theta(*kk, s)) * (*sign * *scale),
            Coef::F5 { sign, eps, kk } => {
                if s < *kk {
                    -th.theta_r(r, eps) * (one + th.big_theta(*kk, s)) * *sign
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        }
    }
}

/// The `(coefficient, kernel)` list of `F = −F⁰ + F¹ + F² − F³ − F⁴`.
fn f_terms(p: usize) -> Vec<(Coef, Family)> {
    let mut out = Vec::new();
    for k in 0..=p {
        out.push((Coef::F0(k), Family::Kk { k }));
        out.push((Coef::F1(k), Family::Kk { k }));
    }
    for k1 in 0..=p {
        for k2 in 0..=p {
            out.push((Coef::F3(k1, k2), Family::Kkk { k1, k2 }));
        }
    }
    for k1 in 0..p {
        for k2 in k1 + 1..=p {
            for eps in sumcond_eps(k1, k2, p) {
                let sign = sign_eps(k1, k2, &eps) * if k2 == p { -1.0 } else { 1.0 };
                let f2 = |fam| (Coef::F2(sign, eps.clone()), fam);
                out.push(f2(Family::J {
                    k1,
                    k2,
                    eps: eps.clone(),
                }));
                out.push(f2(Family::L {
                    k1,
                    k2,
                    eps: eps.clone(),
                }));
                if k1 == p - 1 && k2 == p {
                    out.push(f2(Family::Pp));
                }
                let f4 = |kk, scale, fam| {
                    (
                        Coef::F4 {
                            sign,
                            eps: eps.clone(),
                            kk,
                            scale,
                        },
                        fam,
                    )
                };
                for k3 in 0..=p {
                    out.push(f4(
                        k3,
                        1.0,
                        Family::Lk {
                            k1,
                            k2,
                            k3,
                            eps: eps.clone(),
                        },
                    ));
                }
                if k2 == p {
                    out.push(f4(
                        p,
                        -1.0,
                        Family::Lk {
                            k1,
                            k2,
                            k3: p - 1,
                            eps: eps.clone(),
                        },
                    ));
                } else {
                    out.push(f4(
                        k2,
                        1.0,
                        Family::L {
                            k1,
                            k2,
                            eps: eps.clone(),
                        },
                    ));
                }
                // Lower end of the block-k3 sum in L^ε·B: its ζ-residue is L^ε itself.
                for k3 in 2..k2 {
                    out.push((
                        Coef::F5 {
                            sign,
                            eps: eps.clone(),
                            kk: k3,
                        },
                        Family::L {
                            k1,
                            k2,
                            eps: eps.clone(),
                        },
                    ));
                }
                if k1 == p - 1 && k2 == p {
                    for k3 in 0..=p {
                        out.push(f4(k3, 1.0, Family::Pk { k: k3 }));
                    }
                    out.push(f4(p, -1.0, Family::Pk { k: p - 1 }));
                }
            }
        }
    }
    out
}

/// Nyström grid for an instance: half-lines truncated at `grid_length · t_p^{1/3}`.
pub fn limit_grid(inst: &LimitInstance, settings: &LimitSettings, nodes: usize) -> Result<NystromGrid> {
    let len = settings.grid_length * cbrt(inst.t[inst.p() - 1]);
    NystromGrid::new(inst.p(), len, nodes)
}

/// `F(θ)` sampled on a Nyström grid: θ-free kernel blocks computed once.
pub struct LimitEngine {
    p: usize,
    grid: NystromGrid,
    pieces: Vec<(usize, usize, CMat)>,
    terms: Vec<(Coef, usize)>,
}

impl LimitEngine {
    pub fn new(inst: &LimitInstance, settings: &LimitSettings, grid: NystromGrid) -> Result<Self> {
        inst.validate()?;
        let p = inst.p();
        if p < 2 {
            bail!(Domain, "the kernel F needs p >= 2; use tracy_widom for p = 1");
        }
        if grid.p() != p {
            bail!(Domain, "grid has {} blocks, instance has p = {}", grid.p(), p);
        }
        let mut pieces = Vec::new();
        let mut terms = Vec::new();
        let mut cache: BTreeMap<(Family, usize, usize), Option<usize>> = BTreeMap::new();
        for (coef, fam) in f_terms(p) {
            for r in 1..=p {
                for s in 1..=p {
                    let key = (fam.canonical(), r, s);
                    let idx = match cache.get(&key) {
                        Some(i) => *i,
                        None => {
                            let i = match family_spec(&fam, r, s, inst, &settings.abscissas)? {
                                None => None,
                                Some(spec) => {
                                    let us = &grid.blocks[r - 1].nodes;
                                    let vs = &grid.blocks[s - 1].nodes;
                                    let m = contour_block(&spec, us, vs, inst.mu(), settings.line_scale)?;
                                    pieces.push((r, s, m));
                                    Some(pieces.len() - 1)
                                }
                            };
                            cache.insert(key, i);
                            i
                        }
                    };
                    if let Some(i) = idx {
                        terms.push((coef.clone(), i));
                    }
                }
            }
        }
        Ok(LimitEngine { p, grid, pieces, terms })
    }

    pub fn grid(&self) -> &NystromGrid {
        &self.grid
    }

    /// Number of distinct nonzero kernel blocks.
    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// `F(θ)` on the grid points (unweighted).
    pub fn sample(&self, theta: &[C64]) -> Result<CMat> {
        if theta.len() != self.p - 1 {
            bail!(Domain, "need {} θ-values, got {}", self.p - 1, theta.len());
        }
        let th = ThetaTools::new(theta)?;
        let n = self.grid.size();
        let mut f = CMat::zeros(n, n);
        for (coef, idx) in &self.terms {
            let (r, s, m) = &self.pieces[*idx];
            let c = coef.eval(&th, *r, *s);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let (ro, so) = (self.grid.offset(*r), self.grid.offset(*s));
            for a in 0..m.rows {
                for b in 0..m.cols {
                    f[(ro + a, so + b)] += c * m[(a, b)];
                }
            }
        }
        Ok(f)
    }

    /// `det(I + F(θ))` on the grid.
    pub fn det(&self, theta: &[C64]) -> Result<C64> {
        nystrom_det_sampled(&self.sample(theta)?, &self.grid)
    }
}

/// `det(I + F(θ))` with the default grid size of `settings`.
pub fn fredholm_det_f(theta: &[C64], inst: &LimitInstance, settings: &LimitSettings) -> Result<C64> {
    let grid = limit_grid(inst, settings, settings.grid_nodes)?;
    LimitEngine::new(inst, settings, grid)?.det(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitOutcome {
    pub value: f64,
    pub imag_part: f64,
    /// Nyström points per block.
    pub grid_nodes: usize,
    pub grid_length: f64,
    /// θ-nodes per variable in the final pass (0 for p = 1).
    pub theta_nodes: usize,
    pub change: f64,
}

/// Limiting `P(H(x_k, t_k) <= ξ_k, k = 1..p)`; p = 1 reduces to `F_GUE(ξ + x²)`.
pub fn multitime_cdf<E: Exec>(inst: &LimitInstance, settings: &LimitSettings, exec: &E) -> Result<LimitOutcome> {
    inst.validate()?;
    if inst.p() == 1 {
        let s = inst.xi[0] + inst.x[0] * inst.x[0];
        let v = tracy_widom(s)?;
        return Ok(LimitOutcome {
            value: v,
            imag_part: 0.0,
            grid_nodes: crate::tw::TW_NODES,
            grid_length: 0.0,
            theta_nodes: 0,
            change: 0.0,
        });
    }
    let grid = limit_grid(inst, settings, settings.grid_nodes)?;
    let len = grid.length;
    let eng = LimitEngine::new(inst, settings, grid)?;
    let f = |th: &[C64]| eng.det(th);
    let out = theta_trapezoid(
        inst.p() - 1,
        settings.r_theta,
        settings.theta_nodes,
        settings.tol,
        settings.max_doublings,
        &f,
        exec,
    )?;
    if out.value.im.abs() > settings.imag_tol {
        bail!(
            NonConvergence,
            "imaginary part {} exceeds {}",
            out.value.im,
            settings.imag_tol
        );
    }
    Ok(LimitOutcome {
        value: out.value.re,
        imag_part: out.value.im,
        grid_nodes: settings.grid_nodes,
        grid_length: len,
        theta_nodes: out.nodes,
        change: out.change,
    })
}
