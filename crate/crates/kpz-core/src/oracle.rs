//! Determinant-free ground truth (column transfer-matrix DP) and numeric
//! checks of the summation identities behind the determinantal formula.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::{binom, exp, ln, ln_binom, powi};
use crate::params::ModelParams;

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// Exact `P(G(m_k,n_k) < a_k ∀k)` by evolving the law of the column vector
/// `(G(m,1), …, G(m,n_p))`, capped at `a_p` with an absorbing failure state.
pub fn dp_exact_prob(params: &ModelParams) -> Result<f64> {
    dp_exact_prob_budget(params, DEFAULT_STATE_BUDGET).map(|r| r.0)
}

/// Same, also returning the number of live states.
pub fn dp_exact_prob_budget(params: &ModelParams, budget: usize) -> Result<(f64, usize)> {
    params.validate()?;
    if params.trivially_zero() {
        return Ok((0.0, 0));
    }
    let nn = params.dim();
    let cap = params.a[params.p - 1] as usize;
    let count = binom((cap + nn - 1) as i64, nn as i64);
    if !(count <= budget as f64) {
        bail!(Budget, "DP needs {} states, budget is {}", count, budget);
    }
    let size = count as usize;
    let ranker = Ranker::new(cap, nn);
    let q = params.q;
    // q^k, k < cap+1
    let qpow: Vec<f64> = (0..=cap).map(|k| powi(q, k as i32)).collect();

    let mut mass = vec![0.0f64; size];
    mass[0] = 1.0; // all-zero column; rank of the zero vector is 0
    let mut next = vec![0.0f64; size];
    let mut state = vec![0usize; nn];
    let mut succ = vec![0usize; nn];
    let mut checkpoint = 0usize;
    let m_last = params.m[params.p - 1];
    for col in 1..=m_last {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (idx, &w) in mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            ranker.unrank(idx, &mut state);
            spread(&state, &mut succ, 0, 0, w, q, &qpow, cap, &ranker, &mut next);
        }
        core::mem::swap(&mut mass, &mut next);
        while checkpoint < params.p && params.m[checkpoint] == col {
            let row = params.n[checkpoint] as usize - 1;
            let a = params.a[checkpoint];
            for (idx, w) in mass.iter_mut().enumerate() {
                if *w != 0.0 {
                    ranker.unrank(idx, &mut state);
                    if state[row] as i64 >= a {
                        *w = 0.0;
                    }
                }
            }
            checkpoint += 1;
        }
    }
    let live = mass.iter().filter(|&&v| v != 0.0).count();
    Ok((crate::exec::pairwise_sum(&mass), live))
}

#[allow(clippy::too_many_arguments)]
fn spread(
    old: &[usize],
    new: &mut [usize],
    row: usize,
    below: usize,
    w: f64,
    q: f64,
    qpow: &[f64],
    cap: usize,
    ranker: &Ranker,
    out: &mut [f64],
) {
    if row == old.len() {
        out[ranker.rank(new)] += w;
        return;
    }
    let b = below.max(old[row]);
    // P(ω = k) = (1-q) q^k; values >= cap go to the failure state
    for y in b..cap {
        new[row] = y;
        spread(
            old,
            new,
            row + 1,
            y,
            w * (1.0 - q) * qpow[y - b],
            q,
            qpow,
            cap,
            ranker,
            out,
        );
    }
}

/// Bijection between nondecreasing vectors in `[0,cap)^len` and `0..C(cap+len-1, len)`.
struct Ranker {
    table: Vec<Vec<usize>>,
    cap: usize,
}

impl Ranker {
    fn new(cap: usize, len: usize) -> Self {
        let top = cap + len;
        let mut table = vec![vec![0usize; len + 2]; top + 1];
        for n in 0..=top {
            table[n][0] = 1;
            for k in 1..=len + 1 {
                table[n][k] = if n == 0 {
                    0
                } else {
                    table[n - 1][k - 1] + table[n - 1][k]
                };
            }
        }
        Ranker { table, cap }
    }

    fn rank(&self, y: &[usize]) -> usize {
        // strictly increasing c_j = y_j + j, combinatorial number system
        y.iter().enumerate().map(|(j, &v)| self.table[v + j][j + 1]).sum()
    }

    fn unrank(&self, mut r: usize, y: &mut [usize]) {
        let len = y.len();
        for j in (0..len).rev() {
            let mut c = j;
            while c + 1 < self.cap + len && self.table[c + 1][j + 1] <= r {
                c += 1;
            }
            r -= self.table[c][j + 1];
            y[j] = c - j;
        }
    }
}

/// Negative binomial weight `w_m(x) = C(x+m-1, x)(1-q)^m q^x 1{x>=0}`.
pub fn w_weight(m: i64, x: i64, q: f64) -> f64 {
    if x < 0 || m < 1 {
        return if m == 0 && x == 0 { 1.0 } else { 0.0 };
    }
    let (mu, xu) = (m as u64, x as u64);
    if xu + mu < 60 {
        binom(x + m - 1, x) * powi(1.0 - q, m as i32) * powi(q, x as i32)
    } else {
        exp(ln_binom(xu + mu - 1, xu) + m as f64 * ln(1.0 - q) + x as f64 * ln(q))
    }
}

/// `∇^k w_m(x)`; negative `k` are iterated prefix sums.
pub fn nabla_w(k: i64, m: i64, x: i64, q: f64) -> f64 {
    nabla_at(&|y| w_weight(m, y, q), 0, k, x)
}

/// `∇^k f(x)` for `f` vanishing left of `left`.
pub fn nabla_at(f: &dyn Fn(i64) -> f64, left: i64, k: i64, x: i64) -> f64 {
    if k >= 0 {
        let mut s = 0.0;
        for j in 0..=k {
            let c = binom(k, j);
            let sg = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            s += sg * c * f(x + j);
        }
        s
    } else {
        let kk = -k;
        let mut s = 0.0;
        let mut y = left;
        while y <= x - kk {
            s += binom(x - y - 1, kk - 1) * f(y);
            y += 1;
        }
        s
    }
}

/// Integer-indexed sequence stored on a window `[start, start+len)`.
/// `zero_left` records whether it is known to vanish left of the window;
/// it always vanishes right of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq {
    pub start: i64,
    pub values: Vec<f64>,
    pub zero_left: bool,
}

impl Seq {
    pub fn finite(start: i64, values: Vec<f64>) -> Self {
        Seq {
            start,
            values,
            zero_left: true,
        }
    }

    pub fn at(&self, x: i64) -> f64 {
        let i = x - self.start;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }
}

/// `∇^k f` evaluated on the window `[lo, hi]`.
pub fn nabla_pow(f: &Seq, k: i64, lo: i64, hi: i64) -> Result<Seq> {
    if k < 0 && !f.zero_left {
        bail!(Domain, "inverse difference needs a sequence vanishing to the left");
    }
    let g = |x: i64| f.at(x);
    let values = (lo..=hi).map(|x| nabla_at(&g, f.start, k, x)).collect();
    Ok(Seq {
        start: lo,
        values,
        zero_left: k >= 0 && lo <= f.start - k.max(0),
    })
}

/// `det[∇^{j-i} w_steps(y_j − x_i)]`.
pub fn schutz_determinant(x: &[i64], y: &[i64], steps: i64, q: f64) -> Result<f64> {
    if x.len() != y.len() {
        bail!(Domain, "x and y must have equal length");
    }
    if x.windows(2).any(|w| w[1] < w[0]) || y.windows(2).any(|w| w[1] < w[0]) {
        bail!(Monotone, "schutz_determinant needs nondecreasing x and y");
    }
    if steps < 1 {
        bail!(Domain, "steps must be >= 1");
    }
    let n = x.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = nabla_w(j as i64 - i as i64, steps, y[j] - x[i], q);
        }
    }
    Ok(det_real(&mut m, n))
}

/// Real determinant by partial-pivot LU (consumes the buffer).
pub fn det_real(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[i * n + k].abs() > a[piv * n + k].abs() {
                piv = i;
            }
        }
        if a[piv * n + k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    det
}

/// All nondecreasing integer vectors of length `n` with entries in `[lo, hi]`
/// and, when `bound` is given, entry `row` (0-based) strictly below it.
pub fn weyl_chamber(n: usize, lo: i64, hi: i64, constraint: Option<(usize, i64)>) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(d: usize, from: i64, hi: i64, c: Option<(usize, i64)>, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if d == cur.len() {
            out.push(cur.clone());
            return;
        }
        let top = match c {
            Some((row, b)) if row == d => hi.min(b - 1),
            _ => hi,
        };
        let mut v = from;
        while v <= top {
            cur[d] = v;
            rec(d + 1, v, hi, c, cur, out);
            v += 1;
        }
    }
    if n > 0 {
        rec(0, lo, hi, constraint, &mut cur, &mut out);
    }
    out
}

/// Result of the truncated-sum route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedSum {
    pub value: f64,
    /// `|value(cutoff+5) − value(cutoff)|`.
    pub tail: f64,
    pub terms: usize,
}

pub const DEFAULT_SUM_BUDGET: usize = 20_000_000;

/// Partial sum of the simplified product-of-determinants formula, with each
/// coordinate of `x^r` in `[-cutoff, a_r + cutoff]`.
pub fn truncated_sum_prob(params: &ModelParams, cutoff: i64) -> Result<TruncatedSum> {
    let (v0, t0) = truncated_sum_once(params, cutoff)?;
    let (v1, _) = truncated_sum_once(params, cutoff + 5)?;
    Ok(TruncatedSum {
        value: v0,
        tail: (v1 - v0).abs(),
        terms: t0,
    })
}

fn truncated_sum_once(params: &ModelParams, cutoff: i64) -> Result<(f64, usize)> {
    params.validate()?;
    if params.trivially_zero() {
        return Ok((0.0, 0));
    }
    let q = params.q;
    let nn = params.dim();
    let p = params.p;
    let det = |f: &dyn Fn(usize, usize) -> f64| {
        let mut m = vec![0.0; nn * nn];
        for i in 0..nn {
            for j in 0..nn {
                m[i * nn + j] = f(i + 1, j + 1);
            }
        }
        det_real(&mut m, nn)
    };
    if p == 1 {
        let (m, a) = (params.m[0], params.a[0]);
        let v = det(&|i, j| nabla_w(j as i64 - i as i64 - 1, m, a, q));
        return Ok((v, 1));
    }
    let chambers: Vec<Vec<Vec<i64>>> = (1..p)
        .map(|r| {
            weyl_chamber(
                nn,
                -cutoff,
                params.a[r - 1] + cutoff,
                Some((params.n[r - 1] as usize - 1, params.a[r - 1])),
            )
        })
        .collect();
    let mut work = chambers[0].len();
    for r in 1..chambers.len() {
        work = work.saturating_add(chambers[r - 1].len().saturating_mul(chambers[r].len()));
    }
    if work > DEFAULT_SUM_BUDGET {
        bail!(Budget, "truncated sum needs {} determinant evaluations", work);
    }
    let (n1, m1) = (params.n[0], params.m[0]);
    let mut v: Vec<f64> = chambers[0]
        .iter()
        .map(|x| det(&|i, j| nabla_w(n1 - i as i64, m1, x[j - 1], q)))
        .collect();
    for r in 2..p {
        let dn = params.n[r - 1] - params.n[r - 2];
        let dm = params.m[r - 1] - params.m[r - 2];
        let mut nv = vec![0.0; chambers[r - 1].len()];
        for (b, y) in chambers[r - 1].iter().enumerate() {
            let mut s = 0.0;
            for (a, x) in chambers[r - 2].iter().enumerate() {
                if v[a] != 0.0 {
                    s += v[a] * det(&|i, j| nabla_w(dn, dm, y[j - 1] - x[i - 1], q));
                }
            }
            nv[b] = s;
        }
        v = nv;
    }
    let np1 = params.n[p - 2];
    let dm = params.m[p - 1] - params.m[p - 2];
    let ap = params.a[p - 1];
    let mut total = Vec::with_capacity(v.len());
    for (a, x) in chambers[p - 2].iter().enumerate() {
        if v[a] != 0.0 {
            total.push(v[a] * det(&|i, j| nabla_w(j as i64 - 1 - np1, dm, ap - x[i - 1], q)));
        }
    }
    Ok((crate::exec::pairwise_sum(&total), work))
}

/// Maximum discrepancies of the two summation identities on one random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbpReport {
    pub sbpa: f64,
    pub sbpb: f64,
}

/// Small instance for `verify_sbp`: `f, g` supported on `[0, f.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbpInstance {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub y: Vec<i64>,
    pub z: Vec<i64>,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub k: usize,
    pub big_a: i64,
}

/// Check both summation-by-parts identities by direct enumeration (N <= 3).
pub fn verify_sbp(inst: &SbpInstance) -> Result<SbpReport> {
    let n = inst.y.len();
    if n == 0 || n > 3 || inst.z.len() != n || inst.a.len() != n || inst.b.len() != n {
        bail!(Domain, "verify_sbp supports 1 <= N <= 3 with matching vectors");
    }
    if inst.k < 1 || inst.k > n {
        bail!(Index, "k must lie in 1..=N");
    }
    let fv = |x: i64| {
        if x >= 0 && (x as usize) < inst.f.len() {
            inst.f[x as usize]
        } else {
            0.0
        }
    };
    let gv = |x: i64| {
        if x >= 0 && (x as usize) < inst.g.len() {
            inst.g[x as usize]
        } else {
            0.0
        }
    };
    let df = |k: i64, x: i64| nabla_at(&fv, 0, k, x);
    let dg = |k: i64, x: i64| nabla_at(&gv, 0, k, x);
    let det = |f: &dyn Fn(usize, usize) -> f64| {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = f(i + 1, j + 1);
            }
        }
        det_real(&mut m, n)
    };
    let kmax = inst.a.iter().chain(&inst.b).map(|v| v.abs()).max().unwrap_or(0) + n as i64 + 2;

    // sbpb: sum over z ∈ W_N, z_N < A of det[∇^{j-a_i} g(z_j − y_i)]
    let lo = inst.y.iter().min().unwrap() - kmax - 1;
    let zs = weyl_chamber(n, lo, inst.big_a - 1, None);
    let lhs: f64 = zs
        .iter()
        .map(|z| det(&|i, j| dg(j as i64 - inst.a[i - 1], z[j - 1] - inst.y[i - 1])))
        .sum();
    let rhs = det(&|i, j| dg(j as i64 - 1 - inst.a[i - 1], inst.big_a - inst.y[i - 1]));
    let sbpb = (lhs - rhs).abs();

    // sbpa
    let lo = inst.y.iter().min().unwrap() - kmax - 1;
    let hi = inst.z.iter().max().unwrap() + kmax + 1;
    let xs = weyl_chamber(n, lo, hi, Some((inst.k - 1, inst.big_a)));
    let k = inst.k as i64;
    let mut l = 0.0;
    let mut r = 0.0;
    for x in &xs {
        l += det(&|i, j| df(j as i64 - inst.a[i - 1], x[j - 1] - inst.y[i - 1]))
            * det(&|i, j| dg(inst.b[j - 1] - i as i64, inst.z[j - 1] - x[i - 1]));
        r += det(&|i, j| df(k - inst.a[i - 1], x[j - 1] - inst.y[i - 1]))
            * det(&|i, j| dg(inst.b[j - 1] - k, inst.z[j - 1] - x[i - 1]));
    }
    Ok(SbpReport {
        sbpa: (l - r).abs(),
        sbpb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(q: f64, m: &[i64], n: &[i64], a: &[i64]) -> ModelParams {
        ModelParams::new(q, m.to_vec(), n.to_vec(), a.to_vec()).unwrap()
    }

    #[test]
    fn ranker_roundtrip() {
        let r = Ranker::new(4, 3);
        let mut y = vec![0; 3];
        for idx in 0..20 {
            r.unrank(idx, &mut y);
            assert!(y.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(r.rank(&y), idx);
        }
    }

    #[test]
    fn dp_trivial_cases() {
        let q = 0.37;
        assert!((dp_exact_prob(&mp(q, &[1], &[1], &[1])).unwrap() - (1.0 - q)).abs() < 1e-15);
        let v = dp_exact_prob(&mp(q, &[1, 2], &[1, 2], &[1, 1])).unwrap();
        assert!((v - (1.0 - q).powi(4)).abs() < 1e-15);
        assert_eq!(dp_exact_prob(&mp(q, &[1, 2], &[1, 2], &[0, 3])).unwrap(), 0.0);
    }

    #[test]
    fn dp_negative_binomial() {
        let q = 0.55;
        for m in 1..4 {
            for a in 1..6 {
                let want: f64 = (0..a).map(|x| w_weight(m, x, q)).sum();
                let v = dp_exact_prob(&mp(q, &[m], &[1], &[a])).unwrap();
                assert!((v - want).abs() < 1e-14);
                let v = dp_exact_prob(&mp(q, &[1], &[m], &[a])).unwrap();
                assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn budget() {
        let p = mp(0.5, &[3], &[30], &[40]);
        assert!(matches!(dp_exact_prob(&p), Err(crate::Error::Budget(_))));
    }

    #[test]
    fn nabla_examples() {
        let d0 = Seq::finite(0, vec![1.0]);
        let g = nabla_pow(&d0, 1, -3, 3).unwrap();
        for x in -3..=3 {
            let want = if x == -1 {
                1.0
            } else if x == 0 {
                -1.0
            } else {
                0.0
            };
            assert_eq!(g.at(x), want);
        }
        let h = nabla_pow(&d0, -1, -3, 3).unwrap();
        for x in -3..=3 {
            assert_eq!(h.at(x), if x > 0 { 1.0 } else { 0.0 });
        }
        let bad = Seq {
            start: 0,
            values: vec![1.0],
            zero_left: false,
        };
        assert!(nabla_pow(&bad, -1, 0, 2).is_err());
    }

    #[test]
    fn w_weight_sums() {
        let q = 0.4;
        assert!((w_weight(1, 3, q) - 0.6 * 0.4f64.powi(3)).abs() < 1e-16);
        assert!((w_weight(4, 0, q) - 0.6f64.powi(4)).abs() < 1e-16);
        let s: f64 = (0..200).map(|x| w_weight(3, x, q)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        // log-space branch agrees with the product branch at the boundary
        let a = w_weight(30, 29, q);
        let b = w_weight(30, 30, q) * 30.0 / (59.0 * q);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn schutz_n1() {
        let v = schutz_determinant(&[2], &[5], 3, 0.3).unwrap();
        assert!((v - w_weight(3, 3, 0.3)).abs() < 1e-15);
        assert!(schutz_determinant(&[2, 1], &[5, 6], 3, 0.3).is_err());
    }

    #[test]
    fn truncated_sum_matches_dp() {
        for (m, n, a) in [
            (&[1i64, 2][..], &[1i64, 2][..], &[1i64, 1][..]),
            (&[2, 3], &[1, 2], &[2, 3]),
            (&[2, 4], &[2, 3], &[3, 5]),
            (&[1, 3], &[2, 3], &[2, 2]),
            (&[1, 2, 3], &[1, 2, 3], &[1, 2, 3]),
            (&[1, 3, 4], &[1, 2, 3], &[2, 3, 4]),
        ] {
            let p = mp(0.4, m, n, a);
            let t = truncated_sum_prob(&p, 8).unwrap();
            let d = dp_exact_prob(&p).unwrap();
            assert!((t.value - d).abs() < 1e-10, "{:?} {} {} tail {}", a, t.value, d, t.tail);
        }
    }

    #[test]
    fn sbp_identities() {
        let inst = SbpInstance {
            f: vec![0.3, 0.9, 0.2, 0.5],
            g: vec![0.7, 0.1, 0.4],
            y: vec![0, 1, 3],
            z: vec![4, 6, 7],
            a: vec![1, 2, 3],
            b: vec![1, 2, 3],
            k: 2,
            big_a: 5,
        };
        let r = verify_sbp(&inst).unwrap();
        assert!(r.sbpa < 1e-9 && r.sbpb < 1e-9, "{:?}", r);
    }

    #[test]
    fn p1_determinant_matches_dp() {
        let p = mp(0.5, &[3], &[3], &[5]);
        let t = truncated_sum_prob(&p, 0).unwrap();
        let d = dp_exact_prob(&p).unwrap();
        assert!((t.value - d).abs() < 1e-13, "{} {}", t.value, d);
    }
}
