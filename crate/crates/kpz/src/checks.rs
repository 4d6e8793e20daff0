//! The nine acceptance criteria. Each one returns pass/fail plus the measured
//! discrepancy, so `kpz validate` and the `acceptance` test share one table.

use std::time::Instant;

use kpz_core::airy::ai_aip;
use kpz_core::asymptotic::{
    airy_kernel_block, eval_basic_kernel, kernel_block, multitime_cdf, Abscissas, Family, LimitInstance, LimitSettings,
};
use kpz_core::exact::{multipoint_prob_exact, single_point_prob, ExactEngine, ExactSettings, Scales};
use kpz_core::exec::Exec;
use kpz_core::growth::mc_multipoint;
use kpz_core::integrands::{g_norm, gstar};
use kpz_core::oracle::{dp_exact_prob, verify_sbp, SbpInstance};
use kpz_core::params::{discretize, KpzParams, ModelParams};
use kpz_core::quad::{quad, Contour};
use kpz_core::tw::{single_time_det, tracy_widom, tracy_widom_with, TW_NODES};
use kpz_core::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const COUNT: u8 = 9;

pub const TITLES: [&str; COUNT as usize] = [
    "closed-form single point",
    "exact formula vs DP oracle",
    "Monte Carlo vs DP oracle",
    "invariance certificates",
    "Airy vs contour kernels",
    "Tracy-Widom identity",
    "marginals and monotonicity",
    "finite-T trend to the limit",
    "identity suite",
];

pub const MC_SAMPLES: usize = 1_000_000;
pub const MC_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub runtime_ms: u64,
}

impl Outcome {
    pub fn status(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({} ms)",
            self.status(),
            self.id,
            self.title,
            self.detail,
            self.runtime_ms
        )
    }
}

pub fn run_criterion<E: Exec>(id: u8, exec: &E) -> Outcome {
    let start = Instant::now();
    let r = match id {
        1 => single_point(),
        2 => exact_vs_dp(exec),
        3 => monte_carlo(exec),
        4 => invariance(),
        5 => airy_forms(exec),
        6 => tw_identity(),
        7 => marginals(exec),
        8 => finite_t_trend(exec),
        9 => identities(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (pass, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    let title = TITLES.get(id as usize - 1).copied().unwrap_or("?");
    Outcome {
        id,
        title,
        pass,
        detail,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

type Check = Result<(bool, String)>;

fn mp(q: f64, m: &[i64], n: &[i64], a: &[i64]) -> ModelParams {
    ModelParams::new(q, m.to_vec(), n.to_vec(), a.to_vec()).expect("fixed instance")
}

/// Two p = 2 instances and one p = 3 instance with `n_p <= 4`, `a_p <= 6`.
pub fn oracle_instances() -> Vec<ModelParams> {
    vec![
        mp(0.4, &[1, 2], &[1, 3], &[2, 4]),
        mp(0.6, &[1, 2], &[1, 3], &[2, 4]),
        mp(0.5, &[1, 2, 4], &[2, 3, 4], &[2, 4, 6]),
    ]
}

fn single_point() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for q in [0.3f64, 0.5] {
        for a in 1..=5i64 {
            let v = single_point_prob(1, 1, a, q, &ExactSettings::default())?.value;
            worst = worst.max((v - (1.0 - q.powi(a as i32))).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-10 && secs < 1.0,
        format!("max |P - (1 - q^a)| = {worst:.2e} in {secs:.3} s"),
    ))
}

fn exact_vs_dp<E: Exec>(exec: &E) -> Check {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for p in oracle_instances() {
        let start = Instant::now();
        let v = multipoint_prob_exact(&p, &ExactSettings::default(), exec)?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max((v.value - dp_exact_prob(&p)?).abs());
    }
    Ok((
        worst < 1e-5 && slowest < 300.0,
        format!("max |exact - DP| = {worst:.2e}, slowest {slowest:.2} s"),
    ))
}

fn monte_carlo<E: Exec>(exec: &E) -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for p in oracle_instances() {
        let d = dp_exact_prob(&p)?;
        let est = mc_multipoint(&p, MC_SAMPLES, MC_SEED, exec)?;
        let se = (d * (1.0 - d) / MC_SAMPLES as f64).sqrt();
        worst = worst.max((est.estimate - d).abs() / se);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 4.0 && secs < 60.0,
        format!("max |MC - DP| = {worst:.2} SE over {MC_SAMPLES} samples, {secs:.1} s"),
    ))
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn p3_limit() -> LimitInstance {
    LimitInstance::new(vec![1.0, 1.7, 2.5], vec![0.0, 0.1, -0.1], vec![0.2, -0.1, 0.4]).expect("fixed instance")
}

fn invariance() -> Check {
    let p = mp(0.4, &[2, 3, 5], &[2, 4, 5], &[3, 5, 7]);
    let th = [C64::new(1.2, 1.6), C64::new(-0.6, 1.9)];
    let base = ExactEngine::new(&p, 512, 0.0)?.det(&th)?;
    let mu = rel(ExactEngine::new(&p, 512, 1.0)?.det(&th)?, base);
    let mut sc = Scales::new(&p);
    sc.h_zeta *= 0.85;
    sc.h_z *= 0.85;
    let radii = rel(ExactEngine::with_scales(&p, 512, 0.0, sc)?.det(&th)?, base);

    let (inst, st) = (p3_limit(), LimitSettings::default());
    let mut moved = st;
    moved.abscissas = Abscissas {
        d1: 0.7,
        d2: 1.3,
        d3: 0.9,
        big_d: 1.2,
        z_lo: 0.6,
        z_hi: 2.2,
    };
    let mut lines = 0.0f64;
    for (fam, r, u, s, v) in [
        (Family::Pp, 3, 0.4, 1, -0.3),
        (
            Family::L {
                k1: 0,
                k2: 3,
                eps: vec![1, 2],
            },
            2,
            -0.4,
            3,
            0.5,
        ),
        (
            Family::J {
                k1: 0,
                k2: 2,
                eps: vec![2, 1],
            },
            3,
            0.4,
            2,
            -0.5,
        ),
        (
            Family::Lk {
                k1: 1,
                k2: 3,
                k3: 2,
                eps: vec![2, 2],
            },
            2,
            -0.4,
            1,
            -0.3,
        ),
        (Family::Pk { k: 2 }, 3, 0.4, 1, -0.6),
    ] {
        let a = eval_basic_kernel(&fam, r, u, s, v, &inst, &st)?;
        let b = eval_basic_kernel(&fam, r, u, s, v, &inst, &moved)?;
        lines = lines.max((a - b).norm());
    }
    Ok((
        mu < 1e-8 && radii < 1e-8 && lines < 1e-7,
        format!("mu+1: {mu:.1e} rel, radii: {radii:.1e} rel, (d,D) lines: {lines:.1e} abs"),
    ))
}

fn coords(r: usize, p: usize) -> [f64; 3] {
    if r < p {
        [-0.2, -0.6, -1.1]
    } else {
        [0.2, 0.6, 1.1]
    }
}

/// Largest contour/Airy discrepancy over all blocks, and the largest entry seen.
fn family_gap<E: Exec>(fam: &Family, inst: &LimitInstance, exec: &E) -> Result<(f64, f64)> {
    let p = inst.p();
    let st = LimitSettings::default();
    let blocks = exec.map(p * p, |idx| -> Result<(f64, f64)> {
        let (r, s) = (idx / p + 1, idx % p + 1);
        let (us, vs) = (coords(r, p), coords(s, p));
        let a = kernel_block(fam, r, s, &us, &vs, inst, &st)?;
        let b = airy_kernel_block(fam, r, s, &us, &vs, inst, &st)?;
        let gap = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        Ok((gap, a.max_abs()))
    });
    blocks
        .into_iter()
        .try_fold((0.0f64, 0.0f64), |(g, m), b| b.map(|(bg, bm)| (g.max(bg), m.max(bm))))
}

/// `max |Ai''(x) − x Ai(x)|` on [−10, 5], with `Ai''` from a Richardson
/// extrapolated central difference of `Ai'`.
pub fn airy_ode_residual() -> f64 {
    let d = |x: f64, h: f64| (ai_aip(x + h).1 - ai_aip(x - h).1) / (2.0 * h);
    (0..=150)
        .map(|i| {
            let x = -10.0 + 0.1 * i as f64;
            let h = 1e-3;
            let second = (4.0 * d(x, h / 2.0) - d(x, h)) / 3.0;
            (second - x * ai_aip(x).0).abs()
        })
        .fold(0.0, f64::max)
}

fn airy_forms<E: Exec>(exec: &E) -> Check {
    let p2 = LimitInstance::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![0.3, 0.5])?;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for fam in [
        Family::Pp,
        Family::J {
            k1: 0,
            k2: 1,
            eps: vec![1],
        },
        Family::L {
            k1: 0,
            k2: 2,
            eps: vec![1],
        },
        Family::L {
            k1: 0,
            k2: 2,
            eps: vec![2],
        },
    ] {
        let (gap, size) = family_gap(&fam, &p2, exec)?;
        if size < 1e-8 {
            notes.push(format!("family {} vanished", fam.number()));
            worst = f64::INFINITY;
        }
        worst = worst.max(gap);
    }
    // family (2) needs s < k < r* <= p - 1, so it is identically zero at p = 2
    let (gap2, size2) = family_gap(&Family::Kk { k: 1 }, &p2, exec)?;
    let p4 = LimitInstance::new(vec![1.0, 1.5, 2.0, 2.6], vec![0.0; 4], vec![0.1, 0.0, 0.2, 0.3])?;
    let (gap4, size4) = family_gap(&Family::Kk { k: 2 }, &p4, exec)?;
    if size4 < 1e-8 {
        notes.push("family 2 vanished at p = 4".into());
    }
    worst = worst.max(gap2).max(gap4);
    let ode = airy_ode_residual();
    let pass = worst < 1e-6 && size2 == 0.0 && size4 >= 1e-8 && ode < 1e-8 && notes.is_empty();
    let mut detail = format!(
        "families 1,5,6 at p=2 and 2 at p=4: max gap {worst:.1e}; family 2 at p=2 max |F| = {size2:.1e}; Ai ODE residual {ode:.1e}"
    );
    for n in notes {
        detail.push_str("; ");
        detail.push_str(&n);
    }
    Ok((pass, detail))
}

fn tw_identity() -> Check {
    let st = LimitSettings::default();
    let want = tracy_widom(0.25)?;
    let mut ident = 0.0f64;
    for (t, x, xi) in [(1.0, 0.0, 0.25), (1.0, 0.5, 0.0), (2.0, -0.5, 0.0)] {
        ident = ident.max((single_time_det(t, x, xi, 48, 12.0, &st)? - want).abs());
    }
    let mut dbl = 0.0f64;
    for s in -8..=6 {
        let s = s as f64;
        dbl = dbl.max((tracy_widom_with(s, TW_NODES)? - tracy_widom_with(s, 2 * TW_NODES)?).abs());
    }
    Ok((
        ident < 1e-6 && dbl < 1e-7,
        format!("det(I - K) vs F_GUE: {ident:.1e}; grid doubling on [-8, 6]: {dbl:.1e}"),
    ))
}

fn limit_cdf<E: Exec>(t: &[f64], x: &[f64], xi: &[f64], exec: &E) -> Result<f64> {
    let inst = LimitInstance::new(t.to_vec(), x.to_vec(), xi.to_vec())?;
    Ok(multitime_cdf(&inst, &LimitSettings::default(), exec)?.value)
}

fn marginals<E: Exec>(exec: &E) -> Check {
    let (t, x) = ([1.0, 2.0], [0.0, 0.2]);
    let high = limit_cdf(&t, &x, &[8.0, 0.5], exec)?;
    let one = tracy_widom(0.5 + 0.04)?;
    let low = limit_cdf(&t, &x, &[-6.0, 0.5], exec)?;
    let mut monotone = true;
    for k in 0..2 {
        let mut vals = Vec::new();
        for d in [-1.0, 0.0, 1.0] {
            let mut xi = [0.2, -0.1];
            xi[k] += d;
            vals.push(limit_cdf(&t, &[0.0, 0.3], &xi, exec)?);
        }
        monotone &= vals.windows(2).all(|w| w[0] <= w[1] + 1e-9);
    }
    let gap = (high - one).abs();
    Ok((
        gap < 1e-3 && low < 1e-2 && monotone,
        format!("xi1 = 8 vs p = 1: {gap:.1e}; xi1 = -6: {low:.1e}; 3-point sweeps monotone: {monotone}"),
    ))
}

pub const TREND_T: [f64; 3] = [20.0, 40.0, 80.0];

/// `|exact(T) − limit|` for q = 1/4, t = (1, 2), x = ξ = 0.
pub fn trend_gaps<E: Exec>(exec: &E) -> Result<Vec<f64>> {
    let (t, x, xi) = (vec![1.0, 2.0], vec![0.0, 0.0], vec![0.0, 0.0]);
    let limit = limit_cdf(&t, &x, &xi, exec)?;
    TREND_T
        .iter()
        .map(|&big_t| {
            let k = KpzParams {
                q: 0.25,
                T: big_t,
                t: t.clone(),
                x: x.clone(),
                xi: xi.clone(),
                mu: None,
            };
            let v = multipoint_prob_exact(&discretize(&k)?, &ExactSettings::default(), exec)?.value;
            Ok((v - limit).abs())
        })
        .collect()
}

fn finite_t_trend<E: Exec>(exec: &E) -> Check {
    let start = Instant::now();
    let gaps = trend_gaps(exec)?;
    let secs = start.elapsed().as_secs_f64();
    let trend = gaps.windows(2).all(|w| w[1] <= w[0]);
    let list: Vec<String> = TREND_T
        .iter()
        .zip(&gaps)
        .map(|(t, g)| format!("T={t}: {g:.4e}"))
        .collect();
    Ok((
        trend && secs < 1800.0,
        format!("|exact - limit| {}; {secs:.1} s", list.join(", ")),
    ))
}

fn random_sbp(rng: &mut ChaCha8Rng) -> SbpInstance {
    let n = rng.random_range(1..=3usize);
    let k = rng.random_range(1..=n);
    let mut vals = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (f, g) = (vals(4), vals(3));
    let a = (0..n).map(|_| rng.random_range(0..3i64)).collect();
    let b = (0..n).map(|_| rng.random_range(0..3i64)).collect();
    let big_a = rng.random_range(3..7i64);
    SbpInstance {
        f,
        g,
        y: (0..n as i64).collect(),
        z: (0..n as i64).map(|i| 4 + 2 * i).collect(),
        a,
        b,
        k,
        big_a,
    }
}

/// `quad` for a fallible integrand; the first error wins.
fn quad_try<F: FnMut(C64) -> Result<C64>>(c: &Contour, mut f: F) -> Result<C64> {
    let mut err = None;
    let v = quad(c, |w| {
        f(w).unwrap_or_else(|e| {
            err.get_or_insert(e);
            C64::new(0.0, 0.0)
        })
    })?;
    err.map_or(Ok(v), Err)
}

fn identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sbp = 0.0f64;
    for _ in 0..20 {
        let r = verify_sbp(&random_sbp(&mut rng))?;
        sbp = sbp.max(r.sbpa).max(r.sbpb);
    }

    let mut ind = 0.0f64;
    for r in [1.5, 2.0, 3.0] {
        let c = Contour::circle(C64::new(0.0, 0.0), r, 256)?;
        for l in -4..6 {
            let v = quad(&c, |t| t.powi(l) / (t - 1.0))?;
            ind = ind.max((v - if l >= 0 { 1.0 } else { 0.0 }).norm());
        }
    }

    // ∮ dζ / (G*(ζ|i,m,a)(z − ζ)) = Σ_{k<=N} ∮ dζ z^{-k} / G*(ζ|i−k+1,m,a) on a small circle
    let q = 0.3;
    let small = Contour::circle(C64::new(0.0, 0.0), 0.3, 256)?;
    let mut residue = 0.0f64;
    for (i, extra, m, a, z) in [
        (1, 0, 0, 0, C64::from_polar(0.6, 0.4)),
        (2, 1, 1, 2, C64::from_polar(0.8, 2.0)),
        (4, 2, 2, 1, C64::from_polar(0.55, 5.0)),
    ] {
        let lhs = quad_try(&small, |w| Ok((gstar(w, i, m, a, q)? * (z - w)).inv()))?;
        let mut rhs = C64::new(0.0, 0.0);
        for k in 1..=i + extra {
            rhs += quad_try(&small, |w| Ok(z.powi(-(k as i32)) / gstar(w, i - k + 1, m, a, q)?))?;
        }
        residue = residue.max((lhs - rhs).norm() / (1.0 + lhs.norm()));
    }

    // Σ_{ℓ=n1+1}^{n2} 1/(G(w1|n−ℓ+1,m,a) G(w2|ℓ−n',1,a+1)) telescopes
    let q2: f64 = 0.36;
    let wc = 1.0 - q2.sqrt();
    let mut tele = 0.0f64;
    for (w1, w2, n1, n2, n, np, m, a) in [
        (C64::from_polar(0.4, 1.0), C64::from_polar(0.7, -2.0), 0, 3, 5, 1, 1, 2),
        (C64::from_polar(0.9, 0.3), C64::from_polar(0.2, 2.5), 2, 6, 8, -2, 0, 0),
        (C64::from_polar(0.5, -1.4), C64::from_polar(0.6, 1.4), 1, 2, 3, 0, 2, 3),
    ] {
        let term = |l: i64| -> Result<C64> {
            Ok((g_norm(w1, n - l + 1, m, a, q2)? * g_norm(w2, l - np, 1, a + 1, q2)?).inv())
        };
        let edge =
            |nn: i64| -> Result<C64> { Ok((g_norm(w1, n - nn, m, a, q2)? * g_norm(w2, nn - np, 1, a + 1, q2)?).inv()) };
        let mut lhs = C64::new(0.0, 0.0);
        for l in n1 + 1..=n2 {
            lhs += term(l)?;
        }
        let rhs = (edge(n2)? - edge(n1)?) * wc / (w1 - w2);
        tele = tele.max((lhs - rhs).norm() / (1.0 + lhs.norm()));
    }

    let mut group = 0.0f64;
    for (w, q, t1, t2) in [
        (C64::from_polar(0.3, 0.7), 0.2, (3, 1, -2), (-5, 2, 4)),
        (C64::from_polar(0.85, -2.2), 0.5, (-1, -3, 5), (2, 2, -6)),
        (C64::from_polar(0.6, 3.0), 0.7, (6, 0, 1), (0, -4, -1)),
    ] {
        let (n1, m1, a1) = t1;
        let (n2, m2, a2) = t2;
        group = group.max(rel(
            gstar(w, n1 + n2, m1 + m2, a1 + a2, q)?,
            gstar(w, n1, m1, a1, q)? * gstar(w, n2, m2, a2, q)?,
        ));
        group = group.max(rel(
            g_norm(w, n1 + n2, m1 + m2, a1 + a2, q)?,
            g_norm(w, n1, m1, a1, q)? * g_norm(w, n2, m2, a2, q)?,
        ));
        group = group.max((gstar(w, 0, 0, 0, q)? - 1.0).norm());
    }

    Ok((
        sbp < 1e-12 && ind < 1e-12 && residue < 1e-10 && tele < 1e-10 && group < 1e-10,
        format!(
            "summation by parts {sbp:.1e}; theta indicator {ind:.1e}; residue identity {residue:.1e}; telescoping {tele:.1e}; group property {group:.1e}"
        ),
    ))
}
