use kpz_core::airy::airy_op;
use kpz_core::asymptotic::{check_d_order, d_for_eps};
use kpz_core::integrands::{g_norm, gstar, Conjugation};
use kpz_core::linalg::{lu_det, CMat};
use kpz_core::oracle::{dp_exact_prob, verify_sbp, SbpInstance};
use kpz_core::params::{sumcond_eps, ModelParams};
use kpz_core::quad::{quad, Contour};
use kpz_core::C64;
use proptest::prelude::*;

fn w_strategy() -> impl Strategy<Value = C64> {
    (0.05f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(r, a)| C64::from_polar(r, a))
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gstar_group(w in w_strategy(), q in 0.1f64..0.8, t1 in (-6i64..6, -4i64..4, -6i64..6), t2 in (-6i64..6, -4i64..4, -6i64..6)) {
        prop_assume!((w - C64::new(1.0 - q, 0.0)).norm() > 1e-3);
        let (n1, m1, a1) = t1;
        let (n2, m2, a2) = t2;
        let both = gstar(w, n1 + n2, m1 + m2, a1 + a2, q).unwrap();
        let prod = gstar(w, n1, m1, a1, q).unwrap() * gstar(w, n2, m2, a2, q).unwrap();
        prop_assert!(rel(both, prod) < 1e-10);
        prop_assert!((gstar(w, 0, 0, 0, q).unwrap() - 1.0).norm() < 1e-15);
        let both = g_norm(w, n1 + n2, m1 + m2, a1 + a2, q).unwrap();
        let prod = g_norm(w, n1, m1, a1, q).unwrap() * g_norm(w, n2, m2, a2, q).unwrap();
        prop_assert!(rel(both, prod) < 1e-10);
    }

    #[test]
    fn multiply_identity(w1 in w_strategy(), w2 in w_strategy(), n1 in 0i64..4, len in 1i64..6, n in 3i64..9, np in -3i64..3, m in 0i64..3, a in 0i64..4) {
        // telescoping sum over ℓ with the group property
        let q: f64 = 0.36;
        prop_assume!((w1 - w2).norm() > 0.05);
        let wc = 1.0 - q.sqrt();
        let n2 = n1 + len;
        let mut lhs = C64::new(0.0, 0.0);
        for l in n1 + 1..=n2 {
            lhs += (g_norm(w1, n - l + 1, m, a, q).unwrap() * g_norm(w2, l - np, 1, a + 1, q).unwrap()).inv();
        }
        let term = |nn: i64| (g_norm(w1, n - nn, m, a, q).unwrap() * g_norm(w2, nn - np, 1, a + 1, q).unwrap()).inv();
        let rhs = (term(n2) - term(n1)) * wc / (w1 - w2);
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{} {}", lhs, rhs);
    }

    #[test]
    fn geometric_residue_identity(i in 1i64..5, extra in 0i64..3, m in 0i64..3, a in 0i64..3, zr in 0.5f64..0.9, za in 0.0f64..std::f64::consts::TAU) {
        // ∮ dζ / (G*(ζ|i,m,a)(z − ζ)) = Σ_k ∮ dζ z^{-k} / G*(ζ|i−k+1,m,a)
        let q = 0.3;
        let big_n = i + extra;
        let c = Contour::circle(C64::new(0.0, 0.0), 0.3, 256).unwrap();
        let z = C64::from_polar(zr, za);
        let lhs = quad(&c, |w| (gstar(w, i, m, a, q).unwrap() * (z - w)).inv()).unwrap();
        let mut rhs = C64::new(0.0, 0.0);
        for k in 1..=big_n {
            rhs += quad(&c, |w| z.powi(-(k as i32)) / gstar(w, i - k + 1, m, a, q).unwrap()).unwrap();
        }
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{} {}", lhs, rhs);
    }

    #[test]
    fn d_rule_respects_eps(eps in prop::collection::vec(1u8..=2, 1..6), k1 in 0usize..6, span in 1usize..6) {
        let p = eps.len() + 1;
        prop_assume!(k1 + span <= p);
        let d = d_for_eps(&eps, k1, k1 + span).unwrap();
        prop_assert!(check_d_order(&eps, k1, k1 + span, &d).is_ok());
        prop_assert!(d.iter().all(|&x| (0.5..=2.5).contains(&x)));
    }

    #[test]
    fn sumcond_matches_brute_force(p in 2usize..6, k1 in 0usize..6, k2 in 1usize..7) {
        prop_assume!(k1 < k2 && k2 <= p);
        let got = sumcond_eps(k1, k2, p);
        let mut want = Vec::new();
        for mask in 0..(1u32 << (p - 1)) {
            let e: Vec<u8> = (0..p - 1).map(|b| if mask >> b & 1 == 1 { 2 } else { 1 }).collect();
            let ok = (1..p).all(|k| {
                let v = e[k - 1];
                (k >= k1.max(1) || v == 2) && (k <= k2.min(p - 1) || v == 1)
            });
            if ok {
                want.push(e);
            }
        }
        let mut got_s = got.clone();
        got_s.sort();
        want.sort();
        prop_assert_eq!(got_s, want);
    }

    #[test]
    fn theta_indicator(l in -4i32..6, r in 1.2f64..3.0) {
        let c = Contour::circle(C64::new(0.0, 0.0), r, 256).unwrap();
        let v = quad(&c, |t| t.powi(l) / (t - 1.0)).unwrap();
        let want = if l >= 0 { 1.0 } else { 0.0 };
        prop_assert!((v - C64::new(want, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn airy_op_shift(u in -2.0f64..2.0, v in -2.0f64..2.0, c in -1.0f64..1.0, t in 0.5f64..3.0) {
        let a = airy_op(t, 0.2, -0.3, u, v).unwrap();
        let b = airy_op(t, 0.2, -0.3, u + c, v + c).unwrap();
        prop_assert!((a - b).abs() < 1e-14 * (1.0 + a.abs()));
    }

    #[test]
    fn det_multiplicative(xs in prop::collection::vec(-1.0f64..1.0, 18)) {
        let a = CMat::from_fn(3, 3, |i, j| C64::new(xs[3 * i + j], 0.5 * xs[9 + 3 * j + i]));
        let b = CMat::from_fn(3, 3, |i, j| C64::new(xs[9 + 3 * i + j], xs[(i + j) % 9]));
        let ab = lu_det(&a.matmul(&b)).unwrap();
        let prod = lu_det(&a).unwrap() * lu_det(&b).unwrap();
        prop_assert!((ab - prod).norm() < 1e-12 * (1.0 + prod.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_telescopes(mu in 0.0f64..3.0, i in 1usize..7, j in 1usize..7, k in 1usize..7) {
        let p = ModelParams::new(0.4, vec![2, 4, 5], vec![2, 4, 6], vec![3, 5, 6]).unwrap();
        let c = Conjugation::new(&p, mu, 1.7);
        prop_assert!((c.c(i, j) * c.c(j, k) - c.c(i, k)).abs() < 1e-12 * c.c(i, k).max(1.0));
    }

    #[test]
    fn dp_is_a_monotone_cdf(q in 0.1f64..0.7, a1 in 1i64..4, a2 in 1i64..5, bump in 0usize..2) {
        let mut a = vec![a1, a1 + a2];
        let p = ModelParams::new(q, vec![1, 2], vec![2, 3], a.clone()).unwrap();
        let v = dp_exact_prob(&p).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        a[bump] += 1;
        if a[0] <= a[1] {
            let w = dp_exact_prob(&ModelParams::new(q, vec![1, 2], vec![2, 3], a).unwrap()).unwrap();
            prop_assert!(w >= v - 1e-13);
        }
    }

    #[test]
    fn sbp_random(f in prop::collection::vec(-1.0f64..1.0, 4), g in prop::collection::vec(-1.0f64..1.0, 3), n in 1usize..4, k in 1usize..4, aa in prop::collection::vec(0i64..3, 3), bb in prop::collection::vec(0i64..3, 3), big_a in 3i64..7) {
        prop_assume!(k <= n);
        let y: Vec<i64> = (0..n as i64).collect();
        let z: Vec<i64> = (0..n as i64).map(|i| 4 + 2 * i).collect();
        let inst = SbpInstance { f, g, y, z, a: aa[..n].to_vec(), b: bb[..n].to_vec(), k, big_a };
        let r = verify_sbp(&inst).unwrap();
        prop_assert!(r.sbpa < 1e-9 && r.sbpb < 1e-9, "{:?}", r);
    }
}
