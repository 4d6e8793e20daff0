use kpz_core::exact::{multipoint_prob_exact, single_point_prob, ExactSettings};
use kpz_core::exec::Serial;
use kpz_core::growth::mc_multipoint;
use kpz_core::oracle::{dp_exact_prob, truncated_sum_prob};
use kpz_core::params::ModelParams;

fn mp(q: f64, m: &[i64], n: &[i64], a: &[i64]) -> ModelParams {
    ModelParams::new(q, m.to_vec(), n.to_vec(), a.to_vec()).unwrap()
}

#[test]
fn exact_matches_dp() {
    let s = ExactSettings::default();
    for p in [
        mp(0.4, &[1, 2], &[1, 3], &[2, 4]),
        mp(0.6, &[1, 2], &[1, 3], &[2, 4]),
        mp(0.5, &[1, 2, 4], &[2, 3, 4], &[2, 4, 6]),
    ] {
        let v = multipoint_prob_exact(&p, &s, &Serial).unwrap();
        let d = dp_exact_prob(&p).unwrap();
        assert!((v.value - d).abs() < 1e-5, "{:?}: {} vs {}", p, v.value, d);
        assert!(v.imag_part.abs() < 1e-6);
    }
}

#[test]
fn two_routes_agree_p2() {
    let p = mp(0.4, &[1, 2], &[1, 3], &[2, 4]);
    let t = truncated_sum_prob(&p, 30).unwrap();
    let v = multipoint_prob_exact(&p, &ExactSettings::default(), &Serial).unwrap();
    assert!(
        (t.value - v.value).abs() < 1e-6 + t.tail,
        "{} {} (tail {})",
        t.value,
        v.value,
        t.tail
    );
}

#[test]
fn single_point_negative_binomial() {
    // G(1,2) = ω₁ + ω₂ is negative binomial with 2 trials
    let q: f64 = 0.45;
    let s = ExactSettings::default();
    for a in 1..6i64 {
        let want: f64 = (0..a)
            .map(|x| (x as f64 + 1.0) * (1.0 - q).powi(2) * q.powi(x as i32))
            .sum();
        let v = single_point_prob(2, 1, a, q, &s).unwrap();
        assert!((v.value - want).abs() < 1e-10, "a = {}: {} vs {}", a, v.value, want);
    }
}

#[test]
fn monte_carlo_matches_dp() {
    let p = mp(0.4, &[1, 2], &[1, 3], &[2, 4]);
    let d = dp_exact_prob(&p).unwrap();
    let e = mc_multipoint(&p, 200_000, 7, &Serial).unwrap();
    assert!((e.estimate - d).abs() < 4.0 * e.stderr, "{:?} vs {}", e, d);
}
