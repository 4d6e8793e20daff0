//! Airy function by steepest-descent contour quadrature, and the kernel 𝒜[t,x,ξ].
//!
//! `Ai(x) = Im(∫_P exp(w³/3 − x w) dw)/π` where `P` leaves the real axis and
//! runs to `∞·e^{iπ/3}`. Three path shapes are used depending on `x`.

use crate::error::{bail, Result};
use crate::integrands::log_script_g;
use crate::math::{cbrt, exp, powf, sqrt, PI};
use crate::params::Txi;
use crate::quad::{gauss_legendre, Contour};
use crate::C64;

/// Range on which `airy` certifies its accuracy.
pub const AIRY_RANGE: (f64, f64) = (-30.0, 30.0);

const PER_PANEL: usize = 20;

/// `Ai(s)` with the documented range check.
pub fn airy(s: f64) -> Result<f64> {
    if !(s >= AIRY_RANGE.0 && s <= AIRY_RANGE.1) {
        bail!(Domain, "Ai argument {} outside [{}, {}]", s, AIRY_RANGE.0, AIRY_RANGE.1);
    }
    Ok(ai_aip(s).0)
}

/// `Ai'(s)` with the documented range check.
pub fn airy_prime(s: f64) -> Result<f64> {
    if !(s >= AIRY_RANGE.0 && s <= AIRY_RANGE.1) {
        bail!(
            Domain,
            "Ai' argument {} outside [{}, {}]",
            s,
            AIRY_RANGE.0,
            AIRY_RANGE.1
        );
    }
    Ok(ai_aip(s).1)
}

/// `Ai(x)` alone, no range check.
pub fn ai(x: f64) -> f64 {
    ai_aip(x).0
}

/// `(Ai(x), Ai'(x))` for any real `x`. Above ~105 both underflow to 0; far
/// below `AIRY_RANGE.0` the cost grows like `|x|^{3/2}`.
pub fn ai_aip(x: f64) -> (f64, f64) {
    if x > 105.0 {
        return (0.0, 0.0);
    }
    let (g, gw) = gauss_legendre(PER_PANEL);
    let panel = |lo: f64, hi: f64, f: &mut dyn FnMut(f64, f64)| {
        let h = 0.5 * (hi - lo);
        for k in 0..PER_PANEL {
            f(lo + h * (g[k] + 1.0), h * gw[k]);
        }
    };
    if x >= 1.0 {
        // w = √x + iy
        let sx = sqrt(x);
        let y_max = sqrt(40.0 / sx);
        let np = 4 + (y_max * y_max * y_max / 9.0) as usize;
        let (mut a, mut d) = (0.0, 0.0);
        for p in 0..np {
            let lo = y_max * p as f64 / np as f64;
            let hi = y_max * (p + 1) as f64 / np as f64;
            panel(lo, hi, &mut |y, w| {
                let e = exp(-sx * y * y) * w;
                let ph = y * y * y / 3.0;
                let (c, s) = (crate::math::cos(ph), crate::math::sin(ph));
                a += e * c;
                d += e * (-sx * c - y * s);
            });
        }
        let z = exp(-2.0 / 3.0 * x * sx) / PI;
        (a * z, d * z)
    } else if x > -1.0 {
        // w = s e^{iπ/3}
        let dir = C64::from_polar(1.0, PI / 3.0);
        let s_max = 5.2;
        let np = 6;
        let mut acc = C64::new(0.0, 0.0);
        let mut dacc = C64::new(0.0, 0.0);
        for p in 0..np {
            let lo = s_max * p as f64 / np as f64;
            let hi = s_max * (p + 1) as f64 / np as f64;
            panel(lo, hi, &mut |s, w| {
                let z = dir * s;
                let v = (z * z * z / 3.0 - z * x).exp() * dir * w;
                acc += v;
                dacc -= v * z;
            });
        }
        (acc.im / PI, dacc.im / PI)
    } else {
        let big_x = -x;
        let sx = sqrt(big_x);
        // segment w = iy, y in [0, √X]: e^f dw = i e^{iφ} dy with φ = X y − y³/3
        let total_phase = 2.0 / 3.0 * big_x * sx;
        let np = 2 + (total_phase / 3.0) as usize;
        let (mut a, mut d) = (0.0, 0.0);
        for p in 0..np {
            let lo = sx * p as f64 / np as f64;
            let hi = sx * (p + 1) as f64 / np as f64;
            panel(lo, hi, &mut |y, w| {
                let ph = big_x * y - y * y * y / 3.0;
                let (c, s) = (crate::math::cos(ph), crate::math::sin(ph));
                a += w * c;
                d += w * y * s;
            });
        }
        // ray w = i√X + s e^{iπ/4}
        let dir = C64::from_polar(1.0, PI / 4.0);
        let cub = C64::from_polar(1.0 / 3.0, 0.75 * PI);
        let f0 = C64::new(0.0, total_phase);
        let s_max = solve_ray_len(sx);
        let np = 4 + (s_max * s_max * s_max / (3.0 * core::f64::consts::SQRT_2) / 3.0) as usize;
        let w0 = C64::new(0.0, sx);
        let mut acc = C64::new(0.0, 0.0);
        let mut dacc = C64::new(0.0, 0.0);
        for p in 0..np {
            let lo = s_max * p as f64 / np as f64;
            let hi = s_max * (p + 1) as f64 / np as f64;
            panel(lo, hi, &mut |s, w| {
                let v = (f0 + C64::new(-sx * s * s, 0.0) + cub * (s * s * s)).exp() * dir * w;
                acc += v;
                dacc -= v * (w0 + dir * s);
            });
        }
        ((a + acc.im) / PI, (d + dacc.im) / PI)
    }
}

fn solve_ray_len(sx: f64) -> f64 {
    // smallest S with √X S² + S³/(3√2) >= 40
    let f = |s: f64| sx * s * s + s * s * s / (3.0 * core::f64::consts::SQRT_2) - 40.0;
    let (mut lo, mut hi) = (0.0, 8.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `Ã[t,x,ξ](δ) = ∮_{Γ_D} 𝒢(w|t,x,ξ) e^{−wδ} dw`, closed form.
pub fn airy_tilde(g: Txi, delta: f64) -> f64 {
    let tm = 1.0 / cbrt(g.t);
    let arg = g.xi + tm * delta;
    tm * ai(g.x * g.x + arg) * exp(2.0 / 3.0 * g.x * g.x * g.x + g.x * arg)
}

/// `𝒜[t,x,ξ](u,v)` by the closed form.
pub fn airy_op(t: f64, x: f64, xi: f64, u: f64, v: f64) -> Result<f64> {
    if !(t > 0.0) {
        bail!(Domain, "airy_op needs t > 0, got {}", t);
    }
    Ok(airy_tilde(Txi::new(t, x, xi), v - u))
}

/// `𝒜[t,x,ξ](u,v)` straight from its defining integral over `Γ_D`.
pub fn airy_op_contour(t: f64, x: f64, xi: f64, u: f64, v: f64, d: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0) {
        bail!(Domain, "airy_op needs t > 0, got {}", t);
    }
    let g = Txi::new(t, x, xi);
    let beta = t * d + powf(t, 2.0 / 3.0) * x;
    let c = Contour::gaussian_vline(d, beta, nodes)?;
    let s = crate::quad::quad(&c, |w| (log_script_g(w, g) + w * (u - v)).exp())?;
    Ok(s.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    // mpmath, 30 digits
    #[allow(clippy::excessive_precision)]
    const REF: &[(f64, f64, f64)] = &[
        (-30.0, -0.087968188456842163, 1.2286206026374851),
        (-20.0, -0.17640612707798469, 0.89286285673647124),
        (-12.5, -0.27627456138116025, -0.41933133041950516),
        (-7.0, 0.18428083525050564, -0.77100816841012655),
        (-5.0, 0.35076100902411432, 0.32719281855444314),
        (-2.0, 0.22740742820168558, 0.61825902074169104),
        (-1.0, 0.53556088329235212, -0.010160567116645209),
        (-0.5, 0.47572809161053959, -0.20408167033954739),
        (0.0, 0.35502805388781724, -0.2588194037928068),
        (0.3, 0.27880648195500492, -0.2451463642190548),
        (1.0, 0.13529241631288142, -0.15914744129679321),
        (2.0, 0.034924130423274379, -0.053090384433653632),
        (3.7, 0.0017455720006099785, -0.0034669407490276271),
        (5.0, 0.00010834442813607442, -0.00024741389086846248),
        (8.0, 4.6922076160992316e-8, -1.3414392979067866e-7),
        (12.0, 1.3931846888753608e-13, -4.8547365549853085e-13),
        (20.0, 1.6916728686705403e-27, -7.586391625748355e-27),
        (30.0, 3.2082175915504956e-49, -1.759876581432726e-48),
    ];

    #[test]
    fn matches_reference() {
        for &(x, a, d) in REF {
            let (ga, gd) = ai_aip(x);
            let sa = a.abs().max(1e-300);
            assert!(
                (ga - a).abs() < 1e-12 * sa.max(1e-3) || (ga - a).abs() < 1e-13 * sa,
                "Ai({}) = {} vs {}",
                x,
                ga,
                a
            );
            assert!(
                (gd - d).abs() < 1e-12 * d.abs().max(1e-3) || (gd - d).abs() < 1e-13 * d.abs(),
                "Ai'({}) = {} vs {}",
                x,
                gd,
                d
            );
        }
    }

    #[test]
    fn range_check() {
        assert!(airy(31.0).is_err());
        assert!(airy(-30.0).is_ok());
    }

    #[test]
    fn op_closed_vs_contour() {
        let a = airy_op(1.3, 0.2, -0.1, 0.3, -0.4).unwrap();
        let b = airy_op_contour(1.3, 0.2, -0.1, 0.3, -0.4, 1.0, 192).unwrap();
        assert!((a - b).abs() < 1e-10, "{} {}", a, b);
    }
}
