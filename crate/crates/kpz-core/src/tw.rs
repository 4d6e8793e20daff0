//! GUE Tracy–Widom law and the single-time kernel of the KPZ limit.

use alloc::vec::Vec;

use crate::airy::ai_aip;
use crate::asymptotic::{pair_block, LimitSettings};
use crate::error::{bail, Result};
use crate::linalg::{lu_det, CMat};
use crate::math::{cbrt, sqrt};
use crate::params::Txi;
use crate::quad::gl_interval;
use crate::C64;

pub const TW_RANGE: (f64, f64) = (-10.0, 6.0);
pub const TW_NODES: usize = 64;
/// Right end of the truncated half-line `(s, ∞)`.
const TW_CUTOFF: f64 = 16.0;

/// `K_Ai(x, y) = ∫_0^∞ Ai(x+λ) Ai(y+λ) dλ`.
pub fn airy_kernel(x: f64, y: f64) -> f64 {
    let (ax, dx) = ai_aip(x);
    if x == y {
        return dx * dx - x * ax * ax;
    }
    let (ay, dy) = ai_aip(y);
    (ax * dy - dx * ay) / (x - y)
}

/// `F_GUE(s) = det(I − K_Ai)` on `L²(s, ∞)` with `nodes` Gauss–Legendre points.
pub fn tracy_widom_with(s: f64, nodes: usize) -> Result<f64> {
    if !(s >= TW_RANGE.0 && s <= TW_RANGE.1) {
        bail!(
            Domain,
            "F_GUE is evaluated on [{}, {}], got {}",
            TW_RANGE.0,
            TW_RANGE.1,
            s
        );
    }
    let (x, w) = gl_interval(nodes, s, TW_CUTOFF);
    let sw: Vec<f64> = w.iter().map(|v| sqrt(*v)).collect();
    let m = CMat::from_fn(nodes, nodes, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        C64::new(d - sw[i] * airy_kernel(x[i], x[j]) * sw[j], 0.0)
    });
    Ok(lu_det(&m)?.re)
}

pub fn tracy_widom(s: f64) -> Result<f64> {
    tracy_widom_with(s, TW_NODES)
}

/// The single-time kernel `K(u, v)` in contour form on `us × vs`.
pub fn single_time_kernel(t: f64, x: f64, xi: f64, us: &[f64], vs: &[f64], settings: &LimitSettings) -> Result<CMat> {
    if !(t > 0.0) {
        bail!(Domain, "t must be positive");
    }
    pair_block(Txi::new(t, x, xi), us, vs, settings)
}

/// `det(I − K)` on `L²(0, ∞)`, truncated at `length · t^{1/3}`.
pub fn single_time_det(t: f64, x: f64, xi: f64, nodes: usize, length: f64, settings: &LimitSettings) -> Result<f64> {
    let (u, w) = gl_interval(nodes, 0.0, length * cbrt(t));
    let k = single_time_kernel(t, x, xi, &u, &u, settings)?;
    let sw: Vec<f64> = w.iter().map(|v| sqrt(*v)).collect();
    let m = CMat::from_fn(nodes, nodes, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        C64::new(d, 0.0) - k[(i, j)] * (sw[i] * sw[j])
    });
    Ok(lu_det(&m)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_zero() {
        let a = tracy_widom(0.0).unwrap();
        let b = tracy_widom_with(0.0, 2 * TW_NODES).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 0.9694).abs() < 5e-5, "{}", a);
    }

    #[test]
    fn doubling_and_tails() {
        for s in [-8.0, -4.0, -1.0, 0.0, 2.0, 6.0] {
            let a = tracy_widom(s).unwrap();
            let b = tracy_widom_with(s, 2 * TW_NODES).unwrap();
            assert!((a - b).abs() < 1e-7, "s = {}: {} {}", s, a, b);
        }
        assert!(tracy_widom(6.0).unwrap() > 1.0 - 1e-4);
        assert!(tracy_widom(-8.0).unwrap() < 1e-3);
        assert!(tracy_widom(-10.5).is_err());
        assert!(tracy_widom(f64::NAN).is_err());
    }

    #[test]
    fn monotone() {
        let v: Vec<f64> = (-8..=6).map(|s| tracy_widom(s as f64).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kernel_symmetric() {
        for (x, y) in [(0.3, -1.2), (2.0, 0.5), (-3.0, -3.1)] {
            assert!((airy_kernel(x, y) - airy_kernel(y, x)).abs() < 1e-15);
        }
        // diagonal is the limit of the off-diagonal formula
        let d = airy_kernel(0.7, 0.7);
        assert!((airy_kernel(0.7, 0.7 + 1e-6) - d).abs() < 1e-6);
    }

    #[test]
    fn single_time_identity() {
        let st = LimitSettings::default();
        let want = tracy_widom(0.25).unwrap();
        for (t, x, xi) in [(1.0, 0.0, 0.25), (1.0, 0.5, 0.0), (2.0, -0.5, 0.0)] {
            let v = single_time_det(t, x, xi, 48, 12.0, &st).unwrap();
            assert!((v - want).abs() < 1e-6, "({}, {}, {}): {} vs {}", t, x, xi, v, want);
        }
        assert!(single_time_kernel(0.0, 0.0, 0.0, &[1.0], &[1.0], &st).is_err());
    }
}
