//! Gauss–Legendre rules and discretized contours. Every contour weight already
//! contains the `1/(2πi)` factor, so `quad` returns the normalized integral `(1/2πi)∮ f`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{cos, sqrt, PI};
use crate::C64;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre on `[a, b]`.
pub fn gl_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

/// Composite Gauss–Legendre: `panels` equal panels of `per` nodes each.
pub fn gl_composite(panels: usize, per: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x0, w0) = gauss_legendre(per);
    let h = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(panels * per);
    let mut w = Vec::with_capacity(panels * per);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for k in 0..per {
            x.push(lo + 0.5 * h * (x0[k] + 1.0));
            w.push(0.5 * h * w0[k]);
        }
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContourKind {
    /// Counterclockwise circle.
    Circle { center: C64, radius: f64 },
    /// Upward vertical segment `abscissa + i[-halfwidth, halfwidth]`.
    VLine { abscissa: f64, halfwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub kind: ContourKind,
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
}

pub const MIN_NODES: usize = 8;
pub const DEFAULT_CIRCLE_NODES: usize = 64;
pub const DEFAULT_LINE_NODES: usize = 96;

impl Contour {
    pub fn circle(center: C64, radius: f64, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            bail!(Domain, "contour needs at least {} nodes", MIN_NODES);
        }
        if !(radius > 0.0) {
            bail!(Domain, "circle radius must be positive");
        }
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let e = C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
            nodes.push(center + e);
            weights.push(e / n as f64);
        }
        Ok(Contour {
            kind: ContourKind::Circle { center, radius },
            nodes,
            weights,
        })
    }

    pub fn vline(abscissa: f64, halfwidth: f64, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            bail!(Domain, "contour needs at least {} nodes", MIN_NODES);
        }
        if !(halfwidth > 0.0) {
            bail!(Domain, "line halfwidth must be positive");
        }
        let (x, w) = gauss_legendre(n);
        let nodes = x.iter().map(|&t| C64::new(abscissa, halfwidth * t)).collect();
        let weights = w.iter().map(|&t| C64::new(halfwidth * t / (2.0 * PI), 0.0)).collect();
        Ok(Contour {
            kind: ContourKind::VLine { abscissa, halfwidth },
            nodes,
            weights,
        })
    }

    /// Vertical line through `abscissa` truncated where a Gaussian envelope
    /// `exp(-beta y^2)` has fallen below `1e-16` of its peak.
    pub fn gaussian_vline(abscissa: f64, beta: f64, n: usize) -> Result<Self> {
        if !(beta > 0.0) {
            bail!(
                Constraint,
                "line at {} has no Gaussian decay (beta = {})",
                abscissa,
                beta
            );
        }
        Self::vline(abscissa, sqrt(36.85 / beta), n)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `∮ f` over the discretized contour.
pub fn quad<F: FnMut(C64) -> C64>(c: &Contour, mut f: F) -> Result<C64> {
    let mut s = C64::new(0.0, 0.0);
    for (w, h) in c.nodes.iter().zip(&c.weights) {
        let v = f(*w);
        if !(v.re.is_finite() && v.im.is_finite()) {
            bail!(NonFinite, "integrand not finite at {}", w);
        }
        s += v * h;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_poly() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(801);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((s - 2.0 * 3f64.sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn circle_residue() {
        let c = Contour::circle(C64::new(0.0, 0.0), 1.0, 64).unwrap();
        let v = quad(&c, |z| z.inv()).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn theta_indicator_integral() {
        for r in [1.5, 2.0, 3.0] {
            let c = Contour::circle(C64::new(0.0, 0.0), r, 128).unwrap();
            for (l, want) in [(0, 1.0), (3, 1.0), (-1, 0.0)] {
                let v = quad(&c, |t| t.powi(l) / (t - 1.0)).unwrap();
                assert!((v - C64::new(want, 0.0)).norm() < 1e-12, "r={} l={} {}", r, l, v);
            }
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(Contour::circle(C64::new(0.0, 0.0), 1.0, 4).is_err());
    }
}
