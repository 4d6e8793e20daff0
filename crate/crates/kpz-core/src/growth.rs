//! Geometric last-passage percolation: exact sampling, the growth table,
//! the discrete PNG height and a Monte Carlo estimator.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{bail, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::math::{cbrt, floor, ln, powf, round, sqrt};
use crate::params::{check_q, compute_constants, KpzParams, ModelParams};

/// Samples per RNG stream in `mc_multipoint`.
pub const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightField {
    pub q_bits: u64,
    pub width: usize,
    pub height: usize,
    /// `ω(m,n)` at `(m-1)*height + (n-1)`.
    pub omega: Vec<u64>,
    pub seed: u64,
}

impl WeightField {
    pub fn q(&self) -> f64 {
        f64::from_bits(self.q_bits)
    }

    /// 1-based access.
    pub fn get(&self, m: usize, n: usize) -> u64 {
        self.omega[(m - 1) * self.height + (n - 1)]
    }

    pub fn from_values(q: f64, width: usize, height: usize, omega: Vec<u64>) -> Result<Self> {
        check_q(q)?;
        if omega.len() != width * height {
            bail!(Domain, "expected {}x{} weights, got {}", width, height, omega.len());
        }
        Ok(WeightField {
            q_bits: q.to_bits(),
            width,
            height,
            omega,
            seed: 0,
        })
    }
}

/// Uniform on (0, 1].
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF geometric draw, `P(ω = k) = (1-q) q^k`.
#[inline]
fn geometric(rng: &mut ChaCha8Rng, ln_q: f64) -> u64 {
    floor(ln(unit(rng)) / ln_q) as u64
}

pub fn sample_weights(q: f64, width: usize, height: usize, seed: u64) -> Result<WeightField> {
    check_q(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_q = ln(q);
    let omega = (0..width * height).map(|_| geometric(&mut rng, ln_q)).collect();
    Ok(WeightField {
        q_bits: q.to_bits(),
        width,
        height,
        omega,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthTable {
    pub width: usize,
    pub height: usize,
    pub g: Vec<u64>,
}

impl GrowthTable {
    /// `G(m,n)`, 1-based, zero on the boundary.
    pub fn get(&self, m: usize, n: usize) -> u64 {
        if m == 0 || n == 0 {
            0
        } else {
            self.g[(m - 1) * self.height + (n - 1)]
        }
    }
}

pub fn build_table(field: &WeightField) -> GrowthTable {
    let (w, h) = (field.width, field.height);
    let mut g = vec![0u64; w * h];
    for m in 0..w {
        for n in 0..h {
            let left = if m > 0 { g[(m - 1) * h + n] } else { 0 };
            let down = if n > 0 { g[m * h + n - 1] } else { 0 };
            g[m * h + n] = left.max(down) + field.omega[m * h + n];
        }
    }
    GrowthTable { width: w, height: h, g }
}

/// Discrete PNG height `h(x,t)`; at even `x+t` the average of `h(x±1,t)`.
pub fn png_height(table: &GrowthTable, x: i64, t: i64) -> Result<f64> {
    if t == 0 {
        return Ok(0.0);
    }
    if t < 0 || x.abs() >= t {
        bail!(Domain, "png_height needs |x| < t, got x={} t={}", x, t);
    }
    if (x + t).rem_euclid(2) == 1 {
        let m = ((t + x + 1) / 2) as usize;
        let n = ((t - x + 1) / 2) as usize;
        if m > table.width || n > table.height {
            bail!(
                Index,
                "table {}x{} too small for G({},{})",
                table.width,
                table.height,
                m,
                n
            );
        }
        Ok(table.get(m, n) as f64)
    } else {
        Ok(0.5 * (png_height(table, x - 1, t)? + png_height(table, x + 1, t)?))
    }
}

/// `H_T(x,t)`; the lattice time is rounded to the nearest integer and the
/// lattice position to the nearest integer of opposite parity.
pub fn rescaled_height(table: &GrowthTable, kpz: &KpzParams, x: f64, t: f64) -> Result<f64> {
    let c = compute_constants(kpz.q, kpz.T)?;
    if !(t > 0.0) {
        bail!(Domain, "t must be positive");
    }
    let tt = t * kpz.T;
    let (tl, xl) = lattice_point(2.0 * c.c1 * x * powf(tt, 2.0 / 3.0), 2.0 * tt);
    let h = png_height(table, xl, tl)?;
    Ok((h - c.c2 * tt) / (c.c3 * cbrt(tt)))
}

/// Round `(x, t)` to integers with `x + t` odd.
pub fn lattice_point(x: f64, t: f64) -> (i64, i64) {
    let tl = round(t) as i64;
    let mut xl = round(x) as i64;
    if (xl + tl).rem_euclid(2) == 0 {
        xl += if x >= xl as f64 { 1 } else { -1 };
    }
    (tl, xl)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Fraction of samples in the event `{G(m_k,n_k) < a_k ∀k}`. Stream `c` of
/// the ChaCha8 generator seeded by `seed` drives samples
/// `[c·MC_CHUNK, (c+1)·MC_CHUNK)`, so the result does not depend on `exec`.
pub fn mc_multipoint<E: Exec>(params: &ModelParams, nsamples: usize, seed: u64, exec: &E) -> Result<McEstimate> {
    params.validate()?;
    if nsamples == 0 {
        bail!(Domain, "nsamples must be at least 1");
    }
    if params.trivially_zero() {
        return Ok(McEstimate {
            estimate: 0.0,
            stderr: 0.0,
            samples: nsamples,
        });
    }
    let chunks = nsamples.div_ceil(MC_CHUNK);
    let hits = exec.map(chunks, |c| {
        let lo = c * MC_CHUNK;
        let hi = nsamples.min(lo + MC_CHUNK);
        chunk_hits(params, seed, c as u64, hi - lo) as f64
    });
    let total = pairwise_sum(&hits);
    let est = total / nsamples as f64;
    let stderr = sqrt(est * (1.0 - est) / nsamples as f64);
    Ok(McEstimate {
        estimate: est,
        stderr,
        samples: nsamples,
    })
}

fn chunk_hits(params: &ModelParams, seed: u64, stream: u64, count: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let ln_q = ln(params.q);
    let p = params.p;
    let rows = params.n[p - 1] as usize;
    let cols = params.m[p - 1] as usize;
    let mut col = vec![0u64; rows];
    let mut hits = 0;
    for _ in 0..count {
        col.iter_mut().for_each(|v| *v = 0);
        let mut k = 0;
        let mut ok = true;
        // weights are drawn for the full rectangle even after failure, keeping
        // the per-sample draw count fixed
        for m in 1..=cols {
            let mut below = 0u64;
            for v in col.iter_mut() {
                let g = below.max(*v) + geometric(&mut rng, ln_q);
                *v = g;
                below = g;
            }
            while k < p && params.m[k] as usize == m {
                if col[params.n[k] as usize - 1] >= params.a[k] as u64 {
                    ok = false;
                }
                k += 1;
            }
        }
        hits += ok as u64;
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;

    #[test]
    fn hand_recursion() {
        // ω(1,1)=1, ω(1,2)=2, ω(2,1)=0, ω(2,2)=3
        let f = WeightField::from_values(0.5, 2, 2, vec![1, 2, 0, 3]).unwrap();
        let t = build_table(&f);
        assert_eq!(t.get(2, 2), 6);
        assert_eq!(t.get(1, 1), 1);
        assert_eq!(png_height(&t, 0, 1).unwrap(), 1.0);
        assert_eq!(png_height(&t, 5, 0).unwrap(), 0.0);
        assert!(png_height(&t, 2, 2).is_err());
    }

    #[test]
    fn tiny_q_all_zero() {
        for seed in 0..20 {
            let f = sample_weights(1e-9, 10, 10, seed).unwrap();
            assert!(f.omega.iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn lattice_parity() {
        for (x, t) in [(0.3, 4.2), (-1.7, 6.0), (2.5, 7.0), (0.0, 10.0)] {
            let (tl, xl) = lattice_point(x, t);
            assert_eq!((xl + tl).rem_euclid(2), 1);
            assert!((xl as f64 - x).abs() <= 1.5);
        }
    }

    #[test]
    fn mc_single_cell() {
        let p = ModelParams::new(0.5, vec![1], vec![1], vec![1]).unwrap();
        let r = mc_multipoint(&p, 100_000, 7, &Serial).unwrap();
        assert!((r.estimate - 0.5).abs() < 4.0 * r.stderr);
    }
}
