//! Integration over the torus `γ_r^{p-1}` of `f(θ)/∏(θ_k − 1)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::math::PI;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    /// Tensor trapezoid on `|θ_k| = r` with node doubling.
    Trapezoid,
    /// Exact extraction of the Laurent coefficients on `|θ_k| = 1`, using the
    /// known exponent range of `f`.
    Laurent,
    /// Laurent when the exponent box is small, trapezoid otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOutcome {
    pub value: C64,
    /// Nodes per θ-variable in the final pass.
    pub nodes: usize,
    /// Change against the previous pass (0 in Laurent mode).
    pub change: f64,
}

fn sum_complex(v: &[C64]) -> C64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    C64::new(pairwise_sum(&re), pairwise_sum(&im))
}

fn unravel(mut idx: usize, sizes: &[usize], out: &mut [usize]) {
    for (o, &s) in out.iter_mut().zip(sizes) {
        *o = idx % s;
        idx /= s;
    }
}

/// One tensor trapezoid pass with `nodes` points per variable.
pub fn trapezoid_pass<E, F>(dim: usize, radius: f64, nodes: usize, f: &F, exec: &E) -> Result<C64>
where
    E: Exec,
    F: Fn(&[C64]) -> Result<C64> + Sync,
{
    if !(radius > 1.0) {
        bail!(Domain, "θ-contour radius must exceed 1");
    }
    let ring: Vec<C64> = (0..nodes)
        .map(|j| C64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64))
        .collect();
    let factor: Vec<C64> = ring.iter().map(|&t| t / (t - 1.0) / nodes as f64).collect();
    let sizes = vec![nodes; dim];
    let total = nodes.pow(dim as u32);
    let vals = exec.map(total, |idx| {
        let mut ix = vec![0usize; dim];
        unravel(idx, &sizes, &mut ix);
        let th: Vec<C64> = ix.iter().map(|&j| ring[j]).collect();
        let w: C64 = ix.iter().map(|&j| factor[j]).product();
        f(&th).map(|v| v * w)
    });
    let vals: Result<Vec<C64>> = vals.into_iter().collect();
    Ok(sum_complex(&vals?))
}

/// Trapezoid with doubling from `start` nodes until successive passes differ by
/// less than `tol` (absolute), at most `max_doublings` times.
pub fn theta_trapezoid<E, F>(
    dim: usize,
    radius: f64,
    start: usize,
    tol: f64,
    max_doublings: usize,
    f: &F,
    exec: &E,
) -> Result<ThetaOutcome>
where
    E: Exec,
    F: Fn(&[C64]) -> Result<C64> + Sync,
{
    if dim == 0 {
        return Ok(ThetaOutcome {
            value: f(&[])?,
            nodes: 0,
            change: 0.0,
        });
    }
    let mut nodes = start.max(4);
    let mut prev = trapezoid_pass(dim, radius, nodes, f, exec)?;
    for _ in 0..max_doublings {
        nodes *= 2;
        let cur = trapezoid_pass(dim, radius, nodes, f, exec)?;
        let change = (cur - prev).norm();
        if change < tol {
            return Ok(ThetaOutcome {
                value: cur,
                nodes,
                change,
            });
        }
        prev = cur;
    }
    bail!(
        NonConvergence,
        "θ-trapezoid did not settle below {} with {} nodes",
        tol,
        nodes
    )
}

/// `Σ_{ℓ ≥ 0} c_ℓ` for a Laurent polynomial `f(θ) = Σ c_ℓ θ^ℓ` with
/// `lo[k] <= ℓ_k <= hi[k]`, which is the value of the torus integral for any radius > 1.
pub fn theta_laurent<E, F>(lo: &[i64], hi: &[i64], f: &F, exec: &E) -> Result<ThetaOutcome>
where
    E: Exec,
    F: Fn(&[C64]) -> Result<C64> + Sync,
{
    let dim = lo.len();
    if hi.len() != dim || lo.iter().zip(hi).any(|(a, b)| a > b) {
        bail!(Domain, "invalid exponent ranges");
    }
    if dim == 0 {
        return Ok(ThetaOutcome {
            value: f(&[])?,
            nodes: 0,
            change: 0.0,
        });
    }
    let sizes: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| (b - a + 1) as usize).collect();
    // weight of node j in variable k: (1/M) Σ_{ℓ=max(lo,0)}^{hi} ω^{-jℓ}
    let weights: Vec<Vec<C64>> = (0..dim)
        .map(|k| {
            let m = sizes[k];
            (0..m)
                .map(|j| {
                    let mut s = C64::new(0.0, 0.0);
                    for l in lo[k].max(0)..=hi[k] {
                        s += C64::from_polar(1.0, -2.0 * PI * (j as f64) * (l as f64) / m as f64);
                    }
                    s / m as f64
                })
                .collect()
        })
        .collect();
    let total: usize = sizes.iter().product();
    let vals = exec.map(total, |idx| {
        let mut ix = vec![0usize; dim];
        unravel(idx, &sizes, &mut ix);
        let th: Vec<C64> = ix
            .iter()
            .zip(&sizes)
            .map(|(&j, &m)| C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64))
            .collect();
        let w: C64 = ix.iter().enumerate().map(|(k, &j)| weights[k][j]).product();
        f(&th).map(|v| v * w)
    });
    let vals: Result<Vec<C64>> = vals.into_iter().collect();
    Ok(ThetaOutcome {
        value: sum_complex(&vals?),
        nodes: *sizes.iter().max().unwrap(),
        change: 0.0,
    })
}
