//! Dense complex matrices, pivoted LU determinants and Nyström discretization
//! of kernels on the direct sum of half-lines.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{ceil, sqrt};
use crate::quad::gl_interval;
use crate::C64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn matmul(&self, b: &CMat) -> CMat {
        assert_eq!(self.cols, b.rows);
        let mut out = CMat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: C64, other: &CMat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Determinant by LU with partial pivoting; ties go to the lowest row index.
pub fn lu_det(m: &CMat) -> Result<C64> {
    if m.rows != m.cols {
        bail!(Domain, "determinant of a non-square {}x{} matrix", m.rows, m.cols);
    }
    if m.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        bail!(NonFinite, "matrix has non-finite entries");
    }
    let n = m.rows;
    let mut a = m.data.clone();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].norm();
        for i in k + 1..n {
            let v = a[i * n + k].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        let inv = d.inv();
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let t = a[k * n + j];
                a[i * n + j] -= f * t;
            }
        }
    }
    Ok(det)
}

/// Square matrix carrying the block partition `(n_1, …, n_p)`, `n_p = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrixC {
    pub partition: Vec<usize>,
    pub mat: CMat,
}

impl BlockMatrixC {
    pub fn new(partition: Vec<usize>, mat: CMat) -> Result<Self> {
        if partition.is_empty() || partition.windows(2).any(|w| w[1] <= w[0]) || partition[0] == 0 {
            bail!(Monotone, "block partition must be strictly increasing and positive");
        }
        if *partition.last().unwrap() != mat.rows || mat.rows != mat.cols {
            bail!(Domain, "partition end must equal the matrix dimension");
        }
        Ok(BlockMatrixC { partition, mat })
    }

    /// Block of 1-based index `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.partition
            .iter()
            .position(|&n| i <= n)
            .map(|r| r + 1)
            .unwrap_or(self.partition.len())
    }

    /// `M(r,i;s,j)`: the entry when `i` is in block `r` and `j` in block `s`, else 0.
    pub fn block_entry(&self, r: usize, i: usize, s: usize, j: usize) -> C64 {
        if self.block_of(i) == r && self.block_of(j) == s {
            self.mat[(i - 1, j - 1)]
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// One block of a Nyström grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBlock {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature grid on `(−L,0)^{p−1} ⊕ (0,L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NystromGrid {
    pub blocks: Vec<GridBlock>,
    pub length: f64,
}

pub const DEFAULT_GRID_LENGTH: f64 = 12.0;
pub const DEFAULT_GRID_NODES: usize = 48;

impl NystromGrid {
    /// Gauss–Legendre with `per_block` nodes on each truncated half-line.
    pub fn new(p: usize, length: f64, per_block: usize) -> Result<Self> {
        if p == 0 || per_block == 0 || !(length > 0.0) {
            bail!(Domain, "grid needs p >= 1, nodes >= 1 and L > 0");
        }
        let blocks = (1..=p)
            .map(|r| {
                let (lo, hi) = if r < p { (-length, 0.0) } else { (0.0, length) };
                let (nodes, weights) = gl_interval(per_block, lo, hi);
                GridBlock { nodes, weights }
            })
            .collect();
        Ok(NystromGrid { blocks, length })
    }

    /// Grid whose nodes resolve the unit steps of an embedded matrix exactly:
    /// every interval of length `1/ν` gets its own Gauss rule.
    pub fn steps(partition: &[usize], nu_t: f64, per_step: usize) -> Result<Self> {
        let p = partition.len();
        let mut blocks = Vec::with_capacity(p);
        for r in 1..=p {
            let prev = if r == 1 { 0 } else { partition[r - 2] };
            let len = partition[r - 1] - prev;
            let (mut nodes, mut weights) = (Vec::new(), Vec::new());
            for k in 0..len {
                let (lo, hi) = if r < p {
                    (-((len - k) as f64) / nu_t, -((len - k - 1) as f64) / nu_t)
                } else {
                    (k as f64 / nu_t, (k + 1) as f64 / nu_t)
                };
                let (x, w) = gl_interval(per_step, lo, hi);
                nodes.extend(x);
                weights.extend(w);
            }
            blocks.push(GridBlock { nodes, weights });
        }
        let length = blocks
            .iter()
            .flat_map(|b| b.nodes.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        Ok(NystromGrid { blocks, length })
    }

    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.nodes.len()).sum()
    }

    /// `(block r, node, weight)` in global order.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.size());
        for (r, b) in self.blocks.iter().enumerate() {
            for (x, w) in b.nodes.iter().zip(&b.weights) {
                out.push((r + 1, *x, *w));
            }
        }
        out
    }

    /// Offset of block `r` (1-based) in the global ordering.
    pub fn offset(&self, r: usize) -> usize {
        self.blocks[..r - 1].iter().map(|b| b.nodes.len()).sum()
    }

    /// Same layout, node count doubled per block.
    pub fn refined(&self) -> Result<Self> {
        let p = self.p();
        let per = self.blocks[0].nodes.len() * 2;
        Self::new(p, self.length, per)
    }
}

/// `det(I + W^{1/2} K W^{1/2})` for a kernel `K(r,u;s,v)`.
pub fn nystrom_det<K: Fn(usize, f64, usize, f64) -> C64>(kernel: K, grid: &NystromGrid) -> Result<C64> {
    let pts = grid.points();
    let n = pts.len();
    let mut m = CMat::identity(n);
    for (a, &(r, u, wu)) in pts.iter().enumerate() {
        for (b, &(s, v, wv)) in pts.iter().enumerate() {
            m[(a, b)] += kernel(r, u, s, v) * sqrt(wu * wv);
        }
    }
    lu_det(&m)
}

/// Same as `nystrom_det` for a kernel already sampled on the grid points.
pub fn nystrom_det_sampled(k: &CMat, grid: &NystromGrid) -> Result<C64> {
    let w: Vec<f64> = grid.points().iter().map(|p| sqrt(p.2)).collect();
    let n = w.len();
    if k.rows != n || k.cols != n {
        bail!(Domain, "sampled kernel is {}x{}, grid has {} points", k.rows, k.cols, n);
    }
    let mut m = CMat::identity(n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] += k[(a, b)] * (w[a] * w[b]);
        }
    }
    lu_det(&m)
}

/// Step kernel `F(r,u;s,v) = ν M(r, n_{r*}+⌈νu⌉; s, n_{s*}+⌈νv⌉)`, zero off-range.
pub fn embed_discrete(m: &BlockMatrixC, nu_t: f64) -> impl Fn(usize, f64, usize, f64) -> C64 + '_ {
    let p = m.partition.len();
    let index = move |r: usize, u: f64| -> Option<usize> {
        let rs = r.min(p - 1);
        let base = if rs == 0 { 0 } else { m.partition[rs - 1] } as i64;
        let i = base + ceil(nu_t * u) as i64;
        let lo = if r == 1 { 0 } else { m.partition[r - 2] } as i64;
        let hi = m.partition[r - 1] as i64;
        if i > lo && i <= hi {
            Some(i as usize)
        } else {
            None
        }
    };
    move |r, u, s, v| match (index(r, u), index(s, v)) {
        (Some(i), Some(j)) => m.mat[(i - 1, j - 1)] * nu_t,
        _ => C64::new(0.0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn det_small() {
        assert_eq!(lu_det(&CMat::identity(4)).unwrap(), c(1.0, 0.0));
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        d[(1, 1)] = c(0.0, 3.0);
        assert!((lu_det(&d).unwrap() - c(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn det_vs_cofactor() {
        let m = CMat::from_fn(3, 3, |i, j| {
            c((i * 3 + j) as f64 * 0.37 - 1.1, ((i + 2 * j) % 3) as f64 - 0.4)
        });
        let e = |i, j| m[(i, j)];
        let cof = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
        let d = lu_det(&m).unwrap();
        assert!((d - cof).norm() < 1e-12 * cof.norm());
    }

    #[test]
    fn nonfinite_rejected() {
        let mut m = CMat::identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(lu_det(&m).is_err());
    }

    #[test]
    fn rank_one_kernel() {
        // f = g = exp on (0, L) for p = 1: det = 1 + ∫ e^{2u} du
        let g = NystromGrid::new(1, 1.5, 40).unwrap();
        let d = nystrom_det(|_, u, _, v| c((u + v).exp(), 0.0), &g).unwrap();
        let want = 1.0 + ((3.0f64).exp() - 1.0) / 2.0;
        assert!((d - c(want, 0.0)).norm() < 1e-10);
        let z = nystrom_det(|_, _, _, _| c(0.0, 0.0), &g).unwrap();
        assert_eq!(z, c(1.0, 0.0));
    }

    #[test]
    fn embed_preserves_det() {
        let part = vec![2usize, 4];
        let mat = CMat::from_fn(4, 4, |i, j| {
            c(0.3 * (i as f64 - j as f64).sin() + 0.1 * i as f64, 0.05 * j as f64)
        });
        let bm = BlockMatrixC::new(part.clone(), mat.clone()).unwrap();
        let mut ipm = mat.clone();
        for i in 0..4 {
            ipm[(i, i)] += c(1.0, 0.0);
        }
        let want = lu_det(&ipm).unwrap();
        for nu in [1.0, 2.7] {
            let g = NystromGrid::steps(&part, nu, 3).unwrap();
            let d = nystrom_det(embed_discrete(&bm, nu), &g).unwrap();
            assert!((d - want).norm() < 1e-10, "nu={} {} {}", nu, d, want);
        }
    }
}
