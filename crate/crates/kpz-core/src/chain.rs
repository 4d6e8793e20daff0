//! Multi-contour integrals whose integrand couples consecutive variables only,
//! evaluated as products of node matrices.
//!
//! An entry `∮…∮ f(i, w_0) k_1(w_0, w_1) ⋯ k_L(w_{L-1}, w_L) g(j, w_L)` becomes
//! `F K_1 ⋯ K_L Gᵀ` where every matrix already carries its quadrature weights.

use alloc::vec::Vec;

use crate::linalg::CMat;
use crate::C64;

/// Quadrature nodes for one integration variable together with
/// `weight × site factor` at each node.
#[derive(Debug, Clone)]
pub struct Stage {
    pub nodes: Vec<C64>,
    pub mass: Vec<C64>,
}

impl Stage {
    pub fn new(nodes: Vec<C64>, weights: Vec<C64>, site: impl Fn(C64) -> C64) -> Self {
        let mass = nodes.iter().zip(&weights).map(|(&z, &w)| w * site(z)).collect();
        Stage { nodes, mass }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `K[α,β] = coupling(a_α, b_β) · mass_b[β]`.
pub fn link(a: &[C64], b: &Stage, coupling: impl Fn(C64, C64) -> C64) -> CMat {
    CMat::from_fn(a.len(), b.len(), |x, y| coupling(a[x], b.nodes[y]) * b.mass[y])
}

/// `left · links[0] ⋯ links[L-1] · rightᵀ`.
pub fn chain_eval(left: &CMat, links: &[CMat], right: &CMat) -> CMat {
    let mut acc = left.clone();
    for k in links {
        acc = acc.matmul(k);
    }
    mul_transpose(&acc, right)
}

/// `a · bᵀ`.
pub fn mul_transpose(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.cols, b.cols);
    let mut out = CMat::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = &a.data[i * a.cols..(i + 1) * a.cols];
        for j in 0..b.rows {
            let br = &b.data[j * b.cols..(j + 1) * b.cols];
            let mut s = C64::new(0.0, 0.0);
            for (x, y) in ar.iter().zip(br) {
                s += x * y;
            }
            out[(i, j)] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Contour;

    #[test]
    fn chain_matches_tensor_sum() {
        let c0 = Contour::circle(C64::new(0.0, 0.0), 0.5, 8).unwrap();
        let c1 = Contour::circle(C64::new(1.0, 0.0), 0.3, 9).unwrap();
        let c2 = Contour::circle(C64::new(0.0, 0.0), 0.2, 10).unwrap();
        let f = |i: usize, w: C64| (w * (i as f64 + 1.0)).exp();
        let g = |j: usize, w: C64| w.powi(j as i32 + 1);
        let s1 = Stage::new(c1.nodes.clone(), c1.weights.clone(), |z| z * z);
        let k1 = link(&c0.nodes, &s1, |a, b| 1.0 / (b - a));
        let k2 = link(
            &s1.nodes,
            &Stage::new(c2.nodes.clone(), c2.weights.clone(), |_| C64::new(1.0, 0.0)),
            |a, b| 1.0 / (a - b),
        );
        let left = CMat::from_fn(2, c0.len(), |i, a| c0.weights[a] * f(i, c0.nodes[a]));
        let right = CMat::from_fn(3, c2.len(), |j, b| g(j, c2.nodes[b]));
        let m = chain_eval(&left, &[k1, k2], &right);
        for i in 0..2 {
            for j in 0..3 {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..c0.len() {
                    for b in 0..c1.len() {
                        for c in 0..c2.len() {
                            let (x, y, z) = (c0.nodes[a], c1.nodes[b], c2.nodes[c]);
                            s += c0.weights[a] * c1.weights[b] * c2.weights[c] * f(i, x) * y * y / ((y - x) * (y - z))
                                * g(j, z);
                        }
                    }
                }
                assert!((s - m[(i, j)]).norm() < 1e-12 * (1.0 + s.norm()));
            }
        }
    }
}
