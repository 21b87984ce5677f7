//! LU factorizations with partial (row) pivoting.
//!
//! [`DenseLu`] is the classical right-looking algorithm on column-major
//! storage. [`BandedLu`] works on a band reordered with reverse
//! Cuthill-McKee, in the same layout LAPACK's `gbtrf` uses: with pivoting the
//! upper bandwidth of `U` grows from `ku` to `kl + ku`.
//!
//! Both reject a pivot whose magnitude does not exceed
//! [`PIVOT_RELATIVE_TOL`] times the largest entry of the input matrix.

use std::collections::VecDeque;

use super::sparse::SparseMatrix;
use super::{CMat, C64};
use crate::error::{Error, Result};

pub const PIVOT_RELATIVE_TOL: f64 = 1e-14;

/// Which operator a solve applies the inverse of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// `A`
    Plain,
    /// `Aᵀ`
    Transpose,
    /// `Aᴴ`
    Adjoint,
}

fn singular(step: usize, pivot: f64, threshold: f64) -> Error {
    Error::SingularMatrix {
        step,
        pivot,
        threshold,
    }
}

#[inline]
fn maybe_conj(v: C64, conj: bool) -> C64 {
    if conj {
        v.conj()
    } else {
        v
    }
}

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    // column-major n x n, unit L below the diagonal, U on and above
    lu: Vec<C64>,
    ipiv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::mismatch("LU factorization", "square matrix", format!("{}x{}", n, a.ncols())));
        }
        let mut lu = a.as_slice().to_vec();
        let max_abs = lu.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let threshold = PIVOT_RELATIVE_TOL * max_abs;
        let mut ipiv = vec![0usize; n];

        for k in 0..n {
            let col = &lu[k * n..(k + 1) * n];
            let (p, pmag) = (k..n)
                .map(|i| (i, col[i].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmag > threshold) {
                return Err(singular(k, pmag.max(0.0), threshold));
            }
            ipiv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(j * n + k, j * n + p);
                }
            }
            let inv = C64::new(1.0, 0.0) / lu[k * n + k];
            for i in k + 1..n {
                lu[k * n + i] *= inv;
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let lcol = &head[k * n..];
            for cj in tail.chunks_exact_mut(n) {
                let akj = cj[k];
                if akj == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    cj[i] -= lcol[i] * akj;
                }
            }
        }
        Ok(Self { n, lu, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.lu[j * self.n + i]
    }

    /// Absolute values of the pivots (diagonal of `U`).
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.at(k, k).norm()).collect()
    }

    pub fn solve_in_place(&self, b: &mut [C64], op: Op) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length");
        match op {
            Op::Plain => {
                for k in 0..n {
                    b.swap(k, self.ipiv[k]);
                }
                for j in 0..n {
                    let bj = b[j];
                    if bj != C64::new(0.0, 0.0) {
                        for i in j + 1..n {
                            b[i] -= self.at(i, j) * bj;
                        }
                    }
                }
                for j in (0..n).rev() {
                    b[j] /= self.at(j, j);
                    let bj = b[j];
                    for i in 0..j {
                        b[i] -= self.at(i, j) * bj;
                    }
                }
            }
            Op::Transpose | Op::Adjoint => {
                let conj = op == Op::Adjoint;
                for j in 0..n {
                    let mut acc = b[j];
                    for i in 0..j {
                        acc -= maybe_conj(self.at(i, j), conj) * b[i];
                    }
                    b[j] = acc / maybe_conj(self.at(j, j), conj);
                }
                for j in (0..n).rev() {
                    let mut acc = b[j];
                    for i in j + 1..n {
                        acc -= maybe_conj(self.at(i, j), conj) * b[i];
                    }
                    b[j] = acc;
                }
                for k in (0..n).rev() {
                    b.swap(k, self.ipiv[k]);
                }
            }
        }
    }
}

/// Band LU of a symmetrically permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
    // new index -> original index
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::mismatch("LU factorization", "square matrix", format!("{}x{}", n, a.ncols())));
        }
        let perm = bandwidth_reducing_order(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            ab[pj * ldab + kv + pi - pj] += v;
        }
        let threshold = PIVOT_RELATIVE_TOL * a.max_abs();
        let mut lu = Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
            perm,
        };
        lu.factor_in_place(threshold)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn factor_in_place(&mut self, threshold: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut pmag = -1.0;
            for i in j..=j + km {
                let m = self.ab[self.idx(i, j)].norm();
                if m > pmag {
                    pmag = m;
                    p = i;
                }
            }
            if !(pmag > threshold) {
                return Err(singular(j, pmag.max(0.0), threshold));
            }
            self.ipiv[j] = p;
            ju = ju.max((p + ku).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let (x, y) = (self.idx(j, c), self.idx(p, c));
                    self.ab.swap(x, y);
                }
            }
            let inv = C64::new(1.0, 0.0) / self.ab[self.idx(j, j)];
            let base = self.idx(j, j);
            for i in 1..=km {
                self.ab[base + i] *= inv;
            }
            for c in j + 1..=ju {
                let ajc = self.ab[self.idx(j, c)];
                if ajc == C64::new(0.0, 0.0) {
                    continue;
                }
                let cbase = self.idx(j, c);
                for i in 1..=km {
                    let l = self.ab[base + i];
                    self.ab[cbase + i] -= l * ajc;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(kl, ku)` of the reordered matrix before fill.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve_in_place(&self, b: &mut [C64], op: Op) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length");
        let mut x: Vec<C64> = self.perm.iter().map(|&o| b[o]).collect();
        self.solve_band(&mut x, op);
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    fn solve_band(&self, b: &mut [C64], op: Op) {
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        match op {
            Op::Plain => {
                for j in 0..n {
                    let km = kl.min(n - 1 - j);
                    b.swap(j, self.ipiv[j]);
                    let bj = b[j];
                    if bj != C64::new(0.0, 0.0) {
                        let base = self.idx(j, j);
                        for i in 1..=km {
                            b[j + i] -= self.ab[base + i] * bj;
                        }
                    }
                }
                for j in (0..n).rev() {
                    b[j] /= self.ab[self.idx(j, j)];
                    let bj = b[j];
                    for i in j.saturating_sub(kv)..j {
                        b[i] -= self.ab[self.idx(i, j)] * bj;
                    }
                }
            }
            Op::Transpose | Op::Adjoint => {
                let conj = op == Op::Adjoint;
                for j in 0..n {
                    let mut acc = b[j];
                    for i in j.saturating_sub(kv)..j {
                        acc -= maybe_conj(self.ab[self.idx(i, j)], conj) * b[i];
                    }
                    b[j] = acc / maybe_conj(self.ab[self.idx(j, j)], conj);
                }
                for j in (0..n.saturating_sub(1)).rev() {
                    let km = kl.min(n - 1 - j);
                    let base = self.idx(j, j);
                    let mut acc = b[j];
                    for i in 1..=km {
                        acc -= maybe_conj(self.ab[base + i], conj) * b[j + i];
                    }
                    b[j] = acc;
                    b.swap(j, self.ipiv[j]);
                }
            }
        }
    }
}

fn symmetric_adjacency(a: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn band_extent(a: &SparseMatrix, inv: impl Fn(usize) -> usize) -> usize {
    a.triplets()
        .map(|(i, j, _)| {
            let (pi, pj) = (inv(i), inv(j));
            pi.abs_diff(pj)
        })
        .max()
        .unwrap_or(0)
}

/// Reverse Cuthill-McKee, kept only if it beats the natural ordering.
fn bandwidth_reducing_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let natural: Vec<usize> = (0..n).collect();
    if n < 3 {
        return natural;
    }
    let rcm = reverse_cuthill_mckee(&symmetric_adjacency(a));
    let mut inv = vec![0usize; n];
    for (new, &old) in rcm.iter().enumerate() {
        inv[old] = new;
    }
    if band_extent(a, |i| inv[i]) < band_extent(a, |i| i) {
        rcm
    } else {
        natural
    }
}

fn bfs_levels(adj: &[Vec<usize>], start: usize, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &u in levels.last().unwrap() {
            for &v in &adj[u] {
                if !mask[v] && !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

pub(crate) fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let mut start = (0..n)
            .filter(|&i| !placed[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        // pseudo-peripheral node search
        let mut depth = bfs_levels(adj, start, &placed).len();
        for _ in 0..8 {
            let levels = bfs_levels(adj, start, &placed);
            let candidate = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&i| (degree[i], i))
                .unwrap();
            let cdepth = bfs_levels(adj, candidate, &placed).len();
            if cdepth > depth {
                depth = cdepth;
                start = candidate;
            } else {
                break;
            }
        }

        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !placed[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                placed[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |i, j| {
            let d = if i == j { 4.0 } else { 0.0 };
            C64::new(rng.random_range(-1.0..1.0) + d, rng.random_range(-1.0..1.0))
        })
    }

    fn check_all_ops(solve: impl Fn(&mut [C64], Op), a: &CMat) {
        let n = a.nrows();
        let y: Vec<C64> = (0..n).map(|i| C64::new(i as f64 * 0.1 - 1.0, 0.5)).collect();
        let yv = nalgebra::DVector::from_column_slice(&y);
        for (op, mat) in [(Op::Plain, a.clone()), (Op::Transpose, a.transpose()), (Op::Adjoint, a.adjoint())] {
            let mut x = y.clone();
            solve(&mut x, op);
            let r = &mat * nalgebra::DVector::from_column_slice(&x) - &yv;
            assert!(r.norm() <= 1e-12 * yv.norm(), "{op:?}: residual {}", r.norm());
        }
    }

    #[test]
    fn dense_lu_solves_all_operators() {
        let a = random_dense(20, 3);
        let lu = DenseLu::factor(&a).unwrap();
        check_all_ops(|b, op| lu.solve_in_place(b, op), &a);
    }

    #[test]
    fn dense_lu_detects_singularity() {
        let mut a = random_dense(5, 1);
        let row = a.row(1).clone_owned();
        a.set_row(3, &(row * C64::new(2.0, 0.0)));
        assert!(matches!(DenseLu::factor(&a), Err(Error::SingularMatrix { .. })));
        assert!(matches!(DenseLu::factor(&CMat::zeros(3, 3)), Err(Error::SingularMatrix { step: 0, .. })));
    }

    #[test]
    fn banded_lu_matches_dense_on_scrambled_band() {
        // a banded matrix hidden behind a random symmetric permutation
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut shuffle: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            shuffle.swap(i, rng.random_range(0..=i));
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 3).min(n) {
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                // weak diagonal forces real pivoting
                let v = if i == j { v * 0.01 } else { v };
                triplets.push((shuffle[i], shuffle[j], v));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, triplets).unwrap();
        let lu = BandedLu::factor(&a).unwrap();
        let (kl, ku) = lu.bandwidths();
        assert!(kl + ku < 20, "RCM failed to recover a narrow band: {kl} {ku}");
        check_all_ops(|b, op| lu.solve_in_place(b, op), &a.to_dense());
    }

    #[test]
    fn banded_lu_detects_singularity() {
        // 1D Laplacian with a zero eigenvalue (Neumann-like)
        let n = 8;
        let mut t = Vec::new();
        for i in 0..n {
            let d = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push((i, i, C64::new(d, 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(-1.0, 0.0)));
                t.push((i + 1, i, C64::new(-1.0, 0.0)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t).unwrap();
        assert!(matches!(BandedLu::factor(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn rcm_orders_a_path_graph_contiguously() {
        let adj = vec![vec![3], vec![2, 4], vec![1, 3], vec![0, 2], vec![1]];
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = [0; 5];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs {
                assert_eq!(pos[u].abs_diff(pos[v]), 1);
            }
        }
    }
}
