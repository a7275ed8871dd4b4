//! Dense symmetric indefinite factorization and sparse triplet assembly.
//!
//! The Newton systems solved here are saddle-point matrices of a few hundred
//! rows, where a dense LDLᵀ with Bunch-Kaufman pivoting is both fast and
//! deterministic (no fill-in ordering heuristics). The factorization reports
//! the inertia of the matrix, which the interior-point loop uses to decide
//! on regularization.

use crate::scalar::Real;

/// Coordinate-format matrix used for constraint Jacobians and Hessians.
///
/// Duplicate entries are additive.
#[derive(Debug, Clone)]
pub struct Triplets<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if val != T::zero() {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(val);
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A·x
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for k in 0..self.vals.len() {
            y[self.rows[k]] += self.vals[k] * x[self.cols[k]];
        }
        y
    }

    /// y = Aᵀ·x
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for k in 0..self.vals.len() {
            y[self.cols[k]] += self.vals[k] * x[self.rows[k]];
        }
        y
    }

    /// Dense copy, summing duplicates.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut a = vec![vec![T::zero(); self.ncols]; self.nrows];
        for k in 0..self.vals.len() {
            a[self.rows[k]][self.cols[k]] += self.vals[k];
        }
        a
    }
}

/// Inertia (eigenvalue sign counts) of a factored symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum PivotBlock {
    Single(usize),
    Double(usize),
}

/// LDLᵀ factorization of a dense symmetric matrix with Bunch-Kaufman
/// partial pivoting. Only the lower triangle of the input is referenced.
#[derive(Debug, Clone)]
pub struct LdltFactor<T> {
    n: usize,
    /// Row-major working array; strictly-lower part holds L, the diagonal
    /// and first subdiagonal of 2x2 blocks hold D.
    w: Vec<T>,
    swaps: Vec<(usize, usize)>,
    blocks: Vec<PivotBlock>,
    inertia: Inertia,
}

impl<T: Real> LdltFactor<T> {
    /// Factors the symmetric matrix given as packed row-major square
    /// storage (`a[i*n + j]`, lower triangle authoritative; the strict
    /// upper triangle is never read).
    pub fn factor(n: usize, a: &[T]) -> Self {
        assert_eq!(a.len(), n * n);
        let mut w = a.to_vec();
        let mut swaps = Vec::new();
        let mut blocks = Vec::new();
        let mut scratch1: Vec<T> = Vec::with_capacity(n);
        let mut scratch2: Vec<T> = Vec::with_capacity(n);
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        let alpha = crate::scalar::lit::<T>((1.0 + 17.0_f64.sqrt()) / 8.0);

        let idx = |i: usize, j: usize| i * n + j;
        let mut k = 0usize;
        while k < n {
            let absakk = w[idx(k, k)].abs();
            // largest off-diagonal magnitude in column k of the trailing block
            let mut imax = k;
            let mut colmax = T::zero();
            for i in (k + 1)..n {
                let v = w[idx(i, k)].abs();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }

            let (kstep, kp) = if absakk.max(colmax) == T::zero() {
                // exactly zero column: nothing to eliminate
                (1, k)
            } else if absakk >= alpha * colmax {
                (1, k)
            } else {
                // largest magnitude in row imax of the trailing block
                let mut rowmax = T::zero();
                for j in k..imax {
                    rowmax = rowmax.max(w[idx(imax, j)].abs());
                }
                for i in (imax + 1)..n {
                    rowmax = rowmax.max(w[idx(i, imax)].abs());
                }
                if absakk * rowmax >= alpha * colmax * colmax {
                    (1, k)
                } else if w[idx(imax, imax)].abs() >= alpha * rowmax {
                    (1, imax)
                } else {
                    (2, imax)
                }
            };

            let kk = if kstep == 2 { k + 1 } else { k };
            if kp != kk {
                swap_sym(&mut w, n, kk, kp);
                swaps.push((kk, kp));
            }

            // rank-1 / rank-2 updates touch only the lower triangle
            if kstep == 1 {
                let d = w[idx(k, k)];
                if d == T::zero() {
                    inertia.zero += 1;
                    for i in (k + 1)..n {
                        w[idx(i, k)] = T::zero();
                    }
                } else {
                    if d > T::zero() {
                        inertia.positive += 1;
                    } else {
                        inertia.negative += 1;
                    }
                    // scaled pivot column in contiguous scratch, update rows
                    // in storage order
                    scratch1.clear();
                    scratch1.extend((0..n).map(|j| if j > k { w[idx(j, k)] / d } else { T::zero() }));
                    for i in (k + 1)..n {
                        let wik = w[idx(i, k)];
                        if wik != T::zero() {
                            let row = &mut w[i * n..i * n + i + 1];
                            for j in (k + 1)..=i {
                                row[j] = row[j] - wik * scratch1[j];
                            }
                        }
                    }
                    for i in (k + 1)..n {
                        w[idx(i, k)] = scratch1[i];
                    }
                }
                blocks.push(PivotBlock::Single(k));
                k += 1;
            } else {
                let a11 = w[idx(k, k)];
                let a21 = w[idx(k + 1, k)];
                let a22 = w[idx(k + 1, k + 1)];
                let det = a11 * a22 - a21 * a21;
                count_2x2(a11, a22, det, &mut inertia);
                if det != T::zero() {
                    // raw pivot columns and their solved multipliers, all in
                    // contiguous scratch; rows update in storage order
                    scratch1.clear();
                    scratch1.extend((0..n).map(|j| if j > k + 1 { w[idx(j, k)] } else { T::zero() }));
                    scratch2.clear();
                    scratch2
                        .extend((0..n).map(|j| if j > k + 1 { w[idx(j, k + 1)] } else { T::zero() }));
                    let mut w1 = vec![T::zero(); n];
                    let mut w2 = vec![T::zero(); n];
                    for i in (k + 2)..n {
                        let p = scratch1[i];
                        let q = scratch2[i];
                        w1[i] = (a22 * p - a21 * q) / det;
                        w2[i] = (a11 * q - a21 * p) / det;
                    }
                    for i in (k + 2)..n {
                        let (f1, f2) = (w1[i], w2[i]);
                        if f1 != T::zero() || f2 != T::zero() {
                            let row = &mut w[i * n..i * n + i + 1];
                            for j in (k + 2)..=i {
                                row[j] = row[j] - f1 * scratch1[j] - f2 * scratch2[j];
                            }
                        }
                    }
                    for i in (k + 2)..n {
                        w[idx(i, k)] = w1[i];
                        w[idx(i, k + 1)] = w2[i];
                    }
                } else {
                    for i in (k + 2)..n {
                        w[idx(i, k)] = T::zero();
                        w[idx(i, k + 1)] = T::zero();
                    }
                }
                blocks.push(PivotBlock::Double(k));
                k += 2;
            }
        }

        LdltFactor {
            n,
            w,
            swaps,
            blocks,
            inertia,
        }
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn is_nonsingular(&self) -> bool {
        self.inertia.zero == 0
    }

    /// Solves A·x = b in place. Requires a nonsingular factorization.
    pub fn solve(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        assert!(self.is_nonsingular(), "singular factorization");
        let n = self.n;
        let idx = |i: usize, j: usize| i * n + j;
        for &(i, j) in &self.swaps {
            b.swap(i, j);
        }
        // forward: L y = b
        for blk in &self.blocks {
            match *blk {
                PivotBlock::Single(k) => {
                    let yk = b[k];
                    for i in (k + 1)..n {
                        b[i] = b[i] - self.w[idx(i, k)] * yk;
                    }
                }
                PivotBlock::Double(k) => {
                    let yk = b[k];
                    let yk1 = b[k + 1];
                    for i in (k + 2)..n {
                        b[i] = b[i] - self.w[idx(i, k)] * yk - self.w[idx(i, k + 1)] * yk1;
                    }
                }
            }
        }
        // diagonal: D z = y
        for blk in &self.blocks {
            match *blk {
                PivotBlock::Single(k) => {
                    b[k] = b[k] / self.w[idx(k, k)];
                }
                PivotBlock::Double(k) => {
                    let a11 = self.w[idx(k, k)];
                    let a21 = self.w[idx(k + 1, k)];
                    let a22 = self.w[idx(k + 1, k + 1)];
                    let det = a11 * a22 - a21 * a21;
                    let (r1, r2) = (b[k], b[k + 1]);
                    b[k] = (a22 * r1 - a21 * r2) / det;
                    b[k + 1] = (a11 * r2 - a21 * r1) / det;
                }
            }
        }
        // backward: Lᵀ x = z
        for blk in self.blocks.iter().rev() {
            match *blk {
                PivotBlock::Single(k) => {
                    let mut acc = b[k];
                    for i in (k + 1)..n {
                        acc = acc - self.w[idx(i, k)] * b[i];
                    }
                    b[k] = acc;
                }
                PivotBlock::Double(k) => {
                    let mut acc0 = b[k];
                    let mut acc1 = b[k + 1];
                    for i in (k + 2)..n {
                        acc0 = acc0 - self.w[idx(i, k)] * b[i];
                        acc1 = acc1 - self.w[idx(i, k + 1)] * b[i];
                    }
                    b[k] = acc0;
                    b[k + 1] = acc1;
                }
            }
        }
        for &(i, j) in self.swaps.iter().rev() {
            b.swap(i, j);
        }
    }
}

fn count_2x2<T: Real>(a11: T, a22: T, det: T, inertia: &mut Inertia) {
    if det < T::zero() {
        // indefinite block, the usual Bunch-Kaufman case
        inertia.positive += 1;
        inertia.negative += 1;
    } else if det > T::zero() {
        if a11 + a22 > T::zero() {
            inertia.positive += 2;
        } else {
            inertia.negative += 2;
        }
    } else {
        inertia.zero += 1;
        if a11 + a22 > T::zero() {
            inertia.positive += 1;
        } else if a11 + a22 < T::zero() {
            inertia.negative += 1;
        } else {
            inertia.zero += 1;
        }
    }
}

/// Symmetric row+column interchange i <-> j (i < j) touching only the
/// lower triangle: leading rows swap, the segment between reflects across
/// the diagonal, the corner element is invariant, trailing rows swap
/// within their columns.
fn swap_sym<T: Real>(w: &mut [T], n: usize, i: usize, j: usize) {
    debug_assert!(i < j);
    for c in 0..i {
        w.swap(i * n + c, j * n + c);
    }
    for r in (i + 1)..j {
        w.swap(r * n + i, j * n + r);
    }
    w.swap(i * n + i, j * n + j);
    for r in (j + 1)..n {
        w.swap(r * n + i, r * n + j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, entries: &[f64]) -> Vec<f64> {
        assert_eq!(entries.len(), n * n);
        entries.to_vec()
    }

    fn mul(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                y[i] += a[i * n + j] * x[j];
            }
        }
        y
    }

    #[test]
    fn solves_antidiagonal_via_2x2_pivot() {
        let a = mat(2, &[0.0, 1.0, 1.0, 0.0]);
        let f = LdltFactor::factor(2, &a);
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 1,
                negative: 1,
                zero: 0
            }
        );
        let mut b = vec![3.0, -5.0];
        f.solve(&mut b);
        assert!((b[0] + 5.0).abs() < 1e-14 && (b[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn detects_singularity() {
        let a = mat(2, &[1.0, 1.0, 1.0, 1.0]);
        let f = LdltFactor::factor(2, &a);
        assert_eq!(f.inertia().zero, 1);
        assert!(!f.is_nonsingular());
    }

    #[test]
    fn inertia_of_permuted_diagonal() {
        // diag(3, -2, 5, -1, 1e-3) under a symmetric permutation
        let diag = [3.0, -2.0, 5.0, -1.0, 1e-3];
        let perm = [4, 2, 0, 3, 1];
        let n = 5;
        let mut a = vec![0.0; n * n];
        for (i, &p) in perm.iter().enumerate() {
            a[i * n + i] = diag[p];
        }
        let f = LdltFactor::factor(n, &a);
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 3,
                negative: 2,
                zero: 0
            }
        );
    }

    #[test]
    fn saddle_point_inertia_and_residual() {
        // [[H, Bᵀ], [B, -δI]] with H spd 3x3, B 2x3 full rank
        let h = [4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0];
        let b_mat = [1.0, 2.0, 0.0, 0.0, 1.0, -1.0];
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..3 {
            for j in 0..3 {
                a[i * n + j] = h[i * 3 + j];
            }
        }
        for r in 0..2 {
            for c in 0..3 {
                a[(3 + r) * n + c] = b_mat[r * 3 + c];
                a[c * n + (3 + r)] = b_mat[r * 3 + c];
            }
        }
        a[3 * n + 3] = -1e-8;
        a[4 * n + 4] = -1e-8;
        let f = LdltFactor::factor(n, &a);
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 3,
                negative: 2,
                zero: 0
            }
        );
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let mut x = b.clone();
        f.solve(&mut x);
        let r = mul(n, &a, &x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-9, "residual {} at {}", r[i] - b[i], i);
        }
    }

    #[test]
    fn random_symmetric_solve_residual() {
        // xorshift-style deterministic pseudo-random fill
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for trial in 0..20 {
            let n = 3 + (trial % 7);
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = 2.0 * next();
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let f = LdltFactor::factor(n, &a);
            if !f.is_nonsingular() {
                continue;
            }
            let inertia = f.inertia();
            assert_eq!(inertia.positive + inertia.negative, n);
            let mut x = b.clone();
            f.solve(&mut x);
            let r = mul(n, &a, &x);
            let scale: f64 = b.iter().fold(1.0, |m, v| m.max(v.abs()));
            for i in 0..n {
                assert!(
                    (r[i] - b[i]).abs() < 1e-9 * scale.max(1.0),
                    "trial {trial}: residual {}",
                    r[i] - b[i]
                );
            }
        }
    }

    #[test]
    fn triplets_matvec_and_transpose() {
        let mut t = Triplets::<f64>::new(2, 3);
        t.push(0, 0, 1.0);
        t.push(0, 2, 2.0);
        t.push(1, 1, -1.0);
        t.push(1, 1, 0.5); // duplicate accumulates
        let y = t.mul_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![7.0, -1.0]);
        let z = t.tr_mul_vec(&[1.0, 1.0]);
        assert_eq!(z, vec![1.0, -0.5, 2.0]);
    }
}
