//! Small dense kernels: the block subproblems, KKT oracles and spectral
//! checks are all desk-scale, so plain row-major storage is enough.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// # Panics
    /// If `data.len() != nrows * ncols`.
    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "row-major data has wrong length");
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.ncols, other.nrows);
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Cholesky factorization `A = L Lᵀ`; `None` unless the matrix is
    /// numerically symmetric positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        if self.nrows != self.ncols {
            return None;
        }
        let n = self.nrows;
        let scale = (0..n).map(|i| self[(i, i)].abs()).fold(0.0, f64::max);
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 1e-14 * scale) || !d.is_finite() {
                return None;
            }
            let djj = libm::sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Cholesky { l })
    }

    /// LU factorization with partial pivoting; `None` for a (numerically)
    /// singular matrix.
    pub fn lu(&self) -> Option<Lu> {
        if self.nrows != self.ncols {
            return None;
        }
        let n = self.nrows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if n > 0 && scale == 0.0 {
            return None;
        }
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                let v = a[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= 1e-14 * scale {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[(i, j)] -= factor * a[(k, j)];
                    }
                }
            }
        }
        Some(Lu { lu: a, perm })
    }

    /// Numerical rank from Householder QR with column pivoting. Pivots below
    /// `rel_tol` times the largest pivot are treated as zero.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let qr = PivotedQr::new(self);
        qr.rank(rel_tol)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
    /// ascending. Only the symmetric part is used.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.nrows, self.ncols, "eigenvalues need a square matrix");
        let n = self.nrows;
        let mut a = self.clone();
        for i in 0..n {
            for j in i + 1..n {
                let s = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        let norm: f64 = a.data.iter().map(|v| v * v).sum::<f64>();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off <= 1e-30 * norm || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                    } else {
                        -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                    };
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        eig
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.nrows;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * y[k];
            }
            y[i] = s / self.lu[(i, i)];
        }
        y
    }
}

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    qr: DenseMatrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DenseMatrix) -> Self {
        let (m, n) = (a.nrows, a.ncols);
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut tau = vec![0.0; steps];
        let mut colnorm: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum())
            .collect();
        for k in 0..steps {
            let mut piv = k;
            for j in k + 1..n {
                if colnorm[j] > colnorm[piv] {
                    piv = j;
                }
            }
            if piv != k {
                for i in 0..m {
                    qr.data.swap(i * n + k, i * n + piv);
                }
                colnorm.swap(k, piv);
                perm.swap(k, piv);
            }
            let mut alpha = 0.0;
            for i in k..m {
                alpha += qr[(i, k)] * qr[(i, k)];
            }
            let alpha = libm::sqrt(alpha);
            if alpha == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let beta = if qr[(k, k)] > 0.0 { -alpha } else { alpha };
            let v0 = qr[(k, k)] - beta;
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - qr[(k, k)]) / beta;
            qr[(k, k)] = beta;
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
            }
            for j in k + 1..n {
                colnorm[j] = (k + 1..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            }
        }
        Self { qr, tau, perm }
    }

    /// Absolute values of the diagonal of `R`, in pivot order.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|k| self.qr[(k, k)].abs()).collect()
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let piv = self.pivots();
        let largest = piv.first().copied().unwrap_or(0.0);
        if largest == 0.0 {
            return 0;
        }
        piv.iter().take_while(|&&p| p > rel_tol * largest).count()
    }

    /// Basic least-squares solution of `min ‖A x − b‖`, zeroing the
    /// components beyond the numerical rank.
    pub fn least_squares(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let (m, n) = (self.qr.nrows, self.qr.ncols);
        let mut y = b.to_vec();
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = y[k];
            for i in k + 1..m {
                s += self.qr[(i, k)] * y[i];
            }
            s *= self.tau[k];
            y[k] -= s;
            for i in k + 1..m {
                y[i] -= s * self.qr[(i, k)];
            }
        }
        let r = self.rank(rel_tol);
        let mut sol = vec![0.0; n];
        for i in (0..r).rev() {
            let mut s = y[i];
            for j in i + 1..r {
                s -= self.qr[(i, j)] * sol[j];
            }
            sol[i] = s / self.qr[(i, i)];
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = sol[k];
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = DenseMatrix::from_row_major(2, 2, vec![4.0, 1.0, 1.0, 3.0]);
        let x = a.cholesky().unwrap().solve(&[1.0, 2.0]);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn lu_solves_with_pivoting() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 1.0]);
        let x = a.lu().unwrap().solve(&[2.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(DenseMatrix::zeros(2, 2).lu().is_none());
    }

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(DenseMatrix::from_row_major(1, 2, vec![1.0, 1.0]).rank(1e-10), 1);
        assert_eq!(DenseMatrix::from_row_major(1, 2, vec![0.0, 0.0]).rank(1e-10), 0);
        let a = DenseMatrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(a.rank(1e-10), 1);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = DenseMatrix::from_row_major(3, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 2.0];
        let x = PivotedQr::new(&a).least_squares(&b, 1e-12);
        // normal equations: [3 3; 3 5] x = [5; 6]
        let ata = DenseMatrix::from_row_major(2, 2, vec![3.0, 3.0, 3.0, 5.0]);
        let xe = ata.lu().unwrap().solve(&[5.0, 6.0]);
        assert!((x[0] - xe[0]).abs() < 1e-12 && (x[1] - xe[1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let e = a.symmetric_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-13 && (e[1] - 3.0).abs() < 1e-13);
    }
}
