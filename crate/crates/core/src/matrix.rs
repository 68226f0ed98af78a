//! Dense small-matrix linear algebra: the sizes here are tiny (at most ~30x30
//! for adjoint matrices), so everything is plain row-major `Vec<f64>` with
//! straightforward O(n^3) algorithms.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance for linear-algebra identities (reconstruction, orthogonality).
pub const TOL_LIN: f64 = 1e-10;
/// Relative tolerance for exp/log residuals.
pub const TOL_EXP: f64 = 1e-12;
/// Relative tolerance below which a determinant counts as zero.
pub const TOL_DET: f64 = 1e-12;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Construct from row-major entries; rejects NaN/Inf and size mismatches.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("rows and cols must be positive".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Matrix { rows, cols, entries }
    }

    /// Column-major convenience: build from a list of column vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() || cols[0].is_empty() {
            return Err(Error::DimensionMismatch("no columns".into()));
        }
        let rows = cols[0].len();
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Ok(Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i]))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        debug_assert_eq!(col.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, col[i]);
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Frobenius inner product <A, B> = tr(A^T B).
    pub fn frobenius_inner(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> f64 {
        assert!(self.is_square(), "det of non-square matrix");
        let n = self.rows;
        let mut a = self.entries.clone();
        let mut det = 1.0;
        for k in 0..n {
            // pivot
            let mut p = k;
            for i in (k + 1)..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            det *= a[k * n + k];
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        det
    }

    /// Inverse via Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.entries.clone();
        let mut inv = Matrix::identity(n).entries;
        for k in 0..n {
            let mut p = k;
            for i in (k + 1)..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            let scale = self.max_abs().max(1.0);
            if a[p * n + k].abs() <= TOL_DET * scale {
                return Err(Error::SingularMatrix(format!("pivot {} vanishes", k)));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                    inv.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for j in 0..n {
                a[k * n + j] /= pivot;
                inv[k * n + j] /= pivot;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[i * n + k];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[i * n + j] -= f * a[k * n + j];
                    inv[i * n + j] -= f * inv[k * n + j];
                }
            }
        }
        Ok(Matrix { rows: n, cols: n, entries: inv })
    }

    /// Largest singular value, computed as sqrt(lambda_max(A^T A)) with a
    /// deterministic cyclic Jacobi eigensolver. No randomness, so results are
    /// bit-stable across runs.
    pub fn op_norm(&self) -> f64 {
        let ata = self.transpose().mul(self);
        let eigs = symmetric_eigenvalues(&ata);
        eigs.iter().fold(0.0f64, |m, &x| m.max(x.max(0.0))).sqrt()
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    assert!(m.is_square());
    let n = m.rows;
    let mut a = m.entries.clone();
    // Jacobi converges quadratically; 30 sweeps is far beyond what 30x30 needs.
    for _sweep in 0..30 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(1e-300, f64::max);
        if off.sqrt() <= 1e-15 * scale * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Iwasawa-style factorization M = k * diag(a) * n with k orthogonal,
/// a positive, n unit upper triangular.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KanDecomposition {
    pub k: Matrix,
    pub a: Vec<f64>,
    pub n: Matrix,
}

impl KanDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let m = self.k.rows;
        let mut an = self.n.clone();
        for i in 0..m {
            for j in 0..m {
                an.set(i, j, an.get(i, j) * self.a[i]);
            }
        }
        self.k.mul(&an)
    }
}

/// Column-by-column modified Gram-Schmidt with one re-orthogonalization pass.
/// The i-th column of k*diag(a) is the projection of column i of M orthogonal
/// to the previous columns, so the factors carry the geometry of successive
/// orthogonal projections.
pub fn kan_decompose(m: &Matrix) -> Result<KanDecomposition> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "kan_decompose needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let scale = m.max_abs().max(1.0);
    let det = m.det();
    if det.abs() <= TOL_DET * scale.powi(n as i32) {
        return Err(Error::SingularMatrix(format!("|det| = {:.3e}", det.abs())));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let mut u = m.column(j);
        for (i, qi) in q.iter().enumerate() {
            let rij: f64 = dot(&u, qi);
            axpy(&mut u, -rij, qi);
            r.set(i, j, rij);
        }
        // second pass mops up the rounding the first pass left behind
        for (i, qi) in q.iter().enumerate() {
            let c: f64 = dot(&u, qi);
            axpy(&mut u, -c, qi);
            r.set(i, j, r.get(i, j) + c);
        }
        let norm = dot(&u, &u).sqrt();
        if norm <= TOL_DET * scale {
            return Err(Error::SingularMatrix(format!("column {} dependent", j)));
        }
        r.set(j, j, norm);
        u.iter_mut().for_each(|x| *x /= norm);
        q.push(u);
    }
    let k = Matrix::from_columns(&q)?;
    let a: Vec<f64> = (0..n).map(|i| r.get(i, i)).collect();
    let mut nn = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            nn.set(i, j, r.get(i, j) / a[i]);
        }
    }
    Ok(KanDecomposition { k, a, n: nn })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Matrix exponential by scaling-and-squaring with a degree-6 truncated
/// series. The scaled norm is pushed below 1/64, where the degree-6
/// truncation error (~1e-16 relative) is under the exp tolerance.
pub fn matrix_exp(x: &Matrix) -> Result<Matrix> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix_exp needs a square matrix, got {}x{}",
            x.rows, x.cols
        )));
    }
    let eta = x.frobenius_norm();
    let s = if eta > 1.0 / 64.0 {
        (eta * 64.0).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let y = x.scale(1.0 / f64::powi(2.0, s as i32));
    // Horner evaluation of I + Y + Y^2/2 + ... + Y^6/720
    let n = x.rows;
    let id = Matrix::identity(n);
    let mut acc = id.add(&y.scale(1.0 / 6.0)); // innermost: I + Y/6
    for k in (1..=5).rev() {
        acc = id.add(&y.mul(&acc).scale(1.0 / k as f64));
    }
    let mut result = acc;
    for _ in 0..s {
        result = result.mul(&result);
    }
    Ok(result)
}

/// Principal logarithm for matrices near the identity: inverse scaling
/// (Denman-Beavers square roots until ||M - I|| <= 1/4) followed by the
/// Mercator series. Requires ||M - I|| < 1 in operator norm.
pub fn matrix_log(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix_log needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let id = Matrix::identity(n);
    let dist = m.sub(&id).op_norm();
    if !(dist < 1.0) {
        return Err(Error::OutOfConvergenceRegion(format!(
            "||M - I|| = {:.6} >= 1",
            dist
        )));
    }
    let mut a = m.clone();
    let mut s = 0u32;
    while a.sub(&id).op_norm() > 0.25 {
        a = sqrt_denman_beavers(&a)?;
        s += 1;
        if s > 60 {
            return Err(Error::OutOfConvergenceRegion(
                "square-root iteration did not contract".into(),
            ));
        }
    }
    let e = a.sub(&id);
    // log(I + E) = E - E^2/2 + E^3/3 - ...
    let mut term = e.clone();
    let mut log = e.clone();
    for k in 2..=80 {
        term = term.mul(&e);
        let contrib = term.scale(if k % 2 == 0 { -1.0 / k as f64 } else { 1.0 / k as f64 });
        log = log.add(&contrib);
        if term.frobenius_norm() / (k as f64) < 1e-18 {
            break;
        }
    }
    Ok(log.scale(f64::powi(2.0, s as i32)))
}

/// Denman-Beavers iteration for the principal square root.
fn sqrt_denman_beavers(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    let mut y = a.clone();
    let mut z = Matrix::identity(n);
    for _ in 0..60 {
        let y_inv = y.inverse()?;
        let z_inv = z.inverse()?;
        let y_next = y.add(&z_inv).scale(0.5);
        let z_next = z.add(&y_inv).scale(0.5);
        let delta = y_next.sub(&y).frobenius_norm();
        y = y_next;
        z = z_next;
        if delta < 1e-15 * y.frobenius_norm().max(1.0) {
            break;
        }
    }
    Ok(y)
}
