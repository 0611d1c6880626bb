//! Small dense linear algebra for spanner construction.
//!
//! Everything here operates on incidence vectors, i.e. a few dozen to a few
//! hundred dimensions, so plain `Vec<f64>` routines with partial pivoting
//! are quicker to verify than pulling in a matrix crate.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Self {
        let nrows = rows.len();
        let mut data = Vec::with_capacity(nrows * cols);
        for row in &rows {
            assert_eq!(row.len(), cols, "ragged row");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: nrows,
            cols,
            data,
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Solves the square system `a * x = rhs` by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular
/// (pivot below `tol`).
pub fn solve(a: &Matrix, rhs: &[f64], tol: f64) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(rhs.len(), a.rows);
    let n = a.rows;
    let mut m = a.clone();
    let mut b = rhs.to_vec();

    for col in 0..n {
        let mut pivot = col;
        let mut best = m.get(col, col).abs();
        for r in col + 1..n {
            let v = m.get(r, col).abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < tol {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot, c));
                m.set(pivot, c, tmp);
            }
            b.swap(col, pivot);
        }
        let diag = m.get(col, col);
        for r in col + 1..n {
            let factor = m.get(r, col) / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - factor * m.get(col, c);
                m.set(r, c, v);
            }
            b[r] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= m.get(row, c) * x[c];
        }
        x[row] = acc / m.get(row, row);
    }
    Some(x)
}

/// Least-squares coefficients expressing `target` in the row basis of
/// `basis` (each row one basis vector), via the normal equations
/// `(B Bᵀ) λ = B target`. The caller guarantees the rows are linearly
/// independent; `None` signals a numerically singular Gram matrix.
pub fn express_in_basis(basis: &Matrix, target: &[f64], tol: f64) -> Option<Vec<f64>> {
    assert_eq!(basis.cols, target.len());
    let r = basis.rows;
    let mut gram = Matrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let v = dot(basis.row(i), basis.row(j));
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let rhs: Vec<f64> = (0..r).map(|i| dot(basis.row(i), target)).collect();
    solve(&gram, &rhs, tol)
}

/// Residual `target − Σ coeffs[i]·basis_i`, for span-membership checks.
pub fn residual(basis: &Matrix, coeffs: &[f64], target: &[f64]) -> Vec<f64> {
    let mut res = target.to_vec();
    for (i, &c) in coeffs.iter().enumerate() {
        for (rv, bv) in res.iter_mut().zip(basis.row(i)) {
            *rv -= c * bv;
        }
    }
    res
}
