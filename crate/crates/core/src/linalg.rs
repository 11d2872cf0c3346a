//! Small dense linear algebra: row-major matrices, Gaussian elimination with
//! partial pivoting and a relative zero-pivot rule, affine maps.

use std::fmt;

use crate::error::{Error, Result};

/// A pivot is treated as zero when `|pivot| ≤ PIVOT_TOL · max|entry|`.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    /// Builds a matrix column by column.
    pub fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                m[(i, k)] = self[(i, j)];
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), self.cols);
        for (k, &i) in rows.iter().enumerate() {
            m.data[k * self.cols..(k + 1) * self.cols].copy_from_slice(self.row(i));
        }
        m
    }

    pub fn transpose(&self) -> Matrix {
        let mut m = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut m = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of pivots found by [`echelon`] under the relative pivot rule.
    pub fn rank(&self) -> usize {
        echelon(self).pivots.len()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:.6e}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Reduced row echelon form with the column indices of the pivots.
pub struct Echelon {
    pub reduced: Matrix,
    /// `(row, col)` of each pivot, in order.
    pub pivots: Vec<(usize, usize)>,
}

/// Gauss–Jordan elimination with partial (column-wise) pivoting.
pub fn echelon(m: &Matrix) -> Echelon {
    let mut a = m.clone();
    let tol = PIVOT_TOL * m.max_abs();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        let (p, best) = (r..a.rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            for i in r..a.rows {
                a[(i, c)] = 0.0;
            }
            continue;
        }
        swap_rows(&mut a, r, p);
        let pv = a[(r, c)];
        for j in 0..a.cols {
            a[(r, j)] /= pv;
        }
        for i in 0..a.rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..a.cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    Echelon { reduced: a, pivots }
}

fn swap_rows(a: &mut Matrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..a.cols {
        a.data.swap(i * a.cols + c, j * a.cols + c);
    }
}

/// LU factorization `P·A = L·U` of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl Lu {
    /// Factors `a`; fails with `RankDeficient` on a zero pivot.
    pub fn new(a: &Matrix) -> Result<Lu> {
        if a.rows != a.cols {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let tol = PIVOT_TOL * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= tol || best == 0.0 {
                return Err(Error::RankDeficient {
                    rank: a.rank(),
                    size: n,
                    certificate: format!("zero pivot in column {k}"),
                });
            }
            swap_rows(&mut lu, k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            row_scale: vec![1.0; n],
            col_scale: vec![1.0; n],
        })
    }

    /// Factors `R·a·C` with diagonal `R`, `C` scaling every row and then
    /// every column to unit max-norm, so the pivot test is insensitive to
    /// the units of the unknowns.
    pub fn equilibrated(a: &Matrix) -> Result<Lu> {
        let mut s = a.clone();
        let mut row_scale = vec![1.0; a.rows];
        for (i, r) in row_scale.iter_mut().enumerate() {
            let m = s.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                *r = 1.0 / m;
                for j in 0..s.cols {
                    s[(i, j)] *= *r;
                }
            }
        }
        let mut col_scale = vec![1.0; a.cols];
        for (j, c) in col_scale.iter_mut().enumerate() {
            let m = (0..s.rows).fold(0.0f64, |m, i| m.max(s[(i, j)].abs()));
            if m > 0.0 {
                *c = 1.0 / m;
                for i in 0..s.rows {
                    s[(i, j)] *= *c;
                }
            }
        }
        let mut lu = Lu::new(&s)?;
        lu.row_scale = row_scale;
        lu.col_scale = col_scale;
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p] * self.row_scale[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        for (v, c) in x.iter_mut().zip(&self.col_scale) {
            *v *= c;
        }
        x
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..b.cols).map(|j| self.solve(&b.column(j))).collect();
        Matrix::from_columns(b.rows, &cols)
    }
}

/// Vector `w ≠ 0` with `wᵀ·A ≈ 0`, when one exists.
pub fn left_null_vector(a: &Matrix) -> Option<Vec<f64>> {
    let at = a.transpose();
    let e = echelon(&at);
    let pivot_cols: Vec<usize> = e.pivots.iter().map(|p| p.1).collect();
    let free = (0..at.cols).find(|c| !pivot_cols.contains(c))?;
    let mut w = vec![0.0; at.cols];
    w[free] = 1.0;
    for &(r, c) in &e.pivots {
        w[c] = -e.reduced[(r, free)];
    }
    Some(w)
}

/// `x ↦ L·x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.linear
            .mul_vec(x)
            .into_iter()
            .zip(&self.offset)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.linear.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.offset.len()
    }

    /// Builds the affine map of `f` by probing it at zero and at unit vectors.
    /// Valid only when `f` is affine.
    pub fn probe<F>(input_dim: usize, mut f: F) -> Result<AffineMap>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let zero = vec![0.0; input_dim];
        let offset = f(&zero)?;
        let mut cols = Vec::with_capacity(input_dim);
        let mut e = zero;
        for j in 0..input_dim {
            e[j] = 1.0;
            let v = f(&e)?;
            e[j] = 0.0;
            cols.push(v.iter().zip(&offset).map(|(a, b)| a - b).collect());
        }
        Ok(AffineMap {
            linear: Matrix::from_columns(offset.len(), &cols),
            offset,
        })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: self.linear.mul(&inner.linear),
            offset: self.apply(&inner.offset),
        }
    }
}
