//! Dense real matrices.
//!
//! Storage is column-major: entry `(i, j)` lives at `data[i + j * rows]`.
//! [`Mat::vec`] is therefore a plain copy of the storage, and every other
//! module relies on that ordering.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{LqrError, Result};
use crate::tolerances::Tolerances;

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// Rectangular identity: ones on the main diagonal, zeros elsewhere.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn scalar(x: f64) -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    /// Builds from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LqrError::DimensionMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LqrError::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LqrError::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let mut m = Self::from_col_major(rows, cols, vec![0.0; rows * cols])?;
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = data[i * cols + j];
            }
        }
        Ok(m)
    }

    /// Builds from a slice of rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(LqrError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        if nrows == 0 || ncols == 0 {
            return Err(LqrError::DimensionMismatch("empty matrix".into()));
        }
        Self::from_row_major(nrows, ncols, &flat)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Columns stacked top to bottom into an `(rows*cols) x 1` vector.
    pub fn vec(&self) -> Mat {
        Mat {
            rows: self.rows * self.cols,
            cols: 1,
            data: self.data.clone(),
        }
    }

    /// Inverse of [`Mat::vec`].
    pub fn unvec(v: &Mat, rows: usize, cols: usize) -> Result<Mat> {
        if v.cols != 1 && v.rows != 1 {
            return Err(LqrError::DimensionMismatch(format!(
                "unvec expects a vector, got {}x{}",
                v.rows, v.cols
            )));
        }
        Self::from_col_major(rows, cols, v.data.clone())
    }

    /// Kronecker product.
    pub fn kron(&self, other: &Mat) -> Mat {
        let (ar, ac) = self.shape();
        let (br, bc) = other.shape();
        let mut out = Mat::zeros(ar * br, ac * bc);
        for aj in 0..ac {
            for ai in 0..ar {
                let s = self[(ai, aj)];
                if s == 0.0 {
                    continue;
                }
                for bj in 0..bc {
                    for bi in 0..br {
                        out[(ai * br + bi, aj * bc + bj)] = s * other[(bi, bj)];
                    }
                }
            }
        }
        out
    }

    /// Matrix product; panics on incompatible shapes.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let r = rhs[(k, j)];
                if r == 0.0 {
                    continue;
                }
                let col = &self.data[k * self.rows..(k + 1) * self.rows];
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (d, a) in dst.iter_mut().zip(col) {
                    *d += a * r;
                }
            }
        }
        out
    }

    /// `self^T * rhs` without forming the transpose.
    pub fn tr_mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows, "tr_mul shape mismatch");
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for j in 0..rhs.cols {
            let rc = &rhs.data[j * rhs.rows..(j + 1) * rhs.rows];
            for i in 0..self.cols {
                let lc = &self.data[i * self.rows..(i + 1) * self.rows];
                out[(i, j)] = lc.iter().zip(rc).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    /// Largest entrywise asymmetry `max |M - M^T|`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn zip_with(&self, rhs: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(
            self.shape(),
            rhs.shape(),
            "elementwise shape mismatch: {:?} vs {:?}",
            self.shape(),
            rhs.shape()
        );
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &Mat {
    type Output = Mat;
    fn mul(self, rhs: f64) -> Mat {
        self.scale(rhs)
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl AddAssign<&Mat> for Mat {
    fn add_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.shape(), rhs.shape());
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:.6e}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

/// Square symmetric matrix. Symmetry is checked on construction and then
/// enforced exactly.
#[derive(Clone, PartialEq)]
pub struct SymMat(Mat);

impl SymMat {
    /// Accepts `m` if `max|M - M^T| <= 1e-10`, then sets `M <- (M + M^T)/2`.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(LqrError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let asym = m.asymmetry();
        if !(asym <= Tolerances::DEFAULT.symmetry) {
            return Err(LqrError::NotSymmetric(asym));
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(M + M^T)/2` with no tolerance check. For results of computations
    /// that are symmetric in exact arithmetic.
    pub fn symmetrize(m: &Mat) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows;
        let mut out = m.clone();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMat(out)
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMat(Mat::from_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat(&self.0 - &other.0)
    }

    /// `X^T S X`, symmetrized.
    pub fn congruence(&self, x: &Mat) -> SymMat {
        SymMat::symmetrize(&x.tr_mul(&self.0.matmul(x)))
    }
}

impl std::ops::Deref for SymMat {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.0)
    }
}
