//! Dense matrices over exact rationals (`RatMat`) and over bivariate
//! polynomials (`PolyMat`).
//!
//! Zero-dimension matrices are legal values: empty blocks occur routinely in
//! operator displays and must concatenate as identities and compose as
//! annihilators.

use super::poly::{Bound, Poly, PolyError, Rat, Var};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is singular")]
    Singular,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A dense matrix of exact rationals. Either dimension may be zero.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    entries: Vec<Rat>,
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> RatMat {
        RatMat {
            rows,
            cols,
            entries: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> RatMat {
        let mut m = RatMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rat) -> RatMat {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        RatMat {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> RatMat {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RatMat {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rat::is_zero)
    }

    pub fn transpose(&self) -> RatMat {
        RatMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn add(&self, other: &RatMat) -> Result<RatMat, MatError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatError::DimMismatch(format!(
                "add {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(RatMat::from_fn(self.rows, self.cols, |i, j| {
            &self[(i, j)] + &other[(i, j)]
        }))
    }

    pub fn sub(&self, other: &RatMat) -> Result<RatMat, MatError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatMat {
        RatMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| -x.clone()).collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> RatMat {
        RatMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * c).collect(),
        }
    }

    pub fn mul(&self, other: &RatMat) -> Result<RatMat, MatError> {
        if self.cols != other.rows {
            return Err(MatError::DimMismatch(format!(
                "mul {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(RatMat::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = Rat::zero();
            for k in 0..self.cols {
                acc += &self[(i, k)] * &other[(k, j)];
            }
            acc
        }))
    }

    pub fn hstack(&self, other: &RatMat) -> Result<RatMat, MatError> {
        if self.rows != other.rows {
            return Err(MatError::DimMismatch("hstack row counts differ".into()));
        }
        Ok(RatMat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        }))
    }

    pub fn vstack(&self, other: &RatMat) -> Result<RatMat, MatError> {
        if self.cols != other.cols {
            return Err(MatError::DimMismatch("vstack column counts differ".into()));
        }
        Ok(RatMat::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)].clone()
            } else {
                other[(i - self.rows, j)].clone()
            }
        }))
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> RatMat {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols);
        RatMat::from_fn(nrows, ncols, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    /// Exact determinant by Gaussian elimination with partial pivoting on
    /// rational magnitude.
    pub fn det(&self) -> Result<Rat, MatError> {
        if self.rows != self.cols {
            return Err(MatError::DimMismatch("det of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a: Vec<Vec<Rat>> = (0..n)
            .map(|i| (0..n).map(|j| self[(i, j)].clone()).collect())
            .collect();
        let mut det = Rat::one();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().cmp(&a[j][col].abs()));
            let pivot = match pivot {
                Some(p) if !a[p][col].is_zero() => p,
                _ => return Ok(Rat::zero()),
            };
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col].clone();
            let inv = Rat::one() / a[col][col].clone();
            for i in col + 1..n {
                if a[i][col].is_zero() {
                    continue;
                }
                let factor = &a[i][col] * &inv;
                for j in col..n {
                    let t = &a[col][j] * &factor;
                    a[i][j] -= t;
                }
            }
        }
        Ok(det)
    }

    /// Exact inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<RatMat, MatError> {
        if self.rows != self.cols {
            return Err(MatError::DimMismatch("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a: Vec<Vec<Rat>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self[(i, j)].clone())
                    .chain((0..n).map(|j| {
                        if i == j {
                            Rat::one()
                        } else {
                            Rat::zero()
                        }
                    }))
                    .collect()
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().cmp(&a[j][col].abs()))
                .filter(|&p| !a[p][col].is_zero())
                .ok_or(MatError::Singular)?;
            a.swap(pivot, col);
            let inv = Rat::one() / a[col][col].clone();
            for j in 0..2 * n {
                a[col][j] *= &inv;
            }
            for i in 0..n {
                if i == col || a[i][col].is_zero() {
                    continue;
                }
                let factor = a[i][col].clone();
                for j in 0..2 * n {
                    let t = &a[col][j] * &factor;
                    a[i][j] -= t;
                }
            }
        }
        Ok(RatMat::from_fn(n, n, |i, j| a[i][n + j].clone()))
    }

    /// 2-norm condition number estimate in floating point.
    pub fn cond_f64(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 1.0;
        }
        let m = nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].to_f64().unwrap_or(f64::NAN)
        });
        let svd = m.svd(false, false);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].to_f64().unwrap_or(f64::NAN)
        })
    }
}

impl std::ops::Index<(usize, usize)> for RatMat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Debug for RatMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// A dense matrix of bivariate polynomials. Either dimension may be zero.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMat {
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl PolyMat {
    pub fn zeros(rows: usize, cols: usize) -> PolyMat {
        PolyMat {
            rows,
            cols,
            entries: vec![Poly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> PolyMat {
        let mut m = PolyMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Poly::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Poly) -> PolyMat {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        PolyMat {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rat(m: &RatMat) -> PolyMat {
        PolyMat::from_fn(m.rows(), m.cols(), |i, j| Poly::constant(m[(i, j)].clone()))
    }

    /// Column vector from a list of polynomials.
    pub fn column(entries: Vec<Poly>) -> PolyMat {
        PolyMat {
            rows: entries.len(),
            cols: 1,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    /// True when no entry depends on `v`.
    pub fn is_free_of(&self, v: Var) -> bool {
        self.entries.iter().all(|p| p.is_free_of(v))
    }

    /// Extracts the constant part; errors are not possible, non-constant
    /// terms are simply dropped by the caller's responsibility to check
    /// `is_constant` first.
    pub fn is_constant(&self) -> bool {
        self.is_free_of(Var::S) && self.is_free_of(Var::Th)
    }

    pub fn to_rat(&self) -> Option<RatMat> {
        if !self.is_constant() {
            return None;
        }
        Some(RatMat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].coeff(0, 0)
        }))
    }

    pub fn transpose(&self) -> PolyMat {
        PolyMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> PolyMat {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &PolyMat) -> Result<PolyMat, MatError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatError::DimMismatch(format!(
                "add {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(PolyMat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].add(&other[(i, j)])
        }))
    }

    pub fn sub(&self, other: &PolyMat) -> Result<PolyMat, MatError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyMat {
        self.map(Poly::neg)
    }

    pub fn scale(&self, c: &Rat) -> PolyMat {
        self.map(|p| p.scale(c))
    }

    pub fn mul(&self, other: &PolyMat) -> Result<PolyMat, MatError> {
        if self.cols != other.rows {
            return Err(MatError::DimMismatch(format!(
                "mul {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(PolyMat::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = Poly::zero();
            for k in 0..self.cols {
                acc = acc.add(&self[(i, k)].mul(&other[(k, j)]));
            }
            acc
        }))
    }

    pub fn mul_rat_left(&self, m: &RatMat) -> Result<PolyMat, MatError> {
        PolyMat::from_rat(m).mul(self)
    }

    pub fn mul_rat_right(&self, m: &RatMat) -> Result<PolyMat, MatError> {
        self.mul(&PolyMat::from_rat(m))
    }

    pub fn hstack(&self, other: &PolyMat) -> Result<PolyMat, MatError> {
        if self.rows != other.rows {
            return Err(MatError::DimMismatch("hstack row counts differ".into()));
        }
        Ok(PolyMat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        }))
    }

    pub fn vstack(&self, other: &PolyMat) -> Result<PolyMat, MatError> {
        if self.cols != other.cols {
            return Err(MatError::DimMismatch("vstack column counts differ".into()));
        }
        Ok(PolyMat::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)].clone()
            } else {
                other[(i - self.rows, j)].clone()
            }
        }))
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> PolyMat {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols);
        PolyMat::from_fn(nrows, ncols, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    /// Entrywise substitution of a variable with a polynomial argument.
    pub fn substitute(&self, v: Var, arg: &Poly) -> PolyMat {
        self.map(|p| p.substitute(v, arg))
    }

    pub fn swap_vars(&self) -> PolyMat {
        self.map(Poly::swap_vars)
    }

    pub fn diff(&self, v: Var) -> PolyMat {
        self.map(|p| p.diff(v))
    }

    /// Entrywise definite integration.
    pub fn integrate(&self, v: Var, lower: &Bound, upper: &Bound) -> Result<PolyMat, MatError> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for p in &self.entries {
            entries.push(p.integrate(v, lower, upper)?);
        }
        Ok(PolyMat {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Exact evaluation to a rational matrix.
    pub fn eval(&self, s: &Rat, th: &Rat) -> RatMat {
        RatMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].eval(s, th))
    }

    pub fn eval_f64(&self, s: f64, th: f64) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].eval_f64(s, th))
    }

    pub fn max_deg_s(&self) -> usize {
        self.entries
            .iter()
            .filter_map(Poly::deg_s)
            .max()
            .unwrap_or(0)
    }

    pub fn max_deg_th(&self) -> usize {
        self.entries
            .iter()
            .filter_map(Poly::deg_th)
            .max()
            .unwrap_or(0)
    }
}

impl std::ops::Index<(usize, usize)> for PolyMat {
    type Output = Poly;
    fn index(&self, (i, j): (usize, usize)) -> &Poly {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for PolyMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Poly {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Debug for PolyMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::poly::{rat, rint};

    #[test]
    fn rational_inverse_is_exact() {
        // The 2x2 admissibility matrix of the two-ended integral constraint.
        let m = RatMat::from_rows(vec![
            vec![rint(2), rat(1, 2)],
            vec![rint(2), rat(3, 2)],
        ]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv).unwrap(), RatMat::identity(2));
        assert_eq!(m.det().unwrap(), rint(2));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = RatMat::from_rows(vec![vec![rint(1), rint(2)], vec![rint(2), rint(4)]]);
        assert_eq!(m.det().unwrap(), rint(0));
        assert!(matches!(m.inverse(), Err(MatError::Singular)));
    }

    #[test]
    fn zero_dimension_matrices_compose() {
        let a = RatMat::zeros(2, 0);
        let b = RatMat::zeros(0, 3);
        let c = a.mul(&b).unwrap();
        assert_eq!((c.rows(), c.cols()), (2, 3));
        assert!(c.is_zero());

        let e = PolyMat::zeros(0, 2);
        let f = PolyMat::zeros(2, 1);
        let g = e.mul(&f).unwrap();
        assert_eq!((g.rows(), g.cols()), (0, 1));
    }

    #[test]
    fn empty_concat_is_identity() {
        let m = PolyMat::from_fn(2, 2, |i, j| Poly::monomial(i, j, rint(1)));
        let empty = PolyMat::zeros(2, 0);
        assert_eq!(m.hstack(&empty).unwrap(), m);
        let empty_v = PolyMat::zeros(0, 2);
        assert_eq!(m.vstack(&empty_v).unwrap(), m);
    }

    #[test]
    fn polymat_product_mixes_variables() {
        // [1, s] * [th; 1] = th + s
        let a = PolyMat::from_fn(1, 2, |_, j| {
            if j == 0 {
                Poly::one()
            } else {
                Poly::var(Var::S)
            }
        });
        let b = PolyMat::column(vec![Poly::var(Var::Th), Poly::one()]);
        let c = a.mul(&b).unwrap();
        assert_eq!(c[(0, 0)], Poly::var(Var::Th).add(&Poly::var(Var::S)));
    }
}
