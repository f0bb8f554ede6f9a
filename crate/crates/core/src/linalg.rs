//! Dense real and complex matrices.
//!
//! Everything the codes need lives here: Kronecker products, the real
//! 2x2-block embedding of complex matrices ([`realify`]), the interleaved
//! real vectorization ([`tilde_vec`]), column-ordered Gram-Schmidt QR and
//! LU determinants. Sizes stay small (n_t <= 32), so storage is a flat
//! row-major `Vec`.

use std::fmt::{self, Debug, Write as _};
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Result, StbcError};

/// Default relative rank tolerance for [`gram_schmidt_qr`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Field element usable as a matrix entry.
pub trait Scalar:
    Copy
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn modulus_sq(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
    fn write_entry(self, out: &mut String);
    fn parse_entry(s: &str) -> Option<Self>;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sq(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn write_entry(self, out: &mut String) {
        let _ = write!(out, "{}", self);
    }
    fn parse_entry(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn write_entry(self, out: &mut String) {
        // "a+bi" / "a-bi"; negative zero imaginary parts print as "+0i"
        let im = if self.im == 0.0 { 0.0 } else { self.im };
        if im.is_sign_negative() {
            let _ = write!(out, "{}-{}i", self.re, -im);
        } else {
            let _ = write!(out, "{}+{}i", self.re, im);
        }
    }
    fn parse_entry(s: &str) -> Option<Self> {
        parse_complex(s)
    }
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, `i` and `-i`.
fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k];
        if (c == b'+' || c == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let imag = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => t.parse().ok(),
        }
    };
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().ok()?;
            let im = imag(&body[k..])?;
            Some(Complex64::new(re, im))
        }
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type ComplexMatrix = Matrix<Complex64>;
pub type RealMatrix = Matrix<f64>;

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(StbcError::DimensionMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(StbcError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(StbcError::DimensionMismatch(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(StbcError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[T]) {
        assert_eq!(col.len(), self.rows, "column length");
        for (i, &x) in col.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Self {
        Self::from_fn(self.rows, range.len(), |i, j| self[(i, range.start + j)])
    }

    /// Selected columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(StbcError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec length");
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for (&a, &b) in self.row(i).iter().zip(x) {
                    acc += a * b;
                }
                acc
            })
            .collect()
    }

    /// `selfᵀ x` (conjugated for complex entries).
    pub fn adjoint_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "adjoint_matvec length");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn trace(&self) -> Result<T> {
        if !self.is_square() {
            return Err(StbcError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut t = T::zero();
        for i in 0..self.rows {
            t += self[(i, i)];
        }
        Ok(t)
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> Result<T> {
        let (lu, swaps) = self.lu()?;
        let mut d = if swaps % 2 == 0 { T::one() } else { -T::one() };
        for i in 0..self.rows {
            d = d * lu[(i, i)];
        }
        Ok(d)
    }

    /// `ln |det|`, accumulated from the LU pivots so it cannot overflow.
    pub fn log_abs_det(&self) -> Result<f64> {
        let (lu, _) = self.lu()?;
        Ok((0..self.rows).map(|i| lu[(i, i)].modulus().ln()).sum())
    }

    fn lu(&self) -> Result<(Self, usize)> {
        if !self.is_square() {
            return Err(StbcError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut swaps = 0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].modulus().total_cmp(&a[(y, k)].modulus()))
                .unwrap_or(k);
            if a[(p, k)].modulus() == 0.0 {
                // singular: leave a zero pivot, the product vanishes
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                swaps += 1;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
            }
        }
        Ok((a, swaps))
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sq()).sum()
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).modulus())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].modulus() <= tol))
    }

    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..i.min(self.cols)).all(|j| self[(i, j)].modulus() <= tol))
    }

    /// Plain-text form: one row per line, entries separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(' ');
                }
                self[(i, j)].write_entry(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the [`Matrix::to_text`] format. Blank lines and `#` comments
    /// are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    T::parse_entry(tok).ok_or_else(|| StbcError::Parse {
                        line: lineno + 1,
                        message: format!("bad matrix entry '{tok}'"),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(StbcError::Parse {
                line: 0,
                message: "empty matrix".into(),
            });
        }
        Self::from_rows(&rows)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.checked_mul(rhs).expect("matrix product dimensions")
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix difference"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| -a).collect(),
        }
    }
}

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        f.write_str(&self.to_text())
    }
}

impl<T: Scalar> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Kronecker product; block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (br, bc) = (b.rows, b.cols);
    Matrix::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Replaces every complex entry `x` by the block `[[x_I, -x_Q], [x_Q, x_I]]`.
pub fn realify(x: &ComplexMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(2 * x.rows, 2 * x.cols);
    for i in 0..x.rows {
        for j in 0..x.cols {
            let z = x[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// Interleaved real/imaginary parts: `[x1_I, x1_Q, x2_I, x2_Q, ...]`.
pub fn tilde_vec(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inverse of [`tilde_vec`].
pub fn untilde_vec(x: &[f64]) -> Vec<Complex64> {
    assert!(
        x.len().is_multiple_of(2),
        "interleaved vector has odd length"
    );
    x.chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

/// Column-stacking vectorization.
pub fn vec_columns<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    (0..a.cols)
        .flat_map(|j| (0..a.rows).map(move |i| a[(i, j)]))
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin QR factors with `A = Q R`, column order preserved.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: RealMatrix,
    pub r: RealMatrix,
}

/// Modified Gram-Schmidt QR with one re-orthogonalization pass.
///
/// Columns are processed in their given order (no pivoting). `R` has a
/// strictly positive diagonal and literal zeros below it. A column whose
/// residual falls below `tol * ‖A‖_F` makes the factorization fail.
pub fn gram_schmidt_qr(a: &RealMatrix, tol: f64) -> Result<QrFactors> {
    let (m, n) = (a.rows, a.cols);
    if n > m {
        return Err(StbcError::RankDeficient {
            column: m,
            residual: 0.0,
        });
    }
    let scale = a.fro_norm().max(f64::MIN_POSITIVE);
    let mut qcols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (i, q) in qcols.iter().enumerate() {
                let c = dot(q, &v);
                r[(i, j)] += c;
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= c * qk;
                }
            }
        }
        let nv = norm(&v);
        if nv < tol * scale {
            return Err(StbcError::RankDeficient {
                column: j,
                residual: nv,
            });
        }
        r[(j, j)] = nv;
        v.iter_mut().for_each(|x| *x /= nv);
        qcols.push(v);
    }
    let q = RealMatrix::from_fn(m, n, |i, j| qcols[j][i]);
    Ok(QrFactors { q, r })
}

/// Numerical column rank: columns whose residual after projecting out the
/// previously accepted ones is below `tol` times their own norm count as
/// dependent.
pub fn column_rank(a: &RealMatrix, tol: f64) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.cols {
        let mut v = a.column(j);
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= c * qk;
                }
            }
        }
        let nv = norm(&v);
        if nv > tol * n0 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    basis.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn p1() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(-1., 0.), c(0., 0.)]])
            .unwrap()
    }

    fn p3() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[c(1., 0.), c(-1., 0.)])
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn rand_complex(rows: usize, cols: usize, seed: &mut u64) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(lcg(seed), lcg(seed)))
    }

    fn rand_real(rows: usize, cols: usize, seed: &mut u64) -> RealMatrix {
        RealMatrix::from_fn(rows, cols, |_, _| lcg(seed))
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let expected = ComplexMatrix::diagonal(&[c(1., 0.), c(-1., 0.), c(-1., 0.), c(1., 0.)]);
        assert_eq!(kron(&p3(), &p3()), expected);
        let blk = kron(&i2, &p1());
        for i in 0..4 {
            for j in 0..4 {
                let want = if i / 2 == j / 2 {
                    p1()[(i % 2, j % 2)]
                } else {
                    c(0., 0.)
                };
                assert_eq!(blk[(i, j)], want);
            }
        }
    }

    #[test]
    fn kron_mixed_product() {
        let mut s = 7;
        let (a, b, cm, d) = (
            rand_complex(2, 3, &mut s),
            rand_complex(2, 2, &mut s),
            rand_complex(3, 2, &mut s),
            rand_complex(2, 3, &mut s),
        );
        let lhs = &kron(&a, &b) * &kron(&cm, &d);
        let rhs = kron(&(&a * &cm), &(&b * &d));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let assoc_l = kron(&kron(&a, &b), &cm);
        let assoc_r = kron(&a, &kron(&b, &cm));
        assert!(assoc_l.max_abs_diff(&assoc_r) < 1e-12);
    }

    #[test]
    fn realify_basic() {
        let j = ComplexMatrix::from_rows(&[vec![c(0., 1.)]]).unwrap();
        let want = RealMatrix::from_rows(&[vec![0., -1.], vec![1., 0.]]).unwrap();
        assert_eq!(realify(&j), want);
        assert_eq!(
            realify(&ComplexMatrix::identity(3)),
            RealMatrix::identity(6)
        );
    }

    #[test]
    fn realify_is_ring_homomorphism() {
        let mut s = 11;
        for _ in 0..20 {
            let a = rand_complex(2, 2, &mut s);
            let b = rand_complex(2, 2, &mut s);
            let prod = realify(&(&a * &b));
            assert!(prod.max_abs_diff(&(&realify(&a) * &realify(&b))) < 1e-12);
            let sum = realify(&(&a + &b));
            assert!(sum.max_abs_diff(&(&realify(&a) + &realify(&b))) < 1e-12);
        }
    }

    #[test]
    fn tilde_vec_examples() {
        assert_eq!(tilde_vec(&[c(1., 2.)]), vec![1., 2.]);
        assert_eq!(tilde_vec(&[c(0., 1.), c(0., -1.)]), vec![0., 1., 0., -1.]);
    }

    #[test]
    fn tilde_vec_intertwines_realify() {
        let mut s = 3;
        let x = rand_complex(3, 4, &mut s);
        let v: Vec<Complex64> = (0..4).map(|_| c(lcg(&mut s), lcg(&mut s))).collect();
        let lhs = tilde_vec(&x.matvec(&v));
        let rhs = realify(&x).matvec(&tilde_vec(&v));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
        let xn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm(&tilde_vec(&v)) - xn).abs() < 1e-12);
    }

    #[test]
    fn qr_identity() {
        let qr = gram_schmidt_qr(&RealMatrix::identity(4), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(qr.q, RealMatrix::identity(4));
        assert_eq!(qr.r, RealMatrix::identity(4));
    }

    #[test]
    fn qr_random_tall() {
        let mut s = 5;
        let a = rand_real(8, 4, &mut s);
        let qr = gram_schmidt_qr(&a, DEFAULT_RANK_TOL).unwrap();
        let qtq = &qr.q.transpose() * &qr.q;
        assert!(qtq.max_abs_diff(&RealMatrix::identity(4)) < 1e-12);
        let eps = 10.0 * f64::EPSILON * a.fro_norm();
        assert!((&qr.q * &qr.r).max_abs_diff(&a) < eps);
        for i in 0..4 {
            assert!(qr.r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(qr.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_duplicated_column_is_rank_deficient() {
        let mut s = 9;
        let mut a = rand_real(6, 3, &mut s);
        let c0 = a.column(0);
        a.set_column(2, &c0);
        assert!(matches!(
            gram_schmidt_qr(&a, DEFAULT_RANK_TOL),
            Err(StbcError::RankDeficient { column: 2, .. })
        ));
        assert_eq!(column_rank(&a, 1e-10), 2);
    }

    #[test]
    fn det_trace_norm() {
        assert_eq!(ComplexMatrix::identity(3).det().unwrap(), c(1., 0.));
        assert_eq!(p3().trace().unwrap(), c(0., 0.));
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(rect.det(), Err(StbcError::NonSquare { .. })));
        assert!(matches!(rect.trace(), Err(StbcError::NonSquare { .. })));
        let mut s = 1;
        let x = rand_complex(3, 2, &mut s);
        let r = (realify(&x).fro_norm() - 2f64.sqrt() * x.fro_norm()).abs();
        assert!(r < 1e-12);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = RealMatrix::from_rows(&[vec![2., -1., 0.], vec![1., 3., 2.], vec![0., 5., -4.]])
            .unwrap();
        // 2(3*-4 - 2*5) - (-1)(1*-4 - 0) + 0 = -44 - 4
        assert!((a.det().unwrap() + 48.0).abs() < 1e-12);
        assert!((a.log_abs_det().unwrap() - 48f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn text_roundtrip() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1., 0.), c(0., -1.)],
            vec![c(-0.5, 2.25), c(1e-20, -3e5)],
        ])
        .unwrap();
        let txt = m.to_text();
        assert_eq!(txt.lines().next().unwrap(), "1+0i 0-1i");
        assert_eq!(ComplexMatrix::from_text(&txt).unwrap(), m);
        assert_eq!(parse_complex("i"), Some(c(0., 1.)));
        assert_eq!(parse_complex("-i"), Some(c(0., -1.)));
        assert_eq!(parse_complex("1e-3-2e+1i"), Some(c(1e-3, -20.)));
        assert!(ComplexMatrix::from_text("1 2\n3").is_err());
    }

    proptest! {
        #[test]
        fn text_roundtrip_prop(entries in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 6)) {
            let m = ComplexMatrix::new(2, 3, entries.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            prop_assert_eq!(ComplexMatrix::from_text(&m.to_text()).unwrap(), m);
        }

        #[test]
        fn realify_preserves_products(seed in any::<u64>()) {
            let mut s = seed;
            let a = rand_complex(3, 2, &mut s);
            let b = rand_complex(2, 4, &mut s);
            let lhs = realify(&(&a * &b));
            prop_assert!(lhs.max_abs_diff(&(&realify(&a) * &realify(&b))) < 1e-12);
        }
    }
}
