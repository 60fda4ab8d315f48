//! Dense complex matrices and the few factorizations the circuits need.

use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CircuitError, Result};
use crate::real::{cone, czero, Real, C};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cone();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C<T>>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Mat { rows: rows.len(), cols, data: rows.concat() }
    }

    /// Column vector.
    pub fn column(v: &[C<T>]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Entries i.i.d. complex Gaussian with `E|w|² = scale²`.
    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, scale: T, rng: &mut R) -> Self {
        let s = scale / T::SQRT_2();
        Self::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C::new(T::lit(re) * s, T::lit(im) * s)
        })
    }

    /// Haar-like random matrix with orthonormal rows; needs `rows ≤ cols`.
    pub fn random_semi_unitary<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        if rows > cols {
            return Err(CircuitError::Infeasible(format!(
                "no {rows}×{cols} matrix has orthonormal rows"
            )));
        }
        let g = Self::random_gaussian(cols, rows, T::one(), rng);
        let (q, _) = g.qr_thin();
        Ok(q.adjoint())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C<T>> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [C<T>] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "add shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "sub shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "add shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self† · other` without forming the adjoint.
    pub fn adj_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adj_matmul inner dimension");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let brow = other.row(k);
            for (i, a) in self.row(k).iter().enumerate() {
                let a = a.conj();
                for (o, b) in out.data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · other†` without forming the adjoint.
    pub fn matmul_adj(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_adj inner dimension");
        Self::from_fn(self.rows, other.rows, |i, j| dot_conj(self.row(i), other.row(j)))
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self · v` accumulated into `out`.
    pub fn mul_vec_into(&self, v: &[C<T>], out: &mut [C<T>]) {
        debug_assert_eq!(self.cols, v.len());
        debug_assert_eq!(self.rows, out.len());
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `self† · v`.
    pub fn adj_mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.rows, v.len(), "adjoint matrix-vector dimension");
        let mut out = vec![czero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = other.shape();
        Self::from_fn(self.rows * r2, self.cols * c2, |r, c| self[(r / r2, c / c2)] * other[(r % r2, c % c2)])
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "hadamard shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Row-wise Kronecker (face-splitting) product.
    pub fn face_split(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "face-splitting needs equal row counts");
        let c2 = other.cols;
        Self::from_fn(self.rows, self.cols * c2, |r, c| self[(r, c / c2)] * other[(r, c % c2)])
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[&Self]) -> Self {
        let rows = blocks.first().map_or(0, |b| b.rows);
        assert!(blocks.iter().all(|b| b.rows == rows), "hstack row mismatch");
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for b in blocks {
                out.row_mut(r)[off..off + b.cols].copy_from_slice(b.row(r));
                off += b.cols;
            }
        }
        out
    }

    /// Vertical concatenation.
    pub fn vstack(blocks: &[&Self]) -> Self {
        let cols = blocks.first().map_or(0, |b| b.cols);
        assert!(blocks.iter().all(|b| b.cols == cols), "vstack column mismatch");
        let rows = blocks.iter().map(|b| b.rows).sum();
        let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
        Mat { rows, cols, data }
    }

    pub fn col_block(&self, start: usize, len: usize) -> Self {
        Self::from_fn(self.rows, len, |r, c| self[(r, start + c)])
    }

    pub fn row_block(&self, start: usize, len: usize) -> Self {
        Mat { rows: len, cols: self.cols, data: self.data[start * self.cols..(start + len) * self.cols].to_vec() }
    }

    pub fn set_col_block(&mut self, start: usize, block: &Self) {
        assert_eq!(block.rows, self.rows);
        for r in 0..self.rows {
            let cols = self.cols;
            self.data[r * cols + start..r * cols + start + block.cols].copy_from_slice(block.row(r));
        }
    }

    pub fn frob_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).fold(czero(), |a, b| a + b)
    }

    /// Real part of `Σ conj(self) ⊙ other` (the real Frobenius inner product).
    pub fn re_inner(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `‖self·self† − I‖_max`; zero exactly when the rows are orthonormal.
    pub fn row_orthonormality_defect(&self) -> T {
        let g = self.matmul_adj(self);
        g.max_abs_diff(&Self::identity(self.rows))
    }

    /// Skew-Hermitian part `½(M − M†)`.
    pub fn skew_hermitian(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] - self[(c, r)].conj()) * half)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Thin Householder QR: `self = Q·R` with `Q` of shape `m×k`, `R` of shape
    /// `k×n`, `k = min(m, n)`. The diagonal of `R` is real and nonnegative;
    /// phases are absorbed into the columns of `Q`.
    pub fn qr_thin(&self) -> (Self, Self) {
        let (m, n) = self.shape();
        let k = m.min(n);
        let mut a = self.clone();
        let mut reflectors: Vec<Option<(Vec<C<T>>, T)>> = Vec::with_capacity(k);
        for j in 0..k {
            let norm = (j..m).map(|i| a[(i, j)].norm_sqr()).sum::<T>().sqrt();
            if norm == T::zero() {
                reflectors.push(None);
                continue;
            }
            let x0 = a[(j, j)];
            let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { cone() };
            let alpha = -phase * norm;
            let mut v: Vec<C<T>> = (j..m).map(|i| a[(i, j)]).collect();
            v[0] -= alpha;
            let vn2: T = v.iter().map(|z| z.norm_sqr()).sum();
            if vn2 == T::zero() {
                reflectors.push(None);
                continue;
            }
            for col in j..n {
                let s = v.iter().enumerate().fold(czero::<T>(), |acc, (i, vi)| acc + vi.conj() * a[(j + i, col)]);
                let f = s * (T::lit(2.0) / vn2);
                for (i, vi) in v.iter().enumerate() {
                    let upd = f * vi;
                    a[(j + i, col)] -= upd;
                }
            }
            reflectors.push(Some((v, vn2)));
        }
        let mut r = Self::from_fn(k, n, |i, c| if c >= i { a[(i, c)] } else { czero() });
        let mut q = Self::from_fn(m, k, |i, c| if i == c { cone() } else { czero() });
        for (j, refl) in reflectors.iter().enumerate().rev() {
            if let Some((v, vn2)) = refl {
                for col in 0..k {
                    let s = v.iter().enumerate().fold(czero::<T>(), |acc, (i, vi)| acc + vi.conj() * q[(j + i, col)]);
                    let f = s * (T::lit(2.0) / *vn2);
                    for (i, vi) in v.iter().enumerate() {
                        let upd = f * vi;
                        q[(j + i, col)] -= upd;
                    }
                }
            }
        }
        for i in 0..k {
            let d = r[(i, i)];
            let dn = d.norm();
            if dn > T::zero() {
                let ph = d / dn;
                for c in 0..n {
                    r[(i, c)] = r[(i, c)] * ph.conj();
                }
                r[(i, i)] = C::new(dn, T::zero());
                for row in 0..m {
                    q[(row, i)] = q[(row, i)] * ph;
                }
            }
        }
        (q, r)
    }

    /// Eigenvalues (ascending) of a Hermitian matrix.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let (vals, _) = embed_eigh(self);
        // The real embedding repeats every eigenvalue twice.
        vals.iter().step_by(2).copied().collect()
    }

    /// `f(H)` for a Hermitian `H`, via its spectral decomposition.
    pub fn hermitian_map(&self, f: impl Fn(T) -> T) -> Self {
        let n = self.rows;
        let (vals, vecs) = embed_eigh(self);
        let m = 2 * n;
        let fv: Vec<T> = vals.iter().map(|&l| f(l)).collect();
        // f(E) = V diag(f) Vᵀ on the embedding; the top-left block is Re f(H),
        // the bottom-left block is Im f(H).
        Self::from_fn(n, n, |r, c| {
            let mut re = T::zero();
            let mut im = T::zero();
            for k in 0..m {
                re += vecs[r * m + k] * fv[k] * vecs[c * m + k];
                im += vecs[(r + n) * m + k] * fv[k] * vecs[c * m + k];
            }
            C::new(re, im)
        })
    }

    /// `H^{-1/2}` for Hermitian positive definite `H`.
    pub fn inv_sqrt_hermitian(&self) -> Result<Self> {
        let eig = self.hermitian_eigenvalues();
        let max = eig.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let min = eig.first().copied().unwrap_or(T::one());
        let floor = max * T::lit(1e-13);
        if !(min > floor) || !min.is_finite() {
            return Err(CircuitError::Numerical(format!(
                "matrix is not positive definite (eigenvalues in [{min}, {max}])"
            )));
        }
        Ok(self.hermitian_map(|l| T::one() / l.sqrt()))
    }
}

/// Symmetric eigen-decomposition of the real embedding `[[A, −B], [B, A]]`
/// of `H = A + iB`, by cyclic Jacobi rotations. Returns ascending eigenvalues
/// and the row-major eigenvector matrix (eigenvectors in columns).
fn embed_eigh<T: Real>(h: &Mat<T>) -> (Vec<T>, Vec<T>) {
    assert_eq!(h.rows, h.cols, "eigen-decomposition of a non-square matrix");
    let n = h.rows;
    let m = 2 * n;
    let mut a = vec![T::zero(); m * m];
    for r in 0..n {
        for c in 0..n {
            // Symmetrize defensively: use the Hermitian part of the input.
            let z = (h[(r, c)] + h[(c, r)].conj()) * T::lit(0.5);
            a[r * m + c] = z.re;
            a[(r + n) * m + c + n] = z.re;
            a[r * m + c + n] = -z.im;
            a[(r + n) * m + c] = z.im;
        }
    }
    let mut v = vec![T::zero(); m * m];
    for i in 0..m {
        v[i * m + i] = T::one();
    }
    let total: T = a.iter().map(|x| *x * *x).sum();
    let eps = T::epsilon() * T::epsilon() * total.max(T::min_positive_value());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..m {
            for q in p + 1..m {
                off += a[p * m + q] * a[p * m + q];
            }
        }
        if off <= eps {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[i * m + i].partial_cmp(&a[j * m + j]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| a[i * m + i]).collect();
    let mut vecs = vec![T::zero(); m * m];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..m {
            vecs[k * m + new] = v[k * m + old];
        }
    }
    (vals, vecs)
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// `Σ a_i b_i`.
#[inline]
pub fn dot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    C::new(re, im)
}

/// `Σ a_i conj(b_i)`.
#[inline]
pub fn dot_conj<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    C::new(re, im)
}

/// Kronecker product of two vectors, index `i * b.len() + j`.
pub fn kron_vec<T: Real>(a: &[C<T>], b: &[C<T>]) -> Vec<C<T>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn norm2<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}
