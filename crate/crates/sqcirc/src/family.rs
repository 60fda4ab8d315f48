//! Univariate input-function families with exact cross-moment (Gram) matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::linalg::Mat;
use crate::real::{creal, czero, Real, C};

/// Tolerance on Gram entries when deciding orthonormality.
pub const TAU_ORTH: f64 = 1e-9;

/// A vector of `K` univariate functions evaluated jointly.
#[derive(Clone, Debug, PartialEq)]
pub enum InputFamily<T> {
    /// `f_i(x) = table[i][x]` on `0..table.cols()`.
    Categorical { table: Mat<T> },
    /// `f_k(x) = exp(2πi·k·(x + bias)/period) / √period` on `[0, period]`.
    Fourier { period: T, freqs: Vec<i64>, bias: T },
    /// Normal densities on the real line.
    Gaussian { mean: Vec<T>, sd: Vec<T> },
    /// Pairwise products `f_i·g_j`, index `i·K_g + j`.
    Product(Box<InputFamily<T>>, Box<InputFamily<T>>),
}

impl<T: Real> InputFamily<T> {
    /// Indicator functions `[x = i]` for `i < v`.
    pub fn delta(v: usize) -> Self {
        InputFamily::Categorical { table: Mat::identity(v) }
    }

    pub fn categorical(table: Mat<T>) -> Self {
        InputFamily::Categorical { table }
    }

    /// Fourier family of odd width `K` with frequencies `-(K-1)/2 ..= (K-1)/2`.
    pub fn fourier(period: T, width: usize, bias: T) -> Result<Self> {
        if width % 2 == 0 {
            return Err(CircuitError::Input(format!("Fourier width must be odd, got {width}")));
        }
        let half = (width / 2) as i64;
        Self::fourier_with_freqs(period, (-half..=half).collect(), bias)
    }

    pub fn fourier_with_freqs(period: T, freqs: Vec<i64>, bias: T) -> Result<Self> {
        if !(period > T::zero()) {
            return Err(CircuitError::Input("Fourier period must be positive".into()));
        }
        if freqs.is_empty() {
            return Err(CircuitError::Input("Fourier family needs at least one frequency".into()));
        }
        Ok(InputFamily::Fourier { period, freqs, bias })
    }

    pub fn gaussian(mean: Vec<T>, sd: Vec<T>) -> Result<Self> {
        if mean.len() != sd.len() || mean.is_empty() {
            return Err(CircuitError::Shape("Gaussian family needs equally many means and deviations".into()));
        }
        if sd.iter().any(|s| !(*s > T::zero())) {
            return Err(CircuitError::Input("Gaussian deviations must be positive".into()));
        }
        Ok(InputFamily::Gaussian { mean, sd })
    }

    pub fn product(a: InputFamily<T>, b: InputFamily<T>) -> Self {
        InputFamily::Product(Box::new(a), Box::new(b))
    }

    pub fn width(&self) -> usize {
        match self {
            InputFamily::Categorical { table } => table.rows(),
            InputFamily::Fourier { freqs, .. } => freqs.len(),
            InputFamily::Gaussian { mean, .. } => mean.len(),
            InputFamily::Product(a, b) => a.width() * b.width(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            InputFamily::Categorical { .. } => "categorical",
            InputFamily::Fourier { .. } => "fourier",
            InputFamily::Gaussian { .. } => "gaussian",
            InputFamily::Product(..) => "product",
        }
    }

    /// Whether the family can be attached to a variable with this domain.
    pub fn fits_domain(&self, dom: &VarDomain<T>) -> bool {
        match (self, dom) {
            (InputFamily::Categorical { table }, VarDomain::Categorical { cardinality }) => table.cols() == *cardinality,
            (InputFamily::Fourier { period, .. }, VarDomain::Interval { lo, hi }) => {
                *lo == T::zero() && *hi == *period
            }
            (InputFamily::Gaussian { .. }, VarDomain::RealLine) => true,
            (InputFamily::Product(a, b), d) => a.fits_domain(d) && b.fits_domain(d),
            _ => false,
        }
    }

    /// The natural domain of the family.
    pub fn natural_domain(&self) -> VarDomain<T> {
        match self {
            InputFamily::Categorical { table } => VarDomain::Categorical { cardinality: table.cols() },
            InputFamily::Fourier { period, .. } => VarDomain::Interval { lo: T::zero(), hi: *period },
            InputFamily::Gaussian { .. } => VarDomain::RealLine,
            InputFamily::Product(a, _) => a.natural_domain(),
        }
    }

    /// Writes `[f_1(x) … f_K(x)]` into `out`.
    pub fn eval_into(&self, x: T, out: &mut [C<T>]) -> Result<()> {
        debug_assert_eq!(out.len(), self.width());
        match self {
            InputFamily::Categorical { table } => {
                let v = table.cols();
                let idx = categorical_index(x, v).ok_or(CircuitError::Domain { var: usize::MAX, value: x.as_f64() })?;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = table[(i, idx)];
                }
            }
            InputFamily::Fourier { period, freqs, bias } => {
                if !(x >= T::zero() && x <= *period) {
                    return Err(CircuitError::Domain { var: usize::MAX, value: x.as_f64() });
                }
                let amp = T::one() / period.sqrt();
                let base = T::TAU() * (x + *bias) / *period;
                for (o, &k) in out.iter_mut().zip(freqs) {
                    let ang = base * T::lit(k as f64);
                    *o = C::new(ang.cos() * amp, ang.sin() * amp);
                }
            }
            InputFamily::Gaussian { mean, sd } => {
                if !x.is_finite() {
                    return Err(CircuitError::Domain { var: usize::MAX, value: x.as_f64() });
                }
                for ((o, m), s) in out.iter_mut().zip(mean).zip(sd) {
                    *o = creal(normal_pdf(x, *m, *s));
                }
            }
            InputFamily::Product(a, b) => {
                let fa = a.eval(x)?;
                let fb = b.eval(x)?;
                let kb = fb.len();
                for (i, va) in fa.iter().enumerate() {
                    for (j, vb) in fb.iter().enumerate() {
                        out[i * kb + j] = va * vb;
                    }
                }
            }
        }
        Ok(())
    }

    /// Single component `f_i(x)`.
    pub fn eval_component(&self, i: usize, x: T) -> Result<C<T>> {
        match self {
            InputFamily::Categorical { table } => {
                let idx = categorical_index(x, table.cols())
                    .ok_or(CircuitError::Domain { var: usize::MAX, value: x.as_f64() })?;
                Ok(table[(i, idx)])
            }
            InputFamily::Product(a, b) => {
                let kb = b.width();
                Ok(a.eval_component(i / kb, x)? * b.eval_component(i % kb, x)?)
            }
            _ => Ok(self.eval(x)?[i]),
        }
    }

    pub fn eval(&self, x: T) -> Result<Vec<C<T>>> {
        let mut out = vec![czero(); self.width()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Pointwise complex conjugate family.
    pub fn conj(&self) -> Self {
        match self {
            InputFamily::Categorical { table } => InputFamily::Categorical { table: table.conj() },
            InputFamily::Fourier { period, freqs, bias } => InputFamily::Fourier {
                period: *period,
                freqs: freqs.iter().map(|k| -k).collect(),
                bias: *bias,
            },
            InputFamily::Gaussian { .. } => self.clone(),
            InputFamily::Product(a, b) => InputFamily::Product(Box::new(a.conj()), Box::new(b.conj())),
        }
    }

    /// Dense value table for families over a categorical domain.
    pub fn table(&self) -> Option<Mat<T>> {
        match self {
            InputFamily::Categorical { table } => Some(table.clone()),
            InputFamily::Product(a, b) => {
                let ta = a.table()?;
                let tb = b.table()?;
                if ta.cols() != tb.cols() {
                    return None;
                }
                let kb = tb.rows();
                Some(Mat::from_fn(ta.rows() * kb, ta.cols(), |r, x| ta[(r / kb, x)] * tb[(r % kb, x)]))
            }
            _ => None,
        }
    }

    /// Exponential-monomial expansion `f_i(x) = c_i·exp(2πi·m_i·x/P)` for
    /// Fourier families and products of them.
    pub fn monomials(&self) -> Option<(T, Vec<(C<T>, i64)>)> {
        match self {
            InputFamily::Fourier { period, freqs, bias } => {
                let amp = T::one() / period.sqrt();
                let terms = freqs
                    .iter()
                    .map(|&k| {
                        let ang = T::TAU() * T::lit(k as f64) * *bias / *period;
                        (C::new(ang.cos() * amp, ang.sin() * amp), k)
                    })
                    .collect();
                Some((*period, terms))
            }
            InputFamily::Product(a, b) => {
                let (pa, ta) = a.monomials()?;
                let (pb, tb) = b.monomials()?;
                if pa != pb {
                    return None;
                }
                let mut terms = Vec::with_capacity(ta.len() * tb.len());
                for (ca, ma) in &ta {
                    for (cb, mb) in &tb {
                        terms.push((ca * cb, ma + mb));
                    }
                }
                Some((pa, terms))
            }
            _ => None,
        }
    }

    /// `G[i][j] = ∫ f_i(x)·g_j(x)* dx`, in closed form.
    pub fn gram(&self, other: &InputFamily<T>) -> Result<Mat<T>> {
        if let (Some(a), Some(b)) = (self.table(), other.table()) {
            if a.cols() != b.cols() {
                return Err(CircuitError::Shape("Gram of categorical families over different cardinalities".into()));
            }
            return Ok(a.matmul_adj(&b));
        }
        if let (Some((pa, ta)), Some((pb, tb))) = (self.monomials(), other.monomials()) {
            if pa != pb {
                return Err(CircuitError::Capability("Gram of Fourier families with different periods".into()));
            }
            return Ok(Mat::from_fn(ta.len(), tb.len(), |i, j| {
                if ta[i].1 == tb[j].1 {
                    ta[i].0 * tb[j].0.conj() * pa
                } else {
                    czero()
                }
            }));
        }
        if let (InputFamily::Gaussian { mean: ma, sd: sa }, InputFamily::Gaussian { mean: mb, sd: sb }) = (self, other) {
            return Ok(Mat::from_fn(ma.len(), mb.len(), |i, j| {
                creal(normal_pdf(ma[i], mb[j], (sa[i] * sa[i] + sb[j] * sb[j]).sqrt()))
            }));
        }
        Err(CircuitError::Capability(format!(
            "no closed-form Gram between {} and {} families",
            self.kind_name(),
            other.kind_name()
        )))
    }

    /// `[∫ f_i(x) dx]_i`.
    pub fn integral(&self) -> Result<Vec<C<T>>> {
        if let Some(t) = self.table() {
            return Ok((0..t.rows()).map(|i| t.row(i).iter().fold(czero(), |a, b| a + b)).collect());
        }
        if let Some((p, terms)) = self.monomials() {
            return Ok(terms.iter().map(|(c, m)| if *m == 0 { c * p } else { czero() }).collect());
        }
        match self {
            InputFamily::Gaussian { mean, .. } => Ok(vec![creal(T::one()); mean.len()]),
            // ∫ a_i b_j = ⟨a_i, conj(b_j)⟩.
            InputFamily::Product(a, b) => Ok(a.gram(&b.conj())?.into_data()),
            _ => Err(CircuitError::Capability(format!("no closed-form integral for {} family", self.kind_name()))),
        }
    }

    /// `‖gram(self, self) − I‖_max`.
    pub fn orthonormality_defect(&self) -> Result<T> {
        let g = self.gram(self)?;
        Ok(g.max_abs_diff(&Mat::identity(self.width())))
    }

    /// Capability flag: Gram equals the identity within [`TAU_ORTH`].
    pub fn is_orthonormal(&self) -> bool {
        self.orthonormality_defect().map(|d| d < T::lit(TAU_ORTH)).unwrap_or(false)
    }

    /// Capability flag: closed-form Gram with itself is available.
    pub fn has_closed_form_gram(&self) -> bool {
        self.gram(self).is_ok()
    }

    /// `(complex, real)` parameter counts.
    pub fn param_count(&self) -> (usize, usize) {
        match self {
            InputFamily::Categorical { table } => (table.rows() * table.cols(), 0),
            InputFamily::Fourier { .. } => (0, 1),
            InputFamily::Gaussian { mean, .. } => (0, 2 * mean.len()),
            InputFamily::Product(a, b) => {
                let (ca, ra) = a.param_count();
                let (cb, rb) = b.param_count();
                (ca + cb, ra + rb)
            }
        }
    }
}

/// Semi-unitary categorical embedding: `K` orthonormal functions on `v` points,
/// taken as the first `K` rows of a random `v×v` unitary.
pub fn make_unitary_embedding<T: Real>(v: usize, k: usize, seed: u64) -> Result<InputFamily<T>> {
    Ok(make_unitary_embedding_blocks(v, &[k], seed)?.pop().expect("one block"))
}

/// Mutually orthogonal embeddings cut from disjoint row blocks of one unitary.
pub fn make_unitary_embedding_blocks<T: Real>(v: usize, widths: &[usize], seed: u64) -> Result<Vec<InputFamily<T>>> {
    let total: usize = widths.iter().sum();
    if total > v {
        return Err(CircuitError::Infeasible(format!(
            "cannot place {total} orthonormal functions on {v} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Mat::<T>::random_semi_unitary(total, v, &mut rng)?;
    let mut start = 0;
    Ok(widths
        .iter()
        .map(|&w| {
            let block = u.row_block(start, w);
            start += w;
            InputFamily::Categorical { table: block }
        })
        .collect())
}

pub(crate) fn categorical_index<T: Real>(x: T, v: usize) -> Option<usize> {
    if x < T::zero() || x.fract() != T::zero() {
        return None;
    }
    x.to_usize().filter(|&i| i < v)
}

pub(crate) fn normal_pdf<T: Real>(x: T, mean: T, sd: T) -> T {
    let z = (x - mean) / sd;
    (-(z * z) / T::lit(2.0)).exp() / (sd * (T::TAU()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_evaluation() {
        let f = InputFamily::<f64>::delta(3);
        let v = f.eval(2.0).unwrap();
        assert_eq!(v, vec![czero(), czero(), creal(1.0)]);
        assert!(f.eval(3.0).is_err());
    }

    #[test]
    fn fourier_at_origin_has_flat_amplitude() {
        let f = InputFamily::<f64>::fourier(6.0, 3, 0.0).unwrap();
        for z in f.eval(0.0).unwrap() {
            assert!((z - creal(1.0 / 6f64.sqrt())).norm() < 1e-15);
        }
        assert!(InputFamily::<f64>::fourier(6.0, 4, 0.0).is_err());
    }

    #[test]
    fn gaussian_peak() {
        let f = InputFamily::<f64>::gaussian(vec![1.5], vec![0.5]).unwrap();
        let v = f.eval(1.5).unwrap()[0].re;
        assert!((v - 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn fourier_gram_is_identity_for_any_bias() {
        for &b in &[0.0, 0.37, -2.1, 5.9] {
            let f = InputFamily::<f64>::fourier(6.0, 7, b).unwrap();
            assert!(f.orthonormality_defect().unwrap() < 1e-12);
        }
    }

    #[test]
    fn fourier_conjugate_negates_frequencies() {
        let f = InputFamily::<f64>::fourier(12.0, 5, 0.3).unwrap();
        let g = f.conj();
        for &x in &[0.0, 1.7, 11.2] {
            let a = f.eval(x).unwrap();
            let b = g.eval(x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u.conj() - v).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn embedding_blocks_are_mutually_orthogonal() {
        let fams = make_unitary_embedding_blocks::<f64>(256, &[4, 4], 11).unwrap();
        assert!(fams[0].orthonormality_defect().unwrap() < 1e-12);
        assert!(fams[1].orthonormality_defect().unwrap() < 1e-12);
        assert!(fams[0].gram(&fams[1]).unwrap().max_abs() < 1e-12);
        assert!(make_unitary_embedding::<f64>(3, 4, 0).is_err());
    }

    #[test]
    fn product_integral_matches_pointwise_sum() {
        let a = make_unitary_embedding::<f64>(5, 2, 3).unwrap();
        let b = make_unitary_embedding::<f64>(5, 3, 4).unwrap();
        let p = InputFamily::product(a.clone(), b.clone());
        let integ = p.integral().unwrap();
        for (idx, v) in integ.iter().enumerate() {
            let mut s: C<f64> = czero();
            for x in 0..5 {
                s += p.eval(x as f64).unwrap()[idx];
            }
            assert!((s - v).norm() < 1e-13);
        }
    }

    #[test]
    fn gaussian_product_rejected_for_fourth_moments() {
        let g = InputFamily::<f64>::gaussian(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let p = InputFamily::product(g.clone(), g.clone());
        assert!(p.gram(&p).is_err());
        assert!(p.integral().is_ok());
    }
}
