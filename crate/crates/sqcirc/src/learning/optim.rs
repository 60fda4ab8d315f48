//! Landing optimizers on the complex Stiefel manifold, and Adam/SGD baselines.
//!
//! Landing steps work on `X` with orthonormal columns (`X†X = I`). Circuit
//! weights keep orthonormal rows, so callers pass `W†`; [`Optimizer`] does
//! the transposition.

use serde::{Deserialize, Serialize};

use super::params::{flatten, group_matrix, scatter_group, stiefel_groups, unflatten, Param, StiefelGroup};
use crate::error::{CircuitError, Result};
use crate::linalg::Mat;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct LandingHyper {
    pub lr: f64,
    pub lambda: f64,
    pub eps: f64,
    pub momentum: f64,
    pub dampening: f64,
    pub weight_decay: f64,
    pub period: usize,
    pub nesterov: bool,
}

impl Default for LandingHyper {
    fn default() -> Self {
        LandingHyper { lr: 0.01, lambda: 0.1, eps: 0.5, momentum: 0.9, dampening: 0.0, weight_decay: 0.0, period: 100, nesterov: false }
    }
}

impl LandingHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lambda > 0.0 && self.eps >= 0.0 && self.period >= 1) {
            return Err(CircuitError::Input(format!(
                "landing hyper-parameters need lr > 0, lambda > 0, eps >= 0, period >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Moment decay rates for Adam and the adaptive landing preconditioner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// State of one Stiefel matrix.
#[derive(Clone, Debug, Default)]
pub struct OptimizerState<T> {
    /// Momentum buffer, set to the first gradient on the first step.
    pub momentum: Option<Mat<T>>,
    pub t: u64,
    /// First moment and scalar second moment of the adaptive variant.
    pub adaptive: Option<(Mat<T>, T)>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new() -> Self {
        OptimizerState { momentum: None, t: 0, adaptive: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepInfo {
    /// `‖X†X − I‖_F` before the step.
    pub distance_before: f64,
    /// The same after the step (and any projection).
    pub distance: f64,
    pub eta: f64,
    pub projected: bool,
}

/// `‖X†X − I‖_F`.
pub fn manifold_distance<T: Real>(x: &Mat<T>) -> T {
    gram_defect(x).frob_norm()
}

/// `X†X − I`.
fn gram_defect<T: Real>(x: &Mat<T>) -> Mat<T> {
    let mut g = x.adj_matmul(x);
    for i in 0..g.rows() {
        g[(i, i)].re -= T::one();
    }
    g
}

/// Relative gradient `skew(G X†) X` with `skew(M) = ½(M − M†)`.
pub fn relative_gradient<T: Real>(g: &Mat<T>, x: &Mat<T>) -> Mat<T> {
    landing_field(g, x, &gram_defect(x), T::zero())
}

/// `λ X (X†X − I)`.
pub fn normal_direction<T: Real>(x: &Mat<T>, lambda: T) -> Mat<T> {
    x.matmul(&gram_defect(x)).scale_real(lambda)
}

/// `skew(G X†) X + λ X (X†X − I)` given `defect = X†X − I`, expanded as
/// `½ G X†X + X (λ defect − ½ G†X)` so nothing larger than `n×p` is formed.
fn landing_field<T: Real>(g: &Mat<T>, x: &Mat<T>, defect: &Mat<T>, lambda: T) -> Mat<T> {
    let half = T::lit(0.5);
    let mut xtx = defect.clone();
    for i in 0..xtx.rows() {
        xtx[(i, i)].re += T::one();
    }
    let inner = defect.scale_real(lambda).sub(&g.adj_matmul(x).scale_real(half));
    let mut out = g.matmul(&xtx).scale_real(half);
    out.add_assign(&x.matmul(&inner));
    out
}

/// Largest step keeping the iterate within distance `eps` of the manifold.
pub fn safe_step(lambda: f64, d: f64, r: f64, eps: f64) -> f64 {
    let a = lambda * d * (d - 1.0);
    (-a + (a * a + r * r * (eps - d).max(0.0)).sqrt()) / (r * r + 1e-8)
}

/// `X (X†X)^{-1/2}`.
pub fn polar_project<T: Real>(x: &Mat<T>) -> Result<Mat<T>> {
    Ok(x.matmul(&x.adjoint().matmul(x).inv_sqrt_hermitian()?))
}

fn check_shapes<T: Real>(x: &Mat<T>, grad: &Mat<T>) -> Result<()> {
    if x.shape() != grad.shape() {
        return Err(CircuitError::Shape(format!("gradient shape {:?} differs from weight shape {:?}", grad.shape(), x.shape())));
    }
    if x.rows() < x.cols() {
        return Err(CircuitError::Precondition(format!("a {}x{} matrix cannot have orthonormal columns", x.rows(), x.cols())));
    }
    if !grad.is_finite() {
        return Err(CircuitError::Numerical("non-finite gradient; step aborted".into()));
    }
    Ok(())
}

/// Applies `X ← X − η (skew(D X†) X + λ X(X†X − I))` with a safe `η`.
fn apply_field<T: Real>(x: &mut Mat<T>, d_dir: &Mat<T>, hyper: &LandingHyper) -> (f64, f64) {
    let defect = gram_defect(x);
    let field = landing_field(d_dir, x, &defect, T::lit(hyper.lambda));
    let d = defect.frob_norm().as_f64();
    let mut eta = hyper.lr;
    if hyper.eps > 0.0 {
        eta = eta.min(safe_step(hyper.lambda, d, field.frob_norm().as_f64(), hyper.eps));
    }
    *x = x.sub(&field.scale_real(T::lit(eta)));
    (d, eta)
}

/// One landing step on `x` (orthonormal columns) with Euclidean gradient `grad`.
pub fn landing_step<T: Real>(x: &mut Mat<T>, grad: &Mat<T>, state: &mut OptimizerState<T>, hyper: &LandingHyper) -> Result<StepInfo> {
    check_shapes(x, grad)?;
    state.t += 1;
    let psi = T::lit(hyper.weight_decay);
    let g = grad.add(&x.scale_real(psi));
    let dir = if hyper.momentum > 0.0 {
        let gamma = T::lit(hyper.momentum);
        let a = match state.momentum.take() {
            None => g.clone(),
            Some(a) => a.scale_real(gamma).add(&g.scale_real(T::one() - T::lit(hyper.dampening))),
        };
        let dir = if hyper.nesterov { grad.add(&a.scale_real(gamma)) } else { a.clone() };
        state.momentum = Some(a);
        dir
    } else {
        g
    };
    let (d0, eta) = apply_field(x, &dir, hyper);
    let mut projected = false;
    if state.t % hyper.period as u64 == 0 {
        *x = polar_project(x)?;
        if let Some(a) = &mut state.momentum {
            *a = a.sub(&x.matmul(&a.adjoint()).matmul(x));
        }
        projected = true;
    }
    Ok(StepInfo { distance_before: d0, distance: manifold_distance(x).as_f64(), eta, projected })
}

/// Adaptive landing step: the Euclidean gradient is replaced by a bias-corrected
/// first moment scaled by one rectified second moment for the whole matrix, and
/// the iterate is projected as soon as it leaves the `eps` tube.
pub fn landing_pc_step<T: Real>(
    x: &mut Mat<T>,
    grad: &Mat<T>,
    state: &mut OptimizerState<T>,
    hyper: &LandingHyper,
    adam: &AdamHyper,
) -> Result<StepInfo> {
    check_shapes(x, grad)?;
    state.t += 1;
    let g = grad.add(&x.scale_real(T::lit(hyper.weight_decay)));
    let (b1, b2) = (adam.beta1, adam.beta2);
    let (mut m, mut v) = state.adaptive.take().unwrap_or_else(|| (Mat::zeros(g.rows(), g.cols()), T::zero()));
    m = m.scale_real(T::lit(b1)).add(&g.scale_real(T::lit(1.0 - b1)));
    let sq = g.data().iter().map(|z| z.norm_sqr()).sum::<T>() / T::of_usize(g.data().len());
    v = v * T::lit(b2) + sq * T::lit(1.0 - b2);
    let t = state.t as i32;
    let m_hat = m.scale_real(T::lit(1.0 / (1.0 - b1.powi(t))));
    let rho_inf = 2.0 / (1.0 - b2) - 1.0;
    let rho = rho_inf - 2.0 * t as f64 * b2.powi(t) / (1.0 - b2.powi(t));
    let v_hat = (v.as_f64() / (1.0 - b2.powi(t))).sqrt();
    let dir = if rho > 5.0 && v_hat > 0.0 {
        let rect = ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt();
        m_hat.scale_real(T::lit(rect / (v_hat + adam.eps)))
    } else {
        m_hat
    };
    state.adaptive = Some((m, v));
    let (d0, eta) = apply_field(x, &dir, hyper);
    let mut distance = manifold_distance(x).as_f64();
    let projected = state.t % hyper.period as u64 == 0 || distance > hyper.eps;
    if projected {
        *x = polar_project(x)?;
        distance = manifold_distance(x).as_f64();
    }
    Ok(StepInfo { distance_before: d0, distance, eta, projected })
}

/// Adam over a flat parameter vector.
#[derive(Clone, Debug, Default)]
pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn step(&mut self, theta: &mut [T], grad: &[T], h: &AdamHyper) {
        if self.m.len() != theta.len() {
            self.m = vec![T::zero(); theta.len()];
            self.v = vec![T::zero(); theta.len()];
        }
        self.t += 1;
        let (b1, b2) = (T::lit(h.beta1), T::lit(h.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let (lr, eps) = (T::lit(h.lr), T::lit(h.eps));
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Sgd { lr: f64 },
    Adam(AdamHyper),
    Landing(LandingHyper),
    LandingPc {
        #[serde(flatten)]
        landing: LandingHyper,
        #[serde(default)]
        beta1: Option<f64>,
        #[serde(default)]
        beta2: Option<f64>,
    },
}

impl OptimizerSpec {
    pub fn is_landing(&self) -> bool {
        matches!(self, OptimizerSpec::Landing(_) | OptimizerSpec::LandingPc { .. })
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerSpec::Sgd { lr } => *lr,
            OptimizerSpec::Adam(h) => h.lr,
            OptimizerSpec::Landing(h) | OptimizerSpec::LandingPc { landing: h, .. } => h.lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerSpec::Landing(h) | OptimizerSpec::LandingPc { landing: h, .. } => h.validate(),
            _ if self.lr() >= 0.0 => Ok(()),
            _ => Err(CircuitError::Input("learning rate must be non-negative".into())),
        }
    }
}

/// Outcome of one [`Optimizer::step`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct StepReport {
    /// Manifold distance of each Stiefel group after the step.
    pub distances: Vec<f64>,
    pub projections: usize,
}

/// Optimizer over every parameter slot of a circuit. With a landing spec,
/// Stiefel groups move on the manifold and the remaining real parameters use
/// Adam at the same learning rate.
pub struct Optimizer<T> {
    spec: OptimizerSpec,
    groups: Vec<StiefelGroup>,
    states: Vec<OptimizerState<T>>,
    free: Adam<T>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(spec: OptimizerSpec, c: &crate::tensorized::TensorizedCircuit<T>) -> Result<Self> {
        spec.validate()?;
        let groups = if spec.is_landing() { stiefel_groups(c) } else { Vec::new() };
        let states = groups.iter().map(|_| OptimizerState::new()).collect();
        Ok(Optimizer { spec, groups, states, free: Adam::default() })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn groups(&self) -> &[StiefelGroup] {
        &self.groups
    }

    pub fn step(&mut self, params: &mut Vec<Param<T>>, grads: &[Param<T>]) -> Result<StepReport> {
        let mut report = StepReport::default();
        let flat_g = flatten(grads);
        if flat_g.iter().any(|g| !g.is_finite()) {
            return Err(CircuitError::Numerical("non-finite gradient; step aborted".into()));
        }
        match &self.spec {
            OptimizerSpec::Sgd { lr } => {
                let lr = T::lit(*lr);
                let mut theta = flatten(params);
                for (t, g) in theta.iter_mut().zip(&flat_g) {
                    *t -= lr * *g;
                }
                *params = unflatten(params, &theta);
            }
            OptimizerSpec::Adam(h) => {
                let mut theta = flatten(params);
                self.free.step(&mut theta, &flat_g, h);
                *params = unflatten(params, &theta);
            }
            OptimizerSpec::Landing(h) | OptimizerSpec::LandingPc { landing: h, .. } => {
                let adam = match &self.spec {
                    OptimizerSpec::LandingPc { beta1, beta2, .. } => Some(AdamHyper {
                        lr: h.lr,
                        beta1: beta1.unwrap_or(0.9),
                        beta2: beta2.unwrap_or(0.999),
                        eps: 1e-8,
                    }),
                    _ => None,
                };
                let mut in_group = vec![false; params.len()];
                for (g, state) in self.groups.iter().zip(&mut self.states) {
                    let mut x = group_matrix(params, g).adjoint();
                    let gx = group_matrix(grads, g).adjoint();
                    let info = match &adam {
                        Some(a) => landing_pc_step(&mut x, &gx, state, h, a)?,
                        None => landing_step(&mut x, &gx, state, h)?,
                    };
                    scatter_group(params, g, &x.adjoint());
                    report.distances.push(info.distance);
                    report.projections += info.projected as usize;
                    for &l in &g.layers {
                        in_group[l] = true;
                    }
                }
                // Remaining slots: Adam on the real parameters outside every group.
                let free_template: Vec<Param<T>> =
                    params.iter().zip(&in_group).map(|(p, &g)| if g { Param::None } else { p.clone() }).collect();
                let free_grads: Vec<Param<T>> =
                    grads.iter().zip(&in_group).map(|(p, &g)| if g { Param::None } else { p.clone() }).collect();
                let mut theta = flatten(&free_template);
                if !theta.is_empty() {
                    let hyper = AdamHyper { lr: h.lr, ..AdamHyper::default() };
                    self.free.step(&mut theta, &flatten(&free_grads), &hyper);
                    for (slot, new) in params.iter_mut().zip(unflatten(&free_template, &theta)) {
                        if !matches!(new, Param::None) {
                            *slot = new;
                        }
                    }
                }
            }
        }
        Ok(report)
    }

    /// Projects every Stiefel group onto the manifold.
    pub fn project_all(&mut self, params: &mut [Param<T>]) -> Result<()> {
        for g in &self.groups {
            let x = polar_project(&group_matrix(params, g).adjoint())?;
            scatter_group(params, g, &x.adjoint());
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::real::C;

    fn stiefel(n: usize, p: usize, seed: u64) -> Mat<f64> {
        Mat::random_semi_unitary(p, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().adjoint()
    }

    #[test]
    fn zero_gradient_on_manifold_is_a_fixed_point() {
        let mut x = stiefel(4, 2, 1);
        let x0 = x.clone();
        let mut st = OptimizerState::new();
        let info = landing_step(&mut x, &Mat::zeros(4, 2), &mut st, &LandingHyper::default()).unwrap();
        assert!(x.max_abs_diff(&x0) < 1e-15);
        assert!(info.distance < 1e-12);
    }

    #[test]
    fn safe_step_on_the_manifold() {
        let (eps, r) = (0.5, 3.0);
        assert!((safe_step(0.1, 0.0, r, eps) - eps.sqrt() / r).abs() < 1e-8);
    }

    #[test]
    fn relative_gradient_is_orthogonal_to_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Mat::<f64>::random_gaussian(5, 3, 0.6, &mut rng);
        let g = Mat::random_gaussian(5, 3, 1.0, &mut rng);
        let ip = relative_gradient(&g, &x).re_inner(&normal_direction(&x, 1.0));
        assert!(ip.abs() < 1e-10, "{ip}");
    }

    #[test]
    fn quadratic_descent_stays_in_the_safe_tube() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = Mat::<f64>::random_gaussian(4, 2, 1.0, &mut rng);
        let mut x = stiefel(4, 2, 4);
        let mut st = OptimizerState::new();
        let hyper = LandingHyper { lr: 0.1, eps: 0.5, ..LandingHyper::default() };
        for _ in 0..50 {
            let g = x.sub(&target);
            landing_step(&mut x, &g, &mut st, &hyper).unwrap();
            assert!(manifold_distance(&x) < 0.5);
        }
    }

    #[test]
    fn adaptive_step_projects_outside_the_tube() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = stiefel(4, 2, 6).add(&Mat::random_gaussian(4, 2, 0.05, &mut rng));
        assert!(manifold_distance(&x) > 1e-3);
        let g = Mat::random_gaussian(4, 2, 1.0, &mut rng);
        let hyper = LandingHyper { eps: 1e-3, ..LandingHyper::default() };
        let info = landing_pc_step(&mut x, &g, &mut OptimizerState::new(), &hyper, &AdamHyper::default()).unwrap();
        assert!(info.projected);
        assert!(manifold_distance(&x) < 1e-12);
    }

    #[test]
    fn zero_second_moment_matches_plain_landing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = stiefel(5, 2, 8).add(&Mat::random_gaussian(5, 2, 0.02, &mut rng));
        let hyper = LandingHyper { momentum: 0.0, ..LandingHyper::default() };
        let zero = Mat::zeros(5, 2);
        let (mut a, mut b) = (x0.clone(), x0);
        landing_step(&mut a, &zero, &mut OptimizerState::new(), &hyper).unwrap();
        landing_pc_step(&mut b, &zero, &mut OptimizerState::new(), &hyper, &AdamHyper::default()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut x = stiefel(3, 2, 9);
        let mut g = Mat::zeros(3, 2);
        g[(0, 0)] = C::new(f64::NAN, 0.0);
        let err = landing_step(&mut x, &g, &mut OptimizerState::new(), &LandingHyper::default());
        assert!(matches!(err, Err(CircuitError::Numerical(_))));
    }

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut theta = vec![3.0f64, -2.0];
        let mut adam = Adam::default();
        let h = AdamHyper { lr: 0.05, ..AdamHyper::default() };
        for _ in 0..2000 {
            let g = theta.clone();
            adam.step(&mut theta, &g, &h);
        }
        assert!(theta.iter().all(|t| t.abs() < 1e-2), "{theta:?}");
    }
}
