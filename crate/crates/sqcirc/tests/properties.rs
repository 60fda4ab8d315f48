use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqcirc::learning::optim::{normal_direction, relative_gradient};
use sqcirc::linalg::kron_vec;
use sqcirc::squaring::{conjugate, multiply};
use sqcirc::tensorized::{from_json, to_json, ArchitectureConfig, FamilySpec, ProductKind, RegionGraphSpec};
use sqcirc::{Circuit, Mat, Permutation, TensorizedCircuit, VarDomain, C};

type CMat = DMatrix<C<f64>>;

fn to_na(m: &Mat<f64>) -> CMat {
    CMat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).iter().all(|z| z.norm() <= tol)
}

fn perm(n: usize, seed: u64) -> Permutation {
    use rand::seq::SliceRandom;
    let mut src: Vec<usize> = (0..n).collect();
    src.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Permutation::from_sources(src).unwrap()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C<f64>> {
    (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn family(pick: u8) -> FamilySpec {
    match pick % 3 {
        0 => FamilySpec::Categorical { cardinality: 3 },
        1 => FamilySpec::Fourier { period: 2.0 },
        _ => FamilySpec::Gaussian { mean_lo: -1.0, mean_hi: 1.0, sd: 0.7 },
    }
}

/// A small quad-tree circuit; Fourier layers need odd widths.
fn circuit(h: usize, w: usize, k: usize, kron: bool, fam: u8, unitary: bool, seed: u64) -> Option<TensorizedCircuit<f64>> {
    let input_family = family(fam);
    let units = if matches!(input_family, FamilySpec::Fourier { .. }) { 2 * k + 1 } else { k };
    let cfg = ArchitectureConfig {
        region_graph: RegionGraphSpec::QuadTree { height: h, width: w },
        units,
        input_units: None,
        product_kind: if kron { ProductKind::Kronecker } else { ProductKind::Hadamard },
        input_family,
        unitary: unitary && !matches!(family(fam), FamilySpec::Gaussian { .. }),
        seed,
    };
    cfg.build().ok()
}

fn random_point(c: &TensorizedCircuit<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    c.domains()
        .iter()
        .map(|d| match d {
            VarDomain::Interval { lo, hi } => rng.random_range(*lo..*hi),
            VarDomain::RealLine => rng.random_range(-2.0..2.0),
            _ => rng.random_range(0..d.cardinality().unwrap()) as f64,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compose_applies_right_operand_first(n in 1usize..12, s1: u64, s2: u64, s3: u64) {
        let (p, q) = (perm(n, s1), perm(n, s2));
        let v = random_vec(n, &mut ChaCha8Rng::seed_from_u64(s3));
        prop_assert_eq!(p.compose(&q).apply(&v), p.apply(&q.apply(&v)));
        prop_assert!(p.compose(&p.inverse()).is_identity());
        prop_assert!(p.inverse().compose(&p).is_identity());
        prop_assert_eq!(p.apply_inverse(&p.apply(&v)), v);
    }

    #[test]
    fn kron_of_permutations_permutes_kron_of_vectors(n in 1usize..6, m in 1usize..6, s1: u64, s2: u64, s3: u64) {
        let (p, q) = (perm(n, s1), perm(m, s2));
        let mut rng = ChaCha8Rng::seed_from_u64(s3);
        let (a, b) = (random_vec(n, &mut rng), random_vec(m, &mut rng));
        prop_assert_eq!(p.kron(&q).apply(&kron_vec(&a, &b)), kron_vec(&p.apply(&a), &q.apply(&b)));
    }

    #[test]
    fn products_match_nalgebra(r in 1usize..7, k in 1usize..7, c in 1usize..7, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::<f64>::random_gaussian(r, k, 1.0, &mut rng);
        let b = Mat::<f64>::random_gaussian(k, c, 1.0, &mut rng);
        let b2 = Mat::<f64>::random_gaussian(r, c, 1.0, &mut rng);
        prop_assert!(close(&to_na(&a.matmul(&b)), &(to_na(&a) * to_na(&b)), 1e-12));
        prop_assert!(close(&to_na(&a.adj_matmul(&b2)), &(to_na(&a).adjoint() * to_na(&b2)), 1e-12));
        prop_assert!(close(&to_na(&b.matmul_adj(&b)), &(to_na(&b) * to_na(&b).adjoint()), 1e-12));
        prop_assert!(close(&to_na(&a.kron(&b)), &to_na(&a).kronecker(&to_na(&b)), 1e-12));
    }

    #[test]
    fn thin_qr_and_hermitian_functions_match_nalgebra(n in 1usize..7, extra in 0usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::<f64>::random_gaussian(n + extra, n, 1.0, &mut rng);
        let (q, r) = a.qr_thin();
        prop_assert!(close(&(to_na(&q) * to_na(&r)), &to_na(&a), 1e-10));
        prop_assert!(close(&(to_na(&q).adjoint() * to_na(&q)), &CMat::identity(n, n), 1e-10));

        let gram = a.adj_matmul(&a);
        let eig = to_na(&gram).symmetric_eigen();
        let mut want: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut got = gram.hermitian_eigenvalues();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{:?} vs {:?}", got, want);
        }
        let inv_sqrt = eig.eigenvectors.clone()
            * CMat::from_diagonal(&eig.eigenvalues.map(|l| C::new(l.powf(-0.5), 0.0)))
            * eig.eigenvectors.adjoint();
        let scale = want.iter().map(|l| l.powf(-0.5)).fold(1.0, f64::max);
        prop_assert!(close(&to_na(&gram.inv_sqrt_hermitian().unwrap()), &inv_sqrt, 1e-8 * scale));
    }

    #[test]
    fn landing_field_parts_are_orthogonal(n in 2usize..8, p in 1usize..4, seed: u64) {
        let p = p.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::<f64>::random_gaussian(n, p, 0.6, &mut rng);
        let g = Mat::<f64>::random_gaussian(n, p, 1.0, &mut rng);
        let psi = relative_gradient(&g, &x);
        let (xn, gn) = (to_na(&x), to_na(&g));
        let m = &gn * xn.adjoint();
        let skew = (&m - m.adjoint()) * C::new(0.5, 0.0);
        prop_assert!(close(&to_na(&psi), &(skew * &xn), 1e-12));
        let inner = psi.re_inner(&normal_direction(&x, 1.0));
        prop_assert!(inner.abs() <= 1e-12 * psi.frob_norm().max(1.0) * x.frob_norm().powi(3).max(1.0));
    }

    #[test]
    fn json_round_trip_is_exact(h in 1usize..3, w in 1usize..4, k in 1usize..4, kron: bool, fam: u8, unitary: bool, seed: u64) {
        prop_assume!(h * w >= 2);
        let Some(c) = circuit(h, w, k, kron, fam, unitary, seed) else { return Ok(()) };
        let text = to_json(&c).unwrap();
        let back: TensorizedCircuit<f64> = from_json(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(to_json(&back).unwrap(), text);
    }

    #[test]
    fn scalar_view_evaluates_like_the_layers(h in 1usize..3, w in 1usize..4, k in 1usize..4, kron: bool, fam: u8, seed: u64) {
        prop_assume!(h * w >= 2);
        let Some(c) = circuit(h, w, k, kron, fam, false, seed) else { return Ok(()) };
        let view = c.to_scalar_view().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..4 {
            let x = random_point(&c, &mut rng);
            let (a, b) = (c.evaluate(&x).unwrap(), Circuit::evaluate(&view, &x).unwrap());
            prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300), "{} vs {}", a, b);
        }
    }

    #[test]
    fn multiply_by_conjugate_is_the_modulus_squared(h in 1usize..3, w in 1usize..4, k in 1usize..3, kron: bool, fam: u8, seed: u64) {
        prop_assume!(h * w >= 2);
        let Some(c) = circuit(h, w, k, kron, fam, false, seed) else { return Ok(()) };
        let m = multiply(&c, &conjugate(&c).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..4 {
            let x = random_point(&c, &mut rng);
            let want = c.evaluate(&x).unwrap().norm_sqr();
            let got = m.evaluate(&x).unwrap();
            prop_assert!((got - C::new(want, 0.0)).norm() <= 1e-10 * want.max(1e-300), "{} vs {}", got, want);
        }
    }
}
