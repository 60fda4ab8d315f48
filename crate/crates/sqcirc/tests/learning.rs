use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqcirc::learning::data::{Dataset, Split};
use sqcirc::learning::optim::{AdamHyper, LandingHyper, Optimizer, OptimizerSpec};
use sqcirc::learning::{
    bpd, flatten, loss_and_grad, nll, params_of, set_params, train, train_circuit, unflatten, DataSpec, SynthKind,
    TrainConfig,
};
use sqcirc::oracle::enum_partition;
use sqcirc::tensorized::{build_ttn_binary, constant_like, ArchitectureConfig, FamilySpec, ProductKind, RegionGraphSpec};
use sqcirc::unitary::{check_unitarity, mar_squared_unitary};
use sqcirc::{Mat, TensorizedCircuit, VarDomain, VarSet, C};

fn arch(rg: RegionGraphSpec, k: usize, kind: ProductKind, family: FamilySpec, unitary: bool) -> ArchitectureConfig {
    ArchitectureConfig { region_graph: rg, units: k, input_units: None, product_kind: kind, input_family: family, unitary, seed: 5 }
}

#[test]
fn nll_matches_enumerated_partition() {
    let c = build_ttn_binary::<f64>(4, 3, FamilySpec::Categorical { cardinality: 2 }, false, 2).unwrap();
    let batch = vec![vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]];
    let z = enum_partition(&c).unwrap().value;
    let direct: f64 = batch.iter().map(|x| z.ln() - c.evaluate(x).unwrap().norm_sqr().ln()).sum();
    let lv = nll(&c, &batch, false).unwrap();
    assert!(((lv.nll - direct) / direct).abs() < 1e-10, "{} vs {direct}", lv.nll);
}

#[test]
fn uniform_model_has_log2_v_bits() {
    let c = build_ttn_binary::<f64>(3, 2, FamilySpec::Categorical { cardinality: 5 }, false, 1).unwrap();
    let u = constant_like(&c).unwrap();
    let rows = vec![vec![0.0, 4.0, 2.0], vec![1.0, 1.0, 3.0]];
    assert!((bpd(&u, &rows, false).unwrap() - 5f64.log2()).abs() < 1e-12);
}

#[test]
fn unitary_loss_skips_the_partition_function() {
    let c = build_ttn_binary::<f64>(2, 2, FamilySpec::Categorical { cardinality: 4 }, true, 1).unwrap();
    let (lv, _) = loss_and_grad(&c, &[vec![1.0, 2.0]], true, true).unwrap();
    assert_eq!(lv.log_partition, 0.0);
}

#[test]
fn six_variable_gradient_check() {
    for kind in [ProductKind::Hadamard, ProductKind::Kronecker] {
        let c = arch(RegionGraphSpec::QuadTree { height: 2, width: 3 }, 2, kind, FamilySpec::Categorical { cardinality: 3 }, false)
            .build::<f64>()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.random_range(0..3) as f64).collect()).collect();
        let (_, g) = loss_and_grad(&c, &batch, false, true).unwrap();
        let template = params_of(&c);
        let theta = flatten(&template);
        let analytic = flatten(&g);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let at = |d: f64| {
                let mut t = theta.clone();
                t[i] += d;
                let mut c2 = c.clone();
                set_params(&mut c2, &unflatten(&template, &t)).unwrap();
                nll(&c2, &batch, false).unwrap().nll
            };
            let num = (at(h) - at(-h)) / (2.0 * h);
            if analytic[i].abs() > 1e-8 {
                worst = worst.max((num - analytic[i]).abs() / analytic[i].abs().max(1.0));
            }
        }
        assert!(worst < 1e-5, "{kind:?}: {worst}");
    }
}

#[test]
fn unreachable_parameter_has_zero_gradient() {
    let mut c = arch(RegionGraphSpec::QuadTree { height: 4, width: 4 }, 3, ProductKind::Hadamard, FamilySpec::Categorical { cardinality: 2 }, false)
        .build::<f64>()
        .unwrap();
    let root = c.output();
    let mut p = params_of(&c);
    p[root].as_mat_mut().unwrap()[(0, 1)] = C::new(0.0, 0.0);
    set_params(&mut c, &p).unwrap();
    // Hadamard products keep unit indices, so row 1 below the root feeds only the zeroed weight
    let mut below = c.layer(root).kind.inputs()[0];
    while c.layer(below).kind.is_product() {
        below = c.layer(below).kind.inputs()[0];
    }
    let (_, g) = loss_and_grad(&c, &[vec![1.0; 16], vec![0.0; 16]], false, true).unwrap();
    let gw = g[below].as_mat().unwrap();
    assert!(gw.frob_norm() > 0.0);
    assert!(gw.row(1).iter().all(|z| z.norm() == 0.0));
}

fn rank_two_generator(seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::<f64>::random_gaussian(4, 2, 1.0, &mut rng);
    let b = Mat::<f64>::random_gaussian(2, 4, 1.0, &mut rng);
    let m = a.matmul(&b);
    let total: f64 = m.data().iter().map(|z| z.norm_sqr()).sum();
    let p: Vec<f64> = m.data().iter().map(|z| z.norm_sqr() / total).collect();
    let h = -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>();
    (p, h)
}

fn sample(p: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let k = p.iter().position(|q| {
                acc += q;
                u < acc
            });
            let k = k.unwrap_or(p.len() - 1);
            vec![(k / 4) as f64, (k % 4) as f64]
        })
        .collect()
}

#[test]
fn unitary_rank_two_fit_reaches_the_entropy() {
    let (p, entropy) = rank_two_generator(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let train_rows = sample(&p, 4000, &mut rng);
    let test_rows = sample(&p, 20000, &mut rng);
    let mut rows = train_rows.clone();
    rows.extend(test_rows.iter().cloned());
    let splits = (0..rows.len()).map(|i| if i < 4000 { Split::Train } else { Split::Test }).collect();
    let data = Dataset::new(vec![VarDomain::categorical(4).unwrap(); 2], rows, splits).unwrap();
    let cfg = TrainConfig {
        architecture: arch(RegionGraphSpec::Ttn { num_vars: 2 }, 2, ProductKind::Kronecker, FamilySpec::Categorical { cardinality: 4 }, true),
        optimizer: OptimizerSpec::LandingPc { landing: LandingHyper { lr: 0.02, ..LandingHyper::default() }, beta1: None, beta2: None },
        data: DataSpec::Digits { n: 0, flip: 0.0 },
        batch_size: 256,
        max_steps: 2000,
        eval_every: 100,
        seed: 1,
    };
    let c = cfg.architecture.build::<f64>().unwrap();
    let out = train_circuit(c, &data, &cfg, |_| {}).unwrap();
    let test_nll = nll(&out.circuit, &test_rows, true).unwrap().nll / test_rows.len() as f64;
    assert!(((test_nll - entropy) / entropy).abs() < 0.05, "test nll {test_nll}, entropy {entropy}");
}

fn rings_cfg(optimizer: OptimizerSpec, steps: usize, eval_every: usize) -> TrainConfig {
    TrainConfig {
        architecture: arch(RegionGraphSpec::Ttn { num_vars: 2 }, 7, ProductKind::Kronecker, FamilySpec::Fourier { period: 6.0 }, true),
        optimizer,
        data: DataSpec::Synth { generator: SynthKind::Rings, n: 4000, noise_sd: 0.1 },
        batch_size: 256,
        max_steps: steps,
        eval_every,
        seed: 2,
    }
}

#[test]
fn landing_pc_rings_validation_improves() {
    let pc = OptimizerSpec::LandingPc { landing: LandingHyper { lr: 0.01, ..LandingHyper::default() }, beta1: None, beta2: None };
    let out = train::<f64>(&rings_cfg(pc, 200, 1), |_| {}).unwrap();
    let v: Vec<f64> = out.metrics.iter().filter_map(|m| m.valid_bpd).collect();
    let windows: Vec<f64> = v.chunks(20).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    assert!(windows.windows(2).all(|w| w[1] < w[0]), "{windows:?}");
}

#[test]
fn landing_sgd_stays_within_twice_eps() {
    let hyper = LandingHyper { lr: 0.05, eps: 0.5, ..LandingHyper::default() };
    let out = train::<f64>(&rings_cfg(OptimizerSpec::Landing(hyper), 1000, 250), |_| {}).unwrap();
    assert!(out.aborted.is_none());
    let worst = out.metrics.iter().flat_map(|m| m.manifold_distance.iter().copied()).fold(0.0, f64::max);
    assert!(worst <= 1.0, "{worst}");
    assert!(check_unitarity(&out.circuit).u3);
    assert!(out.metrics[999].train_nll < out.metrics[0].train_nll);
}

#[test]
fn projection_events_restore_unit_mass() {
    let cfg = rings_cfg(
        OptimizerSpec::LandingPc { landing: LandingHyper { lr: 0.05, period: 25, ..LandingHyper::default() }, beta1: None, beta2: None },
        100,
        100,
    );
    let data = cfg.data.load::<f64>(cfg.seed).unwrap();
    let mut c: TensorizedCircuit<f64> = cfg.architecture.build().unwrap();
    let mut opt = Optimizer::new(cfg.optimizer.clone(), &c).unwrap();
    let mut params = params_of(&c);
    let rows = data.split(Split::Train);
    let all = VarSet::full(2);
    let mut events = 0;
    for step in 0..100 {
        let batch = &rows[(step * 64) % 3000..(step * 64) % 3000 + 64];
        let (_, g) = loss_and_grad(&c, batch, true, true).unwrap();
        let report = opt.step(&mut params, &g).unwrap();
        set_params(&mut c, &params).unwrap();
        if report.projections == opt.groups().len() {
            events += 1;
            let z = mar_squared_unitary(&c, &[0.0, 0.0], &all, true).unwrap();
            assert!((z - 1.0).abs() < 1e-6, "step {step}: {z}");
        }
    }
    assert_eq!(events, 4);
}

#[test]
fn baseline_adam_decreases_loss() {
    let cfg = TrainConfig {
        architecture: arch(RegionGraphSpec::QuadTree { height: 1, width: 2 }, 4, ProductKind::Hadamard, FamilySpec::Gaussian { mean_lo: 1.0, mean_hi: 5.0, sd: 0.5 }, false),
        optimizer: OptimizerSpec::Adam(AdamHyper { lr: 0.01, ..AdamHyper::default() }),
        data: DataSpec::Synth { generator: SynthKind::Spiral, n: 2000, noise_sd: 0.1 },
        batch_size: 128,
        max_steps: 500,
        eval_every: 100,
        seed: 4,
    };
    let out = train::<f64>(&cfg, |_| {}).unwrap();
    assert!(out.metrics[499].train_nll < out.metrics[0].train_nll);
}
