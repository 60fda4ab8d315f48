//! Training-step and marginal timings.

use std::hint::black_box;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sqcirc::learning::optim::{AdamHyper, LandingHyper};
use sqcirc::learning::{loss_and_grad, params_of, set_params, Optimizer, OptimizerSpec, Param};
use sqcirc::squaring::{marginal_via_square, square};
use sqcirc::tensorized::{ArchitectureConfig, FamilySpec, ProductKind, RegionGraphSpec};
use sqcirc::unitary::mar_squared_unitary;
use sqcirc::{LayerKind, TensorizedCircuit, VarSet};

use crate::alloc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    /// Non-unitary Hadamard circuit; each step materializes the squared circuit.
    BaselineHadamard,
    UnitaryHadamard,
    UnitaryKronecker,
}

impl BenchMode {
    pub fn unitary(self) -> bool {
        self != BenchMode::BaselineHadamard
    }

    pub fn product_kind(self) -> ProductKind {
        match self {
            BenchMode::UnitaryKronecker => ProductKind::Kronecker,
            _ => ProductKind::Hadamard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_categories")]
    pub categories: usize,
    pub widths: Vec<usize>,
    pub modes: Vec<BenchMode>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Entries whose estimated or measured peak exceeds this abort the sweep.
    #[serde(default)]
    pub memory_limit_bytes: Option<usize>,
    /// Repeats for the marginal timings (median reported); 0 skips them.
    #[serde(default)]
    pub marginal_repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_side() -> usize {
    8
}

fn default_categories() -> usize {
    256
}

fn default_batch() -> usize {
    64
}

fn default_burn_in() -> usize {
    10
}

fn default_iterations() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub mode: BenchMode,
    pub circuit_class: String,
    pub product_kind: ProductKind,
    pub units: usize,
    pub params: usize,
    pub real_dof: usize,
    pub mean_step_seconds: f64,
    pub peak_bytes: usize,
    /// Left-half marginal by moments / by the materialized square (unitary Hadamard only).
    pub marginal_seconds: Option<f64>,
    pub square_marginal_seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub memory_note: String,
    pub entries: Vec<BenchEntry>,
    /// Set when the memory guard stopped the sweep; entries hold what finished.
    pub aborted: Option<String>,
}

pub fn bench_architecture(cfg: &BenchConfig, mode: BenchMode, k: usize) -> ArchitectureConfig {
    ArchitectureConfig {
        region_graph: RegionGraphSpec::QuadTree { height: cfg.height, width: cfg.width },
        units: k,
        input_units: None,
        product_kind: mode.product_kind(),
        input_family: FamilySpec::Categorical { cardinality: cfg.categories },
        unitary: mode.unitary(),
        seed: cfg.seed,
    }
}

/// One optimization step of a training run, kept alive across iterations.
pub struct Stepper {
    pub circuit: TensorizedCircuit<f64>,
    params: Vec<Param<f64>>,
    opt: Optimizer<f64>,
    mode: BenchMode,
}

impl Stepper {
    pub fn new(circuit: TensorizedCircuit<f64>, mode: BenchMode) -> Result<Self> {
        let spec = if mode.unitary() {
            OptimizerSpec::LandingPc { landing: LandingHyper { lr: 0.01, ..LandingHyper::default() }, beta1: None, beta2: None }
        } else {
            OptimizerSpec::Adam(AdamHyper { lr: 0.01, ..AdamHyper::default() })
        };
        let opt = Optimizer::new(spec, &circuit)?;
        Ok(Stepper { params: params_of(&circuit), circuit, opt, mode })
    }

    pub fn step(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if self.mode == BenchMode::BaselineHadamard {
            let sq = square(&self.circuit)?;
            let d = self.circuit.num_vars();
            black_box(sq.integrate(&vec![0.0; d], &VarSet::full(d))?);
        }
        let (_, g) = loss_and_grad(&self.circuit, batch, self.mode.unitary(), true)?;
        self.opt.step(&mut self.params, &g)?;
        set_params(&mut self.circuit, &self.params)?;
        Ok(())
    }
}

/// Bytes of the squared circuit's sum weights, a lower bound on materializing it.
pub fn square_weight_bytes(c: &TensorizedCircuit<f64>) -> usize {
    c.layers()
        .iter()
        .map(|l| match &l.kind {
            LayerKind::Sum { weight, .. } => (weight.rows() * weight.cols()).pow(2) * 16,
            _ => 0,
        })
        .sum()
}

pub fn random_batch(cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..cfg.batch_size)
        .map(|_| (0..cfg.height * cfg.width).map(|_| rng.random_range(0..cfg.categories) as f64).collect())
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Variables left of the quad-tree's first column split.
pub fn left_half(height: usize, width: usize) -> VarSet {
    let cut = width.div_ceil(2);
    VarSet::from_vars(height * width, (0..height * width).filter(|v| v % width < cut))
}

/// Median seconds of the left-half marginal by moments and by the materialized square.
pub fn marginal_times(c: &TensorizedCircuit<f64>, height: usize, width: usize, repeats: usize) -> Result<(f64, f64)> {
    let z = left_half(height, width);
    let x = vec![0.0; c.num_vars()];
    let mut a = Vec::with_capacity(repeats);
    let mut b = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        black_box(mar_squared_unitary(c, &x, &z, false)?);
        a.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        black_box(marginal_via_square(c, &x, &z)?);
        b.push(t.elapsed().as_secs_f64());
    }
    Ok((median(a), median(b)))
}

pub fn run_benchmark(cfg: &BenchConfig, config_hash: String) -> Result<BenchReport> {
    let mut report = BenchReport {
        config_hash,
        memory_note: if alloc::is_tracking() {
            "peak bytes are allocator-reported live heap bytes on the CPU above the section start".into()
        } else {
            "allocation counting inactive in this process; peak bytes are zero".into()
        },
        ..BenchReport::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = random_batch(cfg, &mut rng);
    'sweep: for &k in &cfg.widths {
        for &mode in &cfg.modes {
            let c = bench_architecture(cfg, mode, k).build::<f64>()?;
            if let Some(limit) = cfg.memory_limit_bytes {
                if mode == BenchMode::BaselineHadamard && square_weight_bytes(&c) > limit {
                    report.aborted = Some(format!("{mode:?} at K={k}: squared circuit needs more than {limit} bytes"));
                    break 'sweep;
                }
            }
            let pc = c.param_count();
            let marginals = if mode == BenchMode::UnitaryHadamard && cfg.marginal_repeats > 0 {
                Some(marginal_times(&c, cfg.height, cfg.width, cfg.marginal_repeats)?)
            } else {
                None
            };
            let mut stepper = Stepper::new(c, mode)?;
            for _ in 0..cfg.burn_in {
                stepper.step(&batch)?;
            }
            let start = alloc::begin_section();
            let t = Instant::now();
            for _ in 0..cfg.iterations {
                stepper.step(&batch)?;
                if let Some(limit) = cfg.memory_limit_bytes {
                    if alloc::section_peak(start) > limit {
                        report.aborted = Some(format!("{mode:?} at K={k}: peak exceeded {limit} bytes"));
                        break 'sweep;
                    }
                }
            }
            let mean = t.elapsed().as_secs_f64() / cfg.iterations.max(1) as f64;
            report.entries.push(BenchEntry {
                mode,
                circuit_class: if mode.unitary() { "squared-unitary".into() } else { "squared".into() },
                product_kind: mode.product_kind(),
                units: k,
                params: pc.total(),
                real_dof: pc.real_dof(),
                mean_step_seconds: mean,
                peak_bytes: alloc::section_peak(start),
                marginal_seconds: marginals.map(|m| m.0),
                square_marginal_seconds: marginals.map(|m| m.1),
            });
        }
    }
    Ok(report)
}
