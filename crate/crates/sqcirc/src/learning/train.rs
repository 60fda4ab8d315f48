//! Training loop with best-validation checkpointing.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{idx_dataset, load_csv, synth_data, synth_digits, ColumnSpec, Dataset, Split, SynthKind};
use super::grad::{loss_and_grad, nll};
use super::optim::{Optimizer, OptimizerSpec};
use super::params::{params_of, set_params};
use crate::error::{CircuitError, Result};
use crate::real::Real;
use crate::tensorized::{ArchitectureConfig, TensorizedCircuit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    Synth {
        generator: SynthKind,
        n: usize,
        #[serde(default = "default_noise")]
        noise_sd: f64,
    },
    Digits {
        n: usize,
        #[serde(default = "default_flip")]
        flip: f64,
    },
    Csv { path: PathBuf, columns: Vec<ColumnSpec> },
    Idx {
        path: PathBuf,
        #[serde(default = "default_valid")]
        valid: f64,
        #[serde(default = "default_valid")]
        test: f64,
    },
}

fn default_noise() -> f64 {
    0.1
}

fn default_flip() -> f64 {
    0.03
}

fn default_valid() -> f64 {
    0.1
}

impl DataSpec {
    pub fn load<T: Real>(&self, seed: u64) -> Result<Dataset<T>> {
        match self {
            DataSpec::Synth { generator, n, noise_sd } => synth_data(*generator, *n, *noise_sd, seed),
            DataSpec::Digits { n, flip } => synth_digits(*n, *flip, seed),
            DataSpec::Csv { path, columns } => load_csv(path, columns),
            DataSpec::Idx { path, valid, test } => idx_dataset(path, *valid, *test, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: ArchitectureConfig,
    pub optimizer: OptimizerSpec,
    pub data: DataSpec,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub max_steps: usize,
    #[serde(default = "default_eval")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_batch() -> usize {
    256
}

fn default_eval() -> usize {
    50
}

/// One JSON-lines metrics record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: usize,
    /// Mean per-example negative log-likelihood of the step's batch.
    pub train_nll: f64,
    pub valid_bpd: Option<f64>,
    /// `‖W W† − I‖_F` of every Stiefel group, in group order.
    pub manifold_distance: Vec<f64>,
    pub projections: usize,
    pub clamped: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Circuit with the best validation bpd (projected onto the manifold when
    /// training unitary weights).
    pub circuit: TensorizedCircuit<T>,
    pub best_step: usize,
    pub best_valid_bpd: f64,
    pub test_bpd: f64,
    pub metrics: Vec<MetricRecord>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

/// Bits per dimension of `rows`. Unitary circuits are scored with `Z = 1`.
pub fn bpd<T: Real>(c: &TensorizedCircuit<T>, rows: &[Vec<T>], unitary: bool) -> Result<f64> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(nll(c, rows, unitary)?.bpd(c.num_vars()).as_f64())
}

/// Trains the circuit built from `cfg.architecture` on `cfg.data`.
pub fn train<T: Real>(cfg: &TrainConfig, sink: impl FnMut(&MetricRecord)) -> Result<TrainOutcome<T>> {
    let data = cfg.data.load::<T>(cfg.seed)?;
    let c = cfg.architecture.build::<T>()?;
    train_circuit(c, &data, cfg, sink)
}

/// Trains a given circuit. Unitary training (`architecture.unitary`) requires a
/// landing optimizer and never evaluates a partition function.
pub fn train_circuit<T: Real>(
    mut c: TensorizedCircuit<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
    mut sink: impl FnMut(&MetricRecord),
) -> Result<TrainOutcome<T>> {
    let unitary = cfg.architecture.unitary;
    if unitary != cfg.optimizer.is_landing() {
        return Err(CircuitError::Input("unitary circuits train with a landing optimizer, others with sgd or adam".into()));
    }
    if cfg.batch_size == 0 || cfg.eval_every == 0 {
        return Err(CircuitError::Input("batch-size and eval-every must be positive".into()));
    }
    let train = data.split(Split::Train);
    let valid = data.split(Split::Valid);
    let test = data.split(Split::Test);
    if train.is_empty() {
        return Err(CircuitError::Input("dataset has no training rows".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer.clone(), &c)?;
    let mut params = params_of(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let start = Instant::now();
    let mut metrics = Vec::new();

    // Scores a copy whose Stiefel groups are projected, so `Z = 1` holds exactly.
    let evaluate = |c: &TensorizedCircuit<T>, p: &[super::Param<T>], opt: &mut Optimizer<T>| -> Result<(TensorizedCircuit<T>, f64)> {
        let mut snap = c.clone();
        if unitary {
            let mut q = p.to_vec();
            opt.project_all(&mut q)?;
            set_params(&mut snap, &q)?;
        }
        let score = if valid.is_empty() { bpd(&snap, &train, unitary)? } else { bpd(&snap, &valid, unitary)? };
        Ok((snap, score))
    };
    let (mut best, mut best_bpd) = evaluate(&c, &params, &mut opt)?;
    let mut best_step = 0;
    let mut first_nll: Option<f64> = None;
    let mut aborted = None;

    for step in 1..=cfg.max_steps {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let take = cfg.batch_size.min(order.len());
        let batch: Vec<Vec<T>> = order[cursor..cursor + take].iter().map(|&i| train[i].clone()).collect();
        cursor += take;
        let (lv, grads) = loss_and_grad(&c, &batch, unitary, true)?;
        let mean_nll = lv.nll.as_f64() / take as f64;
        let base = *first_nll.get_or_insert(mean_nll);
        if !mean_nll.is_finite() || mean_nll > base + 9.0 * base.abs() {
            aborted = Some(format!("diverged at step {step}: nll {mean_nll} against initial {base}"));
            break;
        }
        let report = match opt.step(&mut params, &grads) {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(format!("step {step}: {e}"));
                break;
            }
        };
        set_params(&mut c, &params)?;
        let mut rec = MetricRecord {
            step,
            train_nll: mean_nll,
            valid_bpd: None,
            manifold_distance: report.distances,
            projections: report.projections,
            clamped: lv.clamped,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let (snap, score) = evaluate(&c, &params, &mut opt)?;
            rec.valid_bpd = Some(score);
            if score < best_bpd {
                best = snap;
                best_bpd = score;
                best_step = step;
            }
        }
        sink(&rec);
        metrics.push(rec);
    }
    let test_bpd = bpd(&best, &test, unitary)?;
    Ok(TrainOutcome { circuit: best, best_step, best_valid_bpd: best_bpd, test_bpd, metrics, aborted })
}
