//! Command-line front end for `sqcirc`.
//!
//! Every verb parses and validates its inputs first, then runs and returns a
//! JSON report that embeds the SHA-256 hash of the effective configuration.

pub mod alloc;
pub mod bench;
pub mod density;
pub mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use sqcirc::squaring::marginal_via_square;
use sqcirc::tensorized::{from_json, to_json};
use sqcirc::unitary::{check_unitarity, mar_squared_unitary, unitarize, UnitarizeOptions, DEFAULT_WIDTH_CAP};
use sqcirc::learning::{log_partition, train, TrainConfig};
use sqcirc::{ArchitectureConfig, TensorizedCircuit, VarSet};

use crate::bench::{run_benchmark, BenchConfig};
use crate::density::{density_grid, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "sqcirc", version, about = "Build, check, train and query squared circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Verb configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Check structural properties before running property-dependent algorithms.
    #[arg(long, global = true, value_enum, default_value = "on")]
    pub verify_properties: Toggle,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Compile an architecture config into a circuit file (--out).
    Build,
    /// Report structure, parameter counts and unitarity of a circuit.
    Check {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Train from a training config; --out is a directory for metrics and the circuit.
    Train,
    /// Marginal query from --config against a circuit.
    Marginalize {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Rewrite a circuit with semi-unitary weights (--out).
    Unitarize {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WIDTH_CAP)]
        max_width: usize,
    },
    /// Time training steps across widths and modes.
    Benchmark,
    /// Cross-check the fast algorithms against the oracles; fails on any breach.
    Verify,
    /// Write a CSV density grid of a two-variable circuit (--out).
    ExportDensity {
        #[arg(long)]
        circuit: PathBuf,
    },
}

/// Outcome of a verb: the JSON report and whether the verb succeeded.
pub struct Outcome {
    pub report: Value,
    pub ok: bool,
}

/// Hex SHA-256 of the configuration's canonical JSON.
pub fn config_hash<S: Serialize>(cfg: &S) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn read_config<C: DeserializeOwned>(path: Option<&Path>) -> Result<C> {
    let path = path.ok_or_else(|| anyhow!("this verb needs --config"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_circuit(path: &Path) -> Result<TensorizedCircuit<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(from_json(&text)?)
}

fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| anyhow!("this verb needs --out"))
}

/// `{ "evidence": { var: value }, "marginalized": [vars] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalQuery {
    pub evidence: BTreeMap<usize, f64>,
    pub marginalized: Vec<usize>,
}

impl MarginalQuery {
    /// Full assignment (marginalized entries at the domain anchor) and `Z`.
    pub fn resolve(&self, c: &TensorizedCircuit<f64>) -> Result<(Vec<f64>, VarSet)> {
        let d = c.num_vars();
        let mut x: Vec<Option<f64>> = vec![None; d];
        for (&v, &val) in &self.evidence {
            if v >= d {
                bail!("evidence variable {v} out of range (circuit has {d} variables)");
            }
            c.domains()[v].check(v, val)?;
            x[v] = Some(val);
        }
        let mut z = VarSet::empty(d);
        for &v in &self.marginalized {
            if v >= d || x[v].is_some() {
                bail!("marginalized variable {v} is out of range or also observed");
            }
            z.insert(v);
        }
        let x = x
            .into_iter()
            .enumerate()
            .map(|(v, val)| match val {
                Some(val) => Ok(val),
                None if z.contains(v) => Ok(c.domains()[v].anchor()),
                None => Err(anyhow!("variable {v} is neither observed nor marginalized")),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((x, z))
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, which keeps the earlier setting.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let verify = cli.verify_properties == Toggle::On;
    let cfg_path = cli.config.as_deref();
    let out = cli.out.as_deref();
    let report = match &cli.verb {
        Verb::Build => {
            let mut cfg: ArchitectureConfig = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = require_out(out)?;
            let c = cfg.build::<f64>()?;
            let mut report = describe(&c, verify);
            if verify && cfg.unitary && !check_unitarity(&c).is_unitary() {
                bail!("built circuit is not unitary: {:?}", check_unitarity(&c).witnesses);
            }
            fs::write(out, to_json(&c)?)?;
            report["config_hash"] = json!(config_hash(&cfg)?);
            report
        }
        Verb::Check { circuit } => {
            let c = read_circuit(circuit)?;
            let mut report = describe(&c, verify);
            report["config_hash"] = json!(config_hash(&to_json(&c)?)?);
            report
        }
        Verb::Train => {
            let mut cfg: TrainConfig = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
                cfg.architecture.seed = s;
            }
            cfg.optimizer.validate()?;
            let dir = require_out(out)?;
            fs::create_dir_all(dir)?;
            let hash = config_hash(&cfg)?;
            let mut metrics = BufWriter::new(fs::File::create(dir.join("metrics.jsonl"))?);
            let mut write_err = None;
            let outcome = train::<f64>(&cfg, |m| {
                if let Err(e) = serde_json::to_writer(&mut metrics, m).map_err(anyhow::Error::from).and_then(|_| Ok(writeln!(metrics)?)) {
                    write_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = write_err {
                return Err(e.context("writing metrics"));
            }
            metrics.flush()?;
            fs::write(dir.join("circuit.json"), to_json(&outcome.circuit)?)?;
            let report = json!({
                "config_hash": hash,
                "steps": outcome.metrics.len(),
                "best_step": outcome.best_step,
                "best_valid_bpd": outcome.best_valid_bpd,
                "test_bpd": outcome.test_bpd,
                "aborted": outcome.aborted,
            });
            fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            report
        }
        Verb::Marginalize { circuit } => {
            let q: MarginalQuery = read_config(cfg_path)?;
            let c = read_circuit(circuit)?;
            let (x, z) = q.resolve(&c)?;
            let unitary = check_unitarity(&c);
            let (value, method, log_z) = if unitary.supports_marginals() {
                (mar_squared_unitary(&c, &x, &z, verify)?, "moments", 0.0)
            } else {
                if verify && unitary.u3 {
                    bail!("weights are semi-unitary but the inputs do not support the moment recursion: {:?}", unitary.witnesses);
                }
                (marginal_via_square(&c, &x, &z)?, "materialized-square", log_partition(&c, None)?.0)
            };
            json!({
                "config_hash": config_hash(&q)?,
                "method": method,
                "unnormalized": value,
                "probability": value / log_z.exp(),
            })
        }
        Verb::Unitarize { circuit, max_width } => {
            let c = read_circuit(circuit)?;
            let out = require_out(out)?;
            let (u, beta) = unitarize(&c, &UnitarizeOptions { max_width: *max_width })?;
            if verify && !check_unitarity(&u).u3 {
                bail!("unitarized weights failed the semi-unitarity check");
            }
            fs::write(out, to_json(&u)?)?;
            json!({ "config_hash": config_hash(&to_json(&c)?)?, "beta": beta, "layers": u.num_layers() })
        }
        Verb::Benchmark => {
            let mut cfg: BenchConfig = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cfg.widths.is_empty() || cfg.modes.is_empty() || cfg.iterations == 0 {
                bail!("benchmark needs widths, modes and at least one iteration");
            }
            let report = serde_json::to_value(run_benchmark(&cfg, config_hash(&cfg)?)?)?;
            if let Some(out) = out {
                fs::write(out, serde_json::to_string_pretty(&report)?)?;
            }
            report
        }
        Verb::Verify => {
            let mut cfg: verify::VerifyConfig = match cfg_path {
                Some(p) => read_config(Some(p))?,
                None => verify::VerifyConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let results = verify::run_verify(&cfg)?;
            let ok = results.iter().all(|r| r.passed);
            let report = json!({ "config_hash": config_hash(&cfg)?, "passed": ok, "checks": results });
            if let Some(out) = out {
                fs::write(out, serde_json::to_string_pretty(&report)?)?;
            }
            return Ok(Outcome { report, ok });
        }
        Verb::ExportDensity { circuit } => {
            let spec: GridSpec = match cfg_path {
                Some(p) => read_config(Some(p))?,
                None => GridSpec::default(),
            };
            let c = read_circuit(circuit)?;
            let out = require_out(out)?;
            let grid = density_grid(&c, &spec)?;
            grid.write_csv(BufWriter::new(fs::File::create(out)?))?;
            json!({
                "config_hash": config_hash(&spec)?,
                "resolution": spec.resolution,
                "mass": grid.mass(),
                "normalized_by": if grid.unitary { "unitarity" } else { "partition function" },
            })
        }
    };
    Ok(Outcome { report, ok: true })
}

fn describe(c: &TensorizedCircuit<f64>, verify: bool) -> Value {
    let pc = c.param_count();
    let mut report = json!({
        "variables": c.num_vars(),
        "layers": c.num_layers(),
        "max_width": c.max_width(),
        "size": c.size(),
        "product_kind": c.product_kind().ok().flatten(),
        "params": pc.total(),
        "real_dof": pc.real_dof(),
    });
    if verify {
        let u = check_unitarity(c);
        report["unitarity"] = serde_json::to_value(&u).unwrap_or(Value::Null);
        if u.supports_marginals() {
            let d = c.num_vars();
            report["partition"] = json!(mar_squared_unitary(c, &vec![0.0; d], &VarSet::full(d), false).ok());
        }
    }
    report
}
