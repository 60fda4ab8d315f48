//! Density grids of two-variable continuous circuits.

use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sqcirc::learning::log_partition;
use sqcirc::unitary::check_unitarity;
use sqcirc::{TensorizedCircuit, VarDomain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    256
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { resolution: default_resolution() }
    }
}

/// Densities at cell midpoints of a `resolution²` grid over the support.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `values[i * ys.len() + j]` at `(xs[i], ys[j])`.
    pub values: Vec<f64>,
    pub cell_area: f64,
    /// Whether `Z = 1` was used (circuit passed the unitarity check).
    pub unitary: bool,
}

impl DensityGrid {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,y,density")?;
        for (i, x) in self.xs.iter().enumerate() {
            for (j, y) in self.ys.iter().enumerate() {
                writeln!(w, "{x},{y},{}", self.values[i * self.ys.len() + j])?;
            }
        }
        Ok(())
    }
}

pub fn density_grid(c: &TensorizedCircuit<f64>, spec: &GridSpec) -> Result<DensityGrid> {
    if c.num_vars() != 2 {
        bail!("density export needs a two-variable circuit, got {} variables", c.num_vars());
    }
    if spec.resolution == 0 {
        bail!("grid resolution must be positive");
    }
    let mut axes = Vec::new();
    for (v, d) in c.domains().iter().enumerate() {
        let VarDomain::Interval { lo, hi } = d else {
            bail!("variable {v} is not on a bounded interval");
        };
        let h = (hi - lo) / spec.resolution as f64;
        axes.push(((0..spec.resolution).map(|k| lo + (k as f64 + 0.5) * h).collect::<Vec<f64>>(), h));
    }
    let unitary = check_unitarity(c).is_unitary();
    let z = if unitary { 1.0 } else { log_partition(c, None).context("partition function")?.0.exp() };
    let (xs, hx) = axes.swap_remove(0);
    let (ys, hy) = axes.swap_remove(0);
    let pts: Vec<Vec<f64>> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| vec![x, y])).collect();
    let values = c.eval_batch(&pts)?.into_iter().map(|v| v.norm_sqr() / z).collect();
    Ok(DensityGrid { xs, ys, values, cell_area: hx * hy, unitary })
}
