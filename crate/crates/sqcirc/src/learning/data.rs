//! Datasets: synthetic generators, CSV and IDX ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::VarDomain;
use crate::error::{CircuitError, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CircuitError::Input(format!("unknown split tag {other:?}"))),
        }
    }
}

/// Rows of assignments, each tagged with a split.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub domains: Vec<VarDomain<T>>,
    pub rows: Vec<Vec<T>>,
    pub splits: Vec<Split>,
}

impl<T: Real> Dataset<T> {
    /// Validates every row against `domains`.
    pub fn new(domains: Vec<VarDomain<T>>, rows: Vec<Vec<T>>, splits: Vec<Split>) -> Result<Self> {
        if rows.len() != splits.len() {
            return Err(CircuitError::Shape("one split tag per row expected".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != domains.len() {
                return Err(CircuitError::Shape(format!("row {i} has {} values, expected {}", r.len(), domains.len())));
            }
            for (var, (x, d)) in r.iter().zip(&domains).enumerate() {
                if !d.contains(*x) {
                    return Err(CircuitError::Domain { var, value: x.as_f64() });
                }
            }
        }
        Ok(Dataset { domains, rows, splits })
    }

    /// Tags rows train/valid/test with the given fractions after a seeded shuffle.
    pub fn with_random_splits(domains: Vec<VarDomain<T>>, rows: Vec<Vec<T>>, valid: f64, test: f64, seed: u64) -> Result<Self> {
        let n = rows.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_valid = (valid * n as f64).round() as usize;
        let n_test = (test * n as f64).round() as usize;
        let mut splits = vec![Split::Train; n];
        for (k, &i) in order.iter().enumerate() {
            if k < n_valid {
                splits[i] = Split::Valid;
            } else if k < n_valid + n_test {
                splits[i] = Split::Test;
            }
        }
        Self::new(domains, rows, splits)
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn split(&self, s: Split) -> Vec<Vec<T>> {
        self.rows.iter().zip(&self.splits).filter(|(_, t)| **t == s).map(|(r, _)| r.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Rings,
    Spiral,
}

/// Side of the square all synthetic 2-D samples are centred in.
pub const SYNTH_BOX: f64 = 6.0;
/// Radii of the concentric rings.
pub const RING_RADII: [f64; 3] = [0.8, 1.6, 2.4];
const SPIRAL_THETA: (f64, f64) = (0.5, 3.0 * std::f64::consts::PI);
const SPIRAL_RATE: f64 = 0.28;

/// Point of the Archimedean spiral at angle `theta`.
pub fn spiral_point(theta: f64) -> [f64; 2] {
    let r = SPIRAL_RATE * theta;
    let c = SYNTH_BOX / 2.0;
    [c + r * theta.cos(), c + r * theta.sin()]
}

/// 2-D samples inside `[0, SYNTH_BOX]²`, which is also the declared domain.
/// Noisy samples falling outside the box are clamped onto it.
pub fn synth_data<T: Real>(kind: SynthKind, n: usize, noise_sd: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || !(noise_sd >= 0.0) {
        return Err(CircuitError::Input("synthetic data needs n >= 1 and a non-negative noise level".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| CircuitError::Input(e.to_string()))?;
    let c = SYNTH_BOX / 2.0;
    let rows = (0..n)
        .map(|_| {
            let p = match kind {
                SynthKind::Rings => {
                    let r = RING_RADII[rng.random_range(0..RING_RADII.len())];
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    [c + r * a.cos(), c + r * a.sin()]
                }
                SynthKind::Spiral => spiral_point(rng.random_range(SPIRAL_THETA.0..SPIRAL_THETA.1)),
            };
            p.iter().map(|v| T::lit((v + noise.sample(&mut rng)).clamp(0.0, SYNTH_BOX))).collect()
        })
        .collect();
    let dom = VarDomain::interval(T::zero(), T::lit(SYNTH_BOX))?;
    Dataset::with_random_splits(vec![dom; 2], rows, 0.1, 0.1, seed ^ 0x5eed)
}

const GLYPHS: [[&str; 8]; 10] = [
    ["..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"],
    ["...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..", "........"],
    ["..####..", ".##..##.", ".....##.", "....##..", "...##...", "..##....", ".######.", "........"],
    ["..####..", ".##..##.", ".....##.", "...###..", ".....##.", ".##..##.", "..####..", "........"],
    ["....##..", "...###..", "..#.##..", ".#..##..", ".######.", "....##..", "....##..", "........"],
    [".######.", ".##.....", ".#####..", ".....##.", ".....##.", ".##..##.", "..####..", "........"],
    ["..####..", ".##.....", ".#####..", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"],
    [".######.", ".....##.", "....##..", "...##...", "...##...", "...##...", "...##...", "........"],
    ["..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", "..####..", "........"],
    ["..####..", ".##..##.", ".##..##.", "..#####.", ".....##.", "....##..", "..###...", "........"],
];

/// Binary 8×8 digit images: one of ten glyphs, shifted by up to one pixel in
/// each direction, with each pixel flipped with probability `flip`.
pub fn synth_digits<T: Real>(n: usize, flip: f64, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let g = &GLYPHS[rng.random_range(0..10)];
            let (dy, dx) = (rng.random_range(-1i32..=1), rng.random_range(-1i32..=1));
            let mut px = Vec::with_capacity(64);
            for y in 0..8i32 {
                for x in 0..8i32 {
                    let (sy, sx) = (y - dy, x - dx);
                    let on = (0..8).contains(&sy) && (0..8).contains(&sx) && g[sy as usize].as_bytes()[sx as usize] == b'#';
                    let on = on ^ rng.random_bool(flip);
                    px.push(if on { T::one() } else { T::zero() });
                }
            }
            px
        })
        .collect();
    Dataset::with_random_splits(vec![VarDomain::categorical(2)?; 64], rows, 0.1, 0.2, seed ^ 0x5eed)
}

/// Column kinds for CSV ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnSpec {
    Categorical { cardinality: usize },
    Real { lo: Option<f64>, hi: Option<f64> },
}

impl ColumnSpec {
    fn domain<T: Real>(&self) -> Result<VarDomain<T>> {
        match self {
            ColumnSpec::Categorical { cardinality } => VarDomain::categorical(*cardinality),
            ColumnSpec::Real { lo: Some(lo), hi: Some(hi) } => VarDomain::interval(T::lit(*lo), T::lit(*hi)),
            ColumnSpec::Real { .. } => Ok(VarDomain::RealLine),
        }
    }
}

/// Reads a CSV file with a header row. A column named `split` supplies
/// train/valid/test tags; without it every row is a training row.
pub fn load_csv<T: Real>(path: &Path, columns: &[ColumnSpec]) -> Result<Dataset<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CircuitError::Input(e.to_string()))?;
    let header = rdr.headers().map_err(|e| CircuitError::Input(e.to_string()))?.clone();
    let split_col = header.iter().position(|h| h.trim() == "split");
    let data_cols: Vec<usize> = (0..header.len()).filter(|&i| Some(i) != split_col).collect();
    if data_cols.len() != columns.len() {
        return Err(CircuitError::Shape(format!("CSV has {} data columns, {} declared", data_cols.len(), columns.len())));
    }
    let (mut rows, mut splits) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CircuitError::Input(e.to_string()))?;
        let row = data_cols
            .iter()
            .map(|&i| {
                rec[i].trim().parse::<f64>().map(T::lit).map_err(|e| CircuitError::Input(format!("row {}: {e}", line + 2)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
        splits.push(match split_col {
            Some(i) => rec[i].parse()?,
            None => Split::Train,
        });
    }
    let domains = columns.iter().map(ColumnSpec::domain).collect::<Result<_>>()?;
    Dataset::new(domains, rows, splits)
}

const IDX_IMAGES: u32 = 0x803;
const IDX_LABELS: u32 = 0x801;

fn read_idx(path: &Path, magic: u32) -> Result<(Vec<usize>, Vec<u8>)> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let word = |k: usize| -> Result<u32> {
        buf.get(4 * k..4 * k + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| CircuitError::Input("truncated IDX header".into()))
    };
    let found = word(0)?;
    if found != magic {
        return Err(CircuitError::Input(format!("IDX magic {found:#x}, expected {magic:#x}")));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (1..=ndim).map(|k| word(k).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let body = &buf[4 * (ndim + 1)..];
    if body.len() != dims.iter().product::<usize>() {
        return Err(CircuitError::Input(format!("IDX payload has {} bytes for dims {dims:?}", body.len())));
    }
    Ok((dims, body.to_vec()))
}

/// Images from an IDX file as `(height, width, pixels per image)`.
pub fn load_idx_images(path: &Path) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let (dims, body) = read_idx(path, IDX_IMAGES)?;
    let (h, w) = (dims[1], dims[2]);
    Ok((h, w, body.chunks(h * w).map(<[u8]>::to_vec).collect()))
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    Ok(read_idx(path, IDX_LABELS)?.1)
}

/// IDX images as a dataset of 256-category pixels.
pub fn idx_dataset<T: Real>(path: &Path, valid: f64, test: f64, seed: u64) -> Result<Dataset<T>> {
    let (h, w, imgs) = load_idx_images(path)?;
    let rows = imgs.into_iter().map(|im| im.into_iter().map(|p| T::of_usize(p as usize)).collect()).collect();
    Dataset::with_random_splits(vec![VarDomain::categorical(256)?; h * w], rows, valid, test, seed)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    #[test]
    fn noiseless_spiral_is_on_the_curve() {
        let d = synth_data::<f64>(SynthKind::Spiral, 200, 0.0, 1).unwrap();
        let c = SYNTH_BOX / 2.0;
        for r in &d.rows {
            let (x, y) = (r[0] - c, r[1] - c);
            let rad = x.hypot(y);
            let theta = rad / SPIRAL_RATE;
            let p = spiral_point(theta);
            assert!((p[0] - r[0]).abs() < 1e-9 && (p[1] - r[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn ring_radius_is_unbiased() {
        let d = synth_data::<f64>(SynthKind::Rings, 1024, 0.1, 2).unwrap();
        assert_eq!(d.rows.len(), 1024);
        let c = SYNTH_BOX / 2.0;
        let outer: Vec<f64> =
            d.rows.iter().map(|r| (r[0] - c).hypot(r[1] - c)).filter(|&r| r > 2.0).collect();
        let n = outer.len() as f64;
        let mean = outer.iter().sum::<f64>() / n;
        assert!((mean - RING_RADII[2]).abs() < 3.0 * 0.1 / n.sqrt(), "{mean}");
    }

    #[test]
    fn digits_are_binary_with_splits() {
        let d = synth_digits::<f64>(500, 0.03, 3).unwrap();
        assert_eq!(d.num_vars(), 64);
        assert!(d.rows.iter().flatten().all(|&p| p == 0.0 || p == 1.0));
        assert_eq!(d.split(Split::Valid).len(), 50);
        assert_eq!(d.split(Split::Test).len(), 100);
    }

    #[test]
    fn csv_with_split_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,split\n0,0.5,train\n2,1.5,test").unwrap();
        let cols = [ColumnSpec::Categorical { cardinality: 3 }, ColumnSpec::Real { lo: Some(0.0), hi: Some(2.0) }];
        let d = load_csv::<f64>(f.path(), &cols).unwrap();
        assert_eq!(d.rows, vec![vec![0.0, 0.5], vec![2.0, 1.5]]);
        assert_eq!(d.splits, vec![Split::Train, Split::Test]);
        let bad = [ColumnSpec::Categorical { cardinality: 2 }, cols[1].clone()];
        assert!(matches!(load_csv::<f64>(f.path(), &bad), Err(CircuitError::Domain { var: 0, .. })));
    }

    #[test]
    fn idx_round_trip_and_magic_check() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let mut bytes = Vec::new();
        for w in [IDX_IMAGES, 2, 2, 3] {
            bytes.extend(w.to_be_bytes());
        }
        bytes.extend(0u8..12);
        f.write_all(&bytes).unwrap();
        let (h, w, imgs) = load_idx_images(f.path()).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(imgs[1], vec![6, 7, 8, 9, 10, 11]);
        assert!(load_idx_labels(f.path()).is_err());
    }
}
