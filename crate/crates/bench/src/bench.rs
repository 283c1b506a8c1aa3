//! `srbench bench`: single-threaded latency sweeps over square resolutions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srblock::baselines::nonlocal_forward_tiled;
use srblock::{blocks, BlockCase, BlockWeights, Scalar, Tensor};

use crate::cases::{BlockName, Hyper};
use crate::usage;

/// Largest non-local affinity, in elements, the sweep will hold at once.
pub const DEFAULT_AFFINITY_CAP: usize = 1 << 28;
/// Affinity rows per tile in tiled mode, in elements. Large enough that the
/// per-tile repacking inside the matrix multiply is negligible.
pub const DEFAULT_TILE_ELEMS: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("precision must be f32 or f64, got {other:?}")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub blocks: Vec<BlockName>,
    /// Square side lengths, strictly ascending.
    pub sizes: Vec<usize>,
    pub hyper: Hyper,
    pub repeats: usize,
    pub warmup: usize,
    pub precision: Precision,
    pub affinity_cap: usize,
    /// Build the non-local affinity a tile of rows at a time instead of
    /// skipping sizes whose full affinity exceeds the cap.
    pub tiled: bool,
    pub tile_elems: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(blocks: Vec<BlockName>, sizes: Vec<usize>, c_in: usize) -> Self {
        BenchConfig {
            blocks,
            sizes,
            hyper: Hyper::new(c_in),
            repeats: 3,
            warmup: 1,
            precision: Precision::F32,
            affinity_cap: DEFAULT_AFFINITY_CAP,
            tiled: false,
            tile_elems: DEFAULT_TILE_ELEMS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.sizes.is_empty() {
            return Err(usage("need at least one block and one size"));
        }
        if self.sizes.contains(&0) || self.sizes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(usage(format!("sizes must be positive and strictly ascending, got {:?}", self.sizes)));
        }
        if self.repeats < 3 || self.warmup < 1 {
            return Err(usage(format!(
                "need repeats >= 3 and warmup >= 1, got {} and {}",
                self.repeats, self.warmup
            )));
        }
        if self.affinity_cap == 0 || self.tile_elems == 0 {
            return Err(usage("affinity cap and tile size must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub median_us: f64,
    pub mad_us: f64,
}

/// One `(block, size)` measurement; `timing` is `None` when the size was
/// skipped because its affinity would exceed the cap.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub block: BlockName,
    pub h: usize,
    pub w: usize,
    pub timing: Option<Timing>,
    /// Analytic FLOPs (MAC=2) of one forward pass.
    pub flops: u64,
}

pub const CSV_HEADER: [&str; 6] = ["block", "h", "w", "median_us", "mad_us", "flops"];
pub const CAPPED: &str = "capped";

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    median(&values.iter().map(|v| (v - m).abs()).collect::<Vec<_>>())
}

enum Plan {
    Full,
    Tiled(usize),
    Capped,
}

fn plan(cfg: &BenchConfig, block: BlockName, positions: usize) -> Plan {
    if block != BlockName::Nl {
        return Plan::Full;
    }
    let affinity = positions.saturating_mul(positions);
    if affinity <= cfg.affinity_cap && !cfg.tiled {
        Plan::Full
    } else if cfg.tiled && positions <= cfg.affinity_cap {
        Plan::Tiled(cfg.tile_elems.min(cfg.affinity_cap).max(positions))
    } else {
        Plan::Capped
    }
}

fn time_block<T: Scalar>(
    case: &BlockCase,
    weights: &BlockWeights,
    shape: [usize; 4],
    tile: Option<usize>,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<Timing> {
    let weights = weights.cast::<T>();
    let x = Tensor::<T>::uniform(&shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let run = || -> Result<Tensor<T>> {
        Ok(match (tile, &weights) {
            (Some(tile), BlockWeights::Nl(w)) => nonlocal_forward_tiled(&x, w, tile)?,
            _ => blocks::forward(case, &x, &weights)?,
        })
    };
    for _ in 0..cfg.warmup {
        std::hint::black_box(run()?);
    }
    let mut samples = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let start = Instant::now();
        let y = run()?;
        samples.push(start.elapsed().as_secs_f64() * 1e6);
        std::hint::black_box(y);
    }
    Ok(Timing {
        median_us: median(&samples),
        mad_us: mad(&samples),
    })
}

/// Runs the sweep block by block, sizes ascending, calling `on_row` as each
/// measurement completes.
pub fn run(cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &block in &cfg.blocks {
        let case = block.case(&cfg.hyper);
        let desc = block.block_spec(&cfg.hyper);
        let weights = case
            .random_weights(cfg.seed)
            .map_err(|e| usage(format!("{block}: {e}")))?;
        for &side in &cfg.sizes {
            let flops = srblock::cost::cost(&desc, side, side)?.flops();
            let shape = [1, cfg.hyper.c_in, side, side];
            let input_seed = cfg.seed ^ (side as u64).rotate_left(32);
            let tile = match plan(cfg, block, side * side) {
                Plan::Capped => None,
                Plan::Full => Some(None),
                Plan::Tiled(t) => Some(Some(t)),
            };
            let timing = match tile {
                None => None,
                Some(tile) => Some(
                    match cfg.precision {
                        Precision::F32 => time_block::<f32>(&case, &weights, shape, tile, cfg, input_seed),
                        Precision::F64 => time_block::<f64>(&case, &weights, shape, tile, cfg, input_seed),
                    }
                    .with_context(|| format!("{block} at {side}x{side}"))?,
                ),
            };
            let row = BenchRow {
                block,
                h: side,
                w: side,
                timing,
                flops,
            };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn csv_writer<W: Write>(out: W) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    w.flush()?;
    Ok(w)
}

pub fn write_row<W: Write>(w: &mut csv::Writer<W>, row: &BenchRow) -> Result<()> {
    let (median, mad) = match row.timing {
        Some(t) => (t.median_us.to_string(), t.mad_us.to_string()),
        None => (CAPPED.to_string(), CAPPED.to_string()),
    };
    w.write_record([
        row.block.as_str().to_string(),
        row.h.to_string(),
        row.w.to_string(),
        median,
        mad,
        row.flops.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    if reader.headers()?.iter().ne(CSV_HEADER) {
        bail!("unexpected header {:?}", reader.headers()?);
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let timing = match (&rec[3], &rec[4]) {
                (CAPPED, CAPPED) => None,
                (m, d) => Some(Timing {
                    median_us: m.parse()?,
                    mad_us: d.parse()?,
                }),
            };
            Ok(BenchRow {
                block: rec[0].parse().map_err(anyhow::Error::msg)?,
                h: rec[1].parse()?,
                w: rec[2].parse()?,
                timing,
                flops: rec[5].parse()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let ok = BenchConfig::new(vec![BlockName::SrGap], vec![4, 8], 8);
        assert!(ok.validate().is_ok());
        assert!(BenchConfig { sizes: vec![8, 4], ..ok.clone() }.validate().is_err());
        assert!(BenchConfig { sizes: vec![4, 4], ..ok.clone() }.validate().is_err());
        assert!(BenchConfig { repeats: 2, ..ok.clone() }.validate().is_err());
        assert!(BenchConfig { warmup: 0, ..ok.clone() }.validate().is_err());
        assert!(BenchConfig { blocks: vec![], ..ok }.validate().is_err());
    }

    #[test]
    fn nonlocal_over_the_cap_is_skipped_unless_tiled() {
        let mut cfg = BenchConfig::new(vec![BlockName::Nl], vec![4, 8], 4);
        cfg.hyper.k = 2;
        cfg.affinity_cap = 16 * 16;
        let rows = run(&cfg, |_| {}).unwrap();
        assert!(rows[0].timing.is_some());
        assert!(rows[1].timing.is_none());
        cfg.tiled = true;
        let rows = run(&cfg, |_| {}).unwrap();
        assert!(rows.iter().all(|r| r.timing.is_some()));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            BenchRow {
                block: BlockName::SrGap,
                h: 4,
                w: 4,
                timing: Some(Timing {
                    median_us: 12.345678901,
                    mad_us: 0.1,
                }),
                flops: 99,
            },
            BenchRow {
                block: BlockName::Nl,
                h: 512,
                w: 512,
                timing: None,
                flops: 1 << 40,
            },
        ];
        let mut w = csv_writer(Vec::new()).unwrap();
        for r in &rows {
            write_row(&mut w, r).unwrap();
        }
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert!(text.contains("capped,capped"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }
}
