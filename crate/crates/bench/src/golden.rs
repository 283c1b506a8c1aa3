//! `srbench golden record|verify <dir>`.
//!
//! Layout: `<dir>/golden.json` lists the cases; each case directory holds a
//! weight checkpoint (`manifest.json` plus one `SRT1` file per weight) and
//! the input `x.srt` and output `y.srt` it produced.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srblock::checkpoint::{self, sha256_hex, write_entry, Manifest, TensorEntry, MANIFEST};
use srblock::{blocks, format, BlockWeights, Tensor};

use crate::cases::{BlockName, Hyper};
use crate::usage;

pub const INDEX: &str = "golden.json";
/// Largest absolute difference tolerated between a stored and a recomputed
/// output.
pub const TOLERANCE: f64 = 1e-10;
/// Input shape of every case.
pub const SHAPE: [usize; 4] = [2, 16, 4, 5];

fn hyper() -> Hyper {
    Hyper {
        k: 4,
        reduction: 4,
        ..Hyper::new(SHAPE[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub label: String,
    /// Case directory, relative to the golden root.
    pub dir: String,
    pub input: TensorEntry,
    pub output: TensorEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenIndex {
    pub seed: u64,
    pub cases: Vec<GoldenCase>,
}

/// Writes all six cases under `dir`, creating it if needed.
pub fn record(dir: &Path, seed: u64) -> Result<GoldenIndex> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut cases = Vec::new();
    for (i, name) in BlockName::ALL.into_iter().enumerate() {
        let case = name.case(&hyper());
        let case_seed = seed.wrapping_add(i as u64);
        let weights = case.random_weights(case_seed)?;
        let x = Tensor::uniform(&SHAPE, 1.0, &mut ChaCha8Rng::seed_from_u64(case_seed ^ 0x5eed))?;
        let y = blocks::forward(&case, &x, &weights)?;
        let case_dir = dir.join(name.as_str());
        checkpoint::save(&case_dir, &case, &weights)?;
        cases.push(GoldenCase {
            label: name.to_string(),
            dir: name.to_string(),
            input: write_entry(&case_dir, "x", &x)?,
            output: write_entry(&case_dir, "y", &y)?,
        });
    }
    let index = GoldenIndex { seed, cases };
    fs::write(dir.join(INDEX), serde_json::to_string_pretty(&index)?)?;
    Ok(index)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Missing(String),
    Checksum,
    Unreadable(String),
    Diff(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub case: String,
    pub tensor: String,
    pub problem: Problem,
}

#[derive(Clone, Debug, Default)]
pub struct Verification {
    /// `(case, max-abs-diff)` for every case whose output could be recomputed.
    pub diffs: Vec<(String, f64)>,
    pub findings: Vec<Finding>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (case, diff) in &self.diffs {
            out.push_str(&format!("case {case:<12} max-abs-diff {diff:.3e}\n"));
        }
        for f in &self.findings {
            let what = match &f.problem {
                Problem::Missing(e) => format!("missing ({e})"),
                Problem::Checksum => "checksum mismatch".into(),
                Problem::Unreadable(e) => format!("unreadable ({e})"),
                Problem::Diff(d) => format!("max-abs-diff {d:.3e} exceeds {TOLERANCE:.0e}"),
            };
            out.push_str(&format!("MISMATCH case {} tensor {}: {what}\n", f.case, f.tensor));
        }
        out.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        out
    }
}

/// Reads an entry, recording (rather than stopping at) checksum failures so
/// that the recomputed output can still be compared.
fn read_lenient(dir: &Path, case: &str, entry: &TensorEntry, findings: &mut Vec<Finding>) -> Option<Tensor> {
    let mut flag = |problem| {
        findings.push(Finding {
            case: case.to_string(),
            tensor: entry.name.clone(),
            problem,
        })
    };
    let bytes = match fs::read(dir.join(&entry.file)) {
        Ok(b) => b,
        Err(e) => {
            flag(Problem::Missing(e.to_string()));
            return None;
        }
    };
    if sha256_hex(&bytes) != entry.sha256 {
        flag(Problem::Checksum);
    }
    match format::from_bytes::<f64>(&bytes) {
        Ok(t) if t.shape() == entry.shape.as_slice() => Some(t),
        Ok(t) => {
            flag(Problem::Unreadable(format!("shape {:?}, expected {:?}", t.shape(), entry.shape)));
            None
        }
        Err(e) => {
            flag(Problem::Unreadable(e.to_string()));
            None
        }
    }
}

fn verify_case(root: &Path, case: &GoldenCase, out: &mut Verification) -> Result<()> {
    let dir = root.join(&case.dir);
    let manifest: Manifest = match fs::read(dir.join(MANIFEST)) {
        Ok(bytes) => match serde_json::from_slice(&bytes) {
            Ok(m) => m,
            Err(e) => {
                out.findings.push(Finding {
                    case: case.label.clone(),
                    tensor: MANIFEST.into(),
                    problem: Problem::Unreadable(e.to_string()),
                });
                return Ok(());
            }
        },
        Err(e) => {
            out.findings.push(Finding {
                case: case.label.clone(),
                tensor: MANIFEST.into(),
                problem: Problem::Missing(e.to_string()),
            });
            return Ok(());
        }
    };
    let weights: Vec<Option<Tensor>> = manifest
        .weights
        .iter()
        .map(|e| read_lenient(&dir, &case.label, e, &mut out.findings))
        .collect();
    let x = read_lenient(&dir, &case.label, &case.input, &mut out.findings);
    let y = read_lenient(&dir, &case.label, &case.output, &mut out.findings);
    let (Some(weights), Some(x), Some(y)) = (weights.into_iter().collect::<Option<Vec<_>>>(), x, y) else {
        return Ok(());
    };
    let recomputed = BlockWeights::from_ordered(&manifest.config, weights)
        .and_then(|w| blocks::forward(&manifest.config, &x, &w));
    match recomputed {
        Ok(fresh) => {
            let diff = fresh.max_abs_diff(&y)?;
            // NaN must count as a mismatch
            if !(diff <= TOLERANCE) {
                out.findings.push(Finding {
                    case: case.label.clone(),
                    tensor: case.output.name.clone(),
                    problem: Problem::Diff(diff),
                });
            }
            out.diffs.push((case.label.clone(), diff));
        }
        Err(e) => out.findings.push(Finding {
            case: case.label.clone(),
            tensor: "weights".into(),
            problem: Problem::Unreadable(e.to_string()),
        }),
    }
    Ok(())
}

/// Recomputes every recorded case. A missing directory or index is a usage
/// error; anything wrong inside is reported as a finding.
pub fn verify(dir: &Path) -> Result<Verification> {
    if !dir.is_dir() {
        return Err(usage(format!("golden directory {} does not exist", dir.display())));
    }
    let index_path = dir.join(INDEX);
    let text = fs::read_to_string(&index_path)
        .map_err(|e| usage(format!("cannot read {}: {e}", index_path.display())))?;
    let index: GoldenIndex =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", index_path.display()))?;
    let mut out = Verification::default();
    for case in &index.cases {
        verify_case(dir, case, &mut out)?;
    }
    Ok(out)
}
