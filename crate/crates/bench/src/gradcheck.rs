//! `srbench gradcheck <config.json>`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use srblock::blocks::gradient_check;
use srblock::gradcheck::{CheckOptions, Mismatch};

use crate::cases::{BlockName, Hyper};
use crate::usage;

fn default_eps() -> f64 {
    1e-5
}

fn default_tol() -> f64 {
    1e-4
}

fn default_seeds() -> u64 {
    1
}

fn default_ratio() -> usize {
    srblock::sr::DEFAULT_RATIO
}

fn default_k() -> usize {
    srblock::sr::DEFAULT_NODES
}

fn default_reduction() -> usize {
    srblock::baselines::DEFAULT_SE_REDUCTION
}

/// JSON configuration of one gradient check.
///
/// ```json
/// {"block": "sr_gap", "shape": [1, 32, 6, 6], "seed": 0, "tol": 1e-4, "k": 4}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    pub block: BlockName,
    /// `[N, C, H, W]`.
    pub shape: Vec<usize>,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Number of consecutive seeds to check, starting at `seed`.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_ratio")]
    pub ratio: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_reduction")]
    pub reduction: usize,
    /// Falsify one analytic gradient before comparing. Negative control:
    /// the check must then fail.
    #[serde(default)]
    pub corrupt_backward: bool,
}

impl GradcheckConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    fn validate(&self) -> Result<()> {
        if self.shape.len() != 4 || self.shape.contains(&0) {
            return Err(usage(format!("shape must be four positive extents, got {:?}", self.shape)));
        }
        if !(self.tol > 0.0) || !(self.eps > 0.0) || self.seeds == 0 {
            return Err(usage("tol, eps and seeds must be positive"));
        }
        Ok(())
    }

    fn hyper(&self) -> Hyper {
        Hyper {
            c_in: self.shape[1],
            ratio: self.ratio,
            k: self.k,
            reduction: self.reduction,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    /// Seed of the accepted draw.
    pub seed: u64,
    pub max_rel_err: f64,
    pub worst: Option<Mismatch>,
    pub per_param: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct GradcheckOutcome {
    pub block: BlockName,
    pub shape: Vec<usize>,
    pub tol: f64,
    pub results: Vec<SeedResult>,
}

impl GradcheckOutcome {
    pub fn max_rel_err(&self) -> f64 {
        self.results.iter().map(|r| r.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= self.tol
    }

    fn worst(&self) -> Option<&SeedResult> {
        self.results
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "block {} shape {:?}: {} seed(s), max rel err {:.3e} (tol {:.1e})",
            self.block,
            self.shape,
            self.results.len(),
            self.max_rel_err(),
            self.tol
        );
        if let Some(w) = self.worst() {
            for (name, err) in &w.per_param {
                let _ = writeln!(out, "  {name:<10} {err:.3e}");
            }
            if let Some(m) = &w.worst {
                let _ = writeln!(
                    out,
                    "worst parameter: {}[{}] analytic {:.9e} numeric {:.9e} (seed {})",
                    m.param, m.index, m.analytic, m.numeric, w.seed
                );
            }
        }
        let _ = writeln!(out, "{}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Runs the check. `seed_override` replaces the configured seed (from
/// `SR_SEED`).
pub fn run(cfg: &GradcheckConfig, seed_override: Option<u64>) -> Result<GradcheckOutcome> {
    cfg.validate()?;
    let case = cfg.block.case(&cfg.hyper());
    let base = seed_override.unwrap_or(cfg.seed);
    let opts = CheckOptions::new(cfg.eps, cfg.tol);
    let mut results = Vec::with_capacity(cfg.seeds as usize);
    for seed in base..base + cfg.seeds {
        let check = gradient_check(&case, &cfg.shape, seed, opts, cfg.corrupt_backward).map_err(|e| match e {
            srblock::Error::Config(_) | srblock::Error::Dimension { .. } | srblock::Error::Shape { .. } => {
                usage(format!("{}: {e}", cfg.block))
            }
            other => anyhow::Error::new(other).context(format!("gradient check of {}", cfg.block)),
        })?;
        results.push(SeedResult {
            seed: check.seed,
            max_rel_err: check.report.max_rel_err,
            worst: check.report.worst,
            per_param: check.report.per_param,
        });
    }
    Ok(GradcheckOutcome {
        block: cfg.block,
        shape: cfg.shape.clone(),
        tol: cfg.tol,
        results,
    })
}

pub fn run_file(path: &Path) -> Result<GradcheckOutcome> {
    let cfg = GradcheckConfig::load(path)?;
    run(&cfg, crate::seed_override()?).with_context(|| format!("config {}", path.display()))
}
