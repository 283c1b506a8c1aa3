use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use srblock::cost::{BlockKind, BlockSpec};
use srblock::sr::{ReasoningKind, SqueezeKind, SrConfig};
use srblock::BlockCase;

/// The six runnable block variants, by command-line name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockName {
    SrGap,
    SrGapCorr,
    SrGhp,
    SrGhpCorr,
    Se,
    Nl,
}

impl BlockName {
    pub const ALL: [BlockName; 6] = [
        BlockName::SrGap,
        BlockName::SrGapCorr,
        BlockName::SrGhp,
        BlockName::SrGhpCorr,
        BlockName::Se,
        BlockName::Nl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BlockName::SrGap => "sr_gap",
            BlockName::SrGapCorr => "sr_gap_corr",
            BlockName::SrGhp => "sr_ghp",
            BlockName::SrGhpCorr => "sr_ghp_corr",
            BlockName::Se => "se",
            BlockName::Nl => "nl",
        }
    }

    fn sr_kinds(&self) -> Option<(SqueezeKind, ReasoningKind)> {
        use ReasoningKind::*;
        use SqueezeKind::*;
        match self {
            BlockName::SrGap => Some((Gap, Learned)),
            BlockName::SrGapCorr => Some((Gap, Correlation)),
            BlockName::SrGhp => Some((Ghp, Learned)),
            BlockName::SrGhpCorr => Some((Ghp, Correlation)),
            _ => None,
        }
    }

    pub fn case(&self, p: &Hyper) -> BlockCase {
        match (self, self.sr_kinds()) {
            (_, Some((squeeze, reasoning))) => BlockCase::Sr(
                SrConfig::new(p.c_in)
                    .with_ratio(p.ratio)
                    .with_nodes(p.k)
                    .with_squeeze(squeeze)
                    .with_reasoning(reasoning),
            ),
            (BlockName::Se, _) => BlockCase::Se {
                c_in: p.c_in,
                reduction: p.reduction,
            },
            _ => BlockCase::Nl { c_in: p.c_in },
        }
    }

    pub fn block_spec(&self, p: &Hyper) -> BlockSpec {
        match self.case(p) {
            BlockCase::Sr(cfg) => BlockSpec::from_sr(&cfg),
            BlockCase::Se { c_in, reduction } => BlockSpec {
                r_se: reduction,
                ..BlockSpec::new(BlockKind::Se, c_in)
            },
            BlockCase::Nl { c_in } => BlockSpec::new(BlockKind::Nl, c_in),
        }
    }
}

impl fmt::Display for BlockName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|b| b.as_str() == norm).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|b| b.as_str()).collect();
            format!("unknown block {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// Hyper-parameters shared by every variant; each block reads what it needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hyper {
    pub c_in: usize,
    pub ratio: usize,
    pub k: usize,
    pub reduction: usize,
}

impl Hyper {
    pub fn new(c_in: usize) -> Self {
        Hyper {
            c_in,
            ratio: srblock::sr::DEFAULT_RATIO,
            k: srblock::sr::DEFAULT_NODES,
            reduction: srblock::baselines::DEFAULT_SE_REDUCTION,
        }
    }
}
