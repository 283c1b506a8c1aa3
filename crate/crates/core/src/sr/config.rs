use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqueezeKind {
    /// Global average pooling of the reduced map.
    Gap,
    /// Global Hadamard-product pooling of two reduced maps.
    Ghp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningKind {
    /// Learned adjacency propagated through `I − A`.
    Learned,
    /// Data-dependent adjacency from node query/key correlations.
    Correlation,
}

/// Optional squashing of the channel gate before it scales the input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateActivation {
    #[default]
    None,
    Sigmoid,
}

pub const DEFAULT_RATIO: usize = 2;
pub const DEFAULT_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SrConfig {
    pub c_in: usize,
    /// Channel reduction factor applied before squeezing.
    pub ratio: usize,
    /// Node count.
    pub k: usize,
    pub squeeze: SqueezeKind,
    pub reasoning: ReasoningKind,
    #[serde(default)]
    pub gate: GateActivation,
}

impl SrConfig {
    /// Default hyper-parameters: ratio 2, 16 nodes, GAP squeeze, learned
    /// adjacency, ungated reconstruction.
    pub fn new(c_in: usize) -> Self {
        SrConfig {
            c_in,
            ratio: DEFAULT_RATIO,
            k: DEFAULT_NODES,
            squeeze: SqueezeKind::Gap,
            reasoning: ReasoningKind::Learned,
            gate: GateActivation::None,
        }
    }

    pub fn with_ratio(mut self, ratio: usize) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn with_nodes(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_squeeze(mut self, squeeze: SqueezeKind) -> Self {
        self.squeeze = squeeze;
        self
    }

    pub fn with_reasoning(mut self, reasoning: ReasoningKind) -> Self {
        self.reasoning = reasoning;
        self
    }

    pub fn with_gate(mut self, gate: GateActivation) -> Self {
        self.gate = gate;
        self
    }

    /// All four squeeze × reasoning combinations with the other fields of `self`.
    pub fn variants(self) -> [SrConfig; 4] {
        use ReasoningKind::*;
        use SqueezeKind::*;
        [(Gap, Learned), (Gap, Correlation), (Ghp, Learned), (Ghp, Correlation)]
            .map(|(s, r)| self.with_squeeze(s).with_reasoning(r))
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_in == 0 || self.ratio == 0 || self.k == 0 {
            return Err(Error::Config(format!(
                "c_in, ratio and k must be positive: {self:?}"
            )));
        }
        if self.c_in % self.ratio != 0 {
            return Err(Error::Config(format!(
                "ratio {} does not divide c_in {}",
                self.ratio, self.c_in
            )));
        }
        if self.c_reduced() % self.k != 0 {
            return Err(Error::Config(format!(
                "node count {} does not divide the reduced width {}",
                self.k,
                self.c_reduced()
            )));
        }
        Ok(())
    }

    pub fn c_reduced(&self) -> usize {
        self.c_in / self.ratio
    }

    /// Feature dimension of each node.
    pub fn m(&self) -> usize {
        self.c_reduced() / self.k
    }

    /// Short label such as `sr_ghp_corr`.
    pub fn label(&self) -> String {
        let squeeze = match self.squeeze {
            SqueezeKind::Gap => "gap",
            SqueezeKind::Ghp => "ghp",
        };
        match self.reasoning {
            ReasoningKind::Learned => format!("sr_{squeeze}"),
            ReasoningKind::Correlation => format!("sr_{squeeze}_corr"),
        }
    }
}
