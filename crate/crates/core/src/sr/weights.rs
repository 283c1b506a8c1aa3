use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ReasoningKind, SqueezeKind, SrConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum ReasoningWeights<T: Scalar = f64> {
    /// `w_g: [m, m]`, `a_g: [k, k]`.
    Learned { w_g: Tensor<T>, a_g: Tensor<T> },
    /// Three `[m, m]` node-feature projections.
    Correlation {
        w_phi: Tensor<T>,
        w_theta: Tensor<T>,
        w_rho: Tensor<T>,
    },
}

/// Parameters of one SR block. The layout is tied to an [`SrConfig`]:
/// `reduce_c` exists only for GHP squeezing and the reasoning variant fixes
/// which reasoning weights exist.
#[derive(Clone, Debug, PartialEq)]
pub struct SrWeights<T: Scalar = f64> {
    /// `[c_reduced, c_in]`, produces `B` (and is the sole reduction for GAP).
    pub reduce_b: Tensor<T>,
    /// `[c_reduced, c_in]`, produces `C` for GHP.
    pub reduce_c: Option<Tensor<T>>,
    pub reasoning: ReasoningWeights<T>,
    /// `[c_in, c_reduced]`, maps the reasoned vector to the channel gate.
    pub w_r: Tensor<T>,
}

/// Which weight distribution [`SrWeights::sample`] draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Draw {
    /// Fresh block: adjacency and gate projection zeroed.
    Init,
    /// Every tensor random, for gradient checks and golden files.
    Dense,
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

impl<T: Scalar> SrWeights<T> {
    fn sample(cfg: &SrConfig, seed: u64, draw: Draw) -> Result<Self> {
        cfg.validate()?;
        let (c_in, c_red, m, k) = (cfg.c_in, cfg.c_reduced(), cfg.m(), cfg.k);
        let mut rng = rng_for(seed);
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let reduce_b = Tensor::uniform(&[c_red, c_in], fan(c_in), &mut rng)?;
        let reduce_c = match cfg.squeeze {
            SqueezeKind::Gap => None,
            SqueezeKind::Ghp => Some(Tensor::uniform(&[c_red, c_in], fan(c_in), &mut rng)?),
        };
        let reasoning = match cfg.reasoning {
            ReasoningKind::Learned => ReasoningWeights::Learned {
                w_g: Tensor::uniform(&[m, m], fan(m), &mut rng)?,
                a_g: match draw {
                    Draw::Init => Tensor::zeros(&[k, k])?,
                    Draw::Dense => Tensor::uniform(&[k, k], fan(k), &mut rng)?,
                },
            },
            ReasoningKind::Correlation => ReasoningWeights::Correlation {
                w_phi: Tensor::uniform(&[m, m], fan(m), &mut rng)?,
                w_theta: Tensor::uniform(&[m, m], fan(m), &mut rng)?,
                w_rho: Tensor::uniform(&[m, m], fan(m), &mut rng)?,
            },
        };
        let w_r = match draw {
            Draw::Init => Tensor::zeros(&[c_in, c_red])?,
            Draw::Dense => Tensor::uniform(&[c_in, c_red], fan(c_red), &mut rng)?,
        };
        Ok(SrWeights {
            reduce_b,
            reduce_c,
            reasoning,
            w_r,
        })
    }

    /// Fresh block weights: reductions and node transforms uniform in
    /// `±1/√fan_in`, learned adjacency and `w_r` zero. With `w_r = 0` the
    /// block is the identity map.
    pub fn init(cfg: &SrConfig, seed: u64) -> Result<Self> {
        Self::sample(cfg, seed, Draw::Init)
    }

    /// Like [`SrWeights::init`] but with every tensor random, so that no
    /// gradient path is trivially zero.
    pub fn random(cfg: &SrConfig, seed: u64) -> Result<Self> {
        Self::sample(cfg, seed, Draw::Dense)
    }

    pub fn validate(&self, cfg: &SrConfig) -> Result<()> {
        cfg.validate()?;
        let (c_in, c_red, m, k) = (cfg.c_in, cfg.c_reduced(), cfg.m(), cfg.k);
        let expect = |name: &str, t: &Tensor<T>, shape: &[usize]| {
            if t.shape() == shape {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )))
            }
        };
        expect("w_reduce_b", &self.reduce_b, &[c_red, c_in])?;
        match (cfg.squeeze, &self.reduce_c) {
            (SqueezeKind::Gap, None) => {}
            (SqueezeKind::Ghp, Some(c)) => expect("w_reduce_c", c, &[c_red, c_in])?,
            (SqueezeKind::Gap, Some(_)) => {
                return Err(Error::Config("w_reduce_c present for GAP squeezing".into()))
            }
            (SqueezeKind::Ghp, None) => {
                return Err(Error::Config("w_reduce_c missing for GHP squeezing".into()))
            }
        }
        match (cfg.reasoning, &self.reasoning) {
            (ReasoningKind::Learned, ReasoningWeights::Learned { w_g, a_g }) => {
                expect("w_g", w_g, &[m, m])?;
                expect("a_g", a_g, &[k, k])?;
            }
            (
                ReasoningKind::Correlation,
                ReasoningWeights::Correlation {
                    w_phi,
                    w_theta,
                    w_rho,
                },
            ) => {
                expect("w_phi", w_phi, &[m, m])?;
                expect("w_theta", w_theta, &[m, m])?;
                expect("w_rho", w_rho, &[m, m])?;
            }
            (kind, _) => {
                return Err(Error::Config(format!(
                    "reasoning weights do not match {kind:?} reasoning"
                )))
            }
        }
        expect("w_r", &self.w_r, &[c_in, c_red])
    }

    /// Weights in a fixed order with their checkpoint names.
    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = vec![("w_reduce_b", &self.reduce_b)];
        if let Some(c) = &self.reduce_c {
            out.push(("w_reduce_c", c));
        }
        match &self.reasoning {
            ReasoningWeights::Learned { w_g, a_g } => {
                out.push(("w_g", w_g));
                out.push(("a_g", a_g));
            }
            ReasoningWeights::Correlation {
                w_phi,
                w_theta,
                w_rho,
            } => {
                out.push(("w_phi", w_phi));
                out.push(("w_theta", w_theta));
                out.push(("w_rho", w_rho));
            }
        }
        out.push(("w_r", &self.w_r));
        out
    }

    /// Rebuilds weights from tensors in [`SrWeights::named`] order.
    pub fn from_ordered(cfg: &SrConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let mut it = tensors.into_iter();
        let mut next = |name: &str| {
            it.next()
                .ok_or_else(|| Error::Config(format!("missing weight {name}")))
        };
        let reduce_b = next("w_reduce_b")?;
        let reduce_c = match cfg.squeeze {
            SqueezeKind::Gap => None,
            SqueezeKind::Ghp => Some(next("w_reduce_c")?),
        };
        let reasoning = match cfg.reasoning {
            ReasoningKind::Learned => ReasoningWeights::Learned {
                w_g: next("w_g")?,
                a_g: next("a_g")?,
            },
            ReasoningKind::Correlation => ReasoningWeights::Correlation {
                w_phi: next("w_phi")?,
                w_theta: next("w_theta")?,
                w_rho: next("w_rho")?,
            },
        };
        let w_r = next("w_r")?;
        if it.next().is_some() {
            return Err(Error::Config("too many weights for this configuration".into()));
        }
        let weights = SrWeights {
            reduce_b,
            reduce_c,
            reasoning,
            w_r,
        };
        weights.validate(cfg)?;
        Ok(weights)
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> SrWeights<U> {
        SrWeights {
            reduce_b: self.reduce_b.cast(),
            reduce_c: self.reduce_c.as_ref().map(Tensor::cast),
            reasoning: match &self.reasoning {
                ReasoningWeights::Learned { w_g, a_g } => ReasoningWeights::Learned {
                    w_g: w_g.cast(),
                    a_g: a_g.cast(),
                },
                ReasoningWeights::Correlation {
                    w_phi,
                    w_theta,
                    w_rho,
                } => ReasoningWeights::Correlation {
                    w_phi: w_phi.cast(),
                    w_theta: w_theta.cast(),
                    w_rho: w_rho.cast(),
                },
            },
            w_r: self.w_r.cast(),
        }
    }
}

/// Convenience wrapper for [`SrWeights::init`] at `f64`.
pub fn init_weights(cfg: &SrConfig, seed: u64) -> Result<SrWeights> {
    SrWeights::init(cfg, seed)
}
