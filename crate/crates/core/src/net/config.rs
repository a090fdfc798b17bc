use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which temporal encoder feeds the actor/critic heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Two-layer GRU followed by last-frame-query multi-head attention.
    #[default]
    Lstp,
    /// GRU only; the context is the last frame's hidden state.
    Gru,
    /// Per-frame linear map with ELU in place of the GRU; attention kept.
    Linear,
}

impl Variant {
    pub fn uses_gru(self) -> bool {
        matches!(self, Variant::Lstp | Variant::Gru)
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, Variant::Lstp | Variant::Linear)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lstp => "lstp",
            Variant::Gru => "gru",
            Variant::Linear => "linear",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstp" => Ok(Variant::Lstp),
            "gru" => Ok(Variant::Gru),
            "linear" => Ok(Variant::Linear),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected lstp, gru or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// LiDAR beams per frame.
    pub n_laser: usize,
    /// Stacked frames per observation.
    pub stack: usize,
    /// GRU hidden size, also the attention model width.
    pub d_h: usize,
    pub gru_layers: usize,
    pub heads: usize,
    /// Width of the residual goal/velocity encoding.
    pub enc_dim: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub variant: Variant,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            n_laser: 130,
            stack: 5,
            d_h: 256,
            gru_layers: 2,
            heads: 4,
            enc_dim: 256,
            actor_hidden: vec![256, 128],
            critic_hidden: vec![256, 128],
            variant: Variant::Lstp,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_laser == 0 || self.stack == 0 || self.d_h == 0 || self.enc_dim == 0 {
            return bad(format!(
                "net sizes must be positive (n_laser={}, stack={}, d_h={}, enc_dim={})",
                self.n_laser, self.stack, self.d_h, self.enc_dim
            ));
        }
        if self.heads == 0 || !self.d_h.is_multiple_of(self.heads) {
            return bad(format!("d_h={} is not divisible by heads={}", self.d_h, self.heads));
        }
        if self.variant.uses_gru() && self.gru_layers == 0 {
            return bad("gru_layers must be at least 1".into());
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        Ok(())
    }

    /// Width of the concatenated context/state feature.
    pub fn feature_dim(&self) -> usize {
        self.d_h + self.enc_dim
    }
}
