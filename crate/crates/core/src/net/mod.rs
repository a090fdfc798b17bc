//! Recurrent attention policy/value network and its ablation variants.

pub mod config;
pub mod model;
pub mod params;
pub mod policy;

pub use config::{NetConfig, Variant};
pub use model::{ForwardVars, ObsBatch};
pub use params::{
    param_count, AttentionSlots, DenseSlots, EncoderSlots, GruSlots, NetParams, ParamLayout, LOG_SIGMA_INIT,
    LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};
pub use policy::{
    clamp_action, gaussian_log_prob, obs_batch, sample_action, PolicyOutput, SampledAction, OMEGA_RANGE, V_RANGE,
};
