//! One TOML file per run with `[scenario]`, `[net]`, `[train]`, `[reward]`
//! and `[eval]` sections, plus environment overrides.
//!
//! Overrides use `LSTP_<SECTION>__<KEY>`, with `__` separating nested keys:
//! `LSTP_TRAIN__ADAM__LR=0.001` sets `train.adam.lr`. Values are parsed as
//! TOML literals and fall back to plain strings, so `LSTP_REWARD__MODE=conventional`
//! works without quotes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::net::NetConfig;
use crate::rewards::RewardConfig;
use crate::sim::ScenarioConfig;
use crate::train::TrainConfig;

pub const ENV_PREFIX: &str = "LSTP_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub reward: RewardConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Single agent among five obstacles in an 8 m arena with a 32-beam
    /// sensor and a 64-wide network; trains in a few minutes on one core.
    pub fn desk_stage1() -> Self {
        let mut scenario = ScenarioConfig::stage1();
        scenario.lidar.n_laser = 32;
        let net = NetConfig {
            n_laser: 32,
            d_h: 64,
            enc_dim: 64,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            ..NetConfig::default()
        };
        let mut train = TrainConfig {
            iterations: 120,
            horizon: 256,
            envs: 8,
            minibatch: 256,
            checkpoint_every: 40,
            ..TrainConfig::default()
        };
        train.adam.lr = 1e-3;
        let reward = RewardConfig {
            w_g: 10.0,
            k_c: 0.1,
            ..RewardConfig::default()
        };
        Self {
            scenario,
            net,
            train,
            reward,
            eval: EvalConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply `LSTP_*` overrides from the process environment.
    pub fn with_env_overrides(self) -> Result<Self> {
        self.with_overrides(std::env::vars())
    }

    /// Apply overrides from `(name, value)` pairs; names without the prefix
    /// are ignored.
    pub fn with_overrides(self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        if vars.is_empty() {
            return Ok(self);
        }
        vars.sort();
        let mut root = toml::Value::try_from(&self).map_err(|e| Error::Config(e.to_string()))?;
        for (name, raw) in vars {
            let path: Vec<String> = name[ENV_PREFIX.len()..]
                .split("__")
                .map(str::to_ascii_lowercase)
                .collect();
            if path.iter().any(String::is_empty) {
                return Err(Error::Config(format!("malformed override name {name}")));
            }
            set_path(&mut root, &path, parse_literal(&raw)).map_err(|m| Error::Config(format!("{name}: {m}")))?;
        }
        root.try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("after overrides: {e}")))
    }

    /// Check every section and the couplings between them.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.reward.validate()?;
        if self.scenario.lidar.n_laser != self.net.n_laser {
            return Err(Error::Config(format!(
                "scenario.lidar.n_laser = {} but net.n_laser = {}",
                self.scenario.lidar.n_laser, self.net.n_laser
            )));
        }
        if self.eval.n_trials == 0 {
            return Err(Error::Config("eval.n_trials must be at least 1".into()));
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Value, path: &[String], value: toml::Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut node = root;
    for key in parents {
        let table = node.as_table_mut().ok_or_else(|| format!("{key} is not a section"))?;
        node = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| format!("{last} has no parent section"))?;
    // integers given for float fields would fail to deserialize
    let value = match (table.get(last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.clone(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::RewardMode;

    fn vars(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn toml_roundtrip() {
        let c = RunConfig::desk_stage1();
        c.validate().unwrap();
        let back = RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml_str("[train]\niterations = 3\n").unwrap();
        assert_eq!(c.train.iterations, 3);
        assert_eq!(c.net, NetConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml_str("[scenario]\nobstacels = 3\n").unwrap_err();
        assert!(err.to_string().contains("obstacels"), "{err}");
        assert!(RunConfig::from_toml_str("[sceanrio]\n").is_err());
    }

    #[test]
    fn env_overrides_nested_keys() {
        let c = RunConfig::default()
            .with_overrides(vars(&[
                ("LSTP_TRAIN__ADAM__LR", "0.01"),
                ("LSTP_REWARD__MODE", "conventional"),
                ("LSTP_SCENARIO__LIDAR__Z_MAX", "5"),
                ("LSTP_NET__ACTOR_HIDDEN", "[8, 8]"),
                ("HOME", "/root"),
            ]))
            .unwrap();
        assert_eq!(c.train.adam.lr, 0.01);
        assert_eq!(c.reward.mode, RewardMode::Conventional);
        assert_eq!(c.scenario.lidar.z_max, 5.0);
        assert_eq!(c.net.actor_hidden, vec![8, 8]);
    }

    #[test]
    fn bad_override_is_a_config_error() {
        let r = RunConfig::default().with_overrides(vars(&[("LSTP_TRAIN__NOPE", "1")]));
        assert!(matches!(r, Err(Error::Config(_))));
        let r = RunConfig::default().with_overrides(vars(&[("LSTP_TRAIN__EPOCHS", "many")]));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_sensor_is_rejected() {
        let mut c = RunConfig::default();
        c.net.n_laser = 32;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
