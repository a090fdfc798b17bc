use std::path::Path;

use rand::Rng;

use super::config::NetConfig;
use crate::error::{Error, Result};
use crate::tensor::checkpoint::{self, TensorFile};
use crate::tensor::{Array, Real};

/// Initial log standard deviation of the action distribution (σ = 0.5).
pub const LOG_SIGMA_INIT: f64 = -std::f64::consts::LN_2;
pub const LOG_SIGMA_MIN: f64 = -5.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruSlots {
    pub w_ih: usize,
    pub w_hh: usize,
    pub b_ih: usize,
    pub b_hh: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSlots {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionSlots {
    pub w_q: usize,
    pub w_k: usize,
    pub w_v: usize,
    pub w_o: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderSlots {
    pub w_enc: usize,
    pub b_enc: usize,
    pub w_res: usize,
    pub b_res: usize,
}

/// Names, shapes, and slot indices of every trainable array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub gru: Vec<GruSlots>,
    pub linear: Option<DenseSlots>,
    pub attention: Option<AttentionSlots>,
    pub encoder: EncoderSlots,
    pub actor: Vec<DenseSlots>,
    pub critic: Vec<DenseSlots>,
    pub log_sigma: usize,
}

impl ParamLayout {
    pub fn new(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut slot = |name: String, shape: Vec<usize>| {
            names.push(name);
            shapes.push(shape);
            names.len() - 1
        };
        let d = cfg.d_h;
        let mut gru = Vec::new();
        let mut linear = None;
        if cfg.variant.uses_gru() {
            for l in 0..cfg.gru_layers {
                let input = if l == 0 { cfg.n_laser } else { d };
                gru.push(GruSlots {
                    w_ih: slot(format!("gru.l{l}.w_ih"), vec![input, 3 * d]),
                    w_hh: slot(format!("gru.l{l}.w_hh"), vec![d, 3 * d]),
                    b_ih: slot(format!("gru.l{l}.b_ih"), vec![3 * d]),
                    b_hh: slot(format!("gru.l{l}.b_hh"), vec![3 * d]),
                });
            }
        } else {
            linear = Some(DenseSlots {
                w: slot("linear.w".into(), vec![cfg.n_laser, d]),
                b: slot("linear.b".into(), vec![d]),
            });
        }
        let attention = cfg.variant.uses_attention().then(|| AttentionSlots {
            w_q: slot("attn.w_q".into(), vec![d, d]),
            w_k: slot("attn.w_k".into(), vec![d, d]),
            w_v: slot("attn.w_v".into(), vec![d, d]),
            w_o: slot("attn.w_o".into(), vec![d, d]),
        });
        let e = cfg.enc_dim;
        let encoder = EncoderSlots {
            w_enc: slot("enc.w_enc".into(), vec![4, e]),
            b_enc: slot("enc.b_enc".into(), vec![e]),
            w_res: slot("enc.w_res".into(), vec![e, e]),
            b_res: slot("enc.b_res".into(), vec![e]),
        };
        let mut head = |prefix: &str, hidden: &[usize], out: usize| {
            let mut layers = Vec::new();
            let mut width = cfg.feature_dim();
            for (i, &h) in hidden.iter().chain(std::iter::once(&out)).enumerate() {
                layers.push(DenseSlots {
                    w: slot(format!("{prefix}.l{i}.w"), vec![width, h]),
                    b: slot(format!("{prefix}.l{i}.b"), vec![h]),
                });
                width = h;
            }
            layers
        };
        let actor = head("actor", &cfg.actor_hidden, 2);
        let critic = head("critic", &cfg.critic_hidden, 1);
        let log_sigma = slot("log_sigma".into(), vec![2]);
        Ok(Self {
            names,
            shapes,
            gru,
            linear,
            attention,
            encoder,
            actor,
            critic,
            log_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn scalar_count(&self) -> usize {
        self.shapes.iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

/// Number of trainable scalars for `cfg`.
pub fn param_count(cfg: &NetConfig) -> Result<usize> {
    Ok(ParamLayout::new(cfg)?.scalar_count())
}

/// Network configuration, slot layout, and parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub config: NetConfig,
    pub layout: ParamLayout,
    pub values: Vec<Array<T>>,
}

impl<T: Real> NetParams<T> {
    /// Weights uniform in ±1/√fan_in, biases zero, log σ = ln 0.5.
    pub fn init(config: &NetConfig, rng: &mut impl Rng) -> Result<Self> {
        let layout = ParamLayout::new(config)?;
        let values = layout
            .names
            .iter()
            .zip(&layout.shapes)
            .map(|(name, shape)| {
                if name == "log_sigma" {
                    Array::filled(shape, T::from_f64(LOG_SIGMA_INIT))
                } else if shape.len() == 1 {
                    Array::zeros(shape)
                } else {
                    let bound = 1.0 / (shape[0] as f64).sqrt();
                    let numel = shape.iter().product();
                    let data = (0..numel)
                        .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                        .collect();
                    Array::new_unchecked(shape, data)
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            values,
        })
    }

    /// All-zero parameters except log σ, which keeps its initial value.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        let layout = ParamLayout::new(config)?;
        let values = layout
            .names
            .iter()
            .zip(&layout.shapes)
            .map(|(name, shape)| {
                if name == "log_sigma" {
                    Array::filled(shape, T::from_f64(LOG_SIGMA_INIT))
                } else {
                    Array::zeros(shape)
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            values,
        })
    }

    pub fn get(&self, name: &str) -> Option<&Array<T>> {
        self.layout.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array<T>> {
        self.layout.index_of(name).map(move |i| &mut self.values[i])
    }

    pub fn log_sigma(&self) -> [f64; 2] {
        let d = self.values[self.layout.log_sigma].data();
        [d[0].as_f64(), d[1].as_f64()]
    }

    /// Keep log σ inside its admissible interval after an update.
    pub fn clamp_log_sigma(&mut self) {
        let (lo, hi) = (T::from_f64(LOG_SIGMA_MIN), T::from_f64(LOG_SIGMA_MAX));
        for x in self.values[self.layout.log_sigma].data_mut() {
            *x = x.max(lo).min(hi);
        }
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            values: self.values.iter().map(|a| a.cast()).collect(),
        }
    }

    pub fn to_bytes(&self, metadata: serde_json::Value) -> Result<Vec<u8>> {
        let mut meta = serde_json::json!({ "net": self.config });
        if let (Some(m), serde_json::Value::Object(extra)) = (meta.as_object_mut(), metadata) {
            m.extend(extra);
        }
        let tensors: Vec<(&str, &Array<T>)> = self.layout.names.iter().map(String::as_str).zip(&self.values).collect();
        Ok(checkpoint::encode("lstp-net", &meta, &tensors)?)
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        std::fs::write(path, self.to_bytes(metadata)?)?;
        Ok(())
    }

    pub fn from_tensor_file(file: TensorFile<T>) -> Result<Self> {
        if file.kind != "lstp-net" {
            return Err(Error::Load(format!(
                "expected a network checkpoint, found kind {:?}",
                file.kind
            )));
        }
        let config: NetConfig = serde_json::from_value(
            file.metadata
                .get("net")
                .cloned()
                .ok_or_else(|| Error::Load("checkpoint has no net config".into()))?,
        )
        .map_err(|e| Error::Load(format!("net config in checkpoint: {e}")))?;
        let layout = ParamLayout::new(&config)?;
        let mut values = Vec::with_capacity(layout.len());
        for (name, shape) in layout.names.iter().zip(&layout.shapes) {
            let a = file
                .get(name)
                .ok_or_else(|| Error::Load(format!("checkpoint is missing tensor {name}")))?;
            if a.shape() != shape.as_slice() {
                return Err(Error::Load(format!(
                    "tensor {name}: checkpoint shape {:?}, expected {shape:?}",
                    a.shape()
                )));
            }
            values.push(a.clone());
        }
        Ok(Self { config, layout, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = checkpoint::load::<T>(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        Self::from_tensor_file(file)
    }

    /// Load and require the stored config to equal `expected`.
    pub fn load_matching(path: &Path, expected: &NetConfig) -> Result<Self> {
        let p = Self::load(path)?;
        if &p.config != expected {
            return Err(Error::Load(format!(
                "{}: checkpoint net config {:?} does not match requested {:?}",
                path.display(),
                p.config,
                expected
            )));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Variant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_count_is_exact() {
        // GRU: 3·(130·256 + 256·256 + 2·256) + 3·(2·256·256 + 2·256) = 692_736
        // attention: 4·256·256 = 262_144
        // encoder: 4·256 + 256 + 256·256 + 256 = 67_072
        // actor: 512·256 + 256 + 256·128 + 128 + 128·2 + 2 = 164_482
        // critic: 512·256 + 256 + 256·128 + 128 + 128·1 + 1 = 164_353
        // log σ: 2
        let expected = 692_736 + 262_144 + 67_072 + 164_482 + 164_353 + 2;
        assert_eq!(expected, 1_350_789);
        assert_eq!(param_count(&NetConfig::default()).unwrap(), expected);
    }

    #[test]
    fn heads_do_not_change_count() {
        let base = param_count(&NetConfig::default()).unwrap();
        for heads in [1, 2, 8, 16] {
            let cfg = NetConfig {
                heads,
                ..NetConfig::default()
            };
            assert_eq!(param_count(&cfg).unwrap(), base);
        }
    }

    #[test]
    fn linear_variant_is_smaller() {
        let lin = NetConfig {
            variant: Variant::Linear,
            ..NetConfig::default()
        };
        let gru = NetConfig {
            variant: Variant::Gru,
            ..NetConfig::default()
        };
        let full = param_count(&NetConfig::default()).unwrap();
        assert!(param_count(&lin).unwrap() < full);
        assert_eq!(full - param_count(&gru).unwrap(), 4 * 256 * 256);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = NetConfig::default();
        let a = NetParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = NetParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        // every matrix with fan_in 256 stays within ±1/16
        for (name, shape) in a.layout.names.iter().zip(&a.layout.shapes) {
            if shape.len() == 2 && shape[0] == 256 {
                let w = a.get(name).unwrap();
                assert!(w.data().iter().all(|x| x.abs() <= 0.0625), "{name}");
            }
        }
        let s = a.log_sigma();
        assert_eq!((s[0].exp() * 1e6).round() / 1e6, 0.5);
        let exact = NetParams::<f64>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(exact.log_sigma()[0].exp(), 0.5);
    }

    #[test]
    fn log_sigma_clamp() {
        let cfg = NetConfig {
            n_laser: 4,
            d_h: 8,
            heads: 2,
            enc_dim: 8,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..NetConfig::default()
        };
        let mut p = NetParams::<f64>::zeros(&cfg).unwrap();
        p.get_mut("log_sigma").unwrap().data_mut().copy_from_slice(&[-9.0, 3.5]);
        p.clamp_log_sigma();
        assert_eq!(p.log_sigma(), [-5.0, 2.0]);
    }

    #[test]
    fn checkpoint_roundtrip_and_mismatch() {
        let cfg = NetConfig {
            n_laser: 6,
            d_h: 8,
            heads: 2,
            enc_dim: 4,
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..NetConfig::default()
        };
        let p = NetParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.lstp");
        p.save(&path, serde_json::json!({"iteration": 4})).unwrap();
        let q = NetParams::<f32>::load(&path).unwrap();
        assert_eq!(p, q);
        let other = NetConfig { d_h: 16, ..cfg.clone() };
        assert!(matches!(
            NetParams::<f32>::load_matching(&path, &other),
            Err(Error::Load(_))
        ));
    }
}
