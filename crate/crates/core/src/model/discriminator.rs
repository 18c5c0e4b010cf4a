use candle_core::{DType, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::layers::{leaky_relu, sigmoid, Conv, Norm};
use crate::model::{ModelConfig, ParamStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Global,
    Local,
}

/// Three stride-2 convolutions, global average pooling, affine score, sigmoid.
#[derive(Debug, Clone)]
pub(crate) struct Discriminator {
    convs: Vec<Conv>,
    norms: Vec<Option<Norm>>,
    head_w: Tensor,
    head_b: Tensor,
    leak: f64,
}

impl Discriminator {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut c_in = 3;
        for (l, &w) in cfg.disc_widths.iter().enumerate() {
            convs.push(Conv::new(store, &format!("{name}.conv{l}"), c_in, w, 4, 2, 1, rng)?);
            norms.push(if cfg.norm && l > 0 {
                Some(Norm::new(store, &format!("{name}.norm{l}"), w, rng)?)
            } else {
                None
            });
            c_in = w;
        }
        Ok(Self {
            convs,
            norms,
            head_w: store.normal(format!("{name}.head.weight"), &[c_in, 1], 0.0, 0.02, rng)?,
            head_b: store.constant(format!("{name}.head.bias"), &[1], 0.0)?,
            leak: cfg.leak,
        })
    }

    /// `(N,)` scores in `(0, 1)`.
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            h = conv.forward(&h)?;
            if let Some(n) = norm {
                h = n.forward(&h)?;
            }
            h = leaky_relu(&h, self.leak)?;
        }
        let pooled = h.mean((2, 3))?;
        let logit = pooled.matmul(&self.head_w)?.broadcast_add(&self.head_b)?;
        sigmoid(&logit.squeeze(1)?)
    }
}

/// The global (whole frame) and local (mouth-masked frame) discriminators.
#[derive(Debug, Clone)]
pub struct Discriminators {
    input_size: usize,
    params: ParamStore,
    global: Discriminator,
    local: Discriminator,
}

impl Discriminators {
    pub fn new(config: &ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new(dtype);
        let global = Discriminator::new(&mut params, "global", config, &mut rng)?;
        let local = Discriminator::new(&mut params, "local", config, &mut rng)?;
        Ok(Self {
            input_size: config.input_size,
            params,
            global,
            local,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Scores a `(N, 3, H, W)` batch. The local branch expects frames already
    /// multiplied by the mouth mask.
    pub fn discriminate(&self, which: Which, image: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = image.dims4()?;
        if c != 3 || h != self.input_size || w != self.input_size {
            return Err(Error::Shape(format!(
                "discriminator expects (N, 3, {s}, {s}), got {:?}",
                image.dims(),
                s = self.input_size
            )));
        }
        let x = image.to_dtype(self.params.dtype())?;
        match which {
            Which::Global => self.global.forward(&x),
            Which::Local => self.local.forward(&x),
        }
    }

    /// Names of the parameters belonging to one branch.
    pub fn branch_params(&self, which: Which) -> impl Iterator<Item = &String> {
        let prefix = match which {
            Which::Global => "global.",
            Which::Local => "local.",
        };
        self.params.iter().map(|(k, _)| k).filter(move |k| k.starts_with(prefix))
    }
}
