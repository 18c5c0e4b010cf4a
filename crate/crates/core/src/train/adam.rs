use std::collections::{BTreeMap, HashMap};

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use crate::model::ParamStore;
use crate::{Error, Result};

/// Adaptive-moment optimizer over a [`ParamStore`].
///
/// Moments are kept per parameter name so they can be written to and read
/// back from a checkpoint exactly.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let mut first = BTreeMap::new();
        let mut second = BTreeMap::new();
        for (name, var) in params.iter() {
            first.insert(name.clone(), var.zeros_like()?);
            second.insert(name.clone(), var.zeros_like()?);
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            steps: 0,
            first,
            second,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every parameter of `params` selected by `filter`
    /// that has a gradient in `grads`. Parameters without a gradient keep their
    /// values and moments.
    pub fn step(&mut self, params: &ParamStore, grads: &GradStore, filter: impl Fn(&str) -> bool) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, var) in params.iter() {
            if !filter(name) {
                continue;
            }
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let m = self.first.get_mut(name).ok_or_else(|| missing(name))?;
            let v = self.second.get_mut(name).ok_or_else(|| missing(name))?;
            *m = ((m.affine(self.beta1, 0.0)? + g.affine(1.0 - self.beta1, 0.0)?)?).detach();
            *v = ((v.affine(self.beta2, 0.0)? + g.sqr()?.affine(1.0 - self.beta2, 0.0)?)?).detach();
            let denom = (v.affine(1.0 / c2, 0.0)?.sqrt()? + self.eps)?;
            let update = (m.affine(self.lr / c1, 0.0)? / denom)?;
            update_var(var, &update)?;
        }
        Ok(())
    }

    /// Moments as `(prefix + "m." + name, tensor)` and `(prefix + "v." + name, tensor)`.
    pub fn state_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let m = self.first.iter().map(|(k, t)| (format!("{prefix}m.{k}"), t.clone()));
        let v = self.second.iter().map(|(k, t)| (format!("{prefix}v.{k}"), t.clone()));
        m.chain(v).collect()
    }

    pub fn load_state(&mut self, tensors: &HashMap<String, Tensor>, prefix: &str, steps: u64) -> Result<()> {
        let dtype = self.first.values().next().map(|t| t.dtype());
        for (kind, map) in [("m", &mut self.first), ("v", &mut self.second)] {
            for (name, slot) in map.iter_mut() {
                let key = format!("{prefix}{kind}.{name}");
                let t = tensors
                    .get(&key)
                    .ok_or_else(|| Error::CorruptCheckpoint(format!("missing optimizer state {key}")))?;
                if t.dims() != slot.dims() {
                    return Err(Error::ArchitectureMismatch(format!("optimizer state {key} has shape {:?}", t.dims())));
                }
                *slot = t.to_dtype(dtype.unwrap_or(t.dtype()))?;
            }
        }
        self.steps = steps;
        Ok(())
    }
}

fn missing(name: &str) -> Error {
    Error::Invalid(format!("optimizer has no state for {name}"))
}

fn update_var(var: &Var, update: &Tensor) -> Result<()> {
    var.set(&var.as_tensor().sub(update)?.detach())?;
    Ok(())
}
