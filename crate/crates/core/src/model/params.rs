use std::collections::{BTreeMap, HashMap};

use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Named trainable tensors, iterated in name order.
///
/// Layers keep clones of the tensors handed out here; [`ParamStore::assign`]
/// writes in place so those clones observe the new values.
#[derive(Debug, Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    dtype: DType,
    device: Device,
}

impl ParamStore {
    pub fn new(dtype: DType) -> Self {
        Self {
            vars: BTreeMap::new(),
            dtype,
            device: Device::Cpu,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn insert(&mut self, name: String, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.vars.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter {name}")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let handle = var.as_tensor().clone();
        self.vars.insert(name, var);
        Ok(handle)
    }

    pub(crate) fn normal<R: Rng + ?Sized>(
        &mut self,
        name: String,
        shape: &[usize],
        mean: f64,
        std: f64,
        rng: &mut R,
    ) -> Result<Tensor> {
        let dist = Normal::new(mean, std).map_err(|e| Error::Invalid(e.to_string()))?;
        let n = shape.iter().product();
        let values = (0..n).map(|_| dist.sample(rng)).collect();
        self.insert(name, values, shape)
    }

    pub(crate) fn constant(&mut self, name: String, shape: &[usize], value: f64) -> Result<Tensor> {
        let n = shape.iter().product();
        self.insert(name, vec![value; n], shape)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Overwrites one parameter; the shape must match.
    pub fn assign(&self, name: &str, value: &Tensor) -> Result<()> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| Error::ArchitectureMismatch(format!("no parameter named {name}")))?;
        if var.dims() != value.dims() {
            return Err(Error::ArchitectureMismatch(format!(
                "{name}: shape {:?} vs {:?}",
                var.dims(),
                value.dims()
            )));
        }
        var.set(&value.to_dtype(self.dtype)?)?;
        Ok(())
    }

    /// Loads `prefix + name` for every parameter. Missing or extra names, or shape
    /// differences, are architecture mismatches.
    pub fn load_prefixed(&self, tensors: &HashMap<String, Tensor>, prefix: &str) -> Result<()> {
        let extra = tensors
            .keys()
            .filter_map(|k| k.strip_prefix(prefix))
            .find(|k| !self.vars.contains_key(*k));
        if let Some(k) = extra {
            return Err(Error::ArchitectureMismatch(format!("unexpected parameter {k}")));
        }
        for name in self.vars.keys() {
            let t = tensors
                .get(&format!("{prefix}{name}"))
                .ok_or_else(|| Error::ArchitectureMismatch(format!("missing parameter {name}")))?;
            self.assign(name, t)?;
        }
        Ok(())
    }

    pub fn prefixed_tensors(&self, prefix: &str) -> Vec<(String, Tensor)> {
        self.vars
            .iter()
            .map(|(k, v)| (format!("{prefix}{k}"), v.as_tensor().detach()))
            .collect()
    }

    /// Order-sensitive hash of every parameter's bit pattern.
    pub fn checksum(&self) -> Result<u64> {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for (name, var) in &self.vars {
            for b in name.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
            }
            for v in var.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()? {
                h = (h ^ v.to_bits()).wrapping_mul(0x100_0000_01b3);
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn assign_is_visible_through_handles() {
        let mut s = ParamStore::new(DType::F32);
        let h = s.constant("w".into(), &[2], 1.0).unwrap();
        let before = s.checksum().unwrap();
        s.assign("w", &Tensor::new(&[3f32, 4.0], &Device::Cpu).unwrap()).unwrap();
        assert_eq!(h.to_vec1::<f32>().unwrap(), vec![3.0, 4.0]);
        assert_ne!(before, s.checksum().unwrap());
        assert!(s.assign("w", &Tensor::new(&[1f32], &Device::Cpu).unwrap()).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let build = || {
            let mut s = ParamStore::new(DType::F64);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
            s.normal("a".into(), &[3, 3], 0.0, 0.02, &mut rng).unwrap();
            s.checksum().unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn load_prefixed_rejects_missing_and_extra() {
        let mut s = ParamStore::new(DType::F32);
        s.constant("w".into(), &[2], 1.0).unwrap();
        let t = Tensor::new(&[5f32, 6.0], &Device::Cpu).unwrap();
        let mut m = HashMap::new();
        assert!(s.load_prefixed(&m, "g.").is_err());
        m.insert("g.w".to_string(), t.clone());
        s.load_prefixed(&m, "g.").unwrap();
        m.insert("g.extra".to_string(), t);
        assert!(matches!(s.load_prefixed(&m, "g."), Err(Error::ArchitectureMismatch(_))));
    }
}
