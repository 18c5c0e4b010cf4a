use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-emotion expression degrees, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionVector {
    values: Vec<f64>,
}

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("action vector must not be empty".into()));
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::DegreeOutOfRange(v));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    /// Degree `degree` on emotion `index` (1-based), zero elsewhere.
    pub fn one_hot(n: usize, index: usize, degree: f64) -> Result<Self> {
        if index == 0 || index > n {
            return Err(Error::EmotionIndex { index, n });
        }
        let mut values = vec![0.0; n];
        values[index - 1] = degree;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// At most one non-zero entry, as required of training vectors.
    pub fn is_one_hot(&self) -> bool {
        self.values.iter().filter(|&&v| v != 0.0).count() <= 1
    }

    /// `(1-based index, degree)` of the non-zero entries.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i + 1, v))
    }
}

impl TryFrom<Vec<f64>> for ActionVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ActionVector> for Vec<f64> {
    fn from(a: ActionVector) -> Self {
        a.values
    }
}

/// Encoder feature maps, one tensor per downsampling level (finest first).
#[derive(Debug, Clone)]
pub struct FeatureHierarchy {
    pub levels: Vec<Tensor>,
}

impl FeatureHierarchy {
    pub fn new(levels: Vec<Tensor>) -> Self {
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.levels.iter().map(|t| t.dims().to_vec()).collect()
    }

    fn check_compatible(&self, other: &FeatureHierarchy) -> Result<()> {
        if self.shapes() != other.shapes() {
            return Err(Error::Shape(format!(
                "feature hierarchies differ: {:?} vs {:?}",
                self.shapes(),
                other.shapes()
            )));
        }
        Ok(())
    }

    /// `self + scale * other`, level by level.
    pub fn add_scaled(&self, other: &FeatureHierarchy, scale: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| Ok((a + (b * scale)?)?))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    /// `self + coeff[n] * other` for a per-sample coefficient column of shape `(N,)`.
    pub fn add_scaled_per_sample(&self, other: &FeatureHierarchy, coeff: &Tensor) -> Result<Self> {
        self.check_compatible(other)?;
        let c = coeff.reshape(((), 1, 1, 1))?;
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| Ok((a + b.broadcast_mul(&c)?)?))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }
}

/// `base + sum_i a_i * residuals[i]`, level by level.
///
/// Entries with `a_i == 0` are skipped, so a zero vector returns `base` unchanged.
pub fn aggregate_features(
    base: &FeatureHierarchy,
    residuals: &[FeatureHierarchy],
    a: &ActionVector,
) -> Result<FeatureHierarchy> {
    if residuals.len() != a.len() {
        return Err(Error::Shape(format!(
            "{} residual hierarchies for a {}-entry action vector",
            residuals.len(),
            a.len()
        )));
    }
    let terms: Vec<(f64, &FeatureHierarchy)> = a.values().iter().copied().zip(residuals).collect();
    for (_, r) in &terms {
        base.check_compatible(r)?;
    }
    aggregate_sparse(base, &terms)
}

/// Like [`aggregate_features`] for an explicit list of `(degree, hierarchy)` terms.
pub fn aggregate_sparse(base: &FeatureHierarchy, terms: &[(f64, &FeatureHierarchy)]) -> Result<FeatureHierarchy> {
    let mut out = base.clone();
    for &(a, r) in terms {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::DegreeOutOfRange(a));
        }
        if a != 0.0 {
            out = out.add_scaled(r, a)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn filled(v: f64) -> FeatureHierarchy {
        let d = Device::Cpu;
        FeatureHierarchy::new(vec![
            Tensor::full(v, (1, 2, 4, 4), &d).unwrap(),
            Tensor::full(v, (1, 3, 2, 2), &d).unwrap(),
        ])
    }

    fn all_equal(h: &FeatureHierarchy, v: f64) -> bool {
        h.levels.iter().all(|t| {
            t.flatten_all().unwrap().to_vec1::<f64>().unwrap().iter().all(|&x| x == v)
        })
    }

    #[test]
    fn half_degree_shift() {
        let out = aggregate_features(&filled(2.0), &[filled(3.0)], &ActionVector::new(vec![0.5]).unwrap()).unwrap();
        assert!(all_equal(&out, 3.5));
    }

    #[test]
    fn zero_degree_is_identity() {
        let base = filled(2.0);
        let out = aggregate_features(&base, &[filled(3.0)], &ActionVector::zeros(1)).unwrap();
        for (a, b) in out.levels.iter().zip(&base.levels) {
            assert_eq!(a.id(), b.id());
        }
    }

    #[test]
    fn two_emotion_mix() {
        let a = ActionVector::new(vec![0.5, 0.5]).unwrap();
        let out = aggregate_features(&filled(1.0), &[filled(3.0), filled(1.0)], &a).unwrap();
        assert!(all_equal(&out, 3.0));
    }

    #[test]
    fn shape_and_length_mismatch() {
        let a = ActionVector::new(vec![0.5]).unwrap();
        let bad = FeatureHierarchy::new(vec![Tensor::zeros((1, 2, 4, 4), DType::F64, &Device::Cpu).unwrap()]);
        assert!(aggregate_features(&filled(1.0), &[bad], &a).is_err());
        assert!(aggregate_features(&filled(1.0), &[filled(1.0), filled(1.0)], &a).is_err());
    }

    #[test]
    fn action_vector_validation() {
        assert!(matches!(ActionVector::new(vec![1.2]), Err(Error::DegreeOutOfRange(_))));
        assert!(ActionVector::new(vec![-0.1]).is_err());
        assert!(ActionVector::new(vec![f64::NAN]).is_err());
        assert!(ActionVector::one_hot(3, 0, 0.5).is_err());
        let a = ActionVector::one_hot(3, 2, 0.5).unwrap();
        assert_eq!(a.values(), &[0.0, 0.5, 0.0]);
        assert!(a.is_one_hot());
        assert!(!ActionVector::new(vec![0.5, 0.5]).unwrap().is_one_hot());
        let parsed: ActionVector = serde_json::from_str("[0.1, 0.9]").unwrap();
        assert_eq!(parsed.len(), 2);
        assert!(serde_json::from_str::<ActionVector>("[1.5]").is_err());
    }
}
