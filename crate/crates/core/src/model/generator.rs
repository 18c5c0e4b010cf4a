use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FrameImage, LandmarkSet, NUM_LANDMARKS};
use crate::model::layers::{leaky_relu, sigmoid, softmax_last, Conv, Norm, UpConv};
use crate::model::{aggregate_sparse, ActionVector, FeatureHierarchy, ModelConfig, ParamStore};
use crate::{Error, Result};

/// Stack of stride-2 4x4 convolutions; level `l` output is kept before its activation.
#[derive(Debug, Clone)]
pub(crate) struct Encoder {
    convs: Vec<Conv>,
    norms: Vec<Option<Norm>>,
    leak: f64,
}

impl Encoder {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut c_in = 3;
        for (l, &w) in cfg.widths.iter().enumerate() {
            convs.push(Conv::new(store, &format!("{name}.conv{l}"), c_in, w, 4, 2, 1, rng)?);
            // No normalization on the outermost layer or where the map is a single pixel.
            let normed = cfg.norm && l > 0 && cfg.level_size(l) > 1;
            norms.push(if normed {
                Some(Norm::new(store, &format!("{name}.norm{l}"), w, rng)?)
            } else {
                None
            });
            c_in = w;
        }
        Ok(Self {
            convs,
            norms,
            leak: cfg.leak,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<FeatureHierarchy> {
        let mut levels: Vec<Tensor> = Vec::with_capacity(self.convs.len());
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            let input = match levels.last() {
                None => x.clone(),
                Some(prev) => leaky_relu(prev, self.leak)?,
            };
            let mut y = conv.forward(&input)?;
            if let Some(n) = norm {
                y = n.forward(&y)?;
            }
            levels.push(y);
        }
        Ok(FeatureHierarchy::new(levels))
    }
}

/// Mirrors the encoder with transposed convolutions. Decoder step `s` upsamples to
/// encoder level `L-2-s` and concatenates that level of the aggregated hierarchy.
#[derive(Debug, Clone)]
pub(crate) struct Decoder {
    ups: Vec<UpConv>,
    norms: Vec<Option<Norm>>,
    heatmap: Conv,
    input_size: usize,
}

impl Decoder {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let levels = cfg.levels();
        let mut ups = Vec::new();
        let mut norms = Vec::new();
        let mut c_in = cfg.widths[levels - 1];
        for s in 0..levels - 1 {
            let target = levels - 2 - s;
            let c_out = cfg.widths[target];
            ups.push(UpConv::new(store, &format!("dec.up{s}"), c_in, c_out, rng)?);
            norms.push(if cfg.norm {
                Some(Norm::new(store, &format!("dec.norm{s}"), c_out, rng)?)
            } else {
                None
            });
            c_in = 2 * c_out;
        }
        ups.push(UpConv::new(store, &format!("dec.up{}", levels - 1), c_in, 3, rng)?);
        let heatmap = Conv::new(store, "dec.heatmap", c_in, NUM_LANDMARKS, 1, 1, 0, rng)?;
        Ok(Self {
            ups,
            norms,
            heatmap,
            input_size: cfg.input_size,
        })
    }

    fn forward(&self, f: &FeatureHierarchy) -> Result<GeneratorOutput> {
        let levels = f.len();
        if levels != self.ups.len() {
            return Err(Error::Shape(format!(
                "decoder expects {} levels, got {levels}",
                self.ups.len()
            )));
        }
        let mut x = f.levels[levels - 1].relu()?;
        for s in 0..levels - 1 {
            let mut y = self.ups[s].forward(&x)?;
            if let Some(n) = &self.norms[s] {
                y = n.forward(&y)?;
            }
            let skip = &f.levels[levels - 2 - s];
            if y.dims() [2..] != skip.dims()[2..] || y.dim(0)? != skip.dim(0)? {
                return Err(Error::Shape(format!(
                    "decoder step {s}: {:?} vs skip {:?}",
                    y.dims(),
                    skip.dims()
                )));
            }
            x = Tensor::cat(&[&y, skip], 1)?.relu()?;
        }
        let logits = self.heatmap.forward(&x)?;
        let frame = sigmoid(&self.ups[levels - 1].forward(&x)?)?;
        let (heatmaps, landmarks) = heatmap_landmarks(&logits, self.input_size)?;
        Ok(GeneratorOutput {
            frame,
            heatmaps,
            landmarks,
        })
    }
}

/// Spatial softmax of `(N, K, R, R)` logits and the expected pixel coordinates under
/// each map, returned as `(N, K, R, R)` heatmaps and `(N, K, 2)` points in
/// `image_size` pixel units.
pub fn heatmap_landmarks(logits: &Tensor, image_size: usize) -> Result<(Tensor, Tensor)> {
    let (n, k, r, r2) = logits.dims4()?;
    if r != r2 {
        return Err(Error::Shape("heatmaps must be square".into()));
    }
    let probs = softmax_last(&logits.reshape((n, k, r * r))?)?;
    // Cell j covers pixels [j*s, (j+1)*s); its center is j*s + (s-1)/2.
    let s = image_size as f64 / r as f64;
    let centers: Vec<f64> = (0..r).map(|j| j as f64 * s + (s - 1.0) / 2.0).collect();
    let gx: Vec<f64> = (0..r * r).map(|i| centers[i % r]).collect();
    let gy: Vec<f64> = (0..r * r).map(|i| centers[i / r]).collect();
    let grid = Tensor::from_vec([gx, gy].concat(), (2, r * r), logits.device())?
        .to_dtype(logits.dtype())?
        .t()?;
    let coords = probs.reshape((n * k, r * r))?.matmul(&grid)?.reshape((n, k, 2))?;
    Ok((probs.reshape((n, k, r, r))?, coords))
}

/// Decoder output for a batch.
#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    /// `(N, 3, H, W)` in `[0, 1]`.
    pub frame: Tensor,
    /// `(N, 68, H/2, W/2)`, each map sums to 1.
    pub heatmaps: Tensor,
    /// `(N, 68, 2)` pixel coordinates.
    pub landmarks: Tensor,
}

impl GeneratorOutput {
    pub fn frame_image(&self, index: usize) -> Result<FrameImage> {
        FrameImage::from_tensor(&self.frame, index)
    }

    pub fn landmark_set(&self, index: usize) -> Result<LandmarkSet> {
        let v = self.landmarks.get(index)?.to_dtype(DType::F64)?.to_vec2::<f64>()?;
        LandmarkSet::new(v.into_iter().map(|p| [p[0], p[1]]).collect())
    }
}

/// A generated frame with its predicted landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFrame {
    pub frame: FrameImage,
    pub landmarks: LandmarkSet,
}

/// Base encoder, one residual encoder per emotion, and the shared decoder.
#[derive(Debug, Clone)]
pub struct Generator {
    config: ModelConfig,
    params: ParamStore,
    base: Encoder,
    residuals: Vec<Encoder>,
    decoder: Decoder,
}

impl Generator {
    /// Fresh parameters drawn from `N(0, 0.02)` (normalization scales from `N(1, 0.02)`).
    pub fn new(config: ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new(dtype);
        let base = Encoder::new(&mut params, "e0", &config, &mut rng)?;
        let residuals = (1..=config.n_emotions())
            .map(|i| Encoder::new(&mut params, &format!("e{i}"), &config, &mut rng))
            .collect::<Result<_>>()?;
        let decoder = Decoder::new(&mut params, &config, &mut rng)?;
        Ok(Self {
            config,
            params,
            base,
            residuals,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    pub fn n_emotions(&self) -> usize {
        self.residuals.len()
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        let (_, c, h, w) = image
            .dims4()
            .map_err(|_| Error::Shape(format!("expected (N, 3, H, W), got {:?}", image.dims())))?;
        let s = self.config.input_size;
        if c != 3 || h != s || w != s {
            return Err(Error::Shape(format!(
                "expected (N, 3, {s}, {s}) input, got {:?}",
                image.dims()
            )));
        }
        Ok(())
    }

    pub fn encode_base(&self, image: &Tensor) -> Result<FeatureHierarchy> {
        self.check_input(image)?;
        self.base.forward(&image.to_dtype(self.dtype())?)
    }

    /// Residual encoder for emotion `index` (1-based).
    pub fn encode_residual(&self, index: usize, image: &Tensor) -> Result<FeatureHierarchy> {
        let enc = index
            .checked_sub(1)
            .and_then(|i| self.residuals.get(i))
            .ok_or(Error::EmotionIndex {
                index,
                n: self.n_emotions(),
            })?;
        self.check_input(image)?;
        enc.forward(&image.to_dtype(self.dtype())?)
    }

    pub fn decode(&self, features: &FeatureHierarchy) -> Result<GeneratorOutput> {
        self.decoder.forward(features)
    }

    fn check_action(&self, a: &ActionVector) -> Result<()> {
        if a.len() != self.n_emotions() {
            return Err(Error::Shape(format!(
                "action vector has {} entries, model has {} emotions",
                a.len(),
                self.n_emotions()
            )));
        }
        Ok(())
    }

    /// Encodes `image` once for every emotion that `a` activates.
    pub fn encode_active(&self, image: &Tensor, a: &ActionVector) -> Result<(FeatureHierarchy, Vec<(usize, FeatureHierarchy)>)> {
        self.check_action(a)?;
        let base = self.encode_base(image)?;
        let residuals = a
            .active()
            .map(|(i, _)| Ok((i, self.encode_residual(i, image)?)))
            .collect::<Result<_>>()?;
        Ok((base, residuals))
    }

    /// Decodes `e0(I) + sum a_i e_i(I)` from precomputed encodings. Emotions with
    /// `a_i != 0` must be present in `residuals`.
    pub fn decode_from(
        &self,
        base: &FeatureHierarchy,
        residuals: &[(usize, FeatureHierarchy)],
        a: &ActionVector,
    ) -> Result<GeneratorOutput> {
        self.check_action(a)?;
        let terms = a
            .active()
            .map(|(i, v)| {
                residuals
                    .iter()
                    .find(|(j, _)| *j == i)
                    .map(|(_, h)| (v, h))
                    .ok_or_else(|| Error::Invalid(format!("missing residual encoding for emotion {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.decode(&aggregate_sparse(base, &terms)?)
    }

    /// `d(e0(I) + sum_i a_i e_i(I))`; residual encoders with `a_i = 0` are not run.
    pub fn generate(&self, image: &Tensor, a: &ActionVector) -> Result<GeneratorOutput> {
        let (base, residuals) = self.encode_active(image, a)?;
        self.decode_from(&base, &residuals, a)
    }

    /// Same as [`Generator::generate`] but evaluates every residual encoder and
    /// aggregates with the full vector.
    pub fn generate_dense(&self, image: &Tensor, a: &ActionVector) -> Result<GeneratorOutput> {
        self.check_action(a)?;
        let base = self.encode_base(image)?;
        let residuals = (1..=self.n_emotions())
            .map(|i| self.encode_residual(i, image))
            .collect::<Result<Vec<_>>>()?;
        self.decode(&crate::model::aggregate_features(&base, &residuals, a)?)
    }

    /// Batched generation with one degree per sample per emotion: `degrees[i]` is an
    /// `(N,)` tensor for emotion `i + 1`, or `None` when it is zero for every sample.
    pub fn generate_batch(&self, image: &Tensor, degrees: &[Option<Tensor>]) -> Result<GeneratorOutput> {
        let base = self.encode_base(image)?;
        let residuals = degrees
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| Ok((i + 1, self.encode_residual(i + 1, image)?)))
            .collect::<Result<Vec<_>>>()?;
        self.decode_batch(&base, &residuals, degrees)
    }

    pub fn decode_batch(
        &self,
        base: &FeatureHierarchy,
        residuals: &[(usize, FeatureHierarchy)],
        degrees: &[Option<Tensor>],
    ) -> Result<GeneratorOutput> {
        if degrees.len() != self.n_emotions() {
            return Err(Error::Shape("one degree column per emotion is required".into()));
        }
        let mut f = base.clone();
        for (i, r) in residuals {
            if let Some(Some(d)) = degrees.get(i - 1) {
                f = f.add_scaled_per_sample(r, &d.to_dtype(self.dtype())?)?;
            }
        }
        self.decode(&f)
    }

    /// Generates one frame from a single image already at the model input size.
    pub fn generate_frame(&self, image: &FrameImage, a: &ActionVector) -> Result<GeneratedFrame> {
        let out = self.generate(&image.to_tensor(self.device(), self.dtype())?, a)?;
        Ok(GeneratedFrame {
            frame: out.frame_image(0)?,
            landmarks: out.landmark_set(0)?,
        })
    }

    /// A one-emotion generator sharing `e0` and the decoder, with `e_index` as its residual.
    pub fn single_emotion(&self, index: usize) -> Result<Generator> {
        let name = self
            .config
            .emotions
            .names()
            .get(index.wrapping_sub(1))
            .ok_or(Error::EmotionIndex {
                index,
                n: self.n_emotions(),
            })?;
        let mut cfg = self.config.clone();
        cfg.emotions = crate::data::EmotionSet::new([name.clone()])?;
        let single = Generator::new(cfg, self.dtype(), 0)?;
        let prefix = format!("e{index}.");
        for (name, var) in single.params.iter() {
            let src = match name.strip_prefix("e1.") {
                Some(rest) => format!("{prefix}{rest}"),
                None => name.clone(),
            };
            let value = self
                .params
                .get(&src)
                .ok_or_else(|| Error::ArchitectureMismatch(format!("no parameter {src}")))?;
            var.set(&value.as_tensor().detach())?;
        }
        Ok(single)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EmotionSet;

    fn toy(n: usize) -> Generator {
        let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let cfg = ModelConfig::scaled(EmotionSet::new(names).unwrap(), 16, 3, 4, 8);
        Generator::new(cfg, DType::F32, 3).unwrap()
    }

    fn image(seed: u64, size: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f32> = (0..3 * size * size).map(|_| rng.random()).collect();
        Tensor::from_vec(v, (1, 3, size, size), &Device::Cpu).unwrap()
    }

    #[test]
    fn pyramid_shapes() {
        let g = toy(2);
        let f = g.encode_base(&image(0, 16)).unwrap();
        let sizes: Vec<usize> = f.levels.iter().map(|t| t.dim(2).unwrap()).collect();
        assert_eq!(sizes, vec![8, 4, 2]);
        assert_eq!(g.encode_residual(2, &image(0, 16)).unwrap().shapes(), f.shapes());
        let out = g.decode(&f).unwrap();
        assert_eq!(out.frame.dims(), &[1, 3, 16, 16]);
        assert_eq!(out.heatmaps.dims(), &[1, 68, 8, 8]);
        assert_eq!(out.landmarks.dims(), &[1, 68, 2]);
    }

    #[test]
    fn rejects_bad_input_and_index() {
        let g = toy(1);
        assert!(g.encode_base(&image(0, 12)).is_err());
        assert!(matches!(g.encode_residual(0, &image(0, 16)), Err(Error::EmotionIndex { .. })));
        assert!(matches!(g.encode_residual(2, &image(0, 16)), Err(Error::EmotionIndex { .. })));
        assert!(g.generate(&image(0, 16), &ActionVector::zeros(2)).is_err());
    }

    #[test]
    fn uniform_heatmap_centers() {
        for size in [256, 64, 16] {
            let logits = Tensor::zeros((1, 68, size / 2, size / 2), DType::F64, &Device::Cpu).unwrap();
            let (_, coords) = heatmap_landmarks(&logits, size).unwrap();
            let c = (size as f64 - 1.0) / 2.0;
            for v in coords.flatten_all().unwrap().to_vec1::<f64>().unwrap() {
                assert!((v - c).abs() < 1e-9, "{v} vs {c}");
            }
        }
    }

    #[test]
    fn peaked_heatmap_hits_cell_center() {
        let mut v = vec![-1e4; 4 * 4];
        v[2 * 4 + 1] = 0.0; // row 2, col 1
        let logits = Tensor::from_vec(v, (1, 1, 4, 4), &Device::Cpu).unwrap();
        let (_, c) = heatmap_landmarks(&logits, 8).unwrap();
        let c = c.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!((c[0] - 2.5).abs() < 1e-9 && (c[1] - 4.5).abs() < 1e-9);
    }

    #[test]
    fn skipping_inactive_encoders_is_exact() {
        let g = toy(3);
        let img = image(4, 16);
        let a = ActionVector::new(vec![0.0, 0.7, 0.0]).unwrap();
        let sparse = g.generate(&img, &a).unwrap();
        let dense = g.generate_dense(&img, &a).unwrap();
        let diff = (sparse.frame - dense.frame).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert_eq!(diff, 0.0);
    }
}
