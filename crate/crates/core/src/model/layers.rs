use candle_core::{Tensor, D};
use rand::Rng;

use crate::model::ParamStore;
use crate::Result;

const INIT_STD: f64 = 0.02;
const NORM_EPS: f64 = 1e-5;

/// 2-D convolution with bias.
#[derive(Debug, Clone)]
pub(crate) struct Conv {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            weight: store.normal(format!("{name}.weight"), &[c_out, c_in, kernel, kernel], 0.0, INIT_STD, rng)?,
            bias: store.constant(format!("{name}.bias"), &[c_out], 0.0)?,
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

/// 4x4 stride-2 transposed convolution: doubles the spatial size.
#[derive(Debug, Clone)]
pub(crate) struct UpConv {
    weight: Tensor,
    bias: Tensor,
}

impl UpConv {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            weight: store.normal(format!("{name}.weight"), &[c_in, c_out, 4, 4], 0.0, INIT_STD, rng)?,
            bias: store.constant(format!("{name}.bias"), &[c_out], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv_transpose2d(&self.weight, 1, 0, 2, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

/// Batch normalization over each sample's own spatial statistics.
///
/// Statistics never mix samples, so a frame's output does not depend on what
/// else is in the batch, and train and inference behave identically.
#[derive(Debug, Clone)]
pub(crate) struct Norm {
    gamma: Tensor,
    beta: Tensor,
}

impl Norm {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, channels: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            gamma: store.normal(format!("{name}.gamma"), &[channels], 1.0, INIT_STD, rng)?,
            beta: store.constant(format!("{name}.beta"), &[channels], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim((2, 3))?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim((2, 3))?;
        let normed = centered.broadcast_div(&(var + NORM_EPS)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&self.gamma.reshape((1, (), 1, 1))?)?
            .broadcast_add(&self.beta.reshape((1, (), 1, 1))?)?)
    }
}

pub(crate) fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

pub(crate) fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

/// Softmax over the last dimension.
pub(crate) fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(D::Minus1)?)?)
}

