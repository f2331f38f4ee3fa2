//! 3x3 convolution, stride 1, one row/column of zero padding ("same").
//!
//! Implemented as im2col followed by a matrix product. The patch matrix has
//! one row per output position and `C_in * 9` columns ordered `(c, ki, kj)`,
//! matching the `[K, C_in, 3, 3]` filter layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub filters: usize,
    /// `[filters, in_channels, 3, 3]`
    pub weights: Vec<f64>,
    /// `[filters]`
    pub bias: Vec<f64>,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, filters: usize) -> Self {
        Self {
            in_channels,
            filters,
            weights: vec![0.0; filters * in_channels * TAPS],
            bias: vec![0.0; filters],
        }
    }

    /// Uniform fan-in initialization with limit `sqrt(6 / fan_in)`, zero bias.
    pub fn init<R: Rng + ?Sized>(in_channels: usize, filters: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_channels, filters);
        let limit = (6.0 / layer.patch_len() as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * TAPS
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn input_dims(&self, input: &Tensor) -> Result<(usize, usize)> {
        input.expect_rank(3, "[C, H, W] input")?;
        let s = input.shape();
        if s[0] != self.in_channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input channels", self.in_channels),
                got: format!("{} channels", s[0]),
            });
        }
        if s[1] == 0 || s[2] == 0 {
            return Err(Error::ShapeMismatch {
                expected: "non-empty spatial dims".into(),
                got: format!("{s:?}"),
            });
        }
        Ok((s[1], s[2]))
    }

    /// Pre-activation output `[K, H, W]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (h, w) = self.input_dims(input)?;
        let mut cols = Vec::new();
        let mut out = vec![0.0; self.filters * h * w];
        self.forward_raw(input.data(), h, w, &mut cols, &mut out);
        Tensor::new(&[self.filters, h, w], out)
    }

    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
        let (h, w) = self.input_dims(input)?;
        if grad_out.shape() != [self.filters, h, w] {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}, {h}, {w}]", self.filters),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let mut cols = Vec::new();
        im2col(input.data(), self.in_channels, h, w, &mut cols);
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.filters];
        let mut grad_in = vec![0.0; input.len()];
        self.backward_raw(
            &cols,
            grad_out.data(),
            h,
            w,
            &mut grad_w,
            &mut grad_b,
            Some(&mut grad_in),
        );
        Ok(ConvGrads {
            input: Tensor::new(input.shape(), grad_in)?,
            weights: grad_w,
            bias: grad_b,
        })
    }

    /// Writes the pre-activation output into `out` and leaves the patch
    /// matrix in `cols` for the backward pass.
    pub(crate) fn forward_raw(&self, input: &[f64], h: usize, w: usize, cols: &mut Vec<f64>, out: &mut [f64]) {
        let positions = h * w;
        let patch = self.patch_len();
        im2col(input, self.in_channels, h, w, cols);
        for (k, row) in out.chunks_exact_mut(positions).enumerate() {
            row.fill(self.bias[k]);
        }
        // out[K, P] += W[K, patch] * cols^T[patch, P]
        unsafe {
            matrixmultiply::dgemm(
                self.filters,
                patch,
                positions,
                1.0,
                self.weights.as_ptr(),
                patch as isize,
                1,
                cols.as_ptr(),
                1,
                patch as isize,
                1.0,
                out.as_mut_ptr(),
                positions as isize,
                1,
            );
        }
    }

    /// Accumulates parameter gradients; optionally writes the input gradient.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_raw(
        &self,
        cols: &[f64],
        grad_out: &[f64],
        h: usize,
        w: usize,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        grad_in: Option<&mut [f64]>,
    ) {
        let positions = h * w;
        let patch = self.patch_len();
        for (gb, row) in grad_b.iter_mut().zip(grad_out.chunks_exact(positions)) {
            *gb += row.iter().sum::<f64>();
        }
        // dW[K, patch] += dOut[K, P] * cols[P, patch]
        unsafe {
            matrixmultiply::dgemm(
                self.filters,
                positions,
                patch,
                1.0,
                grad_out.as_ptr(),
                positions as isize,
                1,
                cols.as_ptr(),
                patch as isize,
                1,
                1.0,
                grad_w.as_mut_ptr(),
                patch as isize,
                1,
            );
        }
        if let Some(grad_in) = grad_in {
            // dcols[P, patch] = dOut^T[P, K] * W[K, patch]
            let mut dcols = vec![0.0; positions * patch];
            unsafe {
                matrixmultiply::dgemm(
                    positions,
                    self.filters,
                    patch,
                    1.0,
                    grad_out.as_ptr(),
                    1,
                    positions as isize,
                    self.weights.as_ptr(),
                    patch as isize,
                    1,
                    0.0,
                    dcols.as_mut_ptr(),
                    patch as isize,
                    1,
                );
            }
            col2im(&dcols, self.in_channels, h, w, grad_in);
        }
    }
}

fn im2col(input: &[f64], channels: usize, h: usize, w: usize, cols: &mut Vec<f64>) {
    let patch = channels * TAPS;
    cols.clear();
    cols.resize(h * w * patch, 0.0);
    for y in 0..h {
        for x in 0..w {
            let row = &mut cols[(y * w + x) * patch..][..patch];
            for c in 0..channels {
                let plane = &input[c * h * w..][..h * w];
                for ki in 0..KERNEL {
                    let Some(yy) = (y + ki).checked_sub(1).filter(|&v| v < h) else {
                        continue;
                    };
                    for kj in 0..KERNEL {
                        if let Some(xx) = (x + kj).checked_sub(1).filter(|&v| v < w) {
                            row[c * TAPS + ki * KERNEL + kj] = plane[yy * w + xx];
                        }
                    }
                }
            }
        }
    }
}

fn col2im(dcols: &[f64], channels: usize, h: usize, w: usize, grad_in: &mut [f64]) {
    let patch = channels * TAPS;
    grad_in.fill(0.0);
    for y in 0..h {
        for x in 0..w {
            let row = &dcols[(y * w + x) * patch..][..patch];
            for c in 0..channels {
                let plane = &mut grad_in[c * h * w..][..h * w];
                for ki in 0..KERNEL {
                    let Some(yy) = (y + ki).checked_sub(1).filter(|&v| v < h) else {
                        continue;
                    };
                    for kj in 0..KERNEL {
                        if let Some(xx) = (x + kj).checked_sub(1).filter(|&v| v < w) {
                            plane[yy * w + xx] += row[c * TAPS + ki * KERNEL + kj];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Six nested loops, no patch matrix.
    fn direct_conv(input: &Tensor, layer: &Conv2d) -> Vec<f64> {
        let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let mut out = vec![0.0; layer.filters * h * w];
        for k in 0..layer.filters {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = layer.bias[k];
                    for c in 0..c_in {
                        for ki in 0..3isize {
                            for kj in 0..3isize {
                                let (yy, xx) = (y + ki - 1, x + kj - 1);
                                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                                    continue;
                                }
                                let wv = layer.weights
                                    [((k * c_in + c) * 3 + ki as usize) * 3 + kj as usize];
                                acc += wv * input.get(&[c, yy as usize, xx as usize]);
                            }
                        }
                    }
                    out[(k * h + y as usize) * w + x as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_on_ones() {
        let mut layer = Conv2d::zeros(1, 1);
        layer.weights.fill(1.0);
        let input = Tensor::from_fn(&[1, 3, 3], |_| 1.0);
        let out = layer.forward(&input).unwrap();
        assert_eq!(out.get(&[0, 1, 1]), 9.0);
        for (y, x) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_eq!(out.get(&[0, y, x]), 4.0);
        }
        assert_eq!(out.get(&[0, 0, 1]), 6.0);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut layer = Conv2d::zeros(1, 1);
        layer.weights[4] = 1.0;
        let input = Tensor::from_fn(&[1, 5, 3], |i| i as f64 * 0.7 - 2.0);
        assert_eq!(layer.forward(&input).unwrap(), input);
    }

    #[test]
    fn matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (c_in, k, h, w) in [(1, 1, 5, 3), (1, 4, 7, 3), (3, 5, 6, 4), (2, 2, 1, 1)] {
            let mut layer = Conv2d::init(c_in, k, &mut rng);
            for b in &mut layer.bias {
                *b = rng.random_range(-1.0..1.0);
            }
            let input = Tensor::from_fn(&[c_in, h, w], |_| rng.random_range(-1.0..1.0));
            let fast = layer.forward(&input).unwrap();
            for (a, b) in fast.data().iter().zip(direct_conv(&input, &layer)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let mut layer = Conv2d::init(2, 3, &mut ChaCha8Rng::seed_from_u64(1));
        layer.bias = vec![0.5, -1.0, 2.0];
        let out = layer.forward(&Tensor::zeros(&[2, 4, 3])).unwrap();
        for k in 0..3 {
            for p in 0..12 {
                assert_eq!(out.data()[k * 12 + p], layer.bias[k]);
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let layer = Conv2d::zeros(2, 1);
        assert!(matches!(
            layer.forward(&Tensor::zeros(&[1, 3, 3])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn init_respects_fan_in_limit() {
        let layer = Conv2d::init(27, 45, &mut ChaCha8Rng::seed_from_u64(3));
        let limit = (6.0f64 / 243.0).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
        assert_eq!(layer.param_count(), 45 * 243 + 45);
    }
}
