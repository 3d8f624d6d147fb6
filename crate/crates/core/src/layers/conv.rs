//! 1-D and 2-D convolutions (cross-correlation, zero same-padding).
//!
//! Output elements accumulate kernel taps in ascending `(dy, dx, c)` order,
//! so summation order is fixed. Kernels are stored `[k, k, c_in, filters]`
//! (2-D) and `[k, c_in, filters]` (1-D) with the filter axis fastest, which
//! keeps the inner loops on contiguous memory.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::{Init, Tensor};

use super::{missing_forward, Activation, Layer, Mode, Param};

#[derive(Debug, Clone)]
pub struct Conv2d<S: Scalar> {
    pub kernels: Param<S>,
    pub bias: Param<S>,
    pub activation: Activation,
    kernel_size: usize,
    in_channels: usize,
    filters: usize,
    cache: Vec<ConvCache<S>>,
}

#[derive(Debug, Clone)]
struct ConvCache<S: Scalar> {
    input: Tensor<S>,
    post: Tensor<S>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(Error::Contract(format!(
                "conv2d kernel size must be odd for same padding, got {kernel_size}"
            )));
        }
        Ok(Conv2d {
            kernels: Param::new(Tensor::init(
                &[kernel_size, kernel_size, in_channels, filters],
                Init::GlorotUniform,
                rng,
            )),
            bias: Param::new(Tensor::zeros(&[filters])),
            activation,
            kernel_size,
            in_channels,
            filters,
            cache: Vec::new(),
        })
    }

    fn check_input(&self, shape: &[usize], op: &'static str) -> Result<(usize, usize)> {
        match *shape {
            [h, w, c] if c == self.in_channels => Ok((h, w)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![0, 0, self.in_channels],
            }),
        }
    }
}

impl<S: Scalar> Layer<S> for Conv2d<S> {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        let (h, w) = self.check_input(input.shape(), "conv2d forward")?;
        let (k, cin, f) = (self.kernel_size, self.in_channels, self.filters);
        let pad = k / 2;
        let x = input.data();
        let ker = self.kernels.value.data();
        let mut pre = vec![S::zero(); h * w * f];

        // One output row at a time: its [w, f] block stays cache-resident
        // while each kernel row is loaded once per (tap, channel). Per
        // output element the taps still accumulate in ascending (dy, dx, c)
        // order.
        for oy in 0..h {
            let row_block = &mut pre[oy * w * f..(oy + 1) * w * f];
            for chunk in row_block.chunks_exact_mut(f) {
                chunk.copy_from_slice(self.bias.value.data());
            }
            for dy in 0..k {
                let iy = oy + dy;
                if iy < pad || iy >= h + pad {
                    continue;
                }
                let iy = iy - pad;
                for dx in 0..k {
                    let x_lo = pad.saturating_sub(dx);
                    let x_hi = (w + pad - dx).min(w);
                    let ker_off = (dy * k + dx) * cin * f;
                    for c in 0..cin {
                        let krow = &ker[ker_off + c * f..ker_off + (c + 1) * f];
                        for ox in x_lo..x_hi {
                            let ix = ox + dx - pad;
                            let a = x[(iy * w + ix) * cin + c];
                            axpy(&mut row_block[ox * f..(ox + 1) * f], a, krow);
                        }
                    }
                }
            }
        }

        let pre = Tensor::new(vec![h, w, f], pre)?;
        let post = self.activation.apply(&pre);
        if mode == Mode::Train {
            self.cache.push(ConvCache {
                input: input.clone(),
                post: post.clone(),
            });
        }
        Ok(post)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let cache = self.cache.pop().ok_or_else(|| missing_forward("conv2d"))?;
        let (h, w) = self.check_input(cache.input.shape(), "conv2d backward")?;
        let (k, cin, f) = (self.kernel_size, self.in_channels, self.filters);
        if grad_output.shape() != [h, w, f] {
            return Err(Error::ShapeMismatch {
                op: "conv2d backward",
                lhs: grad_output.shape().to_vec(),
                rhs: vec![h, w, f],
            });
        }
        let pad = k / 2;
        let dpre = self.activation.backward(grad_output, &cache.post);
        let dpre = dpre.data();
        let x = cache.input.data();
        let ker = self.kernels.value.data();
        let dker = self.kernels.grad.data_mut();
        let dbias = self.bias.grad.data_mut();
        let mut din = vec![S::zero(); h * w * cin];

        // Channel-fastest transpose of the kernel so the input-gradient pass
        // below runs on contiguous channel rows.
        let mut ker_t = vec![S::zero(); k * k * f * cin];
        for tap in 0..k * k {
            for c in 0..cin {
                for fi in 0..f {
                    ker_t[(tap * f + fi) * cin + c] = ker[(tap * cin + c) * f + fi];
                }
            }
        }

        for oy in 0..h {
            let drow_block = &dpre[oy * w * f..(oy + 1) * w * f];
            for drow in drow_block.chunks_exact(f) {
                for (b, &d) in dbias.iter_mut().zip(drow) {
                    *b += d;
                }
            }
            for dy in 0..k {
                let iy = oy + dy;
                if iy < pad || iy >= h + pad {
                    continue;
                }
                let iy = iy - pad;
                for dx in 0..k {
                    let x_lo = pad.saturating_sub(dx);
                    let x_hi = (w + pad - dx).min(w);
                    let ker_off = (dy * k + dx) * cin * f;
                    for c in 0..cin {
                        let dkrow = &mut dker[ker_off + c * f..ker_off + (c + 1) * f];
                        for ox in x_lo..x_hi {
                            let ix = ox + dx - pad;
                            let drow = &drow_block[ox * f..(ox + 1) * f];
                            axpy(dkrow, x[(iy * w + ix) * cin + c], drow);
                        }
                    }
                    let tap = &ker_t[(dy * k + dx) * f * cin..(dy * k + dx + 1) * f * cin];
                    for ox in x_lo..x_hi {
                        let ix = ox + dx - pad;
                        let drow = &drow_block[ox * f..(ox + 1) * f];
                        let din_seg = &mut din[(iy * w + ix) * cin..(iy * w + ix + 1) * cin];
                        for (fi, &dv) in drow.iter().enumerate() {
                            axpy(din_seg, dv, &tap[fi * cin..(fi + 1) * cin]);
                        }
                    }
                }
            }
        }
        Tensor::new(vec![h, w, cin], din)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let (h, w) = self.check_input(input_shape, "conv2d output_shape")?;
        Ok(vec![h, w, self.filters])
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        f("kernels", &self.kernels);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f("kernels", &mut self.kernels);
        f("bias", &mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d<S: Scalar> {
    pub kernels: Param<S>,
    pub bias: Param<S>,
    pub activation: Activation,
    kernel_size: usize,
    in_channels: usize,
    filters: usize,
    cache: Vec<ConvCache<S>>,
}

impl<S: Scalar> Conv1d<S> {
    pub fn new(
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(Error::Contract(format!(
                "conv1d kernel size must be odd for same padding, got {kernel_size}"
            )));
        }
        Ok(Conv1d {
            kernels: Param::new(Tensor::init(
                &[kernel_size, in_channels, filters],
                Init::GlorotUniform,
                rng,
            )),
            bias: Param::new(Tensor::zeros(&[filters])),
            activation,
            kernel_size,
            in_channels,
            filters,
            cache: Vec::new(),
        })
    }

    fn check_input(&self, shape: &[usize], op: &'static str) -> Result<usize> {
        match *shape {
            [l, c] if c == self.in_channels => Ok(l),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![0, self.in_channels],
            }),
        }
    }
}

impl<S: Scalar> Layer<S> for Conv1d<S> {
    fn kind(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        let l = self.check_input(input.shape(), "conv1d forward")?;
        let (k, cin, f) = (self.kernel_size, self.in_channels, self.filters);
        let pad = k / 2;
        let x = input.data();
        let ker = self.kernels.value.data();
        let mut pre = vec![S::zero(); l * f];

        for chunk in pre.chunks_exact_mut(f) {
            chunk.copy_from_slice(self.bias.value.data());
        }
        for dt in 0..k {
            let t_lo = pad.saturating_sub(dt);
            let t_hi = (l + pad - dt).min(l);
            let ker_off = dt * cin * f;
            for c in 0..cin {
                let krow = &ker[ker_off + c * f..ker_off + (c + 1) * f];
                for ot in t_lo..t_hi {
                    let it = ot + dt - pad;
                    let a = x[it * cin + c];
                    axpy(&mut pre[ot * f..(ot + 1) * f], a, krow);
                }
            }
        }

        let pre = Tensor::new(vec![l, f], pre)?;
        let post = self.activation.apply(&pre);
        if mode == Mode::Train {
            self.cache.push(ConvCache {
                input: input.clone(),
                post: post.clone(),
            });
        }
        Ok(post)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let cache = self.cache.pop().ok_or_else(|| missing_forward("conv1d"))?;
        let l = self.check_input(cache.input.shape(), "conv1d backward")?;
        let (k, cin, f) = (self.kernel_size, self.in_channels, self.filters);
        if grad_output.shape() != [l, f] {
            return Err(Error::ShapeMismatch {
                op: "conv1d backward",
                lhs: grad_output.shape().to_vec(),
                rhs: vec![l, f],
            });
        }
        let pad = k / 2;
        let dpre = self.activation.backward(grad_output, &cache.post);
        let dpre = dpre.data();
        let x = cache.input.data();
        let ker = self.kernels.value.data();
        let dker = self.kernels.grad.data_mut();
        let dbias = self.bias.grad.data_mut();
        let mut din = vec![S::zero(); l * cin];

        for drow in dpre.chunks_exact(f) {
            for (b, &d) in dbias.iter_mut().zip(drow) {
                *b += d;
            }
        }
        for dt in 0..k {
            let t_lo = pad.saturating_sub(dt);
            let t_hi = (l + pad - dt).min(l);
            let ker_off = dt * cin * f;
            for c in 0..cin {
                let krow = &ker[ker_off + c * f..ker_off + (c + 1) * f];
                let dkrow = &mut dker[ker_off + c * f..ker_off + (c + 1) * f];
                for ot in t_lo..t_hi {
                    let it = ot + dt - pad;
                    let drow = &dpre[ot * f..(ot + 1) * f];
                    let a = x[it * cin + c];
                    axpy(dkrow, a, drow);
                    din[it * cin + c] += dot(drow, krow);
                }
            }
        }
        Tensor::new(vec![l, cin], din)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let l = self.check_input(input_shape, "conv1d output_shape")?;
        Ok(vec![l, self.filters])
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        f("kernels", &self.kernels);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f("kernels", &mut self.kernels);
        f("bias", &mut self.bias);
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Direct nested-loop same-padding cross-correlation, the oracle.
    fn conv2d_naive(
        input: &Tensor<f64>,
        kernels: &Tensor<f64>,
        bias: &[f64],
    ) -> Vec<f64> {
        let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (k, f) = (kernels.shape()[0], kernels.shape()[3]);
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; h * w * f];
        for y in 0..h as isize {
            for x in 0..w as isize {
                for fi in 0..f {
                    let mut acc = bias[fi];
                    for dy in 0..k as isize {
                        for dx in 0..k as isize {
                            let (iy, ix) = (y + dy - pad, x + dx - pad);
                            if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                continue;
                            }
                            for c in 0..cin {
                                let xv = input.data()[(iy as usize * w + ix as usize) * cin + c];
                                let kv = kernels.data()
                                    [((dy as usize * k + dx as usize) * cin + c) * f + fi];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[(y as usize * w + x as usize) * f + fi] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv2d_reference_parameter_count_and_shape() {
        let mut rng = Rng::from_seed(0);
        let layer = Conv2d::<f64>::new(1, 32, 3, Activation::Relu, &mut rng).unwrap();
        assert_eq!(layer.param_count(), 320);
        assert_eq!(layer.output_shape(&[18, 42, 1]).unwrap(), vec![18, 42, 32]);
    }

    #[test]
    fn conv1d_reference_parameter_count_and_shape() {
        let mut rng = Rng::from_seed(0);
        let layer = Conv1d::<f64>::new(1, 32, 3, Activation::Relu, &mut rng).unwrap();
        assert_eq!(layer.param_count(), 128);
        assert_eq!(layer.output_shape(&[42, 1]).unwrap(), vec![42, 32]);
    }

    #[test]
    fn even_kernel_size_rejected() {
        let mut rng = Rng::from_seed(0);
        assert!(Conv2d::<f64>::new(1, 4, 2, Activation::Linear, &mut rng).is_err());
        assert!(Conv1d::<f64>::new(1, 4, 4, Activation::Linear, &mut rng).is_err());
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = Rng::from_seed(1);
        let mut layer = Conv2d::<f64>::new(1, 1, 3, Activation::Linear, &mut rng).unwrap();
        let mut ker = Tensor::zeros(&[3, 3, 1, 1]);
        ker.data_mut()[(1 * 3 + 1) * 1 * 1] = 1.0; // center tap
        layer.kernels.value = ker;
        let input = Tensor::from_fn(&[5, 6, 1], |_| rng.uniform(-1.0, 1.0));
        let out = layer.forward(&input, Mode::Infer, &mut rng).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn conv1d_delta_kernel_is_identity() {
        let mut rng = Rng::from_seed(2);
        let mut layer = Conv1d::<f64>::new(1, 1, 3, Activation::Linear, &mut rng).unwrap();
        let mut ker = Tensor::zeros(&[3, 1, 1]);
        ker.data_mut()[1] = 1.0;
        layer.kernels.value = ker;
        let input = Tensor::from_fn(&[7, 1], |_| rng.uniform(-1.0, 1.0));
        let out = layer.forward(&input, Mode::Infer, &mut rng).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn conv2d_matches_nested_loop_oracle() {
        let mut rng = Rng::from_seed(3);
        let mut layer = Conv2d::<f64>::new(1, 1, 3, Activation::Linear, &mut rng).unwrap();
        layer.kernels.value = Tensor::filled(&[3, 3, 1, 1], 1.0);
        let input = Tensor::from_fn(&[4, 4, 1], |_| rng.uniform(-1.0, 1.0));
        let got = layer.forward(&input, Mode::Infer, &mut rng).unwrap();
        let want = conv2d_naive(&input, &layer.kernels.value, layer.bias.value.data());
        for (g, w) in got.data().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn conv2d_multichannel_matches_oracle() {
        let mut rng = Rng::from_seed(4);
        let mut layer = Conv2d::<f64>::new(2, 3, 3, Activation::Linear, &mut rng).unwrap();
        layer.bias.value = Tensor::from_fn(&[3], |_| rng.uniform(-0.5, 0.5));
        let input = Tensor::from_fn(&[6, 5, 2], |_| rng.uniform(-1.0, 1.0));
        let got = layer.forward(&input, Mode::Infer, &mut rng).unwrap();
        let want = conv2d_naive(&input, &layer.kernels.value, layer.bias.value.data());
        for (g, w) in got.data().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    /// Direct nested-loop same-padding 1-D cross-correlation.
    fn conv1d_naive(input: &Tensor<f64>, kernels: &Tensor<f64>, bias: &[f64]) -> Vec<f64> {
        let (l, cin) = (input.shape()[0], input.shape()[1]);
        let (k, f) = (kernels.shape()[0], kernels.shape()[2]);
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; l * f];
        for t in 0..l as isize {
            for fi in 0..f {
                let mut acc = bias[fi];
                for dt in 0..k as isize {
                    let it = t + dt - pad;
                    if it < 0 || it >= l as isize {
                        continue;
                    }
                    for c in 0..cin {
                        acc += input.data()[it as usize * cin + c]
                            * kernels.data()[(dt as usize * cin + c) * f + fi];
                    }
                }
                out[t as usize * f + fi] = acc;
            }
        }
        out
    }

    #[test]
    fn conv1d_matches_nested_loop_oracle() {
        let mut rng = Rng::from_seed(5);
        let mut layer = Conv1d::<f64>::new(2, 3, 3, Activation::Linear, &mut rng).unwrap();
        let input = Tensor::from_fn(&[9, 2], |_| rng.uniform(-1.0, 1.0));
        let got = layer.forward(&input, Mode::Infer, &mut rng).unwrap();
        let want = conv1d_naive(&input, &layer.kernels.value, layer.bias.value.data());
        for (g, w) in got.data().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn same_padding_preserves_spatial_dims_for_odd_k() {
        let mut rng = Rng::from_seed(6);
        for k in [1, 3, 5] {
            let layer = Conv2d::<f64>::new(2, 3, k, Activation::Linear, &mut rng).unwrap();
            assert_eq!(layer.output_shape(&[7, 9, 2]).unwrap(), vec![7, 9, 3]);
            let l1 = Conv1d::<f64>::new(2, 3, k, Activation::Linear, &mut rng).unwrap();
            assert_eq!(l1.output_shape(&[11, 2]).unwrap(), vec![11, 3]);
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let mut rng = Rng::from_seed(7);
        let mut layer = Conv2d::<f64>::new(3, 2, 3, Activation::Linear, &mut rng).unwrap();
        let input = Tensor::zeros(&[4, 4, 2]);
        assert!(layer.forward(&input, Mode::Infer, &mut rng).is_err());
    }
}
