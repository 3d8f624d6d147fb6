//! Max pooling with ceil semantics: non-overlapping stride-`pool` windows,
//! trailing partial windows kept, so every output dim is `ceil(in / pool)`.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{missing_forward, Layer, Mode};

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

#[derive(Debug, Clone)]
pub struct MaxPool2d<S: Scalar> {
    pool: usize,
    cache: Vec<PoolCache>,
    _marker: std::marker::PhantomData<S>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl<S: Scalar> MaxPool2d<S> {
    pub fn new(pool: usize) -> Self {
        MaxPool2d {
            pool,
            cache: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    fn dims(&self, shape: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
        match *shape {
            [h, w] => Ok((h, w, 1)),
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![0, 0, 0],
            }),
        }
    }
}

impl<S: Scalar> Layer<S> for MaxPool2d<S> {
    fn kind(&self) -> &'static str {
        "maxpool2d"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        let (h, w, c) = self.dims(input.shape(), "maxpool2d forward")?;
        let p = self.pool;
        let (oh, ow) = (ceil_div(h, p), ceil_div(w, p));
        let x = input.data();
        let mut out = vec![S::zero(); oh * ow * c];
        let mut argmax = vec![0usize; oh * ow * c];

        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    // First maximum in (y, x) scan order wins on ties.
                    let mut best = S::neg_infinity();
                    let mut best_idx = 0usize;
                    for y in oy * p..((oy + 1) * p).min(h) {
                        for xx in ox * p..((ox + 1) * p).min(w) {
                            let idx = (y * w + xx) * c + ch;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (oy * ow + ox) * c + ch;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }

        if mode == Mode::Train {
            self.cache.push(PoolCache {
                input_shape: input.shape().to_vec(),
                argmax,
            });
        }
        let out_shape = if input.rank() == 2 {
            vec![oh, ow]
        } else {
            vec![oh, ow, c]
        };
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let cache = self.cache.pop().ok_or_else(|| missing_forward("maxpool2d"))?;
        if grad_output.len() != cache.argmax.len() {
            return Err(Error::ShapeMismatch {
                op: "maxpool2d backward",
                lhs: grad_output.shape().to_vec(),
                rhs: cache.input_shape.clone(),
            });
        }
        let mut din = Tensor::zeros(&cache.input_shape);
        let d = din.data_mut();
        for (&src, &g) in cache.argmax.iter().zip(grad_output.data()) {
            d[src] += g;
        }
        Ok(din)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let (h, w, c) = self.dims(input_shape, "maxpool2d output_shape")?;
        let p = self.pool;
        Ok(if input_shape.len() == 2 {
            vec![ceil_div(h, p), ceil_div(w, p)]
        } else {
            vec![ceil_div(h, p), ceil_div(w, p), c]
        })
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct MaxPool1d<S: Scalar> {
    pool: usize,
    cache: Vec<PoolCache>,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> MaxPool1d<S> {
    pub fn new(pool: usize) -> Self {
        MaxPool1d {
            pool,
            cache: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    fn dims(&self, shape: &[usize], op: &'static str) -> Result<(usize, usize)> {
        match *shape {
            [l] => Ok((l, 1)),
            [l, c] => Ok((l, c)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![0, 0],
            }),
        }
    }
}

impl<S: Scalar> Layer<S> for MaxPool1d<S> {
    fn kind(&self) -> &'static str {
        "maxpool1d"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        let (l, c) = self.dims(input.shape(), "maxpool1d forward")?;
        let p = self.pool;
        let ol = ceil_div(l, p);
        let x = input.data();
        let mut out = vec![S::zero(); ol * c];
        let mut argmax = vec![0usize; ol * c];

        for ot in 0..ol {
            for ch in 0..c {
                let mut best = S::neg_infinity();
                let mut best_idx = 0usize;
                for t in ot * p..((ot + 1) * p).min(l) {
                    let idx = t * c + ch;
                    if x[idx] > best {
                        best = x[idx];
                        best_idx = idx;
                    }
                }
                out[ot * c + ch] = best;
                argmax[ot * c + ch] = best_idx;
            }
        }

        if mode == Mode::Train {
            self.cache.push(PoolCache {
                input_shape: input.shape().to_vec(),
                argmax,
            });
        }
        let out_shape = if input.rank() == 1 { vec![ol] } else { vec![ol, c] };
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let cache = self.cache.pop().ok_or_else(|| missing_forward("maxpool1d"))?;
        if grad_output.len() != cache.argmax.len() {
            return Err(Error::ShapeMismatch {
                op: "maxpool1d backward",
                lhs: grad_output.shape().to_vec(),
                rhs: cache.input_shape.clone(),
            });
        }
        let mut din = Tensor::zeros(&cache.input_shape);
        let d = din.data_mut();
        for (&src, &g) in cache.argmax.iter().zip(grad_output.data()) {
            d[src] += g;
        }
        Ok(din)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let (l, c) = self.dims(input_shape, "maxpool1d output_shape")?;
        Ok(if input_shape.len() == 1 {
            vec![ceil_div(l, self.pool)]
        } else {
            vec![ceil_div(l, self.pool), c]
        })
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

    #[test]
    fn reference_shapes_force_ceil_mode() {
        let p = MaxPool2d::<f64>::new(2);
        assert_eq!(p.output_shape(&[18, 42]).unwrap(), vec![9, 21]);
        assert_eq!(p.output_shape(&[9, 21, 32]).unwrap(), vec![5, 11, 32]);
        assert_eq!(p.output_shape(&[5, 11, 64]).unwrap(), vec![3, 6, 64]);
        let p1 = MaxPool1d::<f64>::new(2);
        assert_eq!(p1.output_shape(&[42, 32]).unwrap(), vec![21, 32]);
        assert_eq!(p1.output_shape(&[9]).unwrap(), vec![5]);
    }

    #[test]
    fn constant_input_pools_to_constant() {
        let mut rng = Rng::from_seed(0);
        let mut p = MaxPool2d::<f64>::new(2);
        let input = Tensor::filled(&[5, 7, 2], 3.25);
        let out = p.forward(&input, Mode::Infer, &mut rng).unwrap();
        assert_eq!(out.shape(), &[3, 4, 2]);
        assert!(out.data().iter().all(|&v| v == 3.25));
    }

    #[test]
    fn pooled_values_come_from_their_window() {
        let mut rng = Rng::from_seed(1);
        let mut p = MaxPool2d::<f64>::new(2);
        let input = Tensor::from_fn(&[6, 6, 1], |_| rng.uniform(-5.0, 5.0));
        let out = p.forward(&input, Mode::Infer, &mut rng).unwrap();
        let global_max = input.data().iter().cloned().fold(f64::MIN, f64::max);
        for (oy, ox) in (0..3).flat_map(|a| (0..3).map(move |b| (a, b))) {
            let v = out.data()[oy * 3 + ox];
            assert!(v <= global_max);
            let mut found = false;
            for y in oy * 2..(oy * 2 + 2).min(6) {
                for x in ox * 2..(ox * 2 + 2).min(6) {
                    if input.data()[y * 6 + x] == v {
                        found = true;
                    }
                }
            }
            assert!(found, "pooled value {v} not in its window");
        }
    }

    #[test]
    fn backward_routes_gradient_to_argmax() {
        let mut rng = Rng::from_seed(2);
        let mut p = MaxPool1d::<f64>::new(2);
        let input = Tensor::new(vec![4, 1], vec![1.0, 9.0, 5.0, 2.0]).unwrap();
        let out = p.forward(&input, Mode::Train, &mut rng).unwrap();
        assert_eq!(out.data(), &[9.0, 5.0]);
        let din = p
            .backward(&Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap())
            .unwrap();
        assert_eq!(din.data(), &[0.0, 1.0, 2.0, 0.0]);
    }
}
