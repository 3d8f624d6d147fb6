//! Apply an inner layer with shared parameters to every timestep slice.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{missing_forward, Layer, Mode, Param};

/// Wraps a layer over the leading axis: input `[T, rest..]` becomes
/// `[T, inner(rest)..]`. The inner layer's cache stack holds one entry per
/// timestep; backward unwinds them in reverse.
pub struct TimeDistributed<S: Scalar> {
    inner: Box<dyn Layer<S>>,
    steps: Vec<usize>,
}

impl<S: Scalar> TimeDistributed<S> {
    pub fn new(inner: Box<dyn Layer<S>>) -> Self {
        TimeDistributed {
            inner,
            steps: Vec::new(),
        }
    }

    pub fn inner(&self) -> &dyn Layer<S> {
        self.inner.as_ref()
    }

    fn split_leading<'a>(shape: &'a [usize], op: &'static str) -> Result<(usize, &'a [usize])> {
        match shape {
            [t, rest @ ..] if !rest.is_empty() => Ok((*t, rest)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![0, 0],
            }),
        }
    }
}

impl<S: Scalar> Clone for TimeDistributed<S> {
    fn clone(&self) -> Self {
        TimeDistributed {
            inner: self.inner.clone_box(),
            steps: self.steps.clone(),
        }
    }
}

impl<S: Scalar> Layer<S> for TimeDistributed<S> {
    fn kind(&self) -> &'static str {
        "time_distributed"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, rng: &mut Rng) -> Result<Tensor<S>> {
        let (t, rest) = Self::split_leading(input.shape(), "time_distributed forward")?;
        let slice_len: usize = rest.iter().product();
        let mut out: Vec<S> = Vec::new();
        let mut out_rest: Vec<usize> = Vec::new();
        for step in 0..t {
            let x = Tensor::new(
                rest.to_vec(),
                input.data()[step * slice_len..(step + 1) * slice_len].to_vec(),
            )?;
            let y = self.inner.forward(&x, mode, rng)?;
            if step == 0 {
                out_rest = y.shape().to_vec();
                out.reserve(t * y.len());
            }
            out.extend_from_slice(y.data());
        }
        if mode == Mode::Train {
            self.steps.push(t);
        }
        let mut shape = vec![t];
        shape.extend_from_slice(&out_rest);
        Tensor::new(shape, out)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let t = self
            .steps
            .pop()
            .ok_or_else(|| missing_forward("time_distributed"))?;
        let (gt, g_rest) = Self::split_leading(grad_output.shape(), "time_distributed backward")?;
        if gt != t {
            return Err(Error::ShapeMismatch {
                op: "time_distributed backward",
                lhs: grad_output.shape().to_vec(),
                rhs: vec![t],
            });
        }
        let g_len: usize = g_rest.iter().product();
        // Inner caches pop in LIFO order, so walk the timesteps backwards.
        let mut rows: Vec<Option<Tensor<S>>> = (0..t).map(|_| None).collect();
        for step in (0..t).rev() {
            let g = Tensor::new(
                g_rest.to_vec(),
                grad_output.data()[step * g_len..(step + 1) * g_len].to_vec(),
            )?;
            rows[step] = Some(self.inner.backward(&g)?);
        }
        let first = rows[0].as_ref().expect("filled above");
        let in_rest = first.shape().to_vec();
        let mut data = Vec::with_capacity(t * first.len());
        for row in rows.iter() {
            data.extend_from_slice(row.as_ref().expect("filled above").data());
        }
        let mut shape = vec![t];
        shape.extend_from_slice(&in_rest);
        Tensor::new(shape, data)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let (t, rest) = Self::split_leading(input_shape, "time_distributed output_shape")?;
        let inner = self.inner.output_shape(rest)?;
        let mut shape = vec![t];
        shape.extend_from_slice(&inner);
        Ok(shape)
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        self.inner.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        self.inner.visit_params_mut(f);
    }

    fn clear_cache(&mut self) {
        self.steps.clear();
        self.inner.clear_cache();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}
