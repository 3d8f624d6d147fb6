//! Single-layer LSTM: gated cell step, sequence unrolling, and
//! backpropagation through time.
//!
//! Gate order per step: forget `f`, input `k`, modulation `g`, cell update
//! `c = f (*) c_prev + k (*) g`, output `o`, hidden `h = o (*) tanh(c)`.
//! All gate pre-activations are `W_x* x_t + W_h* h_{t-1} + b_*`.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{fmadd, Scalar};
use crate::tensor::{Init, Tensor};

use super::{missing_forward, Layer, Mode, Param};

/// Hidden and cell state of one LSTM step.
///
/// After any step every element of `h` lies in `(-1, 1)`: it is the product
/// of a sigmoid gate in `(0, 1)` and a tanh in `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct LstmState<S: Scalar> {
    pub h: Tensor<S>,
    pub c: Tensor<S>,
}

impl<S: Scalar> LstmState<S> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Tensor::zeros(&[hidden]),
            c: Tensor::zeros(&[hidden]),
        }
    }
}

/// The four gate parameter triples of one LSTM layer.
///
/// Weight shapes: `w_x*` is `[hidden, input]`, `w_h*` is `[hidden, hidden]`,
/// biases are `[hidden]`. Total parameter count is
/// `4 * (hidden*input + hidden*hidden + hidden)`.
#[derive(Debug, Clone)]
pub struct LstmParams<S: Scalar> {
    pub w_xf: Param<S>,
    pub w_hf: Param<S>,
    pub b_f: Param<S>,
    pub w_xk: Param<S>,
    pub w_hk: Param<S>,
    pub b_k: Param<S>,
    pub w_xg: Param<S>,
    pub w_hg: Param<S>,
    pub b_g: Param<S>,
    pub w_xo: Param<S>,
    pub w_ho: Param<S>,
    pub b_o: Param<S>,
    input: usize,
    hidden: usize,
}

/// Per-step values retained for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmStepCache<S: Scalar> {
    x: Tensor<S>,
    h_prev: Tensor<S>,
    c_prev: Tensor<S>,
    f: Tensor<S>,
    k: Tensor<S>,
    g: Tensor<S>,
    o: Tensor<S>,
    tanh_c: Tensor<S>,
}

impl<S: Scalar> LstmParams<S> {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = |r: &mut Rng, a, b| Param::new(Tensor::init(&[a, b], Init::GlorotUniform, r));
        let z = |n| Param::new(Tensor::zeros(&[n]));
        LstmParams {
            w_xf: w(rng, hidden, input),
            w_hf: w(rng, hidden, hidden),
            b_f: z(hidden),
            w_xk: w(rng, hidden, input),
            w_hk: w(rng, hidden, hidden),
            b_k: z(hidden),
            w_xg: w(rng, hidden, input),
            w_hg: w(rng, hidden, hidden),
            b_g: z(hidden),
            w_xo: w(rng, hidden, input),
            w_ho: w(rng, hidden, hidden),
            b_o: z(hidden),
            input,
            hidden,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = |a, b| Param::new(Tensor::zeros(&[a, b]));
        let z = |n| Param::new(Tensor::zeros(&[n]));
        LstmParams {
            w_xf: w(hidden, input),
            w_hf: w(hidden, hidden),
            b_f: z(hidden),
            w_xk: w(hidden, input),
            w_hk: w(hidden, hidden),
            b_k: z(hidden),
            w_xg: w(hidden, input),
            w_hg: w(hidden, hidden),
            b_g: z(hidden),
            w_xo: w(hidden, input),
            w_ho: w(hidden, hidden),
            b_o: z(hidden),
            input,
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden * self.input + self.hidden * self.hidden + self.hidden)
    }

    fn gate_pre(
        &self,
        wx: &Tensor<S>,
        wh: &Tensor<S>,
        b: &Tensor<S>,
        x: &Tensor<S>,
        h: &Tensor<S>,
    ) -> Result<Tensor<S>> {
        let mut pre = wx.matvec(x)?;
        let hx = wh.matvec(h)?;
        for ((p, &hv), &bv) in pre.data_mut().iter_mut().zip(hx.data()).zip(b.data()) {
            *p = *p + hv + bv;
        }
        Ok(pre)
    }

    /// One gated cell step.
    pub fn cell_step(&self, x: &Tensor<S>, prev: &LstmState<S>) -> Result<LstmState<S>> {
        let (state, _) = self.cell_step_cached(x, prev)?;
        Ok(state)
    }

    fn cell_step_cached(
        &self,
        x: &Tensor<S>,
        prev: &LstmState<S>,
    ) -> Result<(LstmState<S>, LstmStepCache<S>)> {
        if x.shape() != [self.input] {
            return Err(Error::ShapeMismatch {
                op: "lstm cell_step",
                lhs: x.shape().to_vec(),
                rhs: vec![self.input],
            });
        }
        if prev.h.shape() != [self.hidden] || prev.c.shape() != [self.hidden] {
            return Err(Error::ShapeMismatch {
                op: "lstm cell_step state",
                lhs: prev.h.shape().to_vec(),
                rhs: vec![self.hidden],
            });
        }
        let f = self
            .gate_pre(&self.w_xf.value, &self.w_hf.value, &self.b_f.value, x, &prev.h)?
            .sigmoid();
        let k = self
            .gate_pre(&self.w_xk.value, &self.w_hk.value, &self.b_k.value, x, &prev.h)?
            .sigmoid();
        let g = self
            .gate_pre(&self.w_xg.value, &self.w_hg.value, &self.b_g.value, x, &prev.h)?
            .tanh();
        let c = f.mul(&prev.c)?.add(&k.mul(&g)?)?;
        let o = self
            .gate_pre(&self.w_xo.value, &self.w_ho.value, &self.b_o.value, x, &prev.h)?
            .sigmoid();
        let tanh_c = c.tanh();
        let h = o.mul(&tanh_c)?;
        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            f,
            k,
            g,
            o: o.clone(),
            tanh_c,
        };
        Ok((LstmState { h, c }, cache))
    }

    /// Fold the cell step over a `[T, input]` sequence from zero state,
    /// returning the final state and the per-step state trace.
    pub fn run_sequence(&self, seq: &Tensor<S>) -> Result<(LstmState<S>, Vec<LstmState<S>>)> {
        let mut trace = Vec::new();
        let mut state = LstmState::zeros(self.hidden);
        let steps = self.sequence_steps(seq)?;
        for t in 0..steps {
            let x = self.step_slice(seq, t)?;
            state = self.cell_step(&x, &state)?;
            trace.push(state.clone());
        }
        Ok((state, trace))
    }

    fn sequence_steps(&self, seq: &Tensor<S>) -> Result<usize> {
        match *seq.shape() {
            [t, input] if input == self.input && t >= 1 => Ok(t),
            _ => Err(Error::ShapeMismatch {
                op: "lstm sequence",
                lhs: seq.shape().to_vec(),
                rhs: vec![1, self.input],
            }),
        }
    }

    fn step_slice(&self, seq: &Tensor<S>, t: usize) -> Result<Tensor<S>> {
        let n = self.input;
        Tensor::new(vec![n], seq.data()[t * n..(t + 1) * n].to_vec())
    }
}

/// LSTM as a sequential-model layer: consumes `[T, input]`, emits the final
/// hidden state `[hidden]`.
#[derive(Debug, Clone)]
pub struct Lstm<S: Scalar> {
    pub params: LstmParams<S>,
    cache: Vec<Vec<LstmStepCache<S>>>,
}

impl<S: Scalar> Lstm<S> {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Lstm {
            params: LstmParams::new(input, hidden, rng),
            cache: Vec::new(),
        }
    }

    pub fn from_params(params: LstmParams<S>) -> Self {
        Lstm {
            params,
            cache: Vec::new(),
        }
    }
}

impl<S: Scalar> Layer<S> for Lstm<S> {
    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn forward(&mut self, input: &Tensor<S>, mode: Mode, _rng: &mut Rng) -> Result<Tensor<S>> {
        let steps = self.params.sequence_steps(input)?;
        let mut state = LstmState::zeros(self.params.hidden);
        let mut caches = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = self.params.step_slice(input, t)?;
            let (next, cache) = self.params.cell_step_cached(&x, &state)?;
            state = next;
            if mode == Mode::Train {
                caches.push(cache);
            }
        }
        if mode == Mode::Train {
            self.cache.push(caches);
        }
        Ok(state.h)
    }

    fn backward(&mut self, grad_output: &Tensor<S>) -> Result<Tensor<S>> {
        let caches = self.cache.pop().ok_or_else(|| missing_forward("lstm"))?;
        let hidden = self.params.hidden;
        let input = self.params.input;
        if grad_output.shape() != [hidden] {
            return Err(Error::ShapeMismatch {
                op: "lstm backward",
                lhs: grad_output.shape().to_vec(),
                rhs: vec![hidden],
            });
        }
        let steps = caches.len();
        let mut dseq = vec![S::zero(); steps * input];
        let mut dh = grad_output.clone();
        let mut dc = Tensor::<S>::zeros(&[hidden]);

        for (t, cache) in caches.iter().enumerate().rev() {
            // dc += dh (*) o (*) (1 - tanh(c)^2); do_raw = dh (*) tanh(c) (*) o(1-o)
            let one = S::one();
            let mut do_raw = vec![S::zero(); hidden];
            for i in 0..hidden {
                let o = cache.o.data()[i];
                let tc = cache.tanh_c.data()[i];
                let dhi = dh.data()[i];
                dc.data_mut()[i] += dhi * o * (one - tc * tc);
                do_raw[i] = dhi * tc * o * (one - o);
            }
            let mut df_raw = vec![S::zero(); hidden];
            let mut dk_raw = vec![S::zero(); hidden];
            let mut dg_raw = vec![S::zero(); hidden];
            for i in 0..hidden {
                let dci = dc.data()[i];
                let f = cache.f.data()[i];
                let k = cache.k.data()[i];
                let g = cache.g.data()[i];
                df_raw[i] = dci * cache.c_prev.data()[i] * f * (one - f);
                dk_raw[i] = dci * g * k * (one - k);
                dg_raw[i] = dci * k * (one - g * g);
            }
            let df_raw = Tensor::new(vec![hidden], df_raw)?;
            let dk_raw = Tensor::new(vec![hidden], dk_raw)?;
            let dg_raw = Tensor::new(vec![hidden], dg_raw)?;
            let do_raw = Tensor::new(vec![hidden], do_raw)?;

            accumulate_gate(&mut self.params.w_xf, &mut self.params.w_hf, &mut self.params.b_f,
                            &df_raw, cache)?;
            accumulate_gate(&mut self.params.w_xk, &mut self.params.w_hk, &mut self.params.b_k,
                            &dk_raw, cache)?;
            accumulate_gate(&mut self.params.w_xg, &mut self.params.w_hg, &mut self.params.b_g,
                            &dg_raw, cache)?;
            accumulate_gate(&mut self.params.w_xo, &mut self.params.w_ho, &mut self.params.b_o,
                            &do_raw, cache)?;

            // dx_t and dh_{t-1} gather contributions from all four gates.
            let mut dx = self.params.w_xf.value.matvec_t(&df_raw)?;
            dx.add_scaled(&self.params.w_xk.value.matvec_t(&dk_raw)?, one)?;
            dx.add_scaled(&self.params.w_xg.value.matvec_t(&dg_raw)?, one)?;
            dx.add_scaled(&self.params.w_xo.value.matvec_t(&do_raw)?, one)?;
            dseq[t * input..(t + 1) * input].copy_from_slice(dx.data());

            let mut dh_prev = self.params.w_hf.value.matvec_t(&df_raw)?;
            dh_prev.add_scaled(&self.params.w_hk.value.matvec_t(&dk_raw)?, one)?;
            dh_prev.add_scaled(&self.params.w_hg.value.matvec_t(&dg_raw)?, one)?;
            dh_prev.add_scaled(&self.params.w_ho.value.matvec_t(&do_raw)?, one)?;
            dh = dh_prev;

            // dc_{t-1} = dc (*) f
            for i in 0..hidden {
                let v = dc.data()[i] * cache.f.data()[i];
                dc.data_mut()[i] = v;
            }
        }
        Tensor::new(vec![steps, input], dseq)
    }

    fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        match *input_shape {
            [t, input] if input == self.params.input && t >= 1 => Ok(vec![self.params.hidden]),
            _ => Err(Error::ShapeMismatch {
                op: "lstm output_shape",
                lhs: input_shape.to_vec(),
                rhs: vec![1, self.params.input],
            }),
        }
    }

    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<S>)) {
        let p = &self.params;
        f("w_xf", &p.w_xf);
        f("w_hf", &p.w_hf);
        f("b_f", &p.b_f);
        f("w_xk", &p.w_xk);
        f("w_hk", &p.w_hk);
        f("b_k", &p.b_k);
        f("w_xg", &p.w_xg);
        f("w_hg", &p.w_hg);
        f("b_g", &p.b_g);
        f("w_xo", &p.w_xo);
        f("w_ho", &p.w_ho);
        f("b_o", &p.b_o);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        let p = &mut self.params;
        f("w_xf", &mut p.w_xf);
        f("w_hf", &mut p.w_hf);
        f("b_f", &mut p.b_f);
        f("w_xk", &mut p.w_xk);
        f("w_hk", &mut p.w_hk);
        f("b_k", &mut p.b_k);
        f("w_xg", &mut p.w_xg);
        f("w_hg", &mut p.w_hg);
        f("b_g", &mut p.b_g);
        f("w_xo", &mut p.w_xo);
        f("w_ho", &mut p.w_ho);
        f("b_o", &mut p.b_o);
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn clone_box(&self) -> Box<dyn Layer<S>> {
        Box::new(self.clone())
    }
}

/// `dW_x += d_raw (x) x`, `dW_h += d_raw (x) h_prev`, `db += d_raw`.
fn accumulate_gate<S: Scalar>(
    wx: &mut Param<S>,
    wh: &mut Param<S>,
    b: &mut Param<S>,
    d_raw: &Tensor<S>,
    cache: &LstmStepCache<S>,
) -> Result<()> {
    let input = cache.x.len();
    let hidden = d_raw.len();
    let dwx = wx.grad.data_mut();
    for i in 0..hidden {
        let d = d_raw.data()[i];
        let row = &mut dwx[i * input..(i + 1) * input];
        for (w, &xv) in row.iter_mut().zip(cache.x.data()) {
            *w = fmadd(d, xv, *w);
        }
    }
    let dwh = wh.grad.data_mut();
    for i in 0..hidden {
        let d = d_raw.data()[i];
        let row = &mut dwh[i * hidden..(i + 1) * hidden];
        for (w, &hv) in row.iter_mut().zip(cache.h_prev.data()) {
            *w = fmadd(d, hv, *w);
        }
    }
    for (bv, &d) in b.grad.data_mut().iter_mut().zip(d_raw.data()) {
        *bv += d;
    }
    Ok(())
}
