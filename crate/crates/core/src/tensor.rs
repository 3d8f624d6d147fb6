//! Dense row-major tensors and the primitive math the layers build on.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{cast, dot, fmadd, Scalar};

/// Dense multi-dimensional array of floating-point values.
///
/// Data is stored flat in row-major order (last axis fastest). The shape is
/// fixed at construction; [`Tensor::reshape`] returns a new value over the
/// same data. All reductions run in a fixed ascending-index order so results
/// are bitwise reproducible for a given build.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
}

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `(-L, L)` with `L = sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform,
    Zeros,
}

impl<S: Scalar> Tensor<S> {
    /// Build a tensor from a shape and flat row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || expected != data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Initialize a tensor with the given scheme.
    ///
    /// Fan counts: rank 2 `[a, b]` uses `(a, b)`; rank 3 `[k, c, f]` uses
    /// `(k*c, k*f)`; rank 4 `[kh, kw, c, f]` uses `(kh*kw*c, kh*kw*f)`;
    /// rank 1 uses the length for both. Identical seeds give bitwise
    /// identical tensors.
    pub fn init(shape: &[usize], scheme: Init, rng: &mut Rng) -> Self {
        match scheme {
            Init::Zeros => Tensor::zeros(shape),
            Init::GlorotUniform => {
                let (fan_in, fan_out) = match *shape {
                    [n] => (n, n),
                    [a, b] => (a, b),
                    [k, c, f] => (k * c, k * f),
                    [kh, kw, c, f] => (kh * kw * c, kh * kw * f),
                    _ => {
                        let n: usize = shape.iter().product();
                        (n, n)
                    }
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::from_fn(shape, |_| cast(rng.uniform(-limit, limit)))
            }
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Scalar value of a single-element tensor.
    pub fn item(&self) -> S {
        assert_eq!(self.data.len(), 1, "item() on tensor of {:?}", self.shape);
        self.data[0]
    }

    /// Same data under a new shape of equal element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    /// Pointwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "mul")?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self += scale * other`, in place.
    pub fn add_scaled(&mut self, other: &Self, scale: S) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = fmadd(scale, b, *a);
        }
        Ok(())
    }

    pub fn scale(&self, factor: S) -> Self {
        self.map(|x| x * factor)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }

    pub fn tanh(&self) -> Self {
        self.map(tanh)
    }

    pub fn relu(&self) -> Self {
        self.map(|x| if x > S::zero() { x } else { S::zero() })
    }

    /// Sum of all elements in ascending index order.
    pub fn sum(&self) -> S {
        let mut acc = S::zero();
        for &x in &self.data {
            acc += x;
        }
        acc
    }

    /// Matrix product of two rank-2 tensors `[m, k] x [k, n] -> [m, n]`.
    ///
    /// Contributions accumulate in ascending `k` order for every output
    /// element, so the summation order is fixed.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (&[m, ka], &[kb, n]) = (&self.shape[..], &other.shape[..]) else {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        };
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            let row = &self.data[i * ka..(i + 1) * ka];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = fmadd(a, b, *o);
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Matrix-vector product `[m, n] x [n] -> [m]`. Each row reduces in the
    /// fixed interleaved-lane order of [`crate::scalar::dot`].
    pub fn matvec(&self, v: &Self) -> Result<Self> {
        let (&[m, n], &[nv]) = (&self.shape[..], &v.shape[..]) else {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: self.shape.clone(),
                rhs: v.shape.clone(),
            });
        };
        if n != nv {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: self.shape.clone(),
                rhs: v.shape.clone(),
            });
        }
        let mut out = vec![S::zero(); m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * n..(i + 1) * n], v.data());
        }
        Ok(Tensor {
            shape: vec![m],
            data: out,
        })
    }

    /// Transposed matrix-vector product `[m, n]^T x [m] -> [n]`.
    pub fn matvec_t(&self, v: &Self) -> Result<Self> {
        let (&[m, n], &[mv]) = (&self.shape[..], &v.shape[..]) else {
            return Err(Error::ShapeMismatch {
                op: "matvec_t",
                lhs: self.shape.clone(),
                rhs: v.shape.clone(),
            });
        };
        if m != mv {
            return Err(Error::ShapeMismatch {
                op: "matvec_t",
                lhs: self.shape.clone(),
                rhs: v.shape.clone(),
            });
        }
        let mut out = vec![S::zero(); n];
        for i in 0..m {
            let row = &self.data[i * n..(i + 1) * n];
            let a = v.data[i];
            for (o, &b) in out.iter_mut().zip(row.iter()) {
                *o = fmadd(a, b, *o);
            }
        }
        Ok(Tensor {
            shape: vec![n],
            data: out,
        })
    }

    /// Convert element type (used when loading f64 containers into f32 models).
    pub fn cast_from<T: Scalar>(other: &Tensor<T>) -> Self {
        Tensor {
            shape: other.shape.to_vec(),
            data: other
                .data
                .iter()
                .map(|&x| cast(x.to_f64().expect("finite")))
                .collect(),
        }
    }
}

/// Logistic sigmoid, clamped into the open interval `(0, 1)`.
///
/// In floating point the exact formula saturates to 0.0 or 1.0 for large
/// `|x|`; the clamp keeps the strict range guarantee that gate values rely
/// on while changing the value by at most one ulp.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    let y = S::one() / (S::one() + (-x).exp());
    let lo = S::min_positive_value();
    let hi = S::one() - S::epsilon() * cast::<S>(0.5);
    y.max(lo).min(hi)
}

/// Hyperbolic tangent, clamped into the open interval `(-1, 1)`.
pub fn tanh<S: Scalar>(x: S) -> S {
    let hi = S::one() - S::epsilon() * cast::<S>(0.5);
    x.tanh().max(-hi).min(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn t64(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    /// Independent triple-nested-loop matrix product used as the oracle.
    fn matmul_naive(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.data()[i * k + p] * b.data()[p * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let eye = t64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let m = t64(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(eye.matmul(&m).unwrap().data(), m.data());
    }

    #[test]
    fn matmul_column_selection() {
        let m = t64(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let col = t64(&[2, 1], &[0.0, 1.0]);
        assert_eq!(m.matmul(&col).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_nested_loop_oracle() {
        let mut rng = Rng::from_seed(42);
        let a = Tensor::from_fn(&[5, 7], |_| rng.uniform(-1.0, 1.0));
        let b = Tensor::from_fn(&[7, 3], |_| rng.uniform(-1.0, 1.0));
        let got = a.matmul(&b).unwrap();
        let want = matmul_naive(&a, &b);
        for (g, w) in got.data().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn matmul_dimension_mismatch_names_both_shapes() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[4, 2]);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn elementwise_basics() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(tanh(0.0f64), 0.0);
        let a = t64(&[2], &[1.0, 2.0]);
        let b = t64(&[2], &[3.0, 4.0]);
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        assert!(a.add(&t64(&[3], &[0.0; 3])).is_err());
    }

    #[test]
    fn sigmoid_tanh_stay_in_open_intervals_at_extremes() {
        for &x in &[f64::MAX, 1e308, 750.0, 40.0, 0.0, -40.0, -750.0, -1e308, f64::MIN] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s}");
            let t = tanh(x);
            assert!(t > -1.0 && t < 1.0, "tanh({x}) = {t}");
        }
    }

    #[test]
    fn init_zeros() {
        let z = Tensor::<f64>::init(&[2, 2], Init::Zeros, &mut Rng::from_seed(0));
        assert_eq!(z.data(), &[0.0; 4]);
    }

    #[test]
    fn glorot_respects_bound_and_seed() {
        let limit = (6.0 / 200.0f64).sqrt();
        let a = Tensor::<f64>::init(&[100, 100], Init::GlorotUniform, &mut Rng::from_seed(7));
        assert!(a.data().iter().all(|v| v.abs() < limit));
        let b = Tensor::<f64>::init(&[100, 100], Init::GlorotUniform, &mut Rng::from_seed(7));
        assert_eq!(a.data(), b.data(), "same seed must be bitwise identical");
    }

    #[test]
    fn reshape_preserves_data_and_checks_len() {
        let a = t64(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = a.reshape(&[3, 2]).unwrap();
        assert_eq!(r.data(), a.data());
        assert!(a.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn zero_sized_dims_rejected() {
        assert!(Tensor::new(vec![2, 0], Vec::<f64>::new()).is_err());
    }

    proptest! {
        #[test]
        fn matmul_associative_within_tolerance(seed in 0u64..500) {
            let mut rng = Rng::from_seed(seed);
            let a = Tensor::from_fn(&[4, 5], |_| rng.uniform(-2.0, 2.0));
            let b = Tensor::from_fn(&[5, 6], |_| rng.uniform(-2.0, 2.0));
            let c = Tensor::from_fn(&[6, 3], |_| rng.uniform(-2.0, 2.0));
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data().iter()) {
                let rel = (l - r).abs() / l.abs().max(r.abs()).max(1e-9);
                prop_assert!(rel < 1e-9, "{l} vs {r}");
            }
        }

        #[test]
        fn sigmoid_tanh_ranges(x in -1e6f64..1e6) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
            let t = tanh(x);
            prop_assert!(t > -1.0 && t < 1.0);
        }
    }
}
