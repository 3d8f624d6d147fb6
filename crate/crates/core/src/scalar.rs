//! Scalar abstraction over the floating-point element type.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point scalar usable as a tensor element.
///
/// Implemented for `f32` and `f64`. All reference values and the acceptance
/// experiments use `f64`; `f32` exists as a compile-time option.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into the scalar type.
#[inline]
pub fn cast<S: Scalar>(x: f64) -> S {
    S::from(x).expect("f64 constant representable in scalar type")
}

/// Fused multiply-add when the build target has hardware FMA, otherwise a
/// plain multiply-add. Chosen at compile time, so results are deterministic
/// for a given build.
#[inline(always)]
pub fn fmadd<S: Scalar>(a: S, b: S, acc: S) -> S {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

/// `acc[i] += a * x[i]` over equal-length slices.
#[inline]
pub fn axpy<S: Scalar>(acc: &mut [S], a: S, x: &[S]) {
    for (o, &v) in acc.iter_mut().zip(x) {
        *o = fmadd(a, v, *o);
    }
}

const DOT_LANES: usize = 16;

/// Dot product accumulated in 16 interleaved lanes (reduced pairwise, tail
/// appended last). The order is fixed, so results are reproducible; the
/// lanes exist to break the floating-point dependency chain.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() / DOT_LANES * DOT_LANES;
    let mut acc = [S::zero(); DOT_LANES];
    for (ca, cb) in a[..n].chunks_exact(DOT_LANES).zip(b[..n].chunks_exact(DOT_LANES)) {
        for l in 0..DOT_LANES {
            acc[l] = fmadd(ca[l], cb[l], acc[l]);
        }
    }
    let mut total = S::zero();
    let mut width = DOT_LANES;
    while width > 1 {
        width /= 2;
        for l in 0..width {
            acc[l] = acc[l] + acc[l + width];
        }
    }
    total = total + acc[0];
    for (&x, &y) in a[n..].iter().zip(&b[n..]) {
        total = fmadd(x, y, total);
    }
    total
}
