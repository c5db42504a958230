//! Pointwise activations and the max-subtracted softmax.

use super::real::Real;
use super::tensor::Tensor;

pub fn relu<T: Real>(x: T) -> T {
    if x > T::ZERO {
        x
    } else {
        T::ZERO
    }
}

pub fn leaky_relu<T: Real>(x: T, slope: T) -> T {
    if x >= T::ZERO {
        x
    } else {
        slope * x
    }
}

pub fn elu<T: Real>(x: T) -> T {
    if x >= T::ZERO {
        x
    } else {
        x.exp() - T::ONE
    }
}

/// Numerically stable logistic function (no overflow on large |x|).
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

/// Max-subtracted softmax over a slice, written into `out`. Entries with
/// `mask[i] == true` are masked out: they receive exactly zero weight and are
/// excluded from the max and the normalizer. At least one entry must remain
/// unmasked. When no unmasked entry is finite (an overflowed forward pass),
/// the unmasked outputs are NaN so callers can detect divergence downstream.
pub fn softmax_masked_into<T: Real>(xs: &[T], mask: Option<&[bool]>, out: &mut [T]) {
    assert_eq!(xs.len(), out.len());
    if let Some(m) = mask {
        assert_eq!(m.len(), xs.len(), "mask length must match input length");
    }
    let live = |i: usize| mask.map_or(true, |m| !m[i]);
    let mut max = T::neg_infinity();
    let mut any = false;
    for (i, &x) in xs.iter().enumerate() {
        if live(i) {
            any = true;
            max = max.maximum(x);
        }
    }
    assert!(any, "softmax: every entry is masked");
    if !max.is_finite() {
        let nan = T::from_f64(f64::NAN);
        for (i, o) in out.iter_mut().enumerate() {
            *o = if live(i) { nan } else { T::ZERO };
        }
        return;
    }
    let mut denom = T::ZERO;
    for i in 0..xs.len() {
        if live(i) {
            let e = (xs[i] - max).exp();
            out[i] = e;
            denom += e;
        } else {
            out[i] = T::ZERO;
        }
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
}

/// Softmax of a rank-1 tensor.
pub fn softmax<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let n = x.dim1();
    let mut out = vec![T::ZERO; n];
    softmax_masked_into(x.data(), None, &mut out);
    Tensor::from_vec(vec![n], out)
}
