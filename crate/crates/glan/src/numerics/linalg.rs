//! Shared dense kernels for the tape's forward and backward passes.
//! All loops run in a fixed order so results are bitwise deterministic.

use super::real::Real;
use super::tensor::Tensor;

/// `a (m×k) · b (k×n)`.
pub(crate) fn mm<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k) = a.dims2();
    let (kb, n) = b.dims2();
    assert_eq!(k, kb, "mm: inner dims {k} vs {kb}");
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == T::ZERO {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += aip * brow[j];
            }
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// `a (m×k) · bᵀ` where `b` is `n×k`.
pub(crate) fn mm_nt<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k) = a.dims2();
    let (n, kb) = b.dims2();
    assert_eq!(k, kb, "mm_nt: inner dims {k} vs {kb}");
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &bd[j * k..(j + 1) * k];
            let mut acc = T::ZERO;
            for p in 0..k {
                acc += arow[p] * brow[p];
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// `aᵀ · b` where `a` is `k×m` and `b` is `k×n`.
pub(crate) fn mm_tn<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (k, m) = a.dims2();
    let (kb, n) = b.dims2();
    assert_eq!(k, kb, "mm_tn: inner dims {k} vs {kb}");
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![T::ZERO; m * n];
    for p in 0..k {
        let arow = &ad[p * m..(p + 1) * m];
        let brow = &bd[p * n..(p + 1) * n];
        for i in 0..m {
            let api = arow[i];
            if api == T::ZERO {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += api * brow[j];
            }
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// `a (m×n) · x (n)`.
pub(crate) fn matvec<T: Real>(a: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let (m, n) = a.dims2();
    assert_eq!(n, x.dim1(), "matvec: {n} cols vs vector of {}", x.dim1());
    let ad = a.data();
    let xd = x.data();
    let mut out = vec![T::ZERO; m];
    for i in 0..m {
        let row = &ad[i * n..(i + 1) * n];
        let mut acc = T::ZERO;
        for j in 0..n {
            acc += row[j] * xd[j];
        }
        out[i] = acc;
    }
    Tensor::from_vec(vec![m], out)
}

/// `xᵀ (m) · a (m×n)`.
pub(crate) fn vecmat<T: Real>(x: &Tensor<T>, a: &Tensor<T>) -> Tensor<T> {
    let (m, n) = a.dims2();
    assert_eq!(m, x.dim1(), "vecmat: {m} rows vs vector of {}", x.dim1());
    let ad = a.data();
    let xd = x.data();
    let mut out = vec![T::ZERO; n];
    for i in 0..m {
        let xi = xd[i];
        if xi == T::ZERO {
            continue;
        }
        let row = &ad[i * n..(i + 1) * n];
        for j in 0..n {
            out[j] += xi * row[j];
        }
    }
    Tensor::from_vec(vec![n], out)
}

/// Outer product `x (m) ⊗ y (n)` → `m×n`.
pub(crate) fn outer<T: Real>(x: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let m = x.dim1();
    let n = y.dim1();
    let xd = x.data();
    let yd = y.data();
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        let xi = xd[i];
        let orow = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            orow[j] = xi * yd[j];
        }
    }
    Tensor::from_vec(vec![m, n], out)
}
