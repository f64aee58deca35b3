//! Numerical reference tools: central differences and a flagged cosine.

use super::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_grad<F>(mut f: F, x: &DenseMatrix, h: f64) -> Result<DenseMatrix>
where
    F: FnMut(&DenseMatrix) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Range(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = DenseMatrix::zeros(x.rows(), x.cols());
    for k in 0..x.data().len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[k] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numerics(format!(
                "objective not finite around coordinate {k}"
            )));
        }
        grad.data_mut()[k] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Cosine similarity; `degenerate` is set when either vector is (numerically) zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

pub const DEGENERATE_NORM: f64 = 1e-15;

pub fn cosine(u: &[f64], v: &[f64]) -> Cosine {
    assert_eq!(u.len(), v.len(), "cosine of vectors with different lengths");
    let uu = dot(u, u);
    let vv = dot(v, v);
    if uu.sqrt() < DEGENERATE_NORM || vv.sqrt() < DEGENERATE_NORM {
        return Cosine {
            value: 0.0,
            degenerate: true,
        };
    }
    Cosine {
        // One square root of the product keeps cos(u, u) exactly 1.
        value: (dot(u, v) / (uu * vv).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}
