//! The cocycle `(u, v)` attached to the GL2(R) action on nonzero frequencies.
//!
//! For a nonzero row vector `w` and `A` in GL2(R) the matrix
//! `gamma(w)^{-1} A gamma(w A)` fixes `(1, 0)`, so it has the form
//! `[[1, 0], [u, v]]`. [`cocycle_uv`] evaluates `u` and `v` through their closed
//! rational forms; [`stabilizer_matrix`] forms the triple product and serves as
//! the reference for them.
//!
//! The common denominator `|w A|^2` satisfies `|w A| >= |w| * sigma_min(A) > 0`,
//! so the only guards needed are on `w != 0` and `det A != 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Mat2, DEFAULT_EPS_DET};

/// Guard against the excluded frequency `(0, 0)`.
pub const EPS_FREQ: f64 = 1e-300;

/// A frequency row vector `(w1, w2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreqVec {
    pub w1: f64,
    pub w2: f64,
}

impl FreqVec {
    pub const fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w1 * self.w1 + self.w2 * self.w2
    }

    pub fn norm(&self) -> f64 {
        self.w1.hypot(self.w2)
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sq() < EPS_FREQ
    }

    fn check_nonzero(&self) -> Result<f64> {
        let n2 = self.norm_sq();
        if n2 < EPS_FREQ {
            return Err(Error::ZeroFrequency(n2));
        }
        Ok(n2)
    }
}

/// Row vector times matrix, `w A = (a w1 + c w2, b w1 + d w2)`.
#[inline]
pub fn freq_act(w: FreqVec, a: &Mat2) -> FreqVec {
    FreqVec::new(a.a * w.w1 + a.c * w.w2, a.b * w.w1 + a.d * w.w2)
}

/// The section `gamma(w) = |w|^{-2} [[w1, -w2], [w2, w1]]` with `w gamma(w) = (1, 0)`.
pub fn gamma(w: FreqVec) -> Result<Mat2> {
    let n2 = w.check_nonzero()?;
    Ok(Mat2::rotation_dilation(w.w1 / n2, w.w2 / n2))
}

/// `gamma(w)^{-1} = [[w1, w2], [-w2, w1]]`.
pub fn gamma_inverse(w: FreqVec) -> Result<Mat2> {
    w.check_nonzero()?;
    Ok(Mat2::rotation_dilation(w.w1, -w.w2))
}

/// The cocycle pair `(u, v)` without argument checks.
///
/// Callers guarantee `w != 0` and `A` nonsingular; the result is non-finite otherwise.
#[inline]
pub fn cocycle_uv_unchecked(w: FreqVec, a: &Mat2) -> (f64, f64) {
    let (w1, w2) = (w.w1, w.w2);
    let p = a.a * w1 + a.c * w2;
    let q = a.b * w1 + a.d * w2;
    let denom = p * p + q * q;
    let u = ((a.a * a.c + a.b * a.d) * (w1 * w1 - w2 * w2)
        - (a.a * a.a + a.b * a.b - a.c * a.c - a.d * a.d) * w1 * w2)
        / denom;
    let v = a.det() * (w1 * w1 + w2 * w2) / denom;
    (u, v)
}

/// The cocycle pair `(u_{w,A}, v_{w,A})`; `sign(v) = sign(det A)`.
pub fn cocycle_uv(w: FreqVec, a: &Mat2) -> Result<(f64, f64)> {
    w.check_nonzero()?;
    a.check_nonsingular(DEFAULT_EPS_DET)?;
    Ok(cocycle_uv_unchecked(w, a))
}

/// `gamma(w)^{-1} A gamma(w A)`, an element of the stabilizer of `(1, 0)`.
pub fn stabilizer_matrix(w: FreqVec, a: &Mat2) -> Result<Mat2> {
    a.check_nonsingular(DEFAULT_EPS_DET)?;
    let left = gamma_inverse(w)?;
    let right = gamma(freq_act(w, a))?;
    Ok(left.mul(a).mul(&right))
}
