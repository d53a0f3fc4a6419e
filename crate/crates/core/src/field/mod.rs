//! Complex-valued functions on (frequency plane) x (third axis).
//!
//! [`AnalyticField`] is an immutable expression tree evaluated pointwise.
//! Operators act by wrapping the tree in a pull-back node, so identities
//! between operators can be checked exactly up to rounding. Sampled data
//! lives in [`GridField3`].
//!
//! Values on the null sets where a factor such as `|w|^{-1}` or `|w3|^{-1/2}`
//! is undefined are taken to be zero.

mod fourier;
mod grid;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::{cocycle_uv_unchecked, freq_act, FreqVec};
use crate::error::{Error, Result};
use crate::group::{G2Elem, Vec2};
use crate::representation::{AbstractVector, Field1, Field2};

pub(crate) use grid::{get_u32, get_u64, truncated};
pub use fourier::{f3_forward, f3_forward_analytic, f3_inverse, f3_inverse_analytic};
pub use grid::{
    norm_sq, read_g2f, sample_to_grid, weighted_inner_product, write_g2f, AxisRange, Field,
    GridField3, GridSpec3, WeightKind,
};

/// Which function space a field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    /// Functions of `(w, t)`.
    Time3,
    /// Functions of `(w, w3)`.
    Freq3,
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainTag::Time3 => f.write_str("TIME3"),
            DomainTag::Freq3 => f.write_str("FREQ3"),
        }
    }
}

impl DomainTag {
    pub fn expect(self, expected: DomainTag) -> Result<()> {
        if self == expected {
            Ok(())
        } else {
            Err(Error::TagMismatch { expected, found: self })
        }
    }
}

/// A point of the frequency plane times the third axis, tagged by domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub omega: FreqVec,
    pub third: f64,
    pub tag: DomainTag,
}

impl Point3 {
    pub fn freq(w1: f64, w2: f64, w3: f64) -> Self {
        Self { omega: FreqVec::new(w1, w2), third: w3, tag: DomainTag::Freq3 }
    }

    pub fn time(w1: f64, w2: f64, t: f64) -> Self {
        Self { omega: FreqVec::new(w1, w2), third: t, tag: DomainTag::Time3 }
    }
}

/// `amplitude * |w|^p * exp(-alpha |w|^2) * |s|^q * exp(-beta s^2)`, times `sign(s)`
/// when `odd`, where `s` is the third coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSeparable {
    pub amplitude: Complex64,
    pub p: f64,
    pub alpha: f64,
    pub q: f64,
    pub beta: f64,
    #[serde(default)]
    pub odd: bool,
}

impl GaussianSeparable {
    pub fn new(amplitude: Complex64, p: f64, alpha: f64, q: f64, beta: f64) -> Self {
        Self { amplitude, p, alpha, q, beta, odd: false }
    }

    pub fn odd(mut self) -> Self {
        self.odd = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude.re.is_finite()
            && self.amplitude.im.is_finite()
            && self.p.is_finite()
            && self.p >= 0.0
            && self.q.is_finite()
            && self.q >= 0.0
            && self.alpha.is_finite()
            && self.alpha >= 0.0
            && self.beta.is_finite()
            && self.beta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid Gaussian parameters {self:?}")))
        }
    }

    #[inline]
    pub(crate) fn radial(&self, w: FreqVec) -> Complex64 {
        let r2 = w.norm_sq();
        self.amplitude * (power_of_norm(r2, self.p) * (-self.alpha * r2).exp())
    }

    #[inline]
    pub(crate) fn third(&self, s: f64) -> f64 {
        let mag = power_of_abs(s, self.q) * (-self.beta * s * s).exp();
        if self.odd {
            if s > 0.0 {
                mag
            } else if s < 0.0 {
                -mag
            } else {
                0.0
            }
        } else {
            mag
        }
    }
}

/// `|w|^p` from `|w|^2`.
#[inline]
pub(crate) fn power_of_norm(r2: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        r2.sqrt()
    } else if p == 2.0 {
        r2
    } else {
        r2.powf(0.5 * p)
    }
}

#[inline]
pub(crate) fn power_of_abs(s: f64, q: f64) -> f64 {
    let a = s.abs();
    if q == 0.0 {
        1.0
    } else if q == 0.5 {
        a.sqrt()
    } else if q == 1.0 {
        a
    } else if q == 2.0 {
        a * a
    } else {
        a.powf(q)
    }
}

#[inline]
pub(crate) fn cis(turns: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * turns).sin_cos();
    Complex64::new(c, s)
}

const PHASE_ANCHOR: usize = 16;

/// `out[k] *= base * exp(2 pi i thirds[k] u)`. On an evenly spaced line the phase
/// advances by a fixed rotation, recomputed exactly every `PHASE_ANCHOR` points.
fn line_phase(thirds: &[f64], u: f64, out: &mut [Complex64], base: Complex64) {
    let n = thirds.len();
    let step = if n > 1 { (thirds[n - 1] - thirds[0]) / (n - 1) as f64 } else { 0.0 };
    let tol = 1e-12 * (thirds[0].abs() + thirds[n.saturating_sub(1)].abs() + step.abs());
    let even = n > 2 && thirds.iter().enumerate().all(|(k, &s)| (s - thirds[0] - k as f64 * step).abs() <= tol);
    if !even {
        for (o, &s) in out.iter_mut().zip(thirds) {
            if o.re != 0.0 || o.im != 0.0 {
                *o *= base * cis(s * u);
            }
        }
        return;
    }
    let rot = cis(step * u);
    for (os, ts) in out.chunks_mut(PHASE_ANCHOR).zip(thirds.chunks(PHASE_ANCHOR)) {
        let mut ph = base * cis(ts[0] * u);
        for o in os.iter_mut() {
            if o.re != 0.0 || o.im != 0.0 {
                *o *= ph;
            }
            ph *= rot;
        }
    }
}

/// Expression-tree node. Children are shared, never mutated.
#[derive(Clone, Debug)]
pub enum Expr {
    Gaussian(GaussianSeparable),
    /// Multiplication by `exp(2 pi i w.x)`.
    Modulation { x: Vec2, child: Arc<Expr> },
    /// The pull-back of the frequency-side representation.
    PullbackSigma2 { g: G2Elem, child: Arc<Expr> },
    /// The pull-back of the time-side representation.
    PullbackRho2 { g: G2Elem, child: Arc<Expr> },
    /// Multiplication by `|w|^{-1} |w3|^{-1/2}`.
    DufloMooreWeight(Arc<Expr>),
    ScalarMultiple { c: Complex64, child: Arc<Expr> },
    Sum(Vec<Arc<Expr>>),
    /// The image of an abstract vector under the unitary `U`.
    FromAbstract(AbstractVector),
    /// `zeta(w) * phi(third)`.
    Tensor { omega: Field2, third: Field1 },
}

impl Expr {
    /// Evaluates along the third axis at fixed `w`, writing `out[k] = f(w, thirds[k])`.
    pub fn eval_line(&self, w: FreqVec, thirds: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(thirds.len(), out.len());
        match self {
            Expr::Gaussian(gs) => {
                let radial = gs.radial(w);
                if radial == Complex64::new(0.0, 0.0) {
                    out.fill(Complex64::new(0.0, 0.0));
                    return;
                }
                for (o, &s) in out.iter_mut().zip(thirds) {
                    *o = radial * gs.third(s);
                }
            }
            Expr::Modulation { x, child } => {
                child.eval_line(w, thirds, out);
                let ph = cis(w.w1 * x.x1 + w.w2 * x.x2);
                out.iter_mut().for_each(|o| *o *= ph);
            }
            Expr::PullbackSigma2 { g, child } => {
                if w.is_zero() {
                    out.fill(Complex64::new(0.0, 0.0));
                    return;
                }
                let wa = freq_act(w, &g.a);
                let (u, v) = cocycle_uv_unchecked(w, &g.a);
                let pref = g.a.det().abs() * (w.norm_sq() / wa.norm_sq()).sqrt();
                let moved: Vec<f64> = thirds.iter().map(|s| s * v).collect();
                child.eval_line(wa, &moved, out);
                let base = cis(w.w1 * g.x.x1 + w.w2 * g.x.x2) * pref;
                line_phase(thirds, u, out, base);
            }
            Expr::PullbackRho2 { g, child } => {
                if w.is_zero() {
                    out.fill(Complex64::new(0.0, 0.0));
                    return;
                }
                let wa = freq_act(w, &g.a);
                let (u, v) = cocycle_uv_unchecked(w, &g.a);
                let pref = (wa.norm_sq() / w.norm_sq()).sqrt();
                let moved: Vec<f64> = thirds.iter().map(|t| (t - u) / v).collect();
                child.eval_line(wa, &moved, out);
                let base = cis(w.w1 * g.x.x1 + w.w2 * g.x.x2) * pref;
                out.iter_mut().for_each(|o| *o *= base);
            }
            Expr::DufloMooreWeight(child) => {
                let n = w.norm();
                if n == 0.0 {
                    out.fill(Complex64::new(0.0, 0.0));
                    return;
                }
                child.eval_line(w, thirds, out);
                for (o, &s) in out.iter_mut().zip(thirds) {
                    *o = if s == 0.0 { Complex64::new(0.0, 0.0) } else { *o / (n * s.abs().sqrt()) };
                }
            }
            Expr::ScalarMultiple { c, child } => {
                child.eval_line(w, thirds, out);
                out.iter_mut().for_each(|o| *o *= c);
            }
            Expr::Sum(children) => {
                out.fill(Complex64::new(0.0, 0.0));
                let mut tmp = vec![Complex64::new(0.0, 0.0); out.len()];
                for c in children {
                    c.eval_line(w, thirds, &mut tmp);
                    out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
                }
            }
            Expr::Tensor { omega, third } => {
                let z = omega.eval(w);
                for (o, &s) in out.iter_mut().zip(thirds) {
                    *o = if z.re == 0.0 && z.im == 0.0 { z } else { z * third.eval(s) };
                }
            }
            Expr::FromAbstract(f) => {
                let n = w.norm();
                for (o, &s) in out.iter_mut().zip(thirds) {
                    *o = if n == 0.0 || s == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        f.eval(w, 1.0 / s) / (n * s.abs().sqrt())
                    };
                }
            }
        }
    }

    pub fn eval_at(&self, w: FreqVec, third: f64) -> Complex64 {
        let mut out = [Complex64::new(0.0, 0.0)];
        self.eval_line(w, &[third], &mut out);
        out[0]
    }
}

/// A domain-tagged analytic field.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    tag: DomainTag,
    expr: Arc<Expr>,
}

impl AnalyticField {
    pub fn gaussian(tag: DomainTag, g: GaussianSeparable) -> Result<Self> {
        g.validate()?;
        Ok(Self { tag, expr: Arc::new(Expr::Gaussian(g)) })
    }

    /// `zeta(w) * phi(third)`.
    pub fn tensor(tag: DomainTag, omega: Field2, third: Field1) -> Self {
        Self::from_expr(tag, Expr::Tensor { omega, third })
    }

    pub(crate) fn from_expr(tag: DomainTag, expr: Expr) -> Self {
        Self { tag, expr: Arc::new(expr) }
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub(crate) fn expr_arc(&self) -> Arc<Expr> {
        Arc::clone(&self.expr)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_expr(self.tag, Expr::ScalarMultiple { c, child: self.expr_arc() })
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn modulate(&self, x: Vec2) -> Self {
        Self::from_expr(self.tag, Expr::Modulation { x, child: self.expr_arc() })
    }

    pub fn sum(fields: &[AnalyticField]) -> Result<Self> {
        let first = fields.first().ok_or(Error::InvalidSpec("empty sum".into()))?;
        for f in fields {
            f.tag.expect(first.tag)?;
        }
        Ok(Self::from_expr(first.tag, Expr::Sum(fields.iter().map(|f| f.expr_arc()).collect())))
    }

    pub fn add(&self, other: &AnalyticField) -> Result<Self> {
        Self::sum(&[self.clone(), other.clone()])
    }

    pub fn eval(&self, p: Point3) -> Result<Complex64> {
        p.tag.expect(self.tag)?;
        Ok(self.expr.eval_at(p.omega, p.third))
    }

    /// Line evaluation without a tag check; the caller owns the domain.
    pub fn eval_line(&self, w: FreqVec, thirds: &[f64], out: &mut [Complex64]) {
        self.expr.eval_line(w, thirds, out)
    }
}
