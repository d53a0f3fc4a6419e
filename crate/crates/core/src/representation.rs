//! The representations of the affine group and the operators relating them.
//!
//! * `sigma2` acts on frequency-side fields, `rho2` on time-side fields.
//! * The abstract `sigma` acts on functions of `(w, nu)` with `nu != 0`, the
//!   measure being `dnu/|nu| dw/|w|^2`; [`u_apply`] maps it onto `sigma2`.
//! * `T` is multiplication by `|w|^{-1} |w3|^{-1/2}`.
//! * The natural representation of the group on functions of `w`, and the
//!   one-dimensional affine representation, serve as reference cases.
//!
//! Every operator wraps its argument in a pull-back node; nothing is sampled.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::cocycle::{cocycle_uv_unchecked, freq_act, FreqVec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, pairwise_sum, Exec};
use crate::field::{cis, power_of_abs, power_of_norm, AnalyticField, AxisRange, DomainTag, Expr, Point3};
use crate::group::{g2_invert, modular_delta, G2Elem, DEFAULT_EPS_DET};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_group(g: &G2Elem) -> Result<()> {
    g.a.check_nonsingular(DEFAULT_EPS_DET)?;
    Ok(())
}

/// A function on the frequency plane.
#[derive(Clone, Debug)]
pub enum Field2 {
    /// `amplitude |w|^p exp(-alpha |w|^2)`.
    Gaussian { amplitude: Complex64, p: f64, alpha: f64 },
    /// `|det A|^{1/2} exp(2 pi i w.x) child(w A)`.
    Natural { g: G2Elem, child: Arc<Field2> },
    Scaled { c: Complex64, child: Arc<Field2> },
    Sum(Vec<Field2>),
}

impl Field2 {
    pub fn gaussian(amplitude: Complex64, p: f64, alpha: f64) -> Result<Self> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite())
            || !(p.is_finite() && p >= 0.0)
            || !(alpha.is_finite() && alpha >= 0.0)
        {
            return Err(Error::InvalidSpec(format!("bad plane Gaussian p={p} alpha={alpha}")));
        }
        Ok(Field2::Gaussian { amplitude, p, alpha })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Field2::Scaled { c, child: Arc::new(self.clone()) }
    }

    pub fn eval(&self, w: FreqVec) -> Complex64 {
        match self {
            Field2::Gaussian { amplitude, p, alpha } => {
                let r2 = w.norm_sq();
                amplitude * (power_of_norm(r2, *p) * (-alpha * r2).exp())
            }
            Field2::Natural { g, child } => {
                let pref = g.a.det().abs().sqrt();
                child.eval(freq_act(w, &g.a)) * cis(w.w1 * g.x.x1 + w.w2 * g.x.x2) * pref
            }
            Field2::Scaled { c, child } => child.eval(w) * c,
            Field2::Sum(children) => children.iter().map(|c| c.eval(w)).sum(),
        }
    }
}

/// A function on the line.
#[derive(Clone, Debug)]
pub enum Field1 {
    /// `amplitude |t|^q exp(-beta t^2)`, times `sign(t)` when `odd`.
    Gaussian { amplitude: Complex64, q: f64, beta: f64, odd: bool },
    /// `|a|^{-1/2} child((t - x)/a)`.
    Affine { x: f64, a: f64, child: Arc<Field1> },
    /// `|a|^{1/2} exp(2 pi i s x) child(s a)`, the same operator on the frequency side.
    AffineHat { x: f64, a: f64, child: Arc<Field1> },
    Scaled { c: Complex64, child: Arc<Field1> },
    Sum(Vec<Field1>),
}

impl Field1 {
    pub fn gaussian(amplitude: Complex64, q: f64, beta: f64) -> Result<Self> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite())
            || !(q.is_finite() && q >= 0.0)
            || !(beta.is_finite() && beta >= 0.0)
        {
            return Err(Error::InvalidSpec(format!("bad line Gaussian q={q} beta={beta}")));
        }
        Ok(Field1::Gaussian { amplitude, q, beta, odd: false })
    }

    pub fn odd_gaussian(amplitude: Complex64, q: f64, beta: f64) -> Result<Self> {
        match Self::gaussian(amplitude, q, beta)? {
            Field1::Gaussian { amplitude, q, beta, .. } => Ok(Field1::Gaussian { amplitude, q, beta, odd: true }),
            _ => unreachable!(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Field1::Scaled { c, child: Arc::new(self.clone()) }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Field1::Gaussian { amplitude, q, beta, odd } => {
                let mag = power_of_abs(t, *q) * (-beta * t * t).exp();
                let s = if !odd || t > 0.0 {
                    mag
                } else if t < 0.0 {
                    -mag
                } else {
                    0.0
                };
                amplitude * s
            }
            Field1::Affine { x, a, child } => child.eval((t - x) / a) / a.abs().sqrt(),
            Field1::AffineHat { x, a, child } => child.eval(t * a) * cis(t * x) * a.abs().sqrt(),
            Field1::Scaled { c, child } => child.eval(t) * c,
            Field1::Sum(children) => children.iter().map(|c| c.eval(t)).sum(),
        }
    }
}

/// A function of `(w, nu)`, an element of the space carrying the abstract `sigma`.
#[derive(Clone, Debug)]
pub enum AbstractVector {
    /// `zeta(w) phi(nu)`.
    Product { omega: Field2, nu: Field1 },
    /// `|w| zeta(w) |nu|^{-1/2} phi(1/nu)`, whose image under `U` is `zeta ⊗ phi`.
    ZetaPhi { zeta: Field2, phi: Field1 },
    Sigma { g: G2Elem, child: Arc<AbstractVector> },
    UInverse(AnalyticField),
    Scaled { c: Complex64, child: Arc<AbstractVector> },
    Sum(Vec<AbstractVector>),
}

impl AbstractVector {
    pub fn scale(&self, c: Complex64) -> Self {
        AbstractVector::Scaled { c, child: Arc::new(self.clone()) }
    }

    /// Value at `(w, nu)`; zero when `w = 0` or `nu = 0`.
    pub fn eval(&self, w: FreqVec, nu: f64) -> Complex64 {
        if nu == 0.0 || w.is_zero() {
            return zero();
        }
        match self {
            AbstractVector::Product { omega, nu: phi } => omega.eval(w) * phi.eval(nu),
            AbstractVector::ZetaPhi { zeta, phi } => {
                zeta.eval(w) * phi.eval(1.0 / nu) * (w.norm() / nu.abs().sqrt())
            }
            AbstractVector::Sigma { g, child } => {
                let wa = freq_act(w, &g.a);
                let (u, v) = cocycle_uv_unchecked(w, &g.a);
                let pref = g.a.det().abs().sqrt() * (w.norm_sq() / wa.norm_sq()).sqrt();
                let inner = child.eval(wa, nu / v);
                if inner == zero() {
                    return inner;
                }
                inner * cis(w.w1 * g.x.x1 + w.w2 * g.x.x2 + u / nu) * pref
            }
            AbstractVector::UInverse(xi) => {
                xi.expr().eval_at(w, 1.0 / nu) * (w.norm() / nu.abs().sqrt())
            }
            AbstractVector::Scaled { c, child } => child.eval(w, nu) * c,
            AbstractVector::Sum(children) => children.iter().map(|c| c.eval(w, nu)).sum(),
        }
    }
}

/// `sigma2[x, A]` applied to a frequency-side field.
pub fn sigma2_apply(g: &G2Elem, xi: &AnalyticField) -> Result<AnalyticField> {
    xi.tag().expect(DomainTag::Freq3)?;
    check_group(g)?;
    Ok(AnalyticField::from_expr(DomainTag::Freq3, Expr::PullbackSigma2 { g: *g, child: xi.expr_arc() }))
}

/// `sigma2[x, A]^* = sigma2[[x, A]^{-1}]`.
pub fn sigma2_adjoint_apply(g: &G2Elem, xi: &AnalyticField) -> Result<AnalyticField> {
    sigma2_apply(&g2_invert(g)?, xi)
}

/// `rho2[x, A]` applied to a time-side field.
pub fn rho2_apply(g: &G2Elem, f: &AnalyticField) -> Result<AnalyticField> {
    f.tag().expect(DomainTag::Time3)?;
    check_group(g)?;
    Ok(AnalyticField::from_expr(DomainTag::Time3, Expr::PullbackRho2 { g: *g, child: f.expr_arc() }))
}

/// Multiplication by `|w|^{-1} |w3|^{-1/2}`.
pub fn duflo_moore_apply(xi: &AnalyticField) -> Result<AnalyticField> {
    xi.tag().expect(DomainTag::Freq3)?;
    Ok(AnalyticField::from_expr(DomainTag::Freq3, Expr::DufloMooreWeight(xi.expr_arc())))
}

/// Largest relative residual of `sigma2[g] T sigma2[g]^* xi = Delta(g)^{1/2} T xi` over `pts`.
pub fn semi_invariance_residual(g: &G2Elem, xi: &AnalyticField, pts: &[Point3]) -> Result<f64> {
    let lhs = sigma2_apply(g, &duflo_moore_apply(&sigma2_adjoint_apply(g, xi)?)?)?;
    let t = duflo_moore_apply(xi)?;
    let scale = modular_delta(g)?.sqrt();
    let mut worst = 0.0f64;
    for &p in pts {
        let tp = t.eval(p)?;
        let r = (lhs.eval(p)? - tp * scale).norm() / (1.0 + tp.norm());
        worst = worst.max(r);
    }
    Ok(worst)
}

/// The abstract `sigma[x, A]`.
pub fn sigma_abstract_apply(g: &G2Elem, f: &AbstractVector) -> Result<AbstractVector> {
    check_group(g)?;
    Ok(AbstractVector::Sigma { g: *g, child: Arc::new(f.clone()) })
}

/// `(U F)(w, w3) = F(w, 1/w3) / (|w| |w3|^{1/2})`.
pub fn u_apply(f: &AbstractVector) -> AnalyticField {
    AnalyticField::from_expr(DomainTag::Freq3, Expr::FromAbstract(f.clone()))
}

/// `(U^{-1} xi)(w, nu) = |w| xi(w, 1/nu) / |nu|^{1/2}`.
pub fn u_inverse_apply(xi: &AnalyticField) -> Result<AbstractVector> {
    xi.tag().expect(DomainTag::Freq3)?;
    Ok(AbstractVector::UInverse(xi.clone()))
}

/// Tolerance on the normalization integrals checked by [`e_from_zeta_phi`].
pub const ZETA_PHI_NORMALIZATION_TOL: f64 = 1e-4;

/// The vector `E` with `U E = zeta ⊗ phi`, for `∫|zeta|^2/|w|^2 = ∫|phi|^2/|s| = 1`.
pub fn e_from_zeta_phi(zeta: &Field2, phi: &Field1) -> Result<AbstractVector> {
    let q = AbstractQuad::default();
    let z = q.integrate_plane(|w| zeta.eval(w).norm_sqr(), Exec::Parallel);
    if (z - 1.0).abs() > ZETA_PHI_NORMALIZATION_TOL || !z.is_finite() {
        return Err(Error::NormalizationError { which: "zeta", value: z, tol: ZETA_PHI_NORMALIZATION_TOL });
    }
    let p = q.integrate_line(|s| phi.eval(s).norm_sqr());
    if (p - 1.0).abs() > ZETA_PHI_NORMALIZATION_TOL || !p.is_finite() {
        return Err(Error::NormalizationError { which: "phi", value: p, tol: ZETA_PHI_NORMALIZATION_TOL });
    }
    Ok(AbstractVector::ZetaPhi { zeta: zeta.clone(), phi: phi.clone() })
}

/// `|det A|^{1/2} exp(2 pi i w.x) xi(w A)`.
pub fn natural_rep_hat_apply(g: &G2Elem, xi: &Field2) -> Result<Field2> {
    check_group(g)?;
    Ok(Field2::Natural { g: *g, child: Arc::new(xi.clone()) })
}

/// `|a|^{-1/2} f((t - x)/a)`.
pub fn g1_rep_apply(x: f64, a: f64, f: &Field1) -> Result<Field1> {
    check_dilation(a)?;
    Ok(Field1::Affine { x, a, child: Arc::new(f.clone()) })
}

/// The frequency-side form `|a|^{1/2} exp(2 pi i s x) f(s a)`.
pub fn g1_rep_hat_apply(x: f64, a: f64, f: &Field1) -> Result<Field1> {
    check_dilation(a)?;
    Ok(Field1::AffineHat { x, a, child: Arc::new(f.clone()) })
}

fn check_dilation(a: f64) -> Result<()> {
    if !a.is_finite() || a.abs() < DEFAULT_EPS_DET {
        return Err(Error::SingularDilation(a.abs()));
    }
    Ok(())
}

/// Midpoint rules for the invariant measures `dw/|w|^2` and `dnu/|nu|`.
///
/// The plane is covered in log-polar coordinates `w = e^rho (cos th, sin th)`
/// and the line in `nu = ±e^lambda`, where both measures are Lebesgue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbstractQuad {
    pub rho: AxisRange,
    pub n_theta: usize,
    pub lambda: AxisRange,
}

impl Default for AbstractQuad {
    fn default() -> Self {
        Self {
            rho: AxisRange::new(670, -30.0, 3.5),
            n_theta: 48,
            lambda: AxisRange::new(1440, -36.0, 36.0),
        }
    }
}

impl AbstractQuad {
    fn plane_nodes(&self, i: usize) -> Vec<FreqVec> {
        let r = self.rho.coord(i).exp();
        (0..self.n_theta)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / self.n_theta as f64;
                FreqVec::new(r * th.cos(), r * th.sin())
            })
            .collect()
    }

    fn plane_cell(&self) -> f64 {
        self.rho.step() * 2.0 * PI / self.n_theta as f64
    }

    fn line_nodes(&self) -> Vec<f64> {
        let pos: Vec<f64> = self.lambda.coords().iter().map(|l| l.exp()).collect();
        pos.iter().map(|&v| -v).chain(pos.iter().copied()).collect()
    }

    /// `∫ f(w) dw/|w|^2`.
    pub fn integrate_plane<F>(&self, f: F, exec: Exec) -> f64
    where
        F: Fn(FreqVec) -> f64 + Sync + Send,
    {
        let rows = map_indexed(exec, self.rho.n, |i| {
            let vals: Vec<f64> = self.plane_nodes(i).into_iter().map(&f).collect();
            pairwise_sum(&vals)
        });
        pairwise_sum(&rows) * self.plane_cell()
    }

    /// `∫ f(nu) dnu/|nu|` over both half-lines.
    pub fn integrate_line<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self.line_nodes().into_iter().map(f).collect();
        pairwise_sum(&vals) * self.lambda.step()
    }

    /// `∫∫ F conj(G) dnu/|nu| dw/|w|^2`.
    pub fn inner_product(&self, f: &AbstractVector, g: &AbstractVector, exec: Exec) -> Complex64 {
        let nus = self.line_nodes();
        let rows = map_indexed(exec, self.rho.n, |i| {
            let lines: Vec<Complex64> = self
                .plane_nodes(i)
                .into_iter()
                .map(|w| {
                    let terms: Vec<Complex64> =
                        nus.iter().map(|&nu| f.eval(w, nu) * g.eval(w, nu).conj()).collect();
                    pairwise_sum(&terms)
                })
                .collect();
            pairwise_sum(&lines)
        });
        pairwise_sum(&rows) * (self.plane_cell() * self.lambda.step())
    }

    pub fn norm_sq(&self, f: &AbstractVector, exec: Exec) -> f64 {
        self.inner_product(f, f, exec).re
    }
}
