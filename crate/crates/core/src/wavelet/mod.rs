//! Wavelets, admissibility, and the voice transform over a truncated Haar quadrature.

mod coeffs;
mod engine;
mod g1;
mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{
    f3_forward_analytic, weighted_inner_product, AnalyticField, DomainTag, Field, GaussianSeparable,
    GridSpec3, WeightKind,
};
use crate::group::{G2Elem, Vec2};
use crate::representation::{rho2_apply, sigma2_apply};

pub use coeffs::{read_g2c, write_g2c, CoeffMeta, CoeffSet, SourceInfo};
pub use engine::{
    analyze, orthogonality_estimate, pair_sums, reconstruct, synthesize, OrthoEstimate, PairRequest, Reconstruction,
};
pub use g1::{g1_identity_check, G1Quad};
pub use quadrature::{reference_inner_grid, MatrixNode, QuadConfig, QuadSpecG2, REFERENCE_CELLS};

fn unit() -> f64 {
    1.0
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

/// A named analytic wavelet family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveletSpec {
    /// `scale * sqrt2 |w| e^{-pi |w|^2} * 2^{1/4} |w3|^{1/2} e^{-pi w3^2}`, frequency side.
    PsiStar {
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `scale * sqrt2 |w| e^{-pi |w|^2} * sqrt(2 pi) t e^{-pi t^2}`, time side.
    RhoStar {
        #[serde(default = "unit")]
        scale: f64,
    },
    Gaussian {
        domain: DomainTag,
        #[serde(default = "unit_amplitude")]
        amplitude: [f64; 2],
        p: f64,
        alpha: f64,
        q: f64,
        beta: f64,
        #[serde(default)]
        odd: bool,
        #[serde(default)]
        modulation: Option<[f64; 2]>,
    },
    Sum {
        terms: Vec<WaveletSpec>,
    },
}

impl WaveletSpec {
    pub fn psi_star() -> Self {
        WaveletSpec::PsiStar { scale: 1.0 }
    }

    pub fn rho_star() -> Self {
        WaveletSpec::RhoStar { scale: 1.0 }
    }

    pub fn build(&self) -> Result<AnalyticField> {
        let real = |x: f64| Complex64::new(x, 0.0);
        match self {
            WaveletSpec::PsiStar { scale } => AnalyticField::gaussian(
                DomainTag::Freq3,
                GaussianSeparable::new(real(scale * 2f64.sqrt() * 2f64.powf(0.25)), 1.0, PI, 0.5, PI),
            ),
            WaveletSpec::RhoStar { scale } => AnalyticField::gaussian(
                DomainTag::Time3,
                GaussianSeparable::new(real(scale * 2f64.sqrt() * (2.0 * PI).sqrt()), 1.0, PI, 1.0, PI)
                    .odd(),
            ),
            WaveletSpec::Gaussian { domain, amplitude, p, alpha, q, beta, odd, modulation } => {
                let mut g = GaussianSeparable::new(Complex64::new(amplitude[0], amplitude[1]), *p, *alpha, *q, *beta);
                g.odd = *odd;
                let f = AnalyticField::gaussian(*domain, g)?;
                Ok(match modulation {
                    Some([x1, x2]) => f.modulate(Vec2::new(*x1, *x2)),
                    None => f,
                })
            }
            WaveletSpec::Sum { terms } => {
                let fields = terms.iter().map(|t| t.build()).collect::<Result<Vec<_>>>()?;
                AnalyticField::sum(&fields)
            }
        }
    }

    pub fn tag(&self) -> Result<DomainTag> {
        Ok(self.build()?.tag())
    }
}

/// `sigma2[g] psi` for frequency-side wavelets, `rho2[g] w` for time-side ones.
pub fn transported_wavelet(g: &G2Elem, psi: &AnalyticField) -> Result<AnalyticField> {
    match psi.tag() {
        DomainTag::Freq3 => sigma2_apply(g, psi),
        DomainTag::Time3 => rho2_apply(g, psi),
    }
}

/// Shape parameters `(p, alpha, q, beta)` of the weak-reconstruction test fields.
pub const WEAK_TEST_PARAMS: [(f64, f64, f64, f64); 5] =
    [(0.0, 0.5, 0.0, 1.0), (0.0, 1.0, 1.0, 2.0), (1.0, 1.0, 0.0, 2.0), (1.0, 1.0, 2.0, 1.0), (0.0, 0.5, 2.0, 4.0)];

/// Unit-amplitude Gaussians against which reconstructions are paired.
pub fn weak_test_fields(tag: DomainTag) -> Result<Vec<AnalyticField>> {
    WEAK_TEST_PARAMS
        .iter()
        .map(|&(p, alpha, q, beta)| AnalyticField::gaussian(tag, GaussianSeparable::new(Complex64::new(1.0, 0.0), p, alpha, q, beta)))
        .collect()
}

/// Relative growth under refinement above which an admissibility integral is divergent.
pub const DIVERGENCE_GROWTH: f64 = 0.10;
/// Relative change under refinement within which it counts as converged.
pub const CONVERGENCE_BAND: f64 = 0.02;

/// Default frequency box for admissibility integrals.
pub fn default_admissibility_grid() -> GridSpec3 {
    GridSpec3::cube(48, 5.0, 48, 5.0).expect("valid grid")
}

fn refine(q: &GridSpec3) -> GridSpec3 {
    let mut r = *q;
    for a in &mut r.axes {
        a.n *= 2;
    }
    r
}

/// Result of an admissibility computation at two resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    /// Second-order extrapolation `(4 refined - coarse) / 3`.
    pub integral: f64,
    /// Value at the given resolution.
    pub coarse: f64,
    /// Value with every axis refined twice.
    pub refined: f64,
    pub converged: bool,
}

impl Admissibility {
    pub fn growth(&self) -> f64 {
        (self.refined - self.coarse) / self.coarse.abs().max(f64::MIN_POSITIVE)
    }
}

/// Integrands with a kink across `w3 = 0` converge at second order, so the two
/// resolutions are combined by one Richardson step.
fn extrapolate<T>(coarse: T, refined: T) -> T
where
    T: std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
{
    (refined * 4.0 - coarse) * (1.0 / 3.0)
}

fn frequency_side(psi: &AnalyticField) -> Result<AnalyticField> {
    match psi.tag() {
        DomainTag::Freq3 => Ok(psi.clone()),
        DomainTag::Time3 => f3_forward_analytic(psi),
    }
}

/// `∫∫ |psi|^2 / (|w|^2 |w3|)` on `q` and on `q` with every axis refined twice.
///
/// Time-side wavelets are transformed in closed form first.
pub fn admissibility_integral(psi: &AnalyticField, q: &GridSpec3, exec: Exec) -> Result<Admissibility> {
    let hat: Field = frequency_side(psi)?.into();
    let coarse = weighted_inner_product(&hat, &hat, WeightKind::Admissibility, q, exec)?.re;
    let fine = weighted_inner_product(&hat, &hat, WeightKind::Admissibility, &refine(q), exec)?.re;
    let result = Admissibility { integral: extrapolate(coarse, fine), coarse, refined: fine, converged: false };
    let growth = result.growth();
    if !growth.is_finite() || growth > DIVERGENCE_GROWTH {
        return Err(Error::NonConvergent { coarse, refined: fine });
    }
    Ok(Admissibility { converged: growth.abs() <= CONVERGENCE_BAND, ..result })
}

/// `<T psi2, T psi1>`, the constant in the orthogonality relations.
pub fn duflo_moore_pairing(psi2: &AnalyticField, psi1: &AnalyticField, q: &GridSpec3, exec: Exec) -> Result<Complex64> {
    for psi in [psi1, psi2] {
        let a = admissibility_integral(psi, q, exec)?;
        if !a.converged {
            return Err(Error::NonConvergent { coarse: a.coarse, refined: a.refined });
        }
    }
    let a: Field = frequency_side(psi2)?.into();
    let b: Field = frequency_side(psi1)?.into();
    let coarse = weighted_inner_product(&a, &b, WeightKind::Admissibility, q, exec)?;
    let fine = weighted_inner_product(&a, &b, WeightKind::Admissibility, &refine(q), exec)?;
    Ok(extrapolate(coarse, fine))
}

/// Tolerance on the admissibility integral after normalization.
pub const NORMALIZATION_TOL: f64 = 2e-6;

/// `psi / sqrt(admissibility integral)`, together with the factor applied.
pub fn normalize_to_wavelet(psi: &AnalyticField, q: &GridSpec3, exec: Exec) -> Result<(AnalyticField, f64)> {
    let a = admissibility_integral(psi, q, exec)?;
    if !a.converged {
        return Err(Error::NonConvergent { coarse: a.coarse, refined: a.refined });
    }
    if !(a.integral > f64::MIN_POSITIVE) {
        return Err(Error::ZeroField);
    }
    let factor = 1.0 / a.integral.sqrt();
    let out = psi.scale_real(factor);
    let check = admissibility_integral(&out, q, exec)?.integral;
    if (check - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationError { which: "wavelet", value: check, tol: NORMALIZATION_TOL });
    }
    Ok((out, factor))
}

/// `<xi, sigma2[g] psi>` (or `<f, rho2[g] w>` on the time side) by midpoint quadrature on `q`.
pub fn voice_coefficient(xi: &Field, psi: &AnalyticField, g: &G2Elem, q: &GridSpec3, exec: Exec) -> Result<Complex64> {
    xi.tag().expect(psi.tag()).map_err(|_| Error::TagMismatch { expected: psi.tag(), found: xi.tag() })?;
    let moved: Field = transported_wavelet(g, psi)?.into();
    weighted_inner_product(xi, &moved, WeightKind::Lebesgue, q, exec)
}
