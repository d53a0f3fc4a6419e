//! The one-dimensional affine group as a reference case.
//!
//! `∬ |<f, rho[x, a] g>|^2 dx da/a^2 = ||f||^2 ∫ |g^(s)|^2 / |s| ds`, evaluated on
//! the frequency side where `rho[x, a]` acts as `|a|^{1/2} e^{2 pi i s x} g^(a s)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, pairwise_sum, Exec};
use crate::field::{cis, AxisRange};
use crate::representation::Field1;

/// Truncation of the `(x, log|a|)` integral, both signs of `a`, and the frequency rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G1Quad {
    pub x: AxisRange,
    pub log_a: AxisRange,
    pub omega: AxisRange,
}

impl Default for G1Quad {
    fn default() -> Self {
        Self {
            x: AxisRange::symmetric(96, 12.0),
            log_a: AxisRange::symmetric(48, 3.0),
            omega: AxisRange::symmetric(512, 8.0),
        }
    }
}

/// `∫ |h(s)|^2 / |s| ds` in `s = ±e^lambda`, over `[-span, span]` in `lambda`.
fn log_line(h: &Field1, span: f64, n: usize) -> f64 {
    let lam = AxisRange::symmetric(n, span);
    let vals: Vec<f64> = lam
        .coords()
        .iter()
        .flat_map(|&l| {
            let s = l.exp();
            [h.eval(-s).norm_sqr(), h.eval(s).norm_sqr()]
        })
        .collect();
    pairwise_sum(&vals) * lam.step()
}

/// `(lhs, rhs)` of the identity for frequency-side `f_hat`, `g_hat`.
pub fn g1_identity_check(f_hat: &Field1, g_hat: &Field1, q: &G1Quad, exec: Exec) -> Result<(f64, f64)> {
    let coarse = log_line(g_hat, 36.0, 1440);
    let wide = log_line(g_hat, 72.0, 2880);
    if !(coarse.is_finite() && wide.is_finite()) || wide - coarse > super::DIVERGENCE_GROWTH * coarse.abs() {
        return Err(Error::NonConvergent { coarse, refined: wide });
    }
    let omegas = q.omega.coords();
    let h = q.omega.step();
    let fs: Vec<Complex64> = omegas.iter().map(|&w| f_hat.eval(w)).collect();
    let f_norm = pairwise_sum(&fs.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()) * h;
    let xs = q.x.coords();
    let phases: Vec<Complex64> = xs.iter().flat_map(|&x| omegas.iter().map(move |&w| cis(-w * x))).collect();
    let lams = q.log_a.coords();
    let rows = map_indexed(exec, 2 * lams.len(), |r| {
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        let a = sign * lams[r / 2].exp();
        let amp = a.abs().sqrt();
        let hs: Vec<Complex64> =
            omegas.iter().zip(&fs).map(|(&w, f)| f * (g_hat.eval(w * a) * amp).conj() * h).collect();
        let sq: Vec<f64> = (0..xs.len())
            .map(|ix| {
                let e = &phases[ix * omegas.len()..(ix + 1) * omegas.len()];
                hs.iter().zip(e).fold(Complex64::new(0.0, 0.0), |acc, (u, v)| acc + u * v).norm_sqr()
            })
            .collect();
        // da / a^2 = e^{-lambda} dlambda
        pairwise_sum(&sq) / a.abs()
    });
    let lhs = pairwise_sum(&rows) * q.x.step() * q.log_a.step();
    Ok((lhs, f_norm * wide))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g_hat() -> Field1 {
        Field1::gaussian(Complex64::new(2f64.powf(0.25), 0.0), 0.5, PI).unwrap()
    }

    #[test]
    fn unit_admissibility_factor() {
        assert!((log_line(&g_hat(), 36.0, 1440) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal() {
        let f = Field1::gaussian(Complex64::new(0.0, 0.0), 0.0, PI).unwrap();
        let (l, r) = g1_identity_check(&f, &g_hat(), &G1Quad::default(), Exec::Sequential).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn gaussian_window_is_rejected() {
        let f = Field1::gaussian(Complex64::new(1.0, 0.0), 0.0, PI).unwrap();
        assert!(matches!(
            g1_identity_check(&f, &f, &G1Quad::default(), Exec::Sequential),
            Err(Error::NonConvergent { .. })
        ));
    }
}
