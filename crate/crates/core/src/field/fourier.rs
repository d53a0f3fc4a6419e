//! The third-axis transform `F3 f(w, w3) = ∫ f(w, t) exp(+2 pi i w3 t) dt` and its inverse.
//!
//! On a cell-centered axis with `n` cells of width `h` the output axis has width
//! `1/h`, is centered at zero and is also cell-centered, so the discrete map is
//! an FFT sandwiched between two diagonal phase factors. It is exactly unitary
//! for the midpoint inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{AxisRange, GridField3, GridSpec3};
use super::{cis, AnalyticField, DomainTag, Expr, GaussianSeparable};
use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Exec};

struct AxisPlan {
    fft: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    out: AxisRange,
}

/// Plans `out_m = h Σ_l in_l exp(sign 2 pi i y_m x_l)`.
fn plan_axis(input: &AxisRange, sign: f64) -> AxisPlan {
    let n = input.n;
    let h = input.step();
    let nf = n as f64;
    let out = AxisRange::new(n, -0.5 / h, 0.5 / h);
    let dy = out.step();
    // y_m x_l = y_min x_l + (m + 1/2) dy x_min + (m + 1/2)(l + 1/2)/n
    let pre = (0..n)
        .map(|l| cis(sign * (out.min * input.coord(l) + l as f64 / (2.0 * nf))))
        .collect();
    let post = (0..n)
        .map(|m| {
            let mh = m as f64 + 0.5;
            cis(sign * (mh * dy * input.min + m as f64 / (2.0 * nf) + 0.25 / nf)) * h
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = if sign > 0.0 { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    AxisPlan { fft, pre, post, out }
}

fn transform_grid(f: &GridField3, sign: f64, out_tag: DomainTag, exec: Exec) -> GridField3 {
    let spec = *f.spec();
    let plan = plan_axis(&spec.axes[2], sign);
    let n3 = spec.axes[2].n;
    let out_spec = GridSpec3 { axes: [spec.axes[0], spec.axes[1], plan.out] };
    let mut samples = f.samples().to_vec();
    // Fixed 64-line chunks keep scratch allocation independent of the pool size.
    const LINES: usize = 64;
    for_each_chunk_mut(exec, &mut samples, LINES * n3, |_, chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.fft.get_inplace_scratch_len()];
        for line in chunk.chunks_mut(n3) {
            line.iter_mut().zip(&plan.pre).for_each(|(s, p)| *s *= p);
            plan.fft.process_with_scratch(line, &mut scratch);
            line.iter_mut().zip(&plan.post).for_each(|(s, p)| *s *= p);
        }
    });
    GridField3::new(out_tag, out_spec, samples).expect("same sample count")
}

/// Grid transform TIME3 -> FREQ3 along the third axis.
pub fn f3_forward(f: &GridField3, exec: Exec) -> Result<GridField3> {
    f.tag().expect(DomainTag::Time3)?;
    Ok(transform_grid(f, 1.0, DomainTag::Freq3, exec))
}

/// Grid transform FREQ3 -> TIME3 along the third axis.
pub fn f3_inverse(xi: &GridField3, exec: Exec) -> Result<GridField3> {
    xi.tag().expect(DomainTag::Freq3)?;
    Ok(transform_grid(xi, -1.0, DomainTag::Time3, exec))
}

fn gaussian_third_pair(g: &GaussianSeparable, sign: f64) -> Result<Vec<GaussianSeparable>> {
    if g.beta <= 0.0 {
        return Err(Error::NoClosedForm("third-axis factor does not decay".into()));
    }
    let b = g.beta;
    let root = (PI / b).sqrt();
    let c = PI * PI / b;
    let base = |amp: Complex64, q: f64, odd: bool| GaussianSeparable {
        amplitude: g.amplitude * amp,
        p: g.p,
        alpha: g.alpha,
        q,
        beta: c,
        odd,
    };
    match (g.q, g.odd) {
        (q, false) if q == 0.0 => Ok(vec![base(Complex64::new(root, 0.0), 0.0, false)]),
        // t e^{-b t^2}  ->  sign * i (pi/b) sqrt(pi/b) s e^{-c s^2}
        (q, true) if q == 1.0 => Ok(vec![base(Complex64::new(0.0, sign * PI / b * root), 1.0, true)]),
        // t^2 e^{-b t^2}  ->  sqrt(pi/b) (1/(2b) - pi^2 s^2 / b^2) e^{-c s^2}
        (q, false) if q == 2.0 => Ok(vec![
            base(Complex64::new(root / (2.0 * b), 0.0), 0.0, false),
            base(Complex64::new(-root * PI * PI / (b * b), 0.0), 2.0, false),
        ]),
        _ => Err(Error::NoClosedForm(format!(
            "third-axis factor |s|^{} (odd = {}) is not in the pairs table",
            g.q, g.odd
        ))),
    }
}

fn transform_expr(e: &Expr, sign: f64) -> Result<Expr> {
    Ok(match e {
        Expr::Gaussian(g) => {
            let terms = gaussian_third_pair(g, sign)?;
            if terms.len() == 1 {
                Expr::Gaussian(terms[0])
            } else {
                Expr::Sum(terms.into_iter().map(|t| Arc::new(Expr::Gaussian(t))).collect())
            }
        }
        Expr::Modulation { x, child } => {
            Expr::Modulation { x: *x, child: Arc::new(transform_expr(child, sign)?) }
        }
        Expr::ScalarMultiple { c, child } => {
            Expr::ScalarMultiple { c: *c, child: Arc::new(transform_expr(child, sign)?) }
        }
        Expr::Sum(children) => Expr::Sum(
            children
                .iter()
                .map(|c| transform_expr(c, sign).map(Arc::new))
                .collect::<Result<_>>()?,
        ),
        _ => return Err(Error::NoClosedForm("operator nodes have no tabulated transform".into())),
    })
}

/// Closed-form third-axis transform of sums of Gaussian-family terms.
pub fn f3_forward_analytic(f: &AnalyticField) -> Result<AnalyticField> {
    f.tag().expect(DomainTag::Time3)?;
    Ok(AnalyticField::from_expr(DomainTag::Freq3, transform_expr(f.expr(), 1.0)?))
}

/// Closed-form inverse third-axis transform of sums of Gaussian-family terms.
pub fn f3_inverse_analytic(xi: &AnalyticField) -> Result<AnalyticField> {
    xi.tag().expect(DomainTag::Freq3)?;
    Ok(AnalyticField::from_expr(DomainTag::Time3, transform_expr(xi.expr(), -1.0)?))
}
