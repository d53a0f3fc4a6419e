//! Voice transforms over a tensor quadrature.
//!
//! The transported wavelet factors as `exp(2 pi i w.x) P_A(w, s)`, so for a fixed
//! linear part `A` the coefficients at all translations come from one pass over
//! the inner grid followed by a separable phase sum:
//!
//! `V(x, A) = Σ_w exp(-2 pi i w.x) H_A(w)`, with `H_A(w) = Σ_s xi(w, s) conj(P_A(w, s))`.
//!
//! Work is split by matrix node only, and each matrix is handled start to finish
//! by one worker, so results do not depend on the thread count.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::coeffs::{CoeffMeta, CoeffSet, SourceInfo};
use super::{default_admissibility_grid, duflo_moore_pairing, QuadSpecG2, WaveletSpec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, pairwise_sum, tree_reduce, Exec};
use crate::field::{
    cis, sample_to_grid, weighted_inner_product, AnalyticField, DomainTag, Expr, Field, GridField3, GridSpec3,
    WeightKind,
};
use crate::group::{Mat2, G2Elem};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `Σ a_k b_k` with four interleaved accumulators.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = ([0.0f64; 4], [0.0f64; 4]);
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(zero(), |acc, (x, y)| acc + x * y);
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re - x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im + x[l].im * y[l].re;
        }
    }
    Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])) + tail
}

/// `Σ a_k conj(b_k)`.
fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = ([0.0f64; 4], [0.0f64; 4]);
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(zero(), |acc, (x, y)| acc + x * y.conj());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].im * y[l].re - x[l].re * y[l].im;
        }
    }
    Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3])) + tail
}

/// `P_A`, the wavelet transported by `[0, A]`.
fn pullback(psi: &AnalyticField, a: &Mat2) -> Expr {
    let g = G2Elem { x: crate::group::Vec2::ZERO, a: *a };
    let child = psi.expr_arc();
    match psi.tag() {
        DomainTag::Freq3 => Expr::PullbackSigma2 { g, child },
        DomainTag::Time3 => Expr::PullbackRho2 { g, child },
    }
}

/// Phase table `exp(sign 2 pi i x_a w_i)`, row-major in `a`.
fn phase_table(xs: &[f64], ws: &[f64], sign: f64) -> Vec<Complex64> {
    xs.iter().flat_map(|&x| ws.iter().map(move |&w| cis(sign * x * w))).collect()
}

fn sampled(field: &Field, inner: &GridSpec3, exec: Exec) -> Result<Vec<Complex64>> {
    match field {
        Field::Analytic(f) => Ok(sample_to_grid(f, inner, exec).into_samples()),
        Field::Grid(g) => {
            if g.spec() != inner {
                return Err(Error::GridMismatch("field is not sampled on the inner grid".into()));
            }
            Ok(g.samples().to_vec())
        }
    }
}

struct Analyzer<'a> {
    inner: GridSpec3,
    thirds: Vec<f64>,
    fields: Vec<Vec<Complex64>>,
    wavelets: &'a [AnalyticField],
    quad: &'a QuadSpecG2,
    e1: Vec<Complex64>,
    e2: Vec<Complex64>,
}

impl<'a> Analyzer<'a> {
    fn new(
        fields: &[&Field],
        wavelets: &'a [AnalyticField],
        quad: &'a QuadSpecG2,
        inner: &GridSpec3,
        exec: Exec,
    ) -> Result<Self> {
        let tag = wavelets.first().ok_or(Error::InvalidSpec("no wavelet".into()))?.tag();
        for w in wavelets {
            w.tag().expect(tag)?;
        }
        for f in fields {
            if f.tag() != tag {
                return Err(Error::TagMismatch { expected: tag, found: f.tag() });
            }
        }
        let fields = fields.iter().map(|f| sampled(f, inner, exec)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inner: *inner,
            thirds: inner.axes[2].coords(),
            fields,
            wavelets,
            quad,
            e1: phase_table(quad.x1(), &inner.axes[0].coords(), -1.0),
            e2: phase_table(quad.x2(), &inner.axes[1].coords(), -1.0),
        })
    }

    /// Voice blocks over all translations for each `(field, wavelet)` combination at matrix `m`.
    fn blocks(&self, m: usize, combos: &[(usize, usize)]) -> Vec<Vec<Complex64>> {
        let [n1, n2, n3] = self.inner.dims();
        let a = self.quad.matrices()[m].a;
        let h3 = self.inner.axes[2].step();
        let mut hs = vec![vec![zero(); n1 * n2]; combos.len()];
        let mut p = vec![zero(); n3];
        let used: BTreeSet<usize> = combos.iter().map(|c| c.1).collect();
        for w in used {
            let pb = pullback(&self.wavelets[w], &a);
            for i in 0..n1 {
                for j in 0..n2 {
                    pb.eval_line(self.inner.omega(i, j), &self.thirds, &mut p);
                    let base = self.inner.index(i, j, 0);
                    for (c, h) in combos.iter().zip(hs.iter_mut()) {
                        if c.1 != w {
                            continue;
                        }
                        let xi = &self.fields[c.0][base..base + n3];
                        h[i * n2 + j] = dot_conj(xi, &p) * h3;
                    }
                }
            }
        }
        hs.iter().map(|h| self.phase_sum(h)).collect()
    }

    fn phase_sum(&self, h: &[Complex64]) -> Vec<Complex64> {
        let [n1, n2, _] = self.inner.dims();
        let (nx1, nx2) = (self.quad.x1().len(), self.quad.x2().len());
        let cell = self.inner.axes[0].step() * self.inner.axes[1].step();
        // g[b][i] = Σ_j e2[b][j] h[i][j]
        let mut g = vec![zero(); nx2 * n1];
        for i in 0..n1 {
            let row = &h[i * n2..(i + 1) * n2];
            for b in 0..nx2 {
                g[b * n1 + i] = dot(row, &self.e2[b * n2..(b + 1) * n2]);
            }
        }
        let mut v = vec![zero(); nx1 * nx2];
        for a in 0..nx1 {
            let e = &self.e1[a * n1..(a + 1) * n1];
            for b in 0..nx2 {
                v[a * nx2 + b] = dot(e, &g[b * n1..(b + 1) * n1]) * cell;
            }
        }
        v
    }
}

/// Voice coefficients of `xi` at every node of `quad`, integrating over `inner`.
///
/// Grid inputs must be sampled on `inner`.
pub fn analyze(
    xi: &Field,
    psi: &WaveletSpec,
    quad: &Arc<QuadSpecG2>,
    inner: &GridSpec3,
    exec: Exec,
) -> Result<CoeffSet> {
    let wavelets = [psi.build()?];
    let engine = Analyzer::new(&[xi], &wavelets, quad, inner, exec)?;
    let blocks = map_indexed(exec, quad.matrices().len(), |m| engine.blocks(m, &[(0, 0)]).pop().unwrap_or_default());
    let meta = CoeffMeta { wavelet: psi.clone(), source: SourceInfo { tag: xi.tag(), grid: *inner } };
    CoeffSet::new(Arc::clone(quad), blocks.concat(), meta)
}

/// One requested pairing `Σ_k w_k V_{wavelet1} field1 (g_k) conj(V_{wavelet2} field2 (g_k))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRequest {
    pub field1: usize,
    pub wavelet1: usize,
    pub field2: usize,
    pub wavelet2: usize,
}

/// Evaluates several coefficient pairings in one pass without storing coefficients.
pub fn pair_sums(
    fields: &[Field],
    wavelets: &[AnalyticField],
    requests: &[PairRequest],
    quad: &QuadSpecG2,
    inner: &GridSpec3,
    exec: Exec,
) -> Result<Vec<Complex64>> {
    for r in requests {
        if r.field1.max(r.field2) >= fields.len() || r.wavelet1.max(r.wavelet2) >= wavelets.len() {
            return Err(Error::InvalidSpec(format!("pair request out of range: {r:?}")));
        }
    }
    let refs: Vec<&Field> = fields.iter().collect();
    let engine = Analyzer::new(&refs, wavelets, quad, inner, exec)?;
    let combos: Vec<(usize, usize)> = requests
        .iter()
        .flat_map(|r| [(r.field1, r.wavelet1), (r.field2, r.wavelet2)])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot = |c: (usize, usize)| combos.iter().position(|&d| d == c).expect("combo present");
    let x_cell = quad.x_cell();
    let per_matrix = map_indexed(exec, quad.matrices().len(), |m| {
        let blocks = engine.blocks(m, &combos);
        let w = quad.matrices()[m].weight * x_cell;
        requests
            .iter()
            .map(|r| {
                let (b1, b2) = (&blocks[slot((r.field1, r.wavelet1))], &blocks[slot((r.field2, r.wavelet2))]);
                let terms: Vec<Complex64> = b1.iter().zip(b2).map(|(x, y)| x * y.conj()).collect();
                pairwise_sum(&terms) * w
            })
            .collect::<Vec<_>>()
    });
    Ok((0..requests.len())
        .map(|r| {
            let col: Vec<Complex64> = per_matrix.iter().map(|v| v[r]).collect();
            pairwise_sum(&col)
        })
        .collect())
}

/// Both sides of the orthogonality relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrthoEstimate {
    /// `Σ_k w_k V_{psi1} xi1 (g_k) conj(V_{psi2} xi2 (g_k))`.
    pub lhs: Complex64,
    /// `<xi1, xi2> <T psi2, T psi1>`.
    pub rhs: Complex64,
}

impl OrthoEstimate {
    pub fn ratio(&self) -> Complex64 {
        self.lhs / self.rhs
    }
}

/// Estimates both sides of the orthogonality relation over `quad`.
pub fn orthogonality_estimate(
    xi1: &Field,
    xi2: &Field,
    psi1: &AnalyticField,
    psi2: &AnalyticField,
    quad: &QuadSpecG2,
    inner: &GridSpec3,
    exec: Exec,
) -> Result<OrthoEstimate> {
    let t = duflo_moore_pairing(psi2, psi1, &default_admissibility_grid(), exec)?;
    let fields = [xi1.clone(), xi2.clone()];
    let wavelets = [psi1.clone(), psi2.clone()];
    let req = PairRequest { field1: 0, wavelet1: 0, field2: 1, wavelet2: 1 };
    let lhs = pair_sums(&fields, &wavelets, &[req], quad, inner, exec)?[0];
    let x1 = Field::Grid(sample_or_clone(xi1, inner, exec)?);
    let x2 = Field::Grid(sample_or_clone(xi2, inner, exec)?);
    let inner_product = weighted_inner_product(&x1, &x2, WeightKind::Lebesgue, inner, exec)?;
    Ok(OrthoEstimate { lhs, rhs: inner_product * t })
}

fn sample_or_clone(f: &Field, inner: &GridSpec3, exec: Exec) -> Result<GridField3> {
    match f {
        Field::Analytic(a) => Ok(sample_to_grid(a, inner, exec)),
        Field::Grid(g) => {
            if g.spec() != inner {
                return Err(Error::GridMismatch("field is not sampled on the inner grid".into()));
            }
            Ok(g.clone())
        }
    }
}

const SYNTH_BLOCK: usize = 64;
const SYNTH_WAVE: usize = 8;

/// Inverse of the translation sum: for one matrix node, `s(w) = w_k Σ_x c(x) exp(2 pi i w.x)`.
struct Spreader {
    e1: Vec<Complex64>,
    e2: Vec<Complex64>,
    n1: usize,
    n2: usize,
    nx1: usize,
    nx2: usize,
}

impl Spreader {
    fn new(quad: &QuadSpecG2, out: &GridSpec3) -> Self {
        let [n1, n2, _] = out.dims();
        Self {
            e1: phase_table(quad.x1(), &out.axes[0].coords(), 1.0),
            e2: phase_table(quad.x2(), &out.axes[1].coords(), 1.0),
            n1,
            n2,
            nx1: quad.x1().len(),
            nx2: quad.x2().len(),
        }
    }

    /// Calls `line(i, j, s)` for every nonzero `s(w_ij)`.
    fn spread(&self, block: &[Complex64], w: f64, mut line: impl FnMut(usize, usize, Complex64)) {
        let (n1, n2, nx1, nx2) = (self.n1, self.n2, self.nx1, self.nx2);
        // t[a][j] = Σ_b c[a][b] e2[b][j]
        let mut t = vec![zero(); nx1 * n2];
        for a in 0..nx1 {
            for b in 0..nx2 {
                let cab = block[a * nx2 + b];
                let e = &self.e2[b * n2..(b + 1) * n2];
                for (tj, ej) in t[a * n2..(a + 1) * n2].iter_mut().zip(e) {
                    *tj += cab * ej;
                }
            }
        }
        let mut col = vec![zero(); nx1];
        for i in 0..n1 {
            for (a, c) in col.iter_mut().enumerate() {
                *c = self.e1[a * n1 + i];
            }
            for j in 0..n2 {
                let mut s = zero();
                for a in 0..nx1 {
                    s += col[a] * t[a * n2 + j];
                }
                if s != zero() {
                    line(i, j, s * w);
                }
            }
        }
    }
}

/// Runs `work(m, grid)` over all matrix nodes in fixed blocks and sums the per-block
/// grids by a tree, so the result does not depend on the thread count. Per-node
/// return values come back in node order.
fn accumulate_grid<T, F>(exec: Exec, n_mat: usize, len: usize, work: F) -> (Vec<Complex64>, Vec<T>)
where
    T: Send,
    F: Fn(usize, &mut [Complex64]) -> T + Sync,
{
    let n_blocks = n_mat.div_ceil(SYNTH_BLOCK);
    let mut total = vec![zero(); len];
    let mut values = Vec::with_capacity(n_mat);
    let mut start = 0;
    while start < n_blocks {
        let wave = SYNTH_WAVE.min(n_blocks - start);
        let partials = map_indexed(exec, wave, |b| {
            let mut grid = vec![zero(); len];
            let first = (start + b) * SYNTH_BLOCK;
            let vals: Vec<T> = (first..(first + SYNTH_BLOCK).min(n_mat)).map(|m| work(m, &mut grid)).collect();
            (grid, vals)
        });
        let mut grids = Vec::with_capacity(wave);
        for (g, v) in partials {
            grids.push(g);
            values.extend(v);
        }
        let sum = tree_reduce(grids, |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        })
        .expect("nonempty wave");
        total.iter_mut().zip(&sum).for_each(|(x, y)| *x += y);
        start += wave;
    }
    (total, values)
}

/// `Σ_k w_k c_k (transported wavelet at g_k)` sampled on `out`.
pub fn synthesize(c: &CoeffSet, psi: &WaveletSpec, out: &GridSpec3, exec: Exec) -> Result<GridField3> {
    if psi != &c.meta().wavelet {
        let tag = psi.tag()?;
        if tag != c.meta().source.tag {
            return Err(Error::TagMismatch { expected: c.meta().source.tag, found: tag });
        }
        return Err(Error::InvalidSpec("wavelet differs from the one used for analysis".into()));
    }
    let wavelet = psi.build()?;
    let quad = c.quad();
    let n3 = out.dims()[2];
    let thirds = out.axes[2].coords();
    let per = quad.x_count();
    let spreader = Spreader::new(quad, out);
    let (total, _) = accumulate_grid(exec, quad.matrices().len(), out.len(), |m, grid| {
        let block = &c.coeffs()[m * per..(m + 1) * per];
        if block.iter().all(|v| *v == zero()) {
            return;
        }
        let pb = pullback(&wavelet, &quad.matrices()[m].a);
        let mut p = vec![zero(); n3];
        spreader.spread(block, quad.matrices()[m].weight * quad.x_cell(), |i, j, s| {
            pb.eval_line(out.omega(i, j), &thirds, &mut p);
            let base = out.index(i, j, 0);
            for (g, v) in grid[base..base + n3].iter_mut().zip(&p) {
                *g += s * v;
            }
        });
    });
    GridField3::new(c.meta().source.tag, *out, total)
}

/// Reconstruction of `xi` on the inner grid together with its partial energy.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// `Σ_k w_k V_psi xi (g_k) (transported wavelet at g_k)` on the inner grid.
    pub field: GridField3,
    /// `Σ_k w_k |V_psi xi (g_k)|^2`.
    pub energy: f64,
}

/// `synthesize(analyze(xi))` on the inner grid without storing coefficients.
///
/// Each matrix node evaluates its transported wavelet once and uses it for both passes.
pub fn reconstruct(
    xi: &Field,
    psi: &WaveletSpec,
    quad: &QuadSpecG2,
    inner: &GridSpec3,
    exec: Exec,
) -> Result<Reconstruction> {
    let wavelets = [psi.build()?];
    let engine = Analyzer::new(&[xi], &wavelets, quad, inner, exec)?;
    let spreader = Spreader::new(quad, inner);
    let [n1, n2, n3] = inner.dims();
    let h3 = inner.axes[2].step();
    let (total, energies) = accumulate_grid(exec, quad.matrices().len(), inner.len(), |m, grid| {
        let pb = pullback(&wavelets[0], &quad.matrices()[m].a);
        let mut lines = vec![zero(); inner.len()];
        let mut h = vec![zero(); n1 * n2];
        for i in 0..n1 {
            for j in 0..n2 {
                let base = inner.index(i, j, 0);
                let p = &mut lines[base..base + n3];
                pb.eval_line(inner.omega(i, j), &engine.thirds, p);
                h[i * n2 + j] = dot_conj(&engine.fields[0][base..base + n3], p) * h3;
            }
        }
        let v = engine.phase_sum(&h);
        let w = quad.matrices()[m].weight * quad.x_cell();
        spreader.spread(&v, w, |i, j, s| {
            let base = inner.index(i, j, 0);
            for (g, p) in grid[base..base + n3].iter_mut().zip(&lines[base..base + n3]) {
                *g += s * p;
            }
        });
        pairwise_sum(&v.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>()) * w
    });
    Ok(Reconstruction { field: GridField3::new(xi.tag(), *inner, total)?, energy: pairwise_sum(&energies) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GaussianSeparable;
    use crate::group::{g2_compose, g2_invert, Vec2};
    use crate::representation::sigma2_apply;
    use crate::wavelet::{voice_coefficient, QuadConfig};

    fn small_quad() -> Arc<QuadSpecG2> {
        Arc::new(QuadSpecG2::build(&QuadConfig::reference_box([4, 2, 2, 2, 2])).unwrap())
    }

    fn inner() -> GridSpec3 {
        GridSpec3::cube(16, 2.5, 12, 2.5).unwrap()
    }

    fn psi() -> WaveletSpec {
        WaveletSpec::psi_star()
    }

    fn bump_field() -> AnalyticField {
        AnalyticField::gaussian(DomainTag::Freq3, GaussianSeparable::new(Complex64::new(0.7, 0.2), 1.0, 2.0, 0.0, 2.5))
            .unwrap()
            .modulate(Vec2::new(0.4, -0.3))
    }

    fn bump() -> Field {
        bump_field().into()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn matches_pointwise_voice() {
        let quad = small_quad();
        let c = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let wavelet = psi().build().unwrap();
        for k in [0, 5, 77, quad.len() - 1] {
            let (g, _) = quad.node(k);
            let v = voice_coefficient(&bump(), &wavelet, &g, &inner(), Exec::Sequential).unwrap();
            assert!(rel(c.coeffs()[k], v) < 1e-10, "{k}: {} {v}", c.coeffs()[k]);
        }
    }

    #[test]
    fn zero_field_and_zero_coefficients() {
        let quad = small_quad();
        let zero_field: Field = GridField3::zeros(DomainTag::Freq3, inner()).into();
        let c = analyze(&zero_field, &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        assert!(c.coeffs().iter().all(|v| *v == zero()));
        let out = synthesize(&c, &psi(), &inner(), Exec::Sequential).unwrap();
        assert!(out.samples().iter().all(|v| *v == zero()));
    }

    #[test]
    fn single_node_synthesis_is_the_transported_wavelet() {
        let one = crate::field::AxisRange::new(1, 0.1, 0.5);
        let cfg = QuadConfig::Entry {
            x1: one,
            x2: crate::field::AxisRange::new(1, -0.6, -0.2),
            a: crate::field::AxisRange::new(1, 1.0, 1.4),
            b: crate::field::AxisRange::new(1, 0.1, 0.3),
            c: crate::field::AxisRange::new(1, -0.5, -0.1),
            d: crate::field::AxisRange::new(1, 0.7, 0.9),
        };
        let quad = Arc::new(QuadSpecG2::build(&cfg).unwrap());
        let (g, w) = quad.node(0);
        let meta = CoeffMeta { wavelet: psi(), source: SourceInfo { tag: DomainTag::Freq3, grid: inner() } };
        let c = CoeffSet::new(Arc::clone(&quad), vec![Complex64::new(1.0 / w, 0.0)], meta).unwrap();
        let out = synthesize(&c, &psi(), &inner(), Exec::Sequential).unwrap();
        let expected = sample_to_grid(&sigma2_apply(&g, &psi().build().unwrap()).unwrap(), &inner(), Exec::Sequential);
        for (a, b) in out.samples().iter().zip(expected.samples()) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn synthesis_is_linear() {
        let quad = small_quad();
        let c1 = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let c2 = analyze(&psi().build().unwrap().into(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let c2 = c1.with_coeffs(c2.coeffs().to_vec()).unwrap();
        let both = synthesize(&c1.add(&c2).unwrap(), &psi(), &inner(), Exec::Sequential).unwrap();
        let s1 = synthesize(&c1, &psi(), &inner(), Exec::Sequential).unwrap();
        let s2 = synthesize(&c2, &psi(), &inner(), Exec::Sequential).unwrap();
        let scale = both.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for ((a, b), c) in both.samples().iter().zip(s1.samples()).zip(s2.samples()) {
            assert!((a - b - c).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn translation_covariance() {
        let quad = small_quad();
        let wavelet = psi().build().unwrap();
        let h = G2Elem { x: Vec2::new(0.3, -0.2), a: Mat2::IDENTITY };
        let moved: Field = sigma2_apply(&h, &bump_field()).unwrap().into();
        let h_inv = g2_invert(&h).unwrap();
        for k in [3, 40, 100] {
            let (g, _) = quad.node(k);
            let lhs = voice_coefficient(&moved, &wavelet, &g, &inner(), Exec::Sequential).unwrap();
            let rhs = voice_coefficient(&bump(), &wavelet, &g2_compose(&h_inv, &g).unwrap(), &inner(), Exec::Sequential)
                .unwrap();
            assert!(rel(lhs, rhs) < 1e-10, "{lhs} {rhs}");
        }
    }

    #[test]
    fn fused_reconstruction_agrees() {
        let quad = small_quad();
        let c = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let two_step = synthesize(&c, &psi(), &inner(), Exec::Sequential).unwrap();
        let fused = reconstruct(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        assert!((fused.energy - c.partial_energy()).abs() < 1e-12 * c.partial_energy());
        let scale = two_step.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in fused.field.samples().iter().zip(two_step.samples()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
        // Σ w |c|^2 = <xi~, xi> on the inner grid.
        let xi = Field::Grid(sample_or_clone(&bump(), &inner(), Exec::Sequential).unwrap());
        let pairing =
            weighted_inner_product(&Field::Grid(fused.field), &xi, WeightKind::Lebesgue, &inner(), Exec::Sequential)
                .unwrap();
        assert!(rel(pairing, Complex64::new(fused.energy, 0.0)) < 1e-10);
    }

    #[test]
    fn pair_sums_match_stored_coefficients() {
        let quad = small_quad();
        let a = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let b = analyze(&psi().build().unwrap().into(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let direct = quad
            .nodes()
            .zip(a.coeffs().iter().zip(b.coeffs()))
            .fold(zero(), |acc, ((_, w), (x, y))| acc + x * y.conj() * w);
        let fields = [bump(), psi().build().unwrap().into()];
        let req = PairRequest { field1: 0, wavelet1: 0, field2: 1, wavelet2: 0 };
        let s = pair_sums(&fields, &[psi().build().unwrap()], &[req], &quad, &inner(), Exec::Sequential).unwrap();
        assert!(rel(s[0], direct) < 1e-12);
        let diag = PairRequest { field2: 0, ..req };
        let e = pair_sums(&fields, &[psi().build().unwrap()], &[diag], &quad, &inner(), Exec::Sequential).unwrap();
        assert!(rel(e[0], Complex64::new(a.partial_energy(), 0.0)) < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let quad = small_quad();
        let seq = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let par = analyze(&bump(), &psi(), &quad, &inner(), Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        let s = synthesize(&seq, &psi(), &inner(), Exec::Sequential).unwrap();
        let p = synthesize(&par, &psi(), &inner(), Exec::Parallel).unwrap();
        assert_eq!(s.samples(), p.samples());
        let r1 = reconstruct(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        let r2 = reconstruct(&bump(), &psi(), &quad, &inner(), Exec::Parallel).unwrap();
        assert_eq!(r1.energy.to_bits(), r2.energy.to_bits());
        assert_eq!(r1.field.samples(), r2.field.samples());
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let quad = small_quad();
        let time: Field = WaveletSpec::rho_star().build().unwrap().into();
        assert!(matches!(analyze(&time, &psi(), &quad, &inner(), Exec::Sequential), Err(Error::TagMismatch { .. })));
        let c = analyze(&bump(), &psi(), &quad, &inner(), Exec::Sequential).unwrap();
        assert!(matches!(
            synthesize(&c, &WaveletSpec::rho_star(), &inner(), Exec::Sequential),
            Err(Error::TagMismatch { .. })
        ));
        assert!(matches!(
            synthesize(&c, &WaveletSpec::PsiStar { scale: 2.0 }, &inner(), Exec::Sequential),
            Err(Error::InvalidSpec(_))
        ));
        let other = GridSpec3::cube(8, 2.5, 12, 2.5).unwrap();
        let grid: Field = GridField3::zeros(DomainTag::Freq3, other).into();
        assert!(matches!(analyze(&grid, &psi(), &quad, &inner(), Exec::Sequential), Err(Error::GridMismatch(_))));
    }
}
