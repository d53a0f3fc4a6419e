//! Seeded property suites behind `g2wave verify`.
//!
//! Every check reduces to a non-negative error compared against a tolerance;
//! a tolerance override replaces all of them at once.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cocycle::{cocycle_uv, freq_act, stabilizer_matrix, FreqVec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{
    f3_forward, f3_forward_analytic, f3_inverse, norm_sq, sample_to_grid, AnalyticField, AxisRange, DomainTag,
    Field, GaussianSeparable, GridField3, GridSpec3, Point3, WeightKind,
};
use crate::group::{
    g2_compose, g2_invert, kh_compose, kh_decompose, kh_haar_jacobian, modular_delta, G2Elem, KhCoords, Mat2, Vec2,
};
use crate::representation::{
    g1_rep_apply, natural_rep_hat_apply, rho2_apply, semi_invariance_residual, sigma2_apply, sigma_abstract_apply,
    u_apply, AbstractQuad, AbstractVector, Field1, Field2,
};
use crate::wavelet::{
    admissibility_integral, default_admissibility_grid, g1_identity_check, orthogonality_estimate,
    reference_inner_grid, G1Quad, QuadConfig, QuadSpecG2, WaveletSpec,
};

/// The named suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Cocycle,
    Group,
    Semiinv,
    Homomorphism,
    Unitary,
    Intertwine,
    Ortho,
    G1,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Cocycle,
        Suite::Group,
        Suite::Semiinv,
        Suite::Homomorphism,
        Suite::Unitary,
        Suite::Intertwine,
        Suite::Ortho,
        Suite::G1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Cocycle => "cocycle",
            Suite::Group => "group",
            Suite::Semiinv => "semiinv",
            Suite::Homomorphism => "homomorphism",
            Suite::Unitary => "unitary",
            Suite::Intertwine => "intertwine",
            Suite::Ortho => "ortho",
            Suite::G1 => "g1",
        }
    }

    /// Number of random draws when none is requested.
    pub fn default_samples(self) -> usize {
        match self {
            Suite::Cocycle | Suite::Group => 10_000,
            Suite::Semiinv | Suite::Homomorphism => 100,
            Suite::Unitary => 50,
            Suite::Intertwine => 20,
            Suite::Ortho | Suite::G1 => 1,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub samples: Option<usize>,
    pub seed: u64,
    /// Replaces every per-check tolerance.
    pub tol: Option<f64>,
    pub exec: Exec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: None, seed: 7, tol: None, exec: Exec::Parallel }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Checks {
    tol: Option<f64>,
    out: Vec<CheckResult>,
}

impl Checks {
    fn push(&mut self, name: &str, max_error: f64, tolerance: f64, samples: usize) {
        let tolerance = self.tol.unwrap_or(tolerance);
        // NaN never passes.
        let passed = max_error >= 0.0 && max_error <= tolerance;
        self.out.push(CheckResult { name: name.to_string(), max_error, tolerance, samples, passed });
    }
}

/// Runs one suite. Errors only for invalid configuration or a failing library call.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let samples = cfg.samples.unwrap_or_else(|| suite.default_samples());
    if samples == 0 {
        return Err(Error::InvalidSpec("samples must be positive".into()));
    }
    if let Some(t) = cfg.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidSpec(format!("bad tolerance {t}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut c = Checks { tol: cfg.tol, out: Vec::new() };
    match suite {
        Suite::Cocycle => cocycle_suite(&mut rng, samples, &mut c)?,
        Suite::Group => group_suite(&mut rng, samples, &mut c)?,
        Suite::Semiinv => semiinv_suite(&mut rng, samples, &mut c)?,
        Suite::Homomorphism => homomorphism_suite(&mut rng, samples, &mut c)?,
        Suite::Unitary => unitary_suite(&mut rng, samples, cfg.exec, &mut c)?,
        Suite::Intertwine => intertwine_suite(&mut rng, samples, cfg.exec, &mut c)?,
        Suite::Ortho => ortho_suite(cfg.exec, &mut c)?,
        Suite::G1 => g1_suite(cfg.exec, &mut c)?,
    }
    let passed = c.out.iter().all(|r| r.passed);
    Ok(SuiteReport { suite, seed: cfg.seed, samples, passed, checks: c.out })
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Below this magnitude values may be subnormal and carry only a few digits.
const REL_FLOOR: f64 = 1e-280;

fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(REL_FLOOR)
}

/// Entries in `[-2, 2]` with `|det| > 0.1`.
fn random_mat(rng: &mut ChaCha8Rng) -> Mat2 {
    loop {
        let m = Mat2::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        if m.det().abs() > 0.1 {
            return m;
        }
    }
}

/// Condition number bound for draws that feed composed operators.
const MAX_CONDITION: f64 = 8.0;

fn condition_number(m: &Mat2) -> f64 {
    let tr = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
    let det = m.det();
    let disc = (tr * tr - 4.0 * det * det).max(0.0).sqrt();
    ((tr + disc) / (tr - disc)).sqrt()
}

/// As [`random_g`], restricted to condition number at most [`MAX_CONDITION`].
///
/// Phases of composed operators grow like the squared condition number and
/// their rounding error grows with them.
fn random_conditioned_g(rng: &mut ChaCha8Rng) -> G2Elem {
    loop {
        let g = random_g(rng);
        if condition_number(&g.a) <= MAX_CONDITION {
            return g;
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_g(rng: &mut ChaCha8Rng) -> G2Elem {
    let a = random_mat(rng);
    G2Elem::new(random_vec(rng), a).expect("det bounded away from zero")
}

/// Close to the identity: `log r, log|v| in [-0.2, 0.2]`, `u in [-0.5, 0.5]`, any angle and sign.
fn random_moderate_g(rng: &mut ChaCha8Rng) -> G2Elem {
    let r = rng.random_range(-0.2f64..0.2).exp();
    let th = rng.random_range(0.0..2.0 * PI);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let k = KhCoords {
        s: r * th.cos(),
        t: r * th.sin(),
        u: rng.random_range(-0.5..0.5),
        v: sign * rng.random_range(-0.2f64..0.2).exp(),
    };
    G2Elem::new(random_vec(rng), kh_compose(&k)).expect("moderate matrix")
}

/// `|w| in [0.1, 4]`.
fn random_freq(rng: &mut ChaCha8Rng) -> FreqVec {
    let r = rng.random_range(0.1..4.0);
    let th = rng.random_range(0.0..2.0 * PI);
    FreqVec::new(r * th.cos(), r * th.sin())
}

fn random_third(rng: &mut ChaCha8Rng) -> f64 {
    let s = rng.random_range(0.05..3.0);
    if rng.random_bool(0.5) {
        s
    } else {
        -s
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> Point3 {
    let w = random_freq(rng);
    Point3::freq(w.w1, w.w2, random_third(rng))
}

fn freq_fields() -> Result<Vec<AnalyticField>> {
    let a = AnalyticField::gaussian(
        DomainTag::Freq3,
        GaussianSeparable::new(Complex64::new(0.7, 0.4), 1.0, 1.0, 0.5, 0.8),
    )?
    .modulate(Vec2::new(0.3, -0.2));
    let b = AnalyticField::gaussian(DomainTag::Freq3, GaussianSeparable::new(real(1.0), 2.0, 0.6, 1.0, 1.5).odd())?;
    Ok(vec![WaveletSpec::psi_star().build()?, a.clone(), a.add(&b)?])
}

/// Time-side fields without zeros along the third axis, where `rho2` shifts its argument.
fn time_fields() -> Result<Vec<AnalyticField>> {
    let a = AnalyticField::gaussian(
        DomainTag::Time3,
        GaussianSeparable::new(Complex64::new(0.2, 1.0), 1.0, 1.2, 0.0, 0.9),
    )?
    .modulate(Vec2::new(-0.4, 0.1));
    let b = AnalyticField::gaussian(DomainTag::Time3, GaussianSeparable::new(real(1.0), 0.0, PI, 0.0, PI))?;
    Ok(vec![a, b])
}

fn abstract_fields() -> Result<Vec<AbstractVector>> {
    let zeta = Field2::gaussian(real(2f64.sqrt()), 1.0, PI)?;
    let phi = Field1::gaussian(real(2f64.powf(0.25)), 0.5, PI)?;
    let omega = Field2::gaussian(Complex64::new(0.5, -1.0), 2.0, 1.3)?;
    let nu = Field1::odd_gaussian(real(1.0), 1.0, 0.7)?;
    Ok(vec![
        AbstractVector::ZetaPhi { zeta, phi },
        AbstractVector::Product { omega, nu },
    ])
}

fn cocycle_suite(rng: &mut ChaCha8Rng, n: usize, c: &mut Checks) -> Result<()> {
    let (mut eu, mut ev, mut closed, mut inv_v, mut inv_u, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let w = random_freq(rng);
        let a = random_mat(rng);
        let b = random_mat(rng);
        let wa = freq_act(w, &a);
        let (ua, va) = cocycle_uv(w, &a)?;
        let (ub, vb) = cocycle_uv(wa, &b)?;
        let (uab, vab) = cocycle_uv(w, &a.mul(&b))?;
        eu = eu.max((uab - (ua + va * ub)).abs());
        ev = ev.max((vab - va * vb).abs());
        let formula = a.det() * w.norm_sq() / wa.norm_sq();
        closed = closed.max((va - formula).abs() / va.abs());
        let (ui, vi) = cocycle_uv(wa, &a.inverse()?)?;
        inv_v = inv_v.max((va * vi - 1.0).abs());
        inv_u = inv_u.max((va * ui + ua).abs());
        let s = stabilizer_matrix(w, &a)?;
        let e = [(s.a - 1.0).abs(), s.b.abs(), (s.c - ua).abs(), (s.d - va).abs()];
        oracle = e.into_iter().fold(oracle, f64::max);
    }
    c.push("u_product", eu, 1e-11, n);
    c.push("v_product", ev, 1e-11, n);
    c.push("v_closed_form", closed, 1e-12, n);
    c.push("inverse_v", inv_v, 1e-11, n);
    c.push("inverse_u", inv_u, 1e-11, n);
    c.push("stabilizer_oracle", oracle, 1e-11, n);
    Ok(())
}

fn det4(mut m: [[f64; 4]; 4]) -> f64 {
    let mut det = 1.0;
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("rows");
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..4 {
            let f = m[r][col] / m[col][col];
            for k in col..4 {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    det
}

fn numeric_kh_jacobian(k: &KhCoords) -> f64 {
    let p = [k.s, k.t, k.u, k.v];
    let eval = |q: [f64; 4]| {
        let m = kh_compose(&KhCoords { s: q[0], t: q[1], u: q[2], v: q[3] });
        [m.a, m.b, m.c, m.d]
    };
    let mut jac = [[0.0; 4]; 4];
    for j in 0..4 {
        let h = 1e-6 * p[j].abs().max(1.0);
        let (mut lo, mut hi) = (p, p);
        lo[j] -= h;
        hi[j] += h;
        let (fl, fh) = (eval(lo), eval(hi));
        for i in 0..4 {
            jac[i][j] = (fh[i] - fl[i]) / (2.0 * h);
        }
    }
    det4(jac).abs()
}

fn group_suite(rng: &mut ChaCha8Rng, n: usize, c: &mut Checks) -> Result<()> {
    let (mut assoc, mut ident, mut inv, mut delta, mut kh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let (g, h, k) = (random_g(rng), random_g(rng), random_g(rng));
        let left = g2_compose(&g2_compose(&g, &h)?, &k)?;
        let right = g2_compose(&g, &g2_compose(&h, &k)?)?;
        assoc = assoc.max(left.max_abs_diff(&right));
        ident = ident
            .max(g2_compose(&g, &G2Elem::IDENTITY)?.max_abs_diff(&g))
            .max(g2_compose(&G2Elem::IDENTITY, &g)?.max_abs_diff(&g));
        let gi = g2_invert(&g)?;
        inv = inv
            .max(g2_compose(&g, &gi)?.max_abs_diff(&G2Elem::IDENTITY))
            .max(g2_compose(&gi, &g)?.max_abs_diff(&G2Elem::IDENTITY));
        let dgh = modular_delta(&g2_compose(&g, &h)?)?;
        delta = delta.max((dgh - modular_delta(&g)? * modular_delta(&h)?).abs() / dgh);
        let coords = kh_decompose(&g.a)?;
        kh = kh.max(kh_compose(&coords).max_abs_diff(&g.a));
        let back = kh_decompose(&kh_compose(&coords))?;
        kh = kh
            .max((back.s - coords.s).abs())
            .max((back.t - coords.t).abs())
            .max((back.u - coords.u).abs())
            .max((back.v - coords.v).abs());
    }
    c.push("associativity", assoc, 1e-12, n);
    c.push("identity", ident, 1e-12, n);
    c.push("inverse", inv, 1e-12, n);
    c.push("modular_homomorphism", delta, 1e-12, n);
    c.push("kh_round_trip", kh, 1e-12, n);
    let m = n.min(100);
    let mut jac = 0.0f64;
    for _ in 0..m {
        let k = KhCoords {
            s: rng.random_range(-2.0..2.0),
            t: rng.random_range(-2.0..2.0),
            u: rng.random_range(-2.0..2.0),
            v: rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
        };
        let exact = kh_haar_jacobian(&k);
        jac = jac.max((numeric_kh_jacobian(&k) - exact).abs() / exact);
    }
    c.push("kh_jacobian", jac, 1e-6, m);
    Ok(())
}

fn semiinv_suite(rng: &mut ChaCha8Rng, n: usize, c: &mut Checks) -> Result<()> {
    let fields = freq_fields()?;
    let mut worst = 0.0f64;
    for i in 0..n {
        let g = random_g(rng);
        let pts: Vec<Point3> = (0..20).map(|_| random_point(rng)).collect();
        worst = worst.max(semi_invariance_residual(&g, &fields[i % fields.len()], &pts)?);
    }
    c.push("semi_invariance", worst, 1e-11, n);
    Ok(())
}

const POINTS_PER_PAIR: usize = 100;

fn homomorphism_suite(rng: &mut ChaCha8Rng, n: usize, c: &mut Checks) -> Result<()> {
    let freq = freq_fields()?;
    let time = time_fields()?;
    let abs = abstract_fields()?;
    let plane = Field2::gaussian(Complex64::new(1.0, 0.5), 1.0, 0.9)?;
    let line = Field1::gaussian(real(1.0), 1.0, 1.1)?;
    let (mut e_sigma2, mut e_rho2, mut e_sigma, mut e_nat, mut e_g1, mut e_u) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let (g, h) = (random_conditioned_g(rng), random_conditioned_g(rng));
        let gh = g2_compose(&g, &h)?;

        let xi = &freq[i % freq.len()];
        let s_lhs = sigma2_apply(&g, &sigma2_apply(&h, xi)?)?;
        let s_rhs = sigma2_apply(&gh, xi)?;
        let f = &time[i % time.len()];
        let r_lhs = rho2_apply(&g, &rho2_apply(&h, f)?)?;
        let r_rhs = rho2_apply(&gh, f)?;
        let e = &abs[i % abs.len()];
        let a_lhs = sigma_abstract_apply(&g, &sigma_abstract_apply(&h, e)?)?;
        let a_rhs = sigma_abstract_apply(&gh, e)?;
        let u_lhs = u_apply(&sigma_abstract_apply(&g, e)?);
        let u_rhs = sigma2_apply(&g, &u_apply(e))?;
        let n_lhs = natural_rep_hat_apply(&g, &natural_rep_hat_apply(&h, &plane)?)?;
        let n_rhs = natural_rep_hat_apply(&gh, &plane)?;
        let (x1, a1) = (rng.random_range(-1.0..1.0), random_dilation(rng));
        let (x2, a2) = (rng.random_range(-1.0..1.0), random_dilation(rng));
        let l_lhs = g1_rep_apply(x1, a1, &g1_rep_apply(x2, a2, &line)?)?;
        let l_rhs = g1_rep_apply(x1 + a1 * x2, a1 * a2, &line)?;

        for _ in 0..POINTS_PER_PAIR {
            let p = random_point(rng);
            e_sigma2 = e_sigma2.max(rel_diff(s_lhs.eval(p)?, s_rhs.eval(p)?));
            e_u = e_u.max(rel_diff(u_lhs.eval(p)?, u_rhs.eval(p)?));
            let w = p.omega;
            e_sigma = e_sigma.max(rel_diff(a_lhs.eval(w, p.third), a_rhs.eval(w, p.third)));
            e_nat = e_nat.max(rel_diff(n_lhs.eval(w), n_rhs.eval(w)));
            let q = Point3::time(w.w1, w.w2, rng.random_range(-3.0..3.0));
            e_rho2 = e_rho2.max(rel_diff(r_lhs.eval(q)?, r_rhs.eval(q)?));
            let t = q.third;
            e_g1 = e_g1.max(rel_diff(l_lhs.eval(t), l_rhs.eval(t)));
        }
    }
    let m = n * POINTS_PER_PAIR;
    c.push("sigma2", e_sigma2, 1e-11, m);
    c.push("rho2", e_rho2, 1e-11, m);
    c.push("sigma_abstract", e_sigma, 1e-11, m);
    c.push("u_intertwines_sigma", e_u, 1e-11, m);
    c.push("natural_hat", e_nat, 1e-11, m);
    c.push("g1", e_g1, 1e-11, m);
    Ok(())
}

fn random_dilation(rng: &mut ChaCha8Rng) -> f64 {
    let a = rng.random_range(-1.0f64..1.0).exp();
    if rng.random_bool(0.5) {
        a
    } else {
        -a
    }
}

/// The 64^3 frequency grid for isometry checks.
pub fn isometry_grid() -> GridSpec3 {
    GridSpec3::cube(64, 4.0, 64, 4.0).expect("valid grid")
}

/// Log-polar rule sized for the rapidly decaying vectors of the `U` check.
fn isometry_abstract_quad() -> AbstractQuad {
    AbstractQuad {
        rho: AxisRange::new(240, -10.0, 2.0),
        n_theta: 48,
        lambda: AxisRange::new(800, -6.0, 14.0),
    }
}

/// Draws checked against abstract-side quadrature, which is far costlier than a grid norm.
const ABSTRACT_DRAWS: usize = 8;
/// Draws for the admissibility scaling check.
const SCALING_DRAWS: usize = 10;

fn unitary_suite(rng: &mut ChaCha8Rng, n: usize, exec: Exec, c: &mut Checks) -> Result<()> {
    let grid = isometry_grid();
    let xi = AnalyticField::gaussian(
        DomainTag::Freq3,
        GaussianSeparable::new(Complex64::new(0.6, 0.8), 2.0, PI, 1.0, PI).odd(),
    )?
    .modulate(Vec2::new(0.2, -0.1));
    let f = AnalyticField::gaussian(
        DomainTag::Time3,
        GaussianSeparable::new(real(1.0), 2.0, PI, 1.0, PI).odd(),
    )?;
    let xi_norm = norm_sq(&xi.clone().into(), WeightKind::Lebesgue, &grid, exec)?;
    let f_norm = norm_sq(&f.clone().into(), WeightKind::Lebesgue, &grid, exec)?;
    let (mut e_sigma2, mut e_rho2) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let g = random_moderate_g(rng);
        let s = norm_sq(&sigma2_apply(&g, &xi)?.into(), WeightKind::Lebesgue, &grid, exec)?;
        e_sigma2 = e_sigma2.max((s / xi_norm).sqrt().sub_one_abs());
        let r = norm_sq(&rho2_apply(&g, &f)?.into(), WeightKind::Lebesgue, &grid, exec)?;
        e_rho2 = e_rho2.max((r / f_norm).sqrt().sub_one_abs());
    }
    c.push("sigma2_isometry", e_sigma2, 1e-4, n);
    c.push("rho2_isometry", e_rho2, 1e-4, n);

    let zeta = Field2::gaussian(real(1.0), 2.0, PI)?;
    let phi = Field1::odd_gaussian(real(1.0), 1.0, PI)?;
    let e = AbstractVector::ZetaPhi { zeta, phi };
    let aq = isometry_abstract_quad();
    let m = n.min(ABSTRACT_DRAWS);
    let mut e_u = 0.0f64;
    for i in 0..m {
        let v = if i == 0 { e.clone() } else { sigma_abstract_apply(&random_moderate_g(rng), &e)? };
        let lhs = norm_sq(&u_apply(&v).into(), WeightKind::Lebesgue, &grid, exec)?;
        let rhs = aq.norm_sq(&v, exec);
        e_u = e_u.max((lhs / rhs).sqrt().sub_one_abs());
    }
    c.push("u_isometry", e_u, 1e-4, m);

    let psi = WaveletSpec::psi_star().build()?;
    let adm = default_admissibility_grid();
    let base = admissibility_integral(&psi, &adm, exec)?.integral;
    let m = n.min(SCALING_DRAWS);
    let mut e_dt = 0.0f64;
    for _ in 0..m {
        let g = random_moderate_g(rng);
        let moved = admissibility_integral(&sigma2_apply(&g, &psi)?, &adm, exec)?.integral;
        e_dt = e_dt.max((moved / (base * g.det().abs())).sub_one_abs());
    }
    c.push("admissibility_scaling", e_dt, 1e-3, m);
    Ok(())
}

trait SubOneAbs {
    fn sub_one_abs(self) -> f64;
}

impl SubOneAbs for f64 {
    fn sub_one_abs(self) -> f64 {
        (self - 1.0).abs()
    }
}

fn max_abs_diff(a: &GridField3, b: &GridField3) -> f64 {
    a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs(a: &GridField3) -> f64 {
    a.samples().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Time-side grid: a few plane nodes and a fine third axis.
fn intertwine_grid() -> GridSpec3 {
    GridSpec3::new([
        AxisRange::new(4, -1.5, 1.7),
        AxisRange::new(3, -1.1, 1.3),
        AxisRange::symmetric(256, 8.0),
    ])
    .expect("valid grid")
}

fn intertwine_suite(rng: &mut ChaCha8Rng, n: usize, exec: Exec, c: &mut Checks) -> Result<()> {
    let spec = intertwine_grid();
    let odd = AnalyticField::gaussian(
        DomainTag::Time3,
        GaussianSeparable::new(Complex64::new(0.2, 1.0), 1.0, 1.2, 1.0, 0.9).odd(),
    )?
    .modulate(Vec2::new(-0.4, 0.1));
    let f = odd.add(&WaveletSpec::rho_star().build()?)?;
    let grid = sample_to_grid(&f, &spec, exec);
    let hat = f3_forward(&grid, exec)?;
    let back = f3_inverse(&hat, exec)?;
    c.push("f3_round_trip", max_abs_diff(&grid, &back) / max_abs(&grid), 1e-10, 1);

    let f_hat = f3_forward_analytic(&f)?;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let g = random_moderate_g(rng);
        let moved = f3_forward(&sample_to_grid(&rho2_apply(&g, &f)?, &spec, exec), exec)?;
        let exact = sample_to_grid(&sigma2_apply(&g, &f_hat)?, moved.spec(), exec);
        worst = worst.max(max_abs_diff(&moved, &exact) / max_abs(&exact));
    }
    c.push("f3_intertwines_rho2", worst, 1e-8, n);
    Ok(())
}

/// `sqrt2 / (4 pi^2)`, the squared norm of the reference wavelet.
pub fn psi_star_norm_sq() -> f64 {
    2f64.sqrt() / (4.0 * PI * PI)
}

fn ortho_suite(exec: Exec, c: &mut Checks) -> Result<()> {
    let psi = WaveletSpec::psi_star().build()?;
    let odd = AnalyticField::gaussian(
        DomainTag::Freq3,
        GaussianSeparable::new(real(2f64.sqrt() * 2f64.powf(0.25)), 1.0, PI, 0.5, PI).odd(),
    )?;
    let quad = QuadSpecG2::build(&QuadConfig::reference(1)?)?;
    let inner = reference_inner_grid();
    let xi: Field = psi.clone().into();
    let diag = orthogonality_estimate(&xi, &xi, &psi, &psi, &quad, &inner, exec)?;
    let cross = orthogonality_estimate(&xi, &odd.into(), &psi, &psi, &quad, &inner, exec)?;
    c.push("rhs_closed_form", (diag.rhs.re / psi_star_norm_sq()).sub_one_abs() + diag.rhs.im.abs(), 1e-3, 1);
    // The truncated sum can only lose mass, so 1 - ratio lies in [0, 0.15].
    c.push("diagonal_deficit", 1.0 - diag.ratio().re, 0.15, quad.len());
    c.push("parity", cross.lhs.norm() / diag.lhs.norm(), 0.05, quad.len());
    Ok(())
}

/// The unit-admissibility window `2^{1/4} |s|^{1/2} e^{-pi s^2}`.
pub fn g1_window() -> Field1 {
    Field1::gaussian(real(2f64.powf(0.25)), 0.5, PI).expect("valid window")
}

/// Nested truncations with the spacing of the default rule.
pub fn g1_boxes() -> [G1Quad; 3] {
    let base = G1Quad::default();
    [(48, 6.0, 24, 1.5), (96, 12.0, 48, 3.0), (144, 18.0, 72, 4.5)].map(|(nx, hx, na, ha)| G1Quad {
        x: AxisRange::symmetric(nx, hx),
        log_a: AxisRange::symmetric(na, ha),
        omega: base.omega,
    })
}

fn g1_suite(exec: Exec, c: &mut Checks) -> Result<()> {
    let f = Field1::Sum(vec![
        Field1::gaussian(real(1.0), 0.0, PI)?,
        Field1::odd_gaussian(Complex64::new(0.0, 0.5), 1.0, 2.0)?,
    ]);
    let ratios = g1_boxes()
        .iter()
        .map(|q| g1_identity_check(&f, &g1_window(), q, exec).map(|(l, r)| l / r))
        .collect::<Result<Vec<_>>>()?;
    // The default rule is the middle box.
    c.push("ratio_deficit", 1.0 - ratios[1], 0.1, 1);
    let drop = ratios.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    c.push("monotone_in_box", drop, 0.0, ratios.len());
    c.push("ratio_bounded", (ratios[2] - 1.0).max(0.0), 0.0, 1);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(suite: Suite, samples: usize) -> SuiteReport {
        let cfg = VerifyConfig { samples: Some(samples), seed: 11, tol: None, exec: Exec::Sequential };
        run_suite(suite, &cfg).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn condition_numbers() {
        assert!((condition_number(&Mat2::diag(4.0, 0.5)) - 8.0).abs() < 1e-12);
        assert!((condition_number(&Mat2::new(0.0, 2.0, -2.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn det4_of_permutation_and_triangular() {
        let mut p = [[0.0; 4]; 4];
        p[0][1] = 1.0;
        p[1][0] = 1.0;
        p[2][2] = 3.0;
        p[3][3] = 2.0;
        assert_eq!(det4(p), -6.0);
        let kh = KhCoords { s: 2.0, t: 0.0, u: 0.0, v: 0.5 };
        assert!((numeric_kh_jacobian(&kh) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn small_suites_pass() {
        for s in [Suite::Cocycle, Suite::Group, Suite::Semiinv, Suite::Homomorphism] {
            let r = quick(s, 20);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn seed_determines_report() {
        let a = quick(Suite::Cocycle, 50);
        let b = quick(Suite::Cocycle, 50);
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_tolerance_fails() {
        let cfg = VerifyConfig { samples: Some(50), seed: 7, tol: Some(1e-30), exec: Exec::Sequential };
        let r = run_suite(Suite::Cocycle, &cfg).unwrap();
        assert!(!r.passed);
        assert!(r.checks.iter().all(|c| c.tolerance == 1e-30));
    }

    #[test]
    fn bad_config_is_an_error() {
        let cfg = VerifyConfig { samples: Some(0), ..VerifyConfig::default() };
        assert!(run_suite(Suite::Group, &cfg).is_err());
        let cfg = VerifyConfig { tol: Some(f64::NAN), ..VerifyConfig::default() };
        assert!(run_suite(Suite::Group, &cfg).is_err());
    }
}
