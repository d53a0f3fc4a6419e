use std::sync::Arc;

use g2wave::cocycle::{cocycle_uv, freq_act, gamma, stabilizer_matrix, FreqVec};
use g2wave::exec::{pairwise_sum, tree_reduce};
use g2wave::field::{
    read_g2f, sample_to_grid, write_g2f, AnalyticField, AxisRange, DomainTag, Field, GaussianSeparable, GridField3,
    GridSpec3, Point3,
};
use g2wave::group::{
    g2_compose, g2_invert, haar_density_g2, kh_compose, kh_decompose, modular_delta, G2Elem, Mat2, Vec2,
};
use g2wave::representation::{sigma2_apply, sigma2_adjoint_apply};
use g2wave::wavelet::{analyze, read_g2c, synthesize, write_g2c, QuadConfig, QuadSpecG2, WaveletSpec};
use g2wave::Exec;
use num_complex::Complex64;
use proptest::prelude::*;

fn mat() -> impl Strategy<Value = Mat2> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]
        .prop_map(|[a, b, c, d]| Mat2::new(a, b, c, d))
        .prop_filter("|det| > 0.1", |m| m.det().abs() > 0.1)
}

fn freq() -> impl Strategy<Value = FreqVec> {
    (0.1..4.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| FreqVec::new(r * th.cos(), r * th.sin()))
}

fn elem() -> impl Strategy<Value = G2Elem> {
    (mat(), -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, x1, x2)| G2Elem::new(Vec2::new(x1, x2), a).unwrap())
}

fn third() -> impl Strategy<Value = f64> {
    prop_oneof![0.05..3.0f64, -3.0..-0.05f64]
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-280)
}

proptest! {
    #[test]
    fn cocycle_identities(w in freq(), a in mat(), b in mat()) {
        let (ua, va) = cocycle_uv(w, &a).unwrap();
        let (ub, vb) = cocycle_uv(freq_act(w, &a), &b).unwrap();
        let (uab, vab) = cocycle_uv(w, &a.mul(&b)).unwrap();
        prop_assert!((uab - (ua + va * ub)).abs() < 1e-11);
        prop_assert!((vab - va * vb).abs() < 1e-11);
        prop_assert_eq!(va.signum(), a.det().signum());
    }

    #[test]
    fn stabilizer_fixes_first_row(w in freq(), a in mat()) {
        let s = stabilizer_matrix(w, &a).unwrap();
        let (u, v) = cocycle_uv(w, &a).unwrap();
        prop_assert!((s.a - 1.0).abs() < 1e-11 && s.b.abs() < 1e-11);
        prop_assert!((s.c - u).abs() < 1e-11 && (s.d - v).abs() < 1e-11);
    }

    #[test]
    fn gamma_sends_to_base_point(w in freq()) {
        let e = freq_act(w, &gamma(w).unwrap());
        prop_assert!((e.w1 - 1.0).abs() < 1e-14 && e.w2.abs() < 1e-14);
    }

    #[test]
    fn group_laws(g in elem(), h in elem(), k in elem()) {
        let l = g2_compose(&g2_compose(&g, &h).unwrap(), &k).unwrap();
        let r = g2_compose(&g, &g2_compose(&h, &k).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-12);
        let e = g2_compose(&g, &g2_invert(&g).unwrap()).unwrap();
        prop_assert!(e.max_abs_diff(&G2Elem::IDENTITY) < 1e-12);
        let d = modular_delta(&g2_compose(&g, &h).unwrap()).unwrap();
        prop_assert!((d - modular_delta(&g).unwrap() * modular_delta(&h).unwrap()).abs() <= 1e-12 * d);
    }

    #[test]
    fn haar_density_is_cubic(a in mat()) {
        let det = a.det().abs();
        prop_assert!((haar_density_g2(&a).unwrap() * det.powi(3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kh_round_trip(a in mat()) {
        let k = kh_decompose(&a).unwrap();
        prop_assert!(kh_compose(&k).max_abs_diff(&a) < 1e-12);
        prop_assert_eq!(k.v.signum(), a.det().signum());
    }

    #[test]
    fn sigma2_adjoint_inverts(g in elem(), w in freq(), s in third()) {
        let xi = WaveletSpec::psi_star().build().unwrap();
        let there = sigma2_apply(&g, &sigma2_adjoint_apply(&g, &xi).unwrap()).unwrap();
        let p = Point3::freq(w.w1, w.w2, s);
        prop_assert!(rel(there.eval(p).unwrap(), xi.eval(p).unwrap()) < 1e-11);
    }

    #[test]
    fn pairwise_sum_matches_naive(xs in prop::collection::vec(-1e3..1e3f64, 0..300)) {
        let naive: f64 = xs.iter().sum();
        let scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * scale);
        let tree = tree_reduce(xs.clone(), |a, b| a + b).unwrap_or(0.0);
        prop_assert!((tree - naive).abs() <= 1e-12 * scale);
    }
}

fn small_grid() -> impl Strategy<Value = GridSpec3> {
    (1usize..5, 1usize..5, 1usize..9, 0.5..3.0f64).prop_map(|(n1, n2, n3, h)| {
        GridSpec3::new([AxisRange::new(n1, -h, h * 1.1), AxisRange::symmetric(n2, h), AxisRange::symmetric(n3, 2.0 * h)])
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn g2f_write_read_write(spec in small_grid(), seed in any::<u32>(), time in any::<bool>()) {
        let tag = if time { DomainTag::Time3 } else { DomainTag::Freq3 };
        let samples: Vec<Complex64> = (0..spec.len())
            .map(|i| Complex64::new((i as f64 + seed as f64).sin(), (seed as f64 * 0.5 - i as f64).cos()))
            .collect();
        let f = GridField3::new(tag, spec, samples).unwrap();
        let mut a = Vec::new();
        write_g2f(&mut a, &f).unwrap();
        let back = read_g2f(&mut a.as_slice()).unwrap();
        prop_assert_eq!(&back, &f);
        let mut b = Vec::new();
        write_g2f(&mut b, &back).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn analysis_is_linear_and_thread_independent(
        re in -2.0..2.0f64, im in -2.0..2.0f64, x1 in -1.0..1.0f64, x2 in -1.0..1.0f64,
    ) {
        let psi = WaveletSpec::psi_star();
        let inner = GridSpec3::cube(12, 2.5, 8, 2.5).unwrap();
        let quad = Arc::new(QuadSpecG2::build(&QuadConfig::reference_box([2, 2, 2, 2, 2])).unwrap());
        let f = AnalyticField::gaussian(
            DomainTag::Freq3,
            GaussianSeparable::new(Complex64::new(1.0, 0.0), 1.0, 1.5, 1.0, 1.5),
        ).unwrap().modulate(Vec2::new(x1, x2));
        let g = psi.build().unwrap();
        let c = Complex64::new(re, im);
        let combo: Field = f.scale(c).add(&g).unwrap().into();
        let seq = analyze(&combo, &psi, &quad, &inner, Exec::Sequential).unwrap();
        let par = analyze(&combo, &psi, &quad, &inner, Exec::Parallel).unwrap();
        prop_assert_eq!(seq.coeffs(), par.coeffs());
        let cf = analyze(&f.into(), &psi, &quad, &inner, Exec::Sequential).unwrap();
        let cg = analyze(&g.into(), &psi, &quad, &inner, Exec::Sequential).unwrap();
        let scale = seq.coeffs().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        for ((s, a), b) in seq.coeffs().iter().zip(cf.coeffs()).zip(cg.coeffs()) {
            prop_assert!((s - (a * c + b)).norm() <= 1e-12 * scale);
        }
        let mut bytes = Vec::new();
        write_g2c(&mut bytes, &seq).unwrap();
        let back = read_g2c(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.coeffs(), seq.coeffs());
        let mut again = Vec::new();
        write_g2c(&mut again, &back).unwrap();
        prop_assert_eq!(&again, &bytes);
        let s1 = synthesize(&seq, &psi, &inner, Exec::Sequential).unwrap();
        let s2 = synthesize(&back, &psi, &inner, Exec::Parallel).unwrap();
        prop_assert_eq!(s1, s2);
    }
}

#[test]
fn sampled_and_analytic_inputs_agree() {
    let psi = WaveletSpec::psi_star();
    let inner = GridSpec3::cube(12, 2.5, 8, 2.5).unwrap();
    let quad = Arc::new(QuadSpecG2::build(&QuadConfig::reference_box([2, 2, 2, 2, 2])).unwrap());
    let f = psi.build().unwrap();
    let grid: Field = sample_to_grid(&f, &inner, Exec::Sequential).into();
    let a = analyze(&f.into(), &psi, &quad, &inner, Exec::Sequential).unwrap();
    let b = analyze(&grid, &psi, &quad, &inner, Exec::Sequential).unwrap();
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        assert!((x - y).norm() < 1e-14);
    }
}
