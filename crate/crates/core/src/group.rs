//! Arithmetic on GL2(R) and on G2, the group of invertible affine maps of the plane.
//!
//! An element `[x, A]` of G2 acts by `z -> A z + x`. Products follow composition:
//! `[x, A][y, B] = [x + A y, A B]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which `|det A|` counts as singular.
pub const DEFAULT_EPS_DET: f64 = 1e-12;

/// A real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// A spatial column vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Self { a, b: 0.0, c: 0.0, d }
    }

    /// The rotation-dilation `[[s, -t], [t, s]]`.
    pub const fn rotation_dilation(s: f64, t: f64) -> Self {
        Self { a: s, b: -t, c: t, d: s }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x1 + self.b * v.x2, self.c * v.x1 + self.d * v.x2)
    }

    /// Errors unless every entry is finite and `|det| >= eps`.
    pub fn check_nonsingular(&self, eps: f64) -> Result<f64> {
        let det = self.det();
        if !self.is_finite() || !det.is_finite() {
            return Err(Error::InvalidSpec(format!("non-finite matrix {self:?}")));
        }
        if det.abs() < eps {
            return Err(Error::SingularMatrix { det, eps });
        }
        Ok(det)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.check_nonsingular(DEFAULT_EPS_DET)?;
        Ok(Mat2 {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        })
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a - o.a)
            .abs()
            .max((self.b - o.b).abs())
            .max((self.c - o.c).abs())
            .max((self.d - o.d).abs())
    }
}

/// An element `[x, A]` of G2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Elem {
    pub x: Vec2,
    pub a: Mat2,
}

impl G2Elem {
    pub const IDENTITY: G2Elem = G2Elem { x: Vec2::ZERO, a: Mat2::IDENTITY };

    pub fn new(x: Vec2, a: Mat2) -> Result<Self> {
        Self::new_with_eps(x, a, DEFAULT_EPS_DET)
    }

    pub fn new_with_eps(x: Vec2, a: Mat2, eps_det: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidSpec(format!("non-finite translation {x:?}")));
        }
        a.check_nonsingular(eps_det)?;
        Ok(Self { x, a })
    }

    /// Pure linear part `[0, A]`.
    pub fn linear(a: Mat2) -> Result<Self> {
        Self::new(Vec2::ZERO, a)
    }

    /// Pure translation `[x, id]`.
    pub fn translation(x: Vec2) -> Self {
        Self { x, a: Mat2::IDENTITY }
    }

    pub fn det(&self) -> f64 {
        self.a.det()
    }

    pub fn max_abs_diff(&self, o: &G2Elem) -> f64 {
        self.a
            .max_abs_diff(&o.a)
            .max((self.x.x1 - o.x.x1).abs())
            .max((self.x.x2 - o.x.x2).abs())
    }
}

/// `[x, A][y, B] = [x + A y, A B]`.
pub fn g2_compose(g: &G2Elem, h: &G2Elem) -> Result<G2Elem> {
    let a = g.a.mul(&h.a);
    a.check_nonsingular(DEFAULT_EPS_DET)?;
    Ok(G2Elem { x: g.x + g.a.mul_vec(h.x), a })
}

/// `[x, A]^{-1} = [-A^{-1} x, A^{-1}]`.
pub fn g2_invert(g: &G2Elem) -> Result<G2Elem> {
    let inv = g.a.inverse()?;
    Ok(G2Elem { x: -inv.mul_vec(g.x), a: inv })
}

/// The modular function of G2, `|det A|^{-1}`.
pub fn modular_delta(g: &G2Elem) -> Result<f64> {
    let det = g.a.check_nonsingular(DEFAULT_EPS_DET)?;
    Ok(1.0 / det.abs())
}

/// Lebesgue density of the Haar measure of GL2(R) in entry coordinates, `det(A)^{-2}`.
pub fn haar_density_gl2(a: &Mat2) -> Result<f64> {
    let det = a.check_nonsingular(DEFAULT_EPS_DET)?;
    Ok(1.0 / (det * det))
}

/// Lebesgue density of the left Haar measure of G2 in `(x1, x2, a, b, c, d)`, `|det A|^{-3}`.
pub fn haar_density_g2(a: &Mat2) -> Result<f64> {
    let det = a.check_nonsingular(DEFAULT_EPS_DET)?.abs();
    Ok(1.0 / (det * det * det))
}

/// Coordinates of `A = M C` with `M = [[s, -t], [t, s]]` in K0 and
/// `C = [[1, 0], [u, v]]` in the stabilizer of `(1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhCoords {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl KhCoords {
    pub fn validate(&self) -> Result<()> {
        let r2 = self.s * self.s + self.t * self.t;
        if !(r2.is_finite() && self.u.is_finite() && self.v.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite KH coordinates {self:?}")));
        }
        if r2 < DEFAULT_EPS_DET {
            return Err(Error::SingularMatrix { det: r2, eps: DEFAULT_EPS_DET });
        }
        if self.v.abs() < DEFAULT_EPS_DET {
            return Err(Error::SingularMatrix { det: self.v, eps: DEFAULT_EPS_DET });
        }
        Ok(())
    }

    pub fn k0_part(&self) -> Mat2 {
        Mat2::rotation_dilation(self.s, self.t)
    }

    pub fn stabilizer_part(&self) -> Mat2 {
        Mat2::new(1.0, 0.0, self.u, self.v)
    }
}

pub fn kh_decompose(a: &Mat2) -> Result<KhCoords> {
    let det = a.check_nonsingular(DEFAULT_EPS_DET)?;
    let col = a.b * a.b + a.d * a.d;
    if col < DEFAULT_EPS_DET {
        return Err(Error::DegenerateColumn(col));
    }
    let scale = det / col;
    let s = a.d * scale;
    let t = -a.b * scale;
    // (u, v) are the second row of M^{-1} A.
    let r2 = s * s + t * t;
    let u = (s * a.c - t * a.a) / r2;
    let v = (s * a.d - t * a.b) / r2;
    Ok(KhCoords { s, t, u, v })
}

pub fn kh_compose(k: &KhCoords) -> Mat2 {
    k.k0_part().mul(&k.stabilizer_part())
}

/// Absolute Jacobian of `(s, t, u, v) -> (a, b, c, d)`.
pub fn kh_haar_jacobian(k: &KhCoords) -> f64 {
    k.v.abs() * (k.s * k.s + k.t * k.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(x1: f64, x2: f64, a: Mat2) -> G2Elem {
        G2Elem::new(Vec2::new(x1, x2), a).unwrap()
    }

    #[test]
    fn compose_example() {
        let p = g(1.0, 0.0, Mat2::diag(2.0, 1.0));
        let q = g(0.0, 1.0, Mat2::new(0.0, 1.0, -1.0, 0.0));
        let r = g2_compose(&p, &q).unwrap();
        assert_eq!(r.x, Vec2::new(1.0, 1.0));
        assert_eq!(r.a, Mat2::new(0.0, 2.0, -1.0, 0.0));
        assert_eq!(g2_compose(&G2Elem::IDENTITY, &p).unwrap(), p);
    }

    #[test]
    fn invert_example() {
        let p = g(1.0, 2.0, Mat2::diag(2.0, 1.0));
        let inv = g2_invert(&p).unwrap();
        assert_eq!(inv.x, Vec2::new(-0.5, -2.0));
        assert_eq!(inv.a, Mat2::diag(0.5, 1.0));
        assert_eq!(g2_invert(&G2Elem::IDENTITY).unwrap(), G2Elem::IDENTITY);
        let back = g2_compose(&p, &inv).unwrap();
        assert!(back.max_abs_diff(&G2Elem::IDENTITY) < 1e-15);
    }

    #[test]
    fn singular_rejected() {
        let sing = Mat2::new(1.0, 2.0, 2.0, 4.0);
        assert!(matches!(G2Elem::new(Vec2::ZERO, sing), Err(Error::SingularMatrix { .. })));
        assert!(matches!(haar_density_gl2(&sing), Err(Error::SingularMatrix { .. })));
        assert!(matches!(kh_decompose(&sing), Err(Error::SingularMatrix { .. })));
        let tiny = Mat2::diag(1e-7, 1e-7);
        assert!(G2Elem::new(Vec2::ZERO, tiny).is_err());
        assert!(G2Elem::new_with_eps(Vec2::ZERO, tiny, 1e-15).is_ok());
    }

    #[test]
    fn densities() {
        let a = Mat2::diag(2.0, 1.0);
        assert_eq!(modular_delta(&g(0.0, 0.0, a)).unwrap(), 0.5);
        assert_eq!(modular_delta(&G2Elem::IDENTITY).unwrap(), 1.0);
        assert_eq!(haar_density_gl2(&a).unwrap(), 0.25);
        assert_eq!(haar_density_g2(&a).unwrap(), 0.125);
        assert_eq!(haar_density_gl2(&Mat2::IDENTITY).unwrap(), 1.0);
        assert_eq!(haar_density_g2(&Mat2::IDENTITY).unwrap(), 1.0);
    }

    #[test]
    fn kh_examples() {
        let k = kh_decompose(&Mat2::diag(2.0, 1.0)).unwrap();
        assert_eq!(k, KhCoords { s: 2.0, t: 0.0, u: 0.0, v: 0.5 });
        let k = kh_decompose(&Mat2::new(0.0, 1.0, -1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(k.s, 0.0);
        assert_abs_diff_eq!(k.t, -1.0);
        assert_abs_diff_eq!(k.u, 0.0);
        assert_abs_diff_eq!(k.v, 1.0);
        assert_eq!(kh_haar_jacobian(&KhCoords { s: 2.0, t: 0.0, u: 0.0, v: 0.5 }), 2.0);
        assert_eq!(kh_haar_jacobian(&KhCoords { s: 1.0, t: 0.0, u: 0.0, v: 1.0 }), 1.0);
    }

    #[test]
    fn kh_jacobian_example_matches_finite_differences() {
        let k = KhCoords { s: 2.0, t: 0.0, u: 0.0, v: 0.5 };
        assert_abs_diff_eq!(numeric_kh_jacobian(&k), 2.0, epsilon = 1e-8);
    }

    /// Central-difference determinant of the (s, t, u, v) -> (a, b, c, d) map.
    pub(crate) fn numeric_kh_jacobian(k: &KhCoords) -> f64 {
        let h = 1e-5;
        let base = [k.s, k.t, k.u, k.v];
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let mut p = base;
            let mut m = base;
            p[j] += h;
            m[j] -= h;
            let fp = kh_compose(&KhCoords { s: p[0], t: p[1], u: p[2], v: p[3] });
            let fm = kh_compose(&KhCoords { s: m[0], t: m[1], u: m[2], v: m[3] });
            let dp = [fp.a - fm.a, fp.b - fm.b, fp.c - fm.c, fp.d - fm.d];
            for i in 0..4 {
                jac[i][j] = dp[i] / (2.0 * h);
            }
        }
        det4(jac).abs()
    }

    fn det4(m: [[f64; 4]; 4]) -> f64 {
        let mut m = m;
        let mut det = 1.0;
        for col in 0..4 {
            let piv = (col..4)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
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
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
        det
    }
}
