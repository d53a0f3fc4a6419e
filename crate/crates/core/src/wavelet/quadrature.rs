use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AxisRange, GridSpec3};
use crate::group::{haar_density_g2, kh_compose, kh_haar_jacobian, G2Elem, KhCoords, Mat2, Vec2, DEFAULT_EPS_DET};

fn yes() -> bool {
    true
}

/// Cells of the level-1 reference quadrature on `[x, log r, theta, u, log|v|]`.
pub const REFERENCE_CELLS: [usize; 5] = [24, 8, 2, 24, 8];

/// Frequency grid for the inner integrals of the transform: `h = 1/16` on the
/// frequency plane, `1/32` on the third axis.
///
/// The translation sums make every voice periodic in `x` with period `16`, well
/// clear of the `[-5, 5]` translation box. The finer third axis resolves the
/// `|w3|^q` cusp of the reference wavelet to about `5e-4` in norm.
pub fn reference_inner_grid() -> GridSpec3 {
    GridSpec3::cube(64, 2.0, 128, 2.0).expect("valid grid")
}

/// Chart and midpoint rule for the left Haar measure of G2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coords", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuadConfig {
    /// `A = r R(theta) [[1, 0], [u, ±e^lambda]]` with `rho = log r` and `lambda = log|v|`.
    Kh {
        x1: AxisRange,
        x2: AxisRange,
        log_r: AxisRange,
        theta: AxisRange,
        u: AxisRange,
        log_v: AxisRange,
        #[serde(default = "yes")]
        both_signs: bool,
    },
    /// The entries `(a, b, c, d)` of `A` directly.
    Entry { x1: AxisRange, x2: AxisRange, a: AxisRange, b: AxisRange, c: AxisRange, d: AxisRange },
}

impl QuadConfig {
    /// The reference box `x in [-5, 5]^2, log r in [-4, 4], theta in [0, 2 pi),
    /// u in [-6, 6], log|v| in [-2.5, 2.5]`, both signs of `v`, with `cells` giving the
    /// counts for `[x, log r, theta, u, log|v|]`.
    pub fn reference_box(cells: [usize; 5]) -> Self {
        let [nx, nr, nt, nu, nv] = cells;
        QuadConfig::Kh {
            x1: AxisRange::symmetric(nx, 5.0),
            x2: AxisRange::symmetric(nx, 5.0),
            log_r: AxisRange::symmetric(nr, 4.0),
            theta: AxisRange::new(nt, 0.0, 2.0 * PI),
            u: AxisRange::symmetric(nu, 6.0),
            log_v: AxisRange::symmetric(nv, 2.5),
            both_signs: true,
        }
    }

    /// Reference level `1..=3`; each level doubles the cells on every axis.
    pub fn reference(level: u32) -> Result<Self> {
        if !(1..=3).contains(&level) {
            return Err(Error::InvalidSpec(format!("no reference quadrature at level {level}")));
        }
        Ok(Self::reference_box(REFERENCE_CELLS.map(|n| n << (level - 1))))
    }

    /// Drops `cut` cells from both ends of every non-periodic axis. Spacing is kept,
    /// so the nodes are a subset of the original ones with the same weights.
    pub fn shrunk(&self, cut: usize) -> Result<Self> {
        let trim = |a: &AxisRange| -> Result<AxisRange> {
            if 2 * cut >= a.n {
                return Err(Error::InvalidSpec(format!("cannot drop {cut} cells from each end of {}", a.n)));
            }
            let h = a.step();
            Ok(AxisRange::new(a.n - 2 * cut, a.min + cut as f64 * h, a.max - cut as f64 * h))
        };
        Ok(match self {
            QuadConfig::Kh { x1, x2, log_r, theta, u, log_v, both_signs } => QuadConfig::Kh {
                x1: trim(x1)?,
                x2: trim(x2)?,
                log_r: trim(log_r)?,
                theta: *theta,
                u: trim(u)?,
                log_v: trim(log_v)?,
                both_signs: *both_signs,
            },
            QuadConfig::Entry { x1, x2, a, b, c, d } => QuadConfig::Entry {
                x1: trim(x1)?,
                x2: trim(x2)?,
                a: trim(a)?,
                b: trim(b)?,
                c: trim(c)?,
                d: trim(d)?,
            },
        })
    }

    fn x_axes(&self) -> (AxisRange, AxisRange) {
        match self {
            QuadConfig::Kh { x1, x2, .. } | QuadConfig::Entry { x1, x2, .. } => (*x1, *x2),
        }
    }
}

fn check_axis(name: &str, a: &AxisRange) -> Result<()> {
    if a.n == 0 || !a.min.is_finite() || !a.max.is_finite() || a.max <= a.min {
        return Err(Error::InvalidSpec(format!("bad {name} axis {a:?}")));
    }
    Ok(())
}

/// A linear part `A` with its share of the Haar weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixNode {
    pub a: Mat2,
    pub weight: f64,
}

/// Tensor-product midpoint nodes `(A, x1, x2)` with weights summing the Haar measure.
///
/// Node `k` is matrix `k / (n1 n2)`, then `x1`, then `x2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadSpecG2 {
    config: QuadConfig,
    matrices: Vec<MatrixNode>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    x_cell: f64,
}

impl QuadSpecG2 {
    pub fn build(config: &QuadConfig) -> Result<Self> {
        let (ax1, ax2) = config.x_axes();
        check_axis("x1", &ax1)?;
        check_axis("x2", &ax2)?;
        let matrices = match config {
            QuadConfig::Kh { log_r, theta, u, log_v, both_signs, .. } => {
                for (n, a) in [("log_r", log_r), ("theta", theta), ("u", u), ("log_v", log_v)] {
                    check_axis(n, a)?;
                }
                let cell = log_r.step() * theta.step() * u.step() * log_v.step();
                let signs: &[f64] = if *both_signs { &[1.0, -1.0] } else { &[1.0] };
                let mut out = Vec::with_capacity(log_r.n * theta.n * u.n * log_v.n * signs.len());
                for ir in 0..log_r.n {
                    let r = log_r.coord(ir).exp();
                    for it in 0..theta.n {
                        let th = theta.coord(it);
                        for iu in 0..u.n {
                            for il in 0..log_v.n {
                                for &sg in signs {
                                    let k = KhCoords {
                                        s: r * th.cos(),
                                        t: r * th.sin(),
                                        u: u.coord(iu),
                                        v: sg * log_v.coord(il).exp(),
                                    };
                                    k.validate()?;
                                    let a = kh_compose(&k);
                                    // dA = J ds dt du dv, ds dt = r^2 drho dtheta, dv = |v| dlambda
                                    let density = haar_density_g2(&a)? * kh_haar_jacobian(&k) * r * r * k.v.abs();
                                    out.push(MatrixNode { a, weight: density * cell });
                                }
                            }
                        }
                    }
                }
                out
            }
            QuadConfig::Entry { a, b, c, d, .. } => {
                for (n, ax) in [("a", a), ("b", b), ("c", c), ("d", d)] {
                    check_axis(n, ax)?;
                }
                let cell = a.step() * b.step() * c.step() * d.step();
                let mut out = Vec::new();
                for ia in 0..a.n {
                    for ib in 0..b.n {
                        for ic in 0..c.n {
                            for id in 0..d.n {
                                let m = Mat2::new(a.coord(ia), b.coord(ib), c.coord(ic), d.coord(id));
                                if m.det().abs() < 10.0 * DEFAULT_EPS_DET {
                                    continue;
                                }
                                out.push(MatrixNode { a: m, weight: haar_density_g2(&m)? * cell });
                            }
                        }
                    }
                }
                out
            }
        };
        if matrices.is_empty() {
            return Err(Error::EmptyQuadrature);
        }
        Ok(Self {
            config: config.clone(),
            matrices,
            x1: ax1.coords(),
            x2: ax2.coords(),
            x_cell: ax1.step() * ax2.step(),
        })
    }

    pub fn config(&self) -> &QuadConfig {
        &self.config
    }

    pub fn matrices(&self) -> &[MatrixNode] {
        &self.matrices
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    /// Weight of each translation cell.
    pub fn x_cell(&self) -> f64 {
        self.x_cell
    }

    pub fn x_count(&self) -> usize {
        self.x1.len() * self.x2.len()
    }

    pub fn len(&self) -> usize {
        self.matrices.len() * self.x_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, k: usize) -> (G2Elem, f64) {
        let per = self.x_count();
        let m = &self.matrices[k / per];
        let r = k % per;
        let x = Vec2::new(self.x1[r / self.x2.len()], self.x2[r % self.x2.len()]);
        (G2Elem { x, a: m.a }, m.weight * self.x_cell)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (G2Elem, f64)> + '_ {
        (0..self.len()).map(|k| self.node(k))
    }

    /// `Σ weight * f(g)` in node order.
    pub fn integrate<F: Fn(&G2Elem) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.nodes().map(|(g, w)| w * f(&g)).collect();
        crate::exec::pairwise_sum(&terms)
    }
}
