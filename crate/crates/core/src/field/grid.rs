use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AnalyticField, DomainTag};
use crate::cocycle::FreqVec;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, pairwise_sum, Exec};

const G2F_MAGIC: [u8; 4] = [0x47, 0x32, 0x46, 0x31];
const G2F_VERSION: u32 = 1;
const MAX_SAMPLES: u64 = 1 << 31;

/// One cell-centered axis: `n` cells over `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub fn new(n: usize, min: f64, max: f64) -> Self {
        Self { n, min, max }
    }

    pub fn symmetric(n: usize, half_width: f64) -> Self {
        Self { n, min: -half_width, max: half_width }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.step()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.min.is_finite() || !self.max.is_finite() || self.max <= self.min {
            return Err(Error::InvalidSpec(format!("bad axis {self:?}")));
        }
        Ok(())
    }
}

/// Cell-centered tensor grid over `(w1, w2, third)`; also the midpoint rule for
/// analytic integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec3 {
    pub axes: [AxisRange; 3],
}

impl GridSpec3 {
    pub fn new(axes: [AxisRange; 3]) -> Result<Self> {
        for a in &axes {
            a.validate()?;
        }
        let total = axes.iter().try_fold(1u64, |acc, a| acc.checked_mul(a.n as u64));
        match total {
            Some(t) if t <= MAX_SAMPLES => Ok(Self { axes }),
            _ => Err(Error::InvalidSpec("grid too large".into())),
        }
    }

    /// `n` cells per axis on `[-h, h]^2 x [-h3, h3]`.
    pub fn cube(n: usize, half_width: f64, n3: usize, half_width3: f64) -> Result<Self> {
        Self::new([
            AxisRange::symmetric(n, half_width),
            AxisRange::symmetric(n, half_width),
            AxisRange::symmetric(n3, half_width3),
        ])
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.axes[0].n, self.axes[1].n, self.axes[2].n]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.axes[1].n + j) * self.axes[2].n + k
    }

    pub fn omega(&self, i: usize, j: usize) -> FreqVec {
        FreqVec::new(self.axes[0].coord(i), self.axes[1].coord(j))
    }
}

/// Quadrature weight on the cell at `(w, third)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Lebesgue,
    /// `1 / (|w|^2 |w3|)`, frequency side only.
    Admissibility,
}

impl WeightKind {
    fn check(self, tag: DomainTag) -> Result<()> {
        if self == WeightKind::Admissibility && tag != DomainTag::Freq3 {
            return Err(Error::WeightDomainMismatch(tag));
        }
        Ok(())
    }

    #[inline]
    fn radial(self, w: FreqVec) -> f64 {
        match self {
            WeightKind::Lebesgue => 1.0,
            WeightKind::Admissibility => {
                let r2 = w.norm_sq();
                if r2 == 0.0 {
                    0.0
                } else {
                    1.0 / r2
                }
            }
        }
    }

    #[inline]
    fn third(self, s: f64) -> f64 {
        match self {
            WeightKind::Lebesgue => 1.0,
            WeightKind::Admissibility => {
                if s == 0.0 {
                    0.0
                } else {
                    1.0 / s.abs()
                }
            }
        }
    }
}

/// Sampled volume, row-major with `w1` slowest and the third axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField3 {
    tag: DomainTag,
    spec: GridSpec3,
    samples: Vec<Complex64>,
}

impl GridField3 {
    pub fn new(tag: DomainTag, spec: GridSpec3, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                samples.len(),
                spec.len()
            )));
        }
        Ok(Self { tag, spec, samples })
    }

    pub fn zeros(tag: DomainTag, spec: GridSpec3) -> Self {
        Self { tag, spec, samples: vec![Complex64::new(0.0, 0.0); spec.len()] }
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn spec(&self) -> &GridSpec3 {
        &self.spec
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.samples[self.spec.index(i, j, k)]
    }

    /// Third-axis line at `(i, j)`.
    pub fn line(&self, i: usize, j: usize) -> &[Complex64] {
        let n3 = self.spec.axes[2].n;
        let start = self.spec.index(i, j, 0);
        &self.samples[start..start + n3]
    }

    pub fn check_compatible(&self, other: &GridField3) -> Result<()> {
        self.tag.expect(other.tag).map_err(|_| Error::TagMismatch {
            expected: self.tag,
            found: other.tag,
        })?;
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.spec, other.spec)));
        }
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            tag: self.tag,
            spec: self.spec,
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }

    pub fn add(&self, other: &GridField3) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            tag: self.tag,
            spec: self.spec,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_g2f(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        read_g2f(&mut r)
    }
}

/// Either representation of a field, for operations that accept both.
#[derive(Clone, Debug)]
pub enum Field {
    Analytic(AnalyticField),
    Grid(GridField3),
}

impl Field {
    pub fn tag(&self) -> DomainTag {
        match self {
            Field::Analytic(f) => f.tag(),
            Field::Grid(g) => g.tag(),
        }
    }

    /// Line values at grid row `(i, j)` of `q`.
    pub(crate) fn line_on(&self, q: &GridSpec3, thirds: &[f64], i: usize, j: usize, out: &mut [Complex64]) {
        match self {
            Field::Analytic(f) => f.eval_line(q.omega(i, j), thirds, out),
            Field::Grid(g) => out.copy_from_slice(g.line(i, j)),
        }
    }

    pub(crate) fn check_on(&self, q: &GridSpec3) -> Result<()> {
        if let Field::Grid(g) = self {
            if g.spec() != q {
                return Err(Error::GridMismatch(format!(
                    "field grid {:?} differs from quadrature {:?}",
                    g.spec(),
                    q
                )));
            }
        }
        Ok(())
    }
}

impl From<AnalyticField> for Field {
    fn from(f: AnalyticField) -> Self {
        Field::Analytic(f)
    }
}

impl From<GridField3> for Field {
    fn from(g: GridField3) -> Self {
        Field::Grid(g)
    }
}

/// Cell-centered samples of `f`.
pub fn sample_to_grid(f: &AnalyticField, spec: &GridSpec3, exec: Exec) -> GridField3 {
    let [n1, n2, n3] = spec.dims();
    let thirds = spec.axes[2].coords();
    let rows = map_indexed(exec, n1, |i| {
        let mut row = vec![Complex64::new(0.0, 0.0); n2 * n3];
        for (j, line) in row.chunks_mut(n3).enumerate() {
            f.eval_line(spec.omega(i, j), &thirds, line);
        }
        row
    });
    GridField3 { tag: f.tag(), spec: *spec, samples: rows.concat() }
}

/// Midpoint-rule approximation of `∫ f conj(g) weight` over the cells of `q`.
///
/// Grid operands must be sampled on `q` itself.
pub fn weighted_inner_product(
    f: &Field,
    g: &Field,
    w: WeightKind,
    q: &GridSpec3,
    exec: Exec,
) -> Result<Complex64> {
    f.tag().expect(g.tag()).map_err(|_| Error::TagMismatch { expected: f.tag(), found: g.tag() })?;
    w.check(f.tag())?;
    f.check_on(q)?;
    g.check_on(q)?;
    let [n1, n2, n3] = q.dims();
    let thirds = q.axes[2].coords();
    let third_w: Vec<f64> = thirds.iter().map(|&s| w.third(s)).collect();
    let rows = map_indexed(exec, n1, |i| {
        let mut a = vec![Complex64::new(0.0, 0.0); n3];
        let mut b = vec![Complex64::new(0.0, 0.0); n3];
        let mut terms = vec![Complex64::new(0.0, 0.0); n3];
        let mut lines = Vec::with_capacity(n2);
        for j in 0..n2 {
            let rw = w.radial(q.omega(i, j));
            if rw == 0.0 {
                lines.push(Complex64::new(0.0, 0.0));
                continue;
            }
            f.line_on(q, &thirds, i, j, &mut a);
            g.line_on(q, &thirds, i, j, &mut b);
            for k in 0..n3 {
                terms[k] = a[k] * b[k].conj() * third_w[k];
            }
            lines.push(pairwise_sum(&terms) * rw);
        }
        pairwise_sum(&lines)
    });
    Ok(pairwise_sum(&rows) * q.cell_volume())
}

/// `Re <f, f>` under the given weight.
pub fn norm_sq(f: &Field, w: WeightKind, q: &GridSpec3, exec: Exec) -> Result<f64> {
    Ok(weighted_inner_product(f, f, w, q, exec)?.re)
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

/// Writes the `G2F1` layout.
pub fn write_g2f(w: &mut impl Write, f: &GridField3) -> Result<()> {
    w.write_all(&G2F_MAGIC)?;
    put_u32(w, G2F_VERSION)?;
    w.write_all(&[match f.tag {
        DomainTag::Time3 => 0u8,
        DomainTag::Freq3 => 1u8,
    }])?;
    for a in &f.spec.axes {
        let n = u32::try_from(a.n).map_err(|_| Error::Format("axis too long".into()))?;
        put_u32(w, n)?;
    }
    for a in &f.spec.axes {
        put_f64(w, a.min)?;
        put_f64(w, a.max)?;
    }
    let mut buf = Vec::with_capacity(16 * f.samples.len());
    for s in &f.samples {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads the `G2F1` layout; trailing bytes are an error.
pub fn read_g2f(r: &mut impl Read) -> Result<GridField3> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != G2F_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}")));
    }
    let version = get_u32(r)?;
    if version != G2F_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(truncated)?;
    let tag = match tag[0] {
        0 => DomainTag::Time3,
        1 => DomainTag::Freq3,
        t => return Err(Error::Format(format!("unknown domain tag {t}"))),
    };
    let mut ns = [0usize; 3];
    for n in &mut ns {
        *n = get_u32(r)? as usize;
    }
    let mut axes = [AxisRange::new(0, 0.0, 0.0); 3];
    for (a, &n) in axes.iter_mut().zip(&ns) {
        let min = get_f64(r)?;
        let max = get_f64(r)?;
        *a = AxisRange::new(n, min, max);
    }
    let spec = GridSpec3::new(axes).map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = vec![0u8; 16 * spec.len()];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after samples".into()));
    }
    GridField3::new(tag, spec, samples)
}
