use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{QuadConfig, QuadSpecG2, WaveletSpec};
use crate::error::{Error, Result};
use crate::exec::pairwise_sum;
use crate::field::{DomainTag, GridSpec3};

const G2C_MAGIC: [u8; 4] = [0x47, 0x32, 0x43, 0x31];
const G2C_VERSION: u32 = 1;
const MAX_TRAILER: u64 = 1 << 24;

/// Where the analyzed field came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub tag: DomainTag,
    /// Grid the field was sampled or integrated on.
    pub grid: GridSpec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffMeta {
    pub wavelet: WaveletSpec,
    pub source: SourceInfo,
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    wavelet: WaveletSpec,
    quad: QuadConfig,
    source: SourceInfo,
}

/// Voice coefficients attached to the nodes of a quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSet {
    quad: Arc<QuadSpecG2>,
    coeffs: Vec<Complex64>,
    meta: CoeffMeta,
}

impl CoeffSet {
    pub fn new(quad: Arc<QuadSpecG2>, coeffs: Vec<Complex64>, meta: CoeffMeta) -> Result<Self> {
        if coeffs.len() != quad.len() {
            return Err(Error::InvalidSpec(format!(
                "{} coefficients for {} quadrature nodes",
                coeffs.len(),
                quad.len()
            )));
        }
        Ok(Self { quad, coeffs, meta })
    }

    pub fn quad(&self) -> &Arc<QuadSpecG2> {
        &self.quad
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn meta(&self) -> &CoeffMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ_k w_k |c_k|^2`.
    pub fn partial_energy(&self) -> f64 {
        let per = self.quad.x_count();
        let rows: Vec<f64> = self
            .quad
            .matrices()
            .iter()
            .enumerate()
            .map(|(m, node)| {
                let sq: Vec<f64> = self.coeffs[m * per..(m + 1) * per].iter().map(|c| c.norm_sqr()).collect();
                pairwise_sum(&sq) * node.weight
            })
            .collect();
        pairwise_sum(&rows) * self.quad.x_cell()
    }

    /// Same nodes and metadata, coefficients replaced.
    pub fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(Arc::clone(&self.quad), coeffs, self.meta.clone())
    }

    pub fn add(&self, other: &CoeffSet) -> Result<Self> {
        if self.quad.config() != other.quad.config() || self.meta != other.meta {
            return Err(Error::InvalidSpec("coefficient sets are not on the same nodes".into()));
        }
        self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_g2c(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        read_g2c(&mut r)
    }
}

/// Writes the `G2C1` layout.
pub fn write_g2c(w: &mut impl Write, c: &CoeffSet) -> Result<()> {
    let count = u32::try_from(c.len()).map_err(|_| Error::Format("too many nodes".into()))?;
    w.write_all(&G2C_MAGIC)?;
    w.write_all(&G2C_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    let mut buf = Vec::with_capacity(72 * 4096);
    for (k, coeff) in c.coeffs.iter().enumerate() {
        let (g, weight) = c.quad.node(k);
        for v in [g.x.x1, g.x.x2, g.a.a, g.a.b, g.a.c, g.a.d, weight, coeff.re, coeff.im] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if buf.len() >= 72 * 4096 {
            w.write_all(&buf)?;
            buf.clear();
        }
    }
    w.write_all(&buf)?;
    let trailer = serde_json::to_vec(&Trailer {
        wavelet: c.meta.wavelet.clone(),
        quad: c.quad.config().clone(),
        source: c.meta.source.clone(),
    })?;
    w.write_all(&(trailer.len() as u64).to_le_bytes())?;
    w.write_all(&trailer)?;
    Ok(())
}

/// Reads the `G2C1` layout and checks the node table against the quadrature it names.
pub fn read_g2c(r: &mut impl Read) -> Result<CoeffSet> {
    use crate::field::{get_u32, get_u64, truncated};
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != G2C_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:02x?}")));
    }
    let version = get_u32(r)?;
    if version != G2C_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = get_u32(r)? as usize;
    let mut nodes = Vec::with_capacity(count.min(1 << 20));
    let mut coeffs = Vec::with_capacity(count.min(1 << 20));
    let mut rec = [0u8; 72];
    for _ in 0..count {
        r.read_exact(&mut rec).map_err(truncated)?;
        let f = |i: usize| f64::from_le_bytes(rec[8 * i..8 * i + 8].try_into().expect("8 bytes"));
        nodes.push([f(0), f(1), f(2), f(3), f(4), f(5), f(6)]);
        coeffs.push(Complex64::new(f(7), f(8)));
    }
    let len = get_u64(r)?;
    if len > MAX_TRAILER {
        return Err(Error::Format(format!("trailer of {len} bytes")));
    }
    let mut trailer = vec![0u8; len as usize];
    r.read_exact(&mut trailer).map_err(truncated)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after trailer".into()));
    }
    let trailer: Trailer =
        serde_json::from_slice(&trailer).map_err(|e| Error::Format(format!("trailer: {e}")))?;
    let quad = QuadSpecG2::build(&trailer.quad).map_err(|e| Error::Format(format!("trailer quadrature: {e}")))?;
    if quad.len() != count {
        return Err(Error::Format(format!("{count} nodes stored, quadrature has {}", quad.len())));
    }
    for (k, stored) in nodes.iter().enumerate() {
        let (g, w) = quad.node(k);
        if *stored != [g.x.x1, g.x.x2, g.a.a, g.a.b, g.a.c, g.a.d, w] {
            return Err(Error::Format(format!("node {k} does not match the quadrature")));
        }
    }
    CoeffSet::new(Arc::new(quad), coeffs, CoeffMeta { wavelet: trailer.wavelet, source: trailer.source })
}
