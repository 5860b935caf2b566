//! Synthetic dictionary-learning instances `Y = A₀X₀`.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};

/// How the ground-truth dictionary is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryMode {
    Identity,
    #[default]
    RandomOrthogonal,
}

/// An `n × p` matrix with i.i.d. Bernoulli(θ)·N(0,1) entries.
///
/// Entries are drawn column by column, Bernoulli first, so the stream layout
/// is stable across versions.
pub fn gen_bg_matrix<R: Rng + ?Sized>(n: usize, p: usize, theta: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(domain("matrix dimensions must be positive"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(domain(format!("Bernoulli rate must lie in [0, 1], got {theta}")));
    }
    let mut x = DMatrix::zeros(n, p);
    for v in x.iter_mut() {
        if rng.random::<f64>() < theta {
            *v = rng.sample(StandardNormal);
        }
    }
    Ok(x)
}

/// Haar-distributed orthogonal matrix via sign-corrected QR of a Gaussian matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A complete dictionary-learning problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryInstance {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub a0: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

pub fn gen_instance<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    theta: f64,
    mode: DictionaryMode,
    rng: &mut R,
) -> Result<DictionaryInstance> {
    let a0 = match mode {
        DictionaryMode::Identity => DMatrix::identity(n, n),
        DictionaryMode::RandomOrthogonal => haar_orthogonal(n, rng),
    };
    let x0 = gen_bg_matrix(n, p, theta, rng)?;
    let y = match mode {
        DictionaryMode::Identity => x0.clone(),
        DictionaryMode::RandomOrthogonal => &a0 * &x0,
    };
    Ok(DictionaryInstance { n, p, theta, a0, x0, y })
}

const MAGIC: &[u8; 8] = b"SDDICT01";

fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_matrix<R: Read>(input: &mut R, rows: usize, cols: usize) -> std::io::Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        input.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn read_u64<R: Read>(input: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

impl DictionaryInstance {
    /// Little-endian binary dump: magic, `n`, `p`, `θ`, then `A₀`, `X₀`, `Y`
    /// column-major.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.p as u64).to_le_bytes())?;
        out.write_all(&self.theta.to_le_bytes())?;
        write_matrix(out, &self.a0)?;
        write_matrix(out, &self.x0)?;
        write_matrix(out, &self.y)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(input: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a dictionary instance dump".into()));
        }
        let n = read_u64(input)? as usize;
        let p = read_u64(input)? as usize;
        let theta = f64::from_bits(read_u64(input)?);
        let a0 = read_matrix(input, n, n)?;
        let x0 = read_matrix(input, n, p)?;
        let y = read_matrix(input, n, p)?;
        Ok(Self { n, p, theta, a0, x0, y })
    }
}

/// SHA-256 of the little-endian column-major bytes of a matrix.
pub fn matrix_checksum(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    for v in m.iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}
