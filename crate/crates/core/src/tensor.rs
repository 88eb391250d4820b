//! Dense row-major `f64` tensors with semantic axis tags.
//!
//! Scaling-group decisions downstream depend on what each axis *means*
//! (batch of examples, output channels, a contracting dimension, ...), not
//! just its length, so the roles travel with the data.
//!
//! Tensors can be stored to a small self-describing binary container
//! (magic `Q8T1`): rank, dims, one role byte per axis, then the elements as
//! little-endian `f32`. The f32 payload keeps files half the size and is
//! faithful enough for 8-bit experiments — every decoded 8-bit value is
//! exactly representable in f32.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// What an axis means to the quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisRole {
    /// No particular meaning; grouped at the finest granularity only.
    Other,
    /// Summed over by a matmul. Scaling groups must never split it.
    Contracting,
    /// Independent batch dimension (e.g. attention heads).
    Batch,
    /// Indexes training examples. Never grouped: per-example scales would
    /// leak example identity into the numerics.
    Example,
    /// Output channels / features; the classic per-channel scaling axis.
    Channel,
}

impl AxisRole {
    fn to_byte(self) -> u8 {
        match self {
            AxisRole::Other => 0,
            AxisRole::Contracting => 1,
            AxisRole::Batch => 2,
            AxisRole::Example => 3,
            AxisRole::Channel => 4,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => AxisRole::Other,
            1 => AxisRole::Contracting,
            2 => AxisRole::Batch,
            3 => AxisRole::Example,
            4 => AxisRole::Channel,
            other => {
                return Err(Error::TensorFile(format!("unknown axis role byte {other}")));
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AxisRole::Other => "other",
            AxisRole::Contracting => "contracting",
            AxisRole::Batch => "batch",
            AxisRole::Example => "example",
            AxisRole::Channel => "channel",
        }
    }
}

/// Dense row-major tensor of `f64` with per-axis roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    roles: Vec<AxisRole>,
    data: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"Q8T1";

impl Tensor {
    pub fn new(dims: Vec<usize>, roles: Vec<AxisRole>, data: Vec<f64>) -> Result<Self> {
        if dims.len() != roles.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} dims but {} axis roles",
                dims.len(),
                roles.len()
            )));
        }
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} holds {} elements, got {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Self { dims, roles, data })
    }

    pub fn zeros(dims: Vec<usize>, roles: Vec<AxisRole>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, roles, vec![0.0; n])
    }

    /// Build from a generator over the row-major flat index.
    pub fn from_fn(
        dims: Vec<usize>,
        roles: Vec<AxisRole>,
        mut f: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        let n: usize = dims.iter().product();
        Self::new(dims, roles, (0..n).map(&mut f).collect())
    }

    /// 2D convenience used throughout the matmul paths.
    pub fn matrix(rows: usize, cols: usize, roles: [AxisRole; 2], data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], roles.to_vec(), data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn roles(&self) -> &[AxisRole] {
        &self.roles
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Replace the axis roles (shape unchanged).
    pub fn with_roles(mut self, roles: Vec<AxisRole>) -> Result<Self> {
        if roles.len() != self.dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} dims but {} axis roles",
                self.dims.len(),
                roles.len()
            )));
        }
        self.roles = roles;
        Ok(self)
    }

    /// Row-major strides for the current shape.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Largest absolute value; 0 for an all-zero tensor.
    pub fn absmax(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// 2D transpose, swapping both dims and roles.
    pub fn transposed(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "transpose wants a rank-2 tensor, got rank {}",
                self.rank()
            )));
        }
        let (r, c) = (self.dims[0], self.dims[1]);
        let mut out = vec![0.0; self.data.len()];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::new(vec![c, r], vec![self.roles[1], self.roles[0]], out)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            let d32 = u32::try_from(d)
                .map_err(|_| Error::TensorFile(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d32.to_le_bytes())?;
        }
        for role in &self.roles {
            w.write_all(&[role.to_byte()])?;
        }
        for &v in &self.data {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::TensorFile(format!(
                "bad magic {:02x?}, expected {:02x?}",
                magic, MAGIC
            )));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let rank = u32::from_le_bytes(b4) as usize;
        if rank > 16 {
            return Err(Error::TensorFile(format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut b4)?;
            dims.push(u32::from_le_bytes(b4) as usize);
        }
        let mut roles = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 1];
            r.read_exact(&mut b)?;
            roles.push(AxisRole::from_byte(b[0])?);
        }
        let n: usize = dims.iter().product();
        if n > (1 << 31) {
            return Err(Error::TensorFile(format!("implausible element count {n}")));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b4)?;
            data.push(f32::from_le_bytes(b4) as f64);
        }
        Tensor::new(dims, roles, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}
