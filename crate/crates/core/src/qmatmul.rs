//! Quantized matrix multiply: scale, encode, accumulate wide, descale.
//!
//! Each operand is independently absmax-quantized (see [`crate::quantizer`]),
//! the encoded grids are multiplied with a wide accumulator, and the result
//! is descaled by the product of the operands' group scales. Because a dot
//! product mixes everything along the contracting axis, scales may vary only
//! along the *free* axes: one scale per LHS row, one per RHS column (or a
//! single scale for the whole operand).
//!
//! Either side may also be left unquantized, which is how mixed experiments
//! ("only the gradient is int8") are expressed.
//!
//! Accumulation modes:
//!
//! - [`AccumMode::Wide`]: exact accumulation — `i64` integer arithmetic when
//!   both sides are `int8`, `f64` otherwise. For 8-bit operands both are
//!   exact, so the only error in the product is what quantization put there.
//! - [`AccumMode::Bf16Demo`]: the running sum is rounded to bfloat16 after
//!   every term, reproducing the swamping failure of narrow accumulators.
//!   Strictly a demonstration device.

use crate::error::{Error, Result};
use crate::quantizer::{quantize, QuantConfig, QuantizedTensor};
use crate::rng::RandomStream;
use crate::tensor::{AxisRole, Tensor};
use serde::{Deserialize, Serialize};

/// How dot-product terms are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccumMode {
    /// Exact: `i64` for int8 x int8, `f64` otherwise.
    Wide,
    /// Running sum rounded to bfloat16 after every add (lossy, for demos).
    Bf16Demo,
}

impl AccumMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(Self::Wide),
            "bf16" | "bf16-demo" => Ok(Self::Bf16Demo),
            other => Err(Error::Domain(format!("unknown accumulation mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Wide => "wide",
            Self::Bf16Demo => "bf16-demo",
        }
    }
}

/// Quantization recipe for one matmul. `None` on a side means that operand
/// participates at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatmulPlan {
    pub lhs: Option<QuantConfig>,
    pub rhs: Option<QuantConfig>,
    pub accum: AccumMode,
}

impl MatmulPlan {
    pub fn exact() -> Self {
        Self {
            lhs: None,
            rhs: None,
            accum: AccumMode::Wide,
        }
    }

    pub fn both(cfg: QuantConfig) -> Self {
        Self {
            lhs: Some(cfg.clone()),
            rhs: Some(cfg),
            accum: AccumMode::Wide,
        }
    }
}

/// Output of [`qmatmul`]: the product plus the operand encodings that
/// produced it (absent for unquantized sides).
#[derive(Debug, Clone)]
pub struct QmatmulResult {
    pub out: Tensor,
    pub lhs: Option<QuantizedTensor>,
    pub rhs: Option<QuantizedTensor>,
}

/// Round to bfloat16 (via f32, ties to even). Finite inputs only.
fn to_bf16(x: f64) -> f64 {
    let bits = (x as f32).to_bits();
    let rounded = bits.wrapping_add(0x7fff + ((bits >> 16) & 1));
    f32::from_bits(rounded & 0xffff_0000) as f64
}

fn check_2d_pair(l: &Tensor, r: &Tensor) -> Result<(usize, usize, usize)> {
    if l.rank() != 2 || r.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "matmul wants rank-2 operands, got {} and {}",
            l.rank(),
            r.rank()
        )));
    }
    let (m, k) = (l.dims()[0], l.dims()[1]);
    let (k2, n) = (r.dims()[0], r.dims()[1]);
    if k != k2 {
        return Err(Error::ShapeMismatch(format!(
            "inner dimensions differ: {m}x{k} . {k2}x{n}"
        )));
    }
    Ok((m, k, n))
}

/// Exact `f64` product of two rank-2 tensors.
pub fn reference_matmul(l: &Tensor, r: &Tensor) -> Result<Tensor> {
    let (m, k, n) = check_2d_pair(l, r)?;
    let mut out = vec![0.0f64; m * n];
    let ld = l.data();
    let rd = r.data();
    for i in 0..m {
        for kk in 0..k {
            let a = ld[i * k + kk];
            if a == 0.0 {
                continue;
            }
            let rrow = &rd[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += a * rrow[j];
            }
        }
    }
    Tensor::matrix(m, n, [l.roles()[0], r.roles()[1]], out)
}

/// `|L| . |R|`: the elementwise-absolute product, the natural magnitude
/// yardstick for a dot product's output.
pub fn reference_abs_matmul(l: &Tensor, r: &Tensor) -> Result<Tensor> {
    let (m, k, n) = check_2d_pair(l, r)?;
    let mut out = vec![0.0f64; m * n];
    let ld = l.data();
    let rd = r.data();
    for i in 0..m {
        for kk in 0..k {
            let a = ld[i * k + kk].abs();
            if a == 0.0 {
                continue;
            }
            let rrow = &rd[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += a * rrow[j].abs();
            }
        }
    }
    Tensor::matrix(m, n, [l.roles()[0], r.roles()[1]], out)
}

/// Re-tag one operand's contracting axis (identified by position). An
/// explicit `Channel` tag there is a contradiction: per-channel scales along
/// a contracting axis cannot be descaled out of the dot product.
fn retag_contracting(t: &Tensor, axis: usize) -> Result<Tensor> {
    let mut roles = t.roles().to_vec();
    if roles[axis] == AxisRole::Channel {
        return Err(Error::ScaleSplitsContraction { axis });
    }
    roles[axis] = AxisRole::Contracting;
    t.clone().with_roles(roles)
}

struct Operand {
    /// Decoded grid values (or raw values when unquantized), row-major.
    values: Vec<f64>,
    /// Per-free-axis-index descale factor (1.0 when unquantized).
    deltas: Vec<f64>,
    quantized: Option<QuantizedTensor>,
    int8: bool,
}

fn prepare_operand(
    t: &Tensor,
    cfg: Option<&QuantConfig>,
    contracting_axis: usize,
    free_axis: usize,
    stream: &RandomStream,
) -> Result<Operand> {
    match cfg {
        None => Ok(Operand {
            values: t.data().to_vec(),
            deltas: vec![1.0; t.dims()[free_axis]],
            quantized: None,
            int8: false,
        }),
        Some(cfg) => {
            let tagged = retag_contracting(t, contracting_axis)?;
            let q = quantize(&tagged, cfg, stream)?;
            let (_, deltas) = q
                .scales
                .per_axis(free_axis)
                .expect("contracting axis is never split");
            let values: Vec<f64> = q
                .codes
                .iter()
                .map(|c| {
                    cfg.format
                        .decode(*c)
                        .expect("quantizer never emits reserved codes")
                })
                .collect();
            Ok(Operand {
                values,
                deltas,
                int8: cfg.format.is_int8(),
                quantized: Some(q),
            })
        }
    }
}

/// Quantized product of two rank-2 tensors under `plan`.
///
/// Stochastic rounding draws from `stream` substreams keyed per operand, so
/// a single seed pins the whole operation.
pub fn qmatmul(
    l: &Tensor,
    r: &Tensor,
    plan: &MatmulPlan,
    stream: &RandomStream,
) -> Result<QmatmulResult> {
    let (m, k, n) = check_2d_pair(l, r)?;
    let lop = prepare_operand(l, plan.lhs.as_ref(), 1, 0, &stream.substream(1))?;
    let rop = prepare_operand(r, plan.rhs.as_ref(), 0, 1, &stream.substream(2))?;

    let mut out = vec![0.0f64; m * n];
    let integer_path =
        lop.int8 && rop.int8 && matches!(plan.accum, AccumMode::Wide) && k < (1 << 25);
    if integer_path {
        // Both grids are integers in [-127, 127]; products fit i32 and sums
        // over any practical k fit i64 with room to spare.
        let lc: Vec<i32> = lop.values.iter().map(|&v| v as i32).collect();
        let rc: Vec<i32> = rop.values.iter().map(|&v| v as i32).collect();
        let mut acc = vec![0i64; n];
        for i in 0..m {
            acc.fill(0);
            for kk in 0..k {
                let a = lc[i * k + kk] as i64;
                if a == 0 {
                    continue;
                }
                let rrow = &rc[kk * n..(kk + 1) * n];
                for j in 0..n {
                    acc[j] += a * rrow[j] as i64;
                }
            }
            let dl = lop.deltas[i];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] = acc[j] as f64 * (dl * rop.deltas[j]);
            }
        }
    } else {
        match plan.accum {
            AccumMode::Wide => {
                let mut acc = vec![0.0f64; n];
                for i in 0..m {
                    acc.fill(0.0);
                    for kk in 0..k {
                        let a = lop.values[i * k + kk];
                        if a == 0.0 {
                            continue;
                        }
                        let rrow = &rop.values[kk * n..(kk + 1) * n];
                        for j in 0..n {
                            acc[j] += a * rrow[j];
                        }
                    }
                    let dl = lop.deltas[i];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for j in 0..n {
                        orow[j] = acc[j] * (dl * rop.deltas[j]);
                    }
                }
            }
            AccumMode::Bf16Demo => {
                for i in 0..m {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for kk in 0..k {
                            let term = to_bf16(lop.values[i * k + kk] * rop.values[kk * n + j]);
                            acc = to_bf16(acc + term);
                        }
                        out[i * n + j] = acc * (lop.deltas[i] * rop.deltas[j]);
                    }
                }
            }
        }
    }
    Ok(QmatmulResult {
        out: Tensor::matrix(m, n, [l.roles()[0], r.roles()[1]], out)?,
        lhs: lop.quantized,
        rhs: rop.quantized,
    })
}

/// Batched variant: rank-3 operands whose leading axis is a shared batch
/// dimension; each slice is multiplied independently, scales and all. The
/// leading axis keeps its role; slices inherit the trailing roles.
pub fn batched_qmatmul(
    l: &Tensor,
    r: &Tensor,
    plan: &MatmulPlan,
    stream: &RandomStream,
) -> Result<Tensor> {
    if l.rank() != 3 || r.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "batched matmul wants rank-3 operands, got {} and {}",
            l.rank(),
            r.rank()
        )));
    }
    let b = l.dims()[0];
    if r.dims()[0] != b {
        return Err(Error::ShapeMismatch(format!(
            "batch sizes differ: {} vs {}",
            b,
            r.dims()[0]
        )));
    }
    let (m, k) = (l.dims()[1], l.dims()[2]);
    let (k2, n) = (r.dims()[1], r.dims()[2]);
    if k != k2 {
        return Err(Error::ShapeMismatch(format!(
            "inner dimensions differ: {m}x{k} . {k2}x{n}"
        )));
    }
    let mut out = Vec::with_capacity(b * m * n);
    for bi in 0..b {
        let ls = Tensor::matrix(
            m,
            k,
            [l.roles()[1], l.roles()[2]],
            l.data()[bi * m * k..(bi + 1) * m * k].to_vec(),
        )?;
        let rs = Tensor::matrix(
            k,
            n,
            [r.roles()[1], r.roles()[2]],
            r.data()[bi * k * n..(bi + 1) * k * n].to_vec(),
        )?;
        let res = qmatmul(&ls, &rs, plan, &stream.substream(0x0b00 + bi as u64))?;
        out.extend_from_slice(res.out.data());
    }
    Tensor::new(
        vec![b, m, n],
        vec![l.roles()[0], l.roles()[1], r.roles()[2]],
        out,
    )
}
