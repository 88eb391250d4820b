//! Symmetric absmax quantization with configurable scaling granularity.
//!
//! Each scaling group gets one scale `delta = absmax(group) / max_finite`,
//! chosen so the group's largest magnitude lands exactly on the format's
//! largest code. An all-zero group gets `delta = 1` so zeros stay exact and
//! nothing divides by zero.
//!
//! Granularity controls how the tensor is carved into groups, driven by the
//! [`AxisRole`] tags:
//!
//! - `Tensor`: one group for everything.
//! - `Channel`: one group per index along each non-batch, non-contracting
//!   axis (roles `Channel` and `Other`); multiple such axes form the cross
//!   product of their indices.
//! - `FineGrained`: additionally one group per index along `Batch` axes.
//!
//! The example axis — the one indexing individual training examples — is
//! never split at any granularity: a per-example scale would make an
//! element's encoding depend on which batch it rode in with. It is the axis
//! tagged `Example`; if no axis carries that tag and axis 0 is a plausible
//! candidate (`Other` or `Batch`), axis 0 is assumed and a warning is
//! attached whenever the assumption actually changes the grouping.
//! `Contracting` axes are never split because a dot product cannot be
//! descaled if its terms carry different scales.
//!
//! Internally the codec path is normalized: values are mapped through
//! `(v / absmax) * max_finite` rather than `v / delta`. The two are equal in
//! exact arithmetic, but the normalized form makes the group's absmax encode
//! to the top code with zero error, which keeps error profiles honest at the
//! grid edge.

use crate::error::{Error, Result};
use crate::formats::{Code8, FormatSpec, Rounding};
use crate::rng::RandomStream;
use crate::tensor::{AxisRole, Tensor};
use serde::{Deserialize, Serialize};

/// How finely scales follow the tensor's structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GranularityPolicy {
    Tensor,
    Channel,
    FineGrained,
}

impl GranularityPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tensor" => Ok(Self::Tensor),
            "channel" => Ok(Self::Channel),
            "fine" | "fine-grained" | "finegrained" => Ok(Self::FineGrained),
            other => Err(Error::Domain(format!("unknown granularity `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tensor => "tensor",
            Self::Channel => "channel",
            Self::FineGrained => "fine",
        }
    }
}

/// Full quantization recipe: what format, how to round, how to group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    pub format: FormatSpec,
    pub rounding: Rounding,
    pub granularity: GranularityPolicy,
}

impl QuantConfig {
    pub fn new(format: FormatSpec, rounding: Rounding, granularity: GranularityPolicy) -> Self {
        Self {
            format,
            rounding,
            granularity,
        }
    }

    /// Short human/CSV label, e.g. `int8/channel/rtne`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            self.format.name(),
            self.granularity.as_str(),
            self.rounding.as_str()
        )
    }

    /// Inverse of [`label`](Self::label): `"int8/channel/rtne"` and friends.
    pub fn parse(label: &str) -> Result<Self> {
        let parts: Vec<&str> = label.split('/').collect();
        let [format, granularity, rounding] = parts.as_slice() else {
            return Err(Error::InvalidFormat(format!(
                "quantization config `{label}` is not of the form format/granularity/rounding"
            )));
        };
        Ok(Self {
            format: FormatSpec::parse(format)?,
            rounding: Rounding::parse(rounding)?,
            granularity: GranularityPolicy::parse(granularity)?,
        })
    }
}

/// Per-group scales for one tensor under one granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    dims: Vec<usize>,
    /// Per axis: does the scale vary along it?
    split: Vec<bool>,
    /// Group absmax, row-major over the split axes' index space.
    absmax: Vec<f64>,
    /// `absmax / max_finite`, or 1.0 for an all-zero group.
    delta: Vec<f64>,
    /// Strides mapping element coordinates to a group index.
    group_strides: Vec<usize>,
    /// Row-major strides of the tensor shape.
    elem_strides: Vec<usize>,
    warnings: Vec<String>,
}

impl ScaleSet {
    /// Decide which axes the scale varies along.
    fn split_axes(roles: &[AxisRole], granularity: GranularityPolicy) -> (Vec<bool>, Vec<String>) {
        let mut warnings = Vec::new();
        if granularity == GranularityPolicy::Tensor {
            return (vec![false; roles.len()], warnings);
        }
        let splittable = |r: AxisRole| match granularity {
            GranularityPolicy::Tensor => false,
            GranularityPolicy::Channel => matches!(r, AxisRole::Channel | AxisRole::Other),
            GranularityPolicy::FineGrained => {
                matches!(r, AxisRole::Channel | AxisRole::Other | AxisRole::Batch)
            }
        };
        // Exempt the example axis. An explicit `Example` tag is already
        // unsplittable; without one, assume axis 0 when its tag leaves room
        // for that reading.
        let assumed_example = !roles.contains(&AxisRole::Example)
            && roles.len() >= 2
            && matches!(roles[0], AxisRole::Other | AxisRole::Batch);
        let split: Vec<bool> = roles
            .iter()
            .enumerate()
            .map(|(i, &r)| splittable(r) && !(assumed_example && i == 0))
            .collect();
        if assumed_example && splittable(roles[0]) {
            warnings.push(
                "no axis tagged `example`; assuming axis 0 indexes examples and leaving it \
                 unsplit"
                    .to_string(),
            );
        }
        (split, warnings)
    }

    /// Compute group scales for `tensor` under `granularity` in `format`.
    pub fn compute(
        tensor: &Tensor,
        granularity: GranularityPolicy,
        format: &FormatSpec,
    ) -> Result<ScaleSet> {
        let (split, warnings) = Self::split_axes(tensor.roles(), granularity);
        let dims = tensor.dims().to_vec();
        let elem_strides = tensor.strides();

        // Strides over the group index space; unsplit axes contribute nothing.
        let mut group_strides = vec![0usize; dims.len()];
        let mut groups = 1usize;
        for i in (0..dims.len()).rev() {
            if split[i] {
                group_strides[i] = groups;
                groups *= dims[i];
            }
        }

        let mut absmax = vec![0.0f64; groups.max(1)];
        for (flat, v) in tensor.data().iter().enumerate() {
            let g = Self::group_of(flat, &elem_strides, &dims, &split, &group_strides);
            let a = v.abs();
            if a > absmax[g] {
                absmax[g] = a;
            }
        }
        let maxf = format.max_finite();
        let delta = absmax
            .iter()
            .map(|&a| if a == 0.0 { 1.0 } else { a / maxf })
            .collect();
        Ok(ScaleSet {
            dims,
            split,
            absmax,
            delta,
            group_strides,
            elem_strides,
            warnings,
        })
    }

    #[inline]
    fn group_of(
        flat: usize,
        elem_strides: &[usize],
        dims: &[usize],
        split: &[bool],
        group_strides: &[usize],
    ) -> usize {
        let mut g = 0;
        for i in 0..dims.len() {
            if split[i] {
                let coord = (flat / elem_strides[i]) % dims[i];
                g += coord * group_strides[i];
            }
        }
        g
    }

    /// Group index of a flat (row-major) element index.
    #[inline]
    pub fn group_index(&self, flat: usize) -> usize {
        Self::group_of(
            flat,
            &self.elem_strides,
            &self.dims,
            &self.split,
            &self.group_strides,
        )
    }

    pub fn num_groups(&self) -> usize {
        self.absmax.len()
    }

    /// `true` for axes the scale varies along.
    pub fn split(&self) -> &[bool] {
        &self.split
    }

    pub fn absmax(&self) -> &[f64] {
        &self.absmax
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    #[inline]
    pub fn absmax_at(&self, flat: usize) -> f64 {
        self.absmax[self.group_index(flat)]
    }

    #[inline]
    pub fn delta_at(&self, flat: usize) -> f64 {
        self.delta[self.group_index(flat)]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// When the scale varies along at most the single axis `axis`, return the
    /// per-index scale pair (absmax, delta) lookup along that axis. Used by
    /// the matmul fast paths.
    pub fn per_axis(&self, axis: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        for (i, &s) in self.split.iter().enumerate() {
            if s && i != axis {
                return None;
            }
        }
        if !self.split.get(axis).copied().unwrap_or(false) {
            // Scale is constant; broadcast it.
            return Some((
                vec![self.absmax[0]; self.dims.get(axis).copied().unwrap_or(1)],
                vec![self.delta[0]; self.dims.get(axis).copied().unwrap_or(1)],
            ));
        }
        Some((self.absmax.clone(), self.delta.clone()))
    }
}

/// A tensor's codes plus everything needed to decode them.
#[derive(Debug, Clone)]
pub struct QuantizedTensor {
    pub format: FormatSpec,
    pub rounding: Rounding,
    pub codes: Vec<Code8>,
    pub scales: ScaleSet,
    dims: Vec<usize>,
    roles: Vec<AxisRole>,
}

impl QuantizedTensor {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn roles(&self) -> &[AxisRole] {
        &self.roles
    }
}

/// Encode one value against its group's absmax. Exposed for oracle tests:
/// every bulk path must agree with this scalar pipeline bit for bit.
#[inline]
pub fn encode_normalized(
    format: &FormatSpec,
    v: f64,
    group_absmax: f64,
    rounding: Rounding,
    rng: &mut crate::rng::ElementRng,
) -> Result<Code8> {
    if group_absmax == 0.0 {
        return format.encode(0.0, rounding, rng);
    }
    let x = (v / group_absmax) * format.max_finite();
    format.encode(x, rounding, rng)
}

/// Decode one code back to real units. Inverse companion of
/// [`encode_normalized`]; reserved codes are an error here because a
/// quantizer never emits them.
#[inline]
pub fn decode_normalized(format: &FormatSpec, c: Code8, group_absmax: f64) -> Result<f64> {
    let d = format.decode(c).ok_or(Error::NonValueCode {
        code: c.0,
        format: format.name().to_string(),
    })?;
    if group_absmax == 0.0 {
        return Ok(d); // delta = 1 convention: codes are the values
    }
    Ok((d / format.max_finite()) * group_absmax)
}

/// Quantize a tensor: compute scales, then encode every element.
///
/// Stochastic rounding draws one uniform per element from a counter stream
/// keyed by the element's flat index, so results are independent of
/// iteration order.
pub fn quantize(
    tensor: &Tensor,
    cfg: &QuantConfig,
    stream: &RandomStream,
) -> Result<QuantizedTensor> {
    let scales = ScaleSet::compute(tensor, cfg.granularity, &cfg.format)?;
    let mut codes = Vec::with_capacity(tensor.len());
    for (flat, &v) in tensor.data().iter().enumerate() {
        let mut rng = stream.element(flat as u64);
        let am = scales.absmax_at(flat);
        codes.push(encode_normalized(&cfg.format, v, am, cfg.rounding, &mut rng)?);
    }
    Ok(QuantizedTensor {
        format: cfg.format.clone(),
        rounding: cfg.rounding,
        codes,
        scales,
        dims: tensor.dims().to_vec(),
        roles: tensor.roles().to_vec(),
    })
}

/// Decode a quantized tensor back to real units.
pub fn dequantize(q: &QuantizedTensor) -> Result<Tensor> {
    let mut data = Vec::with_capacity(q.codes.len());
    for (flat, &c) in q.codes.iter().enumerate() {
        let am = q.scales.absmax_at(flat);
        data.push(decode_normalized(&q.format, c, am)?);
    }
    Tensor::new(q.dims.clone(), q.roles.clone(), data)
}

/// Quantize-then-dequantize in one step: the tensor as the format sees it.
pub fn fake_quantize(
    tensor: &Tensor,
    cfg: &QuantConfig,
    stream: &RandomStream,
) -> Result<(Tensor, ScaleSet)> {
    let q = quantize(tensor, cfg, stream)?;
    let t = dequantize(&q)?;
    Ok((t, q.scales))
}
