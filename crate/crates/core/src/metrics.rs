//! Error metrics and distribution statistics for judging 8-bit formats.
//!
//! Three views of quantization damage, in increasing structure:
//!
//! - [`relative_error`]: scalar `|v - v~| / |v|`.
//! - [`error_profile`]: relative error as a function of magnitude for one
//!   format with its scale anchored at a grid maximum — the shape that shows
//!   where a format spends its precision.
//! - [`backward_error`]: inner-product-level error of a quantized matmul,
//!   `|L.R - Q(L,R)|` normalized elementwise by `|L|.|R|`. This is the
//!   metric that actually predicts training behavior, because a dot product
//!   can cancel, and forward error alone over-penalizes cancellation.
//!
//! Plus [`moments`] (mean/variance/skew/excess kurtosis — tail weight is the
//! operative statistic) and [`recommend`], a small rule table mapping
//! moments + tensor category to a format/granularity/rounding choice.

use crate::error::{Error, Result};
use crate::formats::{FormatSpec, Rounding};
use crate::qmatmul::{reference_abs_matmul, reference_matmul};
use crate::quantizer::{
    decode_normalized, encode_normalized, fake_quantize, GranularityPolicy, QuantConfig,
};
use crate::rng::RandomStream;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// `|v - approx| / |v|`. The reference `v` must be nonzero; callers fall
/// back to absolute error for exact zeros.
pub fn relative_error(v: f64, approx: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::Domain(
            "relative error is undefined for a zero reference".to_string(),
        ));
    }
    Ok((v - approx).abs() / v.abs())
}

/// Linear-interpolation quantile (the common "type 7" rule) over a sorted
/// ascending slice. `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Order statistics of one nonnegative error sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub p99: f64,
    /// Entries dropped because their normalizer was zero.
    pub masked_count: usize,
    /// Entries that went into the statistics.
    pub count: usize,
}

impl ErrorSummary {
    pub fn from_errors(mut errors: Vec<f64>, masked_count: usize) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Domain(
                "error summary over an empty (fully masked) sample".to_string(),
            ));
        }
        errors.sort_by(f64::total_cmp);
        let count = errors.len();
        let mean = errors.iter().sum::<f64>() / count as f64;
        Ok(ErrorSummary {
            max: errors[count - 1],
            median: quantile_sorted(&errors, 0.5),
            mean,
            p99: quantile_sorted(&errors, 0.99),
            masked_count,
            count,
        })
    }
}

/// Elementwise backward error of a quantized product, with its summary.
#[derive(Debug, Clone)]
pub struct BackwardError {
    /// Row-major BE entries; masked entries (zero normalizer) hold NaN.
    pub matrix: Vec<f64>,
    pub summary: ErrorSummary,
}

/// Backward error of `q_out` as an approximation of `l . r`, computing the
/// exact references internally. For sweeps that reuse one operand pair
/// across many configurations, compute the references once and call
/// [`backward_error_against`] instead.
pub fn backward_error(l: &Tensor, r: &Tensor, q_out: &Tensor) -> Result<BackwardError> {
    let exact = reference_matmul(l, r)?;
    let absref = reference_abs_matmul(l, r)?;
    backward_error_against(&exact, &absref, q_out)
}

/// Backward error given precomputed `exact = L.R` and `absref = |L|.|R|`.
pub fn backward_error_against(
    exact: &Tensor,
    absref: &Tensor,
    q_out: &Tensor,
) -> Result<BackwardError> {
    if exact.dims() != q_out.dims() || exact.dims() != absref.dims() {
        return Err(Error::ShapeMismatch(format!(
            "backward error over {:?} vs {:?} vs {:?}",
            exact.dims(),
            absref.dims(),
            q_out.dims()
        )));
    }
    let mut matrix = Vec::with_capacity(exact.len());
    let mut errors = Vec::with_capacity(exact.len());
    let mut masked = 0usize;
    for ((&e, &a), &q) in exact.data().iter().zip(absref.data()).zip(q_out.data()) {
        if a == 0.0 {
            masked += 1;
            matrix.push(f64::NAN);
        } else {
            let be = (e - q).abs() / a;
            matrix.push(be);
            errors.push(be);
        }
    }
    let summary = ErrorSummary::from_errors(errors, masked)?;
    Ok(BackwardError { matrix, summary })
}

/// One point of an error-profile curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub value: f64,
    pub rel_error: f64,
}

/// Relative error of fake-quantizing magnitudes across `[grid_min, grid_max]`
/// (log-spaced, `points` samples) with the scale anchored at `grid_max` —
/// i.e. the tensor's absmax sits exactly on the format's top code. Values
/// that flush to zero therefore report RE = 1.
pub fn error_profile(
    spec: &FormatSpec,
    grid_min: f64,
    grid_max: f64,
    points: usize,
    rounding: Rounding,
    stream: &RandomStream,
) -> Result<Vec<ProfilePoint>> {
    if !(grid_min.is_finite() && grid_max.is_finite()) || grid_min <= 0.0 || grid_max < grid_min {
        return Err(Error::Domain(format!(
            "profile grid must satisfy 0 < min <= max, got [{grid_min}, {grid_max}]"
        )));
    }
    if points < 2 {
        return Err(Error::Domain("profile needs at least 2 points".to_string()));
    }
    let ratio = grid_max / grid_min;
    let mut curve = Vec::with_capacity(points);
    for i in 0..points {
        let v = if i == points - 1 {
            grid_max // exact anchor, immune to powf rounding
        } else {
            grid_min * ratio.powf(i as f64 / (points - 1) as f64)
        };
        let mut rng = stream.element(i as u64);
        let code = encode_normalized(spec, v, grid_max, rounding, &mut rng)?;
        let q = decode_normalized(spec, code, grid_max)?;
        curve.push(ProfilePoint {
            value: v,
            rel_error: relative_error(v, q)?,
        });
    }
    Ok(curve)
}

/// Sample moments up through excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    pub count: usize,
}

/// Two-pass sample moments with the bias-corrected skew/kurtosis estimators.
/// Needs at least 4 elements and nonzero variance (below either, the higher
/// moments are undefined).
pub fn moments(x: &Tensor) -> Result<Moments> {
    moments_of(x.data())
}

pub fn moments_of(data: &[f64]) -> Result<Moments> {
    let n = data.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "moments need at least 4 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = data.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0f64, 0.0f64, 0.0f64);
    for &v in data {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 == 0.0 {
        return Err(Error::Domain(
            "zero variance: skew and kurtosis are undefined".to_string(),
        ));
    }
    let variance = m2 / (nf - 1.0);
    let g1 = (m3 / nf) / (m2 / nf).powf(1.5);
    let skew = g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0);
    let g2 = (m4 / nf) / (m2 / nf).powi(2) - 3.0;
    let excess_kurtosis = ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0));
    Ok(Moments {
        mean,
        variance,
        skew,
        excess_kurtosis,
        count: n,
    })
}

/// Raw elementwise quantization errors `x_i - fake_quantize(x)_i`, for
/// histograms and downstream summaries.
pub fn quant_error_samples(
    x: &Tensor,
    cfg: &QuantConfig,
    stream: &RandomStream,
) -> Result<Vec<f64>> {
    let (fq, _) = fake_quantize(x, cfg, stream)?;
    Ok(x.data()
        .iter()
        .zip(fq.data())
        .map(|(a, b)| a - b)
        .collect())
}

/// Which operand population a tensor belongs to, in the sense that matters
/// for numerics: weights-side (RHS), activations-side (LHS), or upstream
/// gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorCategory {
    Rhs,
    Lhs,
    Gradient,
}

impl TensorCategory {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rhs" | "weights" => Ok(Self::Rhs),
            "lhs" | "activations" => Ok(Self::Lhs),
            "gradient" | "grad" => Ok(Self::Gradient),
            other => Err(Error::Domain(format!("unknown tensor category `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rhs => "rhs",
            Self::Lhs => "lhs",
            Self::Gradient => "gradient",
        }
    }
}

/// Tunables for [`recommend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommendOptions {
    /// Excess kurtosis below this counts as well-behaved.
    pub kurtosis_moderate: f64,
    /// Excess kurtosis at or above this counts as extreme.
    pub kurtosis_extreme: f64,
    /// Restrict the choice to Int8 (integer-only hardware); compensates
    /// with finer granularity and stochastic rounding where FP8 would have
    /// been chosen.
    pub force_int8: bool,
}

impl Default for RecommendOptions {
    fn default() -> Self {
        Self {
            kurtosis_moderate: 1.0,
            kurtosis_extreme: 10.0,
            force_int8: false,
        }
    }
}

/// Rule table distilled from how the three 8-bit formats behave in training:
///
/// - well-behaved tails: Int8 at tensor scaling is lossless in practice;
/// - moderate tails: Int8 still works if scales are finer-grained;
/// - extreme tails or upstream gradients: an FP8 format, and E5M2's wider
///   range beats E4M3's extra mantissa bit when saturation is the risk;
/// - Int8 forced onto gradients survives only with fine-grained scales plus
///   stochastic rounding.
pub fn recommend(
    stats: &Moments,
    category: TensorCategory,
    opts: &RecommendOptions,
) -> QuantConfig {
    let k = stats.excess_kurtosis;
    let heavy = category == TensorCategory::Gradient || k >= opts.kurtosis_extreme;
    if opts.force_int8 {
        if heavy {
            QuantConfig::new(
                FormatSpec::int8(),
                Rounding::Stochastic,
                GranularityPolicy::FineGrained,
            )
        } else if k >= opts.kurtosis_moderate {
            QuantConfig::new(FormatSpec::int8(), Rounding::Rtne, GranularityPolicy::Channel)
        } else {
            QuantConfig::new(FormatSpec::int8(), Rounding::Rtne, GranularityPolicy::Tensor)
        }
    } else if heavy {
        QuantConfig::new(FormatSpec::e5m2(), Rounding::Rtne, GranularityPolicy::Tensor)
    } else if k >= opts.kurtosis_moderate {
        QuantConfig::new(FormatSpec::int8(), Rounding::Rtne, GranularityPolicy::Channel)
    } else {
        QuantConfig::new(FormatSpec::int8(), Rounding::Rtne, GranularityPolicy::Tensor)
    }
}

/// One trial's error summary with the metadata that identifies the trial.
/// Serializes to JSON directly and to CSV via [`ErrorReport::csv_header`] /
/// [`ErrorReport::csv_row`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub seed: u64,
    pub dist: String,
    pub nu: Option<f64>,
    pub format: String,
    pub granularity: String,
    pub rounding: String,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub p99: f64,
    pub masked_count: usize,
}

impl ErrorReport {
    pub fn csv_header() -> &'static str {
        "seed,dist,nu,format,granularity,rounding,max,median,mean,p99,masked_count"
    }

    pub fn csv_row(&self) -> String {
        // distribution specs contain commas ("t:nu=3,std=false"), so that
        // field gets RFC 4180 quoting
        let dist = if self.dist.contains(',') {
            format!("\"{}\"", self.dist)
        } else {
            self.dist.clone()
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            dist,
            self.nu.map(|v| v.to_string()).unwrap_or_default(),
            self.format,
            self.granularity,
            self.rounding,
            self.max,
            self.median,
            self.mean,
            self.p99,
            self.masked_count
        )
    }
}
