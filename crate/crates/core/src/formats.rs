//! Bit-exact codecs for 8-bit numeric formats.
//!
//! Two families are supported: signed `Int8` on the symmetric integer grid
//! `[-127, 127]`, and generalized `EeMm` minifloats (1 sign bit, `e` exponent
//! bits, `m` mantissa bits, biased exponent, gradual underflow through
//! subnormals). All reference arithmetic is `f64`; every representable value
//! of every supported format is exact in `f64`, so the codec introduces no
//! error of its own.
//!
//! Out-of-range handling follows the saturating convention: magnitudes above
//! the maximum expressible value clamp to it, and magnitudes that round below
//! the smallest subnormal flush to zero.

use crate::error::{Error, Result};
use crate::rng::ElementRng;
use serde::{Deserialize, Serialize};

/// Rounding rule applied when a value falls between two representable points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    /// Round to nearest, ties to even mantissa/integer.
    Rtne,
    /// Round to a bracketing representable value with probability linear in
    /// proximity; unbiased in expectation.
    Stochastic,
}

impl Rounding {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rtne" => Ok(Rounding::Rtne),
            "stochastic" | "sr" => Ok(Rounding::Stochastic),
            other => Err(Error::Domain(format!("unknown rounding mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Rounding::Rtne => "rtne",
            Rounding::Stochastic => "stochastic",
        }
    }
}

/// How a minifloat reserves its non-finite encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NanStyle {
    /// The all-ones exponent is entirely reserved (infinities and NaNs).
    Ieee,
    /// Only exponent-all-ones + mantissa-all-ones is NaN (two codes, one per
    /// sign); there are no infinities. This is the E4M3 convention.
    AllOnesNan,
}

/// One 8-bit code point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Code8(pub u8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FormatKind {
    Int8,
    Minifloat {
        exp_bits: u32,
        mantissa_bits: u32,
        exp_bias: i32,
    },
}

/// Description of one 8-bit numeric format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    kind: FormatKind,
    name: String,
}

/// Exact `2^i` for the exponent range used by 8-bit formats.
#[inline]
fn pow2(i: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&i));
    f64::from_bits(((1023 + i) as u64) << 52)
}

/// Bias for which exponents stay comfortably inside the `f64` normal range.
const MAX_ABS_BIAS: i32 = 512;

impl FormatSpec {
    pub fn int8() -> Self {
        Self {
            kind: FormatKind::Int8,
            name: "int8".to_string(),
        }
    }

    pub fn e4m3() -> Self {
        Self::minifloat(4, 3, None).expect("e4m3 is valid")
    }

    pub fn e5m2() -> Self {
        Self::minifloat(5, 2, None).expect("e5m2 is valid")
    }

    /// Generic `EeMm` constructor. `bias` defaults to `2^(e-1) - 1`.
    pub fn minifloat(exp_bits: u32, mantissa_bits: u32, bias: Option<i32>) -> Result<Self> {
        if 1 + exp_bits + mantissa_bits != 8 {
            return Err(Error::InvalidFormat(format!(
                "e{exp_bits}m{mantissa_bits}: sign + exponent + mantissa bits must total 8"
            )));
        }
        if exp_bits < 2 || mantissa_bits < 1 {
            return Err(Error::InvalidFormat(format!(
                "e{exp_bits}m{mantissa_bits}: need at least 2 exponent and 1 mantissa bit"
            )));
        }
        let default_bias = (1 << (exp_bits - 1)) - 1;
        let exp_bias = bias.unwrap_or(default_bias);
        if exp_bias.abs() > MAX_ABS_BIAS {
            return Err(Error::InvalidFormat(format!(
                "bias {exp_bias} out of supported range +-{MAX_ABS_BIAS}"
            )));
        }
        let name = if exp_bias == default_bias {
            format!("e{exp_bits}m{mantissa_bits}")
        } else {
            format!("e{exp_bits}m{mantissa_bits}b{exp_bias}")
        };
        Ok(Self {
            kind: FormatKind::Minifloat {
                exp_bits,
                mantissa_bits,
                exp_bias,
            },
            name,
        })
    }

    /// Resolve a format by name: `int8`, `e4m3`, `e5m2`, or generic
    /// `eXmY[bZ]` with optional custom bias.
    pub fn parse(name: &str) -> Result<Self> {
        let s = name.trim().to_ascii_lowercase();
        if s == "int8" {
            return Ok(Self::int8());
        }
        let parse_generic = || -> Option<Self> {
            let rest = s.strip_prefix('e')?;
            let m_pos = rest.find('m')?;
            let exp_bits: u32 = rest[..m_pos].parse().ok()?;
            let tail = &rest[m_pos + 1..];
            let (mant_str, bias) = match tail.find('b') {
                Some(b_pos) => {
                    let bias: i32 = tail[b_pos + 1..].parse().ok()?;
                    (&tail[..b_pos], Some(bias))
                }
                None => (tail, None),
            };
            let mantissa_bits: u32 = mant_str.parse().ok()?;
            Self::minifloat(exp_bits, mantissa_bits, bias).ok()
        };
        parse_generic().ok_or_else(|| Error::UnknownFormat(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FormatKind {
        &self.kind
    }

    pub fn is_int8(&self) -> bool {
        matches!(self.kind, FormatKind::Int8)
    }

    fn nan_style(&self) -> NanStyle {
        match self.kind {
            FormatKind::Int8 => NanStyle::Ieee, // unused
            FormatKind::Minifloat {
                exp_bits,
                mantissa_bits,
                ..
            } => {
                if exp_bits == 4 && mantissa_bits == 3 {
                    NanStyle::AllOnesNan
                } else {
                    NanStyle::Ieee
                }
            }
        }
    }

    /// Largest decodable magnitude.
    pub fn max_finite(&self) -> f64 {
        match self.kind {
            FormatKind::Int8 => 127.0,
            FormatKind::Minifloat {
                exp_bits,
                mantissa_bits,
                exp_bias,
            } => {
                let m = mantissa_bits;
                let max_exp_field = (1i32 << exp_bits) - 1;
                // Expressed as integer * 2^k so the result is exact.
                let (top_exp_field, top_mant) = match self.nan_style() {
                    NanStyle::AllOnesNan => (max_exp_field, (1u32 << m) - 2),
                    NanStyle::Ieee => (max_exp_field - 1, (1u32 << m) - 1),
                };
                let significand = ((1u32 << m) + top_mant) as f64;
                significand * pow2(top_exp_field - exp_bias - m as i32)
            }
        }
    }

    /// Smallest positive decodable value, `2^(1 - bias - m)`. Int8 has none.
    pub fn min_subnormal(&self) -> Result<f64> {
        match self.kind {
            FormatKind::Int8 => Err(Error::NoSubnormals),
            FormatKind::Minifloat {
                mantissa_bits,
                exp_bias,
                ..
            } => Ok(pow2(1 - exp_bias - mantissa_bits as i32)),
        }
    }

    /// Smallest positive normal value, `2^(1 - bias)`.
    pub fn min_normal(&self) -> Result<f64> {
        match self.kind {
            FormatKind::Int8 => Err(Error::NoSubnormals),
            FormatKind::Minifloat { exp_bias, .. } => Ok(pow2(1 - exp_bias)),
        }
    }

    pub fn mantissa_bits(&self) -> Option<u32> {
        match self.kind {
            FormatKind::Int8 => None,
            FormatKind::Minifloat { mantissa_bits, .. } => Some(mantissa_bits),
        }
    }

    /// Encode a real value. Magnitudes above [`max_finite`](Self::max_finite)
    /// saturate deterministically under both rounding modes; values below the
    /// smallest subnormal flush to zero per the rounding rule.
    pub fn encode(&self, v: f64, rounding: Rounding, rng: &mut ElementRng) -> Result<Code8> {
        if !v.is_finite() {
            return Err(Error::NonFinite(v));
        }
        match self.kind {
            FormatKind::Int8 => Ok(self.encode_int8(v, rounding, rng)),
            FormatKind::Minifloat { .. } => Ok(self.encode_minifloat(v, rounding, rng)),
        }
    }

    /// Convenience wrapper for the deterministic mode.
    pub fn encode_rtne(&self, v: f64) -> Result<Code8> {
        // The RNG is never consulted for RTNE.
        let mut rng = crate::rng::RandomStream::new(0).element(0);
        self.encode(v, Rounding::Rtne, &mut rng)
    }

    fn encode_int8(&self, v: f64, rounding: Rounding, rng: &mut ElementRng) -> Code8 {
        if v.abs() > 127.0 {
            let k: i8 = if v > 0.0 { 127 } else { -127 };
            return Code8(k as u8);
        }
        let k: i32 = match rounding {
            Rounding::Rtne => v.round_ties_even() as i32,
            Rounding::Stochastic => {
                let lo = v.floor();
                if v == lo {
                    lo as i32
                } else {
                    // v - lo is exact for |v| < 2^52.
                    let p = v - lo;
                    if rng.next_f64() < p {
                        lo as i32 + 1
                    } else {
                        lo as i32
                    }
                }
            }
        };
        Code8((k as i8) as u8)
    }

    fn encode_minifloat(&self, v: f64, rounding: Rounding, rng: &mut ElementRng) -> Code8 {
        let FormatKind::Minifloat {
            mantissa_bits: m,
            exp_bias: bias,
            ..
        } = self.kind
        else {
            unreachable!()
        };
        let sign: u8 = if v.is_sign_negative() { 0x80 } else { 0 };
        if v == 0.0 {
            return Code8(sign);
        }
        let a = v.abs();
        let max = self.max_finite();
        if a > max {
            return self.code_of_max(sign);
        }
        match rounding {
            Rounding::Rtne => self.rtne_magnitude(a, sign, m, bias),
            Rounding::Stochastic => {
                let (lo_fields, lo_val) = self.grid_floor(a, m, bias);
                if a == lo_val {
                    return Code8(sign | lo_fields);
                }
                let (hi_fields, hi_val) = self.grid_next(lo_fields, m, bias);
                let p = (a - lo_val) / (hi_val - lo_val);
                if rng.next_f64() < p {
                    Code8(sign | hi_fields)
                } else {
                    Code8(sign | lo_fields)
                }
            }
        }
    }

    fn code_of_max(&self, sign: u8) -> Code8 {
        let FormatKind::Minifloat {
            exp_bits,
            mantissa_bits: m,
            ..
        } = self.kind
        else {
            unreachable!()
        };
        let max_exp_field = (1u8 << exp_bits) - 1;
        let (e_f, m_f) = match self.nan_style() {
            NanStyle::AllOnesNan => (max_exp_field, (1u8 << m) - 2),
            NanStyle::Ieee => (max_exp_field - 1, (1u8 << m) - 1),
        };
        Code8(sign | (e_f << m) | m_f)
    }

    /// RTNE-encode magnitude `0 < a <= max_finite`.
    fn rtne_magnitude(&self, a: f64, sign: u8, m: u32, bias: i32) -> Code8 {
        let min_normal = pow2(1 - bias);
        if a < min_normal {
            // Subnormal grid; the quotient is a power-of-two rescale, exact.
            let q = a / pow2(1 - bias - m as i32);
            let k = q.round_ties_even() as u32;
            if k == 0 {
                return Code8(sign); // flush to zero
            }
            if k == (1 << m) {
                return Code8(sign | (1 << m)); // rounds up to min normal
            }
            return Code8(sign | k as u8);
        }
        // Binade of `a` read off the f64 bits (a is a normal f64 here).
        let mut e_unb = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
        // q = a * 2^(m - e_unb) lies in [2^m, 2^(m+1)]; the scaling is exact.
        let q = a * pow2(m as i32 - e_unb);
        let mut k = q.round_ties_even() as u32;
        if k == (1 << (m + 1)) {
            e_unb += 1;
            k = 1 << m;
        }
        let exp_field = (e_unb + bias) as u8;
        let mant = (k - (1 << m)) as u8;
        Code8(sign | (exp_field << m) | mant)
    }

    /// Largest grid magnitude `<= a`, as (exponent/mantissa fields, value).
    /// Requires `0 < a <= max_finite`.
    fn grid_floor(&self, a: f64, m: u32, bias: i32) -> (u8, f64) {
        let min_normal = pow2(1 - bias);
        if a < min_normal {
            let step = pow2(1 - bias - m as i32);
            let k = (a / step).floor() as u32;
            return (k as u8, k as f64 * step);
        }
        let e_unb = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
        let step = pow2(e_unb - m as i32);
        let k = (a * pow2(m as i32 - e_unb)).floor() as u32; // in [2^m, 2^(m+1))
        let exp_field = (e_unb + bias) as u8;
        let mant = (k - (1 << m)) as u8;
        ((exp_field << m) | mant, k as f64 * step)
    }

    /// The next grid point above the given fields. Caller guarantees the
    /// successor exists (it never asks past `max_finite`).
    fn grid_next(&self, fields: u8, m: u32, bias: i32) -> (u8, f64) {
        let next = fields + 1; // mantissa carry rolls into the exponent field
        let exp_field = (next >> m) as i32;
        let mant = (next & ((1 << m) - 1)) as u32;
        let value = if exp_field == 0 {
            mant as f64 * pow2(1 - bias - m as i32)
        } else {
            ((1 << m) + mant) as f64 * pow2(exp_field - bias - m as i32)
        };
        (next, value)
    }

    /// Decode a code to its exact real value. Reserved non-value codes
    /// (the E4M3 NaNs, the all-ones exponent of IEEE-style formats, the
    /// Int8 `-128` pattern) decode to `None`.
    pub fn decode(&self, c: Code8) -> Option<f64> {
        match self.kind {
            FormatKind::Int8 => {
                let k = c.0 as i8;
                if k == i8::MIN {
                    None
                } else {
                    Some(k as f64)
                }
            }
            FormatKind::Minifloat {
                exp_bits,
                mantissa_bits: m,
                exp_bias: bias,
            } => {
                let sign = if c.0 & 0x80 != 0 { -1.0 } else { 1.0 };
                let exp_field = ((c.0 >> m) & ((1 << exp_bits) - 1)) as i32;
                let mant = (c.0 & ((1 << m) - 1)) as u32;
                let max_exp_field = (1i32 << exp_bits) - 1;
                match self.nan_style() {
                    NanStyle::AllOnesNan => {
                        if exp_field == max_exp_field && mant == (1 << m) - 1 {
                            return None;
                        }
                    }
                    NanStyle::Ieee => {
                        if exp_field == max_exp_field {
                            return None;
                        }
                    }
                }
                let v = if exp_field == 0 {
                    mant as f64 * pow2(1 - bias - m as i32)
                } else {
                    ((1 << m) + mant) as f64 * pow2(exp_field - bias - m as i32)
                };
                Some(sign * v)
            }
        }
    }

    /// All 256 codes with decoded values, sorted by value. Reserved codes and
    /// the redundant zero encoding are flagged. Intended as the exhaustive
    /// oracle the codec tests are written against.
    pub fn enumerate_codes(&self) -> CodeTable {
        let mut entries = Vec::with_capacity(256);
        let mut non_values = Vec::new();
        for raw in 0..=255u8 {
            let code = Code8(raw);
            match self.decode(code) {
                Some(value) => entries.push(CodeEntry {
                    code,
                    value,
                    duplicate_zero: false,
                }),
                None => non_values.push(code),
            }
        }
        entries.sort_by(|a, b| a.value.total_cmp(&b.value));
        // total_cmp puts -0.0 before +0.0; flag the second of the pair.
        for i in 1..entries.len() {
            if entries[i].value == 0.0 && entries[i - 1].value == 0.0 {
                entries[i].duplicate_zero = true;
            }
        }
        CodeTable {
            entries,
            non_values,
        }
    }
}

/// One decoded code point in a [`CodeTable`].
#[derive(Debug, Clone, Copy)]
pub struct CodeEntry {
    pub code: Code8,
    pub value: f64,
    pub duplicate_zero: bool,
}

/// Exhaustive decode of a format's code space.
#[derive(Debug, Clone)]
pub struct CodeTable {
    /// Decodable codes sorted ascending by value.
    pub entries: Vec<CodeEntry>,
    /// Reserved codes with no finite value.
    pub non_values: Vec<Code8>,
}

impl CodeTable {
    /// Distinct finite values, ascending.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self.entries.iter().map(|e| e.value).collect();
        vals.dedup();
        vals
    }

    pub fn max_finite(&self) -> f64 {
        self.entries.last().map(|e| e.value).unwrap_or(0.0)
    }

    pub fn min_positive(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.value).find(|v| *v > 0.0)
    }
}
