//! Numerics laboratory for 8-bit training formats.
//!
//! The crate provides the pieces needed to study how low-precision number
//! formats behave inside training workloads, without touching a real model:
//!
//! - [`formats`]: bit-exact codecs for `int8` and generalized `EeMm`
//!   minifloats, with round-to-nearest-even and stochastic rounding.
//! - [`quantizer`]: symmetric absmax scaling at tensor, channel, or
//!   fine-grained granularity, plus fake-quantization.
//! - [`qmatmul`]: quantized matrix multiply (scale, encode, wide-precision
//!   accumulate, descale) next to an exact reference.
//! - [`metrics`]: relative error, backward error of a quantized matmul,
//!   distribution moments, and a format recommendation rule.
//! - [`distributions`]: seedable samplers for the weight/activation/gradient
//!   shapes seen in practice (normal, log-normal, Student t).
//! - [`trainbench`]: a small teacher-student regression harness that makes
//!   quantization-induced training failures observable in minutes.
//!
//! Everything is deterministic given a seed: random streams are counter
//! based, so results do not depend on evaluation order or thread count.

pub mod distributions;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod qmatmul;
pub mod quantizer;
pub mod rng;
pub mod tensor;
pub mod trainbench;

pub use error::{Error, Result};
pub use formats::{Code8, CodeTable, FormatKind, FormatSpec, Rounding};
pub use quantizer::{GranularityPolicy, QuantConfig, ScaleSet};
pub use rng::{ElementRng, RandomStream};
pub use tensor::{AxisRole, Tensor};
