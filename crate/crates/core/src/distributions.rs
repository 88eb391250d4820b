//! Seedable samplers for the value distributions that matter to 8-bit
//! formats: near-Gaussian weights/activations, log-normal gradient
//! magnitudes, and heavy-tailed Student t stand-ins whose tail weight is a
//! single dial (`nu`).
//!
//! Every sampler draws all of its uniforms from one [`ElementRng`], so a
//! tensor filled per element from a counter stream is identical no matter
//! how the elements are scheduled.

use crate::error::{Error, Result};
use crate::rng::{ElementRng, RandomStream};
use crate::tensor::{AxisRole, Tensor};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistSpec {
    Normal {
        mu: f64,
        sigma: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// Student t with `nu` degrees of freedom. When `standardized` (and
    /// `nu > 2`), samples are rescaled by `sqrt((nu-2)/nu)` to unit variance
    /// so different tail weights are comparable at equal energy.
    StudentT {
        nu: f64,
        standardized: bool,
    },
}

impl DistSpec {
    pub fn normal(mu: f64, sigma: f64) -> Self {
        DistSpec::Normal { mu, sigma }
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Self {
        DistSpec::LogNormal { mu, sigma }
    }

    pub fn student_t(nu: f64) -> Self {
        DistSpec::StudentT {
            nu,
            standardized: true,
        }
    }

    fn validate(self) -> Result<Self> {
        let ok = match self {
            DistSpec::Normal { sigma, .. } | DistSpec::LogNormal { sigma, .. } => {
                sigma.is_finite() && sigma > 0.0
            }
            DistSpec::StudentT { nu, standardized } => {
                nu.is_finite() && nu > 0.0 && !(standardized && nu <= 2.0)
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidDistribution(format!("{self}")))
        }
    }

    /// Draw one sample, consuming uniforms from `rng`.
    pub fn sample(&self, rng: &mut ElementRng) -> f64 {
        match *self {
            DistSpec::Normal { mu, sigma } => mu + sigma * standard_normal(rng),
            DistSpec::LogNormal { mu, sigma } => (mu + sigma * standard_normal(rng)).exp(),
            DistSpec::StudentT { nu, standardized } => {
                let z = standard_normal(rng);
                let chi2 = 2.0 * gamma_sample(nu / 2.0, rng);
                let t = z / (chi2 / nu).sqrt();
                if standardized && nu > 2.0 {
                    t * ((nu - 2.0) / nu).sqrt()
                } else {
                    t
                }
            }
        }
    }

    /// Fill a fresh tensor, element `i` drawn from `stream.element(i)`.
    pub fn fill(
        &self,
        dims: Vec<usize>,
        roles: Vec<AxisRole>,
        stream: &RandomStream,
    ) -> Result<Tensor> {
        Tensor::from_fn(dims, roles, |i| {
            let mut rng = stream.element(i as u64);
            self.sample(&mut rng)
        })
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistSpec::Normal { mu, sigma } => write!(f, "normal:mu={mu},sigma={sigma}"),
            DistSpec::LogNormal { mu, sigma } => write!(f, "lognormal:mu={mu},sigma={sigma}"),
            DistSpec::StudentT { nu, standardized } => {
                if standardized {
                    write!(f, "t:nu={nu}")
                } else {
                    write!(f, "t:nu={nu},std=false")
                }
            }
        }
    }
}

impl FromStr for DistSpec {
    type Err = Error;

    /// Accepts `normal:mu=M,sigma=S`, `lognormal:mu=M,sigma=S`, and
    /// `t:nu=N[,std=BOOL]`. Omitted parameters default to `mu=0,sigma=1`
    /// and `std=true`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDistribution(s.to_string());
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), t),
            None => (s.trim(), ""),
        };
        let mut kv = std::collections::BTreeMap::new();
        for part in tail.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |kv: &std::collections::BTreeMap<String, String>, k: &str, default: f64| {
            kv.get(k)
                .map(|v| v.parse::<f64>().map_err(|_| bad()))
                .unwrap_or(Ok(default))
        };
        let spec = match head.to_ascii_lowercase().as_str() {
            "normal" => DistSpec::Normal {
                mu: num(&kv, "mu", 0.0)?,
                sigma: num(&kv, "sigma", 1.0)?,
            },
            "lognormal" => DistSpec::LogNormal {
                mu: num(&kv, "mu", 0.0)?,
                sigma: num(&kv, "sigma", 1.0)?,
            },
            "t" | "student" | "student-t" => DistSpec::StudentT {
                nu: num(&kv, "nu", 3.0)?,
                standardized: match kv.get("std").map(String::as_str) {
                    None => true,
                    Some("true") => true,
                    Some("false") => false,
                    Some(_) => return Err(bad()),
                },
            },
            _ => return Err(bad()),
        };
        let known: &[&str] = match spec {
            DistSpec::StudentT { .. } => &["nu", "std"],
            _ => &["mu", "sigma"],
        };
        if kv.keys().any(|k| !known.contains(&k.as_str())) {
            return Err(bad());
        }
        spec.validate()
    }
}

/// Standard normal via Box-Muller. Consumes two uniforms.
pub fn standard_normal(rng: &mut ElementRng) -> f64 {
    let u1 = rng.next_open01(); // (0,1]: the log stays finite
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gamma(shape, scale=1) by Marsaglia-Tsang squeeze; handles `shape < 1`
/// with the usual boost. Panics on non-positive shape (internal use only).
pub fn gamma_sample(shape: f64, rng: &mut ElementRng) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
        let u = rng.next_open01();
        return gamma_sample(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u = rng.next_open01();
        // Cheap squeeze first, exact log test second.
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn draw(spec: DistSpec, n: usize, seed: u64) -> Vec<f64> {
        let s = RandomStream::new(seed);
        (0..n)
            .map(|i| spec.sample(&mut s.element(i as u64)))
            .collect()
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let spec = DistSpec::student_t(3.0);
        let a = draw(spec, 100, 5);
        let b = draw(spec, 100, 5);
        let c = draw(spec, 100, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments() {
        let samples = draw(DistSpec::normal(2.0, 3.0), 200_000, 1);
        let (mean, var) = moments(&samples);
        assert!((mean - 2.0).abs() < 0.03, "mean {mean}");
        assert!((var - 9.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn lognormal_is_positive_with_correct_log_moments() {
        let samples = draw(DistSpec::log_normal(-1.0, 0.5), 100_000, 2);
        assert!(samples.iter().all(|&x| x > 0.0));
        let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
        let (mean, var) = moments(&logs);
        assert!((mean + 1.0).abs() < 0.01, "log-mean {mean}");
        assert!((var - 0.25).abs() < 0.01, "log-var {var}");
    }

    #[test]
    fn gamma_matches_shape_mean_and_variance() {
        // Gamma(a, 1) has mean a and variance a; checks both branches of the
        // sampler (boosted a<1 and direct a>=1).
        let s = RandomStream::new(3);
        for shape in [0.5, 1.25, 4.0] {
            let n = 200_000;
            let samples: Vec<f64> = (0..n)
                .map(|i| gamma_sample(shape, &mut s.element(i as u64)))
                .collect();
            let (mean, var) = moments(&samples);
            assert!((mean - shape).abs() < 0.05 * shape.max(1.0), "a={shape} mean {mean}");
            assert!((var - shape).abs() < 0.1 * shape.max(1.0), "a={shape} var {var}");
        }
    }

    #[test]
    fn standardized_t_has_unit_variance() {
        for nu in [2.5, 3.0, 5.0, 30.0] {
            let samples = draw(DistSpec::student_t(nu), 400_000, 4);
            let (mean, var) = moments(&samples);
            assert!(mean.abs() < 0.05, "nu={nu} mean {mean}");
            // Heavy tails make the sample variance itself noisy at small nu.
            let tol = if nu < 3.5 { 0.35 } else { 0.1 };
            assert!((var - 1.0).abs() < tol, "nu={nu} var {var}");
        }
    }

    #[test]
    fn smaller_nu_means_heavier_tails() {
        // Tail mass beyond 4 sigma should grow as nu drops.
        let frac_beyond = |nu: f64| {
            let samples = draw(DistSpec::student_t(nu), 200_000, 7);
            samples.iter().filter(|x| x.abs() > 4.0).count() as f64 / samples.len() as f64
        };
        let heavy = frac_beyond(2.5);
        let mid = frac_beyond(5.0);
        let light = frac_beyond(30.0);
        assert!(heavy > mid && mid > light, "{heavy} {mid} {light}");
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "normal:mu=0,sigma=1",
            "normal:mu=-2.5,sigma=0.1",
            "lognormal:mu=0,sigma=1",
            "t:nu=3",
            "t:nu=2.5",
            "t:nu=4,std=false",
        ] {
            let spec: DistSpec = s.parse().unwrap();
            let back: DistSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, back, "{s}");
        }
        // Defaults.
        assert_eq!(
            "normal".parse::<DistSpec>().unwrap(),
            DistSpec::normal(0.0, 1.0)
        );
        assert_eq!("t".parse::<DistSpec>().unwrap(), DistSpec::student_t(3.0));
    }

    #[test]
    fn parse_rejects_nonsense() {
        for s in [
            "cauchy:x=1",
            "normal:sigma=0",
            "normal:sigma=-1",
            "t:nu=0",
            "t:nu=2", // standardization undefined at nu <= 2
            "t:nu=3,std=maybe",
            "normal:mu",
            "normal:nu=3",
        ] {
            assert!(s.parse::<DistSpec>().is_err(), "{s} should fail");
        }
        // Unstandardized low-nu t is fine.
        assert!("t:nu=2,std=false".parse::<DistSpec>().is_ok());
    }

    #[test]
    fn fill_matches_elementwise_sampling() {
        let spec = DistSpec::normal(0.0, 1.0);
        let s = RandomStream::new(11);
        let t = spec
            .fill(vec![4, 5], vec![AxisRole::Example, AxisRole::Channel], &s)
            .unwrap();
        for (i, &v) in t.data().iter().enumerate() {
            assert_eq!(v, spec.sample(&mut s.element(i as u64)));
        }
    }
}
