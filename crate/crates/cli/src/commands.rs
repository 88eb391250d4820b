//! The seven subcommands, each rendered entirely in memory.
//!
//! Every command resolves its arguments down to concrete values first, and
//! records exactly those values in the report manifest. Regenerating from
//! the manifest therefore never consults a config file or the environment
//! again — the flags carry the whole story.

use std::fmt::Display;

use anyhow::Context;
use quant8::distributions::DistSpec;
use quant8::formats::{FormatSpec, Rounding};
use quant8::metrics::{
    backward_error_against, error_profile, moments, recommend, ErrorReport, Moments,
    RecommendOptions, TensorCategory,
};
use quant8::qmatmul::{qmatmul, reference_abs_matmul, reference_matmul, AccumMode, MatmulPlan};
use quant8::quantizer::{dequantize, quantize, GranularityPolicy, QuantConfig};
use quant8::rng::RandomStream;
use quant8::tensor::{AxisRole, Tensor};
use quant8::trainbench::{train, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::{
    ErrorProfileArgs, FormatsArgs, ProfileArgs, QuantizeArgs, RecommendArgs, Rendered,
    SweepBeArgs, TrainDemoArgs,
};

/// Flag value, then `QUANT8_SEED`, then 0.
fn resolve_seed(flag: Option<u64>) -> anyhow::Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(0))
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("QUANT8_SEED") {
        Ok(raw) => {
            let parsed = raw.trim().parse::<u64>().map_err(|_| {
                quant8::Error::Domain(format!(
                    "QUANT8_SEED must be an unsigned integer, got `{raw}`"
                ))
            })?;
            Ok(Some(parsed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn push_arg(args: &mut Vec<String>, name: &str, value: impl Display) {
    args.push(name.to_string());
    args.push(value.to_string());
}

fn push_out(args: &mut Vec<String>, out: &Option<std::path::PathBuf>) {
    if let Some(path) = out {
        push_arg(args, "--out", path.display());
    }
}

/// Manifest comment, header, rows, trailing newline.
fn csv_report(
    manifest: &Manifest,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Vec<u8> {
    let mut text = String::new();
    text.push_str(&manifest.csv_comment());
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text.into_bytes()
}

/// Integers print without a fraction; everything else uses the shortest
/// round-trip form.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        v.to_string()
    }
}

// ---------------------------------------------------------------- formats

pub fn formats(a: &FormatsArgs) -> anyhow::Result<Rendered> {
    let specs: Vec<FormatSpec> = a
        .names
        .iter()
        .map(|n| FormatSpec::parse(n).map_err(Into::into))
        .collect::<anyhow::Result<_>>()?;

    let header = [
        "format",
        "max_finite",
        "min_subnormal",
        "min_normal",
        "distinct_values",
        "reserved_codes",
    ];
    let mut rows: Vec<[String; 6]> = Vec::with_capacity(specs.len());
    for spec in &specs {
        let table = spec.enumerate_codes();
        let dash = |r: quant8::Result<f64>| r.map(fmt_num).unwrap_or_else(|_| "-".to_string());
        rows.push([
            spec.name().to_string(),
            fmt_num(spec.max_finite()),
            dash(spec.min_subnormal()),
            dash(spec.min_normal()),
            table.distinct_values().len().to_string(),
            table.non_values.len().to_string(),
        ]);
    }

    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut stdout = String::new();
    let render_line = |cells: &[String; 6]| -> String {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i == 0 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("{cell:>w$}"));
            }
        }
        line.trim_end().to_string()
    };
    stdout.push_str(&render_line(&header.map(String::from)));
    stdout.push('\n');
    for row in &rows {
        stdout.push_str(&render_line(row));
        stdout.push('\n');
    }

    let mut report = None;
    if a.out.is_some() {
        let mut args = Vec::new();
        for spec in &specs {
            args.push(spec.name().to_string());
        }
        push_out(&mut args, &a.out);
        let manifest = Manifest::new("formats", args, None);
        let csv_rows = rows.iter().map(|r| {
            let mut cells = r.clone();
            for cell in cells.iter_mut().skip(2).take(2) {
                if cell == "-" {
                    cell.clear();
                }
            }
            cells.join(",")
        });
        report = Some(csv_report(&manifest, &header.join(","), csv_rows));
    }

    Ok(Rendered {
        stdout,
        report,
        out: a.out.clone(),
        ..Rendered::default()
    })
}

// ---------------------------------------------------------- error-profile

pub fn error_profile_cmd(a: &ErrorProfileArgs) -> anyhow::Result<Rendered> {
    let spec = FormatSpec::parse(&a.format)?;
    let rounding = Rounding::parse(&a.rounding)?;
    let seed = resolve_seed(a.seed)?;
    let stream = RandomStream::new(seed);
    let curve = error_profile(&spec, a.grid_min, a.grid_max, a.points, rounding, &stream)?;

    let mut args = Vec::new();
    push_arg(&mut args, "--format", spec.name());
    push_arg(&mut args, "--grid-min", a.grid_min);
    push_arg(&mut args, "--grid-max", a.grid_max);
    push_arg(&mut args, "--points", a.points);
    push_arg(&mut args, "--rounding", rounding.as_str());
    push_arg(&mut args, "--seed", seed);
    push_out(&mut args, &a.out);
    let manifest = Manifest::new("error-profile", args, Some(seed));

    let rows = curve
        .iter()
        .map(|p| format!("{},{}", p.value, p.rel_error));
    let report = csv_report(&manifest, "value,rel_error", rows);

    Ok(Rendered {
        report: Some(report),
        out: a.out.clone(),
        ..Rendered::default()
    })
}

// --------------------------------------------------------------- sweep-be

fn parse_list<T, E: Into<anyhow::Error>>(
    raw: &str,
    what: &str,
    parse: impl Fn(&str) -> Result<T, E>,
) -> anyhow::Result<Vec<T>> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(Into::into))
        .collect::<anyhow::Result<_>>()?;
    if items.is_empty() {
        return Err(quant8::Error::Domain(format!("empty {what} list")).into());
    }
    Ok(items)
}

pub fn sweep_be(a: &SweepBeArgs) -> anyhow::Result<Rendered> {
    if a.size == 0 {
        return Err(quant8::Error::Domain("--size must be positive".into()).into());
    }
    if a.trials == 0 {
        return Err(quant8::Error::Domain("--trials must be positive".into()).into());
    }
    let rounding = Rounding::parse(&a.rounding)?;
    let formats = parse_list(&a.formats, "format", FormatSpec::parse)?;
    let grans = parse_list(&a.granularity, "granularity", GranularityPolicy::parse)?;
    let seed = resolve_seed(a.seed)?;

    // "t" fans out over --nu-list; anything else is a single setting.
    let settings: Vec<(Option<f64>, DistSpec)> = if a.dist.trim() == "t" {
        let nus = parse_list(&a.nu_list, "nu", |s| {
            s.parse::<f64>().map_err(|_| {
                quant8::Error::InvalidDistribution(format!("bad nu value `{s}`"))
            })
        })?;
        nus.into_iter()
            .map(|nu| {
                // Raw (non-standardized) tails: backward error is invariant
                // to the overall scale, and nu <= 2 stays usable this way.
                let spec: DistSpec = format!("t:nu={nu},std=false").parse()?;
                Ok((Some(nu), spec))
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        vec![(None, a.dist.parse::<DistSpec>()?)]
    };

    let items: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|ni| (0..a.trials).map(move |t| (ni, t)))
        .collect();

    type Keyed = ((usize, usize, usize, usize), String);
    let nested: Vec<Vec<Keyed>> = items
        .par_iter()
        .map(|&(ni, trial)| -> anyhow::Result<Vec<Keyed>> {
            let (nu, dist) = &settings[ni];
            let stream = RandomStream::new(seed)
                .substream(0x5BE0 + ni as u64)
                .substream(trial as u64);
            let dims = vec![a.size, a.size];
            let l = dist.fill(
                dims.clone(),
                vec![AxisRole::Channel, AxisRole::Contracting],
                &stream.substream(1),
            )?;
            let r = dist.fill(
                dims,
                vec![AxisRole::Contracting, AxisRole::Channel],
                &stream.substream(2),
            )?;
            let exact = reference_matmul(&l, &r)?;
            let absref = reference_abs_matmul(&l, &r)?;

            let mut out = Vec::with_capacity(formats.len() * grans.len());
            for (fi, format) in formats.iter().enumerate() {
                for (gi, gran) in grans.iter().enumerate() {
                    let plan =
                        MatmulPlan::both(QuantConfig::new(format.clone(), rounding, *gran));
                    let q = qmatmul(&l, &r, &plan, &stream.substream(3))?;
                    let be = backward_error_against(&exact, &absref, &q.out)?;
                    let report = ErrorReport {
                        seed: stream.seed(),
                        dist: dist.to_string(),
                        nu: *nu,
                        format: format.name().to_string(),
                        granularity: gran.as_str().to_string(),
                        rounding: rounding.as_str().to_string(),
                        max: be.summary.max,
                        median: be.summary.median,
                        mean: be.summary.mean,
                        p99: be.summary.p99,
                        masked_count: be.summary.masked_count,
                    };
                    out.push(((ni, fi, gi, trial), report.csv_row()));
                }
            }
            Ok(out)
        })
        .collect::<anyhow::Result<_>>()?;
    let mut rows: Vec<Keyed> = nested.into_iter().flatten().collect();
    rows.sort_by_key(|(key, _)| *key);

    let mut args = Vec::new();
    push_arg(&mut args, "--dist", a.dist.trim());
    if a.dist.trim() == "t" {
        let nus: Vec<String> = settings
            .iter()
            .filter_map(|(nu, _)| nu.map(|v| v.to_string()))
            .collect();
        push_arg(&mut args, "--nu-list", nus.join(","));
    }
    push_arg(&mut args, "--size", a.size);
    let format_names: Vec<&str> = formats.iter().map(|f| f.name()).collect();
    push_arg(&mut args, "--formats", format_names.join(","));
    let gran_names: Vec<&str> = grans.iter().map(|g| g.as_str()).collect();
    push_arg(&mut args, "--granularity", gran_names.join(","));
    push_arg(&mut args, "--rounding", rounding.as_str());
    push_arg(&mut args, "--trials", a.trials);
    push_arg(&mut args, "--seed", seed);
    push_out(&mut args, &a.out);
    let manifest = Manifest::new("sweep-be", args, Some(seed));

    let report = csv_report(
        &manifest,
        ErrorReport::csv_header(),
        rows.into_iter().map(|(_, row)| row),
    );

    Ok(Rendered {
        report: Some(report),
        out: a.out.clone(),
        ..Rendered::default()
    })
}

// ---------------------------------------------------------------- profile

#[derive(Debug, Serialize)]
struct MomentsOut {
    mean: f64,
    variance: f64,
    skew: f64,
    excess_kurtosis: f64,
    count: usize,
}

impl From<&Moments> for MomentsOut {
    fn from(m: &Moments) -> Self {
        MomentsOut {
            mean: m.mean,
            variance: m.variance,
            skew: m.skew,
            excess_kurtosis: m.excess_kurtosis,
            count: m.count,
        }
    }
}

pub fn profile(a: &ProfileArgs) -> anyhow::Result<Rendered> {
    let tensor = Tensor::load(&a.tensor_file)
        .with_context(|| format!("reading {}", a.tensor_file.display()))?;
    let stats = moments(&tensor)?;

    let mut args = Vec::new();
    push_arg(&mut args, "--tensor-file", a.tensor_file.display());
    push_out(&mut args, &a.out);
    let manifest = Manifest::new("profile", args, None);

    #[derive(Serialize)]
    struct Report<'a> {
        tensor_file: String,
        dims: &'a [usize],
        roles: Vec<&'static str>,
        moments: MomentsOut,
        manifest: &'a Manifest,
    }
    let report = Report {
        tensor_file: a.tensor_file.display().to_string(),
        dims: tensor.dims(),
        roles: tensor.roles().iter().map(|r| r.as_str()).collect(),
        moments: MomentsOut::from(&stats),
        manifest: &manifest,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');

    Ok(Rendered {
        report: Some(json.into_bytes()),
        out: a.out.clone(),
        ..Rendered::default()
    })
}

// --------------------------------------------------------------- quantize

pub fn quantize_cmd(a: &QuantizeArgs) -> anyhow::Result<Rendered> {
    let cfg = QuantConfig::new(
        FormatSpec::parse(&a.format)?,
        Rounding::parse(&a.rounding)?,
        GranularityPolicy::parse(&a.granularity)?,
    );
    let seed = resolve_seed(a.seed)?;
    let tensor = Tensor::load(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let q = quantize(&tensor, &cfg, &RandomStream::new(seed))?;
    let warnings = q.scales.warnings().to_vec();
    let decoded = dequantize(&q)?;
    let mut bytes = Vec::new();
    decoded.write_to(&mut bytes)?;

    let stdout = format!(
        "quantized {} values into {} scale groups ({})\n",
        tensor.len(),
        q.scales.num_groups(),
        cfg.label(),
    );

    Ok(Rendered {
        stdout,
        files: vec![(a.out.clone(), bytes)],
        warnings,
        ..Rendered::default()
    })
}

// ------------------------------------------------------------- train-demo

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    inputs: Option<usize>,
    hidden: Option<usize>,
    outputs: Option<usize>,
    batch: Option<usize>,
    steps: Option<usize>,
    eval_every: Option<usize>,
    eval_batch: Option<usize>,
    lr_head: Option<f64>,
    lr_features: Option<f64>,
    noise_cols: Option<usize>,
    noise_sigma: Option<f64>,
    accuracy_tol: Option<f64>,
    seed: Option<u64>,
    accum: Option<String>,
    quant: Option<FileQuant>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileQuant {
    rhs: Option<String>,
    lhs: Option<String>,
    gradient: Option<String>,
}

/// "off"/"none" disables the category; anything else is
/// format/granularity/rounding.
fn parse_quant_setting(raw: &str) -> anyhow::Result<Option<QuantConfig>> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "off" | "none" => Ok(None),
        _ => Ok(Some(QuantConfig::parse(raw)?)),
    }
}

fn quant_label(cfg: &Option<QuantConfig>) -> String {
    cfg.as_ref().map(|c| c.label()).unwrap_or_else(|| "off".into())
}

pub fn train_demo(a: &TrainDemoArgs) -> anyhow::Result<Rendered> {
    let file: FileConfig = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let file_quant = file.quant.unwrap_or_default();

    let mut cfg = TrainConfig::default();
    macro_rules! pick {
        ($field:ident) => {
            if let Some(v) = a.$field.or(file.$field) {
                cfg.$field = v;
            }
        };
    }
    pick!(inputs);
    pick!(hidden);
    pick!(outputs);
    pick!(batch);
    pick!(steps);
    pick!(eval_every);
    pick!(eval_batch);
    pick!(lr_head);
    pick!(lr_features);
    pick!(noise_cols);
    pick!(noise_sigma);
    pick!(accuracy_tol);
    cfg.seed = match a.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(cfg.seed),
    };
    if let Some(raw) = a.rhs.as_deref().or(file_quant.rhs.as_deref()) {
        cfg.quant.rhs = parse_quant_setting(raw)?;
    }
    if let Some(raw) = a.lhs.as_deref().or(file_quant.lhs.as_deref()) {
        cfg.quant.lhs = parse_quant_setting(raw)?;
    }
    if let Some(raw) = a.gradient.as_deref().or(file_quant.gradient.as_deref()) {
        cfg.quant.gradient = parse_quant_setting(raw)?;
    }
    if let Some(raw) = a.accum.as_deref().or(file.accum.as_deref()) {
        cfg.accum = AccumMode::parse(raw)?;
    }

    let outcome = train(&cfg)?;

    // The manifest records the fully resolved run — never the config file —
    // so regeneration is self-contained.
    let mut args = Vec::new();
    push_arg(&mut args, "--inputs", cfg.inputs);
    push_arg(&mut args, "--hidden", cfg.hidden);
    push_arg(&mut args, "--outputs", cfg.outputs);
    push_arg(&mut args, "--batch", cfg.batch);
    push_arg(&mut args, "--steps", cfg.steps);
    push_arg(&mut args, "--eval-every", cfg.eval_every);
    push_arg(&mut args, "--eval-batch", cfg.eval_batch);
    push_arg(&mut args, "--lr-head", cfg.lr_head);
    push_arg(&mut args, "--lr-features", cfg.lr_features);
    push_arg(&mut args, "--noise-cols", cfg.noise_cols);
    push_arg(&mut args, "--noise-sigma", cfg.noise_sigma);
    push_arg(&mut args, "--accuracy-tol", cfg.accuracy_tol);
    push_arg(&mut args, "--seed", cfg.seed);
    push_arg(&mut args, "--rhs", quant_label(&cfg.quant.rhs));
    push_arg(&mut args, "--lhs", quant_label(&cfg.quant.lhs));
    push_arg(&mut args, "--gradient", quant_label(&cfg.quant.gradient));
    push_arg(&mut args, "--accum", cfg.accum.as_str());
    push_out(&mut args, &a.out);
    let manifest = Manifest::new("train-demo", args, Some(cfg.seed));

    let eval_at: std::collections::HashMap<usize, f64> = outcome
        .eval_steps
        .iter()
        .copied()
        .zip(outcome.eval_accuracy.iter().copied())
        .collect();
    let rows = (0..=cfg.steps).map(|t| {
        let loss = outcome
            .train_loss
            .get(t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        let eval = eval_at.get(&t).map(|v| v.to_string()).unwrap_or_default();
        format!("{t},{loss},{eval}")
    });
    let report = csv_report(&manifest, "step,train_loss,eval_accuracy", rows);

    let mut stdout = format!("auc {}\n", outcome.auc);
    if let Some(last) = outcome.eval_accuracy.last() {
        stdout.push_str(&format!("final accuracy {last}\n"));
    }
    if outcome.diverged {
        stdout.push_str(&format!(
            "diverged: loss became non-finite at step {}\n",
            outcome.train_loss.len().saturating_sub(1),
        ));
    }

    Ok(Rendered {
        stdout,
        report: Some(report),
        out: a.out.clone(),
        ..Rendered::default()
    })
}

// -------------------------------------------------------------- recommend

pub fn recommend_cmd(a: &RecommendArgs) -> anyhow::Result<Rendered> {
    let tensor = Tensor::load(&a.tensor_file)
        .with_context(|| format!("reading {}", a.tensor_file.display()))?;
    let stats = moments(&tensor)?;
    let category = TensorCategory::parse(&a.category)?;
    let mut opts = RecommendOptions::default();
    if let Some(v) = a.kurtosis_moderate {
        opts.kurtosis_moderate = v;
    }
    if let Some(v) = a.kurtosis_extreme {
        opts.kurtosis_extreme = v;
    }
    opts.force_int8 = a.force_int8;
    let choice = recommend(&stats, category, &opts);

    let mut args = Vec::new();
    push_arg(&mut args, "--tensor-file", a.tensor_file.display());
    push_arg(&mut args, "--category", category.as_str());
    if opts.force_int8 {
        args.push("--force-int8".to_string());
    }
    push_arg(&mut args, "--kurtosis-moderate", opts.kurtosis_moderate);
    push_arg(&mut args, "--kurtosis-extreme", opts.kurtosis_extreme);
    push_out(&mut args, &a.out);
    let manifest = Manifest::new("recommend", args, None);

    #[derive(Serialize)]
    struct Choice {
        format: String,
        granularity: String,
        rounding: String,
        label: String,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        tensor_file: String,
        category: &'static str,
        moments: MomentsOut,
        kurtosis_moderate: f64,
        kurtosis_extreme: f64,
        force_int8: bool,
        recommendation: Choice,
        manifest: &'a Manifest,
    }
    let report = Report {
        tensor_file: a.tensor_file.display().to_string(),
        category: category.as_str(),
        moments: MomentsOut::from(&stats),
        kurtosis_moderate: opts.kurtosis_moderate,
        kurtosis_extreme: opts.kurtosis_extreme,
        force_int8: opts.force_int8,
        recommendation: Choice {
            format: choice.format.name().to_string(),
            granularity: choice.granularity.as_str().to_string(),
            rounding: choice.rounding.as_str().to_string(),
            label: choice.label(),
        },
        manifest: &manifest,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');

    Ok(Rendered {
        report: Some(json.into_bytes()),
        out: a.out.clone(),
        ..Rendered::default()
    })
}
