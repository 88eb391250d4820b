//! Toy mixed-precision training harness.
//!
//! A two-layer tanh network is trained on a synthetic teacher-student
//! regression task with every matrix product — forward and backward —
//! routed through [`qmatmul`], so quantization configs can be injected
//! per tensor category:
//!
//! - **rhs**: the weights-side operand of each product,
//! - **lhs**: the activations-side operand,
//! - **gradient**: upstream gradients, wherever they appear (both the
//!   weight-gradient and the input-gradient products).
//!
//! The task is built so that scale granularity *matters*. The student's
//! first layer starts at the teacher's (orthonormal) features and is frozen
//! by default, which makes the clean part of the problem realizable,
//! noiseless least squares — the baseline converges geometrically. A couple
//! of target columns receive large fresh noise every step, which pins the
//! upstream-gradient absmax at noise scale: a single tensor-wide int8 step
//! size then flushes the clean columns' shrinking gradients to zero and the
//! run stalls above the eval threshold, while per-column scales (or a wide
//! dynamic-range 8-bit float) keep converging. Optimizer state and updates
//! stay in `f64` throughout; only matmul operands are quantized.
//!
//! Evaluation runs in full precision on a fixed clean set; the reported
//! curve is accuracy (fraction of outputs within `accuracy_tol` of the
//! teacher) versus step, summarized by trapezoidal AUC on a normalized
//! step axis.

use crate::distributions::standard_normal;
use crate::error::{Error, Result};
use crate::qmatmul::{qmatmul, reference_matmul, AccumMode, MatmulPlan};
use crate::quantizer::QuantConfig;
use crate::rng::RandomStream;
use crate::tensor::{AxisRole, Tensor};

/// Per-category quantization toggles. `None` = that category runs in full
/// precision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryConfig {
    pub rhs: Option<QuantConfig>,
    pub lhs: Option<QuantConfig>,
    pub gradient: Option<QuantConfig>,
}

impl CategoryConfig {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn rhs_only(cfg: QuantConfig) -> Self {
        Self { rhs: Some(cfg), ..Self::default() }
    }

    pub fn lhs_only(cfg: QuantConfig) -> Self {
        Self { lhs: Some(cfg), ..Self::default() }
    }

    pub fn gradient_only(cfg: QuantConfig) -> Self {
        Self { gradient: Some(cfg), ..Self::default() }
    }

    pub fn is_off(&self) -> bool {
        self.rhs.is_none() && self.lhs.is_none() && self.gradient.is_none()
    }
}

/// Full description of one training run. `Default` is the tuned demo
/// configuration; override fields as needed.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub batch: usize,
    pub steps: usize,
    /// Evaluate every this many steps (step 0 and the final step always).
    pub eval_every: usize,
    pub eval_batch: usize,
    /// Learning rate for the output layer.
    pub lr_head: f64,
    /// Learning rate for the first layer. 0 (the default) freezes it at the
    /// teacher's features; the backward pass through it is still computed
    /// and quantized per config.
    pub lr_features: f64,
    /// How many trailing target columns receive fresh per-step noise.
    pub noise_cols: usize,
    pub noise_sigma: f64,
    /// An output counts as accurate when within this of the clean target.
    pub accuracy_tol: f64,
    pub seed: u64,
    pub quant: CategoryConfig,
    pub accum: AccumMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            inputs: 32,
            hidden: 32,
            outputs: 8,
            batch: 32,
            steps: 400,
            eval_every: 5,
            eval_batch: 256,
            lr_head: 1.0,
            lr_features: 0.0,
            noise_cols: 2,
            noise_sigma: 12.0,
            accuracy_tol: 0.04,
            seed: 1,
            quant: CategoryConfig::off(),
            accum: AccumMode::Wide,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("inputs", self.inputs),
            ("hidden", self.hidden),
            ("outputs", self.outputs),
            ("batch", self.batch),
            ("steps", self.steps),
            ("eval_every", self.eval_every),
            ("eval_batch", self.eval_batch),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be positive")));
            }
        }
        if self.hidden > self.inputs {
            return Err(Error::Domain(format!(
                "hidden ({}) must not exceed inputs ({}): the teacher's first \
                 layer is built from orthonormal columns",
                self.hidden, self.inputs
            )));
        }
        if self.noise_cols > self.outputs {
            return Err(Error::Domain(format!(
                "noise_cols ({}) exceeds outputs ({})",
                self.noise_cols, self.outputs
            )));
        }
        if !(self.accuracy_tol > 0.0 && self.accuracy_tol.is_finite()) {
            return Err(Error::Domain("accuracy_tol must be positive and finite".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Domain("noise_sigma must be non-negative and finite".into()));
        }
        if !(self.lr_head.is_finite() && self.lr_features.is_finite()) {
            return Err(Error::Domain("learning rates must be finite".into()));
        }
        Ok(())
    }
}

/// Everything a run produces. A run that hits a non-finite loss stops
/// updating, reports `diverged = true`, and scores 0 accuracy for the
/// remaining scheduled evaluations so AUCs stay comparable.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub eval_steps: Vec<usize>,
    pub eval_accuracy: Vec<f64>,
    /// Training loss per executed step (may be shorter than `steps` when
    /// the run diverges).
    pub train_loss: Vec<f64>,
    pub auc: f64,
    pub diverged: bool,
}

/// Trapezoidal area under a curve on a normalized `[0, 1]` axis: a constant
/// curve of value `c` scores exactly `c`.
pub fn auc(curve: &[f64]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::Domain(format!(
            "auc needs at least two points, got {}",
            curve.len()
        )));
    }
    let n = curve.len();
    let mut area = 0.0;
    for w in curve.windows(2) {
        area += 0.5 * (w[0] + w[1]);
    }
    Ok(area / (n - 1) as f64)
}

/// One backward pass worth of gradients, plus the loss they belong to.
#[derive(Debug, Clone)]
pub struct StepGradients {
    pub loss: f64,
    pub d_w1: Tensor,
    pub d_w2: Tensor,
}

// Substream tags: one reserved lane per independent random purpose.
const TAG_TEACHER_W1: u64 = 0xA1;
const TAG_TEACHER_W2: u64 = 0xA2;
const TAG_EVAL_X: u64 = 0xE0;
const TAG_STEP_X: u64 = 0xD0;
const TAG_STEP_NOISE: u64 = 0xD1;
const TAG_STEP_MM: u64 = 0xC0;

fn gaussian_matrix(
    rows: usize,
    cols: usize,
    sigma: f64,
    roles: [AxisRole; 2],
    stream: &RandomStream,
) -> Tensor {
    let data = (0..rows * cols)
        .map(|i| sigma * standard_normal(&mut stream.element(i as u64)))
        .collect();
    Tensor::matrix(rows, cols, roles, data).expect("shape matches data by construction")
}

/// Random matrix with orthonormal columns (modified Gram-Schmidt on a
/// Gaussian draw). Requires `cols <= rows`.
fn orthonormal_columns(rows: usize, cols: usize, stream: &RandomStream) -> Result<Tensor> {
    let mut t = gaussian_matrix(rows, cols, 1.0, [AxisRole::Other, AxisRole::Channel], stream);
    let data = t.data_mut();
    for j in 0..cols {
        for k in 0..j {
            let mut dot = 0.0;
            for i in 0..rows {
                dot += data[i * cols + k] * data[i * cols + j];
            }
            for i in 0..rows {
                data[i * cols + j] -= dot * data[i * cols + k];
            }
        }
        let norm = (0..rows).map(|i| data[i * cols + j].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::Domain(
                "degenerate random matrix while orthonormalizing; use another seed".into(),
            ));
        }
        for i in 0..rows {
            data[i * cols + j] /= norm;
        }
    }
    Ok(t)
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(
        t.dims().to_vec(),
        t.roles().to_vec(),
        t.data().iter().map(|&v| f(v)).collect(),
    )
    .expect("same shape as input")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.dims(), b.dims());
    Tensor::new(
        a.dims().to_vec(),
        a.roles().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
    .expect("same shape as inputs")
}

/// Full-precision forward pass: `tanh(x . w1) . w2`.
fn forward_exact(x: &Tensor, w1: &Tensor, w2: &Tensor) -> Result<Tensor> {
    let h = map(&reference_matmul(x, w1)?, f64::tanh);
    reference_matmul(&h, w2)
}

/// One forward/backward pass with per-category quantization. The loss is
/// mean squared error over the batch; gradients are the exact calculus of
/// the *unquantized* graph evaluated on quantized products (the usual
/// straight-through simulation).
pub fn loss_and_gradients(
    w1: &Tensor,
    w2: &Tensor,
    x: &Tensor,
    y: &Tensor,
    quant: &CategoryConfig,
    accum: AccumMode,
    stream: &RandomStream,
) -> Result<StepGradients> {
    let (b, o) = (y.dims()[0], y.dims()[1]);
    let scale = 2.0 / (b * o) as f64;

    let fwd = MatmulPlan { lhs: quant.lhs.clone(), rhs: quant.rhs.clone(), accum };
    let wgrad = MatmulPlan { lhs: quant.lhs.clone(), rhs: quant.gradient.clone(), accum };
    let igrad = MatmulPlan { lhs: quant.gradient.clone(), rhs: quant.rhs.clone(), accum };

    let x = x.clone().with_roles(vec![AxisRole::Example, AxisRole::Other])?;
    let w1 = w1.clone().with_roles(vec![AxisRole::Other, AxisRole::Channel])?;
    let w2 = w2.clone().with_roles(vec![AxisRole::Other, AxisRole::Channel])?;

    let a1 = qmatmul(&x, &w1, &fwd, &stream.substream(1))?.out;
    let h = map(&a1, f64::tanh);
    let h_in = h.clone().with_roles(vec![AxisRole::Example, AxisRole::Other])?;
    let p = qmatmul(&h_in, &w2, &fwd, &stream.substream(2))?.out;

    let loss = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&pp, &yy)| (pp - yy).powi(2))
        .sum::<f64>()
        / (b * o) as f64;

    // dL/dP, tagged so per-column (output-channel) scales are available to
    // the granularity machinery.
    let g = zip(&p, y, |pp, yy| scale * (pp - yy))
        .with_roles(vec![AxisRole::Example, AxisRole::Channel])?;

    // dW2 = H^T . G — upstream gradient on the rhs side.
    let d_w2 = qmatmul(&h.transposed()?, &g, &wgrad, &stream.substream(3))?.out;

    // dH = G . W2^T. Both operands' channel axes land on the contraction
    // here, and scales cannot vary along a contracted axis, so both are
    // re-tagged flat: this product degrades to tensor-level scaling by
    // construction, whatever the configured granularity.
    let g_flat = g.clone().with_roles(vec![AxisRole::Example, AxisRole::Other])?;
    let w2_t = w2.transposed()?.with_roles(vec![AxisRole::Other, AxisRole::Other])?;
    let d_h = qmatmul(&g_flat, &w2_t, &igrad, &stream.substream(4))?.out;

    // dA1 = dH * tanh'(A1), the upstream gradient for the first layer.
    let d_a1 = zip(&d_h, &h, |dh, hh| dh * (1.0 - hh * hh))
        .with_roles(vec![AxisRole::Example, AxisRole::Channel])?;

    // dW1 = X^T . dA1; the transposed activations' feature axis is a
    // channel axis from this product's point of view.
    let x_t = x.transposed()?.with_roles(vec![AxisRole::Channel, AxisRole::Other])?;
    let d_w1 = qmatmul(&x_t, &d_a1, &wgrad, &stream.substream(5))?.out;

    Ok(StepGradients { loss, d_w1, d_w2 })
}

/// Full-precision loss only, for finite-difference checks.
pub fn loss_only(w1: &Tensor, w2: &Tensor, x: &Tensor, y: &Tensor) -> Result<f64> {
    let p = forward_exact(x, w1, w2)?;
    let n = y.len() as f64;
    Ok(p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&pp, &yy)| (pp - yy).powi(2))
        .sum::<f64>()
        / n)
}

/// Run one training configuration to completion.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let run = RandomStream::new(cfg.seed);

    // Teacher: orthonormal first layer makes the tanh features isotropic
    // (inputs are standard normal), so the head problem is well conditioned.
    let w1_teacher =
        orthonormal_columns(cfg.inputs, cfg.hidden, &run.substream(TAG_TEACHER_W1))?;
    let w2_teacher = gaussian_matrix(
        cfg.hidden,
        cfg.outputs,
        1.0 / (cfg.hidden as f64).sqrt(),
        [AxisRole::Other, AxisRole::Channel],
        &run.substream(TAG_TEACHER_W2),
    );

    // Fixed clean evaluation set.
    let x_eval = gaussian_matrix(
        cfg.eval_batch,
        cfg.inputs,
        1.0,
        [AxisRole::Example, AxisRole::Other],
        &run.substream(TAG_EVAL_X),
    );
    let y_eval = forward_exact(&x_eval, &w1_teacher, &w2_teacher)?;

    // Student: teacher's features, zero head.
    let mut w1 = w1_teacher.clone();
    let mut w2 = Tensor::zeros(
        vec![cfg.hidden, cfg.outputs],
        vec![AxisRole::Other, AxisRole::Channel],
    )?;

    let schedule: Vec<usize> = (0..=cfg.steps)
        .filter(|t| t % cfg.eval_every == 0 || *t == cfg.steps)
        .collect();
    let mut eval_accuracy = Vec::with_capacity(schedule.len());
    let mut train_loss = Vec::with_capacity(cfg.steps);
    let mut diverged = false;

    for t in 0..=cfg.steps {
        if t % cfg.eval_every == 0 || t == cfg.steps {
            let p = forward_exact(&x_eval, &w1, &w2)?;
            let hits = p
                .data()
                .iter()
                .zip(y_eval.data())
                .filter(|(&pp, &yy)| (pp - yy).abs() <= cfg.accuracy_tol)
                .count();
            eval_accuracy.push(hits as f64 / y_eval.len() as f64);
        }
        if t == cfg.steps {
            break;
        }

        let x = gaussian_matrix(
            cfg.batch,
            cfg.inputs,
            1.0,
            [AxisRole::Example, AxisRole::Other],
            &run.substream(TAG_STEP_X).substream(t as u64),
        );
        let mut y = forward_exact(&x, &w1_teacher, &w2_teacher)?;
        if cfg.noise_cols > 0 {
            let noise = run.substream(TAG_STEP_NOISE).substream(t as u64);
            let first = cfg.outputs - cfg.noise_cols;
            let yd = y.data_mut();
            for row in 0..cfg.batch {
                for (k, col) in (first..cfg.outputs).enumerate() {
                    let mut rng = noise.element((row * cfg.noise_cols + k) as u64);
                    yd[row * cfg.outputs + col] += cfg.noise_sigma * standard_normal(&mut rng);
                }
            }
        }

        let step = loss_and_gradients(
            &w1,
            &w2,
            &x,
            &y,
            &cfg.quant,
            cfg.accum,
            &run.substream(TAG_STEP_MM).substream(t as u64),
        )?;
        train_loss.push(step.loss);
        if !step.loss.is_finite() {
            diverged = true;
            break;
        }

        let w2d = w2.data_mut();
        for (w, d) in w2d.iter_mut().zip(step.d_w2.data()) {
            *w -= cfg.lr_head * d;
        }
        if cfg.lr_features != 0.0 {
            let w1d = w1.data_mut();
            for (w, d) in w1d.iter_mut().zip(step.d_w1.data()) {
                *w -= cfg.lr_features * d;
            }
        }
    }

    // A diverged run scores zero for the evaluations it never reached.
    eval_accuracy.resize(schedule.len(), 0.0);
    let auc = auc(&eval_accuracy)?;

    Ok(TrainOutcome {
        eval_steps: schedule,
        eval_accuracy,
        train_loss,
        auc,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{FormatSpec, Rounding};
    use crate::quantizer::GranularityPolicy;

    #[test]
    fn auc_of_constant_curve_is_the_constant() {
        // exact in value up to f64 summation
        assert!((auc(&[0.7, 0.7, 0.7, 0.7]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(auc(&[0.25, 0.25, 0.25]).unwrap(), 0.25);
    }

    #[test]
    fn auc_of_unit_ramp_is_half() {
        assert_eq!(auc(&[0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn auc_rejects_single_point() {
        assert!(matches!(auc(&[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn teacher_columns_are_orthonormal() {
        let s = RandomStream::new(7);
        let q = orthonormal_columns(32, 32, &s).unwrap();
        let d = q.data();
        for a in 0..32 {
            for b in a..32 {
                let dot: f64 = (0..32).map(|i| d[i * 32 + a] * d[i * 32 + b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - want).abs() < 1e-10,
                    "columns {a},{b}: dot {dot}"
                );
            }
        }
    }

    #[test]
    fn baseline_run_is_deterministic() {
        let cfg = TrainConfig { steps: 40, ..TrainConfig::default() };
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.eval_accuracy, b.eval_accuracy);
        assert_eq!(a.auc, b.auc);
        assert!(!a.diverged);
    }

    /// With everything off, one step of the harness must agree bit-for-bit
    /// with gradients computed by plain nested loops.
    #[test]
    fn all_off_step_matches_hand_rolled_backprop() {
        let s = RandomStream::new(11);
        let (b, i, h, o) = (3, 4, 4, 2);
        let x = gaussian_matrix(b, i, 1.0, [AxisRole::Example, AxisRole::Other], &s.substream(1));
        let w1 = gaussian_matrix(i, h, 0.5, [AxisRole::Other, AxisRole::Channel], &s.substream(2));
        let w2 = gaussian_matrix(h, o, 0.5, [AxisRole::Other, AxisRole::Channel], &s.substream(3));
        let y = gaussian_matrix(b, o, 1.0, [AxisRole::Example, AxisRole::Channel], &s.substream(4));

        let got = loss_and_gradients(
            &w1, &w2, &x, &y,
            &CategoryConfig::off(),
            AccumMode::Wide,
            &s.substream(5),
        )
        .unwrap();

        // Hand-rolled reference, same loop orders as the reference matmul.
        let (xd, w1d, w2d, yd) = (x.data(), w1.data(), w2.data(), y.data());
        let mut a1 = vec![0.0; b * h];
        for bi in 0..b {
            for k in 0..i {
                let v = xd[bi * i + k];
                if v == 0.0 { continue; }
                for j in 0..h {
                    a1[bi * h + j] += v * w1d[k * h + j];
                }
            }
        }
        let hh: Vec<f64> = a1.iter().map(|v| v.tanh()).collect();
        let mut p = vec![0.0; b * o];
        for bi in 0..b {
            for k in 0..h {
                let v = hh[bi * h + k];
                if v == 0.0 { continue; }
                for j in 0..o {
                    p[bi * o + j] += v * w2d[k * o + j];
                }
            }
        }
        let loss = p.iter().zip(yd).map(|(pp, yy)| (pp - yy).powi(2)).sum::<f64>()
            / (b * o) as f64;
        assert_eq!(got.loss, loss);

        let g: Vec<f64> = p
            .iter()
            .zip(yd)
            .map(|(pp, yy)| 2.0 / (b * o) as f64 * (pp - yy))
            .collect();
        let mut d_w2 = vec![0.0; h * o];
        for r in 0..h {
            for k in 0..b {
                let v = hh[k * h + r];
                if v == 0.0 { continue; }
                for c in 0..o {
                    d_w2[r * o + c] += v * g[k * o + c];
                }
            }
        }
        assert_eq!(got.d_w2.data(), d_w2.as_slice());

        let mut d_h = vec![0.0; b * h];
        for bi in 0..b {
            for k in 0..o {
                let v = g[bi * o + k];
                if v == 0.0 { continue; }
                for j in 0..h {
                    d_h[bi * h + j] += v * w2d[j * o + k];
                }
            }
        }
        let d_a1: Vec<f64> = d_h
            .iter()
            .zip(&hh)
            .map(|(dh, hv)| dh * (1.0 - hv * hv))
            .collect();
        let mut d_w1 = vec![0.0; i * h];
        for r in 0..i {
            for k in 0..b {
                let v = xd[k * i + r];
                if v == 0.0 { continue; }
                for c in 0..h {
                    d_w1[r * h + c] += v * d_a1[k * h + c];
                }
            }
        }
        assert_eq!(got.d_w1.data(), d_w1.as_slice());
    }

    /// Analytic gradients against central finite differences on a tiny net.
    #[test]
    fn gradients_match_finite_differences() {
        let s = RandomStream::new(23);
        let (b, i, h, o) = (4, 5, 3, 2);
        let x = gaussian_matrix(b, i, 1.0, [AxisRole::Example, AxisRole::Other], &s.substream(1));
        let w1 = gaussian_matrix(i, h, 0.6, [AxisRole::Other, AxisRole::Channel], &s.substream(2));
        let w2 = gaussian_matrix(h, o, 0.6, [AxisRole::Other, AxisRole::Channel], &s.substream(3));
        let y = gaussian_matrix(b, o, 1.0, [AxisRole::Example, AxisRole::Channel], &s.substream(4));

        let grads = loss_and_gradients(
            &w1, &w2, &x, &y,
            &CategoryConfig::off(),
            AccumMode::Wide,
            &s.substream(5),
        )
        .unwrap();

        let eps = 1e-3;
        let check = |w: &Tensor, analytic: &Tensor, which: usize| {
            for idx in 0..w.len() {
                let mut plus = w.clone();
                plus.data_mut()[idx] += eps;
                let mut minus = w.clone();
                minus.data_mut()[idx] -= eps;
                let (lp, lm) = if which == 1 {
                    (loss_only(&plus, &w2, &x, &y).unwrap(), loss_only(&minus, &w2, &x, &y).unwrap())
                } else {
                    (loss_only(&w1, &plus, &x, &y).unwrap(), loss_only(&w1, &minus, &x, &y).unwrap())
                };
                let fd = (lp - lm) / (2.0 * eps);
                let a = analytic.data()[idx];
                let denom = a.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (a - fd).abs() / denom < 1e-5,
                    "w{which}[{idx}]: analytic {a} vs fd {fd}"
                );
            }
        };
        check(&w1, &grads.d_w1, 1);
        check(&w2, &grads.d_w2, 2);
    }

    #[test]
    fn divergent_run_is_reported_not_panicked() {
        let cfg = TrainConfig {
            steps: 200,
            lr_head: 1e6,
            ..TrainConfig::default()
        };
        let out = train(&cfg).unwrap();
        assert!(out.diverged);
        assert!(out.auc.is_finite());
        assert_eq!(out.eval_steps.len(), out.eval_accuracy.len());
        // the padded tail scores zero
        assert_eq!(*out.eval_accuracy.last().unwrap(), 0.0);
    }

    #[test]
    fn quantized_gradient_run_executes_and_is_deterministic() {
        let cfg = TrainConfig {
            steps: 30,
            quant: CategoryConfig::gradient_only(QuantConfig::new(
                FormatSpec::int8(),
                Rounding::Stochastic,
                GranularityPolicy::Channel,
            )),
            ..TrainConfig::default()
        };
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert!(!a.diverged);
    }

    #[test]
    fn rejects_hidden_wider_than_inputs() {
        let cfg = TrainConfig { inputs: 8, hidden: 16, ..TrainConfig::default() };
        assert!(matches!(train(&cfg), Err(Error::Domain(_))));
    }
}
