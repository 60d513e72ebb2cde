//! Fusion of the machine Gaussian and the crowd Beta by likelihood
//! maximization: draw a pool of samples from both assessments, then train a
//! two-layer encoder that maps the four summary statistics
//! `[mean_machine, std_machine, mean_crowd, std_crowd]` to the parameters
//! `(mu, log sigma)` of one fused distribution that explains the pooled
//! samples. The fused mean is the final veracity score, the fused standard
//! deviation its reported reliability.
//!
//! The obvious alternative — pick the fused distribution by minimizing a
//! summed divergence against the two sources — needs a well-defined
//! cross-family divergence, which a Gaussian/Beta pair does not have.
//! Fitting pooled samples sidesteps that entirely, which is why it is the
//! approach implemented here and the divergence route is not.
//!
//! The fused distribution is either a Gaussian or a uniform whose interval
//! `[mu - sqrt(3) sigma, mu + sqrt(3) sigma]` matches the Gaussian's mean
//! and variance, so both variants share one encoder head. Training the
//! uniform form uses a smoothed density (quadratic log-density penalty
//! outside the interval, scaled by sigma) because the hard uniform has zero
//! gradient; reported NLLs use the hard density.

use serde::{Deserialize, Serialize};

use crate::crowd::CrowdAssessment;
use crate::distributions::{clamp_unit, BetaDist, GaussianDist, SeededRng};
use crate::machine::MachineAssessment;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Floor applied to sigma wherever a log-density is evaluated.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Standard deviation of the uninformative Beta(1, 1): sqrt(1/12).
pub const UNINFORMATIVE_STD: f64 = 0.288_675_134_594_812_9;

/// Shape of the fused distribution emitted by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusedForm {
    Gaussian,
    Uniform,
}

/// Two-layer encoder weights: `v_h` is `hidden x 4` row-major, `v_o` is
/// `2 x hidden` row-major (rows: mu, log sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionEncoderParams {
    pub hidden: usize,
    pub v_h: Vec<f64>,
    pub b_h: Vec<f64>,
    pub v_o: Vec<f64>,
    pub b_o: [f64; 2],
}

impl FusionEncoderParams {
    pub fn zeros(hidden: usize) -> Self {
        FusionEncoderParams {
            hidden,
            v_h: vec![0.0; hidden * 4],
            b_h: vec![0.0; hidden],
            v_o: vec![0.0; 2 * hidden],
            b_o: [0.0; 2],
        }
    }

    pub fn init(hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = FusionEncoderParams::zeros(hidden);
        for w in p.v_h.iter_mut() {
            *w = rng.next_f64() - 0.5;
        }
        let s = 1.0 / (hidden as f64).sqrt();
        for w in p.v_o.iter_mut() {
            *w = s * (2.0 * rng.next_f64() - 1.0);
        }
        p
    }

    fn axpy(&mut self, scale: f64, grad: &FusionEncoderParams) {
        for (w, g) in self.v_h.iter_mut().zip(&grad.v_h) {
            *w += scale * g;
        }
        for (w, g) in self.b_h.iter_mut().zip(&grad.b_h) {
            *w += scale * g;
        }
        for (w, g) in self.v_o.iter_mut().zip(&grad.v_o) {
            *w += scale * g;
        }
        self.b_o[0] += scale * grad.b_o[0];
        self.b_o[1] += scale * grad.b_o[1];
    }
}

/// The four summary statistics fed to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub a: [f64; 4],
}

/// Builds the encoder input from a machine assessment and, when available,
/// a crowd assessment. A missing crowd contributes the uninformative
/// Beta(1, 1) statistics `(0.5, sqrt(1/12))` so the fused prediction
/// degrades gracefully toward the machine arm.
pub fn fusion_input(machine: &MachineAssessment, crowd: Option<&CrowdAssessment>) -> FusionInput {
    let (e_crowd, std_crowd) = match crowd {
        Some(c) => {
            let (_, var) = c.beta.moments();
            (c.e_crowd, var.sqrt())
        }
        None => (0.5, UNINFORMATIVE_STD),
    };
    FusionInput {
        a: [machine.mean, machine.std_dev(), e_crowd, std_crowd],
    }
}

/// Parameters of the fused distribution. `sigma = exp(log_sigma)` is
/// positive by construction; the uniform form reads them as the
/// moment-matched interval `[mu - sqrt(3) sigma, mu + sqrt(3) sigma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedParams {
    pub mu: f64,
    pub log_sigma: f64,
    pub form: FusedForm,
}

impl FusedParams {
    /// Floored standard deviation used by every density evaluation.
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp().max(SIGMA_FLOOR)
    }

    /// Mean of the fused distribution; the interval midpoint for the
    /// uniform form, which is again `mu`.
    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn uniform_interval(&self) -> (f64, f64) {
        let half = SQRT_3 * self.sigma();
        (self.mu - half, self.mu + half)
    }
}

/// Equal-size sample pools drawn from the two assessments, clamped into
/// `[delta, 1 - delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    pub gaussian_samples: Vec<f64>,
    pub beta_samples: Vec<f64>,
}

impl SamplePool {
    pub fn len(&self) -> usize {
        self.gaussian_samples.len() + self.beta_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.gaussian_samples.iter().chain(self.beta_samples.iter())
    }
}

/// Draws `t_per_side` samples from the machine Gaussian and the crowd Beta
/// (which may be the Beta(1, 1) fallback), clamping every sample into
/// `[delta, 1 - delta]`. Gaussian samples are drawn first.
pub fn draw_pool(
    machine: &MachineAssessment,
    crowd_beta: &BetaDist,
    t_per_side: usize,
    delta: f64,
    rng: &mut SeededRng,
) -> SamplePool {
    assert!(t_per_side >= 1, "at least one sample per side");
    let gaussian = GaussianDist {
        mean: machine.mean,
        variance: machine.variance,
    };
    let gaussian_samples = gaussian
        .sample(rng, t_per_side)
        .into_iter()
        .map(|s| clamp_unit(s, delta))
        .collect();
    let beta_samples = crowd_beta
        .sample(rng, t_per_side)
        .into_iter()
        .map(|s| clamp_unit(s, delta))
        .collect();
    SamplePool {
        gaussian_samples,
        beta_samples,
    }
}

/// Deterministic two-layer map from summary statistics to fused parameters.
pub fn encode(params: &FusionEncoderParams, input: &FusionInput, form: FusedForm) -> FusedParams {
    let (_, mu, log_sigma) = encode_with_hidden(params, input);
    FusedParams { mu, log_sigma, form }
}

fn encode_with_hidden(params: &FusionEncoderParams, input: &FusionInput) -> (Vec<f64>, f64, f64) {
    let h = params.hidden;
    let mut hidden = vec![0.0; h];
    for (j, hj) in hidden.iter_mut().enumerate() {
        let mut z = params.b_h[j];
        let row = &params.v_h[j * 4..(j + 1) * 4];
        for (w, a) in row.iter().zip(&input.a) {
            z += w * a;
        }
        *hj = z.tanh();
    }
    let mut out = params.b_o;
    for (k, o) in out.iter_mut().enumerate() {
        let row = &params.v_o[k * h..(k + 1) * h];
        for (w, hv) in row.iter().zip(&hidden) {
            *o += w * hv;
        }
    }
    (hidden, out[0], out[1])
}

/// Per-sample negative log-density of the *training* objective, together
/// with its derivatives with respect to `mu` and `log_sigma`. The uniform
/// form is the smoothed variant: flat log-density inside the interval and a
/// `((s - mu)/sigma)^2 / 2` penalty outside it.
fn nll_terms(fused: &FusedParams, s: f64) -> (f64, f64, f64) {
    let sigma = fused.sigma();
    // When the floor is active, sigma no longer responds to log_sigma.
    let dsigma_dlog = if fused.log_sigma.exp() < SIGMA_FLOOR { 0.0 } else { sigma };
    let z = (s - fused.mu) / sigma;
    match fused.form {
        FusedForm::Gaussian => {
            let nll = 0.5 * LN_2PI + sigma.ln() + 0.5 * z * z;
            let d_mu = -z / sigma;
            let d_sigma = 1.0 / sigma - z * z / sigma;
            (nll, d_mu, d_sigma * dsigma_dlog)
        }
        FusedForm::Uniform => {
            let base = (2.0 * SQRT_3 * sigma).ln();
            let half = SQRT_3 * sigma;
            if (s - fused.mu).abs() <= half {
                let d_sigma = 1.0 / sigma;
                (base, 0.0, d_sigma * dsigma_dlog)
            } else {
                let nll = base + 0.5 * z * z;
                let d_mu = -z / sigma;
                let d_sigma = 1.0 / sigma - z * z / sigma;
                (nll, d_mu, d_sigma * dsigma_dlog)
            }
        }
    }
}

/// Negative log-likelihood of the pool under the fused parameters, summed
/// over all samples. This is the training objective: the uniform form uses
/// the smoothed density so that it stays differentiable.
pub fn fused_nll(fused: &FusedParams, pool: &SamplePool) -> f64 {
    assert!(!pool.is_empty(), "pool must be nonempty");
    pool.iter().map(|&s| nll_terms(fused, s).0).sum()
}

/// Negative log-likelihood under the *hard* density: identical to
/// [`fused_nll`] for the Gaussian form, and infinite for a uniform whose
/// interval misses any sample. This is the reporting variant.
pub fn fused_nll_hard(fused: &FusedParams, pool: &SamplePool) -> f64 {
    assert!(!pool.is_empty(), "pool must be nonempty");
    match fused.form {
        FusedForm::Gaussian => fused_nll(fused, pool),
        FusedForm::Uniform => {
            let (lo, hi) = fused.uniform_interval();
            let width = hi - lo;
            let mut nll = 0.0;
            for &s in pool.iter() {
                if s < lo || s > hi {
                    return f64::INFINITY;
                }
                nll += width.ln();
            }
            nll
        }
    }
}

fn pool_moments(pool: &SamplePool) -> (f64, f64) {
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let var = pool.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Analytic maximizer of the pooled likelihood for a Gaussian: sample mean
/// and population standard deviation (floored for evaluability on
/// degenerate pools). Serves as the independent optimum the encoder is
/// measured against.
pub fn gaussian_mle_oracle(pool: &SamplePool) -> FusedParams {
    assert!(!pool.is_empty(), "pool must be nonempty");
    let (mean, var) = pool_moments(pool);
    FusedParams {
        mu: mean,
        log_sigma: var.sqrt().max(SIGMA_FLOOR).ln(),
        form: FusedForm::Gaussian,
    }
}

/// Analytic maximizer for a hard uniform: the tightest covering interval.
pub fn uniform_mle_oracle(pool: &SamplePool) -> (f64, f64) {
    assert!(!pool.is_empty(), "pool must be nonempty");
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in pool.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

/// Mean per-instance pooled NLL over the dataset and its gradient with
/// respect to every encoder parameter (backpropagation through the encoder
/// and the fused log-density). Accumulation order is fixed, so results are
/// deterministic.
pub fn fusion_loss_grad(
    params: &FusionEncoderParams,
    dataset: &[(FusionInput, SamplePool)],
    form: FusedForm,
) -> (f64, FusionEncoderParams) {
    assert!(!dataset.is_empty(), "dataset must be nonempty");
    let h = params.hidden;
    let n = dataset.len() as f64;
    let mut loss = 0.0;
    let mut grad = FusionEncoderParams::zeros(h);

    for (input, pool) in dataset {
        let (hidden, mu, log_sigma) = encode_with_hidden(params, input);
        let fused = FusedParams { mu, log_sigma, form };
        let mut d_mu = 0.0;
        let mut d_log_sigma = 0.0;
        for &s in pool.iter() {
            let (nll, dm, dl) = nll_terms(&fused, s);
            loss += nll;
            d_mu += dm;
            d_log_sigma += dl;
        }
        let d_out = [d_mu, d_log_sigma];
        let mut d_hidden = vec![0.0; h];
        for (k, dk) in d_out.iter().enumerate() {
            for j in 0..h {
                grad.v_o[k * h + j] += dk * hidden[j];
                d_hidden[j] += dk * params.v_o[k * h + j];
            }
            grad.b_o[k] += dk;
        }
        for j in 0..h {
            let dz = d_hidden[j] * (1.0 - hidden[j] * hidden[j]);
            grad.b_h[j] += dz;
            for (i, a) in input.a.iter().enumerate() {
                grad.v_h[j * 4 + i] += dz * a;
            }
        }
    }

    loss /= n;
    let inv = 1.0 / n;
    for g in grad.v_h.iter_mut() {
        *g *= inv;
    }
    for g in grad.b_h.iter_mut() {
        *g *= inv;
    }
    for g in grad.v_o.iter_mut() {
        *g *= inv;
    }
    grad.b_o[0] *= inv;
    grad.b_o[1] *= inv;
    (loss, grad)
}

/// Norm cap on each descent step; the pooled NLL's curvature grows like
/// `1/sigma^2`, so raw steps explode once the encoder tightens sigma.
const GRAD_CLIP: f64 = 1.0;

/// Full-batch gradient descent on the mean per-instance pooled NLL, with
/// norm-clipped steps and a harmonic learning-rate decay so late steps
/// settle instead of oscillating.
pub fn train_fusion(
    mut params: FusionEncoderParams,
    dataset: &[(FusionInput, SamplePool)],
    form: FusedForm,
    epochs: usize,
    lr: f64,
) -> FusionEncoderParams {
    assert!(lr >= 0.0, "learning rate must be nonnegative");
    if dataset.is_empty() {
        return params;
    }
    let tau = (epochs as f64 / 10.0).max(1.0);
    for t in 0..epochs {
        let (_, grad) = fusion_loss_grad(&params, dataset, form);
        let norm = grad_norm(&grad);
        let scale = if norm > GRAD_CLIP { GRAD_CLIP / norm } else { 1.0 };
        let lr_t = lr / (1.0 + t as f64 / tau);
        params.axpy(-lr_t * scale, &grad);
    }
    params
}

fn grad_norm(g: &FusionEncoderParams) -> f64 {
    let mut acc = 0.0;
    for w in g.v_h.iter().chain(&g.b_h).chain(&g.v_o).chain(&g.b_o) {
        acc += w * w;
    }
    acc.sqrt()
}

/// Final veracity verdict. The score is the fused mean; a score strictly
/// above 0.5 is labeled fake (0.5 exactly resolves to true); the reported
/// reliability is the fused standard deviation, lower meaning more
/// reliable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub y_hat: f64,
    pub is_fake: bool,
    pub reliability: f64,
}

pub fn predict(fused: &FusedParams) -> Prediction {
    let y_hat = fused.mean();
    Prediction {
        y_hat,
        is_fake: y_hat > 0.5,
        reliability: fused.sigma(),
    }
}
