//! Machine-intelligence arm: a dropout-equipped feedforward classifier whose
//! inference runs N stochastic forward passes and summarizes them as a
//! Gaussian assessment (mean and population variance of the pass outputs).
//!
//! The network is a single hidden layer with tanh activation and a sigmoid
//! output; dropout is applied before both layers (input and hidden) using
//! inverted scaling, so the deterministic pass needs no rescaling.

use serde::{Deserialize, Serialize};

use crate::distributions::SeededRng;

/// Clamp applied to predicted probabilities before logarithms.
const PROB_EPS: f64 = 1e-12;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Stable 64-bit hash of a string, used to key per-item rng streams.
pub(crate) fn stable_hash(s: &str) -> u64 {
    fnv1a64(s.as_bytes())
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Dense L2-normalized hashed bag-of-words vector. The nonzero index list is
/// kept alongside the dense storage so the input-layer products only touch
/// occupied buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    nonzero: Vec<usize>,
}

impl FeatureVector {
    pub fn from_dense(values: Vec<f64>) -> Self {
        let nonzero = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        FeatureVector { values, nonzero }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nonzero(&self) -> &[usize] {
        &self.nonzero
    }

    pub fn l2_norm(&self) -> f64 {
        self.nonzero
            .iter()
            .map(|&i| self.values[i] * self.values[i])
            .sum::<f64>()
            .sqrt()
    }
}

/// Hashes text into a fixed-dimension L2-normalized count vector.
///
/// Tokenization lowercases and splits on non-alphanumeric characters; each
/// token is hashed with FNV-1a (64-bit), the hash is mixed with `seed`
/// through a SplitMix64 finalizer, and the bucket is the low bits of the
/// result. `dim` must be a power of two. Empty-token text maps to the zero
/// vector.
pub fn featurize(text: &str, dim: usize, seed: u64) -> FeatureVector {
    assert!(dim.is_power_of_two(), "feature dimension must be a power of two");
    let mut values = vec![0.0; dim];
    let lowered = text.to_lowercase();
    for token in lowered.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        let bucket = (mix64(fnv1a64(token.as_bytes()) ^ seed) & (dim as u64 - 1)) as usize;
        values[bucket] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
    FeatureVector::from_dense(values)
}

/// Weights of the classifier: `w1` is input-major (`dim` rows of `hidden`
/// columns) so sparse inputs stream through rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ClassifierParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        ClassifierParams {
            dim,
            hidden,
            w1: vec![0.0; dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Random init: `w1 ~ U(-1, 1)` (inputs are unit-norm, so preactivations
    /// stay O(1) regardless of `dim`), `w2 ~ U(-1/sqrt(H), 1/sqrt(H))`.
    pub fn init(dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = ClassifierParams::zeros(dim, hidden);
        for w in p.w1.iter_mut() {
            *w = 2.0 * rng.next_f64() - 1.0;
        }
        let s = 1.0 / (hidden as f64).sqrt();
        for w in p.w2.iter_mut() {
            *w = s * (2.0 * rng.next_f64() - 1.0);
        }
        p
    }

    fn axpy(&mut self, scale: f64, grad: &ClassifierParams) {
        for (w, g) in self.w1.iter_mut().zip(&grad.w1) {
            *w += scale * g;
        }
        for (w, g) in self.b1.iter_mut().zip(&grad.b1) {
            *w += scale * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grad.w2) {
            *w += scale * g;
        }
        self.b2 += scale * grad.b2;
    }
}

/// One Bernoulli keep-mask per dropout site (input and hidden layer).
/// Kept units are scaled by `1/(1-rate)` at application time.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    pub keep_input: Vec<bool>,
    pub keep_hidden: Vec<bool>,
    pub rate: f64,
}

impl DropoutMask {
    /// Draws the input mask first, then the hidden mask, each i.i.d.
    /// Bernoulli(1 - rate).
    pub fn draw(dim: usize, hidden: usize, rate: f64, rng: &mut SeededRng) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        let keep_input = (0..dim).map(|_| rng.next_f64() >= rate).collect();
        let keep_hidden = (0..hidden).map(|_| rng.next_f64() >= rate).collect();
        DropoutMask {
            keep_input,
            keep_hidden,
            rate,
        }
    }

    #[inline]
    fn scale(&self) -> f64 {
        1.0 / (1.0 - self.rate)
    }
}

/// Single forward pass. `mask = None` is the deterministic pass: nothing is
/// dropped and nothing is rescaled.
pub fn forward(params: &ClassifierParams, mask: Option<&DropoutMask>, x: &FeatureVector) -> f64 {
    assert_eq!(x.dim(), params.dim, "feature dimension mismatch");
    let h = params.hidden;
    let mut z1 = params.b1.clone();
    match mask {
        Some(m) => {
            let s = m.scale();
            for &i in x.nonzero() {
                if !m.keep_input[i] {
                    continue;
                }
                let xi = x.values()[i] * s;
                let row = &params.w1[i * h..(i + 1) * h];
                for (zj, wj) in z1.iter_mut().zip(row) {
                    *zj += xi * wj;
                }
            }
            let mut z2 = params.b2;
            for ((wj, zj), keep) in params.w2.iter().zip(&z1).zip(&m.keep_hidden) {
                if *keep {
                    z2 += wj * zj.tanh() * s;
                }
            }
            sigmoid(z2)
        }
        None => {
            for &i in x.nonzero() {
                let xi = x.values()[i];
                let row = &params.w1[i * h..(i + 1) * h];
                for (zj, wj) in z1.iter_mut().zip(row) {
                    *zj += xi * wj;
                }
            }
            let mut z2 = params.b2;
            for (wj, zj) in params.w2.iter().zip(&z1) {
                z2 += wj * zj.tanh();
            }
            sigmoid(z2)
        }
    }
}

/// Gaussian summary of the stochastic passes. The variance is the population
/// variance of the pass outputs (divide by the pass count, not count - 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineAssessment {
    pub mean: f64,
    pub variance: f64,
    pub passes: usize,
    pub pass_outputs: Vec<f64>,
}

impl MachineAssessment {
    pub fn from_pass_outputs(pass_outputs: Vec<f64>) -> Self {
        assert!(!pass_outputs.is_empty(), "at least one pass is required");
        // Identical passes (dropout rate 0) must yield variance exactly 0,
        // which sum-then-divide would miss by an ulp.
        let (mean, variance) = if pass_outputs.iter().all(|&p| p == pass_outputs[0]) {
            (pass_outputs[0], 0.0)
        } else {
            let n = pass_outputs.len() as f64;
            let mean = pass_outputs.iter().sum::<f64>() / n;
            let variance =
                pass_outputs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
            (mean, variance)
        };
        MachineAssessment {
            mean,
            variance,
            passes: pass_outputs.len(),
            pass_outputs,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Runs `n_passes` stochastic forward passes and summarizes them.
///
/// Pass `k` draws its mask from `rng.child(k)`, so the assessment is
/// independent of execution order and a parallel driver would produce the
/// identical result.
pub fn mc_predict(
    params: &ClassifierParams,
    x: &FeatureVector,
    n_passes: usize,
    rate: f64,
    rng: &SeededRng,
) -> MachineAssessment {
    assert!(n_passes >= 1, "n_passes must be at least 1");
    let outputs: Vec<f64> = (0..n_passes)
        .map(|k| {
            let mut pass_rng = rng.child(k as u64);
            let mask = DropoutMask::draw(params.dim, params.hidden, rate, &mut pass_rng);
            forward(params, Some(&mask), x)
        })
        .collect();
    MachineAssessment::from_pass_outputs(outputs)
}

/// Mean cross-entropy over the batch with dropout-active forwards, and its
/// gradient with respect to every classifier parameter (backpropagation
/// through the masked network). One mask per batch item.
pub fn machine_loss_grad(
    params: &ClassifierParams,
    batch: &[(&FeatureVector, u8)],
    masks: &[DropoutMask],
) -> (f64, ClassifierParams) {
    assert!(!batch.is_empty(), "batch must be nonempty");
    assert_eq!(batch.len(), masks.len(), "one mask per batch item");
    let h = params.hidden;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = ClassifierParams::zeros(params.dim, params.hidden);

    for ((x, y), mask) in batch.iter().zip(masks) {
        let s = mask.scale();
        let y = *y as f64;

        // Forward, retaining intermediates.
        let mut z1 = params.b1.clone();
        for &i in x.nonzero() {
            if !mask.keep_input[i] {
                continue;
            }
            let xi = x.values()[i] * s;
            let row = &params.w1[i * h..(i + 1) * h];
            for (zj, wj) in z1.iter_mut().zip(row) {
                *zj += xi * wj;
            }
        }
        let t: Vec<f64> = z1.iter().map(|z| z.tanh()).collect();
        let ht: Vec<f64> = (0..h)
            .map(|j| if mask.keep_hidden[j] { t[j] * s } else { 0.0 })
            .collect();
        let z2 = params.b2 + params.w2.iter().zip(&ht).map(|(w, a)| w * a).sum::<f64>();
        let p = sigmoid(z2);

        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss += -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());

        // Backward. dL/dz2 = p - y for the sigmoid + cross-entropy pair.
        let dz2 = p - y;
        for (gw, a) in grad.w2.iter_mut().zip(&ht) {
            *gw += dz2 * a;
        }
        grad.b2 += dz2;
        for (j, tj) in t.iter().enumerate() {
            if !mask.keep_hidden[j] {
                continue;
            }
            let dt = dz2 * params.w2[j] * s;
            let dz1 = dt * (1.0 - tj * tj);
            grad.b1[j] += dz1;
            for &i in x.nonzero() {
                if mask.keep_input[i] {
                    grad.w1[i * h + j] += dz1 * x.values()[i] * s;
                }
            }
        }
    }

    loss /= n;
    let inv = 1.0 / n;
    for g in grad.w1.iter_mut() {
        *g *= inv;
    }
    for g in grad.b1.iter_mut() {
        *g *= inv;
    }
    for g in grad.w2.iter_mut() {
        *g *= inv;
    }
    grad.b2 *= inv;
    (loss, grad)
}

/// Mini-batch SGD over the dataset with fresh masks per mini-batch item.
/// Shuffling and mask draws are both taken from per-epoch child streams, so
/// a fixed seed reproduces the final parameters bit for bit.
pub fn train_machine(
    mut params: ClassifierParams,
    data: &[(FeatureVector, u8)],
    epochs: usize,
    lr: f64,
    rate: f64,
    batch_size: usize,
    rng: &SeededRng,
) -> ClassifierParams {
    assert!(lr >= 0.0, "learning rate must be nonnegative");
    assert!(batch_size >= 1);
    if data.is_empty() {
        return params;
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..epochs {
        let mut epoch_rng = rng.child(epoch as u64);
        // Fisher–Yates with the epoch stream.
        for i in (1..order.len()).rev() {
            let j = epoch_rng.next_below(i + 1);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&FeatureVector, u8)> =
                chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let masks: Vec<DropoutMask> = chunk
                .iter()
                .map(|_| DropoutMask::draw(params.dim, params.hidden, rate, &mut epoch_rng))
                .collect();
            let (_, grad) = machine_loss_grad(&params, &batch, &masks);
            params.axpy(-lr, &grad);
        }
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn full_keep_mask(dim: usize, hidden: usize, rate: f64) -> DropoutMask {
        DropoutMask {
            keep_input: vec![true; dim],
            keep_hidden: vec![true; hidden],
            rate,
        }
    }

    #[test]
    fn featurize_empty_text_is_zero_vector() {
        let v = featurize("", 16, 0);
        assert_eq!(v.dim(), 16);
        assert!(v.values().iter().all(|&x| x == 0.0));
        assert!(v.nonzero().is_empty());
        let w = featurize("!!! ---", 16, 0);
        assert!(w.nonzero().is_empty());
    }

    /// Independent re-hash of the documented scheme: FNV-1a over the token
    /// bytes, xor with the seed, SplitMix64 finalizer, low bits as bucket.
    fn oracle_bucket(token: &str, dim: usize, seed: u64) -> usize {
        let mut h: u64 = 0xcbf29ce484222325;
        for &b in token.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        let mut z = h ^ seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z & (dim as u64 - 1)) as usize
    }

    #[test]
    fn featurize_hand_hashed_counts() {
        let dim = 8;
        let seed = 0;
        let ba = oracle_bucket("aa", dim, seed);
        let bb = oracle_bucket("bb", dim, seed);
        assert_ne!(ba, bb, "test tokens must not collide at this seed");
        let v = featurize("aa bb aa", dim, seed);
        assert_eq!(v.nonzero().len(), 2);
        // counts 2 and 1 before normalization -> ratio preserved after
        assert_relative_eq!(v.values()[ba], 2.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(v.values()[bb], 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(v.l2_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn featurize_is_deterministic() {
        let a = featurize("Some NEWS text, with punctuation!", 64, 9);
        let b = featurize("Some NEWS text, with punctuation!", 64, 9);
        assert_eq!(a, b);
    }

    #[test]
    fn forward_zero_params_is_half() {
        let p = ClassifierParams::zeros(4, 3);
        let x = featurize("hello world", 4, 0);
        assert_eq!(forward(&p, None, &x), 0.5);
    }

    #[test]
    fn forward_rate_zero_mask_equals_deterministic() {
        let mut rng = SeededRng::new(5, 0);
        let p = ClassifierParams::init(8, 4, &mut rng);
        let x = featurize("alpha beta gamma", 8, 1);
        let mask = DropoutMask::draw(8, 4, 0.0, &mut rng);
        assert_eq!(forward(&p, Some(&mask), &x), forward(&p, None, &x));
    }

    #[test]
    fn forward_tiny_net_hand_computed() {
        // D=2, H=2, x = (1, 0)
        let mut p = ClassifierParams::zeros(2, 2);
        p.w1 = vec![0.3, -0.2, 0.0, 0.0]; // row 0: (0.3, -0.2), row 1 unused
        p.b1 = vec![0.1, 0.05];
        p.w2 = vec![0.7, -0.4];
        p.b2 = 0.2;
        let x = FeatureVector::from_dense(vec![1.0, 0.0]);
        let h0 = (0.3f64 + 0.1).tanh();
        let h1 = (-0.2f64 + 0.05).tanh();
        let z2 = 0.2 + 0.7 * h0 - 0.4 * h1;
        let expected = 1.0 / (1.0 + (-z2).exp());
        assert_relative_eq!(forward(&p, None, &x), expected, epsilon = 1e-15);
    }

    #[test]
    fn assessment_moments_from_recorded_outputs() {
        let a = MachineAssessment::from_pass_outputs(vec![0.4, 0.6]);
        assert_relative_eq!(a.mean, 0.5, epsilon = 1e-15);
        assert_relative_eq!(a.variance, 0.01, epsilon = 1e-15);
        assert_eq!(a.passes, 2);
    }

    #[test]
    fn mc_predict_rate_zero_has_zero_variance() {
        let mut rng = SeededRng::new(11, 0);
        let p = ClassifierParams::init(16, 4, &mut rng);
        let x = featurize("steady prediction", 16, 0);
        let a = mc_predict(&p, &x, 12, 0.0, &rng);
        assert_eq!(a.variance, 0.0);
        assert_eq!(a.mean, forward(&p, None, &x));
    }

    #[test]
    fn mc_predict_moments_match_independent_recomputation() {
        let mut rng = SeededRng::new(3, 1);
        let p = ClassifierParams::init(8, 3, &mut rng);
        let x = featurize("noisy sample text here", 8, 2);
        let a = mc_predict(&p, &x, 8, 0.5, &rng.child(99));
        assert_eq!(a.pass_outputs.len(), 8);
        let mean = a.pass_outputs.iter().sum::<f64>() / 8.0;
        let var = a.pass_outputs.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / 8.0;
        assert!((a.mean - mean).abs() < 1e-12);
        assert!((a.variance - var).abs() < 1e-12);
    }

    #[test]
    fn loss_is_ln2_for_maximum_entropy() {
        let p = ClassifierParams::zeros(4, 2);
        let x0 = featurize("one item", 4, 0);
        let x1 = featurize("two item", 4, 0);
        let batch = vec![(&x0, 1u8), (&x1, 0u8)];
        let masks = vec![full_keep_mask(4, 2, 0.0), full_keep_mask(4, 2, 0.0)];
        let (loss, _) = machine_loss_grad(&p, &batch, &masks);
        assert_relative_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_grad_unchanged() {
        let mut rng = SeededRng::new(21, 0);
        let p = ClassifierParams::init(8, 3, &mut rng);
        let xs: Vec<FeatureVector> =
            ["a b c", "d e", "f g h i"].iter().map(|t| featurize(t, 8, 0)).collect();
        let batch: Vec<(&FeatureVector, u8)> = vec![(&xs[0], 1), (&xs[1], 0), (&xs[2], 1)];
        let masks: Vec<DropoutMask> =
            (0..3).map(|_| DropoutMask::draw(8, 3, 0.4, &mut rng)).collect();
        let (l1, g1) = machine_loss_grad(&p, &batch, &masks);

        let mut batch2 = batch.clone();
        batch2.extend(batch.iter().cloned());
        let mut masks2 = masks.clone();
        masks2.extend(masks.iter().cloned());
        let (l2, g2) = machine_loss_grad(&p, &batch2, &masks2);
        assert_relative_eq!(l1, l2, epsilon = 1e-12);
        for (a, b) in g1.w1.iter().zip(&g2.w1) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(g1.b2, g2.b2, epsilon = 1e-12);
    }

    /// Flattens params, runs central finite differences on the loss, and
    /// compares against the analytic gradient.
    fn grad_check(seed: u64) -> f64 {
        let dim = 4usize; // power of two; test uses D=3 worth of tokens
        let hidden = 2usize;
        let mut rng = SeededRng::new(seed, 0);
        let p = ClassifierParams::init(dim, hidden, &mut rng);
        let xs: Vec<FeatureVector> = ["aa bb", "cc", "aa cc dd", "bb dd"]
            .iter()
            .map(|t| featurize(t, dim, 7))
            .collect();
        let labels = [1u8, 0, 1, 0];
        let batch: Vec<(&FeatureVector, u8)> =
            xs.iter().zip(labels.iter()).map(|(x, &y)| (x, y)).collect();
        let masks: Vec<DropoutMask> = (0..batch.len())
            .map(|_| DropoutMask::draw(dim, hidden, 0.3, &mut rng))
            .collect();

        let (_, grad) = machine_loss_grad(&p, &batch, &masks);
        let flatten = |p: &ClassifierParams| -> Vec<f64> {
            let mut v = p.w1.clone();
            v.extend(&p.b1);
            v.extend(&p.w2);
            v.push(p.b2);
            v
        };
        let unflatten = |v: &[f64]| -> ClassifierParams {
            let mut p = ClassifierParams::zeros(dim, hidden);
            let nw1 = dim * hidden;
            p.w1.copy_from_slice(&v[..nw1]);
            p.b1.copy_from_slice(&v[nw1..nw1 + hidden]);
            p.w2.copy_from_slice(&v[nw1 + hidden..nw1 + 2 * hidden]);
            p.b2 = v[nw1 + 2 * hidden];
            p
        };
        let theta = flatten(&p);
        let analytic = flatten(&grad);
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            tp[k] += h;
            let (lp, _) = machine_loss_grad(&unflatten(&tp), &batch, &masks);
            tp[k] -= 2.0 * h;
            let (lm, _) = machine_loss_grad(&unflatten(&tp), &batch, &masks);
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(analytic[k].abs()).max(1e-8);
            max_rel = max_rel.max((fd - analytic[k]).abs() / denom);
        }
        max_rel
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let err = grad_check(seed);
            assert!(err <= 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    fn separable_toy_set(dim: usize) -> Vec<(FeatureVector, u8)> {
        let mut data = Vec::new();
        for k in 0..20 {
            data.push((featurize(&format!("hoax rumor spam{k}"), dim, 3), 1));
            data.push((featurize(&format!("verified report fact{k}"), dim, 3), 0));
        }
        data
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut rng = SeededRng::new(2, 0);
        let p = ClassifierParams::init(32, 4, &mut rng);
        let data = separable_toy_set(32);
        let q = train_machine(p.clone(), &data, 3, 0.0, 0.5, 8, &rng);
        assert_eq!(p, q);
    }

    #[test]
    fn trains_separable_set_to_perfect_accuracy() {
        let dim = 64;
        let mut rng = SeededRng::new(4, 0);
        let p = ClassifierParams::init(dim, 8, &mut rng);
        let data = separable_toy_set(dim);
        let trained = train_machine(p, &data, 200, 0.5, 0.2, 8, &rng.child(1));
        let mut correct = 0;
        let mut loss = 0.0;
        for (x, y) in &data {
            let prob = forward(&trained, None, x);
            if (prob > 0.5) == (*y == 1) {
                correct += 1;
            }
            let pc = prob.clamp(PROB_EPS, 1.0 - PROB_EPS);
            loss += -((*y as f64) * pc.ln() + (1.0 - *y as f64) * (1.0 - pc).ln());
        }
        loss /= data.len() as f64;
        assert_eq!(correct, data.len(), "training accuracy must reach 1.0");
        assert!(loss < 0.1, "training loss {loss} must fall below 0.1");
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let dim = 32;
        let data = separable_toy_set(dim);
        let run = || {
            let mut rng = SeededRng::new(8, 0);
            let p = ClassifierParams::init(dim, 4, &mut rng);
            train_machine(p, &data, 10, 0.1, 0.5, 8, &rng.child(1))
        };
        assert_eq!(run(), run());
    }

    proptest! {
        /// Recorded pass outputs reproduce mean/variance exactly, and the
        /// population variance of values in [0,1] never exceeds 1/4.
        #[test]
        fn assessment_moments_recompute_and_bound(outputs in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let a = MachineAssessment::from_pass_outputs(outputs.clone());
            let n = outputs.len() as f64;
            let mean = outputs.iter().sum::<f64>() / n;
            let var = outputs.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / n;
            prop_assert!((a.mean - mean).abs() < 1e-12);
            prop_assert!((a.variance - var).abs() < 1e-12);
            prop_assert!(a.variance >= 0.0 && a.variance <= 0.25 + 1e-12);
        }
    }
}
