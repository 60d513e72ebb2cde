//! Orchestration: three-stage training (classifier weights, user
//! reliabilities, fusion encoder), metric computation, ablation arms, and
//! the time-windowed dynamic evaluation.
//!
//! Every random choice is taken from a child stream of the master seed at a
//! fixed offset, so a seed plus a config reproduces every report byte for
//! byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{ActivityMode, Config};
use crate::crowd::{
    self, adjust_reliability, assess, compute_difficulty, init_reliability, CommentIndex,
    CommentRecord, CrowdAssessment, Reliabilities,
};
use crate::dataio::NewsRecord;
use crate::distributions::SeededRng;
use crate::error::{RahiError, Result};
use crate::fusion::{
    self, draw_pool, encode, fusion_input, fusion_loss_grad, train_fusion, FusedParams,
    FusionEncoderParams, FusionInput, Prediction, SamplePool,
};
use crate::machine::{
    featurize, mc_predict, train_machine, ClassifierParams, FeatureVector, MachineAssessment,
};

// Fixed stream offsets per consumer; parallel or reordered execution cannot
// change results because nothing shares a stream.
const STREAM_SPLIT: u64 = 1;
const STREAM_MACHINE_INIT: u64 = 2;
const STREAM_MACHINE_TRAIN: u64 = 3;
const STREAM_FUSION_INIT: u64 = 4;
const STREAM_FUSION_POOLS: u64 = 5;
const STREAM_EVAL_MACHINE: u64 = 6;
const STREAM_VALID: u64 = 7;

pub const ARM_HYBRID: &str = "hybrid";
pub const ARM_MACHINE_ONLY: &str = "machine_only";
pub const ARM_CROWD_ONLY: &str = "crowd_only";
pub const ARM_NO_ADJUSTMENT: &str = "no_adjustment";

/// Stratified train/valid/test split plus the comment index shared by all
/// splits. `commenter_counts` keeps the pre-activity-filter totals per news
/// for the count-in-denominator mode.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Vec<NewsRecord>,
    pub valid: Vec<NewsRecord>,
    pub test: Vec<NewsRecord>,
    pub comments: CommentIndex,
    pub commenter_counts: BTreeMap<String, usize>,
}

impl SplitDataset {
    /// Splits news stratified by label with a seeded shuffle: each class is
    /// shuffled independently and cut at the configured ratios.
    pub fn split(
        news: Vec<NewsRecord>,
        comments: CommentIndex,
        commenter_counts: BTreeMap<String, usize>,
        cfg: &Config,
        seed: u64,
    ) -> SplitDataset {
        let mut rng = SeededRng::new(seed, STREAM_SPLIT);
        let mut fakes: Vec<NewsRecord> = Vec::new();
        let mut trues: Vec<NewsRecord> = Vec::new();
        for n in news {
            if n.label == 1 {
                fakes.push(n);
            } else {
                trues.push(n);
            }
        }
        let mut train = Vec::new();
        let mut valid = Vec::new();
        let mut test = Vec::new();
        for class in [&mut fakes, &mut trues] {
            for i in (1..class.len()).rev() {
                let j = rng.next_below(i + 1);
                class.swap(i, j);
            }
            let n = class.len();
            let n_train = (cfg.split_train * n as f64).round() as usize;
            let n_valid = (((cfg.split_train + cfg.split_valid) * n as f64).round() as usize)
                .max(n_train)
                .min(n);
            for (i, rec) in class.drain(..).enumerate() {
                if i < n_train {
                    train.push(rec);
                } else if i < n_valid {
                    valid.push(rec);
                } else {
                    test.push(rec);
                }
            }
        }
        SplitDataset {
            train,
            valid,
            test,
            comments,
            commenter_counts,
        }
    }

    /// Commenter count backing the Beta strength of one news item:
    /// the active count, or the pre-filter total in count-in-denominator
    /// mode.
    pub fn n_users_static(&self, news_id: &str, active: usize, mode: ActivityMode) -> usize {
        match mode {
            ActivityMode::Exclude => active,
            ActivityMode::CountInDenominator => {
                *self.commenter_counts.get(news_id).unwrap_or(&active)
            }
        }
    }
}

/// The three learned parameter groups plus the seed they were derived from
/// (evaluation streams and feature hashing reuse it so scoring is stable
/// across process boundaries).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classifier: ClassifierParams,
    pub reliabilities: Reliabilities,
    pub fusion: FusionEncoderParams,
    pub seed: u64,
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub machine_loss: f64,
    pub crowd_loss: f64,
    pub fusion_nll: f64,
    pub valid_accuracy: Option<f64>,
}

/// Trains all three stages: per epoch the classifier takes one pass of
/// mini-batch SGD, the reliabilities one full-batch step (unless
/// adjustment is disabled), and the fusion encoder a round of inner steps
/// on pools re-drawn from fresh assessments. Early stopping restores the
/// parameters of the best validation epoch.
pub fn train_all(data: &SplitDataset, cfg: &Config, seed: u64) -> Result<(TrainedModel, Vec<EpochLog>)> {
    train_all_opts(data, cfg, seed, true)
}

/// [`train_all`] with the supervised reliability adjustment optionally
/// disabled (the "no adjustment" ablation arm).
pub fn train_all_opts(
    data: &SplitDataset,
    cfg: &Config,
    seed: u64,
    adjust: bool,
) -> Result<(TrainedModel, Vec<EpochLog>)> {
    if data.train.is_empty() {
        return Err(RahiError::Invalid("training split is empty".into()));
    }

    let train_feats: Vec<(FeatureVector, u8)> = data
        .train
        .iter()
        .map(|n| (featurize(&n.text, cfg.feature_dim, seed), n.label))
        .collect();
    let valid_feats: Vec<FeatureVector> = data
        .valid
        .iter()
        .map(|n| featurize(&n.text, cfg.feature_dim, seed))
        .collect();

    let train_labels: Vec<(String, u8)> =
        data.train.iter().map(|n| (n.id.clone(), n.label)).collect();
    let label_map: BTreeMap<String, u8> = train_labels.iter().cloned().collect();

    // Difficulties come from the training split only and stay frozen while
    // the reliabilities move.
    let difficulties = compute_difficulty(&data.comments, &label_map);
    let mut rels = init_reliability(&data.comments, &label_map, &difficulties, cfg.c_min);

    let mut classifier = ClassifierParams::init(
        cfg.feature_dim,
        cfg.hidden,
        &mut SeededRng::new(seed, STREAM_MACHINE_INIT),
    );
    let mut fusion_params = FusionEncoderParams::init(
        cfg.fusion_hidden,
        &mut SeededRng::new(seed, STREAM_FUSION_INIT),
    );

    let machine_stream = SeededRng::new(seed, STREAM_MACHINE_TRAIN);
    let pool_stream = SeededRng::new(seed, STREAM_FUSION_POOLS);
    let valid_stream = SeededRng::new(seed, STREAM_VALID);

    let mut log = Vec::new();
    let mut best: Option<(f64, ClassifierParams, Reliabilities, FusionEncoderParams)> = None;
    let mut stall = 0usize;

    for epoch in 0..cfg.epochs {
        classifier = train_machine(
            classifier,
            &train_feats,
            1,
            cfg.machine_lr,
            cfg.dropout_rate,
            cfg.batch_size,
            &machine_stream.child(epoch as u64),
        );

        let crowd_loss = if adjust {
            let (updated, summary) = adjust_reliability(
                rels,
                &train_labels,
                &data.comments,
                1,
                cfg.crowd_lr,
                cfg.crowd_epsilon,
            );
            rels = updated;
            summary.final_loss
        } else {
            let (loss, _) =
                crowd::crowd_loss_grad(&train_labels, &data.comments, &rels, cfg.crowd_epsilon);
            loss
        };

        // Fresh assessments and fresh pools for the fusion stage.
        let epoch_pools = pool_stream.child(epoch as u64);
        let mut instances: Vec<(FusionInput, SamplePool)> = Vec::with_capacity(data.train.len());
        for (i, news) in data.train.iter().enumerate() {
            let machine = mc_predict(
                &classifier,
                &train_feats[i].0,
                cfg.mc_passes,
                cfg.dropout_rate,
                &epoch_pools.child(2 * i as u64),
            );
            let active = data.comments.get(&news.id).map_or(&[][..], |v| &v[..]);
            let n_users = data.n_users_static(&news.id, active.len(), cfg.activity_mode);
            let crowd = assess(
                &news.id,
                active,
                &rels,
                cfg.crowd_epsilon,
                cfg.alpha_min,
                n_users,
            );
            let input = fusion_input(&machine, crowd.as_ref());
            let beta = crowd
                .as_ref()
                .map(|c| c.beta)
                .unwrap_or(crate::distributions::BetaDist { alpha: 1.0, beta: 1.0 });
            let pool = draw_pool(
                &machine,
                &beta,
                cfg.fusion_samples,
                cfg.clamp_delta,
                &mut epoch_pools.child(2 * i as u64 + 1),
            );
            instances.push((input, pool));
        }
        fusion_params = train_fusion(
            fusion_params,
            &instances,
            cfg.fused_form,
            cfg.fusion_inner_epochs,
            cfg.fusion_lr,
        );
        let (fusion_nll, _) = fusion_loss_grad(&fusion_params, &instances, cfg.fused_form);

        // Deterministic-pass training loss for the trace.
        let machine_loss = {
            let mut loss = 0.0;
            for (x, y) in &train_feats {
                let p = crate::machine::forward(&classifier, None, x)
                    .clamp(1e-12, 1.0 - 1e-12);
                loss += -((*y as f64) * p.ln() + (1.0 - *y as f64) * (1.0 - p).ln());
            }
            loss / train_feats.len() as f64
        };

        let valid_accuracy = if data.valid.is_empty() {
            None
        } else {
            let epoch_valid = valid_stream.child(epoch as u64);
            let mut correct = 0usize;
            for (i, news) in data.valid.iter().enumerate() {
                let machine = mc_predict(
                    &classifier,
                    &valid_feats[i],
                    cfg.mc_passes,
                    cfg.dropout_rate,
                    &epoch_valid.child(i as u64),
                );
                let active = data.comments.get(&news.id).map_or(&[][..], |v| &v[..]);
                let n_users = data.n_users_static(&news.id, active.len(), cfg.activity_mode);
                let crowd = assess(
                    &news.id,
                    active,
                    &rels,
                    cfg.crowd_epsilon,
                    cfg.alpha_min,
                    n_users,
                );
                let fused = encode(
                    &fusion_params,
                    &fusion_input(&machine, crowd.as_ref()),
                    cfg.fused_form,
                );
                if (fused.mean() > 0.5) == (news.label == 1) {
                    correct += 1;
                }
            }
            Some(correct as f64 / data.valid.len() as f64)
        };

        log.push(EpochLog {
            epoch,
            machine_loss,
            crowd_loss,
            fusion_nll,
            valid_accuracy,
        });

        if let Some(acc) = valid_accuracy {
            let improved = best.as_ref().is_none_or(|(b, _, _, _)| acc > *b);
            if improved {
                best = Some((acc, classifier.clone(), rels.clone(), fusion_params.clone()));
                stall = 0;
            } else {
                stall += 1;
                if stall > cfg.patience {
                    break;
                }
            }
        }
    }

    let (classifier, reliabilities, fusion_params) = match best {
        Some((_, c, r, f)) => (c, r, f),
        None => (classifier, rels, fusion_params),
    };
    Ok((
        TrainedModel {
            classifier,
            reliabilities,
            fusion: fusion_params,
            seed,
        },
        log,
    ))
}

/// Everything the system knows about one news item at prediction time; the
/// per-item view the CLI's inspect command dumps.
#[derive(Debug, Clone)]
pub struct NewsPrediction {
    pub news_id: String,
    pub label: u8,
    pub machine: MachineAssessment,
    pub crowd: Option<CrowdAssessment>,
    pub fused: FusedParams,
    pub prediction: Prediction,
}

impl NewsPrediction {
    /// Hybrid score clipped into the unit interval for metric computation.
    pub fn hybrid_score(&self) -> f64 {
        self.prediction.y_hat.clamp(0.0, 1.0)
    }

    pub fn machine_score(&self) -> f64 {
        self.machine.mean
    }

    /// Crowd score; 0.5 when the crowd is unavailable.
    pub fn crowd_score(&self) -> f64 {
        self.crowd.as_ref().map_or(0.5, |c| c.e_crowd)
    }
}

/// Scores one news item under the trained model. `comments` must already be
/// restricted to the evaluation window and `n_users` resolved per the
/// activity mode. The per-item MC stream is keyed by the news id, so
/// evaluation order never matters.
pub fn predict_news(
    model: &TrainedModel,
    cfg: &Config,
    news: &NewsRecord,
    comments: &[CommentRecord],
    n_users: usize,
) -> NewsPrediction {
    let features = featurize(&news.text, cfg.feature_dim, model.seed);
    let eval_stream = SeededRng::new(model.seed, STREAM_EVAL_MACHINE);
    let machine = mc_predict(
        &model.classifier,
        &features,
        cfg.mc_passes,
        cfg.dropout_rate,
        &eval_stream.child(crate::machine::stable_hash(&news.id)),
    );
    let crowd = assess(
        &news.id,
        comments,
        &model.reliabilities,
        cfg.crowd_epsilon,
        cfg.alpha_min,
        n_users,
    );
    let fused = encode(&model.fusion, &fusion_input(&machine, crowd.as_ref()), cfg.fused_form);
    let prediction = fusion::predict(&fused);
    NewsPrediction {
        news_id: news.id.clone(),
        label: news.label,
        machine,
        crowd,
        fused,
        prediction,
    }
}

/// Scores a whole split with full comment windows.
pub fn predict_split(
    model: &TrainedModel,
    cfg: &Config,
    data: &SplitDataset,
    split: &[NewsRecord],
) -> Vec<NewsPrediction> {
    split
        .iter()
        .map(|news| {
            let active = data.comments.get(&news.id).map_or(&[][..], |v| &v[..]);
            let n_users = data.n_users_static(&news.id, active.len(), cfg.activity_mode);
            predict_news(model, cfg, news, active, n_users)
        })
        .collect()
}

/// Metric averaging mode. Macro averages precision/recall/F1 over the two
/// classes; binary treats fake (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricMode {
    Macro,
    BinaryFakePositive,
}

/// Confusion-derived metrics plus the rank-based AUC. Fake (label 1) is the
/// positive class for the confusion counts; a score strictly above 0.5
/// predicts fake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the truth set contains a single class.
    pub auc: Option<f64>,
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    pub mode: MetricMode,
}

/// Computes the report from `(score, label)` pairs; scores must lie in the
/// unit interval.
pub fn evaluate(predictions: &[(f64, u8)], mode: MetricMode) -> MetricsReport {
    assert!(!predictions.is_empty(), "predictions must be nonempty");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for &(score, label) in predictions {
        debug_assert!((0.0..=1.0).contains(&score), "score {score} outside [0, 1]");
        let pred_fake = score > 0.5;
        match (pred_fake, label) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 0) => tn += 1,
            (false, 1) => fn_ += 1,
            _ => panic!("labels must be 0 or 1"),
        }
    }
    let total = predictions.len() as f64;
    let accuracy = (tp + tn) as f64 / total;

    fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f1)
    }
    let (p_fake, r_fake, f1_fake) = prf(tp, fp, fn_);
    // the true class swaps the confusion roles
    let (p_true, r_true, f1_true) = prf(tn, fn_, fp);
    let (precision, recall, f1) = match mode {
        MetricMode::BinaryFakePositive => (p_fake, r_fake, f1_fake),
        MetricMode::Macro => (
            0.5 * (p_fake + p_true),
            0.5 * (r_fake + r_true),
            0.5 * (f1_fake + f1_true),
        ),
    };

    MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        auc: auc(predictions),
        true_pos: tp,
        false_pos: fp,
        true_neg: tn,
        false_neg: fn_,
        mode,
    }
}

/// Rank-based AUC (the Mann–Whitney statistic normalized by the pair
/// count), with tied scores credited one half. `None` when only one class
/// is present.
pub fn auc(predictions: &[(f64, u8)]) -> Option<f64> {
    let n_pos = predictions.iter().filter(|(_, l)| *l == 1).count();
    let n_neg = predictions.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].0.partial_cmp(&predictions[b].0).unwrap());
    // average ranks over tie groups (1-based ranks)
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && predictions[order[j + 1]].0 == predictions[order[i]].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            if predictions[k].1 == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Runs the four ablation arms on the test split: the full hybrid, a
/// threshold on the machine mean, a threshold on the crowd aggregate, and
/// the hybrid retrained with the reliability adjustment skipped.
pub fn ablate(data: &SplitDataset, cfg: &Config, seed: u64) -> Result<Vec<(String, MetricsReport)>> {
    let (model, _) = train_all_opts(data, cfg, seed, true)?;
    let preds = predict_split(&model, cfg, data, &data.test);
    let hybrid: Vec<(f64, u8)> = preds.iter().map(|p| (p.hybrid_score(), p.label)).collect();
    let machine: Vec<(f64, u8)> = preds.iter().map(|p| (p.machine_score(), p.label)).collect();
    let crowd: Vec<(f64, u8)> = preds.iter().map(|p| (p.crowd_score(), p.label)).collect();

    let (model_na, _) = train_all_opts(data, cfg, seed, false)?;
    let preds_na = predict_split(&model_na, cfg, data, &data.test);
    let no_adjust: Vec<(f64, u8)> =
        preds_na.iter().map(|p| (p.hybrid_score(), p.label)).collect();

    Ok(vec![
        (ARM_HYBRID.to_string(), evaluate(&hybrid, cfg.metric_mode)),
        (ARM_MACHINE_ONLY.to_string(), evaluate(&machine, cfg.metric_mode)),
        (ARM_CROWD_ONLY.to_string(), evaluate(&crowd, cfg.metric_mode)),
        (ARM_NO_ADJUSTMENT.to_string(), evaluate(&no_adjust, cfg.metric_mode)),
    ])
}

/// Ordered time thresholds (seconds since publication) for the dynamic
/// evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeThresholdSchedule {
    thresholds: Vec<u64>,
}

impl TimeThresholdSchedule {
    pub fn new(thresholds: Vec<u64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(RahiError::BadInput("schedule must be nonempty".into()));
        }
        if !thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(RahiError::BadInput("schedule must be strictly increasing".into()));
        }
        Ok(TimeThresholdSchedule { thresholds })
    }

    /// 1–30 minutes, 1–24 hours, then 2, 3, 4 and 7 days.
    pub fn default_schedule() -> Self {
        TimeThresholdSchedule {
            thresholds: vec![
                60, 120, 180, 240, 300, 600, 1200, 1800, // minutes
                3600, 5400, 7200, 10_800, 14_400, 18_000, 43_200, 86_400, // hours
                172_800, 259_200, 345_600, 604_800, // days
            ],
        }
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }
}

impl Default for TimeThresholdSchedule {
    fn default() -> Self {
        Self::default_schedule()
    }
}

/// One dynamic-evaluation point: full reports for the three arms at one
/// threshold.
#[derive(Debug, Clone)]
pub struct DynamicPoint {
    pub threshold_seconds: u64,
    pub hybrid: MetricsReport,
    pub machine: MetricsReport,
    pub crowd: MetricsReport,
}

/// Re-runs the crowd arm on the test split restricted to comments observed
/// within each threshold; the machine arm is computed once and is constant
/// across thresholds by construction. Windowed crowd assessments always use
/// the windowed commenter count as the Beta strength.
pub fn dynamic_eval(
    data: &SplitDataset,
    model: &TrainedModel,
    cfg: &Config,
    schedule: &TimeThresholdSchedule,
) -> Vec<DynamicPoint> {
    // machine assessments once per news
    let eval_stream = SeededRng::new(model.seed, STREAM_EVAL_MACHINE);
    let machine_assessments: Vec<MachineAssessment> = data
        .test
        .iter()
        .map(|news| {
            let features = featurize(&news.text, cfg.feature_dim, model.seed);
            mc_predict(
                &model.classifier,
                &features,
                cfg.mc_passes,
                cfg.dropout_rate,
                &eval_stream.child(crate::machine::stable_hash(&news.id)),
            )
        })
        .collect();
    let machine_scores: Vec<(f64, u8)> = data
        .test
        .iter()
        .zip(&machine_assessments)
        .map(|(news, m)| (m.mean, news.label))
        .collect();

    schedule
        .thresholds()
        .iter()
        .map(|&threshold| {
            let mut hybrid = Vec::with_capacity(data.test.len());
            let mut crowd_scores = Vec::with_capacity(data.test.len());
            for (news, machine) in data.test.iter().zip(&machine_assessments) {
                let window: Vec<CommentRecord> = data
                    .comments
                    .get(&news.id)
                    .map(|v| {
                        v.iter()
                            .filter(|c| c.time_offset_seconds <= threshold)
                            .cloned()
                            .collect()
                    })
                    .unwrap_or_default();
                let crowd = assess(
                    &news.id,
                    &window,
                    &model.reliabilities,
                    cfg.crowd_epsilon,
                    cfg.alpha_min,
                    window.len(),
                );
                let fused =
                    encode(&model.fusion, &fusion_input(machine, crowd.as_ref()), cfg.fused_form);
                hybrid.push((fused.mean().clamp(0.0, 1.0), news.label));
                crowd_scores.push((crowd.as_ref().map_or(0.5, |c| c.e_crowd), news.label));
            }
            DynamicPoint {
                threshold_seconds: threshold,
                hybrid: evaluate(&hybrid, cfg.metric_mode),
                machine: evaluate(&machine_scores, cfg.metric_mode),
                crowd: evaluate(&crowd_scores, cfg.metric_mode),
            }
        })
        .collect()
}
