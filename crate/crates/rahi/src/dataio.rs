//! Dataset schemas, ingestion and filtering, the synthetic corpus
//! generator, and every file format the CLI reads or writes.
//!
//! News and comments are line-delimited JSON, one object per line. The
//! synthetic generator emits a ground-truth sidecar with the latent user
//! abilities and news difficulties it sampled, which recovery tests compare
//! against the reliabilities the crowd module estimates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ActivityMode, Config};
use crate::crowd::{CommentIndex, CommentRecord, Stance};
use crate::distributions::SeededRng;
use crate::error::{RahiError, Result};
use crate::pipeline::{EpochLog, MetricsReport, TrainedModel};

const STREAM_GENERATOR: u64 = 64;

/// One news item. Label 1 is fake (the positive class), 0 is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsRecord {
    pub id: String,
    pub text: String,
    pub label: u8,
    pub publish_time: i64,
}

/// Everything ingest produces: the retained records plus counters for what
/// was filtered, so callers can report it.
#[derive(Debug, Clone, Default)]
pub struct IngestOutput {
    pub news: Vec<NewsRecord>,
    pub comments: Vec<CommentRecord>,
    /// Deduplicated commenter totals per news before the activity filter.
    pub commenter_counts: BTreeMap<String, usize>,
    pub duplicate_comments: usize,
    pub orphan_comments: usize,
    pub empty_news: usize,
    pub low_activity_users: usize,
    pub low_activity_comments: usize,
}

fn has_tokens(text: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric()).any(|t| !t.is_empty())
}

/// Reads and filters the two record files.
///
/// Filtering order: news with empty-after-tokenization text are dropped;
/// duplicate (news, user) comments are dropped keeping the first; comments
/// on unknown news are dropped; users with fewer than `activity_threshold`
/// comments are removed from the active set (in `CountInDenominator` mode
/// their deduplicated totals still back the per-news commenter counts).
/// Malformed lines and unknown stance values abort with the line number.
pub fn ingest(
    news_path: &Path,
    comments_path: &Path,
    activity_threshold: usize,
    _mode: ActivityMode,
) -> Result<IngestOutput> {
    let mut out = IngestOutput::default();

    let news_text = std::fs::read_to_string(news_path)
        .map_err(|e| RahiError::BadInput(format!("cannot read {}: {e}", news_path.display())))?;
    let mut seen_ids = BTreeSet::new();
    for (lineno, line) in news_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: NewsRecord = serde_json::from_str(line).map_err(|e| {
            RahiError::BadInput(format!("{} line {}: {e}", news_path.display(), lineno + 1))
        })?;
        if rec.label > 1 {
            return Err(RahiError::BadInput(format!(
                "{} line {}: label must be 0 or 1, got {}",
                news_path.display(),
                lineno + 1,
                rec.label
            )));
        }
        if !seen_ids.insert(rec.id.clone()) {
            return Err(RahiError::BadInput(format!(
                "{} line {}: duplicate news id '{}'",
                news_path.display(),
                lineno + 1,
                rec.id
            )));
        }
        if !has_tokens(&rec.text) {
            out.empty_news += 1;
            seen_ids.remove(&rec.id);
            continue;
        }
        out.news.push(rec);
    }

    let comments_text = std::fs::read_to_string(comments_path).map_err(|e| {
        RahiError::BadInput(format!("cannot read {}: {e}", comments_path.display()))
    })?;
    let mut seen_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    let mut deduped: Vec<CommentRecord> = Vec::new();
    for (lineno, line) in comments_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CommentRecord = serde_json::from_str(line).map_err(|e| {
            RahiError::BadInput(format!("{} line {}: {e}", comments_path.display(), lineno + 1))
        })?;
        if !seen_ids.contains(&rec.news_id) {
            out.orphan_comments += 1;
            continue;
        }
        if !seen_pairs.insert((rec.news_id.clone(), rec.user_id.clone())) {
            out.duplicate_comments += 1;
            continue;
        }
        deduped.push(rec);
    }

    for c in &deduped {
        *out.commenter_counts.entry(c.news_id.clone()).or_insert(0) += 1;
    }

    let mut per_user: BTreeMap<String, usize> = BTreeMap::new();
    for c in &deduped {
        *per_user.entry(c.user_id.clone()).or_insert(0) += 1;
    }
    let active_users: BTreeSet<&String> = per_user
        .iter()
        .filter(|(_, &n)| n >= activity_threshold)
        .map(|(u, _)| u)
        .collect();
    out.low_activity_users = per_user.len() - active_users.len();
    for c in deduped {
        if active_users.contains(&c.user_id) {
            out.comments.push(c);
        } else {
            out.low_activity_comments += 1;
        }
    }
    Ok(out)
}

/// Knobs of the synthetic corpus: an item-response world where user `j`
/// answers news `i` correctly with probability `sigmoid(ability_j -
/// difficulty_i)` on crowd-informative news and by coin flip elsewhere,
/// while news text carries a label-correlated vocabulary signal on
/// machine-informative news. `q_m` and `q_c` are the informative fractions;
/// `complementary` arranges the two subsets to overlap as little as
/// possible instead of drawing them independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_news: usize,
    pub comments_min: usize,
    pub comments_max: usize,
    pub ability_log_mean: f64,
    pub ability_log_sigma: f64,
    pub difficulty_mean: f64,
    pub difficulty_sigma: f64,
    pub q_m: f64,
    pub q_c: f64,
    pub complementary: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn from_config(cfg: &Config, seed: u64) -> Self {
        SyntheticSpec {
            n_users: cfg.synth_users,
            n_news: cfg.synth_news,
            comments_min: cfg.synth_comments_min,
            comments_max: cfg.synth_comments_max,
            ability_log_mean: cfg.synth_ability_log_mean,
            ability_log_sigma: cfg.synth_ability_log_sigma,
            difficulty_mean: cfg.synth_difficulty_mean,
            difficulty_sigma: cfg.synth_difficulty_sigma,
            q_m: cfg.synth_q_m,
            q_c: cfg.synth_q_c,
            complementary: cfg.synth_complementary,
            seed,
        }
    }
}

/// Generated corpus plus the latent ground truth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub news: Vec<NewsRecord>,
    pub comments: Vec<CommentRecord>,
    pub abilities: BTreeMap<String, f64>,
    pub difficulties: BTreeMap<String, f64>,
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

/// Deterministic generator: the same spec always produces the identical
/// corpus. Comment offsets are log-uniform between one minute and seven
/// days so time-windowed evaluation sees a spread of arrival times.
pub fn generate_synthetic(spec: &SyntheticSpec) -> SyntheticCorpus {
    let root = SeededRng::new(spec.seed, STREAM_GENERATOR);
    let n_news = spec.n_news;
    let n_users = spec.n_users;

    let mut label_rng = root.child(0);
    let labels: Vec<u8> = (0..n_news).map(|_| (label_rng.next_f64() < 0.5) as u8).collect();

    let mut ability_rng = root.child(1);
    let user_ids: Vec<String> = (0..n_users).map(|j| format!("u{j:05}")).collect();
    let abilities: Vec<f64> = (0..n_users)
        .map(|_| (spec.ability_log_mean + spec.ability_log_sigma * ability_rng.standard_normal()).exp())
        .collect();

    let mut difficulty_rng = root.child(2);
    let news_ids: Vec<String> = (0..n_news).map(|i| format!("n{i:05}")).collect();
    let latent_difficulty: Vec<f64> = (0..n_news)
        .map(|_| spec.difficulty_mean + spec.difficulty_sigma * difficulty_rng.standard_normal())
        .collect();

    // Informative subsets. Complementary mode anchors the machine subset at
    // the front and the crowd subset at the back so their overlap is the
    // smallest the fractions allow.
    let mut flag_rng = root.child(3);
    let m_count = (spec.q_m * n_news as f64).round() as usize;
    let c_count = (spec.q_c * n_news as f64).round() as usize;
    let (machine_informative, crowd_informative): (Vec<bool>, Vec<bool>) = if spec.complementary {
        (
            (0..n_news).map(|i| i < m_count).collect(),
            (0..n_news).map(|i| i >= n_news.saturating_sub(c_count)).collect(),
        )
    } else {
        (
            (0..n_news).map(|_| flag_rng.next_f64() < spec.q_m).collect(),
            (0..n_news).map(|_| flag_rng.next_f64() < spec.q_c).collect(),
        )
    };

    let text_stream = root.child(4);
    let pick_stream = root.child(5);
    let response_stream = root.child(6);
    let time_stream = root.child(7);

    let mut news = Vec::with_capacity(n_news);
    let mut comments = Vec::new();
    let ln_lo = 60f64.ln();
    let ln_hi = 604_800f64.ln();

    for i in 0..n_news {
        let label = labels[i];
        let mut trng = text_stream.child(i as u64);
        let length = 20 + trng.next_below(21);
        let mut tokens = Vec::with_capacity(length);
        for _ in 0..length {
            let r = trng.next_f64();
            let k = trng.next_below(40);
            let token = if machine_informative[i] {
                // heavy skew toward the label's vocabulary pool
                if r < 0.7 {
                    if label == 1 { format!("fakeword{k}") } else { format!("trueword{k}") }
                } else if r < 0.8 {
                    if label == 1 { format!("trueword{k}") } else { format!("fakeword{k}") }
                } else {
                    format!("filler{k}")
                }
            } else {
                // symmetric mixture carries no label signal
                if r < 0.3 {
                    format!("fakeword{k}")
                } else if r < 0.6 {
                    format!("trueword{k}")
                } else {
                    format!("filler{k}")
                }
            };
            tokens.push(token);
        }
        news.push(NewsRecord {
            id: news_ids[i].clone(),
            text: tokens.join(" "),
            label,
            publish_time: 1_600_000_000 + 60 * i as i64,
        });

        // distinct commenters via a partial shuffle
        let mut prng = pick_stream.child(i as u64);
        let k = spec.comments_min + prng.next_below(spec.comments_max - spec.comments_min + 1);
        let k = k.min(n_users);
        let mut pool: Vec<usize> = (0..n_users).collect();
        let mut rrng = response_stream.child(i as u64);
        let mut wrng = time_stream.child(i as u64);
        for slot in 0..k {
            let pick = slot + prng.next_below(n_users - slot);
            pool.swap(slot, pick);
            let j = pool[slot];
            let p_correct = if crowd_informative[i] {
                sigmoid(abilities[j] - latent_difficulty[i])
            } else {
                0.5
            };
            let correct = rrng.next_f64() < p_correct;
            let judges_fake = correct == (label == 1);
            let stance = if judges_fake { Stance::Oppose } else { Stance::Support };
            let offset = (ln_lo + (ln_hi - ln_lo) * wrng.next_f64()).exp().round() as u64;
            comments.push(CommentRecord {
                news_id: news_ids[i].clone(),
                user_id: user_ids[j].clone(),
                stance,
                time_offset_seconds: offset,
            });
        }
    }

    SyntheticCorpus {
        news,
        comments,
        abilities: user_ids.into_iter().zip(abilities).collect(),
        difficulties: news_ids.into_iter().zip(latent_difficulty).collect(),
    }
}

/// One line of the ground-truth sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SidecarRecord {
    Ability { user_id: String, ability: f64 },
    Difficulty { news_id: String, difficulty: f64 },
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| RahiError::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(&rec)
            .map_err(|e| RahiError::Invalid(format!("serialize failure: {e}")))?;
        writeln!(w, "{line}").map_err(|e| RahiError::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| RahiError::io(path.display().to_string(), e))
}

pub fn write_news(path: &Path, news: &[NewsRecord]) -> Result<()> {
    write_jsonl(path, news.iter())
}

pub fn write_comments(path: &Path, comments: &[CommentRecord]) -> Result<()> {
    write_jsonl(path, comments.iter())
}

pub fn write_sidecar(path: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    let abilities = corpus.abilities.iter().map(|(u, a)| SidecarRecord::Ability {
        user_id: u.clone(),
        ability: *a,
    });
    let difficulties = corpus.difficulties.iter().map(|(n, d)| SidecarRecord::Difficulty {
        news_id: n.clone(),
        difficulty: *d,
    });
    write_jsonl(path, abilities.chain(difficulties))
}

/// Writes `news.jsonl`, `comments.jsonl` and `sidecar.jsonl` into `dir`.
pub fn write_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<(PathBuf, PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| RahiError::io(dir.display().to_string(), e))?;
    let news_path = dir.join("news.jsonl");
    let comments_path = dir.join("comments.jsonl");
    let sidecar_path = dir.join("sidecar.jsonl");
    write_news(&news_path, &corpus.news)?;
    write_comments(&comments_path, &corpus.comments)?;
    write_sidecar(&sidecar_path, corpus)?;
    Ok((news_path, comments_path, sidecar_path))
}

/// Reads a sidecar back into (abilities, difficulties).
pub fn read_sidecar(path: &Path) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RahiError::BadInput(format!("cannot read {}: {e}", path.display())))?;
    let mut abilities = BTreeMap::new();
    let mut difficulties = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SidecarRecord = serde_json::from_str(line).map_err(|e| {
            RahiError::BadInput(format!("{} line {}: {e}", path.display(), lineno + 1))
        })?;
        match rec {
            SidecarRecord::Ability { user_id, ability } => {
                abilities.insert(user_id, ability);
            }
            SidecarRecord::Difficulty { news_id, difficulty } => {
                difficulties.insert(news_id, difficulty);
            }
        }
    }
    Ok((abilities, difficulties))
}

/// Serialized trained model plus the exact configuration it was trained
/// under; evaluation commands reload both so scores are reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config: Config,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)
            .map_err(|e| RahiError::Invalid(format!("serialize failure: {e}")))?;
        std::fs::write(path, json).map_err(|e| RahiError::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            RahiError::BadInput(format!("cannot read model {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| RahiError::BadInput(format!("model {}: {e}", path.display())))
    }
}

/// Renders metric rows under the fixed header
/// `arm,threshold_seconds,accuracy,precision,recall,f1,auc`. Static
/// evaluations use threshold -1; an absent AUC renders as an empty field.
pub fn metrics_csv(rows: &[(String, i64, MetricsReport)]) -> String {
    let mut out = String::from("arm,threshold_seconds,accuracy,precision,recall,f1,auc\n");
    for (arm, threshold, r) in rows {
        let auc = r.auc.map_or(String::new(), |a| format!("{a:.6}"));
        out.push_str(&format!(
            "{arm},{threshold},{:.6},{:.6},{:.6},{:.6},{auc}\n",
            r.accuracy, r.precision, r.recall, r.f1
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[(String, i64, MetricsReport)]) -> Result<()> {
    std::fs::write(path, metrics_csv(rows)).map_err(|e| RahiError::io(path.display().to_string(), e))
}

pub fn train_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,machine_loss,crowd_loss,fusion_nll,valid_accuracy\n");
    for e in log {
        let acc = e.valid_accuracy.map_or(String::new(), |a| format!("{a:.6}"));
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{acc}\n",
            e.epoch, e.machine_loss, e.crowd_loss, e.fusion_nll
        ));
    }
    out
}

pub fn write_train_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    std::fs::write(path, train_log_csv(log)).map_err(|e| RahiError::io(path.display().to_string(), e))
}

/// Builds the comment index and split inputs from an ingest result.
pub fn index_of(output: &IngestOutput) -> CommentIndex {
    crate::crowd::index_comments(output.comments.iter().cloned())
}
