//! Crowd-intelligence arm: per-news difficulty, difficulty-weighted user
//! reliability, the reliability-weighted crowd prediction with supervised
//! adjustment, its Beta assessment, and the majority / weighted vote
//! reference aggregators.
//!
//! Reliabilities are optimized in log space (`c = exp(rho)`), which keeps
//! the weights strictly positive under unconstrained gradient steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{clamp_unit, BetaDist};

/// A commenter's binary judgment: `Oppose` means the commenter believes the
/// news is fake, `Support` that it is true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Support,
    Oppose,
}

/// One user's comment on one news item; offsets are seconds since
/// publication. At most one record per (news, user) pair survives ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub news_id: String,
    pub user_id: String,
    pub stance: Stance,
    pub time_offset_seconds: u64,
}

/// Comments grouped by news id, in stable (file) order within each news.
pub type CommentIndex = BTreeMap<String, Vec<CommentRecord>>;

pub fn index_comments(comments: impl IntoIterator<Item = CommentRecord>) -> CommentIndex {
    let mut index = CommentIndex::new();
    for c in comments {
        index.entry(c.news_id.clone()).or_default().push(c);
    }
    index
}

#[inline]
pub fn is_correct(stance: Stance, label: u8) -> bool {
    matches!((stance, label), (Stance::Oppose, 1) | (Stance::Support, 0))
}

/// Empirical difficulty of a news item: the fraction of its commenters that
/// judged it correctly. Low values mean hard news. `d` may be zero when no
/// commenter was correct; such entries are never consumed by the
/// reliability formula (a correct judgment implies `d >= 1/n_users`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsDifficulty {
    pub news_id: String,
    pub d: f64,
    pub n_users: usize,
    pub n_correct: usize,
}

/// Computes difficulties over the given comments; call with the training
/// split only and freeze the result. News without comments or without a
/// label produce no entry.
pub fn compute_difficulty(
    index: &CommentIndex,
    labels: &BTreeMap<String, u8>,
) -> BTreeMap<String, NewsDifficulty> {
    let mut out = BTreeMap::new();
    for (news_id, comments) in index {
        let Some(&label) = labels.get(news_id) else {
            continue;
        };
        if comments.is_empty() {
            continue;
        }
        let n_users = comments.len();
        let n_correct = comments.iter().filter(|c| is_correct(c.stance, label)).count();
        out.insert(
            news_id.clone(),
            NewsDifficulty {
                news_id: news_id.clone(),
                d: n_correct as f64 / n_users as f64,
                n_users,
                n_correct,
            },
        );
    }
    out
}

/// Per-user log-reliability vector. Users absent from the map are
/// cold-start and weigh in with the neutral reliability `c = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reliabilities {
    rho: BTreeMap<String, f64>,
}

impl Reliabilities {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rho(rho: BTreeMap<String, f64>) -> Self {
        Reliabilities { rho }
    }

    /// Positive weight `c = exp(rho)`; 1.0 for unknown users.
    pub fn weight(&self, user_id: &str) -> f64 {
        self.rho.get(user_id).map_or(1.0, |r| r.exp())
    }

    pub fn rho(&self, user_id: &str) -> Option<f64> {
        self.rho.get(user_id).copied()
    }

    pub fn set_rho(&mut self, user_id: &str, rho: f64) {
        self.rho.insert(user_id.to_string(), rho);
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.rho.iter()
    }

    pub fn users(&self) -> impl Iterator<Item = &String> {
        self.rho.keys()
    }
}

/// Initializes each user's reliability as the mean inverse difficulty over
/// the news they judged correctly, divided by the number of news they
/// commented on. Users correct on nothing are floored at `c_min`.
pub fn init_reliability(
    index: &CommentIndex,
    labels: &BTreeMap<String, u8>,
    difficulties: &BTreeMap<String, NewsDifficulty>,
    c_min: f64,
) -> Reliabilities {
    assert!(c_min > 0.0, "c_min must be positive");
    struct Acc {
        n: usize,
        sum_inv_d: f64,
    }
    let mut per_user: BTreeMap<String, Acc> = BTreeMap::new();
    for (news_id, comments) in index {
        let Some(&label) = labels.get(news_id) else {
            continue;
        };
        let Some(diff) = difficulties.get(news_id) else {
            continue;
        };
        for c in comments {
            let acc = per_user
                .entry(c.user_id.clone())
                .or_insert(Acc { n: 0, sum_inv_d: 0.0 });
            acc.n += 1;
            if is_correct(c.stance, label) {
                debug_assert!(diff.d > 0.0, "a correct judgment implies d > 0");
                acc.sum_inv_d += 1.0 / diff.d;
            }
        }
    }
    let rho = per_user
        .into_iter()
        .map(|(user, acc)| {
            let c = (acc.sum_inv_d / acc.n as f64).max(c_min);
            (user, c.ln())
        })
        .collect();
    Reliabilities::from_rho(rho)
}

/// Reliability-weighted probability that the news is fake:
/// sum of opposing weights over the total weight, clamped to
/// `[epsilon, 1 - epsilon]`. `None` when there are no comments
/// (crowd-unavailable; the fusion stage falls back).
pub fn aggregate(comments: &[CommentRecord], rels: &Reliabilities, epsilon: f64) -> Option<f64> {
    if comments.is_empty() {
        return None;
    }
    let mut s_fake = 0.0;
    let mut s_true = 0.0;
    for c in comments {
        let w = rels.weight(&c.user_id);
        match c.stance {
            Stance::Oppose => s_fake += w,
            Stance::Support => s_true += w,
        }
    }
    Some(clamp_unit(s_fake / (s_fake + s_true), epsilon))
}

/// Aggregated crowd view of one news item plus its Beta form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdAssessment {
    pub news_id: String,
    pub e_crowd: f64,
    pub n_users: usize,
    pub beta: BetaDist,
}

/// Beta parameterization of the crowd prediction: `alpha = e * n`,
/// `beta = (1 - e) * n`, each floored at `alpha_min`; zero commenters give
/// the uninformative Beta(1, 1).
pub fn to_beta(e_crowd: f64, n_users: usize, alpha_min: f64) -> BetaDist {
    assert!(alpha_min > 0.0);
    if n_users == 0 {
        return BetaDist { alpha: 1.0, beta: 1.0 };
    }
    let n = n_users as f64;
    BetaDist {
        alpha: (e_crowd * n).max(alpha_min),
        beta: ((1.0 - e_crowd) * n).max(alpha_min),
    }
}

/// Aggregates one news item end to end. `n_users` is supplied by the caller
/// because the configured activity mode decides whether filtered commenters
/// still count toward the Beta strength.
pub fn assess(
    news_id: &str,
    comments: &[CommentRecord],
    rels: &Reliabilities,
    epsilon: f64,
    alpha_min: f64,
    n_users: usize,
) -> Option<CrowdAssessment> {
    let e_crowd = aggregate(comments, rels, epsilon)?;
    Some(CrowdAssessment {
        news_id: news_id.to_string(),
        e_crowd,
        n_users,
        beta: to_beta(e_crowd, n_users, alpha_min),
    })
}

/// Mean cross-entropy of the aggregated crowd prediction against the labels
/// over the crowd-available training news, and its gradient with respect to
/// each user's `rho`. The unit-interval clamp is treated as a stop-gradient:
/// news whose raw aggregate falls outside `[epsilon, 1 - epsilon]`
/// contribute loss but no gradient.
pub fn crowd_loss_grad(
    train_news: &[(String, u8)],
    index: &CommentIndex,
    rels: &Reliabilities,
    epsilon: f64,
) -> (f64, BTreeMap<String, f64>) {
    let mut loss = 0.0;
    let mut grad: BTreeMap<String, f64> = BTreeMap::new();
    let mut included = 0usize;

    for (news_id, label) in train_news {
        let Some(comments) = index.get(news_id) else {
            continue;
        };
        if comments.is_empty() {
            continue;
        }
        included += 1;
        let mut s_fake = 0.0;
        let mut s_true = 0.0;
        for c in comments {
            let w = rels.weight(&c.user_id);
            match c.stance {
                Stance::Oppose => s_fake += w,
                Stance::Support => s_true += w,
            }
        }
        let total = s_fake + s_true;
        let e_raw = s_fake / total;
        let e = clamp_unit(e_raw, epsilon);
        let y = *label as f64;
        loss += -(y * e.ln() + (1.0 - y) * (1.0 - e).ln());

        let clamped = e_raw < epsilon || e_raw > 1.0 - epsilon;
        if clamped {
            continue;
        }
        // dL/de = (e - y) / (e (1 - e)); de/dc has opposite signs for the
        // two stances; dc/drho = c.
        let dl_de = (e - y) / (e * (1.0 - e));
        for c in comments {
            let w = rels.weight(&c.user_id);
            let de_dc = match c.stance {
                Stance::Oppose => (1.0 - e) / total,
                Stance::Support => -e / total,
            };
            *grad.entry(c.user_id.clone()).or_insert(0.0) += dl_de * de_dc * w;
        }
    }

    if included > 0 {
        let inv = 1.0 / included as f64;
        loss *= inv;
        for g in grad.values_mut() {
            *g *= inv;
        }
    }
    (loss, grad)
}

/// Summary returned by [`adjust_reliability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Norm cap on each descent step. A confidently wrong aggregate sitting
/// near the clamp boundary produces gradients on the order of `1/epsilon`;
/// clipping keeps such news from catapulting the weights.
const GRAD_CLIP: f64 = 5.0;

/// Full-batch gradient descent on the crowd loss in `rho` space with
/// norm-clipped steps.
pub fn adjust_reliability(
    mut rels: Reliabilities,
    train_news: &[(String, u8)],
    index: &CommentIndex,
    epochs: usize,
    lr: f64,
    epsilon: f64,
) -> (Reliabilities, AdjustSummary) {
    assert!(lr >= 0.0, "learning rate must be nonnegative");
    let (initial_loss, _) = crowd_loss_grad(train_news, index, &rels, epsilon);
    for _ in 0..epochs {
        let (_, grad) = crowd_loss_grad(train_news, index, &rels, epsilon);
        let norm = grad.values().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > GRAD_CLIP { GRAD_CLIP / norm } else { 1.0 };
        for (user, g) in &grad {
            if let Some(r) = rels.rho(user) {
                rels.set_rho(user, r - lr * scale * g);
            }
        }
    }
    let (final_loss, _) = crowd_loss_grad(train_news, index, &rels, epsilon);
    (
        rels,
        AdjustSummary {
            initial_loss,
            final_loss,
            epochs,
        },
    )
}

/// Outcome of a vote-style aggregator. Ties are reported explicitly and
/// resolved later by the configured [`TieRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Fake,
    True,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    Fake,
    True,
}

impl Verdict {
    /// Resolves to "is fake" under the given tie rule.
    pub fn is_fake(self, tie_rule: TieRule) -> bool {
        match self {
            Verdict::Fake => true,
            Verdict::True => false,
            Verdict::Tie => tie_rule == TieRule::Fake,
        }
    }
}

/// Strict majority of opposing stances; `None` when there are no comments.
pub fn majority_vote(comments: &[CommentRecord]) -> Option<Verdict> {
    if comments.is_empty() {
        return None;
    }
    let oppose = comments.iter().filter(|c| c.stance == Stance::Oppose).count();
    let support = comments.len() - oppose;
    Some(match oppose.cmp(&support) {
        std::cmp::Ordering::Greater => Verdict::Fake,
        std::cmp::Ordering::Less => Verdict::True,
        std::cmp::Ordering::Equal => Verdict::Tie,
    })
}

/// Majority by summed reliability weight; `None` when there are no comments.
pub fn weighted_vote(comments: &[CommentRecord], rels: &Reliabilities) -> Option<Verdict> {
    if comments.is_empty() {
        return None;
    }
    let mut s_fake = 0.0;
    let mut s_true = 0.0;
    for c in comments {
        let w = rels.weight(&c.user_id);
        match c.stance {
            Stance::Oppose => s_fake += w,
            Stance::Support => s_true += w,
        }
    }
    Some(if s_fake > s_true {
        Verdict::Fake
    } else if s_fake < s_true {
        Verdict::True
    } else {
        Verdict::Tie
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn comment(news: &str, user: &str, stance: Stance) -> CommentRecord {
        CommentRecord {
            news_id: news.into(),
            user_id: user.into(),
            stance,
            time_offset_seconds: 0,
        }
    }

    fn rels_with(entries: &[(&str, f64)]) -> Reliabilities {
        let mut r = Reliabilities::new();
        for (u, c) in entries {
            r.set_rho(u, c.ln());
        }
        r
    }

    #[test]
    fn difficulty_is_correct_fraction() {
        let mut comments = Vec::new();
        for k in 0..3 {
            comments.push(comment("n1", &format!("correct{k}"), Stance::Oppose));
        }
        for k in 0..7 {
            comments.push(comment("n1", &format!("wrong{k}"), Stance::Support));
        }
        let index = index_comments(comments);
        let labels = BTreeMap::from([("n1".to_string(), 1u8)]);
        let d = compute_difficulty(&index, &labels);
        let nd = &d["n1"];
        assert_relative_eq!(nd.d, 0.3, epsilon = 1e-15);
        assert_eq!((nd.n_users, nd.n_correct), (10, 3));

        // all correct -> boundary 1.0
        let index2 = index_comments((0..4).map(|k| comment("n2", &format!("u{k}"), Stance::Oppose)));
        let labels2 = BTreeMap::from([("n2".to_string(), 1u8)]);
        assert_eq!(compute_difficulty(&index2, &labels2)["n2"].d, 1.0);

        // flipping every label complements the correct count
        let labels_flipped = BTreeMap::from([("n1".to_string(), 0u8)]);
        let df = compute_difficulty(&index, &labels_flipped);
        assert_eq!(df["n1"].n_correct, 7);
    }

    #[test]
    fn reliability_mean_inverse_difficulty() {
        // user "j" correct on two news with d = 0.5 and d = 0.25 -> c = 3
        let comments = vec![
            comment("a", "j", Stance::Oppose),
            comment("a", "o1", Stance::Support),
            comment("b", "j", Stance::Oppose),
            comment("b", "o1", Stance::Support),
            comment("b", "o2", Stance::Support),
            comment("b", "o3", Stance::Support),
        ];
        let index = index_comments(comments);
        let labels = BTreeMap::from([("a".to_string(), 1u8), ("b".to_string(), 1u8)]);
        let diffs = compute_difficulty(&index, &labels);
        assert_relative_eq!(diffs["a"].d, 0.5, epsilon = 1e-15);
        assert_relative_eq!(diffs["b"].d, 0.25, epsilon = 1e-15);
        let rels = init_reliability(&index, &labels, &diffs, 0.01);
        assert_relative_eq!(rels.weight("j"), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reliability_is_one_on_unanimous_easy_news() {
        let comments = vec![
            comment("a", "u1", Stance::Oppose),
            comment("a", "u2", Stance::Oppose),
            comment("b", "u1", Stance::Support),
            comment("b", "u2", Stance::Support),
        ];
        let index = index_comments(comments);
        let labels = BTreeMap::from([("a".to_string(), 1u8), ("b".to_string(), 0u8)]);
        let diffs = compute_difficulty(&index, &labels);
        let rels = init_reliability(&index, &labels, &diffs, 0.01);
        assert_relative_eq!(rels.weight("u1"), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rels.weight("u2"), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reliability_floor_for_always_wrong_user() {
        let mut comments = Vec::new();
        for n in ["a", "b", "c", "d"] {
            comments.push(comment(n, "wrong", Stance::Support));
            comments.push(comment(n, "right", Stance::Oppose));
        }
        let index = index_comments(comments);
        let labels: BTreeMap<String, u8> =
            ["a", "b", "c", "d"].iter().map(|n| (n.to_string(), 1u8)).collect();
        let diffs = compute_difficulty(&index, &labels);
        let rels = init_reliability(&index, &labels, &diffs, 0.01);
        assert_relative_eq!(rels.weight("wrong"), 0.01, epsilon = 1e-12);
        // aggregation with the floored user still yields finite results
        let items = index.get("a").unwrap();
        let e = aggregate(items, &rels, 1e-6).unwrap();
        assert!(e.is_finite() && (0.0..=1.0).contains(&e));
    }

    #[test]
    fn cold_start_users_weigh_one() {
        let rels = Reliabilities::new();
        assert_eq!(rels.weight("nobody"), 1.0);
    }

    #[test]
    fn aggregate_weighted_fraction() {
        let comments =
            vec![comment("n", "f1", Stance::Oppose), comment("n", "t1", Stance::Support)];
        let rels = rels_with(&[("f1", 2.0), ("t1", 1.0)]);
        assert_relative_eq!(aggregate(&comments, &rels, 1e-6).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_clamps_unanimous_support() {
        let comments =
            vec![comment("n", "a", Stance::Support), comment("n", "b", Stance::Support)];
        let rels = Reliabilities::new();
        assert_eq!(aggregate(&comments, &rels, 1e-6).unwrap(), 1e-6);
        assert_eq!(aggregate(&[], &rels, 1e-6), None);
    }

    #[test]
    fn crowd_loss_is_ln2_at_even_split() {
        let comments = vec![
            comment("n1", "a", Stance::Oppose),
            comment("n1", "b", Stance::Support),
            comment("n2", "a", Stance::Oppose),
            comment("n2", "b", Stance::Support),
        ];
        let index = index_comments(comments);
        let train = vec![("n1".to_string(), 1u8), ("n2".to_string(), 0u8)];
        let (loss, _) = crowd_loss_grad(&train, &index, &Reliabilities::new(), 1e-6);
        assert_relative_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    /// 5 users / 6 news toy instance; central finite differences over rho.
    #[test]
    fn crowd_gradient_matches_finite_differences() {
        let users = ["u0", "u1", "u2", "u3", "u4"];
        let mut comments = Vec::new();
        let stances = [
            [Stance::Oppose, Stance::Oppose, Stance::Support, Stance::Oppose, Stance::Support],
            [Stance::Support, Stance::Oppose, Stance::Support, Stance::Support, Stance::Oppose],
            [Stance::Oppose, Stance::Support, Stance::Oppose, Stance::Oppose, Stance::Oppose],
            [Stance::Support, Stance::Support, Stance::Support, Stance::Oppose, Stance::Support],
            [Stance::Oppose, Stance::Oppose, Stance::Oppose, Stance::Support, Stance::Support],
            [Stance::Support, Stance::Oppose, Stance::Support, Stance::Oppose, Stance::Oppose],
        ];
        for (ni, row) in stances.iter().enumerate() {
            for (ui, st) in row.iter().enumerate() {
                comments.push(comment(&format!("n{ni}"), users[ui], *st));
            }
        }
        let index = index_comments(comments);
        let train: Vec<(String, u8)> =
            (0..6).map(|ni| (format!("n{ni}"), (ni % 2) as u8)).collect();
        let rels = rels_with(&[("u0", 0.7), ("u1", 1.3), ("u2", 2.0), ("u3", 0.4), ("u4", 1.0)]);

        let (_, grad) = crowd_loss_grad(&train, &index, &rels, 1e-6);
        let h = 1e-5;
        for user in users {
            let base = rels.rho(user).unwrap();
            let mut up = rels.clone();
            up.set_rho(user, base + h);
            let (lp, _) = crowd_loss_grad(&train, &index, &up, 1e-6);
            let mut dn = rels.clone();
            dn.set_rho(user, base - h);
            let (lm, _) = crowd_loss_grad(&train, &index, &dn, 1e-6);
            let fd = (lp - lm) / (2.0 * h);
            let g = grad.get(user).copied().unwrap_or(0.0);
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                ((fd - g).abs() / denom) <= 1e-4,
                "user {user}: analytic {g} vs fd {fd}"
            );
        }
    }

    #[test]
    fn uniform_rho_shift_leaves_loss_and_gradient_sum_invariant() {
        let comments = vec![
            comment("n1", "a", Stance::Oppose),
            comment("n1", "b", Stance::Support),
            comment("n1", "c", Stance::Oppose),
            comment("n2", "a", Stance::Support),
            comment("n2", "b", Stance::Oppose),
            comment("n2", "c", Stance::Oppose),
        ];
        let index = index_comments(comments);
        let train = vec![("n1".to_string(), 1u8), ("n2".to_string(), 0u8)];
        let rels = rels_with(&[("a", 1.5), ("b", 0.6), ("c", 2.2)]);
        let (loss, grad) = crowd_loss_grad(&train, &index, &rels, 1e-6);
        let mut shifted = rels.clone();
        for u in ["a", "b", "c"] {
            shifted.set_rho(u, shifted.rho(u).unwrap() + 7.3f64.ln());
        }
        let (loss2, _) = crowd_loss_grad(&train, &index, &shifted, 1e-6);
        assert_relative_eq!(loss, loss2, epsilon = 1e-12);
        let gsum: f64 = grad.values().sum();
        assert!(gsum.abs() < 1e-10, "gradient components must sum to zero, got {gsum}");
    }

    #[test]
    fn zero_learning_rate_leaves_reliabilities_unchanged() {
        let comments =
            vec![comment("n1", "a", Stance::Oppose), comment("n1", "b", Stance::Support)];
        let index = index_comments(comments);
        let train = vec![("n1".to_string(), 1u8)];
        let rels = rels_with(&[("a", 1.5), ("b", 0.6)]);
        let (adjusted, summary) = adjust_reliability(rels.clone(), &train, &index, 10, 0.0, 1e-6);
        assert_eq!(adjusted, rels);
        assert_eq!(summary.initial_loss, summary.final_loss);
    }

    #[test]
    fn identical_users_receive_identical_updates() {
        // Two users with the same comment pattern must stay interchangeable.
        let comments = vec![
            comment("n1", "a", Stance::Oppose),
            comment("n1", "b", Stance::Oppose),
            comment("n1", "z", Stance::Support),
            comment("n2", "a", Stance::Support),
            comment("n2", "b", Stance::Support),
            comment("n2", "z", Stance::Oppose),
        ];
        let index = index_comments(comments);
        let train = vec![("n1".to_string(), 1u8), ("n2".to_string(), 0u8)];
        let rels = rels_with(&[("a", 1.2), ("b", 1.2), ("z", 0.8)]);
        let (adjusted, _) = adjust_reliability(rels, &train, &index, 25, 0.3, 1e-6);
        assert_relative_eq!(
            adjusted.rho("a").unwrap(),
            adjusted.rho("b").unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn to_beta_examples() {
        let b = to_beta(2.0 / 3.0, 3, 0.05);
        assert_relative_eq!(b.alpha, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b.beta, 1.0, epsilon = 1e-12);

        assert_eq!(to_beta(0.7, 0, 0.05), BetaDist { alpha: 1.0, beta: 1.0 });

        let b = to_beta(0.5, 40, 0.05);
        assert_eq!(b, BetaDist { alpha: 20.0, beta: 20.0 });
        let (_, var) = b.moments();
        assert_relative_eq!(var, 1.0 / 164.0, epsilon = 1e-12);

        // floor keeps both shapes positive under extreme aggregates
        let b = to_beta(1e-6, 3, 0.05);
        assert_eq!(b.alpha, 0.05);
    }

    #[test]
    fn majority_vote_examples() {
        let mk = |o: usize, s: usize| {
            let mut v = Vec::new();
            for k in 0..o {
                v.push(comment("n", &format!("o{k}"), Stance::Oppose));
            }
            for k in 0..s {
                v.push(comment("n", &format!("s{k}"), Stance::Support));
            }
            v
        };
        assert_eq!(majority_vote(&mk(3, 1)), Some(Verdict::Fake));
        assert_eq!(majority_vote(&mk(2, 2)), Some(Verdict::Tie));
        assert_eq!(majority_vote(&mk(1, 3)), Some(Verdict::True));
        assert_eq!(majority_vote(&[]), None);
        assert!(Verdict::Tie.is_fake(TieRule::Fake));
        assert!(!Verdict::Tie.is_fake(TieRule::True));
    }

    #[test]
    fn weighted_vote_examples() {
        let comments = vec![
            comment("n", "f", Stance::Oppose),
            comment("n", "t1", Stance::Support),
            comment("n", "t2", Stance::Support),
        ];
        let rels = rels_with(&[("f", 0.4), ("t1", 0.3), ("t2", 0.05)]);
        assert_eq!(weighted_vote(&comments, &rels), Some(Verdict::Fake));

        // exactly balanced integer weights tie
        let rels_tie = rels_with(&[("f", 2.0), ("t1", 1.0), ("t2", 1.0)]);
        assert_eq!(weighted_vote(&comments, &rels_tie), Some(Verdict::Tie));
        assert_eq!(weighted_vote(&[], &rels), None);
    }

    #[test]
    fn weighted_vote_equals_majority_under_equal_weights_exhaustive() {
        // every stance pattern with 1..=5 voters
        for n in 1..=5usize {
            for bits in 0..(1u32 << n) {
                let comments: Vec<CommentRecord> = (0..n)
                    .map(|k| {
                        let st = if bits >> k & 1 == 1 { Stance::Oppose } else { Stance::Support };
                        comment("n", &format!("u{k}"), st)
                    })
                    .collect();
                let rels = Reliabilities::new(); // everyone 1.0
                assert_eq!(weighted_vote(&comments, &rels), majority_vote(&comments));
            }
        }
    }

    proptest! {
        /// Scaling every weight by the same positive factor changes neither
        /// the aggregate (within 1e-12) nor any vote verdict.
        #[test]
        fn aggregate_and_votes_scale_invariant(
            weights in proptest::collection::vec(0.01f64..50.0, 2..8),
            lambda in 0.01f64..100.0,
            bits in 0u32..256,
        ) {
            let comments: Vec<CommentRecord> = (0..weights.len())
                .map(|k| {
                    let st = if bits >> k & 1 == 1 { Stance::Oppose } else { Stance::Support };
                    comment("n", &format!("u{k}"), st)
                })
                .collect();
            let base: Vec<(String, f64)> = weights
                .iter()
                .enumerate()
                .map(|(k, w)| (format!("u{k}"), *w))
                .collect();
            let mut r1 = Reliabilities::new();
            let mut r2 = Reliabilities::new();
            for (u, w) in &base {
                r1.set_rho(u, w.ln());
                r2.set_rho(u, (w * lambda).ln());
            }
            let e1 = aggregate(&comments, &r1, 1e-6).unwrap();
            let e2 = aggregate(&comments, &r2, 1e-6).unwrap();
            prop_assert!((e1 - e2).abs() <= 1e-12);
            prop_assert_eq!(weighted_vote(&comments, &r1), weighted_vote(&comments, &r2));
        }

        /// Any news with a correct commenter has difficulty at least
        /// 1/n_users, so the reliability formula never divides by zero.
        #[test]
        fn correct_commenter_bounds_difficulty(bits in 0u32..1024, label in 0u8..2) {
            let n = 10usize;
            let comments: Vec<CommentRecord> = (0..n)
                .map(|k| {
                    let st = if bits >> k & 1 == 1 { Stance::Oppose } else { Stance::Support };
                    comment("n", &format!("u{k}"), st)
                })
                .collect();
            let index = index_comments(comments.clone());
            let labels = BTreeMap::from([("n".to_string(), label)]);
            let diffs = compute_difficulty(&index, &labels);
            let d = &diffs["n"];
            let any_correct = comments.iter().any(|c| is_correct(c.stance, label));
            if any_correct {
                prop_assert!(d.d >= 1.0 / d.n_users as f64 && d.d <= 1.0);
            } else {
                prop_assert_eq!(d.d, 0.0);
            }
        }

        /// alpha + beta = n and the Beta mean reproduces the aggregate
        /// whenever the floor does not trigger.
        #[test]
        fn beta_strength_and_mean(e in 0.05f64..0.95, n in 1usize..60) {
            let b = to_beta(e, n, 0.05);
            if e * n as f64 >= 0.05 && (1.0 - e) * n as f64 >= 0.05 {
                prop_assert!((b.alpha + b.beta - n as f64).abs() < 1e-9);
                let (mean, _) = b.moments();
                prop_assert!((mean - e).abs() < 1e-9);
            }
        }
    }
}
