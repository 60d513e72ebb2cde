//! Helpers shared by the integration suites: rank statistics and small
//! corpus builders. Oracles here stay independent of the library paths they
//! check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rahi::config::Config;
use rahi::crowd::index_comments;
use rahi::dataio::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
use rahi::pipeline::SplitDataset;

/// Average ranks (1-based) with ties sharing the mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma).powi(2);
        db += (rb[i] - mb).powi(2);
    }
    num / (da * db).sqrt()
}

/// Shrunk configuration that keeps the training-based suites fast while
/// exercising every stage.
pub fn test_config() -> Config {
    Config {
        feature_dim: 256,
        hidden: 16,
        mc_passes: 25,
        machine_lr: 0.5,
        epochs: 25,
        patience: 8,
        ..Config::default()
    }
}

/// Generates a corpus from the config's synthetic block and splits it.
pub fn synthetic_split(cfg: &Config, seed: u64, tweak: impl FnOnce(&mut SyntheticSpec)) -> (SyntheticCorpus, SplitDataset) {
    let mut spec = SyntheticSpec::from_config(cfg, seed);
    tweak(&mut spec);
    let corpus = generate_synthetic(&spec);
    let index = index_comments(corpus.comments.iter().cloned());
    let counts: BTreeMap<String, usize> = index.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    let data = SplitDataset::split(corpus.news.clone(), index, counts, cfg, seed);
    (corpus, data)
}
