//! Summary evaluation against annotators and inter-annotator consistency.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{GroundTruth, QueryCorpus};
use crate::error::{Error, Result};
use crate::linalg::normalized;
use crate::solver::Summary;

pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.6;

/// Which side drives the greedy match-and-exclude loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOrder {
    /// Generated keyframes by descending score, each taking its nearest
    /// unmatched ground-truth frame.
    #[default]
    GeneratedFirst,
    /// Ground-truth frames by id, each taking its nearest unmatched
    /// generated keyframe.
    TruthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Two keyframes match when their normalized distance is strictly below
    /// this value. A threshold of 0 matches nothing.
    pub distance_threshold: f64,
    #[serde(default)]
    pub order: MatchOrder,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            distance_threshold: DEFAULT_DISTANCE_THRESHOLD,
            order: MatchOrder::GeneratedFirst,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.distance_threshold) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "distance threshold must lie in [0, 1], got {}",
                self.distance_threshold
            )))
        }
    }
}

/// Euclidean distance between the L2-normalized vectors, halved so it lies
/// in `[0, 1]`. `None` when either vector is zero.
pub fn normalized_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let (u, v) = (normalized(a)?, normalized(b)?);
    Some(crate::linalg::squared_distance(&u, &v).sqrt() / 2.0)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    /// Matched `(generated, ground truth)` frame ids in matching order.
    pub pairs: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl MatchOutcome {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }
}

struct Unit {
    id: String,
    vector: Option<Vec<f64>>,
}

fn units<'a>(
    ids: impl Iterator<Item = &'a str>,
    corpus: &QueryCorpus,
    warnings: &mut Vec<String>,
) -> Result<Vec<Unit>> {
    ids.map(|id| {
        let frame = corpus
            .frame(id)
            .ok_or_else(|| Error::UnknownFrame(id.to_string()))?;
        let vector = normalized(frame.feature.as_f64());
        let warning = format!("frame `{id}` has a zero feature vector and cannot match");
        if vector.is_none() && !warnings.contains(&warning) {
            warnings.push(warning);
        }
        Ok(Unit {
            id: id.to_string(),
            vector,
        })
    })
    .collect()
}

/// Greedy match-and-exclude: each driving keyframe takes the nearest still
/// unmatched keyframe on the other side if that distance is below the
/// threshold, and both leave the pool.
pub fn match_keyframes(
    generated: &Summary,
    truth: &BTreeSet<String>,
    corpus: &QueryCorpus,
    config: &MatchConfig,
) -> Result<MatchOutcome> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut ranked = generated.keyframes.clone();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.frame_id.cmp(&b.frame_id)));
    let gen_units = units(ranked.iter().map(|k| k.frame_id.as_str()), corpus, &mut warnings)?;
    let truth_units = units(truth.iter().map(String::as_str), corpus, &mut warnings)?;

    let (drivers, pool, generated_drives) = match config.order {
        MatchOrder::GeneratedFirst => (&gen_units, &truth_units, true),
        MatchOrder::TruthFirst => (&truth_units, &gen_units, false),
    };
    let mut taken = vec![false; pool.len()];
    let mut pairs = Vec::new();
    for driver in drivers {
        let Some(u) = &driver.vector else { continue };
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in pool.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let Some(v) = &cand.vector else { continue };
            let d = crate::linalg::squared_distance(u, v).sqrt() / 2.0;
            // Strict comparison keeps the earliest candidate on ties.
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, d)) = best {
            if d < config.distance_threshold {
                taken[i] = true;
                let pair = if generated_drives {
                    (driver.id.clone(), pool[i].id.clone())
                } else {
                    (pool[i].id.clone(), driver.id.clone())
                };
                pairs.push(pair);
            }
        }
    }
    Ok(MatchOutcome { pairs, warnings })
}

/// F-score from precision and recall; 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorMetrics {
    pub n_matched: usize,
    pub n_generated: usize,
    pub n_ground_truth: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Set when precision or recall had an empty denominator.
    pub degenerate: bool,
}

impl AnnotatorMetrics {
    pub fn from_counts(n_matched: usize, n_generated: usize, n_ground_truth: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(n_matched, n_generated);
        let recall = ratio(n_matched, n_ground_truth);
        Self {
            n_matched,
            n_generated,
            n_ground_truth,
            precision,
            recall,
            f_score: f_score(precision, recall),
            degenerate: n_generated == 0 || n_ground_truth == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_annotator: BTreeMap<String, AnnotatorMetrics>,
    pub average: AverageMetrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Precision, recall and F-score against every annotator, plus their mean.
pub fn prf(
    generated: &Summary,
    ground_truth: &GroundTruth,
    corpus: &QueryCorpus,
    config: &MatchConfig,
) -> Result<MetricsReport> {
    if ground_truth.is_empty() {
        return Err(Error::InvalidGroundTruth("no annotators".into()));
    }
    let mut per_annotator = BTreeMap::new();
    let mut warnings = Vec::new();
    for (annotator, truth) in &ground_truth.annotators {
        let outcome = match_keyframes(generated, truth, corpus, config)?;
        for w in outcome.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        per_annotator.insert(
            annotator.clone(),
            AnnotatorMetrics::from_counts(outcome.pairs.len(), generated.len(), truth.len()),
        );
    }
    if generated.is_empty() {
        warnings.push("generated summary is empty; precision is 0 by convention".into());
    }
    let m = per_annotator.len() as f64;
    let mean = |f: fn(&AnnotatorMetrics) -> f64| per_annotator.values().map(f).sum::<f64>() / m;
    let average = AverageMetrics {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f_score: mean(|r| r.f_score),
    };
    Ok(MetricsReport {
        per_annotator,
        average,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Mean pairwise F-score of each annotator against all others.
    pub per_annotator: BTreeMap<String, f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Human label consistency with exact frame-id matching.
pub fn consistency(ground_truth: &GroundTruth) -> Result<ConsistencyReport> {
    let n = ground_truth.len();
    if n < 2 {
        return Err(Error::TooFewAnnotators(n));
    }
    if let Some((a, _)) = ground_truth.annotators.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::InvalidGroundTruth(format!("annotator `{a}` selected no keyframes")));
    }
    let mut per_annotator = BTreeMap::new();
    for (i, si) in &ground_truth.annotators {
        let total: f64 = ground_truth
            .annotators
            .iter()
            .filter(|(j, _)| *j != i)
            .map(|(_, sj)| {
                let common = si.intersection(sj).count() as f64;
                f_score(common / si.len() as f64, common / sj.len() as f64)
            })
            .sum();
        per_annotator.insert(i.clone(), total / (n - 1) as f64);
    }
    let values = per_annotator.values().copied();
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.sum::<f64>() / n as f64;
    Ok(ConsistencyReport {
        per_annotator,
        min,
        max,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CandidateKeyframe, FeatureVector, VideoRecord};
    use crate::solver::ScoredFrame;

    fn corpus(frames: &[(&str, &[f32])]) -> QueryCorpus {
        let d = frames[0].1.len();
        let video = VideoRecord {
            video_id: "v".into(),
            title: String::new(),
            description: String::new(),
            upload_time: 0,
            frames: frames
                .iter()
                .enumerate()
                .map(|(i, (id, v))| CandidateKeyframe {
                    frame_id: id.to_string(),
                    video_id: "v".into(),
                    shot_index: i as u32,
                    play_order: i as u32,
                    feature: FeatureVector::new(v.to_vec()),
                })
                .collect(),
        };
        QueryCorpus::new("q", d, vec![video], vec![], None).unwrap()
    }

    fn summary(ids: &[(&str, f64)]) -> Summary {
        Summary {
            keyframes: ids
                .iter()
                .map(|&(id, score)| ScoredFrame { frame_id: id.into(), score })
                .collect(),
            threshold_used: 0.01,
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn gt(entries: &[(&str, &[&str])]) -> GroundTruth {
        GroundTruth::new(entries.iter().map(|(a, ids)| (a.to_string(), set(ids))).collect())
    }

    #[test]
    fn identical_sets_match_fully() {
        let c = corpus(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let out = match_keyframes(&summary(&[("a", 0.5), ("b", 0.4)]), &set(&["a", "b"]), &c, &MatchConfig::default()).unwrap();
        assert_eq!(out.matched(), 2);
    }

    #[test]
    fn orthogonal_frames_never_match() {
        let c = corpus(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let d = normalized_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((d - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let out = match_keyframes(&summary(&[("a", 0.5)]), &set(&["b"]), &c, &MatchConfig::default()).unwrap();
        assert_eq!(out.matched(), 0);
    }

    #[test]
    fn exclusion_prevents_double_counting() {
        let c = corpus(&[("g1", &[1.0, 0.05]), ("g2", &[1.0, 0.1]), ("t", &[1.0, 0.0])]);
        let s = summary(&[("g1", 0.5), ("g2", 0.4)]);
        for order in [MatchOrder::GeneratedFirst, MatchOrder::TruthFirst] {
            let cfg = MatchConfig { order, ..Default::default() };
            let out = match_keyframes(&s, &set(&["t"]), &c, &cfg).unwrap();
            assert_eq!(out.pairs, vec![("g1".to_string(), "t".to_string())]);
        }
    }

    #[test]
    fn zero_threshold_matches_nothing() {
        let c = corpus(&[("a", &[1.0, 0.0])]);
        let cfg = MatchConfig { distance_threshold: 0.0, ..Default::default() };
        let out = match_keyframes(&summary(&[("a", 1.0)]), &set(&["a"]), &c, &cfg).unwrap();
        assert_eq!(out.matched(), 0);
    }

    #[test]
    fn zero_vectors_warn() {
        let c = corpus(&[("a", &[0.0, 0.0]), ("b", &[1.0, 0.0])]);
        let out = match_keyframes(&summary(&[("a", 1.0)]), &set(&["a"]), &c, &MatchConfig::default()).unwrap();
        assert_eq!(out.matched(), 0);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn unknown_frame_is_an_error() {
        let c = corpus(&[("a", &[1.0])]);
        let err = match_keyframes(&summary(&[("x", 1.0)]), &set(&["a"]), &c, &MatchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownFrame(_)));
    }

    #[test]
    fn prf_arithmetic() {
        let m = AnnotatorMetrics::from_counts(3, 6, 5);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.6);
        assert!((m.f_score - 2.0 * 0.5 * 0.6 / 1.1).abs() < 1e-12);
        let empty = AnnotatorMetrics::from_counts(0, 0, 4);
        assert_eq!((empty.precision, empty.f_score), (0.0, 0.0));
        assert!(empty.degenerate);
    }

    #[test]
    fn empty_summary_is_degenerate_not_an_error() {
        let c = corpus(&[("a", &[1.0])]);
        let r = prf(&summary(&[]), &gt(&[("x", &["a"])]), &c, &MatchConfig::default()).unwrap();
        assert_eq!(r.average.precision, 0.0);
        assert!(r.per_annotator["x"].degenerate);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn consistency_examples() {
        let same = consistency(&gt(&[("a", &["1", "2"]), ("b", &["1", "2"]), ("c", &["1", "2"])])).unwrap();
        assert!(same.per_annotator.values().all(|v| *v == 1.0));
        assert_eq!(same.mean, 1.0);
        let disjoint = consistency(&gt(&[("a", &["1"]), ("b", &["2"])])).unwrap();
        assert_eq!((disjoint.min, disjoint.max, disjoint.mean), (0.0, 0.0, 0.0));
        assert!(matches!(consistency(&gt(&[("a", &["1"])])), Err(Error::TooFewAnnotators(1))));
        assert!(consistency(&gt(&[("a", &["1"]), ("b", &[])])).is_err());
    }

    #[test]
    fn threshold_must_be_in_unit_interval() {
        assert!(MatchConfig { distance_threshold: 1.1, ..Default::default() }.validate().is_err());
        assert!(MatchConfig { distance_threshold: -0.1, ..Default::default() }.validate().is_err());
    }
}
