//! Event discovery and the two-layer event/keyframe presentation.
//!
//! Videos are assumed to cover a single event each, so events are found by
//! clustering videos: the visual and textual graphs are blended linearly and
//! the blend is split by normalized-cut spectral clustering. Selected
//! keyframes then follow their source video into its event.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::QueryCorpus;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::kmeans::{kmeans, KMeansConfig};
use crate::solver::Summary;
use crate::textgraph::TextModel;

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const MAX_LABEL_WORDS: usize = 10;
const MAX_AUTO_EVENTS: usize = 10;

/// Number of events to cut the graph into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KEvents {
    /// Chosen by the largest eigengap of the normalized Laplacian.
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for KEvents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KEvents::Auto => f.write_str("auto"),
            KEvents::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KEvents {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KEvents::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KEvents::Fixed(k)),
            _ => Err(format!("expected a positive integer or `auto`, got `{s}`")),
        }
    }
}

impl Serialize for KEvents {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KEvents::Auto => s.serialize_str("auto"),
            KEvents::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KEvents {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) if k > 0 => Ok(KEvents::Fixed(k)),
            Raw::Count(k) => Err(serde::de::Error::custom(format!("k_events must be positive, got {k}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Weight of the visual graph; the textual graph gets `1 − alpha`.
    pub alpha: f64,
    pub k_events: KEvents,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            k_events: KEvents::Auto,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `W_f = alpha · W_visual + (1 − alpha) · W_textual`.
pub fn fuse_graphs(
    visual: &SimilarityGraph,
    textual: &SimilarityGraph,
    alpha: f64,
) -> Result<SimilarityGraph> {
    FusionConfig {
        alpha,
        k_events: KEvents::Auto,
    }
    .validate()?;
    if visual.node_ids() != textual.node_ids() {
        return Err(Error::NodeMismatch);
    }
    Ok(SimilarityGraph::from_pairs(visual.node_ids().to_vec(), |i, j| {
        alpha * visual.weight(i, j) + (1.0 - alpha) * textual.weight(i, j)
    }))
}

/// Assignment of every graph node to exactly one event. Event ids are dense
/// and numbered by first appearance in node order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub node_ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl Partition {
    fn canonical(node_ids: Vec<String>, raw: &[usize]) -> Self {
        let mut map = HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { node_ids, labels }
    }

    pub fn event_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn event_of(&self, node_id: &str) -> Option<usize> {
        self.node_ids
            .iter()
            .position(|n| n == node_id)
            .map(|i| self.labels[i])
    }

    pub fn members(&self, event: usize) -> impl Iterator<Item = &str> {
        self.node_ids
            .iter()
            .zip(&self.labels)
            .filter(move |(_, &l)| l == event)
            .map(|(n, _)| n.as_str())
    }

    pub fn as_map(&self) -> BTreeMap<String, usize> {
        self.node_ids.iter().cloned().zip(self.labels.iter().copied()).collect()
    }
}

/// Sorted eigenpairs of the normalized Laplacian of a graph without
/// isolated nodes.
fn laplacian_spectrum(graph: &SimilarityGraph, nodes: &[usize]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = nodes.len();
    let inv_sqrt_deg: Vec<f64> = nodes.iter().map(|&i| 1.0 / graph.degree(i).sqrt()).collect();
    let laplacian = DMatrix::from_fn(n, n, |r, c| {
        let w = graph.weight(nodes[r], nodes[c]) * inv_sqrt_deg[r] * inv_sqrt_deg[c];
        if r == c {
            1.0 - w
        } else {
            -w
        }
    });
    let eig = SymmetricEigen::try_new(laplacian, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("eigen-decomposition did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigen-decomposition produced non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Index of the largest gap among the first `min(10, n)` eigenvalues,
/// clamped to `[2, 10]` and to the node count.
pub fn eigengap_k(eigenvalues: &[f64]) -> usize {
    let m = eigenvalues.len().min(MAX_AUTO_EVENTS);
    let mut best = (2, f64::NEG_INFINITY);
    for i in 1..m {
        let gap = eigenvalues[i] - eigenvalues[i - 1];
        if gap > best.1 {
            best = (i, gap);
        }
    }
    best.0.clamp(2, MAX_AUTO_EVENTS).min(eigenvalues.len())
}

/// Normalized-cut spectral clustering of the graph's nodes into events.
/// Isolated nodes each become their own event.
pub fn graph_cut(graph: &SimilarityGraph, k_events: KEvents, seed: u64) -> Result<Partition> {
    let n = graph.len();
    if n == 0 {
        return Err(Error::TooFewNodes { required: 2, found: 0 });
    }
    if n < 2 {
        return Err(Error::TooFewNodes { required: 2, found: n });
    }
    if let KEvents::Fixed(k) = k_events {
        if k == 0 || k > n {
            return Err(Error::InvalidConfig(format!(
                "k_events = {k} must lie in [1, {n}]"
            )));
        }
    }

    let (connected, isolated): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| graph.degree(i) > 0.0);
    let mut raw = vec![0usize; n];
    let mut next_label = 0;

    if !connected.is_empty() {
        let nc = connected.len();
        let labels = if nc == 1 {
            vec![0]
        } else {
            let (values, vectors) = laplacian_spectrum(graph, &connected)?;
            let k = match k_events {
                KEvents::Auto => eigengap_k(&values),
                KEvents::Fixed(k) => k.saturating_sub(isolated.len()).max(1),
            }
            .min(nc);
            if k == 1 {
                vec![0; nc]
            } else {
                let rows: Vec<Vec<f64>> = (0..nc)
                    .map(|r| {
                        let row: Vec<f64> = (0..k).map(|c| vectors[(r, c)]).collect();
                        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 0.0 {
                            row.iter().map(|v| v / norm).collect()
                        } else {
                            row
                        }
                    })
                    .collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                kmeans(&rows, &KMeansConfig::new(k), &mut rng).labels
            }
        };
        for (&node, &l) in connected.iter().zip(&labels) {
            raw[node] = l;
        }
        next_label = labels.iter().max().map_or(0, |m| m + 1);
    }
    for &node in &isolated {
        raw[node] = next_label;
        next_label += 1;
    }
    Ok(Partition::canonical(graph.node_ids().to_vec(), &raw))
}

/// Up to ten words per event: the heaviest word clusters by summed TF-IDF
/// weight over the event's videos (ties by cluster id), each represented by
/// its member word found in the most documents (ties alphabetical).
pub fn label_events(partition: &Partition, text: &TextModel) -> BTreeMap<usize, Vec<String>> {
    let by_video: HashMap<&str, &BTreeMap<usize, f64>> = text
        .tfidf
        .iter()
        .map(|v| (v.video_id.as_str(), &v.weights))
        .collect();
    let mut labels = BTreeMap::new();
    for event in 0..partition.event_count() {
        let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
        for video in partition.members(event) {
            if let Some(weights) = by_video.get(video) {
                for (&cluster, &w) in weights.iter() {
                    *totals.entry(cluster).or_insert(0.0) += w;
                }
            }
        }
        let mut ranked: Vec<(usize, f64)> = totals.into_iter().filter(|(_, w)| *w > 0.0).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let words = ranked
            .iter()
            .take(MAX_LABEL_WORDS)
            .filter_map(|&(cluster, _)| representative_word(text, cluster))
            .collect();
        labels.insert(event, words);
    }
    labels
}

fn representative_word(text: &TextModel, cluster: usize) -> Option<String> {
    text.clustering.members.get(cluster)?.iter().min_by(|a, b| {
        let da = text.word_df.get(*a).copied().unwrap_or(0);
        let db = text.word_df.get(*b).copied().unwrap_or(0);
        db.cmp(&da).then_with(|| a.cmp(b))
    }).cloned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventKeyframe {
    pub frame_id: String,
    pub video_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGroup {
    pub event_id: usize,
    pub label_words: Vec<String>,
    /// Member videos by upload time, then id.
    pub video_ids: Vec<String>,
    /// Keyframes by video upload time, then play order.
    pub keyframes: Vec<EventKeyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub query: String,
    /// Events holding at least one selected keyframe, in presentation order.
    pub events: Vec<EventGroup>,
    /// Events without selected keyframes, kept for diagnostics.
    #[serde(default)]
    pub hidden_events: Vec<EventGroup>,
}

impl EventSummary {
    pub fn keyframe_count(&self) -> usize {
        self.events.iter().map(|e| e.keyframes.len()).sum()
    }
}

/// Groups the selected keyframes by the event of their source video and
/// orders events and keyframes chronologically.
pub fn assemble_ekp(
    summary: &Summary,
    partition: &Partition,
    labels: &BTreeMap<usize, Vec<String>>,
    corpus: &QueryCorpus,
) -> Result<EventSummary> {
    let corpus_ids: BTreeSet<&str> = corpus.videos().iter().map(|v| v.video_id.as_str()).collect();
    let partition_ids: BTreeSet<&str> = partition.node_ids.iter().map(String::as_str).collect();
    if corpus_ids != partition_ids || partition_ids.len() != partition.node_ids.len() {
        return Err(Error::NodeMismatch);
    }

    // (upload_time, video_id) orders videos chronologically with a total tie-break.
    let video_key = |id: &str| {
        let v = corpus.video(id).expect("partition ids checked against corpus");
        (v.upload_time, v.video_id.clone())
    };

    let event_count = partition.event_count();
    let mut keyframes: Vec<Vec<(i64, String, u32, EventKeyframe)>> = vec![Vec::new(); event_count];
    for kf in &summary.keyframes {
        let frame = corpus
            .frame(&kf.frame_id)
            .ok_or_else(|| Error::UnknownFrame(kf.frame_id.clone()))?;
        let event = partition
            .event_of(&frame.video_id)
            .ok_or_else(|| Error::UnknownVideo(frame.video_id.clone()))?;
        let (time, vid) = video_key(&frame.video_id);
        keyframes[event].push((
            time,
            vid,
            frame.play_order,
            EventKeyframe {
                frame_id: kf.frame_id.clone(),
                video_id: frame.video_id.clone(),
                score: kf.score,
            },
        ));
    }

    let mut groups: Vec<((i64, String), EventGroup)> = Vec::with_capacity(event_count);
    for (event, mut frames) in keyframes.into_iter().enumerate() {
        let mut videos: Vec<(i64, String)> = partition.members(event).map(video_key).collect();
        videos.sort();
        frames.sort_by(|a, b| {
            (a.0, &a.1, a.2)
                .cmp(&(b.0, &b.1, b.2))
                .then_with(|| a.3.frame_id.cmp(&b.3.frame_id))
        });
        let earliest = videos[0].clone();
        groups.push((
            earliest,
            EventGroup {
                event_id: event,
                label_words: labels.get(&event).cloned().unwrap_or_default(),
                video_ids: videos.into_iter().map(|(_, id)| id).collect(),
                keyframes: frames.into_iter().map(|f| f.3).collect(),
            },
        ));
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.event_id.cmp(&b.1.event_id)));

    let (shown, hidden): (Vec<_>, Vec<_>) = groups
        .into_iter()
        .map(|(_, g)| g)
        .partition(|g| !g.keyframes.is_empty());
    Ok(EventSummary {
        query: corpus.query().to_string(),
        events: shown,
        hidden_events: hidden,
    })
}

/// Orders two events for presentation by their earliest member video.
pub fn compare_events(a: &EventGroup, b: &EventGroup, corpus: &QueryCorpus) -> Ordering {
    let first = |g: &EventGroup| {
        g.video_ids
            .first()
            .and_then(|id| corpus.video(id))
            .map(|v| (v.upload_time, v.video_id.clone()))
    };
    first(a).cmp(&first(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CandidateKeyframe, FeatureVector, VideoRecord};
    use crate::solver::ScoredFrame;

    fn graph(n: usize, w: impl Fn(usize, usize) -> f64) -> SimilarityGraph {
        SimilarityGraph::from_pairs((0..n).map(|i| format!("v{i}")).collect(), w)
    }

    #[test]
    fn fusion_examples() {
        let v = graph(2, |_, _| 0.5);
        let t = graph(2, |_, _| 0.2);
        assert_eq!(fuse_graphs(&v, &t, 1.0).unwrap(), v);
        assert_eq!(fuse_graphs(&v, &t, 0.0).unwrap(), t);
        let f = fuse_graphs(&v, &t, 0.7).unwrap();
        assert!((f.weight(0, 1) - 0.41).abs() < 1e-15);
        assert!(fuse_graphs(&v, &t, 1.2).is_err());
        let other = SimilarityGraph::from_pairs(vec!["x".into(), "y".into()], |_, _| 0.1);
        assert!(matches!(fuse_graphs(&v, &other, 0.5), Err(Error::NodeMismatch)));
    }

    #[test]
    fn isolated_nodes_get_their_own_event() {
        // v0-v1 linked, v2 and v3 isolated.
        let g = graph(4, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.0 });
        let p = graph_cut(&g, KEvents::Fixed(3), 0).unwrap();
        assert_eq!(p.labels, vec![0, 0, 1, 2]);
        // Auto never goes below two events for the connected part.
        let p = graph_cut(&g, KEvents::Auto, 0).unwrap();
        assert_eq!(p.labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn graph_cut_rejects_bad_sizes() {
        assert!(graph_cut(&graph(1, |_, _| 0.0), KEvents::Auto, 0).is_err());
        assert!(graph_cut(&graph(0, |_, _| 0.0), KEvents::Auto, 0).is_err());
        assert!(graph_cut(&graph(3, |_, _| 1.0), KEvents::Fixed(4), 0).is_err());
    }

    #[test]
    fn eigengap_picks_block_count() {
        assert_eq!(eigengap_k(&[0.0, 0.0, 0.01, 0.9, 1.0, 1.1]), 3);
        assert_eq!(eigengap_k(&[0.0, 1.0, 1.0]), 2);
        assert_eq!(eigengap_k(&[0.0, 0.5]), 2);
    }

    #[test]
    fn k_events_parsing_and_serde() {
        assert_eq!("auto".parse::<KEvents>().unwrap(), KEvents::Auto);
        assert_eq!("4".parse::<KEvents>().unwrap(), KEvents::Fixed(4));
        assert!("0".parse::<KEvents>().is_err());
        assert_eq!(serde_json::to_string(&KEvents::Fixed(3)).unwrap(), "3");
        assert_eq!(serde_json::from_str::<KEvents>("\"auto\"").unwrap(), KEvents::Auto);
        assert_eq!(serde_json::from_str::<KEvents>("5").unwrap(), KEvents::Fixed(5));
    }

    fn corpus_with_times(times: &[(&str, i64, usize)]) -> QueryCorpus {
        let videos = times
            .iter()
            .map(|&(id, t, frames)| VideoRecord {
                video_id: id.into(),
                title: String::new(),
                description: String::new(),
                upload_time: t,
                frames: (0..frames)
                    .map(|i| CandidateKeyframe {
                        frame_id: format!("{id}_{i}"),
                        video_id: id.into(),
                        shot_index: i as u32,
                        play_order: i as u32,
                        feature: FeatureVector::new(vec![1.0]),
                    })
                    .collect(),
            })
            .collect();
        QueryCorpus::new("q", 1, videos, vec![], None).unwrap()
    }

    fn summary(ids: &[(&str, f64)]) -> Summary {
        Summary {
            keyframes: ids
                .iter()
                .map(|&(id, score)| ScoredFrame {
                    frame_id: id.into(),
                    score,
                })
                .collect(),
            threshold_used: 0.01,
        }
    }

    #[test]
    fn earlier_event_comes_first() {
        let corpus = corpus_with_times(&[("a", 200, 1), ("b", 100, 1)]);
        let partition = Partition {
            node_ids: vec!["a".into(), "b".into()],
            labels: vec![0, 1],
        };
        let ekp = assemble_ekp(
            &summary(&[("a_0", 0.9), ("b_0", 0.2)]),
            &partition,
            &BTreeMap::new(),
            &corpus,
        )
        .unwrap();
        let order: Vec<_> = ekp.events.iter().map(|e| e.event_id).collect();
        assert_eq!(order, [1, 0]);
        assert_eq!(compare_events(&ekp.events[0], &ekp.events[1], &corpus), Ordering::Less);
    }

    #[test]
    fn keyframes_follow_play_order_and_empty_events_hide() {
        let corpus = corpus_with_times(&[("a", 0, 3), ("b", 5, 1)]);
        let partition = Partition {
            node_ids: vec!["a".into(), "b".into()],
            labels: vec![0, 1],
        };
        let ekp = assemble_ekp(
            &summary(&[("a_2", 0.9), ("a_0", 0.5), ("a_1", 0.7)]),
            &partition,
            &BTreeMap::new(),
            &corpus,
        )
        .unwrap();
        let ids: Vec<_> = ekp.events[0].keyframes.iter().map(|k| k.frame_id.as_str()).collect();
        assert_eq!(ids, ["a_0", "a_1", "a_2"]);
        assert_eq!(ekp.events.len(), 1);
        assert_eq!(ekp.hidden_events.len(), 1);
        assert_eq!(ekp.hidden_events[0].video_ids, ["b"]);
    }

    #[test]
    fn unknown_frame_and_partition_mismatch() {
        let corpus = corpus_with_times(&[("a", 0, 1), ("b", 5, 1)]);
        let partition = Partition {
            node_ids: vec!["a".into(), "b".into()],
            labels: vec![0, 0],
        };
        let err = assemble_ekp(&summary(&[("zz", 0.3)]), &partition, &BTreeMap::new(), &corpus).unwrap_err();
        assert!(matches!(err, Error::UnknownFrame(_)));
        let short = Partition {
            node_ids: vec!["a".into()],
            labels: vec![0],
        };
        assert!(assemble_ekp(&summary(&[]), &short, &BTreeMap::new(), &corpus).is_err());
    }
}
