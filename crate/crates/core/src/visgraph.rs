//! Visual similarity graph: videos sharing many near-duplicate candidate
//! keyframes are strongly linked.

use serde::{Deserialize, Serialize};

use crate::corpus::{QueryCorpus, VideoRecord};
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::linalg::{dot, normalized};

pub const DEFAULT_TAU_ND: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearDuplicateConfig {
    /// Two frames are near-duplicates when their cosine similarity is at
    /// least this value.
    pub tau_nd: f64,
}

impl Default for NearDuplicateConfig {
    fn default() -> Self {
        Self {
            tau_nd: DEFAULT_TAU_ND,
        }
    }
}

impl NearDuplicateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_nd > 0.0 && self.tau_nd <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "tau_nd must lie in (0, 1], got {}",
                self.tau_nd
            )))
        }
    }
}

/// Unit-normalized frame features of one video; zero vectors are `None`.
fn unit_frames(video: &VideoRecord) -> Vec<Option<Vec<f64>>> {
    video
        .frames
        .iter()
        .map(|f| normalized(f.feature.as_f64()))
        .collect()
}

fn count_pairs(a: &[Option<Vec<f64>>], b: &[Option<Vec<f64>>], tau: f64) -> usize {
    a.iter()
        .flatten()
        .map(|u| b.iter().flatten().filter(|v| dot(u, v) >= tau).count())
        .sum()
}

/// Number of frame pairs `(f ∈ a, g ∈ b)` with `cos(f, g) ≥ tau_nd`.
/// Zero-norm frames are never near-duplicates.
pub fn near_duplicate_count(a: &VideoRecord, b: &VideoRecord, config: &NearDuplicateConfig) -> usize {
    for video in [a, b] {
        for f in &video.frames {
            if normalized(f.feature.as_f64()).is_none() {
                log::warn!("frame `{}` has a zero feature vector; never a near-duplicate", f.frame_id);
            }
        }
    }
    count_pairs(&unit_frames(a), &unit_frames(b), config.tau_nd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualGraph {
    pub graph: SimilarityGraph,
    /// Frames that could not take part in near-duplicate detection.
    pub warnings: Vec<String>,
}

/// `W_ij = N_dk / L_ij` with `L_ij` the mean frame count of the two videos,
/// clamped to `[0, 1]`.
pub fn visual_graph(corpus: &QueryCorpus, config: &NearDuplicateConfig) -> Result<VisualGraph> {
    config.validate()?;
    let videos = corpus.videos();
    if videos.len() < 2 {
        return Err(Error::TooFewNodes {
            required: 2,
            found: videos.len(),
        });
    }
    let units: Vec<_> = videos.iter().map(unit_frames).collect();
    let mut warnings = Vec::new();
    for (video, u) in videos.iter().zip(&units) {
        for (frame, unit) in video.frames.iter().zip(u) {
            if unit.is_none() {
                warnings.push(format!(
                    "frame `{}` has a zero feature vector; never a near-duplicate",
                    frame.frame_id
                ));
            }
        }
    }
    let ids = videos.iter().map(|v| v.video_id.clone()).collect();
    let graph = SimilarityGraph::from_pairs(ids, |i, j| {
        let count = count_pairs(&units[i], &units[j], config.tau_nd) as f64;
        let mean_frames = (videos[i].frames.len() + videos[j].frames.len()) as f64 / 2.0;
        (count / mean_frames).clamp(0.0, 1.0)
    });
    Ok(VisualGraph { graph, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CandidateKeyframe, FeatureVector};

    fn video(id: &str, frames: &[&[f32]]) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            title: String::new(),
            description: String::new(),
            upload_time: 0,
            frames: frames
                .iter()
                .enumerate()
                .map(|(i, v)| CandidateKeyframe {
                    frame_id: format!("{id}_{i}"),
                    video_id: id.into(),
                    shot_index: i as u32,
                    play_order: i as u32,
                    feature: FeatureVector::new(v.to_vec()),
                })
                .collect(),
        }
    }

    fn graph_of(videos: Vec<VideoRecord>) -> SimilarityGraph {
        let d = videos[0].frames[0].feature.len();
        let corpus = QueryCorpus::new("q", d, videos, vec![], None).unwrap();
        visual_graph(&corpus, &NearDuplicateConfig::default()).unwrap().graph
    }

    #[test]
    fn count_examples() {
        let cfg = NearDuplicateConfig::default();
        let same = video("a", &[&[1.0, 2.0]]);
        assert_eq!(near_duplicate_count(&same, &video("b", &[&[2.0, 4.0]]), &cfg), 1);
        assert_eq!(near_duplicate_count(&video("a", &[&[1.0, 0.0]]), &video("b", &[&[0.0, 1.0]]), &cfg), 0);
        let a = video("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = video("b", &[&[1.0, 0.0]]);
        assert_eq!(near_duplicate_count(&a, &b, &cfg), 1);
        assert_eq!(near_duplicate_count(&b, &a, &cfg), 1);
    }

    #[test]
    fn zero_frames_never_match() {
        let cfg = NearDuplicateConfig::default();
        let a = video("a", &[&[0.0, 0.0]]);
        assert_eq!(near_duplicate_count(&a, &a.clone(), &cfg), 0);
    }

    #[test]
    fn edge_weight_examples() {
        let g = graph_of(vec![video("a", &[&[1.0, 0.0]]), video("b", &[&[1.0, 0.0]])]);
        assert_eq!(g.weight(0, 1), 1.0);
        let g = graph_of(vec![video("a", &[&[1.0, 0.0]]), video("b", &[&[0.0, 1.0]])]);
        assert_eq!(g.weight(0, 1), 0.0);

        // 2 and 4 frames, 3 near-duplicate pairs: 3 / ((2 + 4) / 2) = 1.
        let g = graph_of(vec![
            video("a", &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]),
            video("b", &[&[1.0, 0.0, 0.0], &[1.0, 0.01, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
        ]);
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(0, 0), 0.0);
    }

    #[test]
    fn many_to_many_duplicates_are_clamped() {
        let g = graph_of(vec![
            video("a", &[&[1.0, 0.0], &[1.0, 0.0]]),
            video("b", &[&[1.0, 0.0], &[1.0, 0.0]]),
        ]);
        // 4 pairs over a mean of 2 frames would be 2.
        assert_eq!(g.weight(0, 1), 1.0);
    }

    #[test]
    fn threshold_bounds_and_size() {
        assert!(NearDuplicateConfig { tau_nd: 0.0 }.validate().is_err());
        assert!(NearDuplicateConfig { tau_nd: 1.5 }.validate().is_err());
        assert!(NearDuplicateConfig { tau_nd: 1.0 }.validate().is_ok());
        let corpus = QueryCorpus::new("q", 1, vec![video("a", &[&[1.0]])], vec![], None).unwrap();
        assert!(visual_graph(&corpus, &NearDuplicateConfig::default()).is_err());
    }
}
