//! Seeded synthetic corpora for demos, tests and benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    CandidateKeyframe, FeatureVector, GroundTruth, QueryCorpus, VideoRecord, WebImage, WordVectors,
};
use crate::error::Result;

/// Layout of a corpus with planted topics (one event per topic).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub topics: usize,
    pub videos_per_topic: usize,
    pub frames_per_video: usize,
    /// Feature coordinates reserved for each topic.
    pub block_dim: usize,
    /// Uniform noise amplitude added to every feature coordinate.
    pub noise: f32,
    pub web_images_per_topic: usize,
    /// Web images unrelated to any topic.
    pub noise_images: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            topics: 3,
            videos_per_topic: 5,
            frames_per_video: 4,
            block_dim: 4,
            noise: 0.1,
            web_images_per_topic: 2,
            noise_images: 1,
        }
    }
}

const TOPIC_WORDS: &[&[&str]] = &[
    &["engagement", "ring", "proposal", "announce"],
    &["ceremony", "abbey", "church", "vows"],
    &["balcony", "palace", "kiss", "crowd"],
    &["square", "party", "street", "celebration"],
    &["parade", "carriage", "procession", "horses"],
];
const SHARED_WORDS: &[&str] = &["royal", "wedding", "2011", "video"];

/// A corpus plus the topic each video was generated from.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub corpus: QueryCorpus,
    pub topic_of_video: Vec<usize>,
}

fn topic_words(t: usize) -> Vec<String> {
    TOPIC_WORDS
        .get(t)
        .map(|w| w.iter().map(|s| s.to_string()).collect())
        .unwrap_or_else(|| (0..4).map(|i| format!("topic{t}word{i}")).collect())
}

/// Videos of one topic share a feature block, title words and an upload
/// window; web images sit on the topic blocks.
pub fn planted_corpus(spec: &PlantedSpec, seed: u64) -> Result<PlantedCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.topics * spec.block_dim;
    let noisy = |rng: &mut ChaCha8Rng, topic: Option<usize>| -> Vec<f32> {
        (0..dim)
            .map(|k| {
                let base = match topic {
                    Some(t) if k / spec.block_dim == t => 1.0,
                    _ => 0.0,
                };
                base + rng.random::<f32>() * spec.noise
            })
            .collect()
    };

    let mut videos = Vec::new();
    let mut topic_of_video = Vec::new();
    // Interleave topics in manifest order so that order carries no signal.
    for v in 0..spec.videos_per_topic {
        for t in 0..spec.topics {
            let video_id = format!("t{t}v{v:02}");
            let words = topic_words(t);
            let title = format!(
                "{} {} {} {}",
                SHARED_WORDS[0], SHARED_WORDS[1], words[v % words.len()], words[(v + 1) % words.len()]
            );
            let description = format!(
                "{} {} {} {}",
                words[(v + 2) % words.len()],
                words[(v + 3) % words.len()],
                SHARED_WORDS[2],
                SHARED_WORDS[3]
            );
            let frames = (0..spec.frames_per_video)
                .map(|f| CandidateKeyframe {
                    frame_id: format!("{video_id}_s{f:03}"),
                    video_id: video_id.clone(),
                    shot_index: f as u32,
                    play_order: f as u32,
                    feature: FeatureVector::new(noisy(&mut rng, Some(t))),
                })
                .collect();
            videos.push(VideoRecord {
                video_id,
                title,
                description,
                upload_time: 1_300_000_000 + (t as i64) * 86_400 * 30 + (v as i64) * 3_600,
                frames,
            });
            topic_of_video.push(t);
        }
    }

    let mut web_images = Vec::new();
    for t in 0..spec.topics {
        for i in 0..spec.web_images_per_topic {
            web_images.push(WebImage {
                image_id: format!("web_t{t}_{i:02}"),
                feature: FeatureVector::new(noisy(&mut rng, Some(t))),
                rho: None,
            });
        }
    }
    for i in 0..spec.noise_images {
        web_images.push(WebImage {
            image_id: format!("web_noise_{i:02}"),
            feature: FeatureVector::new(noisy(&mut rng, None).iter().map(|v| v + 0.05).collect()),
            rho: None,
        });
    }

    // Word vectors: topic words cluster around one axis per topic, shared
    // words around their own axis.
    let wdim = spec.topics + 1;
    let mut vectors = BTreeMap::new();
    let axis_vector = |rng: &mut ChaCha8Rng, axis: usize| -> Vec<f64> {
        (0..wdim)
            .map(|k| if k == axis { 1.0 } else { 0.0 } + rng.random::<f64>() * 0.05)
            .collect()
    };
    for t in 0..spec.topics {
        for w in topic_words(t) {
            let v = axis_vector(&mut rng, t);
            vectors.insert(w, v);
        }
    }
    for w in SHARED_WORDS {
        let v = axis_vector(&mut rng, spec.topics);
        vectors.insert(w.to_string(), v);
    }
    let word_vectors = WordVectors::new(wdim, vectors)?;

    let corpus = QueryCorpus::new(
        "royal wedding 2011",
        dim,
        videos,
        web_images,
        Some(word_vectors),
    )?;
    Ok(PlantedCorpus {
        corpus,
        topic_of_video,
    })
}

/// Annotators who each pick the first frame of most videos, skipping a
/// different random subset.
pub fn planted_ground_truth(corpus: &QueryCorpus, annotators: usize, seed: u64) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = BTreeMap::new();
    for a in 0..annotators {
        let mut picks = BTreeSet::new();
        for video in corpus.videos() {
            if rng.random::<f64>() < 0.7 {
                let idx = rng.random_range(0..video.frames.len().min(2));
                picks.insert(video.frames[idx].frame_id.clone());
            }
        }
        if picks.is_empty() {
            picks.insert(corpus.videos()[0].frames[0].frame_id.clone());
        }
        map.insert(format!("annotator{}", a + 1), picks);
    }
    GroundTruth::new(map)
}

/// Corpus with exactly the requested counts and random non-negative
/// features; frames are spread as evenly as possible over the videos.
pub fn sized_corpus(
    query: &str,
    videos: usize,
    web_images: usize,
    frames: usize,
    dim: usize,
    seed: u64,
) -> Result<QueryCorpus> {
    assert!(videos > 0 && frames >= videos, "every video needs a frame");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature = |rng: &mut ChaCha8Rng| FeatureVector::new((0..dim).map(|_| rng.random::<f32>()).collect());
    let records = (0..videos)
        .map(|v| {
            let count = frames / videos + usize::from(v < frames % videos);
            let video_id = format!("v{v:04}");
            VideoRecord {
                frames: (0..count)
                    .map(|f| CandidateKeyframe {
                        frame_id: format!("{video_id}_s{f:03}"),
                        video_id: video_id.clone(),
                        shot_index: f as u32,
                        play_order: f as u32,
                        feature: feature(&mut rng),
                    })
                    .collect(),
                title: format!("{query} clip {v}"),
                description: String::new(),
                upload_time: 1_300_000_000 + v as i64 * 600,
                video_id,
            }
        })
        .collect();
    let images = (0..web_images)
        .map(|i| WebImage {
            image_id: format!("img{i:04}"),
            feature: feature(&mut rng),
            rho: None,
        })
        .collect();
    QueryCorpus::new(query, dim, records, images, None)
}

/// Small random solver instance: `1..=max_frames` frames and
/// `0..=max_images` web images in `1..=max_dim` dimensions, entries in
/// `[0, 1)`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_frames: usize,
    max_dim: usize,
    max_images: usize,
) -> QueryCorpus {
    let n = rng.random_range(1..=max_frames);
    let d = rng.random_range(1..=max_dim);
    let l = rng.random_range(0..=max_images);
    let vector = |rng: &mut R| FeatureVector::new((0..d).map(|_| rng.random::<f32>()).collect());
    let frames = (0..n)
        .map(|j| CandidateKeyframe {
            frame_id: format!("f{j}"),
            video_id: "v".into(),
            shot_index: j as u32,
            play_order: j as u32,
            feature: vector(rng),
        })
        .collect();
    let images = (0..l)
        .map(|i| WebImage {
            image_id: format!("w{i}"),
            feature: vector(rng),
            rho: None,
        })
        .collect();
    let video = VideoRecord {
        video_id: "v".into(),
        title: String::new(),
        description: String::new(),
        upload_time: 0,
        frames,
    };
    QueryCorpus::new("random", d, vec![video], images, None).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_layout() {
        let p = planted_corpus(&PlantedSpec::default(), 1).unwrap();
        assert_eq!(p.corpus.videos().len(), 15);
        assert_eq!(p.corpus.frame_count(), 60);
        assert_eq!(p.corpus.web_image_count(), 7);
        assert_eq!(p.topic_of_video.iter().filter(|&&t| t == 2).count(), 5);
    }

    #[test]
    fn sized_counts_are_exact() {
        let c = sized_corpus("q", 7, 3, 23, 2, 0).unwrap();
        assert_eq!(c.videos().len(), 7);
        assert_eq!(c.frame_count(), 23);
        assert_eq!(c.web_image_count(), 3);
    }
}
