//! Query corpus data model: videos with their candidate keyframes, web
//! images, tag text, optional word vectors and annotator ground truth.

mod manifest;
pub mod qfv;
mod truth;
mod words;

use std::collections::HashMap;

pub use manifest::{load_corpus, write_corpus, Manifest, ManifestFrame, ManifestVideo};
pub use truth::{load_ground_truth, load_ground_truth_unchecked, parse_ground_truth, GroundTruth};
pub use words::WordVectors;

use crate::error::{Error, Result};

/// A visual feature vector. Values are kept as stored (`f32`) so that blobs
/// round-trip bit-exactly; arithmetic happens in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
    wide: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Self {
        let wide = values.iter().map(|&v| f64::from(v)).collect();
        Self { values, wide }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn as_f64(&self) -> &[f64] {
        &self.wide
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// L2-normalized copy; the zero vector stays zero.
    pub fn l2_normalized(&self) -> Self {
        let n = crate::linalg::norm(&self.wide);
        if n == 0.0 {
            return self.clone();
        }
        Self::new(self.wide.iter().map(|v| (v / n) as f32).collect())
    }
}

impl From<Vec<f32>> for FeatureVector {
    fn from(values: Vec<f32>) -> Self {
        Self::new(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateKeyframe {
    pub frame_id: String,
    pub video_id: String,
    pub shot_index: u32,
    pub play_order: u32,
    pub feature: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WebImage {
    pub image_id: String,
    pub feature: FeatureVector,
    /// Adaptive weight, filled in once computed.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    pub description: String,
    /// Seconds since the Unix epoch.
    pub upload_time: i64,
    pub frames: Vec<CandidateKeyframe>,
}

/// Position of a frame inside the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLocation {
    pub video: usize,
    pub frame: usize,
    /// Index in the global frame order (videos in order, frames by play order).
    pub global: usize,
}

#[derive(Debug, Clone)]
pub struct QueryCorpus {
    query: String,
    dimension: usize,
    videos: Vec<VideoRecord>,
    web_images: Vec<WebImage>,
    word_vectors: Option<WordVectors>,
    frame_index: HashMap<String, FrameLocation>,
    video_index: HashMap<String, usize>,
}

// The lookup indexes are derived from the records.
impl PartialEq for QueryCorpus {
    fn eq(&self, other: &Self) -> bool {
        self.query == other.query
            && self.dimension == other.dimension
            && self.videos == other.videos
            && self.web_images == other.web_images
            && self.word_vectors == other.word_vectors
    }
}

impl QueryCorpus {
    /// Validates every corpus invariant. Frames inside each video are put
    /// in play order.
    pub fn new(
        query: impl Into<String>,
        dimension: usize,
        mut videos: Vec<VideoRecord>,
        web_images: Vec<WebImage>,
        word_vectors: Option<WordVectors>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidCorpus("dimension must be positive".into()));
        }
        let mut frame_index = HashMap::new();
        let mut video_index = HashMap::new();
        let mut global = 0;
        for (vi, video) in videos.iter_mut().enumerate() {
            if video_index.insert(video.video_id.clone(), vi).is_some() {
                return Err(Error::DuplicateId {
                    kind: "video",
                    id: video.video_id.clone(),
                });
            }
            if video.frames.is_empty() {
                return Err(Error::InvalidCorpus(format!(
                    "video `{}` has no candidate keyframes",
                    video.video_id
                )));
            }
            video.frames.sort_by_key(|f| f.play_order);
            for pair in video.frames.windows(2) {
                if pair[0].play_order == pair[1].play_order {
                    return Err(Error::InvalidCorpus(format!(
                        "video `{}` repeats play order {}",
                        video.video_id, pair[0].play_order
                    )));
                }
            }
            for (fi, frame) in video.frames.iter().enumerate() {
                if frame.video_id != video.video_id {
                    return Err(Error::InvalidCorpus(format!(
                        "frame `{}` claims video `{}` but is listed under `{}`",
                        frame.frame_id, frame.video_id, video.video_id
                    )));
                }
                check_feature(&frame.feature, dimension, || format!("frame `{}`", frame.frame_id))?;
                let loc = FrameLocation {
                    video: vi,
                    frame: fi,
                    global,
                };
                if frame_index.insert(frame.frame_id.clone(), loc).is_some() {
                    return Err(Error::DuplicateId {
                        kind: "frame",
                        id: frame.frame_id.clone(),
                    });
                }
                global += 1;
            }
        }
        if global == 0 {
            return Err(Error::InvalidCorpus("corpus has no candidate keyframes".into()));
        }
        let mut image_ids = HashMap::new();
        for image in &web_images {
            if image_ids.insert(image.image_id.as_str(), ()).is_some() {
                return Err(Error::DuplicateId {
                    kind: "web image",
                    id: image.image_id.clone(),
                });
            }
            check_feature(&image.feature, dimension, || format!("web image `{}`", image.image_id))?;
        }
        Ok(Self {
            query: query.into(),
            dimension,
            videos,
            web_images,
            word_vectors,
            frame_index,
            video_index,
        })
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn web_images(&self) -> &[WebImage] {
        &self.web_images
    }

    pub fn word_vectors(&self) -> Option<&WordVectors> {
        self.word_vectors.as_ref()
    }

    /// Total number of candidate keyframes (N).
    pub fn frame_count(&self) -> usize {
        self.frame_index.len()
    }

    /// Number of web images (L).
    pub fn web_image_count(&self) -> usize {
        self.web_images.len()
    }

    /// All candidate keyframes in global order.
    pub fn frames(&self) -> impl Iterator<Item = &CandidateKeyframe> {
        self.videos.iter().flat_map(|v| v.frames.iter())
    }

    pub fn locate(&self, frame_id: &str) -> Option<FrameLocation> {
        self.frame_index.get(frame_id).copied()
    }

    pub fn frame(&self, frame_id: &str) -> Option<&CandidateKeyframe> {
        self.locate(frame_id)
            .map(|loc| &self.videos[loc.video].frames[loc.frame])
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoRecord> {
        self.video_index.get(video_id).map(|&i| &self.videos[i])
    }

    pub fn video_position(&self, video_id: &str) -> Option<usize> {
        self.video_index.get(video_id).copied()
    }

    /// Copy with every frame and web-image feature L2-normalized.
    pub fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for video in &mut out.videos {
            for frame in &mut video.frames {
                frame.feature = frame.feature.l2_normalized();
            }
        }
        for image in &mut out.web_images {
            image.feature = image.feature.l2_normalized();
        }
        out
    }

    /// Copy with the adaptive weight recorded on each web image.
    pub fn with_rho(&self, rho: &std::collections::BTreeMap<String, f64>) -> Self {
        let mut out = self.clone();
        for image in &mut out.web_images {
            image.rho = rho.get(&image.image_id).copied();
        }
        out
    }
}

fn check_feature(
    feature: &FeatureVector,
    dimension: usize,
    entity: impl Fn() -> String,
) -> Result<()> {
    if feature.len() != dimension {
        return Err(Error::DimensionMismatch {
            entity: entity(),
            expected: dimension,
            found: feature.len(),
        });
    }
    if !feature.is_finite() {
        return Err(Error::NonFinite { entity: entity() });
    }
    Ok(())
}
