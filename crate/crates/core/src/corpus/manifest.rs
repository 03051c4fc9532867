//! JSON manifest describing a query corpus.
//!
//! ```json
//! {
//!   "query": "royal wedding 2011",
//!   "dimension": 4352,
//!   "frame_features": "frames.qfv",
//!   "web_image_features": "web.qfv",
//!   "word_vectors": "words.txt",
//!   "videos": [
//!     { "video_id": "v001", "title": "...", "description": "...", "upload_time": 1303466400,
//!       "frames": [ { "frame_id": "v001_s000", "shot_index": 0 } ] }
//!   ],
//!   "web_images": [ "img_0001" ]
//! }
//! ```
//!
//! Rows of `frame_features` follow the frames in manifest order (video by
//! video, frames in listed order, which is also their play order). Rows of
//! `web_image_features` follow `web_images`. Blob paths are relative to the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::qfv::{read_qfv, write_qfv, FeatureMatrix};
use super::{CandidateKeyframe, FeatureVector, QueryCorpus, VideoRecord, WebImage, WordVectors};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub query: String,
    pub dimension: usize,
    pub frame_features: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub web_image_features: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<String>,
    pub videos: Vec<ManifestVideo>,
    #[serde(default)]
    pub web_images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub video_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub upload_time: i64,
    pub frames: Vec<ManifestFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame_id: String,
    pub shot_index: u32,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

fn load_blob(path: &Path, dimension: usize, expected_rows: usize) -> Result<FeatureMatrix> {
    let matrix = read_qfv(path)?;
    if matrix.dim() != dimension {
        return Err(Error::DimensionMismatch {
            entity: format!("feature blob {}", path.display()),
            expected: dimension,
            found: matrix.dim(),
        });
    }
    if matrix.rows() != expected_rows {
        return Err(Error::format(
            path,
            format!(
                "blob holds {} rows, manifest lists {expected_rows}",
                matrix.rows()
            ),
        ));
    }
    Ok(matrix)
}

/// Loads and validates a corpus from its manifest.
pub fn load_corpus(manifest_path: &Path) -> Result<QueryCorpus> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let frame_total: usize = manifest.videos.iter().map(|v| v.frames.len()).sum();
    let frames_blob = load_blob(
        &resolve(base, &manifest.frame_features),
        manifest.dimension,
        frame_total,
    )?;

    let mut row = 0;
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for mv in &manifest.videos {
        let mut frames = Vec::with_capacity(mv.frames.len());
        for (order, mf) in mv.frames.iter().enumerate() {
            frames.push(CandidateKeyframe {
                frame_id: mf.frame_id.clone(),
                video_id: mv.video_id.clone(),
                shot_index: mf.shot_index,
                play_order: order as u32,
                feature: FeatureVector::new(frames_blob.row(row).to_vec()),
            });
            row += 1;
        }
        videos.push(VideoRecord {
            video_id: mv.video_id.clone(),
            title: mv.title.clone(),
            description: mv.description.clone(),
            upload_time: mv.upload_time,
            frames,
        });
    }

    let web_images = match (&manifest.web_image_features, manifest.web_images.is_empty()) {
        (Some(rel), _) => {
            let blob = load_blob(
                &resolve(base, rel),
                manifest.dimension,
                manifest.web_images.len(),
            )?;
            manifest
                .web_images
                .iter()
                .enumerate()
                .map(|(i, id)| WebImage {
                    image_id: id.clone(),
                    feature: FeatureVector::new(blob.row(i).to_vec()),
                    rho: None,
                })
                .collect()
        }
        (None, true) => Vec::new(),
        (None, false) => {
            return Err(Error::format(
                manifest_path,
                "web_images listed but web_image_features is missing",
            ))
        }
    };

    let word_vectors = manifest
        .word_vectors
        .as_deref()
        .map(|rel| WordVectors::load(&resolve(base, rel)))
        .transpose()?;

    QueryCorpus::new(
        manifest.query,
        manifest.dimension,
        videos,
        web_images,
        word_vectors,
    )
}

/// Writes a corpus as `manifest.json` plus blobs into `dir`, returning the
/// manifest path.
pub fn write_corpus(corpus: &QueryCorpus, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = corpus.dimension();

    let frames = FeatureMatrix::from_rows(dim, corpus.frames().map(|f| f.feature.values()))
        .expect("corpus features share the declared dimension");
    write_qfv(&dir.join("frames.qfv"), &frames)?;

    let web_image_features = if corpus.web_images().is_empty() {
        None
    } else {
        let web = FeatureMatrix::from_rows(dim, corpus.web_images().iter().map(|w| w.feature.values()))
            .expect("corpus features share the declared dimension");
        write_qfv(&dir.join("web.qfv"), &web)?;
        Some("web.qfv".to_string())
    };

    let word_vectors = match corpus.word_vectors() {
        Some(wv) => {
            let path = dir.join("words.txt");
            fs::write(&path, wv.to_text()).map_err(|e| Error::io(&path, e))?;
            Some("words.txt".to_string())
        }
        None => None,
    };

    let manifest = Manifest {
        query: corpus.query().to_string(),
        dimension: dim,
        frame_features: "frames.qfv".into(),
        web_image_features,
        word_vectors,
        videos: corpus
            .videos()
            .iter()
            .map(|v| ManifestVideo {
                video_id: v.video_id.clone(),
                title: v.title.clone(),
                description: v.description.clone(),
                upload_time: v.upload_time,
                frames: v
                    .frames
                    .iter()
                    .map(|f| ManifestFrame {
                        frame_id: f.frame_id.clone(),
                        shot_index: f.shot_index,
                    })
                    .collect(),
            })
            .collect(),
        web_images: corpus.web_images().iter().map(|w| w.image_id.clone()).collect(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
