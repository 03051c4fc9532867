use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::QueryCorpus;
use crate::error::{Error, Result};

/// Keyframe selections per annotator, as a JSON object mapping each
/// annotator id to an array of frame ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub annotators: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn new(annotators: BTreeMap<String, BTreeSet<String>>) -> Self {
        Self { annotators }
    }

    pub fn len(&self) -> usize {
        self.annotators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotators.is_empty()
    }

    /// Checks every referenced frame id against the corpus.
    pub fn validate(&self, corpus: &QueryCorpus) -> Result<()> {
        if self.annotators.is_empty() {
            return Err(Error::InvalidGroundTruth("no annotators".into()));
        }
        for (annotator, frames) in &self.annotators {
            if frames.is_empty() {
                return Err(Error::InvalidGroundTruth(format!(
                    "annotator `{annotator}` selected no keyframes"
                )));
            }
            if let Some(unknown) = frames.iter().find(|f| corpus.locate(f).is_none()) {
                return Err(Error::UnknownFrame(unknown.clone()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.annotators).expect("string maps serialize")
    }
}

pub fn parse_ground_truth(text: &str, origin: &Path) -> Result<GroundTruth> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })?;
    Ok(GroundTruth::new(
        raw.into_iter()
            .map(|(a, ids)| (a, ids.into_iter().collect()))
            .collect(),
    ))
}

/// Loads annotator selections and resolves every frame id against `corpus`.
pub fn load_ground_truth(path: &Path, corpus: &QueryCorpus) -> Result<GroundTruth> {
    let truth = load_ground_truth_unchecked(path)?;
    truth.validate(corpus)?;
    Ok(truth)
}

/// Loads annotator selections without a corpus, for id-only computations.
pub fn load_ground_truth_unchecked(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text, path)
}
