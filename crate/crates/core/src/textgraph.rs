//! Textual similarity graph over videos, built from their tag text.
//!
//! Tags are tokenized, words with similar embeddings are merged by k-means,
//! each video becomes a TF-IDF vector over word clusters, and pairs of videos
//! are linked by a Gaussian kernel on the cosine distance of those vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{QueryCorpus, WordVectors};
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::kmeans::{kmeans, KMeansConfig};

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "for", "from",
    "had", "has", "have", "he", "her", "here", "him", "his", "how", "if", "in", "into", "is", "it",
    "its", "just", "me", "more", "most", "my", "no", "not", "now", "of", "on", "one", "only", "or",
    "other", "our", "out", "over", "she", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "up", "us", "very", "vs",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "why", "will", "with",
    "would", "you", "your",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        DEFAULT_STOPWORDS.iter().copied().collect()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.as_ref().to_lowercase()).collect())
    }
}

impl Stopwords {
    pub fn none() -> Self {
        Self(BTreeSet::new())
    }

    /// One token per line; blank lines and surrounding whitespace ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

/// Which tag fields feed the text graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFields {
    Title,
    #[default]
    TitleDescription,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub video_id: String,
    pub tokens: Vec<String>,
}

/// Lowercases, splits on runs of non-alphanumeric characters, and drops
/// stopwords and tokens shorter than two characters.
pub fn tokenize_text(text: &str, stopwords: &Stopwords) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

pub fn tokenize(corpus: &QueryCorpus, stopwords: &Stopwords, fields: TextFields) -> Vec<TokenizedDoc> {
    corpus
        .videos()
        .iter()
        .map(|v| {
            let mut tokens = tokenize_text(&v.title, stopwords);
            if fields == TextFields::TitleDescription {
                tokens.extend(tokenize_text(&v.description, stopwords));
            }
            TokenizedDoc {
                video_id: v.video_id.clone(),
                tokens,
            }
        })
        .collect()
}

pub fn vocabulary(docs: &[TokenizedDoc]) -> BTreeSet<String> {
    docs.iter().flat_map(|d| d.tokens.iter().cloned()).collect()
}

/// Word-cluster count used when none is configured.
pub fn default_k_words(vocab_size: usize) -> usize {
    (vocab_size / 10).clamp(2, 50)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordClustering {
    pub assignment: BTreeMap<String, usize>,
    /// Number of clusters learned from embeddings; ids `0..k_words`.
    pub k_words: usize,
    /// Centroids of the learned clusters.
    pub centroids: Vec<Vec<f64>>,
    /// Member words of every cluster, learned and singleton, sorted.
    pub members: Vec<Vec<String>>,
}

impl WordClustering {
    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, word: &str) -> Option<usize> {
        self.assignment.get(word).copied()
    }
}

/// Clusters the vocabulary by k-means over word vectors. Words without a
/// vector become singleton clusters, numbered after the learned ones in
/// lexicographic order. `k_words` must be positive and at most the number of
/// embeddable words, or zero when no word has a vector.
pub fn cluster_words(
    vocab: &BTreeSet<String>,
    vectors: Option<&WordVectors>,
    k_words: usize,
    seed: u64,
) -> Result<WordClustering> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let (embedded, missing): (Vec<&String>, Vec<&String>) = vocab
        .iter()
        .partition(|w| vectors.is_some_and(|v| v.get(w).is_some()));

    if k_words > embedded.len() || (k_words == 0 && !embedded.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "k_words = {k_words} but {} vocabulary words have vectors",
            embedded.len()
        )));
    }

    let mut clustering = WordClustering::default();
    if !embedded.is_empty() {
        let vectors = vectors.expect("embedded words imply vectors");
        let points: Vec<Vec<f64>> = embedded
            .iter()
            .map(|w| vectors.get(w).unwrap().to_vec())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fit = kmeans(&points, &KMeansConfig::new(k_words), &mut rng);

        // Relabel clusters densely in order of first appearance.
        let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
        let mut order = Vec::new();
        for &l in &fit.labels {
            if !relabel.contains_key(&l) {
                relabel.insert(l, order.len());
                order.push(l);
            }
        }
        clustering.k_words = order.len();
        clustering.centroids = order.iter().map(|&l| fit.centroids[l].clone()).collect();
        clustering.members = vec![Vec::new(); order.len()];
        for (word, l) in embedded.iter().zip(&fit.labels) {
            let id = relabel[l];
            clustering.assignment.insert((*word).clone(), id);
            clustering.members[id].push((*word).clone());
        }
    }
    for word in missing {
        clustering.assignment.insert(word.clone(), clustering.members.len());
        clustering.members.push(vec![word.clone()]);
    }
    Ok(clustering)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVector {
    pub video_id: String,
    /// Cluster id to weight; zero weights are never stored.
    pub weights: BTreeMap<usize, f64>,
}

impl TfidfVector {
    fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn dot(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .filter_map(|(k, w)| other.weights.get(k).map(|v| w * v))
            .sum()
    }
}

/// TF-IDF over word clusters: `tf = count / doc length`,
/// `idf = ln((1 + M) / (1 + df)) + 1`. Tokens outside the clustering are
/// skipped but still count toward the document length.
pub fn tfidf(docs: &[TokenizedDoc], clustering: &WordClustering) -> Vec<TfidfVector> {
    let counts: Vec<BTreeMap<usize, usize>> = docs
        .iter()
        .map(|d| {
            let mut c = BTreeMap::new();
            for t in &d.tokens {
                if let Some(id) = clustering.cluster_of(t) {
                    *c.entry(id).or_insert(0) += 1;
                }
            }
            c
        })
        .collect();
    let mut df: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &counts {
        for id in c.keys() {
            *df.entry(*id).or_insert(0) += 1;
        }
    }
    let m = docs.len() as f64;
    docs.iter()
        .zip(&counts)
        .map(|(doc, c)| {
            let len = doc.tokens.len() as f64;
            let weights = c
                .iter()
                .map(|(&id, &count)| {
                    let idf = ((1.0 + m) / (1.0 + df[&id] as f64)).ln() + 1.0;
                    (id, count as f64 / len * idf)
                })
                .filter(|(_, w)| *w > 0.0)
                .collect();
            TfidfVector {
                video_id: doc.video_id.clone(),
                weights,
            }
        })
        .collect()
}

/// Bandwidth of the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Median of the off-diagonal distances (1 when that median is 0).
    #[default]
    Median,
    Fixed(f64),
}

/// Cosine distance between TF-IDF vectors; 1 when either is empty.
pub fn tfidf_distance(a: &TfidfVector, b: &TfidfVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - a.dot(b) / (na * nb)).clamp(0.0, 2.0)
}

pub fn textual_graph(vectors: &[TfidfVector], sigma: SigmaMode) -> Result<SimilarityGraph> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewNodes { required: 2, found: n });
    }
    let mut dist = vec![0.0; n * n];
    let mut off_diagonal = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = tfidf_distance(&vectors[i], &vectors[j]);
            dist[i * n + j] = d;
            off_diagonal.push(d);
        }
    }
    let sigma = match sigma {
        SigmaMode::Fixed(s) if s.is_finite() && s > 0.0 => s,
        SigmaMode::Fixed(s) => {
            return Err(Error::InvalidConfig(format!("kernel bandwidth must be positive, got {s}")))
        }
        SigmaMode::Median => {
            let m = median(&mut off_diagonal);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let ids = vectors.iter().map(|v| v.video_id.clone()).collect();
    Ok(SimilarityGraph::from_pairs(ids, |i, j| {
        let d = dist[i * n + j];
        (-d * d / (2.0 * sigma * sigma)).exp()
    }))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextConfig {
    pub stopwords: Stopwords,
    pub fields: TextFields,
    /// `None` picks [`default_k_words`], capped by the embeddable words.
    pub k_words: Option<usize>,
    pub sigma: SigmaMode,
    pub seed: u64,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::default(),
            fields: TextFields::default(),
            k_words: None,
            sigma: SigmaMode::Median,
            seed: 0,
        }
    }
}

/// Everything derived from the tag text of one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TextModel {
    pub docs: Vec<TokenizedDoc>,
    pub clustering: WordClustering,
    pub tfidf: Vec<TfidfVector>,
    /// Number of documents containing each word.
    pub word_df: BTreeMap<String, usize>,
}

impl TextModel {
    pub fn build(corpus: &QueryCorpus, config: &TextConfig) -> Result<Self> {
        let docs = tokenize(corpus, &config.stopwords, config.fields);
        let vocab = vocabulary(&docs);
        let clustering = if vocab.is_empty() {
            WordClustering::default()
        } else {
            let vectors = corpus.word_vectors();
            let embeddable = vocab
                .iter()
                .filter(|w| vectors.is_some_and(|v| v.get(w).is_some()))
                .count();
            let k = config
                .k_words
                .unwrap_or_else(|| default_k_words(vocab.len()))
                .min(embeddable);
            cluster_words(&vocab, vectors, k, config.seed)?
        };
        let tfidf = tfidf(&docs, &clustering);
        let mut word_df = BTreeMap::new();
        for doc in &docs {
            let unique: BTreeSet<&String> = doc.tokens.iter().collect();
            for w in unique {
                *word_df.entry(w.clone()).or_insert(0) += 1;
            }
        }
        Ok(Self {
            docs,
            clustering,
            tfidf,
            word_df,
        })
    }

    pub fn graph(&self, sigma: SigmaMode) -> Result<SimilarityGraph> {
        textual_graph(&self.tfidf, sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(words: &[&str]) -> Stopwords {
        words.iter().collect()
    }

    fn doc(id: &str, tokens: &[&str]) -> TokenizedDoc {
        TokenizedDoc {
            video_id: id.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn singletons(words: &[&str]) -> WordClustering {
        let vocab = words.iter().map(|s| s.to_string()).collect();
        cluster_words(&vocab, None, 0, 0).unwrap()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(
            tokenize_text("The Royal Wedding 2011", &stop(&["the"])),
            ["royal", "wedding", "2011"]
        );
        assert!(tokenize_text("", &stop(&[])).is_empty());
        assert_eq!(
            tokenize_text("AlphaGo vs Lee Sedol", &stop(&["vs"])),
            ["alphago", "lee", "sedol"]
        );
        assert_eq!(tokenize_text("a b--cd!!e", &Stopwords::none()), ["cd"]);
    }

    #[test]
    fn identical_vectors_share_a_cluster() {
        let wv = WordVectors::new(
            2,
            [("aa".to_string(), vec![1.0, 1.0]), ("bb".to_string(), vec![1.0, 1.0])].into(),
        )
        .unwrap();
        let vocab = ["aa", "bb"].iter().map(|s| s.to_string()).collect();
        let c = cluster_words(&vocab, Some(&wv), 1, 3).unwrap();
        assert_eq!(c.cluster_of("aa"), Some(0));
        assert_eq!(c.cluster_of("bb"), Some(0));
    }

    #[test]
    fn missing_vectors_become_trailing_singletons() {
        let wv = WordVectors::new(
            1,
            [("aa".to_string(), vec![0.0]), ("bb".to_string(), vec![5.0])].into(),
        )
        .unwrap();
        let vocab = ["aa", "bb", "zz", "cc"].iter().map(|s| s.to_string()).collect();
        let c = cluster_words(&vocab, Some(&wv), 2, 0).unwrap();
        assert_eq!(c.k_words, 2);
        assert_eq!(c.cluster_of("cc"), Some(2));
        assert_eq!(c.cluster_of("zz"), Some(3));
        assert_eq!(c.members[3], vec!["zz".to_string()]);
    }

    #[test]
    fn cluster_words_errors() {
        assert!(matches!(
            cluster_words(&BTreeSet::new(), None, 1, 0),
            Err(Error::EmptyVocabulary)
        ));
        let vocab = ["aa".to_string()].into();
        assert!(cluster_words(&vocab, None, 1, 0).is_err());
    }

    #[test]
    fn tfidf_examples() {
        let c = singletons(&["aa", "bb"]);
        let v = tfidf(&[doc("1", &["aa"]), doc("2", &["aa"])], &c);
        assert_eq!(v[0].weights[&0], 1.0);
        assert_eq!(v[1].weights[&0], 1.0);

        let v = tfidf(&[doc("1", &["aa", "bb"]), doc("2", &["bb"])], &c);
        let expected = 0.5 * ((3.0f64 / 2.0).ln() + 1.0);
        assert!((v[0].weights[&0] - expected).abs() < 1e-15);
        assert!((expected - 0.7027).abs() < 1e-4);
        assert!(!v[1].weights.contains_key(&0));
    }

    #[test]
    fn kernel_examples() {
        let c = singletons(&["aa", "bb"]);
        let same = tfidf(&[doc("1", &["aa"]), doc("2", &["aa"])], &c);
        assert_eq!(textual_graph(&same, SigmaMode::Median).unwrap().weight(0, 1), 1.0);

        let orth = tfidf(&[doc("1", &["aa"]), doc("2", &["bb"])], &c);
        let g = textual_graph(&orth, SigmaMode::Fixed(1.0)).unwrap();
        assert!((g.weight(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        // The median of a single distance of 1 is 1.
        assert_eq!(textual_graph(&orth, SigmaMode::Median).unwrap(), g);

        let three = tfidf(&[doc("1", &["aa"]), doc("2", &["aa"]), doc("3", &["bb"])], &c);
        let g = textual_graph(&three, SigmaMode::Median).unwrap();
        assert!(g.weight(0, 1) > g.weight(0, 2));
        assert!(g.weight(0, 1) > g.weight(1, 2));
    }

    #[test]
    fn empty_docs_are_at_distance_one() {
        let c = singletons(&["aa"]);
        let v = tfidf(&[doc("1", &[]), doc("2", &[])], &c);
        assert!(v[0].weights.is_empty());
        assert_eq!(tfidf_distance(&v[0], &v[1]), 1.0);
    }

    #[test]
    fn single_video_is_rejected() {
        let c = singletons(&["aa"]);
        let v = tfidf(&[doc("1", &["aa"])], &c);
        assert!(matches!(
            textual_graph(&v, SigmaMode::Median),
            Err(Error::TooFewNodes { .. })
        ));
    }
}
