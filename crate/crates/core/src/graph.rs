use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric, non-negative weighted graph over videos with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    node_ids: Vec<String>,
    /// Row-major `n × n` weights.
    weights: Vec<f64>,
}

impl SimilarityGraph {
    /// Builds a graph from a full weight matrix, checking every invariant.
    pub fn new(node_ids: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let n = node_ids.len();
        if weights.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "weight matrix has {} entries for {n} nodes",
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidConfig(format!("non-zero diagonal at node {i}")));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidConfig(format!("invalid weight {w} at ({i}, {j})")));
                }
                if w != weights[j * n + i] {
                    return Err(Error::InvalidConfig(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Self { node_ids, weights })
    }

    /// Builds a graph from a function evaluated once per unordered pair.
    pub fn from_pairs(node_ids: Vec<String>, mut weight: impl FnMut(usize, usize) -> f64) -> Self {
        let n = node_ids.len();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let w = weight(i, j);
                debug_assert!(w.is_finite() && w >= 0.0, "bad weight {w}");
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Self { node_ids, weights }
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.weights[i * n..(i + 1) * n]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| self.weight(i, j) == self.weight(j, i)))
    }
}
