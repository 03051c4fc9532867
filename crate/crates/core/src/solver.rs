//! Query-aware sparse coding of candidate keyframes.
//!
//! Every candidate keyframe is a basis vector. One shared non-negative
//! coefficient vector `a` reconstructs both the keyframes and the web images
//! returned for the query:
//!
//! ```text
//! f(a) = 1/(2N) Σ_i ||x_i − Xa||² + 1/(2L) Σ_i ρ_i ||z_i − Xa||² + γ ||a||₁,   a ≥ 0
//! ```
//!
//! where `ρ_i` is the mean cosine similarity between web image `z_i` and all
//! keyframes. Expanding the squares gives a non-negative lasso in `a` with
//! Gram matrix `G = XᵀX`, linear term `q = Xᵀ(x̄ + z̃)` and curvature factor
//! `c = 1 + mean(ρ)`, which is minimised by cyclic coordinate descent with
//! one-sided soft-thresholding.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::corpus::QueryCorpus;
use crate::error::{Error, Result};
use crate::linalg::{cosine, dot, norm};

pub const DEFAULT_GAMMA: f64 = 0.005;
pub const DEFAULT_TC: f64 = 0.01;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Sweeps between active-set refinement attempts.
const REFINE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// L1 weight.
    pub gamma: f64,
    /// Selection threshold on coefficients.
    pub tc: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iters: usize,
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            tc: DEFAULT_TC,
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("tc", self.tc)?;
        positive("tolerance", self.tolerance)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Adaptive web-image weights with any warnings raised while computing them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptiveWeights {
    pub rho: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// ρ_i = mean over all N keyframes of cosine(z_i, x_j). Zero-norm vectors
/// contribute a cosine of 0 and are reported as warnings.
pub fn adaptive_weights(corpus: &QueryCorpus) -> AdaptiveWeights {
    let n = corpus.frame_count() as f64;
    let mut warnings = Vec::new();
    for frame in corpus.frames() {
        if norm(frame.feature.as_f64()) == 0.0 && !corpus.web_images().is_empty() {
            warnings.push(format!(
                "frame `{}` has a zero feature vector; its cosine terms count as 0",
                frame.frame_id
            ));
        }
    }
    let mut rho = BTreeMap::new();
    for image in corpus.web_images() {
        let z = image.feature.as_f64();
        if norm(z) == 0.0 {
            warnings.push(format!(
                "web image `{}` has a zero feature vector; its weight is 0",
                image.image_id
            ));
        }
        let sum: f64 = corpus
            .frames()
            .map(|f| cosine(z, f.feature.as_f64()).unwrap_or(0.0))
            .sum();
        let value = sum / n;
        if value < 0.0 {
            warnings.push(format!(
                "web image `{}` has negative weight {value}",
                image.image_id
            ));
        }
        rho.insert(image.image_id.clone(), value);
    }
    AdaptiveWeights { rho, warnings }
}

/// Coefficient vector produced by [`solve`], in the corpus' global frame order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub frame_ids: Vec<String>,
    pub coefficients: Vec<f64>,
    pub objective_value: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Largest KKT violation at the returned point.
    pub kkt_violation: f64,
}

impl ImportanceScores {
    pub fn get(&self, frame_id: &str) -> Option<f64> {
        self.frame_ids
            .iter()
            .position(|f| f == frame_id)
            .map(|i| self.coefficients[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.frame_ids
            .iter()
            .map(String::as_str)
            .zip(self.coefficients.iter().copied())
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFrame {
    pub frame_id: String,
    pub score: f64,
}

/// Selected keyframes, highest score first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub keyframes: Vec<ScoredFrame>,
    pub threshold_used: f64,
}

impl Summary {
    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn contains(&self, frame_id: &str) -> bool {
        self.keyframes.iter().any(|k| k.frame_id == frame_id)
    }
}

fn ordered_desc(a: &ScoredFrame, b: &ScoredFrame) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.frame_id.cmp(&b.frame_id))
}

/// Keeps exactly the frames whose coefficient exceeds `tc`.
pub fn select_keyframes(scores: &ImportanceScores, tc: f64) -> Summary {
    let mut keyframes: Vec<ScoredFrame> = scores
        .iter()
        .filter(|&(_, s)| s > tc)
        .map(|(id, score)| ScoredFrame {
            frame_id: id.to_string(),
            score,
        })
        .collect();
    keyframes.sort_by(ordered_desc);
    Summary {
        keyframes,
        threshold_used: tc,
    }
}

fn web_weights(corpus: &QueryCorpus, weights: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    corpus
        .web_images()
        .iter()
        .map(|img| {
            weights.get(&img.image_id).copied().ok_or_else(|| {
                Error::InvalidConfig(format!("no adaptive weight for web image `{}`", img.image_id))
            })
        })
        .collect()
}

fn check_coefficients(corpus: &QueryCorpus, a: &[f64]) -> Result<()> {
    if a.len() != corpus.frame_count() {
        return Err(Error::LengthMismatch {
            expected: corpus.frame_count(),
            found: a.len(),
        });
    }
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeCoefficient { index, value });
    }
    Ok(())
}

fn reconstruction(corpus: &QueryCorpus, a: &[f64]) -> Vec<f64> {
    let mut xa = vec![0.0; corpus.dimension()];
    for (frame, &aj) in corpus.frames().zip(a) {
        for (r, x) in xa.iter_mut().zip(frame.feature.as_f64()) {
            *r += aj * x;
        }
    }
    xa
}

/// Evaluates the objective directly from the reconstruction residuals.
/// `a` is in global frame order.
pub fn objective_value(
    corpus: &QueryCorpus,
    weights: &BTreeMap<String, f64>,
    a: &[f64],
    gamma: f64,
) -> Result<f64> {
    check_coefficients(corpus, a)?;
    let rho = web_weights(corpus, weights)?;
    let xa = reconstruction(corpus, a);
    let residual = |v: &[f64]| -> f64 { v.iter().zip(&xa).map(|(p, q)| (p - q) * (p - q)).sum() };

    let n = corpus.frame_count() as f64;
    let frame_term: f64 = corpus.frames().map(|f| residual(f.feature.as_f64())).sum::<f64>() / (2.0 * n);
    let web_term = if corpus.web_images().is_empty() {
        0.0
    } else {
        let l = corpus.web_image_count() as f64;
        corpus
            .web_images()
            .iter()
            .zip(&rho)
            .map(|(img, r)| r * residual(img.feature.as_f64()))
            .sum::<f64>()
            / (2.0 * l)
    };
    Ok(frame_term + web_term + gamma * a.iter().sum::<f64>())
}

/// Gradient of the smooth (reconstruction) part of the objective, computed
/// from residuals rather than the Gram matrix.
pub fn smooth_gradient(
    corpus: &QueryCorpus,
    weights: &BTreeMap<String, f64>,
    a: &[f64],
) -> Result<Vec<f64>> {
    check_coefficients(corpus, a)?;
    let rho = web_weights(corpus, weights)?;
    let xa = reconstruction(corpus, a);
    let d = corpus.dimension();
    let n = corpus.frame_count() as f64;

    // Weighted sum of residuals: Σ_i (x_i − Xa)/N + Σ_i ρ_i (z_i − Xa)/L.
    let mut acc = vec![0.0; d];
    for f in corpus.frames() {
        for ((s, x), r) in acc.iter_mut().zip(f.feature.as_f64()).zip(&xa) {
            *s += (x - r) / n;
        }
    }
    if !corpus.web_images().is_empty() {
        let l = corpus.web_image_count() as f64;
        for (img, w) in corpus.web_images().iter().zip(&rho) {
            for ((s, z), r) in acc.iter_mut().zip(img.feature.as_f64()).zip(&xa) {
                *s += w * (z - r) / l;
            }
        }
    }
    Ok(corpus.frames().map(|f| -dot(f.feature.as_f64(), &acc)).collect())
}

/// Largest violation of the optimality conditions of the non-negative lasso:
/// `|g_j + γ|` on active coordinates, `max(0, −(g_j + γ))` on zero ones.
pub fn kkt_violation(gradient: &[f64], a: &[f64], gamma: f64) -> f64 {
    gradient
        .iter()
        .zip(a)
        .map(|(&g, &aj)| {
            if aj > 0.0 {
                (g + gamma).abs()
            } else {
                (-(g + gamma)).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Quadratic-form view of the objective: ½ c aᵀGa − qᵀa + γ 1ᵀa + const.
struct Quadratic {
    n: usize,
    gram: Vec<f64>,
    q: Vec<f64>,
    c: f64,
}

impl Quadratic {
    fn build(corpus: &QueryCorpus, rho: &[f64]) -> Self {
        let n = corpus.frame_count();
        let d = corpus.dimension();
        let columns: Vec<&[f64]> = corpus.frames().map(|f| f.feature.as_f64()).collect();

        let mut target = vec![0.0; d];
        for x in &columns {
            for (t, v) in target.iter_mut().zip(x.iter()) {
                *t += v;
            }
        }
        for t in &mut target {
            *t /= n as f64;
        }
        let mut c = 1.0;
        if !rho.is_empty() {
            let l = rho.len() as f64;
            let mut web = vec![0.0; d];
            for (img, &r) in corpus.web_images().iter().zip(rho) {
                for (w, z) in web.iter_mut().zip(img.feature.as_f64()) {
                    *w += r * z;
                }
            }
            for (t, w) in target.iter_mut().zip(&web) {
                *t += w / l;
            }
            c += rho.iter().sum::<f64>() / l;
        }

        let mut gram = vec![0.0; n * n];
        for j in 0..n {
            for k in j..n {
                let g = dot(columns[j], columns[k]);
                gram[j * n + k] = g;
                gram[k * n + j] = g;
            }
        }
        let q = columns.iter().map(|x| dot(x, &target)).collect();
        Self { n, gram, q, c }
    }

    fn gradient_from(&self, ga: &[f64]) -> Vec<f64> {
        ga.iter().zip(&self.q).map(|(g, q)| self.c * g - q).collect()
    }

    fn gram_times(&self, a: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| dot(&self.gram[j * self.n..(j + 1) * self.n], a)).collect()
    }

    /// ½ c aᵀGa − qᵀa + γ 1ᵀa, up to the constant.
    fn reduced_objective(&self, a: &[f64], ga: &[f64], gamma: f64) -> f64 {
        0.5 * self.c * dot(a, ga) - dot(&self.q, a) + gamma * a.iter().sum::<f64>()
    }

    /// Primal active-set iterations from `start` over the columns in
    /// `columns`. Cyclic descent crawls along flat faces when columns are
    /// nearly collinear; this lands on the exact optimum of the current face
    /// instead. Returns `None` if it does not settle.
    fn refine(&self, start: &[f64], columns: &[usize], gamma: f64) -> Option<Vec<f64>> {
        let n = self.n;
        let mut a = start.to_vec();
        let mut active: Vec<usize> = columns.iter().copied().filter(|&j| a[j] > 0.0).collect();
        let scale = self.q.iter().fold(gamma, |m, v| m.max(v.abs()));

        for _ in 0..4 * columns.len() + 50 {
            let m = active.len();
            let mut step_to_target = true;
            if m > 0 {
                let g_ss = DMatrix::from_fn(m, m, |r, k| self.gram[active[r] * n + active[k]]);
                let b = DVector::from_iterator(m, active.iter().map(|&j| self.q[j] - gamma));
                let a_s = DVector::from_iterator(m, active.iter().map(|&j| a[j]));
                let eig = SymmetricEigen::new(g_ss);
                let lam_max = eig.eigenvalues.iter().fold(0.0f64, |x, &v| x.max(v));
                let null_tol = 1e-10 * lam_max.max(f64::MIN_POSITIVE);

                let mut unbounded = DVector::zeros(m);
                let mut target = DVector::zeros(m);
                for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                    let u = eig.eigenvectors.column(i);
                    if lam > null_tol {
                        target += u * (u.dot(&b) / (self.c * lam));
                    } else {
                        unbounded += u * u.dot(&b);
                        target += u * u.dot(&a_s);
                    }
                }
                let direction = if unbounded.norm() > 1e-12 * scale {
                    step_to_target = false;
                    unbounded
                } else {
                    target - &a_s
                };

                let mut limit = if step_to_target { 1.0 } else { f64::INFINITY };
                let mut blocking = None;
                for (i, &d) in direction.iter().enumerate() {
                    if d < 0.0 {
                        let t = a_s[i] / -d;
                        if t < limit {
                            limit = t;
                            blocking = Some(i);
                        }
                    }
                }
                if !limit.is_finite() {
                    return None;
                }
                for (i, &j) in active.iter().enumerate() {
                    a[j] = (a_s[i] + limit * direction[i]).max(0.0);
                }
                if let Some(i) = blocking {
                    a[active[i]] = 0.0;
                    active.remove(i);
                    continue;
                }
                if !step_to_target {
                    continue;
                }
            }

            let gradient = self.gradient_from(&self.gram_times(&a));
            let entering = columns
                .iter()
                .copied()
                .filter(|j| !active.contains(j))
                .map(|j| (j, gradient[j] + gamma))
                .filter(|&(_, g)| g < -1e-14 * scale)
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match entering {
                Some((j, _)) => active.push(j),
                None => return Some(a),
            }
        }
        None
    }
}

/// Solves for the importance scores by cyclic coordinate descent, starting
/// from zero and sweeping coordinates in ascending frame-id order. Exact
/// duplicate frames after the first in that order keep a zero score.
pub fn solve(
    corpus: &QueryCorpus,
    weights: &BTreeMap<String, f64>,
    config: &SolverConfig,
) -> Result<ImportanceScores> {
    solve_inner(corpus, weights, config, None)
}

/// Like [`solve`], also returning the objective value after every sweep.
pub fn solve_traced(
    corpus: &QueryCorpus,
    weights: &BTreeMap<String, f64>,
    config: &SolverConfig,
) -> Result<(ImportanceScores, Vec<f64>)> {
    let mut trace = Vec::new();
    let scores = solve_inner(corpus, weights, config, Some(&mut trace))?;
    Ok((scores, trace))
}

fn solve_inner(
    corpus: &QueryCorpus,
    weights: &BTreeMap<String, f64>,
    config: &SolverConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<ImportanceScores> {
    config.validate()?;
    let rho = web_weights(corpus, weights)?;
    let problem = Quadratic::build(corpus, &rho);
    if !(problem.c > 0.0) {
        return Err(Error::Numerical(format!(
            "web-image weights leave a non-positive curvature factor ({})",
            problem.c
        )));
    }
    let n = problem.n;
    let gamma = config.gamma;
    let frame_ids: Vec<String> = corpus.frames().map(|f| f.frame_id.clone()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| frame_ids[i].cmp(&frame_ids[j]));
    // The objective only sees the sum of coefficients over identical columns,
    // so every such group is solved through its first column in sweep order.
    let bits: Vec<Vec<u32>> = corpus
        .frames()
        .map(|f| f.feature.values().iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    let mut seen = HashSet::new();
    order.retain(|&j| seen.insert(&bits[j]));
    // An all-zero keyframe cannot contribute to any reconstruction.
    order.retain(|&j| problem.gram[j * n + j] > 0.0);

    let mut a = vec![0.0; n];
    // ga = G a, kept in sync with every coordinate update.
    let mut ga = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for &j in &order {
            let gjj = problem.gram[j * n + j];
            let others = ga[j] - gjj * a[j];
            let updated = ((problem.q[j] - problem.c * others - gamma) / (problem.c * gjj)).max(0.0);
            let delta = updated - a[j];
            if delta != 0.0 {
                let column = &problem.gram[j * n..(j + 1) * n];
                for (g, gk) in ga.iter_mut().zip(column) {
                    *g += gk * delta;
                }
                a[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let stalled = max_delta < config.tolerance;
        if stalled || iterations % REFINE_EVERY == 0 || iterations == config.max_iters {
            let mut kkt = kkt_violation(&problem.gradient_from(&ga), &a, gamma);
            if kkt > config.tolerance {
                if let Some(b) = problem.refine(&a, &order, gamma) {
                    let gb = problem.gram_times(&b);
                    let kkt_b = kkt_violation(&problem.gradient_from(&gb), &b, gamma);
                    let before = problem.reduced_objective(&a, &ga, gamma);
                    let after = problem.reduced_objective(&b, &gb, gamma);
                    if kkt_b < kkt && after <= before + 1e-13 * (1.0 + before.abs()) {
                        a = b;
                        ga = gb;
                        kkt = kkt_b;
                    }
                }
            }
            if kkt <= config.tolerance {
                converged = true;
            }
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(objective_value(corpus, weights, &a, gamma)?);
        }
        if converged {
            break;
        }
    }

    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("coordinate descent diverged".into()));
    }
    let kkt = kkt_violation(&problem.gradient_from(&ga), &a, gamma);
    let objective = objective_value(corpus, weights, &a, gamma)?;
    if !converged {
        log::warn!(
            "coordinate descent stopped after {iterations} sweeps without converging (KKT violation {kkt:e})"
        );
    }
    Ok(ImportanceScores {
        frame_ids,
        coefficients: a,
        objective_value: objective,
        iterations_used: iterations,
        converged,
        kkt_violation: kkt,
    })
}
