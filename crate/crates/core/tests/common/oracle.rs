//! Independent reference computations for the sparse-coding objective.
//! Nothing here calls into the solver; features are read as plain vectors.

#![allow(dead_code)]

use vidsum_core::corpus::QueryCorpus;

pub struct Instance {
    pub frames: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
}

impl Instance {
    pub fn from_corpus(corpus: &QueryCorpus) -> Self {
        let frames: Vec<Vec<f64>> = corpus.frames().map(|f| f.feature.as_f64().to_vec()).collect();
        let images: Vec<Vec<f64>> = corpus.web_images().iter().map(|w| w.feature.as_f64().to_vec()).collect();
        let rho = images.iter().map(|z| mean_cosine(z, &frames)).collect();
        Self { frames, images, rho }
    }

    fn reconstruct(&self, a: &[f64]) -> Vec<f64> {
        let d = self.frames[0].len();
        let mut out = vec![0.0; d];
        for (x, aj) in self.frames.iter().zip(a) {
            for k in 0..d {
                out[k] += aj * x[k];
            }
        }
        out
    }

    pub fn objective(&self, a: &[f64], gamma: f64) -> f64 {
        let xa = self.reconstruct(a);
        let sq = |v: &[f64]| -> f64 { v.iter().zip(&xa).map(|(p, q)| (p - q).powi(2)).sum() };
        let n = self.frames.len() as f64;
        let mut f = self.frames.iter().map(|x| sq(x)).sum::<f64>() / (2.0 * n);
        if !self.images.is_empty() {
            let l = self.images.len() as f64;
            f += self.images.iter().zip(&self.rho).map(|(z, r)| r * sq(z)).sum::<f64>() / (2.0 * l);
        }
        f + gamma * a.iter().sum::<f64>()
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let xa = self.reconstruct(a);
        let d = xa.len();
        let n = self.frames.len() as f64;
        let mut resid = vec![0.0; d];
        for x in &self.frames {
            for k in 0..d {
                resid[k] += (x[k] - xa[k]) / n;
            }
        }
        if !self.images.is_empty() {
            let l = self.images.len() as f64;
            for (z, r) in self.images.iter().zip(&self.rho) {
                for k in 0..d {
                    resid[k] += r * (z[k] - xa[k]) / l;
                }
            }
        }
        self.frames
            .iter()
            .map(|x| -(0..d).map(|k| x[k] * resid[k]).sum::<f64>())
            .collect()
    }

    /// Upper bound on the Lipschitz constant of the smooth gradient, by power
    /// iteration on the map a ↦ ∇(a) − ∇(0).
    fn lipschitz(&self) -> f64 {
        let n = self.frames.len();
        let g0 = self.gradient(&vec![0.0; n]);
        let mut v = vec![1.0; n];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let g = self.gradient_linear(&v, &g0);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = g.iter().map(|x| x / norm).collect();
        }
        lambda * 1.05 + 1e-12
    }

    fn gradient_linear(&self, v: &[f64], g0: &[f64]) -> Vec<f64> {
        let g = self.gradient(v);
        g.iter().zip(g0).map(|(a, b)| a - b).collect()
    }
}

pub fn mean_cosine(z: &[f64], xs: &[Vec<f64>]) -> f64 {
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let total: f64 = xs
        .iter()
        .map(|x| {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nz == 0.0 || nx == 0.0 {
                0.0
            } else {
                z.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() / (nz * nx)
            }
        })
        .sum();
    total / xs.len() as f64
}

/// Accelerated projected gradient descent with gradient-based adaptive
/// restart. Returns the final iterate and its objective value.
pub fn projected_gradient(inst: &Instance, gamma: f64, max_iters: usize) -> (Vec<f64>, f64) {
    let n = inst.frames.len();
    let step = 1.0 / inst.lipschitz();
    let mut a = vec![0.0; n];
    let mut y = a.clone();
    let mut t = 1.0f64;
    for _ in 0..max_iters {
        let g = inst.gradient(&y);
        let next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(yi, gi)| (yi - step * (gi + gamma)).max(0.0))
            .collect();
        // Gradient mapping at y; zero exactly at the constrained optimum.
        let mapping = next.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / step;
        let against: f64 = y
            .iter()
            .zip(&next)
            .zip(&a)
            .map(|((yi, ni), ai)| (yi - ni) * (ni - ai))
            .sum();
        let (t_next, beta) = if against > 0.0 {
            (1.0, 0.0)
        } else {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            (t_next, (t - 1.0) / t_next)
        };
        y = next.iter().zip(&a).map(|(p, q)| p + beta * (p - q)).collect();
        a = next;
        t = t_next;
        if mapping < 1e-12 {
            break;
        }
    }
    let f = inst.objective(&a, gamma);
    (a, f)
}
