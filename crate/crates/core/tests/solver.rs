mod common;

use std::collections::BTreeMap;

use common::oracle::{projected_gradient, Instance};
use proptest::prelude::*;
use vidsum_core::corpus::{CandidateKeyframe, FeatureVector, QueryCorpus, VideoRecord, WebImage};
use vidsum_core::solver::{
    adaptive_weights, kkt_violation, objective_value, select_keyframes, smooth_gradient, solve,
    solve_traced, SolverConfig,
};
use vidsum_core::synth::random_instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(gamma: f64) -> SolverConfig {
    SolverConfig {
        gamma,
        ..SolverConfig::default()
    }
}

fn corpus_from(frames: &[Vec<f32>], images: &[Vec<f32>]) -> QueryCorpus {
    let d = frames[0].len();
    let video = VideoRecord {
        video_id: "v".into(),
        title: String::new(),
        description: String::new(),
        upload_time: 0,
        frames: frames
            .iter()
            .enumerate()
            .map(|(j, x)| CandidateKeyframe {
                frame_id: format!("f{j}"),
                video_id: "v".into(),
                shot_index: j as u32,
                play_order: j as u32,
                feature: FeatureVector::new(x.clone()),
            })
            .collect(),
    };
    let images = images
        .iter()
        .enumerate()
        .map(|(i, z)| WebImage {
            image_id: format!("w{i}"),
            feature: FeatureVector::new(z.clone()),
            rho: None,
        })
        .collect();
    QueryCorpus::new("q", d, vec![video], images, None).unwrap()
}

#[test]
fn matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let corpus = random_instance(&mut rng, 8, 5, 4);
        let weights = adaptive_weights(&corpus).rho;
        let scores = solve(&corpus, &weights, &config(0.005)).unwrap();
        let inst = Instance::from_corpus(&corpus);
        let (_, f_oracle) = projected_gradient(&inst, 0.005, 100_000);
        let f_ours = inst.objective(&scores.coefficients, 0.005);
        assert!((f_ours - f_oracle).abs() <= 1e-6, "{f_ours} vs {f_oracle}");
        assert!((scores.objective_value - f_ours).abs() < 1e-9);
    }
}

#[test]
fn adaptive_weights_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let corpus = random_instance(&mut rng, 6, 4, 4);
        let ours = adaptive_weights(&corpus).rho;
        let inst = Instance::from_corpus(&corpus);
        for (img, want) in corpus.web_images().iter().zip(&inst.rho) {
            assert!((ours[&img.image_id] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn objective_and_gradient_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let corpus = random_instance(&mut rng, 6, 4, 3);
        let weights = adaptive_weights(&corpus).rho;
        let inst = Instance::from_corpus(&corpus);
        let a: Vec<f64> = (0..corpus.frame_count()).map(|j| 0.1 * j as f64).collect();
        let f = objective_value(&corpus, &weights, &a, 0.01).unwrap();
        assert!((f - inst.objective(&a, 0.01)).abs() < 1e-10);
        let g = smooth_gradient(&corpus, &weights, &a).unwrap();
        for (p, q) in g.iter().zip(inst.gradient(&a)) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn kkt_holds_at_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..50 {
        let corpus = random_instance(&mut rng, 8, 5, 4);
        let weights = adaptive_weights(&corpus).rho;
        let s = solve(&corpus, &weights, &config(0.005)).unwrap();
        assert!(s.converged);
        let g = smooth_gradient(&corpus, &weights, &s.coefficients).unwrap();
        assert!(kkt_violation(&g, &s.coefficients, 0.005) <= 1e-7);
    }
}

#[test]
fn orthonormal_and_duplicate_fixtures() {
    let c = corpus_from(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[]);
    let s = solve(&c, &BTreeMap::new(), &config(0.005)).unwrap();
    for a in &s.coefficients {
        assert!((a - 0.495).abs() < 1e-9);
    }

    let c = corpus_from(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[]);
    let s = solve(&c, &BTreeMap::new(), &config(0.005)).unwrap();
    assert!((s.coefficients[0] - 0.995).abs() < 1e-9);
    assert_eq!(s.coefficients[1], 0.0);
    assert_eq!(select_keyframes(&s, 0.01).len(), 1);
}

#[test]
fn web_boost_fixture() {
    let c = corpus_from(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 0.0]]);
    let w = adaptive_weights(&c).rho;
    assert!((w["w0"] - 0.5).abs() < 1e-12);
    let s = solve(&c, &w, &config(0.005)).unwrap();
    assert!((s.coefficients[0] - 0.995 / 1.5).abs() < 1e-3);
    assert!((s.coefficients[1] - 0.495 / 1.5).abs() < 1e-3);
    assert!(s.coefficients[0] > s.coefficients[1]);
}

#[test]
fn huge_gamma_selects_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus = random_instance(&mut rng, 8, 5, 2);
    let w = adaptive_weights(&corpus).rho;
    let s = solve(&corpus, &w, &config(1e6)).unwrap();
    assert!(s.coefficients.iter().all(|&a| a == 0.0));
    assert!(select_keyframes(&s, 0.01).is_empty());
}

fn feature_matrix(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    (1..=max_d).prop_flat_map(move |d| prop::collection::vec(prop::collection::vec(0.0f32..1.0, d), 1..=max_n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_trace_is_monotone(frames in feature_matrix(8, 5)) {
        let c = corpus_from(&frames, &[]);
        let (_, trace) = solve_traced(&c, &BTreeMap::new(), &config(0.005)).unwrap();
        for pair in trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn l1_norm_shrinks_with_gamma(frames in feature_matrix(6, 4), g1 in 1e-4f64..0.5, g2 in 1e-4f64..0.5) {
        let c = corpus_from(&frames, &[]);
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = solve(&c, &BTreeMap::new(), &config(lo)).unwrap();
        let b = solve(&c, &BTreeMap::new(), &config(hi)).unwrap();
        prop_assert!(b.l1_norm() <= a.l1_norm() + 1e-6);
    }

    #[test]
    fn zero_weight_images_change_nothing(frames in feature_matrix(6, 4)) {
        let d = frames[0].len();
        let with = corpus_from(&frames, &[vec![0.5; d], vec![0.25; d]]);
        let without = corpus_from(&frames, &[]);
        let zeros: BTreeMap<String, f64> = [("w0".to_string(), 0.0), ("w1".to_string(), 0.0)].into();
        let a = solve(&with, &zeros, &config(0.005)).unwrap();
        let b = solve(&without, &BTreeMap::new(), &config(0.005)).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_duplicate_frames_share_one_slot(frames in feature_matrix(5, 4)) {
        let mut doubled = frames.clone();
        doubled.push(frames[0].clone());
        let c = corpus_from(&doubled, &[]);
        let s = solve(&c, &BTreeMap::new(), &config(0.005)).unwrap();
        let last = s.coefficients.len() - 1;
        prop_assert!(s.coefficients[0] <= 0.01 || s.coefficients[last] <= 0.01);
    }
}
