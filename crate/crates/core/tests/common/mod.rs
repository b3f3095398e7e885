#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use witb::oracle::{generate_scene_with, GeneratorOptions};
use witb::scene::{load_scene, ParsedScene};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> ParsedScene {
    load_scene(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

/// Random normalized probability vector with every entry positive.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}

/// Synthetic scene with arbitrary (not truth-derived) audio rows.
pub fn random_scene(seed: u64, n: usize, k: usize, std_fraction: f64) -> ParsedScene {
    let opts = GeneratorOptions {
        std_fraction,
        random_rigidity: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let confusion = rng.random_range(0.0..1.0);
    let mut scene = generate_scene_with(seed, n, k, confusion, &opts).scene;
    if rng.random_bool(0.5) {
        for row in scene.audio.rows.values_mut() {
            *row = random_row(&mut rng, n);
        }
    }
    // Shrink or grow some boxes so that not every placement fits.
    for b in &mut scene.boxes {
        let f = rng.random_range(0.6..1.4);
        b.dims.mean = b.dims.mean.map(|d| d * f);
        b.dims.std = b.dims.std.map(|d| d * f);
    }
    scene
}

/// Problem size with `n >= k`, N <= max_n, K <= max_k.
pub fn random_size(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> (usize, usize) {
    let k = rng.random_range(1..=max_k);
    let n = rng.random_range(k..=max_n.max(k));
    (n, k)
}

pub struct Permuted {
    pub scene: ParsedScene,
    /// `object_perm[new] = old`.
    pub object_perm: Vec<usize>,
    pub box_perm: Vec<usize>,
}

/// Shuffles the object list, box list and audio label order of `scene`.
pub fn permute(scene: &ParsedScene, seed: u64) -> Permuted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut object_perm: Vec<usize> = (0..scene.n_objects()).collect();
    object_perm.shuffle(&mut rng);
    let mut box_perm: Vec<usize> = (0..scene.n_boxes()).collect();
    box_perm.shuffle(&mut rng);
    let mut out = scene.clone();
    out.objects = object_perm
        .iter()
        .map(|&o| scene.objects[o].clone())
        .collect();
    out.boxes = box_perm.iter().map(|&b| scene.boxes[b].clone()).collect();
    let mut label_perm: Vec<usize> = (0..scene.audio.labels.len()).collect();
    label_perm.shuffle(&mut rng);
    out.audio.labels = label_perm
        .iter()
        .map(|&l| scene.audio.labels[l].clone())
        .collect();
    for (id, row) in out.audio.rows.iter_mut() {
        let old = &scene.audio.rows[id];
        *row = label_perm.iter().map(|&l| old[l]).collect();
    }
    Permuted {
        scene: out,
        object_perm,
        box_perm,
    }
}

/// Simulated participants who report `100 * marginal + N(0, noise_sd)`,
/// renormalized to sum 100 per object and clamped to the slider range.
pub fn synthetic_ratings(
    scenario_id: &str,
    table: &witb::MarginalTable,
    participants: usize,
    noise_sd: f64,
    seed: u64,
) -> Vec<witb::eval::HumanRating> {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).unwrap();
    let mut out = Vec::new();
    for p in 0..participants {
        for (o, row) in table.probs.iter().enumerate() {
            let raw: Vec<f64> = row
                .iter()
                .map(|m| (100.0 * m + noise.sample(&mut rng)).max(0.0))
                .collect();
            let s: f64 = raw.iter().sum::<f64>().max(1e-9);
            for (b, r) in raw.iter().enumerate() {
                out.push(witb::eval::HumanRating {
                    scenario_id: scenario_id.into(),
                    participant_id: format!("p{p:03}"),
                    object: table.objects[o].clone(),
                    box_id: table.boxes[b].clone(),
                    rating: (100.0 * r / s).clamp(1.0, 100.0),
                });
            }
        }
    }
    out
}
