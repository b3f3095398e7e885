//! Brute-force reference model and synthetic scene generator.
//!
//! The reference shares no arithmetic with the inference engine: it decodes
//! assignments from a counter, tests fits on mean dimensions with its own
//! orientation search, multiplies probabilities directly, and normalizes with
//! a plain running sum. It only accepts zero-variance scenes, where visual
//! likelihoods are exactly 0 or 1.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::fusion::{InferenceConfig, MarginalTable, Mode};
use crate::hypothesis::Placement;
use crate::report::PosteriorSummary;
use crate::rng::seeded;
use crate::scene::{AudioPosterior, BoxSpec, ObjectSpec, ParsedScene, UncertainDims, Weight};

pub const MAX_OBJECTS: usize = 6;
pub const MAX_BOXES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("the reference model needs zero standard deviations; `{0}` has a nonzero std")]
    NonzeroStd(String),
    #[error("the reference model supports at most {MAX_OBJECTS} objects and {MAX_BOXES} boxes (got {0} and {1})")]
    TooLarge(usize, usize),
    #[error("no admissible placement exists")]
    NoPlacements,
}

/// Exhaustive posterior: every admissible assignment with its probability, in
/// counter order (which is lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForcePosterior {
    pub assignments: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
    pub total_weight: f64,
    pub degenerate: bool,
}

fn check(scene: &ParsedScene) -> Result<(), OracleError> {
    let (n, k) = (scene.objects.len(), scene.boxes.len());
    if n > MAX_OBJECTS || k > MAX_BOXES {
        return Err(OracleError::TooLarge(n, k));
    }
    for o in &scene.objects {
        if o.dims.std.iter().any(|s| *s != 0.0) {
            return Err(OracleError::NonzeroStd(o.name.clone()));
        }
    }
    for b in &scene.boxes {
        if b.dims.std.iter().any(|s| *s != 0.0) {
            return Err(OracleError::NonzeroStd(b.id.clone()));
        }
    }
    Ok(())
}

fn orientation_fits(item: [f64; 3], container: [f64; 3]) -> bool {
    for a in 0..3 {
        for b in 0..3 {
            if b == a {
                continue;
            }
            let c = 3 - a - b;
            if item[a] <= container[0] && item[b] <= container[1] && item[c] <= container[2] {
                return true;
            }
        }
    }
    false
}

fn fits(scene: &ParsedScene, cfg: &InferenceConfig, box_index: usize, contents: &[usize]) -> bool {
    let floor = cfg.fit_params.dim_floor;
    let bx = scene.boxes[box_index].dims.mean.map(|d| d.max(floor));
    let mut named: Vec<&ObjectSpec> = contents.iter().map(|&o| &scene.objects[o]).collect();
    named.sort_by(|x, y| x.name.cmp(&y.name));
    let mut volume = 0.0;
    for o in named {
        let eff = o.dims.mean.map(|d| d.max(floor) * o.rigidity);
        if !orientation_fits(eff, bx) {
            return false;
        }
        volume += eff[0] * eff[1] * eff[2];
    }
    volume <= cfg.fit_params.packing_efficiency * (bx[0] * bx[1] * bx[2])
}

fn audio_prob(scene: &ParsedScene, box_index: usize, object: usize) -> f64 {
    let label = scene
        .audio
        .labels
        .iter()
        .position(|l| *l == scene.objects[object].name)
        .expect("object has an audio label");
    scene.audio.rows[&scene.boxes[box_index].id][label]
}

/// Enumerates every assignment by decoding a base-K counter.
pub fn brute_force_posterior(
    scene: &ParsedScene,
    cfg: &InferenceConfig,
) -> Result<BruteForcePosterior, OracleError> {
    check(scene)?;
    let (n, k) = (scene.objects.len(), scene.boxes.len());
    let total = k.pow(n as u32);
    let mut assignments = Vec::new();
    let mut weights = Vec::new();
    for code in 0..total {
        let mut assignment = vec![0usize; n];
        let mut c = code;
        for o in (0..n).rev() {
            assignment[o] = c % k;
            c /= k;
        }
        let mut counts = vec![0usize; k];
        for &b in &assignment {
            counts[b] += 1;
        }
        if !cfg.allow_empty_boxes && counts.contains(&0) {
            continue;
        }
        let mut weight = 1.0;
        for b in 0..k {
            let contents: Vec<usize> = (0..n).filter(|&o| assignment[o] == b).collect();
            if !fits(scene, cfg, b, &contents) {
                weight = 0.0;
            }
            if cfg.mode == Mode::Full {
                for &o in &contents {
                    let p = audio_prob(scene, b, o);
                    weight *= if p > cfg.audio_floor {
                        p
                    } else {
                        cfg.audio_floor
                    };
                }
            }
        }
        assignments.push(assignment);
        weights.push(weight);
    }
    if assignments.is_empty() {
        return Err(OracleError::NoPlacements);
    }
    let mut z = 0.0;
    for w in &weights {
        z += w;
    }
    let m = assignments.len() as f64;
    let (probs, degenerate) = if z > 0.0 {
        (weights.iter().map(|w| w / z).collect(), false)
    } else {
        (vec![1.0 / m; assignments.len()], true)
    };
    Ok(BruteForcePosterior {
        assignments,
        probs,
        total_weight: z,
        degenerate,
    })
}

/// Reference marginals. Full and vision modes marginalize the exhaustive
/// posterior; audio mode normalizes each object's classifier probabilities
/// across boxes.
pub fn brute_force_marginals(
    scene: &ParsedScene,
    cfg: &InferenceConfig,
) -> Result<MarginalTable, OracleError> {
    let (n, k) = (scene.objects.len(), scene.boxes.len());
    let mut probs = vec![vec![0.0; k]; n];
    if cfg.mode == Mode::Audio {
        for (o, row) in probs.iter_mut().enumerate() {
            let denom: f64 = (0..k).map(|b| audio_prob(scene, b, o)).sum();
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = if denom > 0.0 {
                    audio_prob(scene, b, o) / denom
                } else {
                    1.0 / k as f64
                };
            }
        }
    } else {
        let post = brute_force_posterior(scene, cfg)?;
        for (a, p) in post.assignments.iter().zip(&post.probs) {
            for (o, &b) in a.iter().enumerate() {
                probs[o][b] += p;
            }
        }
    }
    Ok(MarginalTable {
        objects: scene.objects.iter().map(|o| o.name.clone()).collect(),
        boxes: scene.boxes.iter().map(|b| b.id.clone()).collect(),
        probs,
    })
}

/// Summary for the report document.
pub fn brute_force_summary(post: &BruteForcePosterior) -> PosteriorSummary {
    let mut best = 0;
    for i in 1..post.probs.len() {
        if post.probs[i] > post.probs[best] {
            best = i;
        }
    }
    let entropy = post
        .probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    PosteriorSummary {
        map_assignment: post.assignments[best].clone(),
        entropy,
        degenerate_fallback: post.degenerate,
        total_unnormalized_weight: post.total_weight,
        n_hypotheses: post.assignments.len(),
    }
}

/// Scene with known ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub scene: ParsedScene,
    pub true_placement: Placement,
    /// Classifier confusion in [0, 1]: 0 is a perfect classifier, 1 is
    /// uninformative.
    pub confusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    /// Standard deviation of every dimension as a fraction of its mean.
    pub std_fraction: f64,
    /// Randomize rigidity in [0.6, 1]; otherwise every object is rigid.
    pub random_rigidity: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            std_fraction: 0.0,
            random_rigidity: true,
        }
    }
}

const HOUSEHOLD: [&str; 12] = [
    "mug",
    "plate",
    "laptop",
    "pillow",
    "water-bottle",
    "coins",
    "book",
    "yoga-mat",
    "spoon",
    "candle",
    "toy-car",
    "jar",
];

/// Deterministic synthetic scene with zero-variance dimensions.
pub fn generate_scene(
    seed: u64,
    n_objects: usize,
    k_boxes: usize,
    confusion: f64,
) -> SyntheticScene {
    generate_scene_with(
        seed,
        n_objects,
        k_boxes,
        confusion,
        &GeneratorOptions::default(),
    )
}

pub fn generate_scene_with(
    seed: u64,
    n_objects: usize,
    k_boxes: usize,
    confusion: f64,
    opts: &GeneratorOptions,
) -> SyntheticScene {
    assert!(
        n_objects >= 1 && k_boxes >= 1,
        "need at least one object and one box"
    );
    let confusion = confusion.clamp(0.0, 1.0);
    let mut rng = seeded(seed, "synthetic-scene");

    // Surjective truth when possible: one distinct box for the first K
    // objects in a shuffled order, the rest uniformly.
    let mut order: Vec<usize> = (0..n_objects).collect();
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n_objects];
    for (i, &o) in order.iter().enumerate() {
        assignment[o] = if i < k_boxes {
            i
        } else {
            rng.random_range(0..k_boxes)
        };
    }

    let objects: Vec<ObjectSpec> = (0..n_objects)
        .map(|i| {
            let mean = [
                rng.random_range(4.0..40.0),
                rng.random_range(4.0..40.0),
                rng.random_range(2.0..25.0),
            ];
            let rigidity = if opts.random_rigidity {
                rng.random_range(0.6..=1.0)
            } else {
                1.0
            };
            ObjectSpec {
                name: format!("{}-{i}", HOUSEHOLD[i % HOUSEHOLD.len()]),
                dims: UncertainDims {
                    mean,
                    std: mean.map(|m| m * opts.std_fraction),
                },
                weight_g: Weight {
                    mean: rng.random_range(20.0..3000.0),
                    std: 0.0,
                },
                material: "mixed".into(),
                rigidity,
            }
        })
        .collect();

    let boxes: Vec<BoxSpec> = (0..k_boxes)
        .map(|b| {
            let contents: Vec<usize> = (0..n_objects).filter(|&o| assignment[o] == b).collect();
            let mut need = [0.0f64; 3];
            let mut volume = 0.0;
            for &o in &contents {
                let mut eff = objects[o].dims.mean.map(|d| d * objects[o].rigidity);
                volume += eff[0] * eff[1] * eff[2];
                eff.sort_by(f64::total_cmp);
                for j in 0..3 {
                    need[j] = need[j].max(eff[j]);
                }
            }
            let mut mean = if contents.is_empty() {
                [
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                    rng.random_range(10.0..40.0),
                ]
            } else {
                need.map(|d| d * rng.random_range(1.05..1.3))
            };
            let cap = mean[0] * mean[1] * mean[2];
            if volume * 1.2 > cap {
                let scale = (volume * 1.2 / cap).cbrt();
                mean = mean.map(|d| d * scale);
            }
            BoxSpec {
                id: format!("box{}", b + 1),
                label: format!("box {}", b + 1),
                dims: UncertainDims {
                    mean,
                    std: mean.map(|m| m * opts.std_fraction),
                },
            }
        })
        .collect();

    let uniform = 1.0 / n_objects as f64;
    let rows = (0..k_boxes)
        .map(|b| {
            let raw: Vec<f64> = (0..n_objects)
                .map(|o| {
                    let hit = if assignment[o] == b { 1.0 } else { 0.0 };
                    (1.0 - confusion) * hit + confusion * uniform
                })
                .collect();
            let s: f64 = raw.iter().sum();
            let row = if s > 0.0 {
                raw.iter().map(|r| r / s).collect()
            } else {
                vec![uniform; n_objects]
            };
            (boxes[b].id.clone(), row)
        })
        .collect();

    let scene = ParsedScene {
        scenario_id: format!("synthetic-{seed}-{n_objects}x{k_boxes}"),
        audio: AudioPosterior {
            labels: objects.iter().map(|o| o.name.clone()).collect(),
            rows,
        },
        objects,
        boxes,
    };
    SyntheticScene {
        scene,
        true_placement: Placement::new(assignment),
        confusion,
    }
}
