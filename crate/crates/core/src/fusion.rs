//! Audio-visual fusion over the hypothesis space.
//!
//! Under a uniform prior the posterior of a placement is proportional to
//! `prod_i P(O_i | H_i) * P(H_i | A_i)`, where the visual term is the
//! acceptance rate of box `i`'s contents and the audio term is the product of
//! the classifier probabilities of those contents given box `i`'s sound.
//! Per-object placement probabilities are marginals of that posterior.
//!
//! Weights are handled in log space. The visual and audio log-sums are shifted
//! by their own maxima before being combined, so a hypothesis-independent
//! audio term cancels exactly rather than up to rounding. Every reduction over
//! hypotheses or boxes runs in an order that does not depend on how the scene
//! document lists its objects and boxes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ContentsKey, FitParams, FitParamsError, VisualLikelihoodTable};
use crate::hypothesis::{self, HypothesisError, HypothesisSet, Placement};
use crate::scene::ParsedScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Audio,
    Vision,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Audio => "audio",
            Mode::Vision => "vision",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Mode::Full),
            "audio" | "audio-only" => Ok(Mode::Audio),
            "vision" | "vision-only" => Ok(Mode::Vision),
            other => Err(format!(
                "unknown mode `{other}` (expected full, audio or vision)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub mode: Mode,
    pub fit_params: FitParams,
    pub allow_empty_boxes: bool,
    /// Lower bound applied to classifier probabilities in the full model.
    pub audio_floor: f64,
    pub hypothesis_cap: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            fit_params: FitParams::default(),
            allow_empty_boxes: false,
            audio_floor: 1e-6,
            hypothesis_cap: hypothesis::DEFAULT_HYPOTHESIS_CAP,
        }
    }
}

impl InferenceConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        self.fit_params.validate()?;
        if !(0.0..1.0).contains(&self.audio_floor) {
            return Err(InferenceError::AudioFloor(self.audio_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Hypotheses(#[from] HypothesisError),
    #[error(transparent)]
    FitParams(#[from] FitParamsError),
    #[error("audio floor must lie in [0, 1), got {0}")]
    AudioFloor(f64),
    #[error("no placement of {n_objects} objects into {k_boxes} boxes leaves every box non-empty")]
    NoHypotheses { n_objects: usize, k_boxes: usize },
    #[error("visual likelihood table has no entry for box {box_index} with contents {contents:?}")]
    MissingVisualKey {
        box_index: usize,
        contents: Vec<usize>,
    },
    #[error("the audio-only model is defined per object and has no hypothesis posterior")]
    NoPosteriorInAudioMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorDiagnostics {
    /// Every hypothesis had zero weight and the uniform prior was returned.
    pub degenerate_fallback: bool,
    pub total_unnormalized_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub hypotheses: HypothesisSet,
    pub probs: Vec<f64>,
    pub diagnostics: PosteriorDiagnostics,
}

impl PosteriorResult {
    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        let mut terms: Vec<f64> = self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .collect();
        order_free_sum(&mut terms)
    }
}

/// Placement probabilities indexed `[object][box]` in scene order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub objects: Vec<String>,
    pub boxes: Vec<String>,
    pub probs: Vec<Vec<f64>>,
}

impl MarginalTable {
    pub fn get(&self, object: &str, box_id: &str) -> Option<f64> {
        let o = self.objects.iter().position(|n| n == object)?;
        let b = self.boxes.iter().position(|n| n == box_id)?;
        Some(self.probs[o][b])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Sum that depends only on the multiset of values: sorts, then adds in
/// ascending order.
pub(crate) fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Product of (floored) classifier probabilities for the contents of one box.
/// Empty contents score 1.
pub fn audio_score(contents: &[usize], audio_row: &[f64], audio_floor: f64) -> f64 {
    contents
        .iter()
        .map(|&o| audio_row[o].max(audio_floor))
        .product()
}

/// Unnormalized weight of one placement as a direct product over boxes in
/// id order. The audio term is skipped in vision mode.
pub fn hypothesis_weight(
    placement: &Placement,
    visual: &VisualLikelihoodTable,
    scene: &ParsedScene,
    cfg: &InferenceConfig,
) -> Result<f64, InferenceError> {
    let audio = scene.audio_matrix();
    let mut w = 1.0;
    for b in scene.canonical_box_order() {
        let contents = placement.box_contents(b);
        let rate = visual
            .get(b, &contents)
            .ok_or_else(|| InferenceError::MissingVisualKey {
                box_index: b,
                contents: contents.clone(),
            })?;
        w *= rate;
        if cfg.mode != Mode::Vision {
            w *= audio_score(&contents, &audio[b], cfg.audio_floor);
        }
    }
    Ok(w)
}

/// Normalized posterior over placements for the full or vision-only model.
pub fn posterior(
    scene: &ParsedScene,
    cfg: &InferenceConfig,
) -> Result<PosteriorResult, InferenceError> {
    if cfg.mode == Mode::Audio {
        return Err(InferenceError::NoPosteriorInAudioMode);
    }
    cfg.validate()?;
    let hypotheses = hypothesis::enumerate_hypotheses_capped(
        scene.n_objects(),
        scene.n_boxes(),
        cfg.allow_empty_boxes,
        cfg.hypothesis_cap,
    )?;
    let visual = geometry::visual_likelihood_table(scene, &hypotheses, &cfg.fit_params);
    let audio = scene.audio_matrix();
    posterior_from_parts(scene, hypotheses, &visual, &audio, cfg)
}

/// Posterior from explicit ingredients. `audio` is indexed `[box][object]` and
/// is used as given, without any row normalization.
pub fn posterior_from_parts(
    scene: &ParsedScene,
    hypotheses: HypothesisSet,
    visual: &VisualLikelihoodTable,
    audio: &[Vec<f64>],
    cfg: &InferenceConfig,
) -> Result<PosteriorResult, InferenceError> {
    if hypotheses.is_empty() {
        return Err(InferenceError::NoHypotheses {
            n_objects: scene.n_objects(),
            k_boxes: scene.n_boxes(),
        });
    }
    let box_order = scene.canonical_box_order();
    let obj_order = scene.canonical_object_order();
    let use_audio = cfg.mode == Mode::Full;
    let log_audio: Vec<Vec<f64>> = audio
        .iter()
        .map(|row| row.iter().map(|p| p.max(cfg.audio_floor).ln()).collect())
        .collect();

    let log_parts = |p: &Placement| -> Result<(f64, f64), InferenceError> {
        let mut visual_log = 0.0;
        for &b in &box_order {
            let contents = p.box_contents(b);
            let rate = visual
                .get(b, &contents)
                .ok_or(InferenceError::MissingVisualKey {
                    box_index: b,
                    contents,
                })?;
            visual_log += rate.ln();
        }
        let audio_log = if use_audio {
            obj_order.iter().map(|&o| log_audio[p.box_of(o)][o]).sum()
        } else {
            0.0
        };
        Ok((visual_log, audio_log))
    };
    let parts: Vec<(f64, f64)> = if cfg.fit_params.parallel {
        hypotheses
            .placements()
            .par_iter()
            .map(log_parts)
            .collect::<Result<_, _>>()?
    } else {
        hypotheses
            .placements()
            .iter()
            .map(log_parts)
            .collect::<Result<_, _>>()?
    };

    let visual_max = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let audio_max = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let n = parts.len();
    let uniform = |total: f64| PosteriorResult {
        probs: vec![1.0 / n as f64; n],
        diagnostics: PosteriorDiagnostics {
            degenerate_fallback: true,
            total_unnormalized_weight: total,
        },
        hypotheses: hypotheses.clone(),
    };
    if visual_max == f64::NEG_INFINITY || audio_max == f64::NEG_INFINITY {
        return Ok(uniform(0.0));
    }
    let shifted: Vec<f64> = parts
        .iter()
        .map(|(v, a)| (v - visual_max) + (a - audio_max))
        .collect();
    let shift_max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift_max == f64::NEG_INFINITY {
        return Ok(uniform(0.0));
    }
    let weights: Vec<f64> = shifted.iter().map(|s| (s - shift_max).exp()).collect();
    let z = order_free_sum(&mut weights.clone());
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let total = (visual_max + audio_max + shift_max).exp() * z;
    Ok(PosteriorResult {
        hypotheses,
        probs,
        diagnostics: PosteriorDiagnostics {
            degenerate_fallback: false,
            total_unnormalized_weight: total,
        },
    })
}

/// Per-object marginals of a posterior.
pub fn marginals(post: &PosteriorResult, n_objects: usize, k_boxes: usize) -> Vec<Vec<f64>> {
    let mut cells: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k_boxes]; n_objects];
    for (p, &prob) in post.hypotheses.iter().zip(&post.probs) {
        for (o, &b) in p.assignment().iter().enumerate() {
            cells[o][b].push(prob);
        }
    }
    cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|mut c| order_free_sum(&mut c))
                .collect()
        })
        .collect()
}

fn table(scene: &ParsedScene, probs: Vec<Vec<f64>>) -> MarginalTable {
    MarginalTable {
        objects: scene.object_names(),
        boxes: scene.box_ids(),
        probs,
    }
}

/// Marginal table of a posterior, labelled with the scene's names.
pub fn marginal_table(scene: &ParsedScene, post: &PosteriorResult) -> MarginalTable {
    table(scene, marginals(post, scene.n_objects(), scene.n_boxes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBaseline {
    pub marginals: MarginalTable,
    /// Objects whose classifier probability was zero in every box; their rows
    /// fall back to uniform.
    pub uniform_fallback: Vec<String>,
}

/// Audio-only model: each object's classifier probability in each box,
/// normalized over boxes. No audio floor is applied.
pub fn audio_only_baseline(scene: &ParsedScene) -> AudioBaseline {
    let audio = scene.audio_matrix();
    let box_order = scene.canonical_box_order();
    let k = scene.n_boxes();
    let mut uniform_fallback = Vec::new();
    let probs = (0..scene.n_objects())
        .map(|o| {
            let denom: f64 = box_order.iter().map(|&b| audio[b][o]).sum();
            if denom > 0.0 {
                (0..k).map(|b| audio[b][o] / denom).collect()
            } else {
                uniform_fallback.push(scene.objects[o].name.clone());
                vec![1.0 / k as f64; k]
            }
        })
        .collect();
    AudioBaseline {
        marginals: table(scene, probs),
        uniform_fallback,
    }
}

/// Vision-only model: the posterior with the audio term set to 1.
pub fn vision_only_baseline(
    scene: &ParsedScene,
    cfg: &InferenceConfig,
) -> Result<MarginalTable, InferenceError> {
    let cfg = InferenceConfig {
        mode: Mode::Vision,
        ..cfg.clone()
    };
    let post = posterior(scene, &cfg)?;
    Ok(marginal_table(scene, &post))
}

/// Highest-probability placement; ties go to the lexicographically smallest.
pub fn map_hypothesis(post: &PosteriorResult) -> &Placement {
    let mut best = 0;
    for (i, p) in post.probs.iter().enumerate() {
        if *p > post.probs[best] {
            best = i;
        }
    }
    &post.hypotheses.placements()[best]
}

/// Result of running one model on a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub mode: Mode,
    pub marginals: MarginalTable,
    /// Absent for the audio-only model.
    pub posterior: Option<PosteriorResult>,
    pub uniform_fallback_objects: Vec<String>,
}

/// Runs the model selected by `cfg.mode`.
pub fn infer(scene: &ParsedScene, cfg: &InferenceConfig) -> Result<Inference, InferenceError> {
    match cfg.mode {
        Mode::Audio => {
            cfg.validate()?;
            let base = audio_only_baseline(scene);
            Ok(Inference {
                mode: Mode::Audio,
                marginals: base.marginals,
                posterior: None,
                uniform_fallback_objects: base.uniform_fallback,
            })
        }
        mode => {
            let post = posterior(scene, cfg)?;
            Ok(Inference {
                mode,
                marginals: marginal_table(scene, &post),
                posterior: Some(post),
                uniform_fallback_objects: Vec::new(),
            })
        }
    }
}

/// Visual table where every key used by `hypotheses` has the same rate.
pub fn constant_visual_table(hypotheses: &HypothesisSet, rate: f64) -> VisualLikelihoodTable {
    VisualLikelihoodTable::constant(
        geometry::contents_keys(hypotheses)
            .into_iter()
            .collect::<Vec<ContentsKey>>(),
        rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{AudioPosterior, BoxSpec, ObjectSpec, UncertainDims, Weight};

    pub(crate) fn two_object_scene() -> ParsedScene {
        let obj = |name: &str| ObjectSpec {
            name: name.into(),
            dims: UncertainDims::exact([5.0, 5.0, 5.0]),
            weight_g: Weight {
                mean: 100.0,
                std: 0.0,
            },
            material: "plastic".into(),
            rigidity: 1.0,
        };
        let bx = |id: &str| BoxSpec {
            id: id.into(),
            label: id.into(),
            dims: UncertainDims::exact([50.0, 50.0, 50.0]),
        };
        ParsedScene {
            scenario_id: "worked".into(),
            objects: vec![obj("a"), obj("b")],
            boxes: vec![bx("box1"), bx("box2")],
            audio: AudioPosterior {
                labels: vec!["a".into(), "b".into()],
                rows: [
                    ("box1".to_string(), vec![0.8, 0.2]),
                    ("box2".to_string(), vec![0.3, 0.7]),
                ]
                .into_iter()
                .collect(),
            },
        }
    }

    #[test]
    fn audio_score_examples() {
        assert_eq!(audio_score(&[0], &[0.8, 0.2], 0.0), 0.8);
        assert!((audio_score(&[0, 1], &[0.8, 0.2], 0.0) - 0.16).abs() < 1e-15);
        assert_eq!(audio_score(&[], &[0.8, 0.2], 0.0), 1.0);
        assert_eq!(audio_score(&[0], &[0.0, 1.0], 1e-6), 1e-6);
    }

    #[test]
    fn worked_example_weights() {
        let scene = two_object_scene();
        let cfg = InferenceConfig {
            audio_floor: 0.0,
            ..Default::default()
        };
        let hyps = hypothesis::enumerate_hypotheses(2, 2, false).unwrap();
        let visual = geometry::visual_likelihood_table(&scene, &hyps, &cfg.fit_params);
        let w1 = hypothesis_weight(&Placement::new(vec![0, 1]), &visual, &scene, &cfg).unwrap();
        let w2 = hypothesis_weight(&Placement::new(vec![1, 0]), &visual, &scene, &cfg).unwrap();
        assert!((w1 - 0.56).abs() < 1e-15);
        assert!((w2 - 0.06).abs() < 1e-15);

        let post = posterior(&scene, &cfg).unwrap();
        assert!((post.probs[0] - 0.56 / 0.62).abs() < 1e-12);
        assert!((post.probs[1] - 0.06 / 0.62).abs() < 1e-12);
        assert!((post.diagnostics.total_unnormalized_weight - 0.62).abs() < 1e-12);
        let m = marginal_table(&scene, &post);
        assert!((m.get("a", "box1").unwrap() - 0.56 / 0.62).abs() < 1e-12);
        assert!((m.get("a", "box2").unwrap() - 0.06 / 0.62).abs() < 1e-12);
        assert_eq!(map_hypothesis(&post).assignment(), &[0, 1]);
    }

    #[test]
    fn zero_visual_rate_annihilates() {
        let scene = two_object_scene();
        let hyps = hypothesis::enumerate_hypotheses(2, 2, false).unwrap();
        let visual = constant_visual_table(&hyps, 0.0);
        let w = hypothesis_weight(
            &Placement::new(vec![0, 1]),
            &visual,
            &scene,
            &InferenceConfig::default(),
        )
        .unwrap();
        assert_eq!(w, 0.0);
        let missing =
            constant_visual_table(&hypothesis::enumerate_hypotheses(1, 2, true).unwrap(), 1.0);
        assert!(matches!(
            hypothesis_weight(
                &Placement::new(vec![0, 1]),
                &missing,
                &scene,
                &InferenceConfig::default()
            ),
            Err(InferenceError::MissingVisualKey { .. })
        ));
    }

    #[test]
    fn uniform_audio_gives_uniform_posterior() {
        let mut scene = two_object_scene();
        for row in scene.audio.rows.values_mut() {
            *row = vec![0.5, 0.5];
        }
        let post = posterior(&scene, &InferenceConfig::default()).unwrap();
        assert_eq!(post.probs, vec![0.5, 0.5]);
        assert_eq!(map_hypothesis(&post).assignment(), &[0, 1]);
        let m = marginal_table(&scene, &post);
        assert!(m.probs.iter().flatten().all(|p| *p == 0.5));
    }

    #[test]
    fn nothing_fits_falls_back_to_uniform() {
        let mut scene = two_object_scene();
        for o in &mut scene.objects {
            o.dims = UncertainDims::exact([500.0, 5.0, 5.0]);
        }
        let post = posterior(&scene, &InferenceConfig::default()).unwrap();
        assert!(post.diagnostics.degenerate_fallback);
        assert_eq!(post.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn audio_baseline_examples() {
        let scene = two_object_scene();
        let base = audio_only_baseline(&scene);
        assert!((base.marginals.get("a", "box1").unwrap() - 0.8 / 1.1).abs() < 1e-12);
        assert!(base.uniform_fallback.is_empty());

        let mut same = scene.clone();
        same.audio.rows.insert("box2".into(), vec![0.8, 0.2]);
        let base = audio_only_baseline(&same);
        assert!(base.marginals.probs.iter().flatten().all(|p| *p == 0.5));

        let mut zero = scene.clone();
        zero.audio.rows.insert("box1".into(), vec![0.0, 1.0]);
        zero.audio.rows.insert("box2".into(), vec![0.0, 1.0]);
        let base = audio_only_baseline(&zero);
        assert_eq!(base.uniform_fallback, vec!["a".to_string()]);
        assert_eq!(base.marginals.probs[0], vec![0.5, 0.5]);
    }

    #[test]
    fn single_box_audio_baseline() {
        let mut scene = two_object_scene();
        scene.boxes.truncate(1);
        scene.audio.rows.remove("box2");
        let base = audio_only_baseline(&scene);
        assert!(base.marginals.probs.iter().all(|r| r == &vec![1.0]));
    }

    #[test]
    fn vision_only_examples() {
        let scene = two_object_scene();
        let m = vision_only_baseline(&scene, &InferenceConfig::default()).unwrap();
        assert!(m.probs.iter().flatten().all(|p| *p == 0.5));

        // Object b only fits in box1, so a is forced into box2.
        let mut tight = scene.clone();
        tight.objects[1].dims = UncertainDims::exact([40.0, 5.0, 5.0]);
        tight.boxes[1].dims = UncertainDims::exact([30.0, 30.0, 30.0]);
        let m = vision_only_baseline(&tight, &InferenceConfig::default()).unwrap();
        assert_eq!(m.get("b", "box1").unwrap(), 1.0);
        assert_eq!(m.get("a", "box2").unwrap(), 1.0);
    }

    #[test]
    fn audio_mode_has_no_posterior() {
        let scene = two_object_scene();
        assert_eq!(
            posterior(&scene, &InferenceConfig::with_mode(Mode::Audio)),
            Err(InferenceError::NoPosteriorInAudioMode)
        );
        let inf = infer(&scene, &InferenceConfig::with_mode(Mode::Audio)).unwrap();
        assert!(inf.posterior.is_none());
    }

    #[test]
    fn too_few_objects_for_surjective() {
        let mut scene = two_object_scene();
        scene.objects.truncate(1);
        scene.audio.labels.truncate(1);
        for row in scene.audio.rows.values_mut() {
            *row = vec![1.0];
        }
        assert!(matches!(
            posterior(&scene, &InferenceConfig::default()),
            Err(InferenceError::NoHypotheses { .. })
        ));
        let cfg = InferenceConfig {
            allow_empty_boxes: true,
            ..Default::default()
        };
        assert_eq!(posterior(&scene, &cfg).unwrap().probs.len(), 2);
    }

    #[test]
    fn bad_config_rejected() {
        let scene = two_object_scene();
        let cfg = InferenceConfig {
            audio_floor: 1.0,
            ..Default::default()
        };
        assert_eq!(
            posterior(&scene, &cfg),
            Err(InferenceError::AudioFloor(1.0))
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("audio".parse::<Mode>().unwrap(), Mode::Audio);
        assert_eq!("vision-only".parse::<Mode>().unwrap(), Mode::Vision);
        assert!("both".parse::<Mode>().is_err());
    }
}
