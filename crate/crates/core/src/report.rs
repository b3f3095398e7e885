//! Serialized inference report.
//!
//! Field order is fixed by the struct definitions and numbers are rounded to
//! 12 significant digits, so reports diff cleanly across runs.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::fusion::{map_hypothesis, Inference, InferenceConfig, MarginalTable, Mode};
use crate::scene::ParsedScene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n_samples: usize,
    pub seed: u64,
    pub packing_efficiency: f64,
    pub dim_floor: f64,
    pub allow_empty_boxes: bool,
    pub audio_floor: f64,
}

impl From<&InferenceConfig> for ConfigEcho {
    fn from(cfg: &InferenceConfig) -> Self {
        Self {
            n_samples: cfg.fit_params.n_samples,
            seed: cfg.fit_params.master_seed,
            packing_efficiency: round12(cfg.fit_params.packing_efficiency),
            dim_floor: round12(cfg.fit_params.dim_floor),
            allow_empty_boxes: cfg.allow_empty_boxes,
            audio_floor: round12(cfg.audio_floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub n_hypotheses: Option<usize>,
    pub degenerate_fallback: bool,
    pub total_unnormalized_weight: Option<f64>,
    /// Audio-only rows that fell back to uniform.
    pub uniform_fallback_objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario_id: String,
    pub mode: Mode,
    pub config: ConfigEcho,
    pub objects: Vec<String>,
    pub boxes: Vec<String>,
    /// object name -> box id -> probability.
    pub marginals: IndexMap<String, IndexMap<String, f64>>,
    /// object name -> box id of the most probable placement.
    pub map_placement: Option<IndexMap<String, String>>,
    pub posterior_entropy_nats: Option<f64>,
    pub diagnostics: ReportDiagnostics,
}

/// Hypothesis-level summary that accompanies the marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub map_assignment: Vec<usize>,
    pub entropy: f64,
    pub degenerate_fallback: bool,
    pub total_unnormalized_weight: f64,
    pub n_hypotheses: usize,
}

pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl Report {
    pub fn build(
        scene: &ParsedScene,
        cfg: &InferenceConfig,
        mode: Mode,
        marginals: &MarginalTable,
        summary: Option<&PosteriorSummary>,
        uniform_fallback_objects: Vec<String>,
    ) -> Self {
        let table = marginals
            .objects
            .iter()
            .zip(&marginals.probs)
            .map(|(o, row)| {
                let cells = marginals
                    .boxes
                    .iter()
                    .zip(row)
                    .map(|(b, p)| (b.clone(), round12(*p)))
                    .collect();
                (o.clone(), cells)
            })
            .collect();
        let map_placement = summary.map(|s| {
            scene
                .objects
                .iter()
                .zip(&s.map_assignment)
                .map(|(o, &b)| (o.name.clone(), scene.boxes[b].id.clone()))
                .collect()
        });
        Report {
            scenario_id: scene.scenario_id.clone(),
            mode,
            config: cfg.into(),
            objects: marginals.objects.clone(),
            boxes: marginals.boxes.clone(),
            marginals: table,
            map_placement,
            posterior_entropy_nats: summary.map(|s| round12(s.entropy)),
            diagnostics: ReportDiagnostics {
                n_hypotheses: summary.map(|s| s.n_hypotheses),
                degenerate_fallback: summary.is_some_and(|s| s.degenerate_fallback),
                total_unnormalized_weight: summary.map(|s| round12(s.total_unnormalized_weight)),
                uniform_fallback_objects,
            },
        }
    }

    pub fn from_inference(
        scene: &ParsedScene,
        cfg: &InferenceConfig,
        inference: &Inference,
    ) -> Self {
        let summary = inference.posterior.as_ref().map(|post| PosteriorSummary {
            map_assignment: map_hypothesis(post).assignment().to_vec(),
            entropy: post.entropy(),
            degenerate_fallback: post.diagnostics.degenerate_fallback,
            total_unnormalized_weight: post.diagnostics.total_unnormalized_weight,
            n_hypotheses: post.hypotheses.len(),
        });
        Self::build(
            scene,
            cfg,
            inference.mode,
            &inference.marginals,
            summary.as_ref(),
            inference.uniform_fallback_objects.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Marginals as a table, in the report's object and box order. Cells
    /// missing from the document read as 0.
    pub fn marginal_table(&self) -> MarginalTable {
        let probs = self
            .objects
            .iter()
            .map(|o| {
                self.boxes
                    .iter()
                    .map(|b| {
                        self.marginals
                            .get(o)
                            .and_then(|row| row.get(b))
                            .copied()
                            .unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect();
        MarginalTable {
            objects: self.objects.clone(),
            boxes: self.boxes.clone(),
            probs,
        }
    }
}
