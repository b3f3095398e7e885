//! Structured scene representation: hidden objects, boxes, and the per-box
//! audio classifier posteriors, plus loading and validation.
//!
//! Units are centimeters and grams throughout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on audio row sums.
pub const AUDIO_ROW_TOLERANCE: f64 = 1e-6;

/// Mean and standard deviation of a 3D extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainDims {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl UncertainDims {
    pub fn exact(mean: [f64; 3]) -> Self {
        Self {
            mean,
            std: [0.0; 3],
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.std.iter().all(|s| *s == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub dims: UncertainDims,
    pub weight_g: Weight,
    pub material: String,
    /// Fraction of each nominal extent the object can be compressed to.
    pub rigidity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub id: String,
    pub label: String,
    pub dims: UncertainDims,
}

/// Classifier posterior `P(object | audio of box)` for every box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioPosterior {
    pub labels: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedScene {
    pub scenario_id: String,
    pub objects: Vec<ObjectSpec>,
    pub boxes: Vec<BoxSpec>,
    #[serde(rename = "audio_posterior")]
    pub audio: AudioPosterior,
}

/// One broken invariant, located by a dotted document path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed scene document at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid scene: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl ParsedScene {
    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn box_index(&self, id: &str) -> Option<usize> {
        self.boxes.iter().position(|b| b.id == id)
    }

    pub fn object_names(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.name.clone()).collect()
    }

    pub fn box_ids(&self) -> Vec<String> {
        self.boxes.iter().map(|b| b.id.clone()).collect()
    }

    pub fn all_deterministic(&self) -> bool {
        self.objects.iter().all(|o| o.dims.is_deterministic())
            && self.boxes.iter().all(|b| b.dims.is_deterministic())
    }

    /// Audio matrix indexed `[box][object]` in scene order.
    ///
    /// Assumes a valid scene; missing entries read as 0.
    pub fn audio_matrix(&self) -> Vec<Vec<f64>> {
        let label_pos: HashMap<&str, usize> = self
            .audio
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        self.boxes
            .iter()
            .map(|b| {
                let row = self.audio.rows.get(&b.id);
                self.objects
                    .iter()
                    .map(|o| {
                        label_pos
                            .get(o.name.as_str())
                            .and_then(|&i| row.and_then(|r| r.get(i)))
                            .copied()
                            .unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Object indices sorted by name. Used wherever an arithmetic result must
    /// not depend on document order.
    pub fn canonical_object_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.objects.len()).collect();
        idx.sort_by(|&a, &b| self.objects[a].name.cmp(&self.objects[b].name));
        idx
    }

    /// Box indices sorted by id.
    pub fn canonical_box_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.boxes.len()).collect();
        idx.sort_by(|&a, &b| self.boxes[a].id.cmp(&self.boxes[b].id));
        idx
    }
}

/// Parses and validates a scene document. Unknown fields are logged as
/// warnings.
pub fn load_scene(text: &str) -> Result<ParsedScene, SceneError> {
    let (scene, warnings) = load_scene_with_warnings(text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(scene)
}

/// Like [`load_scene`], returning the unknown-field warnings instead of
/// logging them.
pub fn load_scene_with_warnings(text: &str) -> Result<(ParsedScene, Vec<String>), SceneError> {
    let mut ignored = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let scene: ParsedScene = {
        let mut track = serde_path_to_error::Track::new();
        let mut on_ignored =
            |path: serde_ignored::Path<'_>| ignored.push(format!("unknown field `{path}` ignored"));
        let inner = serde_ignored::Deserializer::new(&mut de, &mut on_ignored);
        let tracked = serde_path_to_error::Deserializer::new(inner, &mut track);
        match ParsedScene::deserialize(tracked) {
            Ok(s) => s,
            Err(e) => {
                let path = track.path().to_string();
                return Err(SceneError::Malformed {
                    path,
                    message: e.to_string(),
                });
            }
        }
    };
    de.end().map_err(|e| SceneError::Malformed {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let violations = validate_scene(&scene);
    if !violations.is_empty() {
        return Err(SceneError::Invalid(violations));
    }
    Ok((scene, ignored))
}

pub fn serialize_scene(scene: &ParsedScene) -> String {
    // Serializing plain data into a String cannot fail.
    let mut s = serde_json::to_string_pretty(scene).expect("scene serializes");
    s.push('\n');
    s
}

fn check_dims(path: &str, dims: &UncertainDims, out: &mut Vec<Violation>) {
    for (j, m) in dims.mean.iter().enumerate() {
        if !(m.is_finite() && *m > 0.0) {
            out.push(Violation {
                path: format!("{path}.dims.mean[{j}]"),
                message: format!("mean dimension must be positive, got {m}"),
            });
        }
    }
    for (j, s) in dims.std.iter().enumerate() {
        if !(s.is_finite() && *s >= 0.0) {
            out.push(Violation {
                path: format!("{path}.dims.std[{j}]"),
                message: format!("standard deviation must be non-negative, got {s}"),
            });
        }
    }
}

/// Returns every invariant violation in `scene`; empty when valid.
pub fn validate_scene(scene: &ParsedScene) -> Vec<Violation> {
    let mut out = Vec::new();
    if scene.objects.is_empty() {
        out.push(Violation {
            path: "objects".into(),
            message: "at least one object is required".into(),
        });
    }
    if scene.boxes.is_empty() {
        out.push(Violation {
            path: "boxes".into(),
            message: "at least one box is required".into(),
        });
    }

    let mut seen = BTreeSet::new();
    for o in &scene.objects {
        let path = format!("objects[{}]", o.name);
        if o.name.is_empty() {
            out.push(Violation {
                path: path.clone(),
                message: "object name must be non-empty".into(),
            });
        } else if !seen.insert(o.name.as_str()) {
            out.push(Violation {
                path: path.clone(),
                message: format!("duplicate object name `{}`", o.name),
            });
        }
        check_dims(&path, &o.dims, &mut out);
        if !(o.weight_g.mean.is_finite() && o.weight_g.mean > 0.0) {
            out.push(Violation {
                path: format!("{path}.weight_g.mean"),
                message: format!("weight must be positive, got {}", o.weight_g.mean),
            });
        }
        if !(o.weight_g.std.is_finite() && o.weight_g.std >= 0.0) {
            out.push(Violation {
                path: format!("{path}.weight_g.std"),
                message: format!("weight std must be non-negative, got {}", o.weight_g.std),
            });
        }
        if !(o.rigidity > 0.0 && o.rigidity <= 1.0) {
            out.push(Violation {
                path: format!("{path}.rigidity"),
                message: format!(
                    "rigidity of `{}` must lie in (0, 1], got {}",
                    o.name, o.rigidity
                ),
            });
        }
    }

    let mut seen_boxes = BTreeSet::new();
    for b in &scene.boxes {
        let path = format!("boxes[{}]", b.id);
        if b.id.is_empty() {
            out.push(Violation {
                path: path.clone(),
                message: "box id must be non-empty".into(),
            });
        } else if !seen_boxes.insert(b.id.as_str()) {
            out.push(Violation {
                path: path.clone(),
                message: format!("duplicate box id `{}`", b.id),
            });
        }
        check_dims(&path, &b.dims, &mut out);
    }

    let audio = &scene.audio;
    let mut label_set = BTreeSet::new();
    for l in &audio.labels {
        if !label_set.insert(l.as_str()) {
            out.push(Violation {
                path: "audio_posterior.labels".into(),
                message: format!("duplicate label `{l}`"),
            });
        }
        if !seen.contains(l.as_str()) {
            out.push(Violation {
                path: "audio_posterior.labels".into(),
                message: format!("label `{l}` does not name an object in the scene"),
            });
        }
    }
    for name in &seen {
        if !label_set.contains(name) {
            out.push(Violation {
                path: "audio_posterior.labels".into(),
                message: format!("object `{name}` has no audio label"),
            });
        }
    }
    for (id, row) in &audio.rows {
        let path = format!("audio_posterior.rows.{id}");
        if !seen_boxes.contains(id.as_str()) {
            out.push(Violation {
                path: path.clone(),
                message: format!("row for unknown box `{id}`"),
            });
        }
        if row.len() != audio.labels.len() {
            out.push(Violation {
                path: path.clone(),
                message: format!(
                    "row for box `{id}` has {} entries, expected {}",
                    row.len(),
                    audio.labels.len()
                ),
            });
        }
        if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            out.push(Violation {
                path: path.clone(),
                message: format!("row for box `{id}` has invalid probability {p}"),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > AUDIO_ROW_TOLERANCE {
            out.push(Violation {
                path,
                message: format!("row for box `{id}` sums to {sum}, expected 1"),
            });
        }
    }
    for id in &seen_boxes {
        if !audio.rows.contains_key(*id) {
            out.push(Violation {
                path: format!("audio_posterior.rows.{id}"),
                message: format!("box `{id}` has no audio row"),
            });
        }
    }
    out
}
