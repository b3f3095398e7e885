//! Model-versus-human evaluation.
//!
//! Ratings are slider values in [1, 100] that sum to 100 across the boxes for
//! each (participant, scenario, object). Model marginals are scaled by 100 and
//! paired with mean human ratings per (scenario, object, box); all scenarios
//! are pooled into one Pearson correlation per model mode.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::MarginalTable;
use crate::rng::seeded;

/// Allowed deviation of a rating group's sum from 100.
pub const SUM_TOLERANCE: f64 = 1.0;
pub const DEFAULT_SPLITS: usize = 100;
pub const DEFAULT_EXCLUSION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("ratings for participant `{participant}`, scenario `{scenario}`, object `{object}` sum to {sum}, expected 100")]
    SumViolation {
        participant: String,
        scenario: String,
        object: String,
        sum: f64,
    },
    #[error(
        "scenario `{scenario}` has {found} participants; split-half agreement needs at least 4"
    )]
    TooFewParticipants { scenario: String, found: usize },
    #[error("no scenario appears in both the model tables and the ratings")]
    NoOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRating {
    pub scenario_id: String,
    pub participant_id: String,
    pub object: String,
    #[serde(rename = "box")]
    pub box_id: String,
    pub rating: f64,
}

/// Pearson product-moment correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::UndefinedCorrelation("inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(EvalError::UndefinedCorrelation("fewer than two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// A rating group whose values do not sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumFlag {
    pub scenario_id: String,
    pub participant_id: String,
    pub object: String,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedRatings {
    pub ratings: Vec<HumanRating>,
    pub flagged: Vec<SumFlag>,
    pub warnings: Vec<String>,
}

/// Parses a `scenario_id,participant_id,object,box,rating` table. Sum-to-100
/// violations are flagged, or rejected when `strict`.
pub fn load_ratings(text: &str, strict: bool) -> Result<LoadedRatings, EvalError> {
    let mut out = LoadedRatings::default();
    if text.trim().is_empty() {
        out.warnings.push("ratings file is empty".into());
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for record in reader.deserialize::<HumanRating>() {
        let rating = record.map_err(|e| EvalError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !(1.0..=100.0).contains(&rating.rating) {
            return Err(EvalError::MalformedRow {
                line: out.ratings.len() as u64 + 2,
                message: format!("rating {} outside [1, 100]", rating.rating),
            });
        }
        out.ratings.push(rating);
    }
    if out.ratings.is_empty() {
        out.warnings
            .push("ratings file has a header but no rows".into());
    }

    let mut sums: BTreeMap<(&str, &str, &str), f64> = BTreeMap::new();
    for r in &out.ratings {
        *sums
            .entry((&r.participant_id, &r.scenario_id, &r.object))
            .or_default() += r.rating;
    }
    for ((participant, scenario, object), sum) in sums {
        if (sum - 100.0).abs() > SUM_TOLERANCE {
            if strict {
                return Err(EvalError::SumViolation {
                    participant: participant.into(),
                    scenario: scenario.into(),
                    object: object.into(),
                    sum,
                });
            }
            out.warnings.push(format!(
                "participant `{participant}`, scenario `{scenario}`, object `{object}`: ratings sum to {sum}"
            ));
            out.flagged.push(SumFlag {
                scenario_id: scenario.into(),
                participant_id: participant.into(),
                object: object.into(),
                sum,
            });
        }
    }
    Ok(out)
}

type Cell = (String, String);
/// Participant ratings per cell, keyed by participant id.
type CellRatings<'a> = BTreeMap<Cell, Vec<(&'a str, f64)>>;

/// Ratings of one scenario: participant -> (object, box) -> rating.
fn scenario_matrix(
    ratings: &[HumanRating],
    scenario_id: &str,
) -> BTreeMap<String, BTreeMap<Cell, f64>> {
    let mut m: BTreeMap<String, BTreeMap<Cell, f64>> = BTreeMap::new();
    for r in ratings.iter().filter(|r| r.scenario_id == scenario_id) {
        m.entry(r.participant_id.clone())
            .or_default()
            .insert((r.object.clone(), r.box_id.clone()), r.rating);
    }
    m
}

fn half_means(
    matrix: &BTreeMap<String, BTreeMap<Cell, f64>>,
    members: &[&String],
    cells: &BTreeSet<Cell>,
) -> Vec<f64> {
    cells
        .iter()
        .map(|c| {
            let vals: Vec<f64> = members
                .iter()
                .filter_map(|p| matrix[*p].get(c).copied())
                .collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

/// Correlation between the mean rating vectors of two given participant
/// groups in one scenario.
pub fn split_half_r(
    ratings: &[HumanRating],
    scenario_id: &str,
    first: &[String],
    second: &[String],
) -> Result<f64, EvalError> {
    let matrix = scenario_matrix(ratings, scenario_id);
    let cells: BTreeSet<Cell> = matrix.values().flat_map(|m| m.keys().cloned()).collect();
    let a: Vec<&String> = first.iter().filter(|p| matrix.contains_key(*p)).collect();
    let b: Vec<&String> = second.iter().filter(|p| matrix.contains_key(*p)).collect();
    let xs = half_means(&matrix, &a, &cells);
    let ys = half_means(&matrix, &b, &cells);
    let (xs, ys): (Vec<f64>, Vec<f64>) = xs
        .into_iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .unzip();
    pearson_r(&xs, &ys)
}

/// Mean split-half correlation over `n_splits` seeded random bisections of
/// the scenario's participants.
pub fn split_half_agreement(
    ratings: &[HumanRating],
    scenario_id: &str,
    seed: u64,
    n_splits: usize,
) -> Result<f64, EvalError> {
    let matrix = scenario_matrix(ratings, scenario_id);
    if matrix.len() < 4 {
        return Err(EvalError::TooFewParticipants {
            scenario: scenario_id.into(),
            found: matrix.len(),
        });
    }
    // Participant ids come out of the map sorted, so input order is irrelevant.
    let mut participants: Vec<String> = matrix.keys().cloned().collect();
    let mut rng = seeded(seed, &format!("split-half/{scenario_id}"));
    let half = participants.len() / 2;
    // Splits whose half-means have zero variance have no correlation and are
    // left out of the average.
    let mut total = 0.0;
    let mut defined = 0usize;
    for _ in 0..n_splits.max(1) {
        participants.shuffle(&mut rng);
        let (a, b) = participants.split_at(half);
        match split_half_r(ratings, scenario_id, a, b) {
            Ok(r) => {
                total += r;
                defined += 1;
            }
            Err(EvalError::UndefinedCorrelation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if defined == 0 {
        return Err(EvalError::UndefinedCorrelation(
            "every split has zero variance",
        ));
    }
    Ok(total / defined as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Scenarios whose split-half agreement falls below this are dropped.
    pub exclusion_threshold: Option<f64>,
    pub n_splits: usize,
    pub seed: u64,
    /// Pair every participant's rating with the model instead of the mean.
    pub per_participant: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            exclusion_threshold: Some(DEFAULT_EXCLUSION_THRESHOLD),
            n_splits: DEFAULT_SPLITS,
            seed: 0,
            per_participant: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalPoint {
    pub scenario_id: String,
    pub object: String,
    #[serde(rename = "box")]
    pub box_id: String,
    /// Mean rating, or one participant's rating in per-participant mode.
    pub human: f64,
    /// Model marginal scaled to [0, 100].
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeEval {
    pub r: f64,
    pub n_points: usize,
    pub scenarios: Vec<String>,
    pub points: Vec<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub modes: BTreeMap<String, ModeEval>,
    /// Split-half agreement per rated scenario; null when it could not be
    /// computed (fewer than 4 participants or zero variance).
    pub split_half: BTreeMap<String, Option<f64>>,
    pub excluded: Vec<String>,
    pub excluded_count: usize,
}

/// Correlates model marginals (`mode -> scenario -> table`) with human
/// ratings.
pub fn correlate(
    models: &BTreeMap<String, BTreeMap<String, MarginalTable>>,
    ratings: &[HumanRating],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let rated: BTreeSet<&str> = ratings.iter().map(|r| r.scenario_id.as_str()).collect();
    let mut split_half = BTreeMap::new();
    let mut excluded = Vec::new();
    for &s in &rated {
        let agreement = split_half_agreement(ratings, s, opts.seed, opts.n_splits).ok();
        if let (Some(threshold), Some(a)) = (opts.exclusion_threshold, agreement) {
            if a < threshold {
                excluded.push(s.to_string());
            }
        }
        split_half.insert(s.to_string(), agreement);
    }

    // Ratings grouped as scenario -> (object, box) -> values, in participant
    // id order.
    let mut by_cell: BTreeMap<&str, CellRatings> = BTreeMap::new();
    for r in ratings {
        by_cell
            .entry(&r.scenario_id)
            .or_default()
            .entry((r.object.clone(), r.box_id.clone()))
            .or_default()
            .push((&r.participant_id, r.rating));
    }
    for cells in by_cell.values_mut() {
        for v in cells.values_mut() {
            v.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
        }
    }

    let mut modes = BTreeMap::new();
    let mut any_overlap = false;
    for (mode, tables) in models {
        let mut points = Vec::new();
        let mut scenarios = Vec::new();
        for (scenario, table) in tables {
            let Some(cells) = by_cell.get(scenario.as_str()) else {
                continue;
            };
            if excluded.contains(scenario) {
                continue;
            }
            scenarios.push(scenario.clone());
            for ((object, box_id), values) in cells {
                let Some(p) = table.get(object, box_id) else {
                    continue;
                };
                let model = 100.0 * p;
                let mut push = |human| {
                    points.push(EvalPoint {
                        scenario_id: scenario.clone(),
                        object: object.clone(),
                        box_id: box_id.clone(),
                        human,
                        model,
                    })
                };
                if opts.per_participant {
                    values.iter().for_each(|(_, v)| push(*v));
                } else {
                    push(values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64);
                }
            }
        }
        if scenarios.is_empty() {
            continue;
        }
        any_overlap = true;
        let xs: Vec<f64> = points.iter().map(|p| p.model).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.human).collect();
        let r = pearson_r(&xs, &ys)?;
        modes.insert(
            mode.clone(),
            ModeEval {
                r,
                n_points: points.len(),
                scenarios,
                points,
            },
        );
    }
    if !any_overlap {
        return Err(EvalError::NoOverlap);
    }
    Ok(EvalReport {
        modes,
        split_half,
        excluded_count: excluded.len(),
        excluded,
    })
}
