//! Visual likelihood: the probability that a hypothesized set of objects fits
//! in a box, estimated by rejection sampling over normally distributed
//! dimensions.
//!
//! Feasibility is a pair of necessary conditions: every item must fit on its
//! own in some axis-aligned orientation, and the summed effective volume must
//! not exceed `eta` times the box volume. Two cubes of side 15 pass in a
//! 20-cube box even though they cannot actually be packed; exact 3D packing is
//! not attempted.
//!
//! All trials share one dimension realization per entity (common random
//! numbers), so comparisons between contents-sets and boxes are coupled.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::hypothesis::HypothesisSet;
use crate::rng::{EntityKind, EntityStream};
use crate::scene::{ParsedScene, UncertainDims};

pub type Dims = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub n_samples: usize,
    /// Packing efficiency: usable fraction of box volume.
    pub packing_efficiency: f64,
    /// Lower clamp for sampled lengths (cm).
    pub dim_floor: f64,
    pub master_seed: u64,
    /// Evaluate on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            packing_efficiency: 1.0,
            dim_floor: 0.1,
            master_seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitParamsError {
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("packing efficiency must lie in (0, 1], got {0}")]
    Efficiency(f64),
    #[error("dimension floor must be positive, got {0}")]
    Floor(f64),
}

impl FitParams {
    pub fn validate(&self) -> Result<(), FitParamsError> {
        if self.n_samples == 0 {
            return Err(FitParamsError::NoSamples);
        }
        if !(self.packing_efficiency > 0.0 && self.packing_efficiency <= 1.0) {
            return Err(FitParamsError::Efficiency(self.packing_efficiency));
        }
        if !(self.dim_floor > 0.0 && self.dim_floor.is_finite()) {
            return Err(FitParamsError::Floor(self.dim_floor));
        }
        Ok(())
    }
}

/// Key of a visual likelihood: box index and the ascending object indices it
/// contains.
pub type ContentsKey = (usize, Vec<usize>);

/// Acceptance rate for every `(box, contents)` pair used by a hypothesis set.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualLikelihoodTable {
    rates: BTreeMap<ContentsKey, f64>,
}

impl VisualLikelihoodTable {
    pub fn get(&self, box_index: usize, contents: &[usize]) -> Option<f64> {
        self.rates.get(&(box_index, contents.to_vec())).copied()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ContentsKey, &f64)> {
        self.rates.iter()
    }

    /// Table with every listed key set to `rate`; used for the audio-only
    /// factorization and in tests.
    pub fn constant(keys: impl IntoIterator<Item = ContentsKey>, rate: f64) -> Self {
        Self {
            rates: keys.into_iter().map(|k| (k, rate)).collect(),
        }
    }
}

/// One draw per axis from `Normal(mean, std)`, clamped below at `floor`.
pub fn sample_dims<R: Rng + ?Sized>(dims: &UncertainDims, rng: &mut R, floor: f64) -> Dims {
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *slot = (dims.mean[j] + dims.std[j] * z).max(floor);
    }
    out
}

/// Minimum compressed extent of an object on every axis.
pub fn effective_dims(sampled: Dims, rigidity: f64) -> Dims {
    sampled.map(|d| d * rigidity)
}

fn sorted(mut d: Dims) -> Dims {
    d.sort_by(f64::total_cmp);
    d
}

fn volume(d: &Dims) -> f64 {
    d[0] * d[1] * d[2]
}

fn sorted_le(item: &Dims, container: &Dims) -> bool {
    item.iter().zip(container).all(|(a, b)| a <= b)
}

/// True when the item fits in the box under its best axis-aligned orientation.
pub fn item_fits(item_effective: Dims, box_dims: Dims) -> bool {
    sorted_le(&sorted(item_effective), &sorted(box_dims))
}

/// Orientation test for every item plus the total volume budget. Volumes are
/// summed in the order given.
pub fn set_fits(items_effective: &[Dims], box_dims: Dims, eta: f64) -> bool {
    let b = sorted(box_dims);
    let mut total = 0.0;
    for item in items_effective {
        if !sorted_le(&sorted(*item), &b) {
            return false;
        }
        total += volume(item);
    }
    total <= eta * volume(&b)
}

/// Realized dimensions of every entity for one trial.
struct TrialDraw {
    /// Sorted effective object dims, scene order.
    objects: Vec<Dims>,
    object_volumes: Vec<f64>,
    /// Sorted box dims, scene order.
    boxes: Vec<Dims>,
    box_volumes: Vec<f64>,
}

fn draw_trial(
    scene: &ParsedScene,
    obj_streams: &[EntityStream],
    box_streams: &[EntityStream],
    params: &FitParams,
    t: u64,
) -> TrialDraw {
    let mut objects = Vec::with_capacity(scene.objects.len());
    let mut object_volumes = Vec::with_capacity(scene.objects.len());
    for (o, stream) in scene.objects.iter().zip(obj_streams) {
        let eff = effective_dims(
            sample_dims(&o.dims, &mut stream.trial(t), params.dim_floor),
            o.rigidity,
        );
        object_volumes.push(volume(&eff));
        objects.push(sorted(eff));
    }
    let mut boxes = Vec::with_capacity(scene.boxes.len());
    let mut box_volumes = Vec::with_capacity(scene.boxes.len());
    for (b, stream) in scene.boxes.iter().zip(box_streams) {
        let d = sample_dims(&b.dims, &mut stream.trial(t), params.dim_floor);
        box_volumes.push(volume(&d));
        boxes.push(sorted(d));
    }
    TrialDraw {
        objects,
        object_volumes,
        boxes,
        box_volumes,
    }
}

/// Same predicate as [`set_fits`] on pre-sorted draws. `contents` must be in
/// canonical (name) order so the volume sum is permutation independent.
fn trial_accepts(draw: &TrialDraw, box_index: usize, contents: &[usize], eta: f64) -> bool {
    let b = &draw.boxes[box_index];
    let mut total = 0.0;
    for &o in contents {
        if !sorted_le(&draw.objects[o], b) {
            return false;
        }
        total += draw.object_volumes[o];
    }
    total <= eta * draw.box_volumes[box_index]
}

/// Every distinct `(box, contents)` pair appearing in `hypotheses`.
pub fn contents_keys(hypotheses: &HypothesisSet) -> BTreeSet<ContentsKey> {
    let mut keys = BTreeSet::new();
    for p in hypotheses {
        for b in 0..hypotheses.k_boxes() {
            keys.insert((b, p.box_contents(b)));
        }
    }
    keys
}

/// Estimates the acceptance rate of every `(box, contents)` key used by
/// `hypotheses`, sharing draws across keys.
pub fn visual_likelihood_table(
    scene: &ParsedScene,
    hypotheses: &HypothesisSet,
    params: &FitParams,
) -> VisualLikelihoodTable {
    let keys: Vec<ContentsKey> = contents_keys(hypotheses).into_iter().collect();
    visual_rates_for_keys(scene, keys, params)
}

pub(crate) fn visual_rates_for_keys(
    scene: &ParsedScene,
    keys: Vec<ContentsKey>,
    params: &FitParams,
) -> VisualLikelihoodTable {
    let obj_streams: Vec<EntityStream> = scene
        .objects
        .iter()
        .map(|o| EntityStream::new(params.master_seed, EntityKind::Object, &o.name))
        .collect();
    let box_streams: Vec<EntityStream> = scene
        .boxes
        .iter()
        .map(|b| EntityStream::new(params.master_seed, EntityKind::Box, &b.id))
        .collect();

    let n = params.n_samples as u64;
    let draw = |t: u64| draw_trial(scene, &obj_streams, &box_streams, params, t);
    let draws: Vec<TrialDraw> = if params.parallel {
        (0..n).into_par_iter().map(draw).collect()
    } else {
        (0..n).map(draw).collect()
    };

    let canonical = scene.canonical_object_order();
    let mut rank = vec![0usize; canonical.len()];
    for (r, &o) in canonical.iter().enumerate() {
        rank[o] = r;
    }
    let eta = params.packing_efficiency;
    let rate = |key: &ContentsKey| {
        let mut ordered = key.1.clone();
        ordered.sort_by_key(|&o| rank[o]);
        let accepted = draws
            .iter()
            .filter(|d| trial_accepts(d, key.0, &ordered, eta))
            .count();
        accepted as f64 / params.n_samples as f64
    };
    let rates: Vec<f64> = if params.parallel {
        keys.par_iter().map(rate).collect()
    } else {
        keys.iter().map(rate).collect()
    };
    VisualLikelihoodTable {
        rates: keys.into_iter().zip(rates).collect(),
    }
}
