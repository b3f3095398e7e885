mod common;

use common::{permute, random_scene};
use witb::geometry::{contents_keys, set_fits, visual_likelihood_table, FitParams};
use witb::hypothesis::enumerate_hypotheses;
use witb::oracle::generate_scene;
use witb::scene::{AudioPosterior, BoxSpec, ObjectSpec, ParsedScene, UncertainDims, Weight};

fn params(seed: u64, n_samples: usize) -> FitParams {
    FitParams {
        n_samples,
        master_seed: seed,
        ..Default::default()
    }
}

fn one_object_one_box(item: UncertainDims, bx: UncertainDims, rigidity: f64) -> ParsedScene {
    ParsedScene {
        scenario_id: "single".into(),
        objects: vec![ObjectSpec {
            name: "item".into(),
            dims: item,
            weight_g: Weight {
                mean: 1.0,
                std: 0.0,
            },
            material: "wood".into(),
            rigidity,
        }],
        boxes: vec![BoxSpec {
            id: "box".into(),
            label: "box".into(),
            dims: bx,
        }],
        audio: AudioPosterior {
            labels: vec!["item".into()],
            rows: [("box".to_string(), vec![1.0])].into_iter().collect(),
        },
    }
}

fn single_rate(scene: &ParsedScene, p: &FitParams) -> f64 {
    let hyps = enumerate_hypotheses(1, 1, false).unwrap();
    visual_likelihood_table(scene, &hyps, p)
        .get(0, &[0])
        .unwrap()
}

#[test]
fn deterministic_fits_are_exact() {
    let tiny = one_object_one_box(
        UncertainDims::exact([1.0; 3]),
        UncertainDims::exact([100.0; 3]),
        1.0,
    );
    assert_eq!(single_rate(&tiny, &params(3, 200)), 1.0);
    let long = one_object_one_box(
        UncertainDims::exact([150.0, 1.0, 1.0]),
        UncertainDims::exact([100.0; 3]),
        1.0,
    );
    assert_eq!(single_rate(&long, &params(3, 200)), 0.0);
}

/// Item and box share the same mean and spread on the binding axis, so the
/// item fits with probability 1/2 by symmetry of two iid normals.
#[test]
fn symmetric_binding_axis_is_half() {
    let item = UncertainDims {
        mean: [30.0, 1.0, 1.0],
        std: [2.0, 0.0, 0.0],
    };
    let bx = UncertainDims {
        mean: [30.0, 10.0, 10.0],
        std: [2.0, 0.0, 0.0],
    };
    let scene = one_object_one_box(item, bx, 1.0);
    for seed in 0..5 {
        let r = single_rate(&scene, &params(seed, 1000));
        assert!((r - 0.5).abs() <= 0.05, "seed {seed}: {r}");
    }
}

/// Fixed box of length 30 and an item length ~ N(28, 2): the fit probability
/// is Phi(1) = 0.841344746... (erf tabulated value).
#[test]
fn estimate_converges_to_normal_cdf() {
    let item = UncertainDims {
        mean: [28.0, 1.0, 1.0],
        std: [2.0, 0.0, 0.0],
    };
    let scene = one_object_one_box(item, UncertainDims::exact([30.0, 10.0, 10.0]), 1.0);
    let expected = 0.841_344_746_068_543;
    let r = single_rate(&scene, &params(11, 100_000));
    assert!((r - expected).abs() < 0.01, "{r}");
}

#[test]
fn tables_are_bit_identical_across_runs_and_schedules() {
    for seed in 0..10 {
        let scene = random_scene(seed, 4, 2, 0.1);
        let hyps = enumerate_hypotheses(4, 2, false).unwrap();
        let par = visual_likelihood_table(&scene, &hyps, &params(seed, 300));
        let again = visual_likelihood_table(&scene, &hyps, &params(seed, 300));
        let serial = visual_likelihood_table(
            &scene,
            &hyps,
            &FitParams {
                parallel: false,
                ..params(seed, 300)
            },
        );
        assert_eq!(par, again);
        assert_eq!(par, serial);
        assert_eq!(par.len(), contents_keys(&hyps).len());
        assert!(par.iter().all(|(_, r)| (0.0..=1.0).contains(r)));
    }
}

#[test]
fn rates_do_not_depend_on_document_order() {
    for seed in 0..20 {
        let scene = random_scene(seed, 4, 3, 0.15);
        let hyps = enumerate_hypotheses(4, 3, true).unwrap();
        let p = params(seed, 200);
        let base = visual_likelihood_table(&scene, &hyps, &p);
        let perm = permute(&scene, seed + 100);
        let table = visual_likelihood_table(&perm.scene, &hyps, &p);
        let mut new_of_old_obj = [0; 4];
        for (new, &old) in perm.object_perm.iter().enumerate() {
            new_of_old_obj[old] = new;
        }
        let mut new_of_old_box = [0; 3];
        for (new, &old) in perm.box_perm.iter().enumerate() {
            new_of_old_box[old] = new;
        }
        for ((b, contents), rate) in base.iter() {
            let mut mapped: Vec<usize> = contents.iter().map(|&o| new_of_old_obj[o]).collect();
            mapped.sort();
            assert_eq!(table.get(new_of_old_box[*b], &mapped), Some(*rate));
        }
    }
}

#[test]
fn enlarging_a_box_never_lowers_its_rates() {
    for seed in 0..30 {
        let scene = random_scene(seed, 4, 2, 0.1);
        let hyps = enumerate_hypotheses(4, 2, true).unwrap();
        let p = params(seed, 200);
        let base = visual_likelihood_table(&scene, &hyps, &p);
        for b in 0..2 {
            let mut bigger = scene.clone();
            let grow = 1.0 + (seed as f64 + 1.0) * 0.01;
            bigger.boxes[b].dims.mean = bigger.boxes[b].dims.mean.map(|d| d * grow);
            let table = visual_likelihood_table(&bigger, &hyps, &p);
            for ((bx, contents), rate) in base.iter() {
                let after = table.get(*bx, contents).unwrap();
                if *bx == b {
                    assert!(after >= *rate, "seed {seed} box {b}: {rate} -> {after}");
                } else {
                    assert_eq!(after, *rate);
                }
            }
        }
    }
}

#[test]
fn softer_objects_never_fit_worse() {
    for seed in 0..30 {
        let scene = random_scene(seed, 3, 2, 0.1);
        let hyps = enumerate_hypotheses(3, 2, true).unwrap();
        let p = params(seed, 200);
        let base = visual_likelihood_table(&scene, &hyps, &p);
        let o = (seed % 3) as usize;
        let mut softer = scene.clone();
        softer.objects[o].rigidity *= 0.7;
        let table = visual_likelihood_table(&softer, &hyps, &p);
        for ((bx, contents), rate) in base.iter() {
            let after = table.get(*bx, contents).unwrap();
            if contents.contains(&o) {
                assert!(after >= *rate);
            } else {
                assert_eq!(after, *rate);
            }
        }
    }
}

#[test]
fn zero_variance_rates_match_analytic_fit() {
    for seed in 0..30 {
        let scene = generate_scene(seed, 4, 2, 0.5).scene;
        let hyps = enumerate_hypotheses(4, 2, true).unwrap();
        let p = params(seed, 5);
        let table = visual_likelihood_table(&scene, &hyps, &p);
        let order = scene.canonical_object_order();
        for ((b, contents), rate) in table.iter() {
            let items: Vec<[f64; 3]> = order
                .iter()
                .filter(|o| contents.contains(o))
                .map(|&o| {
                    scene.objects[o]
                        .dims
                        .mean
                        .map(|d| d.max(p.dim_floor) * scene.objects[o].rigidity)
                })
                .collect();
            let expected = if set_fits(&items, scene.boxes[*b].dims.mean, p.packing_efficiency) {
                1.0
            } else {
                0.0
            };
            assert_eq!(*rate, expected);
        }
    }
}
