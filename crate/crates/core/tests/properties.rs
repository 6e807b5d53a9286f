use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use merge_ted::diagram::{diagram_of, wasserstein1};
use merge_ted::mergetree::{extract_subtrees, stabilize};
use merge_ted::oracle::{brute_force_dc, brute_force_de};
use merge_ted::synth::{four_blob_field, random_labeled_tree, random_merge_tree};
use merge_ted::ted::{mapping_cost, ted, ted_labeled, validate_mapping, LabeledTree};
use merge_ted::{CostModel, MergeTree, Orientation, StabilizationConfig};

fn labeled(rng: &mut ChaCha8Rng, sizes: RangeInclusive<usize>, degree: usize) -> LabeledTree {
    let n = rng.gen_range(sizes);
    random_labeled_tree(rng, n, degree)
}

fn merge(
    rng: &mut ChaCha8Rng,
    sizes: RangeInclusive<usize>,
    degree: usize,
    o: Orientation,
) -> merge_ted::Result<MergeTree> {
    let n = rng.gen_range(sizes);
    random_merge_tree(rng, n, degree, o)
}

#[test]
fn looser_mappings_never_cost_more() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let a = labeled(&mut rng, 1..=5, 3);
        let b = labeled(&mut rng, 1..=5, 3);
        for model in [CostModel::Winf, CostModel::Overhang] {
            let de = brute_force_de(&a, &b, model).unwrap();
            let dc = brute_force_dc(&a, &b, model).unwrap();
            assert!(de.distance <= dc.distance + 1e-12);
            assert!(de.mappings_enumerated >= dc.mappings_enumerated);
        }
    }
}

#[test]
fn oracle_witness_is_a_valid_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let a = labeled(&mut rng, 0..=6, 3);
        let b = labeled(&mut rng, 0..=6, 3);
        let r = brute_force_dc(&a, &b, CostModel::Winf).unwrap();
        assert!(validate_mapping(&r.witness, &a, &b).is_empty());
        let cost = mapping_cost(&r.witness, &a, &b, CostModel::Winf).unwrap();
        assert!((cost - r.distance).abs() < 1e-12);
    }
}

#[test]
fn ted_mappings_are_valid_and_priced_consistently() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..150 {
        let model = if k % 2 == 0 {
            CostModel::Winf
        } else {
            CostModel::Overhang
        };
        let stab = StabilizationConfig::new([0.0, 0.1, 0.5][k % 3], k % 5 == 0, 0.3).unwrap();
        let a = merge(&mut rng, 1..=40, 4, Orientation::Join).unwrap();
        let b = merge(&mut rng, 1..=40, 4, Orientation::Join).unwrap();
        let r = ted(&a, &b, model, &stab).unwrap();
        let la = LabeledTree::from_merge_tree(&stabilize(&a, &stab).unwrap()).unwrap();
        let lb = LabeledTree::from_merge_tree(&stabilize(&b, &stab).unwrap()).unwrap();
        let violations = validate_mapping(&r.mapping, &la, &lb);
        assert!(violations.is_empty(), "{violations:?}");
        let cost = mapping_cost(&r.mapping, &la, &lb, model).unwrap();
        assert!((cost - (r.distance - r.stabilization_surcharge)).abs() < 1e-9);
    }
}

#[test]
fn arbitrary_labeled_trees_match_oracle_with_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..300 {
        let a = labeled(&mut rng, 0..=6, 4);
        let b = labeled(&mut rng, 0..=6, 4);
        for model in [CostModel::Winf, CostModel::Overhang] {
            let (d, m) = ted_labeled(&a, &b, model);
            assert!(validate_mapping(&m, &a, &b).is_empty());
            assert!((mapping_cost(&m, &a, &b, model).unwrap() - d).abs() < 1e-12);
            assert!((brute_force_dc(&a, &b, model).unwrap().distance - d).abs() < 1e-12);
        }
    }
}

#[test]
fn distance_is_shift_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..50 {
        let a = merge(&mut rng, 2..=30, 3, Orientation::Split).unwrap();
        let b = merge(&mut rng, 2..=30, 3, Orientation::Split).unwrap();
        let c = rng.gen_range(-5.0..5.0);
        let stab = StabilizationConfig::with_epsilon(0.05).unwrap();
        let d = ted(&a, &b, CostModel::Winf, &stab).unwrap().distance;
        let shifted = ted(&a.shifted(c), &b.shifted(c), CostModel::Winf, &stab)
            .unwrap()
            .distance;
        assert!((d - shifted).abs() < 1e-9);
    }
}

#[test]
fn full_stabilization_with_shared_root_equals_wasserstein() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let stab = StabilizationConfig::with_epsilon(1.0).unwrap();
    for _ in 0..50 {
        let a = merge(&mut rng, 1..=25, 5, Orientation::Join).unwrap();
        let b = merge(&mut rng, 1..=25, 5, Orientation::Join).unwrap();
        let s = stabilize(&a, &stab).unwrap();
        assert_eq!(s.saddle_count(), 0);
        let d = ted(&a, &b, CostModel::Winf, &stab).unwrap().distance;
        let w = wasserstein1(&diagram_of(&a).unwrap(), &diagram_of(&b).unwrap());
        if a.len() > 1 && b.len() > 1 {
            assert!((d - w).abs() < 1e-9, "{d} vs {w}");
        }
    }
}

#[test]
fn identical_blobs_give_identical_subtrees() {
    let grid = four_blob_field();
    let tree = MergeTree::from_grid(&grid, Orientation::Split).unwrap();
    let subs = extract_subtrees(&tree, 0.3, 0.5).unwrap();
    assert_eq!(subs.len(), 4);
    for i in 0..4 {
        for j in 0..4 {
            let d = ted(
                &subs[i],
                &subs[j],
                CostModel::Winf,
                &StabilizationConfig::default(),
            )
            .unwrap()
            .distance;
            assert!(d <= 1e-9, "subtrees {i} and {j} differ by {d}");
        }
    }
}
