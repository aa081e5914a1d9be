mod common;

use std::collections::BTreeMap;

use common::*;
use factorforge::sampler::{generate_for_category, sample_uniform_box, uniform_in};
use factorforge::semantics::{
    assign_label, compute_ranges, partition_by_label, AgeBand, CategoryRange, Gender,
};
use factorforge::{
    compute_full_basis, project, Category, CategoryRangeTable, Error, FactorCoordinates,
    LabelerSpec, Seed, SemanticLabel, Vector,
};
use proptest::prelude::*;

fn random_label(rng: &mut TestRng) -> SemanticLabel {
    SemanticLabel::from(Category::new(rng.below(6)).unwrap())
}

fn random_coords(rng: &mut TestRng, n: usize, k: usize) -> Vec<FactorCoordinates> {
    (0..n)
        .map(|_| FactorCoordinates::from_vec(rng.vec_normal(k)).unwrap())
        .collect()
}

fn random_box(rng: &mut TestRng, k: usize) -> CategoryRangeTable {
    let mut min = Vec::with_capacity(k);
    let mut max = Vec::with_capacity(k);
    for _ in 0..k {
        let lo = rng.uniform(-5.0, 5.0);
        min.push(lo);
        max.push(lo + rng.uniform(0.01, 4.0));
    }
    let mut ranges: [Option<CategoryRange>; 6] = Default::default();
    ranges[2] = Some(CategoryRange::new(1, min, max).unwrap());
    CategoryRangeTable::new(k, ranges).unwrap()
}

#[test]
fn labeler_bands_follow_the_age_score() {
    // image dimension 2: age reads coordinate 0, gender coordinate 1
    let spec = LabelerSpec::with_default_thresholds(
        Vector::new(vec![0.0, 1.0]).unwrap(),
        0.0,
        Vector::new(vec![1.0, 0.0]).unwrap(),
        0.0,
    )
    .unwrap();
    let cases = [
        (29.999, -1.0, Gender::Female, AgeBand::Young),
        (30.0, -1.0, Gender::Female, AgeBand::MiddleAged),
        (60.0, 1.0, Gender::Male, AgeBand::MiddleAged),
        (60.001, 1.0, Gender::Male, AgeBand::Old),
        (45.0, 0.0, Gender::Female, AgeBand::MiddleAged),
    ];
    for (age, g, gender, band) in cases {
        let (label, score) = assign_label(&spec, &[age, g]).unwrap();
        assert_eq!(score, age);
        assert_eq!(label.gender, gender);
        assert_eq!(label.age_band, band);
    }
    assert!(matches!(
        assign_label(&spec, &[1.0]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn partition_matches_counting_oracle() {
    let mut rng = TestRng::new(3);
    let coords = random_coords(&mut rng, 1000, 4);
    let labels: Vec<SemanticLabel> = (0..1000).map(|_| random_label(&mut rng)).collect();
    let parts = partition_by_label(&coords, &labels).unwrap();
    let mut counts = [0usize; 6];
    for l in &labels {
        counts[l.category().index()] += 1;
    }
    for c in Category::all() {
        let expected: Vec<&FactorCoordinates> = coords
            .iter()
            .zip(&labels)
            .filter(|(_, l)| l.category() == c)
            .map(|(x, _)| x)
            .collect();
        assert_eq!(expected.len(), counts[c.index()]);
        let got: Vec<&FactorCoordinates> = parts.get(&c).map_or(vec![], |v| v.iter().collect());
        assert_eq!(got, expected);
    }
    assert!(matches!(
        partition_by_label(&coords, &labels[..10]),
        Err(Error::InvalidArgument(_))
    ));
}

/// `(count, min, max)` per category, `None` when empty.
type BruteRange = Option<(usize, Vec<f64>, Vec<f64>)>;

fn brute_force_table(
    coords: &[FactorCoordinates],
    labels: &[SemanticLabel],
    k: usize,
) -> Vec<BruteRange> {
    let mut out = Vec::new();
    for c in Category::all() {
        let mut count = 0;
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for i in 0..coords.len() {
            if labels[i].category() != c {
                continue;
            }
            count += 1;
            for j in 0..k {
                let x = coords[i].as_slice()[j];
                if x < min[j] {
                    min[j] = x;
                }
                if x > max[j] {
                    max[j] = x;
                }
            }
        }
        out.push((count > 0).then_some((count, min, max)));
    }
    out
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn range_table_is_bitwise_equal_to_double_loop() {
    let mut rng = TestRng::new(10_000);
    let k = 8;
    let coords = random_coords(&mut rng, 10_000, k);
    let labels: Vec<SemanticLabel> = (0..10_000).map(|_| random_label(&mut rng)).collect();
    let table = compute_ranges(&partition_by_label(&coords, &labels).unwrap()).unwrap();
    let oracle = brute_force_table(&coords, &labels, k);
    for c in Category::all() {
        let (count, min, max) = oracle[c.index()].clone().unwrap();
        let r = table.get(c).unwrap();
        assert_eq!(r.count(), count);
        assert_eq!(bits(r.min()), bits(&min));
        assert_eq!(bits(r.max()), bits(&max));
    }
}

#[test]
fn missing_categories_are_absent_and_refused() {
    let mut rng = TestRng::new(4);
    let coords = random_coords(&mut rng, 20, 3);
    let labels = vec![SemanticLabel::from(Category::new(4).unwrap()); 20];
    let table = compute_ranges(&partition_by_label(&coords, &labels).unwrap()).unwrap();
    assert_eq!(table.present().count(), 1);
    let empty = Category::new(0).unwrap();
    assert!(table.get(empty).is_none());
    assert!(matches!(
        sample_uniform_box(&table, empty, 5, Seed(1)),
        Err(Error::EmptyCategory(_))
    ));
    assert!(matches!(
        compute_ranges(&BTreeMap::new()),
        Err(Error::EmptyData(_))
    ));
}

#[test]
fn range_table_file_round_trip() {
    let mut rng = TestRng::new(6);
    let coords = random_coords(&mut rng, 300, 5);
    let labels: Vec<SemanticLabel> = (0..300).map(|_| random_label(&mut rng)).collect();
    let table = compute_ranges(&partition_by_label(&coords, &labels).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ranges.json");
    table.save(&path).unwrap();
    let loaded = CategoryRangeTable::load(&path).unwrap();
    assert_eq!(loaded, table);
    for c in Category::all() {
        let (a, b) = (table.get(c).unwrap(), loaded.get(c).unwrap());
        assert_eq!(bits(a.min()), bits(b.min()));
        assert_eq!(bits(a.max()), bits(b.max()));
    }
    assert!(matches!(
        CategoryRangeTable::from_json(b"{}"),
        Err(Error::Format(_))
    ));
}

#[test]
fn box_samples_are_contained_and_uniform() {
    let mut rng = TestRng::new(20);
    let table = random_box(&mut rng, 3);
    let c = Category::new(2).unwrap();
    let n = 100_000;
    let samples = sample_uniform_box(&table, c, n, Seed(42)).unwrap();
    let range = table.get(c).unwrap();
    assert!(samples.iter().all(|s| range.contains(s.as_slice())));
    for j in 0..3 {
        let mut column: Vec<f64> = samples.iter().map(|s| s.as_slice()[j]).collect();
        let ks = ks_uniform(&mut column, range.min()[j], range.max()[j]);
        assert!(ks < 0.01, "channel {j}: KS {ks}");
    }
}

#[test]
fn degenerate_channels_repeat_their_single_value() {
    let mut ranges: [Option<CategoryRange>; 6] = Default::default();
    ranges[0] = Some(CategoryRange::new(1, vec![1.5, -2.0], vec![1.5, 3.0]).unwrap());
    let table = CategoryRangeTable::new(2, ranges).unwrap();
    let samples = sample_uniform_box(&table, Category::new(0).unwrap(), 500, Seed(9)).unwrap();
    assert!(samples.iter().all(|s| s.as_slice()[0] == 1.5));
    assert_eq!(uniform_in(-1.0, 1.0, 0.0), -1.0);
    assert!(uniform_in(-f64::MAX, f64::MAX, 0.999).is_finite());
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let table = random_box(&mut TestRng::new(1), 6);
    let c = Category::new(2).unwrap();
    let a = sample_uniform_box(&table, c, 1000, Seed(5)).unwrap();
    let b = sample_uniform_box(&table, c, 1000, Seed(5)).unwrap();
    let other = sample_uniform_box(&table, c, 1000, Seed(6)).unwrap();
    assert_eq!(a, b);
    let same = a.iter().zip(&other).filter(|(x, y)| x == y).count();
    assert_eq!(same, 0);
    // a prefix request yields a prefix of the longer request
    let prefix = sample_uniform_box(&table, c, 10, Seed(5)).unwrap();
    assert_eq!(&a[..10], prefix.as_slice());
}

#[test]
fn sampling_is_independent_of_thread_count() {
    let table = random_box(&mut TestRng::new(2), 5);
    let c = Category::new(2).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_uniform_box(&table, c, 5000, Seed(77)).unwrap())
    };
    let one = run(1);
    for threads in [2, 4, 8] {
        let many = run(threads);
        for (x, y) in one.iter().zip(&many) {
            assert_eq!(bits(x.as_slice()), bits(y.as_slice()));
        }
    }
}

#[test]
fn generated_latents_project_back_into_the_box() {
    let mut rng = TestRng::new(12);
    let basis = compute_full_basis(&rng.matrix_uniform(6, 6, -1.0, 1.0)).unwrap();
    let table = random_box(&mut rng, 6);
    let c = Category::new(2).unwrap();
    let latents = generate_for_category(&table, &basis, c, 200, Seed(3)).unwrap();
    let range = table.get(c).unwrap();
    for w in latents.iter() {
        let alpha = project(&basis, w).unwrap();
        for (j, x) in alpha.as_slice().iter().enumerate() {
            assert!(*x >= range.min()[j] - 1e-9 && *x <= range.max()[j] + 1e-9);
        }
    }
    let wrong_k = random_box(&mut rng, 4);
    assert!(matches!(
        generate_for_category(&wrong_k, &basis, c, 2, Seed(3)),
        Err(Error::InvalidArgument(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn range_table_ignores_input_order(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = TestRng::new(seed);
        let coords = random_coords(&mut rng, n, 3);
        let labels: Vec<SemanticLabel> = (0..n).map(|_| random_label(&mut rng)).collect();
        let table = compute_ranges(&partition_by_label(&coords, &labels).unwrap()).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let c2: Vec<_> = order.iter().map(|&i| coords[i].clone()).collect();
        let l2: Vec<_> = order.iter().map(|&i| labels[i]).collect();
        let shuffled = compute_ranges(&partition_by_label(&c2, &l2).unwrap()).unwrap();
        prop_assert_eq!(table.to_json().unwrap(), shuffled.to_json().unwrap());
    }

    #[test]
    fn adding_points_never_shrinks_a_box(seed in any::<u64>(), n in 1usize..100, extra in 1usize..50) {
        let mut rng = TestRng::new(seed);
        let coords = random_coords(&mut rng, n + extra, 2);
        let labels: Vec<SemanticLabel> = (0..n + extra).map(|_| random_label(&mut rng)).collect();
        let small = compute_ranges(&partition_by_label(&coords[..n], &labels[..n]).unwrap()).unwrap();
        let big = compute_ranges(&partition_by_label(&coords, &labels).unwrap()).unwrap();
        for (c, r) in small.present() {
            let b = big.get(c).unwrap();
            prop_assert!(b.count() >= r.count());
            for j in 0..2 {
                prop_assert!(b.min()[j] <= r.min()[j] && b.max()[j] >= r.max()[j]);
            }
        }
    }

    #[test]
    fn every_sample_lies_in_its_box(seed in any::<u64>(), k in 1usize..6, n in 1usize..300) {
        let table = random_box(&mut TestRng::new(seed), k);
        let c = Category::new(2).unwrap();
        let range = table.get(c).unwrap();
        for s in sample_uniform_box(&table, c, n, Seed(seed)).unwrap() {
            prop_assert!(range.contains(s.as_slice()));
        }
    }
}
