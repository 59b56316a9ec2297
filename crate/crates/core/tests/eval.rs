use avae_core::datagen::{canonical_glyph, Grid, Split};
use avae_core::eval::{
    confusion_matrix, corner_interpolation, embed_2d, embedding_csv, embedding_svg, knn_hard, knn_soft,
    latent_traversal, pca, pearson, pose_sweep, proximity_matrix, tsne, two_sigma_assign, Classifier, EmbedMethod,
    EvalError, LatentEntry, LatentMap, TsneConfig,
};
use avae_core::model::{AffinityVae, LatentCode, ModelConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn roster(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("c{i}")).collect()
}

fn entry(mu: Vec<f64>, class_id: usize, split: Split) -> LatentEntry {
    LatentEntry { mu, pose: vec![], class_id, split }
}

fn random_map(seed: u64, n: usize, m: usize, d: usize) -> LatentMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..n)
        .map(|_| entry((0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0..m), Split::Train))
        .collect();
    LatentMap::new(roster(m), entries, "random").unwrap()
}

/// Sort every training point by distance, vote among the first k, break ties
/// by summed distance and then by class index.
fn knn_oracle(map: &LatentMap, q: &[f64], k: usize) -> usize {
    let mut all: Vec<(f64, usize)> = map
        .entries
        .iter()
        .map(|e| (e.mu.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), e.class_id))
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut count = vec![0; map.roster.len()];
    let mut dist = vec![0.0; map.roster.len()];
    for &(d, c) in &all[..k] {
        count[c] += 1;
        dist[c] += d;
    }
    let mut best = None;
    for c in 0..map.roster.len() {
        if count[c] == 0 {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) if count[c] > count[b] || (count[c] == count[b] && dist[c] < dist[b]) => Some(c),
            keep => keep,
        };
    }
    best.unwrap()
}

#[test]
fn knn_hard_matches_exhaustive_oracle_on_fixed_instance() {
    let map = random_map(1, 50, 4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let q = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        assert_eq!(knn_hard(&map, &q, 5).unwrap(), knn_oracle(&map, &q, 5));
    }
}

#[test]
fn query_on_majority_point() {
    let entries = vec![
        entry(vec![0.0, 0.0], 0, Split::Train),
        entry(vec![0.1, 0.0], 0, Split::Train),
        entry(vec![0.0, 0.1], 0, Split::Train),
        entry(vec![0.2, 0.2], 1, Split::Train),
        entry(vec![0.3, 0.2], 1, Split::Train),
        entry(vec![3.0, 3.0], 1, Split::Train),
    ];
    let map = LatentMap::new(roster(2), entries, "t").unwrap();
    assert_eq!(knn_hard(&map, &[0.0, 0.0], 5).unwrap(), 0);
    let soft = knn_soft(&map, &[0.0, 0.0], 3).unwrap();
    assert_eq!(soft.probabilities, vec![1.0, 0.0]);
}

#[test]
fn two_sigma_box_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let mut entries = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..400 {
            entries.push(entry(vec![centre[0] + unit.sample(&mut rng), centre[1] + unit.sample(&mut rng)], c, Split::Train));
        }
    }
    let map = LatentMap::new(roster(3), entries.clone(), "t").unwrap();
    let boxes = avae_core::eval::ClassBoxes::fit(&map).unwrap();
    let (_, mean, std) = &boxes.boxes[0];
    assert!(two_sigma_assign(&map, mean).unwrap().contains(&0));
    let outside = vec![mean[0] + 3.0 * std[0], mean[1]];
    assert!(!two_sigma_assign(&map, &outside).unwrap().contains(&0));

    let trials = 4000;
    let mut accepted = 0;
    for _ in 0..trials {
        let q = vec![10.0 + unit.sample(&mut rng), unit.sample(&mut rng)];
        if boxes.assign(&q).contains(&1) {
            accepted += 1;
        }
    }
    // independent per-axis ±2σ acceptance: 0.9545^2
    let rate = accepted as f64 / trials as f64;
    let expected = 0.954_499_736_103_642f64.powi(2);
    assert!((rate - expected).abs() <= 0.03, "acceptance {rate} vs {expected}");
}

#[test]
fn single_entry_class_is_excluded_from_boxes() {
    let entries = vec![
        entry(vec![0.0], 0, Split::Train),
        entry(vec![1.0], 0, Split::Train),
        entry(vec![5.0], 1, Split::Train),
    ];
    let map = LatentMap::new(roster(2), entries, "t").unwrap();
    let boxes = avae_core::eval::ClassBoxes::fit(&map).unwrap();
    assert_eq!(boxes.excluded, vec![1]);
}

#[test]
fn confusion_matrix_perfect_and_random() {
    let mut entries = Vec::new();
    for c in 0..4 {
        for i in 0..10 {
            entries.push(entry(vec![c as f64 * 10.0 + (i % 3) as f64 * 0.01, i as f64 * 0.01], c, Split::Train));
            entries.push(entry(vec![c as f64 * 10.0 + 0.01, i as f64 * 0.01 + 0.005], c, Split::Test));
        }
    }
    let map = LatentMap::new(roster(4), entries, "t").unwrap();
    let queries: Vec<&LatentEntry> = map.split(Split::Test).collect();
    for classifier in [Classifier::KnnHard { k: 5 }, Classifier::KnnSoft { k: 5 }, Classifier::TwoSigma] {
        let cm = confusion_matrix(&map, &queries, classifier).unwrap();
        assert_eq!(cm.accuracy, 1.0, "{}", classifier.name());
        for (i, row) in cm.counts.iter().enumerate() {
            assert_eq!(row[i], 10);
        }
    }

    // labels independent of position: chance accuracy
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut entries = Vec::new();
    for i in 0..800 {
        let split = if i % 2 == 0 { Split::Train } else { Split::Test };
        entries.push(entry(vec![rng.random::<f64>(), rng.random::<f64>()], (i / 2) % 4, split));
    }
    let map = LatentMap::new(roster(4), entries, "t").unwrap();
    let queries: Vec<&LatentEntry> = map.split(Split::Test).collect();
    let cm = confusion_matrix(&map, &queries, Classifier::KnnHard { k: 5 }).unwrap();
    assert!((cm.accuracy - 0.25).abs() <= 0.1, "accuracy {}", cm.accuracy);
}

#[test]
fn unseen_rows_have_no_matching_column() {
    let entries = vec![
        entry(vec![0.0], 0, Split::Train),
        entry(vec![0.1], 0, Split::Train),
        entry(vec![5.0], 1, Split::Train),
        entry(vec![5.1], 1, Split::Train),
        entry(vec![4.9], 2, Split::Unseen),
    ];
    let map = LatentMap::new(roster(3), entries, "t").unwrap();
    let queries: Vec<&LatentEntry> = map.split(Split::Unseen).collect();
    let cm = confusion_matrix(&map, &queries, Classifier::KnnHard { k: 3 }).unwrap();
    assert_eq!(cm.columns, vec!["c0", "c1"]);
    assert_eq!(cm.row_argmax("c2"), Some("c1"));
}

#[test]
fn proximity_examples_and_permutation_invariance() {
    let entries = vec![
        entry(vec![1.0, 1.0], 0, Split::Train),
        entry(vec![1.0, 1.0], 1, Split::Train),
        entry(vec![4.0, 5.0], 2, Split::Train),
    ];
    let p = proximity_matrix(&LatentMap::new(roster(3), entries, "t").unwrap()).unwrap();
    assert_eq!(p.values[0][1], 0.0);
    assert_eq!(p.values[0][2], 100.0);

    let map = random_map(5, 60, 5, 3);
    let mut shuffled = map.clone();
    shuffled.entries.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    assert_eq!(proximity_matrix(&map).unwrap(), proximity_matrix(&shuffled).unwrap());
    let queries: Vec<&LatentEntry> = map.entries.iter().step_by(3).collect();
    let mut q2 = queries.clone();
    q2.reverse();
    assert_eq!(
        confusion_matrix(&map, &queries, Classifier::TwoSigma).unwrap(),
        confusion_matrix(&shuffled, &q2, Classifier::TwoSigma).unwrap()
    );
}

#[test]
fn pca_preserves_planar_distances_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // points on a tilted plane in 4D
    let (u, v) = ([0.5, 0.5, 0.5, 0.5], [0.5, -0.5, 0.5, -0.5]);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
            (0..4).map(|i| 2.0 + a * u[i] + b * v[i]).collect()
        })
        .collect();
    let e = pca(&rows).unwrap();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let orig = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let emb = ((e[i][0] - e[j][0]).powi(2) + (e[i][1] - e[j][1]).powi(2)).sqrt();
            assert!((orig - emb).abs() <= 1e-9);
        }
    }
    let again = pca(&rows).unwrap();
    assert!(e.iter().zip(&again).all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits()));
    let var = |k: usize| e.iter().map(|p| p[k] * p[k]).sum::<f64>();
    assert!(var(0) >= var(1));
}

#[test]
fn tsne_separates_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for b in 0..3 {
        for _ in 0..50 {
            rows.push((0..5).map(|k| if k == b { 50.0 } else { 0.0 } + unit.sample(&mut rng)).collect::<Vec<f64>>());
            labels.push(b);
        }
    }
    let y = tsne(&rows, &TsneConfig { seed: 1, ..TsneConfig::default() }).unwrap();
    let mut good = 0;
    for i in 0..y.len() {
        let mut d: Vec<(f64, usize)> = (0..y.len())
            .filter(|&j| j != i)
            .map(|j| ((y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2), labels[j]))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if d[..5].iter().all(|&(_, l)| l == labels[i]) {
            good += 1;
        }
    }
    assert!(good as f64 / y.len() as f64 >= 0.95, "{good} of {}", y.len());
}

#[test]
fn tsne_size_cap() {
    let rows = vec![vec![0.0]; 2001];
    assert!(matches!(tsne(&rows, &TsneConfig::default()), Err(EvalError::Size(_))));
}

fn glyph_model() -> AffinityVae {
    AffinityVae::new(ModelConfig::new(&[32, 32], 4, 1).unwrap().with_seed(2)).unwrap()
}

fn code_of(model: &AffinityVae, g: &Grid) -> LatentCode {
    model.encode(&[g]).unwrap().remove(0)
}

#[test]
fn traversal_centre_and_bounds() {
    let model = glyph_model();
    let code = code_of(&model, &canonical_glyph('k', 32).unwrap());
    let recon = model.decode(&code.mu, &code.pose).unwrap();
    let one = latent_traversal(&model, &code, 2, 3.0, 1).unwrap();
    assert_eq!(one[0], recon);
    let seven = latent_traversal(&model, &code, 2, 3.0, 7).unwrap();
    assert_eq!(seven[3], recon);
    assert!(seven.iter().all(|g| g.values().iter().all(|v| (0.0..=1.0).contains(v))));
    // images drift apart with step distance
    let near: f64 = (0..6).map(|i| seven[i].mse(&seven[i + 1])).sum::<f64>() / 6.0;
    let far: f64 = (0..3).map(|i| seven[i].mse(&seven[i + 4])).sum::<f64>() / 3.0;
    assert!(near <= far);
    assert!(matches!(latent_traversal(&model, &code, 4, 3.0, 5), Err(EvalError::Index(_))));
}

#[test]
fn corner_interpolation_corners_and_centre() {
    let model = glyph_model();
    let codes: Vec<LatentCode> = ['a', 'b', 'x', 'z'].iter().map(|&c| code_of(&model, &canonical_glyph(c, 32).unwrap())).collect();
    let corners = [&codes[0], &codes[1], &codes[2], &codes[3]];
    let two = corner_interpolation(&model, corners, 2).unwrap();
    let three = corner_interpolation(&model, corners, 3).unwrap();
    for (k, (r, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
        let direct = model.decode(&codes[k].mu, &codes[k].pose).unwrap();
        assert_eq!(two[*r][*c], direct);
        assert_eq!(three[r * 2][c * 2], direct);
    }
    let mean_mu: Vec<f64> = (0..4).map(|i| ((codes[0].mu[i] + codes[1].mu[i]) + (codes[2].mu[i] + codes[3].mu[i])) / 4.0).collect();
    let mean_pose = vec![((codes[0].pose[0] + codes[1].pose[0]) + (codes[2].pose[0] + codes[3].pose[0])) / 4.0];
    let centre = model.decode(&mean_mu, &mean_pose).unwrap();
    assert!(three[1][1].mse(&centre) < 1e-12);
    assert!(matches!(corner_interpolation(&model, corners, 1), Err(EvalError::Config(_))));
}

#[test]
fn pose_sweep_constant_values() {
    let model = glyph_model();
    let reference = canonical_glyph('z', 32).unwrap();
    let code = code_of(&model, &reference);
    let sweep = pose_sweep(&model, &code, &[0.3, 0.3, 0.3], &reference).unwrap();
    assert_eq!(sweep.images[0], sweep.images[1]);
    assert_eq!(sweep.images[1], sweep.images[2]);
    assert_eq!(sweep.matches.len(), 3);
}

#[test]
fn pearson_examples() {
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
    assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), 0.0);
}

#[test]
fn embedding_exports() {
    let map = random_map(4, 12, 3, 3);
    let rows = embed_2d(&map, EmbedMethod::Pca, 0).unwrap();
    let csv = embedding_csv(&rows);
    assert!(csv.starts_with("x,y,class,split\n"));
    assert_eq!(csv.lines().count(), 13);
    let svg = embedding_svg(&rows, "pca");
    let mut classes: Vec<&str> = rows.iter().map(|r| r.class.as_str()).collect();
    classes.sort();
    classes.dedup();
    assert_eq!(svg.matches("<circle").count(), rows.len() + classes.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn knn_hard_matches_oracle(seed in any::<u64>(), n in 6usize..60, m in 2usize..5, k in 1usize..6) {
        let map = random_map(seed, n, m, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert_eq!(knn_hard(&map, &q, k).unwrap(), knn_oracle(&map, &q, k));
    }

    #[test]
    fn knn_soft_is_a_distribution_consistent_with_hard(seed in any::<u64>(), n in 6usize..60, m in 2usize..5, k in 1usize..8) {
        let map = random_map(seed, n, m, 2);
        let q = vec![0.1, -0.2];
        let soft = knn_soft(&map, &q, k).unwrap();
        prop_assert!(soft.probabilities.iter().all(|&p| p >= 0.0));
        prop_assert!((soft.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut sorted = soft.probabilities.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] > sorted[1] {
            prop_assert_eq!(soft.argmax(), knn_hard(&map, &q, k).unwrap());
        }
    }
}
