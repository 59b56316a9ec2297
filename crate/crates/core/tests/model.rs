use avae_core::affinity::AffinityMatrix;
use avae_core::datagen::{build_dataset, DatasetConfig, Grid, Split};
use avae_core::model::{
    affinity_term, kl_term, loss_breakdown, train, AffinityVae, LatentCode, ModelConfig, ModelError, TrainConfig,
    TrainSample, LOG_VAR_MIN,
};
use avae_core::tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_grids(seed: u64, n: usize, dims: &[usize]) -> Vec<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Grid::from_fn(dims.len(), dims[0], |_| rng.random::<f32>()))
        .collect()
}

fn matrix(values: &[f64], m: usize) -> AffinityMatrix {
    AffinityMatrix::new("test", (0..m).map(|i| format!("c{i}")).collect(), values.to_vec()).unwrap()
}

fn tiny_config() -> ModelConfig {
    ModelConfig::with_widths(&[8, 8], 3, 1, [2, 3], 8).unwrap().with_loss_weights(1.5, 0.7).with_seed(3)
}

#[test]
fn encode_is_deterministic_with_expected_shapes() {
    let cfg = ModelConfig::new(&[16, 16, 16], 8, 3).unwrap();
    let model = AffinityVae::new(cfg).unwrap();
    let grids = random_grids(0, 5, &[16, 16, 16]);
    let refs: Vec<&Grid> = grids.iter().collect();
    let a = model.encode(&refs).unwrap();
    let b = model.encode(&refs).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    for c in &a {
        assert_eq!((c.mu.len(), c.log_var.len(), c.pose.len()), (8, 8, 3));
        assert!(c.mu.iter().all(|m| m.is_finite() && m.abs() < 10.0));
    }
    let wrong = Grid::zeros(&[8, 8, 8]);
    assert!(matches!(model.encode(&[&wrong]), Err(ModelError::Shape(_))));
}

#[test]
fn decode_is_deterministic_and_bounded() {
    let model = AffinityVae::new(ModelConfig::new(&[32, 32], 4, 1).unwrap()).unwrap();
    let a = model.decode(&[0.1, -0.3, 2.0, 0.0], &[0.5]).unwrap();
    let b = model.decode(&[0.1, -0.3, 2.0, 0.0], &[0.5]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dims(), &[32, 32]);
    assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(matches!(model.decode(&[0.0; 3], &[0.5]), Err(ModelError::Shape(_))));
}

#[test]
fn reparameterization_guard_and_determinism() {
    let code = LatentCode {
        mu: vec![0.3, -0.2],
        log_var: vec![f64::NEG_INFINITY.max(-1e9), LOG_VAR_MIN],
        pose: vec![],
        sampled_z: vec![0.3, -0.2],
        eps: vec![0.0; 2],
    };
    let z = code.with_eps(vec![1.0, -1.0]).sampled_z;
    assert!((z[0] - 0.3).abs() < 1e-4 && (z[1] + 0.2).abs() < 1e-4);

    let a = code.reparameterize(&mut ChaCha8Rng::seed_from_u64(9));
    let b = code.reparameterize(&mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a.eps, b.eps);
}

#[test]
fn reparameterization_monte_carlo_moments() {
    let sigma: f64 = 0.8;
    let code = LatentCode {
        mu: vec![0.5],
        log_var: vec![2.0 * sigma.ln()],
        pose: vec![],
        sampled_z: vec![0.5],
        eps: vec![0.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let samples: Vec<f64> = (0..n).map(|_| code.reparameterize(&mut rng).sampled_z[0]).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    assert!((std - 0.8).abs() < 0.01, "std {std}");
}

#[test]
fn kl_matches_monte_carlo() {
    let (mu, sigma): (f64, f64) = (0.5, 0.8);
    let code = LatentCode { mu: vec![mu], log_var: vec![2.0 * sigma.ln()], pose: vec![], sampled_z: vec![mu], eps: vec![0.0] };
    let q = Normal::new(mu, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let z: f64 = q.sample(&mut rng);
        // log q(z) − log p(z); the 2π terms cancel
        acc += -((z - mu) / sigma).powi(2) / 2.0 - sigma.ln() + z * z / 2.0;
    }
    let mc = acc / n as f64;
    let closed = kl_term(&[code]);
    assert!((closed - mc).abs() < 0.01, "closed {closed} vs mc {mc}");
}

/// Normalise-then-dot double loop, written independently of the library.
fn affinity_oracle(mus: &[Vec<f64>], ids: &[usize], a: &[f64], m: usize) -> f64 {
    let unit: Vec<Vec<f64>> = mus
        .iter()
        .map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    let mut s = 0.0;
    for i in 0..mus.len() {
        for j in 0..mus.len() {
            let cos: f64 = unit[i].iter().zip(&unit[j]).map(|(p, q)| p * q).sum();
            s += (a[ids[i] * m + ids[j]] - cos).abs();
        }
    }
    s / mus.len() as f64
}

#[test]
fn affinity_term_examples_and_oracle() {
    // cosines match A exactly
    let a = matrix(&[1.0, 0.0, 0.0, 1.0], 2);
    let mus = vec![vec![2.0, 0.0], vec![0.0, 3.0], vec![1.0, 0.0]];
    assert_eq!(affinity_term(&mus, &[0, 1, 0], &a).unwrap(), 0.0);
    assert_eq!(affinity_term(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[0, 1], &a).unwrap(), 1.0);

    let vals = [1.0, 0.3, -0.2, 0.3, 1.0, 0.6, -0.2, 0.6, 1.0];
    let a3 = matrix(&vals, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let n = rng.random_range(2..12);
        let mus: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let got = affinity_term(&mus, &ids, &a3).unwrap();
        assert!((got - affinity_oracle(&mus, &ids, &vals, 3)).abs() <= 1e-12);

        // the tape version agrees too
        let mut tape = Tape::new();
        let flat: Vec<f64> = mus.iter().flatten().copied().collect();
        let mu = tape.leaf(Tensor::new(vec![n, 5], flat).unwrap());
        let target: Vec<f64> = ids.iter().flat_map(|&i| ids.iter().map(move |&j| vals[i * 3 + j])).collect();
        let s = tape.cosine_l1(mu, Tensor::new(vec![n, n], target).unwrap(), n as f64).unwrap();
        assert!((tape.scalar(s) - got).abs() <= 1e-12);
    }
}

#[test]
fn global_optimum_and_beta_vae_reduction() {
    let a = matrix(&[1.0, 0.0, 0.0, 1.0], 2);
    let x = vec![vec![0.2, 0.7], vec![0.0, 1.0]];
    let zero = |mu: Vec<f64>| LatentCode { mu: mu.clone(), log_var: vec![0.0, 0.0], pose: vec![], sampled_z: mu, eps: vec![0.0; 2] };
    // y = x and μ = 0, log σ² = 0: reconstruction and KL vanish
    let codes = vec![zero(vec![0.0, 0.0]), zero(vec![0.0, 0.0])];
    let b = loss_breakdown(&x, &x, &codes, None, 2.0, 3.0).unwrap();
    assert_eq!(b.total, 0.0);
    // a zero μ has cosine 0 with everything, including itself, so the unit diagonal of A is missed
    let b = loss_breakdown(&x, &x, &codes, Some((&[0, 1], &a)), 2.0, 3.0).unwrap();
    assert_eq!(b.affinity, 1.0);

    let codes = vec![zero(vec![1.0, 0.0]), zero(vec![0.0, 1.0])];
    let b = loss_breakdown(&x, &x, &codes, Some((&[0, 1], &a)), 2.0, 3.0).unwrap();
    assert_eq!(b.affinity, 0.0);

    let y = vec![vec![0.1, 0.5], vec![0.3, 0.9]];
    let with = loss_breakdown(&x, &y, &codes, Some((&[0, 1], &a)), 2.0, 0.0).unwrap();
    let without = loss_breakdown(&x, &y, &codes, None, 2.0, 0.0).unwrap();
    assert_eq!(with.total, without.total);
    assert_eq!(without.total, without.reconstruction + 2.0 * without.kl);
}

#[test]
fn tape_loss_equals_plain_loss() {
    let model = AffinityVae::new(tiny_config()).unwrap();
    let grids = random_grids(4, 4, &[8, 8]);
    let refs: Vec<&Grid> = grids.iter().collect();
    let a = matrix(&[1.0, 0.4, 0.4, 1.0], 2);
    let ids = [0usize, 1, 1, 0];
    let eps: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();

    let mut tape = Tape::new();
    let fp = model.record(&mut tape, model.batch_tensor(&refs).unwrap(), Some(Tensor::new(vec![4, 3], eps.clone()).unwrap())).unwrap();
    let target: Vec<f64> = ids.iter().flat_map(|&i| ids.iter().map(move |&j| if i == j { 1.0 } else { 0.4 })).collect();
    let lv = model.record_loss(&mut tape, &fp, Some(Tensor::new(vec![4, 4], target).unwrap())).unwrap();
    let tape_loss = lv.breakdown(&tape, 1.5, 0.7);

    let codes: Vec<LatentCode> = model
        .encode(&refs)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.with_eps(eps[i * 3..i * 3 + 3].to_vec()))
        .collect();
    let decoded = model.decode_batch(&codes.iter().map(|c| (c.sampled_z.clone(), c.pose.clone())).collect::<Vec<_>>()).unwrap();
    let x: Vec<Vec<f64>> = grids.iter().map(|g| g.to_f64()).collect();
    let y_tape: Vec<Vec<f64>> = (0..4).map(|i| tape.value(fp.y).data()[i * 64..(i + 1) * 64].to_vec()).collect();
    for (yt, yd) in y_tape.iter().zip(&decoded) {
        for (p, q) in yt.iter().zip(yd.values()) {
            assert!((p - f64::from(*q)).abs() < 1e-6);
        }
    }
    let plain = loss_breakdown(&x, &y_tape, &codes, Some((&ids, &a)), 1.5, 0.7).unwrap();
    for (p, q) in [
        (plain.reconstruction, tape_loss.reconstruction),
        (plain.kl, tape_loss.kl),
        (plain.affinity, tape_loss.affinity),
        (plain.total, tape_loss.total),
    ] {
        assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0), "{p} vs {q}");
    }
    assert_eq!(tape_loss.total, tape_loss.reconstruction + 1.5 * tape_loss.kl + 0.7 * tape_loss.affinity);
}

/// Central-difference check of the full loss against every parameter.
#[test]
fn whole_model_gradient_check() {
    let model = AffinityVae::new(tiny_config()).unwrap();
    let grids = random_grids(8, 3, &[8, 8]);
    let refs: Vec<&Grid> = grids.iter().collect();
    let x = model.batch_tensor(&refs).unwrap();
    let eps = Tensor::new(vec![3, 3], vec![0.3, -1.1, 0.5, 0.9, 0.2, -0.4, -0.7, 1.3, 0.1]).unwrap();
    let target = Tensor::new(vec![3, 3], vec![1.0, 0.2, -0.5, 0.2, 1.0, 0.1, -0.5, 0.1, 1.0]).unwrap();

    let loss_of = |m: &AffinityVae| {
        let mut tape = Tape::new();
        let fp = m.record(&mut tape, x.clone(), Some(eps.clone())).unwrap();
        let lv = m.record_loss(&mut tape, &fp, Some(target.clone())).unwrap();
        tape.scalar(lv.total)
    };
    let mut tape = Tape::new();
    let fp = model.record(&mut tape, x.clone(), Some(eps.clone())).unwrap();
    let lv = model.record_loss(&mut tape, &fp, Some(target.clone())).unwrap();
    let grads = tape.backward(lv.total).unwrap();

    let step = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (k, p) in model.params.iter().enumerate() {
        let analytic = grads.get(fp.params[k]);
        for idx in 0..p.value.len() {
            let mut plus = model.clone();
            plus.params[k].value.data_mut()[idx] += step;
            let mut minus = model.clone();
            minus.params[k].value.data_mut()[idx] -= step;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * step);
            let a = analytic.data()[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
            worst = worst.max(err);
            checked += 1;
        }
    }
    assert!(checked >= 100);
    assert!(worst <= 1e-4, "worst relative error {worst} over {checked} weights");
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.avae");
    let model = AffinityVae::new(tiny_config()).unwrap();
    model.save(&path).unwrap();
    let back = AffinityVae::load(tiny_config(), &path).unwrap();
    assert_eq!(back, model);
    let other = ModelConfig::with_widths(&[8, 8], 3, 1, [2, 4], 8).unwrap();
    assert!(matches!(AffinityVae::load(other, &path), Err(ModelError::Checkpoint(_))));
}

fn tetromino_samples(aug: usize, size: usize) -> Vec<avae_core::datagen::LabelledSample> {
    build_dataset(&DatasetConfig::tetromino(&["I", "L", "T", "S", "O", "E"], aug, size, 0)).unwrap().0
}

fn view(samples: &[avae_core::datagen::LabelledSample], split: Split) -> Vec<TrainSample<'_>> {
    samples
        .iter()
        .filter(|s| s.split == split)
        .map(|s| TrainSample { grid: &s.grid, class: &s.class_name })
        .collect()
}

#[test]
fn one_epoch_smoke_writes_loadable_checkpoint() {
    let samples = tetromino_samples(5, 8);
    let train_set: Vec<TrainSample> = view(&samples, Split::Train).into_iter().take(20).collect();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 8, checkpoint: Some(dir.path().join("checkpoint.avae")), ..TrainConfig::default() };
    let mcfg = ModelConfig::new(&[8, 8, 8], 4, 3).unwrap();
    let mut model = AffinityVae::new(mcfg.clone()).unwrap();
    let report = train(&mut model, &train_set, &view(&samples, Split::Validation), None, &cfg).unwrap();
    assert_eq!(report.log.len(), 2);
    let loaded = AffinityVae::load(mcfg, cfg.checkpoint.as_ref().unwrap()).unwrap();
    assert_eq!(loaded, model);
}

#[test]
fn missing_affinity_class_is_reported() {
    let samples = tetromino_samples(5, 8);
    let a = AffinityMatrix::new("fsc", vec!["I".into(), "L".into()], vec![1.0, 0.5, 0.5, 1.0]).unwrap();
    let mut model = AffinityVae::new(ModelConfig::new(&[8, 8, 8], 4, 3).unwrap().with_loss_weights(1.0, 1.0)).unwrap();
    let err = train(&mut model, &view(&samples, Split::Train), &[], Some(&a), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, ModelError::Lookup(_)));
}

#[test]
fn training_improves_loss_and_reconstruction_deterministically() {
    let samples = tetromino_samples(20, 16);
    let train_set = view(&samples, Split::Train);
    let fsc = {
        let classes: Vec<(String, Grid)> = ["I", "L", "T", "S", "O", "E"]
            .iter()
            .map(|c| {
                let g = avae_core::datagen::canonical_exemplar(&avae_core::datagen::DatasetKind::Tetromino, c, 16).unwrap();
                (c.to_string(), g)
            })
            .collect();
        avae_core::affinity::build_affinity(&classes, avae_core::affinity::Metric::Fsc).unwrap()
    };
    let mcfg = ModelConfig::new(&[16, 16, 16], 8, 3).unwrap().with_loss_weights(1.0, 1.0);
    let cfg = TrainConfig { epochs: 10, batch_size: 16, learning_rate: 2e-3, checkpoint: None };

    let untrained = AffinityVae::new(mcfg.clone()).unwrap();
    let mut model = untrained.clone();
    let report = train(&mut model, &train_set, &[], Some(&fsc), &cfg).unwrap();
    let first = report.train_loss(1).unwrap().total;
    let last = report.train_loss(10).unwrap().total;
    assert!(last < first, "epoch 10 {last} vs epoch 1 {first}");

    let mse = |m: &AffinityVae| {
        let grids: Vec<&Grid> = train_set.iter().map(|s| s.grid).collect();
        let codes = m.encode(&grids).unwrap();
        let outs = m.decode_batch(&codes.iter().map(|c| (c.mu.clone(), c.pose.clone())).collect::<Vec<_>>()).unwrap();
        grids.iter().zip(&outs).map(|(g, o)| g.mse(o)).sum::<f64>() / grids.len() as f64
    };
    let (before, after) = (mse(&untrained), mse(&model));
    assert!(after * 10.0 < before, "mse before {before}, after {after}");

    let mut again = untrained.clone();
    let cfg1 = TrainConfig { epochs: 1, ..cfg.clone() };
    let r1 = train(&mut again, &train_set, &[], Some(&fsc), &cfg1).unwrap();
    assert_eq!(r1.train_loss(1).unwrap().total.to_bits(), first.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affinity_term_scale_invariant(seed in any::<u64>(), scales in prop::collection::vec(0.01f64..100.0, 4)) {
        let vals = [1.0, 0.3, 0.3, 1.0];
        let a = matrix(&vals, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mus: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let scaled: Vec<Vec<f64>> = mus.iter().zip(&scales).map(|(m, s)| m.iter().map(|v| v * s).collect()).collect();
        let ids = [0, 1, 1, 0];
        let base = affinity_term(&mus, &ids, &a).unwrap();
        prop_assert!((base - affinity_term(&scaled, &ids, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kl_is_non_negative(mu in prop::collection::vec(-5.0f64..5.0, 1..6), lv_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(lv_seed);
        let log_var: Vec<f64> = mu.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        let code = LatentCode { sampled_z: mu.clone(), eps: vec![0.0; mu.len()], mu, log_var, pose: vec![] };
        prop_assert!(kl_term(&[code]) >= 0.0);
    }
}
