use avae_core::affinity::fsc_average;
use avae_core::datagen::{
    build_dataset, decode_volume, encode_volume, is_face_connected, make_glyph, make_tetromino, make_unseen_fusion,
    read_volume, write_volume, DatagenError, DatasetConfig, Grid, Split, TetrominoShape, GLYPH_ROSTER,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

const TETRO: [&str; 6] = ["I", "L", "T", "S", "O", "E"];

fn histogram(samples: &[avae_core::datagen::LabelledSample], split: Split) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for s in samples.iter().filter(|s| s.split == split) {
        *h.entry(s.class_name.clone()).or_insert(0) += 1;
    }
    h
}

#[test]
fn tetromino_dataset_is_deterministic_with_exact_split_sizes() {
    let cfg = DatasetConfig::tetromino(&TETRO, 100, 16, 7);
    let (a, ma) = build_dataset(&cfg).unwrap();
    let (b, mb) = build_dataset(&cfg).unwrap();
    assert_eq!(a.len(), 600);
    assert_eq!(ma, mb);
    assert_eq!(ma.to_text(), mb.to_text());
    assert!(a == b, "sample grids differ between identical runs");
    assert_eq!(ma.count(Split::Test), 60);
    assert_eq!(ma.count(Split::Validation), 120);
    assert_eq!(ma.count(Split::Train), 420);
    assert_eq!(ma.count(Split::Unseen), 0);

    for split in [Split::Train, Split::Validation, Split::Test] {
        let h = histogram(&a, split);
        assert_eq!(h.len(), 6);
        let lo = h.values().min().unwrap();
        let hi = h.values().max().unwrap();
        assert!(hi - lo <= 1, "{split}: {h:?}");
    }
    for s in &a {
        assert_eq!(s.rotation.len(), 3);
        for &r in &s.rotation {
            assert!((10.0..=360.0).contains(&r) && r % 10.0 == 0.0);
        }
        assert!(s.grid.values().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }
}

#[test]
fn different_seeds_give_different_data() {
    let (a, _) = build_dataset(&DatasetConfig::tetromino(&TETRO, 5, 16, 1)).unwrap();
    let (b, _) = build_dataset(&DatasetConfig::tetromino(&TETRO, 5, 16, 2)).unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| x.rotation != y.rotation));
}

#[test]
fn unseen_classes_stay_out_of_training() {
    let mut cfg = DatasetConfig::glyph(&["a", "b", "d", "z"], 10, 32, 3);
    cfg.unseen = vec!["2".into()];
    let (samples, manifest) = build_dataset(&cfg).unwrap();
    assert_eq!(manifest.count(Split::Unseen), 10);
    for s in &samples {
        assert_eq!(s.class_name == "2", s.split == Split::Unseen);
        assert!(s.rotation[0] > -45.0 && s.rotation[0] < 45.0);
        assert!(s.grid.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }
    assert_eq!(manifest.count(Split::Test), 8);
    assert_eq!(manifest.count(Split::Validation), 0);
}

#[test]
fn config_errors() {
    let one = DatasetConfig::tetromino(&["I"], 10, 16, 0);
    assert!(matches!(build_dataset(&one), Err(DatagenError::Config(_))));
    let none = DatasetConfig::tetromino(&["I", "L"], 0, 16, 0);
    assert!(matches!(build_dataset(&none), Err(DatagenError::Config(_))));
    let unknown = DatasetConfig::tetromino(&["I", "Q"], 2, 16, 0);
    assert!(build_dataset(&unknown).is_err());
}

#[test]
fn translated_samples_keep_their_mass() {
    let mut cfg = DatasetConfig::tetromino(&["I", "O"], 20, 16, 5);
    cfg.max_shift = 2;
    let (samples, _) = build_dataset(&cfg).unwrap();
    let reference = make_tetromino(TetrominoShape::O, [0.0; 3], [0.0; 3], 16).unwrap().mass();
    for s in samples.iter().filter(|s| s.class_name == "O") {
        assert!(s.translation.iter().all(|t| t.abs() <= 2.0 && t.fract() == 0.0));
        assert!((s.grid.mass() - reference).abs() / reference < 0.05);
    }
}

#[test]
fn every_template_is_face_connected() {
    for shape in TetrominoShape::ALL {
        assert!(is_face_connected(&shape.cubes()), "{shape}");
    }
}

#[test]
fn fusion_resembles_its_parents_more_than_o() {
    for size in [16, 32] {
        let el = make_unseen_fusion(TetrominoShape::E, TetrominoShape::L, [0; 3], [0.0; 3], [0.0; 3], size).unwrap();
        let g = |s| make_tetromino(s, [0.0; 3], [0.0; 3], size).unwrap();
        let (e, l, o) = (g(TetrominoShape::E), g(TetrominoShape::L), g(TetrominoShape::O));
        assert!(el.mass() > e.mass().max(l.mass()) && el.mass() <= e.mass() + l.mass());
        let to_o = fsc_average(&el, &o).unwrap();
        assert!(fsc_average(&el, &e).unwrap() > to_o, "size {size}");
        assert!(fsc_average(&el, &l).unwrap() > to_o, "size {size}");
    }
}

#[test]
fn glyph_roster_renders_at_every_supported_size() {
    for size in [32, 64] {
        for &c in GLYPH_ROSTER.iter() {
            let g = make_glyph(c, 20.0, size).unwrap();
            assert_eq!(g.dims(), &[size, size]);
            assert!(g.mass() > 0.0);
        }
    }
    assert!(matches!(make_glyph('a', 45.0, 32), Err(DatagenError::Domain(_))));
    assert!(matches!(make_glyph('q', 0.0, 32), Err(DatagenError::Roster(_))));
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (prop::sample::select(vec![4usize, 8, 16]), 0.1f32..4.0).prop_flat_map(|(n, voxel)| {
        prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), n * n * n)
            .prop_map(move |values| Grid::new(vec![n, n, n], values).unwrap().with_voxel_size(voxel))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn volume_round_trip_is_bit_exact(grid in grid_strategy()) {
        let bytes = encode_volume(&grid).unwrap();
        let back = decode_volume(&bytes).unwrap();
        prop_assert_eq!(back.dims(), grid.dims());
        for (a, b) in grid.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.voxel_size().to_bits(), grid.voxel_size().to_bits());
    }
}

#[test]
fn volume_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.mrc");
    let g = make_tetromino(TetrominoShape::T, [30.0, 40.0, 50.0], [0.0; 3], 16).unwrap();
    write_volume(&g, &path).unwrap();
    let back = read_volume(&path).unwrap();
    assert_eq!(back.values(), g.values());
}
