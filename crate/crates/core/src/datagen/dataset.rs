use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::glyph::{canonical_glyph, make_glyph, parse_symbol};
use super::resample::{resize, transform_3d};
use super::tetromino::{make_cube_shape, place, CubeShape};
use super::{DatagenError, Grid};
use crate::rng::{derive_seed, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
    Unseen,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Validation, Split::Test, Split::Unseen];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::Unseen => "unseen",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| DatagenError::Config(format!("unknown split `{s}`")))
    }
}

/// Source of class exemplars.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetKind {
    /// 2D bitmap glyphs rotated in the image plane.
    Glyph,
    /// 3D tetracubes (and fusions such as `EL`) rotated in three planes.
    Tetromino,
    /// Externally produced density maps, one canonical volume per class.
    Volumes(Vec<(String, Grid)>),
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Glyph => "glyph",
            DatasetKind::Tetromino => "tetromino",
            DatasetKind::Volumes(_) => "volume-dir",
        }
    }

    pub fn spatial_rank(&self) -> usize {
        match self {
            DatasetKind::Glyph => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub classes: Vec<String>,
    /// Classes generated only into the unseen split.
    pub unseen: Vec<String>,
    pub augmentations: usize,
    pub size: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    /// Maximum absolute translation per axis in cells (3D only).
    pub max_shift: u32,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn tetromino(classes: &[&str], augmentations: usize, size: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::Tetromino,
            classes: classes.iter().map(|s| s.to_string()).collect(),
            unseen: Vec::new(),
            augmentations,
            size,
            test_fraction: 0.1,
            validation_fraction: 0.2,
            max_shift: 0,
            seed,
        }
    }

    pub fn glyph(classes: &[&str], augmentations: usize, size: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::Glyph,
            classes: classes.iter().map(|s| s.to_string()).collect(),
            unseen: Vec::new(),
            augmentations,
            size,
            test_fraction: 0.2,
            validation_fraction: 0.0,
            max_shift: 0,
            seed,
        }
    }

    /// Training classes followed by unseen classes not already listed.
    pub fn roster(&self) -> Vec<String> {
        let mut roster = self.classes.clone();
        for u in &self.unseen {
            if !roster.contains(u) {
                roster.push(u.clone());
            }
        }
        roster
    }

    pub fn is_unseen(&self, class: &str) -> bool {
        self.unseen.iter().any(|u| u == class)
    }

    pub fn seen_classes(&self) -> Vec<String> {
        self.roster().into_iter().filter(|c| !self.is_unseen(c)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelledSample {
    pub grid: Grid,
    pub class_id: usize,
    pub class_name: String,
    /// Degrees; one angle for 2D, three (xy, xz, yz) for 3D.
    pub rotation: Vec<f64>,
    /// Cells along `(x, y, z)`; empty for 2D.
    pub translation: Vec<f64>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub kind: String,
    pub size: usize,
    pub seed: u64,
    pub augmentations: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub max_shift: u32,
    pub roster: Vec<String>,
    pub unseen: Vec<String>,
    /// Sample count per split, in [`Split::ALL`] order.
    pub counts: [usize; 4],
}

impl DatasetManifest {
    pub fn count(&self, split: Split) -> usize {
        self.counts[Split::ALL.iter().position(|&s| s == split).unwrap()]
    }

    /// Deterministic `key = value` rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s += &format!("kind = {}\n", self.kind);
        s += &format!("size = {}\n", self.size);
        s += &format!("seed = {}\n", self.seed);
        s += &format!("augmentations = {}\n", self.augmentations);
        s += &format!("test_fraction = {}\n", self.test_fraction);
        s += &format!("validation_fraction = {}\n", self.validation_fraction);
        s += &format!("max_shift = {}\n", self.max_shift);
        s += &format!("classes = {}\n", self.roster.join(","));
        s += &format!("unseen = {}\n", self.unseen.join(","));
        for split in Split::ALL {
            s += &format!("count.{} = {}\n", split, self.count(split));
        }
        s
    }
}

/// Unrotated exemplar of a class.
pub fn canonical_exemplar(kind: &DatasetKind, class: &str, size: usize) -> Result<Grid, DatagenError> {
    match kind {
        DatasetKind::Glyph => canonical_glyph(parse_symbol(class)?, size),
        DatasetKind::Tetromino => make_cube_shape(&class.parse::<CubeShape>()?, [0.0; 3], [0.0; 3], size),
        DatasetKind::Volumes(volumes) => {
            let (_, g) = volumes
                .iter()
                .find(|(name, _)| name == class)
                .ok_or_else(|| DatagenError::Roster(class.to_string()))?;
            Ok(resize(&g.normalized(), size).normalized())
        }
    }
}

/// Splits `total` into `parts` near-equal shares, earlier parts taking the remainder.
fn apportion(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| total / parts + usize::from(i < total % parts)).collect()
}

fn validate(cfg: &DatasetConfig) -> Result<(), DatagenError> {
    let seen = cfg.seen_classes();
    if seen.len() < 2 {
        return Err(DatagenError::Config(format!("need at least 2 training classes, got {}", seen.len())));
    }
    let roster = cfg.roster();
    for (i, c) in roster.iter().enumerate() {
        if roster[..i].contains(c) {
            return Err(DatagenError::Config(format!("duplicate class `{c}`")));
        }
    }
    if cfg.augmentations == 0 {
        return Err(DatagenError::Config("augmentations must be at least 1".into()));
    }
    let (t, v) = (cfg.test_fraction, cfg.validation_fraction);
    if !(0.0..1.0).contains(&t) || !(0.0..1.0).contains(&v) || t + v >= 1.0 {
        return Err(DatagenError::Config(format!("split fractions test={t} validation={v} must be in [0,1) and sum below 1")));
    }
    if !cfg.size.is_power_of_two() {
        return Err(DatagenError::Config(format!("size must be a power of two, got {}", cfg.size)));
    }
    Ok(())
}

/// Generates every sample of every class and assigns stratified splits.
/// The result depends only on the configuration (including its seed).
pub fn build_dataset(cfg: &DatasetConfig) -> Result<(Vec<LabelledSample>, DatasetManifest), DatagenError> {
    validate(cfg)?;
    let roster = cfg.roster();
    let seen: Vec<usize> = (0..roster.len()).filter(|&i| !cfg.is_unseen(&roster[i])).collect();
    let total_seen = seen.len() * cfg.augmentations;
    let test_shares = apportion((total_seen as f64 * cfg.test_fraction).round() as usize, seen.len());
    let val_shares = apportion((total_seen as f64 * cfg.validation_fraction).round() as usize, seen.len());

    let mut samples = Vec::with_capacity(roster.len() * cfg.augmentations);
    for (class_id, name) in roster.iter().enumerate() {
        let mut rng = seeded(derive_seed(cfg.seed, class_id as u64));
        let base = canonical_exemplar(&cfg.kind, name, cfg.size)?;
        let mut class_samples = Vec::with_capacity(cfg.augmentations);
        for _ in 0..cfg.augmentations {
            let (grid, rotation, translation) = match cfg.kind {
                DatasetKind::Glyph => {
                    let angle = f64::from(rng.random_range(-44i32..=44));
                    let symbol = parse_symbol(name)?;
                    (make_glyph(symbol, angle, cfg.size)?, vec![angle], Vec::new())
                }
                _ => augment_3d(&base, cfg.max_shift, &mut rng)?,
            };
            class_samples.push(LabelledSample {
                grid,
                class_id,
                class_name: name.clone(),
                rotation,
                translation,
                split: Split::Train,
            });
        }
        if cfg.is_unseen(name) {
            class_samples.iter_mut().for_each(|s| s.split = Split::Unseen);
        } else {
            let rank = seen.iter().position(|&c| c == class_id).unwrap();
            let mut order: Vec<usize> = (0..class_samples.len()).collect();
            order.shuffle(&mut rng);
            let (n_test, n_val) = (test_shares[rank], val_shares[rank]);
            if n_test + n_val > class_samples.len() {
                return Err(DatagenError::Config(format!("class `{name}` has too few augmentations for the requested splits")));
            }
            for (pos, &idx) in order.iter().enumerate() {
                class_samples[idx].split = if pos < n_test {
                    Split::Test
                } else if pos < n_test + n_val {
                    Split::Validation
                } else {
                    Split::Train
                };
            }
        }
        samples.extend(class_samples);
    }

    let mut counts = [0usize; 4];
    for s in &samples {
        counts[Split::ALL.iter().position(|&x| x == s.split).unwrap()] += 1;
    }
    let manifest = DatasetManifest {
        kind: cfg.kind.name().to_string(),
        size: cfg.size,
        seed: cfg.seed,
        augmentations: cfg.augmentations,
        test_fraction: cfg.test_fraction,
        validation_fraction: cfg.validation_fraction,
        max_shift: cfg.max_shift,
        roster,
        unseen: cfg.unseen.clone(),
        counts,
    };
    Ok((samples, manifest))
}

type Augmented = (Grid, Vec<f64>, Vec<f64>);

/// Random rotation with angles from {10, 20, …, 360} in each plane, plus an
/// optional integer shift. Shifts that would push mass off the canvas are redrawn.
fn augment_3d(base: &Grid, max_shift: u32, rng: &mut impl Rng) -> Result<Augmented, DatagenError> {
    let angles = [0; 3].map(|_| f64::from(10 * rng.random_range(1i32..=36)));
    if max_shift == 0 {
        let g = transform_3d(base, angles, [0.0; 3]).map(|v| v.clamp(0.0, 1.0));
        return Ok((g, angles.to_vec(), vec![0.0; 3]));
    }
    let shift = max_shift as i32;
    for _ in 0..100 {
        let translation = [0; 3].map(|_| f64::from(rng.random_range(-shift..=shift)));
        match place(base.clone(), angles, translation) {
            Ok(g) => return Ok((g, angles.to_vec(), translation.to_vec())),
            Err(DatagenError::Placement(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DatagenError::Placement(format!("no translation within ±{max_shift} keeps the object on the canvas")))
}
