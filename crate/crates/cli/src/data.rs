//! Dataset directories: `manifest.txt`, `index.csv` and one sample file
//! per augmentation under `samples/` (PGM for 2D, volume files for 3D).

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use avae_core::datagen::{
    build_dataset, decode_pgm, encode_pgm, encode_volume, read_volume, DatasetConfig, DatasetKind, DatasetManifest, LabelledSample,
    Split,
};
use avae_core::rng::derive_seed;

use crate::config::RunConfig;
use crate::CliError;

pub const DATA_STREAM: u64 = 0;
pub const MODEL_STREAM: u64 = 1;
pub const EMBED_STREAM: u64 = 2;

pub fn data_dir(cfg: &RunConfig) -> PathBuf {
    cfg.run.out.join("data")
}

fn load_volumes(dir: &Path, classes: &[String]) -> Result<Vec<(String, avae_core::datagen::Grid)>, CliError> {
    classes
        .iter()
        .map(|c| {
            let path = dir.join(format!("{c}.mrc"));
            if !path.exists() {
                return Err(CliError::Usage(format!("no volume for class `{c}` at {}", path.display())));
            }
            Ok((c.clone(), read_volume(&path)?))
        })
        .collect()
}

pub fn dataset_kind(cfg: &RunConfig) -> Result<DatasetKind, CliError> {
    let d = &cfg.dataset;
    Ok(match d.kind.as_str() {
        "glyph" => DatasetKind::Glyph,
        "tetromino" => DatasetKind::Tetromino,
        _ => DatasetKind::Volumes(load_volumes(d.volume_dir.as_deref().unwrap(), &d.classes)?),
    })
}

pub fn dataset_config(cfg: &RunConfig) -> Result<DatasetConfig, CliError> {
    let d = &cfg.dataset;
    Ok(DatasetConfig {
        kind: dataset_kind(cfg)?,
        classes: d.classes.clone(),
        unseen: d.unseen.clone(),
        augmentations: d.augmentations,
        size: d.size,
        test_fraction: d.test_fraction,
        validation_fraction: d.validation_fraction,
        max_shift: d.max_shift,
        seed: derive_seed(cfg.run.seed, DATA_STREAM),
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| CliError::Data(format!("bad number `{p}` in index"))))
        .collect()
}

/// Writes every sample plus the manifest and index. Returns the number of sample files.
pub fn write_dataset(dir: &Path, samples: &[LabelledSample], manifest: &DatasetManifest) -> Result<usize, CliError> {
    let sample_dir = dir.join("samples");
    fs::create_dir_all(&sample_dir)?;
    let mut index = String::from("file,class,split,rotation,translation\n");
    for (i, s) in samples.iter().enumerate() {
        let (ext, bytes) = if s.grid.rank() == 2 { ("pgm", encode_pgm(&s.grid)?) } else { ("mrc", encode_volume(&s.grid)?) };
        let name = format!("{i:05}_{}.{ext}", s.class_name);
        fs::write(sample_dir.join(&name), bytes)?;
        let _ = writeln!(index, "samples/{name},{},{},{},{}", s.class_name, s.split, join(&s.rotation), join(&s.translation));
    }
    fs::write(dir.join("index.csv"), index)?;
    fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    Ok(samples.len())
}

fn without_counts(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with("count.")).collect()
}

/// Reads a dataset directory written by [`write_dataset`], checking that its
/// manifest matches the configuration.
fn read_dataset(dir: &Path, dcfg: &DatasetConfig) -> Result<(Vec<LabelledSample>, DatasetManifest), CliError> {
    let on_disk = fs::read_to_string(dir.join("manifest.txt"))?;
    let roster = dcfg.roster();
    let mut manifest = DatasetManifest {
        kind: dcfg.kind.name().to_string(),
        size: dcfg.size,
        seed: dcfg.seed,
        augmentations: dcfg.augmentations,
        test_fraction: dcfg.test_fraction,
        validation_fraction: dcfg.validation_fraction,
        max_shift: dcfg.max_shift,
        roster: roster.clone(),
        unseen: dcfg.unseen.clone(),
        counts: [0; 4],
    };
    if without_counts(&on_disk) != without_counts(&manifest.to_text()) {
        return Err(CliError::Usage(format!(
            "{} was generated from a different dataset configuration; rerun `gen --force`",
            dir.display()
        )));
    }
    let index = fs::read_to_string(dir.join("index.csv"))?;
    let mut samples = Vec::new();
    for (n, line) in index.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Data(format!("index.csv line {}: expected 5 fields", n + 1)));
        }
        let class_id = roster
            .iter()
            .position(|c| c == fields[1])
            .ok_or_else(|| CliError::Data(format!("index.csv line {}: unknown class `{}`", n + 1, fields[1])))?;
        let split: Split = fields[2].parse().map_err(|e| CliError::Data(format!("index.csv line {}: {e}", n + 1)))?;
        let path = dir.join(fields[0]);
        let grid = if fields[0].ends_with(".pgm") { decode_pgm(&fs::read(&path)?)? } else { read_volume(&path)? };
        manifest.counts[Split::ALL.iter().position(|&s| s == split).unwrap()] += 1;
        samples.push(LabelledSample {
            grid,
            class_id,
            class_name: fields[1].to_string(),
            rotation: split_floats(fields[3])?,
            translation: split_floats(fields[4])?,
            split,
        });
    }
    Ok((samples, manifest))
}

/// Samples from the run's data directory when `gen` has produced one,
/// otherwise generated in memory from the same configuration.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Vec<LabelledSample>, DatasetManifest), CliError> {
    let dcfg = dataset_config(cfg)?;
    let dir = data_dir(cfg);
    if dir.join("manifest.txt").exists() {
        read_dataset(&dir, &dcfg)
    } else {
        Ok(build_dataset(&dcfg)?)
    }
}
