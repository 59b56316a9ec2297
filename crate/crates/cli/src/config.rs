//! Line-based run configuration: `[section]` headers and `key = value`
//! pairs. Every key has a default; unknown sections or keys are errors.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use avae_core::affinity::Metric;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSection {
    /// `glyph`, `tetromino` or `volume-dir`.
    pub kind: String,
    pub classes: Vec<String>,
    pub unseen: Vec<String>,
    pub augmentations: usize,
    pub size: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub max_shift: u32,
    /// Directory of `<class>.mrc` volumes for `volume-dir`.
    pub volume_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub latent_dim: usize,
    pub pose_dim: usize,
    pub beta: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub channels: [usize; 2],
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinitySection {
    pub metric: String,
    /// Defaults to `<out>/affinity.txt`.
    pub file: Option<PathBuf>,
    pub sigma: f64,
    pub rotations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSection {
    pub k_hard: usize,
    pub k_soft: usize,
    /// Any of `pca`, `tsne`.
    pub embeddings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub run: RunSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub affinity: AffinitySection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run: RunSection { seed: 0, out: PathBuf::from("run") },
            dataset: DatasetSection {
                kind: "tetromino".into(),
                classes: ["I", "L", "T", "S", "O", "E"].map(String::from).to_vec(),
                unseen: Vec::new(),
                augmentations: 200,
                size: 16,
                test_fraction: 0.1,
                validation_fraction: 0.2,
                max_shift: 0,
                volume_dir: None,
            },
            model: ModelSection {
                latent_dim: 8,
                pose_dim: 3,
                beta: 1.0,
                gamma: 1.0,
                epochs: 30,
                batch_size: 32,
                learning_rate: 1e-3,
                channels: [8, 16],
                hidden: 64,
            },
            affinity: AffinitySection { metric: "fsc".into(), file: None, sigma: 2.0, rotations: 12 },
            eval: EvalSection { k_hard: 5, k_soft: 100, embeddings: vec!["pca".into()] },
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("line {line}: invalid value `{v}` for `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["run", "dataset", "model", "affinity", "eval"].contains(&name) {
                    return Err(CliError::Usage(format!("line {n}: unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("line {n}: expected `key = value`, got `{line}`")));
            };
            let (key, v) = (key.trim(), value.trim());
            let (r, d, m, a, e) = (&mut cfg.run, &mut cfg.dataset, &mut cfg.model, &mut cfg.affinity, &mut cfg.eval);
            match (section.as_str(), key) {
                ("run", "seed") => r.seed = num(n, key, v)?,
                ("run", "out") => r.out = PathBuf::from(v),
                ("dataset", "kind") => d.kind = v.to_string(),
                ("dataset", "classes") => d.classes = list(v),
                ("dataset", "unseen") => d.unseen = list(v),
                ("dataset", "augmentations") => d.augmentations = num(n, key, v)?,
                ("dataset", "size") => d.size = num(n, key, v)?,
                ("dataset", "test_fraction") => d.test_fraction = num(n, key, v)?,
                ("dataset", "validation_fraction") => d.validation_fraction = num(n, key, v)?,
                ("dataset", "max_shift") => d.max_shift = num(n, key, v)?,
                ("dataset", "volume_dir") => d.volume_dir = path(v),
                ("model", "latent_dim") => m.latent_dim = num(n, key, v)?,
                ("model", "pose_dim") => m.pose_dim = num(n, key, v)?,
                ("model", "beta") => m.beta = num(n, key, v)?,
                ("model", "gamma") => m.gamma = num(n, key, v)?,
                ("model", "epochs") => m.epochs = num(n, key, v)?,
                ("model", "batch_size") => m.batch_size = num(n, key, v)?,
                ("model", "learning_rate") => m.learning_rate = num(n, key, v)?,
                ("model", "channels") => {
                    let c = list(v);
                    if c.len() != 2 {
                        return Err(CliError::Usage(format!("line {n}: `channels` takes two widths, got `{v}`")));
                    }
                    m.channels = [num(n, key, &c[0])?, num(n, key, &c[1])?];
                }
                ("model", "hidden") => m.hidden = num(n, key, v)?,
                ("affinity", "metric") => a.metric = v.to_string(),
                ("affinity", "file") => a.file = path(v),
                ("affinity", "sigma") => a.sigma = num(n, key, v)?,
                ("affinity", "rotations") => a.rotations = num(n, key, v)?,
                ("eval", "k_hard") => e.k_hard = num(n, key, v)?,
                ("eval", "k_soft") => e.k_soft = num(n, key, v)?,
                ("eval", "embeddings") => e.embeddings = list(v),
                ("", _) => return Err(CliError::Usage(format!("line {n}: `{key}` appears before any section"))),
                (s, _) => return Err(CliError::Usage(format!("line {n}: unknown key `{key}` in [{s}]"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.dataset;
        if !["glyph", "tetromino", "volume-dir"].contains(&d.kind.as_str()) {
            return Err(CliError::Usage(format!("unknown dataset kind `{}`", d.kind)));
        }
        if d.kind == "volume-dir" && d.volume_dir.is_none() {
            return Err(CliError::Usage("dataset kind volume-dir needs `volume_dir`".into()));
        }
        for u in &d.unseen {
            if !d.classes.contains(u) {
                return Err(CliError::Usage(format!("unseen class `{u}` is not in `classes`")));
            }
        }
        self.metric()?;
        for e in &self.eval.embeddings {
            if e != "pca" && e != "tsne" {
                return Err(CliError::Usage(format!("unknown embedding `{e}` (expected pca or tsne)")));
            }
        }
        if self.eval.k_hard == 0 || self.eval.k_soft == 0 {
            return Err(CliError::Usage("k_hard and k_soft must be at least 1".into()));
        }
        if self.model.epochs == 0 {
            return Err(CliError::Usage("epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn metric(&self) -> Result<Metric, CliError> {
        let a = &self.affinity;
        match a.metric.as_str() {
            "overlap" => Ok(Metric::Overlap { sigma: a.sigma, rotations: a.rotations }),
            name => name.parse().map_err(|e| CliError::Usage(format!("{e}"))),
        }
    }

    pub fn affinity_path(&self) -> PathBuf {
        self.affinity.file.clone().unwrap_or_else(|| self.run.out.join("affinity.txt"))
    }

    /// Normalised rendering: every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let (r, d, m, a, e) = (&self.run, &self.dataset, &self.model, &self.affinity, &self.eval);
        let mut s = String::new();
        let _ = writeln!(s, "[run]\nseed = {}\nout = {}\n", r.seed, r.out.display());
        let _ = writeln!(s, "[dataset]\nkind = {}\nclasses = {}\nunseen = {}", d.kind, d.classes.join(","), d.unseen.join(","));
        let _ = writeln!(s, "augmentations = {}\nsize = {}", d.augmentations, d.size);
        let _ = writeln!(s, "test_fraction = {}\nvalidation_fraction = {}", d.test_fraction, d.validation_fraction);
        let _ = writeln!(s, "max_shift = {}\nvolume_dir = {}\n", d.max_shift, opt(&d.volume_dir));
        let _ = writeln!(s, "[model]\nlatent_dim = {}\npose_dim = {}\nbeta = {}\ngamma = {}", m.latent_dim, m.pose_dim, m.beta, m.gamma);
        let _ = writeln!(s, "epochs = {}\nbatch_size = {}\nlearning_rate = {}", m.epochs, m.batch_size, m.learning_rate);
        let _ = writeln!(s, "channels = {},{}\nhidden = {}\n", m.channels[0], m.channels[1], m.hidden);
        let _ = writeln!(s, "[affinity]\nmetric = {}\nfile = {}\nsigma = {}\nrotations = {}\n", a.metric, opt(&a.file), a.sigma, a.rotations);
        let _ = writeln!(s, "[eval]\nk_hard = {}\nk_soft = {}\nembeddings = {}", e.k_hard, e.k_soft, e.embeddings.join(","));
        s
    }
}
