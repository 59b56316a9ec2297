use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use avae_core::affinity::{build_affinity, read_affinity, AffinityMatrix};
use avae_core::datagen::{build_dataset, canonical_exemplar, encode_pgm, encode_volume, DatasetManifest, Grid, LabelledSample, Split};
use avae_core::eval::{
    confusion_matrix, corner_interpolation, embed_2d, embedding_csv, embedding_svg, labelled_matrix_csv, latent_traversal,
    pose_sweep, proximity_matrix, Classifier, ConfusionMatrix, EmbedMethod, LatentEntry, LatentMap,
};
use avae_core::model::{epoch_log_csv, train, AffinityVae, LatentCode, LossBreakdown, ModelConfig, TrainConfig, TrainSample};
use avae_core::rng::derive_seed;

use crate::config::RunConfig;
use crate::data::{data_dir, dataset_config, dataset_kind, load_dataset, write_dataset, EMBED_STREAM, MODEL_STREAM};
use crate::report::RunReport;
use crate::CliError;

/// Creates `dir`, refusing to touch a non-empty one unless `force` is set,
/// in which case its previous contents are removed.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        if !force {
            return Err(CliError::Usage(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_gen(cfg: &RunConfig, force: bool) -> Result<RunReport, CliError> {
    let t = Instant::now();
    let dcfg = dataset_config(cfg)?;
    let (samples, manifest) = build_dataset(&dcfg)?;
    let dir = data_dir(cfg);
    prepare_dir(&dir, force)?;
    let n = write_dataset(&dir, &samples, &manifest)?;
    let mut report = RunReport::new("gen");
    report.manifest(&manifest);
    report.push("files", n);
    report.artifact("manifest", dir.join("manifest.txt"));
    report.artifact("index", dir.join("index.csv"));
    report.time("gen", t);
    report.write(&dir.join("report.txt"))?;
    Ok(report)
}

pub fn cmd_affinity(cfg: &RunConfig) -> Result<(AffinityMatrix, PathBuf), CliError> {
    let dcfg = dataset_config(cfg)?;
    let kind = dataset_kind(cfg)?;
    let classes = dcfg
        .seen_classes()
        .into_iter()
        .map(|c| {
            let g = canonical_exemplar(&kind, &c, cfg.dataset.size)?;
            Ok((c, g))
        })
        .collect::<Result<Vec<(String, Grid)>, CliError>>()?;
    let matrix = build_affinity(&classes, cfg.metric()?)?;
    let path = cfg.affinity_path();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    matrix.write(&path)?;
    Ok((matrix, path))
}

pub fn model_config(cfg: &RunConfig) -> Result<ModelConfig, CliError> {
    let rank = if cfg.dataset.kind == "glyph" { 2 } else { 3 };
    let m = &cfg.model;
    Ok(ModelConfig::with_widths(&vec![cfg.dataset.size; rank], m.latent_dim, m.pose_dim, m.channels, m.hidden)?
        .with_loss_weights(m.beta, m.gamma)
        .with_seed(derive_seed(cfg.run.seed, MODEL_STREAM)))
}

/// The affinity matrix when `γ > 0`; its file must already exist.
pub fn training_affinity(cfg: &RunConfig) -> Result<Option<AffinityMatrix>, CliError> {
    if cfg.model.gamma <= 0.0 {
        return Ok(None);
    }
    let path = cfg.affinity_path();
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "gamma > 0 needs an affinity file, but {} does not exist; run the `affinity` command first",
            path.display()
        )));
    }
    Ok(Some(read_affinity(&path)?))
}

fn view(samples: &[LabelledSample], split: Split) -> Vec<TrainSample<'_>> {
    samples.iter().filter(|s| s.split == split).map(|s| TrainSample { grid: &s.grid, class: &s.class_name }).collect()
}

pub struct TrainOutcome {
    pub model: AffinityVae,
    pub final_loss: LossBreakdown,
}

/// Trains a fresh model and writes `model.ckpt`, `epochs.csv` and `config.txt` into `dir`.
pub fn train_into(
    cfg: &RunConfig,
    samples: &[LabelledSample],
    affinity: Option<&AffinityMatrix>,
    dir: &Path,
    report: &mut RunReport,
) -> Result<TrainOutcome, CliError> {
    let t = Instant::now();
    let mut model = AffinityVae::new(model_config(cfg)?)?;
    let train_set = view(samples, Split::Train);
    let validation = view(samples, Split::Validation);
    let voxels: usize = train_set.iter().map(|s| s.grid.len()).sum();
    let mass: f64 = train_set.iter().map(|s| s.grid.mass()).sum();
    model.init_output_bias(mass / voxels.max(1) as f64);
    let checkpoint = dir.join("model.ckpt");
    let tcfg = TrainConfig {
        epochs: cfg.model.epochs,
        batch_size: cfg.model.batch_size,
        learning_rate: cfg.model.learning_rate,
        checkpoint: Some(checkpoint.clone()),
    };
    let result = train(&mut model, &train_set, &validation, affinity, &tcfg)?;
    fs::write(dir.join("epochs.csv"), epoch_log_csv(&result.log))?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let last = result.log.last().expect("at least one epoch").loss;
    report.push("beta", cfg.model.beta);
    report.push("gamma", cfg.model.gamma);
    report.push("latent_dim", cfg.model.latent_dim);
    report.push("pose_dim", cfg.model.pose_dim);
    report.push("epochs", cfg.model.epochs);
    report.push("steps", result.steps);
    report.loss("final", &last);
    report.artifact("checkpoint", checkpoint);
    report.artifact("epoch_log", dir.join("epochs.csv"));
    report.artifact("config", dir.join("config.txt"));
    report.time("train", t);
    Ok(TrainOutcome { model, final_loss: last })
}

/// Hard and soft k-NN accuracy of the test split against the training entries.
pub fn knn_accuracies(cfg: &RunConfig, map: &LatentMap) -> Result<(f64, f64), CliError> {
    let queries: Vec<&LatentEntry> = map.split(Split::Test).collect();
    if queries.is_empty() {
        return Ok((0.0, 0.0));
    }
    let hard = confusion_matrix(map, &queries, Classifier::KnnHard { k: cfg.eval.k_hard })?;
    let soft = confusion_matrix(map, &queries, Classifier::KnnSoft { k: cfg.eval.k_soft })?;
    Ok((hard.accuracy, soft.accuracy))
}

pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<RunReport, CliError> {
    let affinity = training_affinity(cfg)?;
    let (samples, manifest) = load_dataset(cfg)?;
    let dir = cfg.run.out.join("train");
    prepare_dir(&dir, force)?;
    let mut report = RunReport::new("train");
    report.manifest(&manifest);
    let outcome = train_into(cfg, &samples, affinity.as_ref(), &dir, &mut report)?;
    let map = LatentMap::encode(&outcome.model, &samples, &manifest.roster, "train")?;
    let (hard, soft) = knn_accuracies(cfg, &map)?;
    report.push("test_accuracy_knn_hard", hard);
    report.push("test_accuracy_knn_soft", soft);
    report.write(&dir.join("report.txt"))?;
    Ok(report)
}

fn confusion_csv(cm: &ConfusionMatrix) -> String {
    labelled_matrix_csv("true\\predicted", &cm.rows, &cm.columns, &cm.counts)
}

fn latent_csv(map: &LatentMap) -> String {
    let d = map.latent_dim();
    let p = map.entries.first().map_or(0, |e| e.pose.len());
    let mut s = String::from("index,class,split");
    (0..d).for_each(|i| {
        let _ = write!(s, ",mu_{i}");
    });
    (0..p).for_each(|i| {
        let _ = write!(s, ",pose_{i}");
    });
    s.push('\n');
    for (i, e) in map.entries.iter().enumerate() {
        let _ = write!(s, "{i},{},{}", map.roster[e.class_id], e.split);
        for v in e.mu.iter().chain(&e.pose) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub struct EvalOutcome {
    pub knn_hard: f64,
    pub knn_soft: f64,
    pub two_sigma: f64,
    pub mean_proximity: f64,
}

/// Writes every evaluation artifact for `model` into `dir`.
pub fn eval_into(
    cfg: &RunConfig,
    model: &AffinityVae,
    samples: &[LabelledSample],
    roster: &[String],
    dir: &Path,
    report: &mut RunReport,
) -> Result<EvalOutcome, CliError> {
    let t = Instant::now();
    let map = LatentMap::encode(model, samples, roster, "eval")?;
    let write = |report: &mut RunReport, name: &str, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        report.artifact(name, path);
        Ok(())
    };
    write(report, "latent.csv", latent_csv(&map))?;

    let queries: Vec<&LatentEntry> = map.entries.iter().filter(|e| matches!(e.split, Split::Test | Split::Unseen)).collect();
    let classifiers = [
        Classifier::KnnHard { k: cfg.eval.k_hard },
        Classifier::KnnSoft { k: cfg.eval.k_soft },
        Classifier::TwoSigma,
    ];
    let mut accuracy = String::from("classifier,split,accuracy\n");
    let mut test_acc = [0.0; 3];
    for (ci, classifier) in classifiers.into_iter().enumerate() {
        let cm = confusion_matrix(&map, &queries, classifier)?;
        test_acc[ci] = cm.accuracy;
        write(report, &format!("confusion_{}.csv", classifier.name()), confusion_csv(&cm))?;
        for split in [Split::Train, Split::Validation, Split::Test] {
            let q: Vec<&LatentEntry> = map.split(split).collect();
            if q.is_empty() {
                continue;
            }
            let acc = confusion_matrix(&map, &q, classifier)?.accuracy;
            let _ = writeln!(accuracy, "{},{split},{acc}", classifier.name());
        }
    }
    write(report, "accuracy.csv", accuracy)?;

    let prox = proximity_matrix(&map)?;
    write(report, "proximity.csv", labelled_matrix_csv("class", &prox.roster, &prox.roster, &prox.values))?;

    for name in &cfg.eval.embeddings {
        let method = if name == "tsne" { EmbedMethod::Tsne } else { EmbedMethod::Pca };
        let rows = embed_2d(&map, method, derive_seed(cfg.run.seed, EMBED_STREAM))?;
        write(report, &format!("embedding_{name}.csv"), embedding_csv(&rows))?;
        write(report, &format!("embedding_{name}.svg"), embedding_svg(&rows, name))?;
    }
    report.push("test_accuracy_knn_hard", test_acc[0]);
    report.push("test_accuracy_knn_soft", test_acc[1]);
    report.push("test_accuracy_two_sigma", test_acc[2]);
    report.push("mean_proximity", prox.mean_off_diagonal());
    report.time("eval", t);
    Ok(EvalOutcome {
        knn_hard: test_acc[0],
        knn_soft: test_acc[1],
        two_sigma: test_acc[2],
        mean_proximity: prox.mean_off_diagonal(),
    })
}

pub fn load_model(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<AffinityVae, CliError> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.run.out.join("train").join("model.ckpt"));
    if !path.exists() {
        return Err(CliError::Usage(format!("checkpoint {} does not exist; run `train` first", path.display())));
    }
    AffinityVae::load(model_config(cfg)?, &path)
        .map_err(|e| CliError::Data(format!("checkpoint {} does not match the configured model: {e}", path.display())))
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, force: bool) -> Result<RunReport, CliError> {
    let model = load_model(cfg, checkpoint)?;
    let (samples, manifest) = load_dataset(cfg)?;
    let dir = cfg.run.out.join("eval");
    prepare_dir(&dir, force)?;
    let mut report = RunReport::new("eval");
    report.manifest(&manifest);
    eval_into(cfg, &model, &samples, &manifest.roster, &dir, &mut report)?;
    report.write(&dir.join("report.txt"))?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    Beta,
    Gamma,
    LatentDim,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Gamma => "gamma",
            SweepAxis::LatentDim => "latent_dim",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<(), CliError> {
        match self {
            SweepAxis::Beta => cfg.model.beta = value,
            SweepAxis::Gamma => cfg.model.gamma = value,
            SweepAxis::LatentDim => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(CliError::Usage(format!("latent_dim must be a positive integer, got {value}")));
                }
                cfg.model.latent_dim = value as usize;
            }
        }
        Ok(())
    }
}

struct SweepRow {
    value: f64,
    eval: EvalOutcome,
    loss: LossBreakdown,
}

fn sweep_one(
    base: &RunConfig,
    axis: SweepAxis,
    value: f64,
    samples: &[LabelledSample],
    manifest: &DatasetManifest,
    affinity: Option<&AffinityMatrix>,
    root: &Path,
) -> Result<SweepRow, CliError> {
    let mut cfg = base.clone();
    axis.apply(&mut cfg, value)?;
    let dir = root.join(format!("{}_{value}", axis.name()));
    fs::create_dir_all(&dir)?;
    let mut report = RunReport::new("sweep");
    report.manifest(manifest);
    let aff = if cfg.model.gamma > 0.0 { affinity } else { None };
    let out = train_into(&cfg, samples, aff, &dir, &mut report)?;
    let eval = eval_into(&cfg, &out.model, samples, &manifest.roster, &dir, &mut report)?;
    report.write(&dir.join("report.txt"))?;
    Ok(SweepRow { value, eval, loss: out.final_loss })
}

pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64], jobs: usize, force: bool) -> Result<PathBuf, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let needs_affinity = match axis {
        SweepAxis::Gamma => values.iter().any(|&g| g > 0.0),
        _ => cfg.model.gamma > 0.0,
    };
    let affinity = if needs_affinity {
        let mut probe = cfg.clone();
        probe.model.gamma = 1.0;
        training_affinity(&probe)?
    } else {
        None
    };
    let (samples, manifest) = load_dataset(cfg)?;
    let root = cfg.run.out.join("sweep").join(axis.name());
    prepare_dir(&root, force)?;

    let jobs = jobs.max(1);
    let mut rows: Vec<Option<Result<SweepRow, CliError>>> = (0..values.len()).map(|_| None).collect();
    for (chunk_no, chunk) in values.chunks(jobs).enumerate() {
        let results: Vec<Result<SweepRow, CliError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&v| {
                    let (samples, manifest, affinity, root) = (&samples, &manifest, affinity.as_ref(), &root);
                    scope.spawn(move || sweep_one(cfg, axis, v, samples, manifest, affinity, root))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            rows[chunk_no * jobs + i] = Some(r);
        }
    }
    let mut summary = format!("{},knn_hard,knn_soft,two_sigma,mean_proximity,reconstruction,kl,affinity,total\n", axis.name());
    for row in rows {
        let r = row.expect("every value ran")?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            r.value, r.eval.knn_hard, r.eval.knn_soft, r.eval.two_sigma, r.eval.mean_proximity, r.loss.reconstruction, r.loss.kl, r.loss.affinity, r.loss.total
        );
    }
    let path = root.join("summary.csv");
    fs::write(&path, summary)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum InterpMode {
    Traversal,
    Corners,
    Pose,
}

#[derive(Clone, Debug)]
pub struct InterpArgs {
    pub mode: InterpMode,
    /// Classes to encode; one for traversal and pose, four for corners.
    pub classes: Vec<String>,
    pub steps: usize,
    pub span: f64,
    pub values: Vec<f64>,
}

fn write_tile(dir: &Path, name: &str, g: &Grid) -> Result<(), CliError> {
    if g.rank() == 2 {
        fs::write(dir.join(format!("{name}.pgm")), encode_pgm(g)?)?;
    } else {
        fs::write(dir.join(format!("{name}.mrc")), encode_volume(g)?)?;
    }
    Ok(())
}

/// Tiles the central slices of `rows` into one image with a one-pixel gap.
pub fn montage(rows: &[Vec<Grid>]) -> Grid {
    let tile = rows[0][0].central_slice();
    let (h, w) = (tile.dims()[0], tile.dims()[1]);
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (mh, mw) = (rows.len() * (h + 1) - 1, cols * (w + 1) - 1);
    let mut values = vec![1.0f32; mh * mw];
    for (r, row) in rows.iter().enumerate() {
        for (c, g) in row.iter().enumerate() {
            let s = g.central_slice();
            for y in 0..h {
                for x in 0..w {
                    values[(r * (h + 1) + y) * mw + c * (w + 1) + x] = s.values()[y * w + x];
                }
            }
        }
    }
    Grid::new(vec![mh, mw], values).expect("montage extents")
}

pub fn cmd_interp(cfg: &RunConfig, checkpoint: Option<&Path>, args: &InterpArgs, force: bool) -> Result<(PathBuf, usize), CliError> {
    let model = load_model(cfg, checkpoint)?;
    let kind = dataset_kind(cfg)?;
    let seen = dataset_config(cfg)?.seen_classes();
    let wanted = match args.mode {
        InterpMode::Corners => 4,
        _ => 1,
    };
    let classes: Vec<String> = if args.classes.is_empty() {
        seen.iter().cycle().take(wanted).cloned().collect()
    } else {
        args.classes.clone()
    };
    if classes.len() != wanted {
        return Err(CliError::Usage(format!("{:?} mode takes {wanted} class(es), got {}", args.mode, classes.len())));
    }
    let exemplars = classes
        .iter()
        .map(|c| canonical_exemplar(&kind, c, cfg.dataset.size))
        .collect::<Result<Vec<Grid>, _>>()?;
    let codes: Vec<LatentCode> = model.encode(&exemplars.iter().collect::<Vec<_>>())?;

    let rows: Vec<Vec<Grid>> = match args.mode {
        InterpMode::Traversal => (0..model.config.latent_dim)
            .map(|dim| latent_traversal(&model, &codes[0], dim, args.span, args.steps))
            .collect::<Result<_, _>>()?,
        InterpMode::Corners => corner_interpolation(&model, [&codes[0], &codes[1], &codes[2], &codes[3]], args.steps)?,
        InterpMode::Pose => {
            if model.config.pose_dim != 1 {
                return Err(CliError::Usage(format!("pose mode needs pose_dim = 1, the model has {}", model.config.pose_dim)));
            }
            if exemplars[0].rank() != 2 {
                return Err(CliError::Usage("pose mode compares image-plane rotations and needs 2D data".into()));
            }
            let values = if args.values.is_empty() { (-9..=9).map(|i| f64::from(i) * 5.0 / 45.0).collect() } else { args.values.clone() };
            vec![pose_sweep(&model, &codes[0], &values, &exemplars[0])?.images]
        }
    };
    let dir = cfg.run.out.join("interp").join(format!("{:?}", args.mode).to_lowercase());
    prepare_dir(&dir, force)?;
    let mut tiles = 0;
    for (r, row) in rows.iter().enumerate() {
        for (c, g) in row.iter().enumerate() {
            write_tile(&dir, &format!("tile_r{r:02}_c{c:02}"), g)?;
            tiles += 1;
        }
    }
    fs::write(dir.join("montage.pgm"), encode_pgm(&montage(&rows))?)?;
    Ok((dir, tiles))
}
