//! Command-line surface: `annotate`, `abstract`, `synth`, `train`,
//! `evaluate` and `name`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::abstraction::{transform, AbstractionConfig, AbstractionLevel};
use crate::classify::{ClassifierModel, FeatureVector, TrainConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    self, align, anchor_data, evaluate_anchor, evaluate_palette_model, features_of, observe, palette_sets,
    pipeline_examples, train_anchor_models, train_palette_model, AnchorModels, EvaluationReport, FeatureKind,
    DEFAULT_MIN_ANCHOR_COUNT, REPORT_FORMAT_VERSION,
};
use crate::io::{self, load_manifest_with, save_manifest, AnnotationRecord, ManifestCheck};
use crate::naming::{BkFamily, ColorTable};
use crate::palette::{annotate, AnnotateConfig, ChromaticFlag, Palette};
use crate::pipeline::{
    self, split_indices, train_lab_regressor, PipelineConfig, PipelineModels, RegressorModel, DEFAULT_RADIUS,
};
use crate::synth::{generate_synthetic, SynthSpec, SYNTH_FORMAT_VERSION};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "chromaline", version, about = "Hierarchical garment color naming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Bk,
    Css,
    Regress,
    Pipeline,
    Multilabel,
    Anchor,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract palettes and names from garment images into a manifest.
    Annotate {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest supplying designer/season/year by record id.
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Directory of face crops named `<id>.png`, for Monk levels.
        #[arg(long)]
        faces: Option<PathBuf>,
        #[arg(long, default_value_t = crate::palette::DEFAULT_MAX_SAMPLES)]
        max_samples: usize,
    },
    /// Render one abstraction level of a garment image.
    Abstract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        level: AbstractionLevel,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = AbstractionConfig::default().edge_threshold)]
        edge_threshold: f64,
    },
    /// Generate a synthetic corpus (images, masks, faces, truth manifest).
    Synth {
        /// Spec JSON file, or `defaults`.
        #[arg(long, env = "CHROMALINE_SYNTH_SPEC", default_value = "defaults")]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the record count of every house.
        #[arg(long)]
        records_per_house: Option<usize>,
    },
    /// Train models from a truth manifest, with features from `--observed`
    /// (defaults to the truth manifest itself).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        observed: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, default_value = "swatch")]
        features: FeatureKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        eval_fraction: f64,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().l2)]
        l2: f64,
        #[arg(long, default_value_t = PipelineConfig::default().ridge)]
        ridge: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_ANCHOR_COUNT)]
        min_anchor_count: usize,
    },
    /// Evaluate trained models on the held-out split and write a report.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        observed: Option<PathBuf>,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        radius: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Name the dominant color of one garment image.
    Name {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Sidecar describing a manifest: `<manifest>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    pub format_version: u32,
    pub seed: u64,
    pub generator: String,
    pub records: usize,
}

pub fn meta_path(manifest: &Path) -> PathBuf {
    let mut name = manifest.file_name().map(OsString::from).unwrap_or_default();
    name.push(".meta.json");
    manifest.with_file_name(name)
}

fn write_manifest(records: &[AnnotationRecord], path: &Path, seed: u64, generator: &str) -> Result<()> {
    save_manifest(records, path)?;
    io::write_json(
        &meta_path(path),
        &ManifestMeta { format_version: MANIFEST_FORMAT_VERSION, seed, generator: generator.into(), records: records.len() },
    )
}

/// What `train` has written into a model directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub format_version: u32,
    pub seed: u64,
    pub features: FeatureKind,
    pub eval_fraction: f64,
    pub tasks: Vec<String>,
    pub n_train: usize,
}

const TRAIN_META: &str = "train_meta.json";
const BK_MODEL: &str = "bk.json";
const REGRESSOR: &str = "regressor.json";
const MULTILABEL_MODEL: &str = "multilabel.json";
const ANCHOR_MODELS: &str = "anchor.json";

fn css_model_path(dir: &Path, family: BkFamily) -> PathBuf {
    dir.join("css").join(format!("{family}.json"))
}

/// Truth records, their observed counterparts and observed features.
struct Dataset {
    truth: Vec<AnnotationRecord>,
    observed: Vec<AnnotationRecord>,
    features: Vec<FeatureVector>,
}

impl Dataset {
    fn load(manifest: &Path, observed: Option<&Path>, kind: FeatureKind) -> Result<Self> {
        let check = ManifestCheck::default();
        let truth = load_manifest_with(manifest, &check)?;
        let (observed_path, observed) = match observed {
            Some(p) => (p, load_manifest_with(p, &check)?),
            None => (manifest, truth.clone()),
        };
        let pairs = align(&truth, &observed)?;
        let observed: Vec<AnnotationRecord> = pairs.iter().map(|(_, o)| (*o).clone()).collect();
        let features = observed
            .iter()
            .map(|o| {
                let image = match kind {
                    FeatureKind::Swatch => None,
                    FeatureKind::Histogram { .. } => Some(io::load_masked_image(
                        &io::resolve(observed_path, &o.image_path),
                        &io::resolve(observed_path, &o.mask_path),
                    )?),
                };
                features_of(kind, o, image.as_ref())
            })
            .collect::<Result<Vec<_>>>()?;
        if truth.is_empty() {
            return Err(Error::Usage(format!("{} has no records", manifest.display())));
        }
        Ok(Self { truth, observed, features })
    }

    fn truth_refs(&self) -> Vec<&AnnotationRecord> {
        self.truth.iter().collect()
    }
}

pub fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.one_line());
        std::process::exit(1);
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Annotate { images, masks, out, seed, metadata, faces, max_samples } => {
            cmd_annotate(&images, &masks, &out, seed, metadata.as_deref(), faces.as_deref(), max_samples)
        }
        Command::Abstract { input, mask, level, out, edge_threshold } => {
            let img = io::load_masked_image(&input, &mask)?;
            let result = transform(&img, level, &AbstractionConfig { edge_threshold });
            io::save_rgb(&out, result.width(), result.height(), result.pixels())
        }
        Command::Synth { spec, out, seed, records_per_house } => cmd_synth(&spec, &out, seed, records_per_house),
        Command::Train {
            manifest,
            observed,
            task,
            features,
            seed,
            out,
            eval_fraction,
            epochs,
            l2,
            ridge,
            min_anchor_count,
        } => {
            let config = PipelineConfig { radius: DEFAULT_RADIUS, ridge, train: TrainConfig { epochs, l2, seed, ..TrainConfig::default() } };
            cmd_train(&manifest, observed.as_deref(), task, features, &out, eval_fraction, &config, min_anchor_count)
        }
        Command::Evaluate { manifest, observed, models, radius, report } => {
            cmd_evaluate(&manifest, observed.as_deref(), &models, radius, &report)
        }
        Command::Name { image, mask, seed } => {
            let img = io::load_masked_image(&image, &mask)?;
            let a = annotate(&img, ColorTable::css(), &AnnotateConfig::default(), seed)?;
            let lab = a.palette.dominant();
            println!("family={} css={} lab={:.4} {:.4} {:.4}", a.bk, a.css.name, lab.l, lab.a, lab.b);
            Ok(())
        }
    }
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// `path` relative to `base` when it lies underneath, else as given.
fn relative_to(path: &Path, base: &Path) -> String {
    let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
    let full = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    full.strip_prefix(&base).unwrap_or(&full).to_string_lossy().replace('\\', "/")
}

fn cmd_annotate(
    images: &Path,
    masks: &Path,
    out: &Path,
    seed: u64,
    metadata: Option<&Path>,
    faces: Option<&Path>,
    max_samples: usize,
) -> Result<()> {
    let meta: BTreeMap<String, AnnotationRecord> = match metadata {
        Some(p) => load_manifest_with(p, &ManifestCheck::default())?.into_iter().map(|r| (r.id.clone(), r)).collect(),
        None => BTreeMap::new(),
    };
    let out_dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let table = ColorTable::css();
    let config = AnnotateConfig { max_samples, ..AnnotateConfig::default() };
    let mut records = Vec::new();
    for image_path in png_files(images)? {
        let file_name = image_path.file_name().expect("listed files have names");
        let mask_path = masks.join(file_name);
        let id = image_path.file_stem().expect("listed files have stems").to_string_lossy().to_string();
        let img = io::load_masked_image(&image_path, &mask_path)?;
        let face = match faces.map(|d| d.join(file_name)).filter(|p| p.exists()) {
            Some(p) => {
                let (w, h, pixels) = io::load_rgb(&p)?;
                Some(crate::palette::MaskedImage::new(w, h, pixels, vec![true; w * h])?)
            }
            None => None,
        };
        let base = meta.get(&id).cloned().unwrap_or_else(|| AnnotationRecord {
            id: id.clone(),
            image_path: String::new(),
            mask_path: String::new(),
            designer: "unknown".into(),
            season: "unknown".into(),
            year: None,
            palette: Palette::solid(crate::colorspace::LabColor::new(0.0, 0.0, 0.0)),
            chromatic: ChromaticFlag::Achromatic,
            bk_c1: BkFamily::Purple,
            css_c1: "black".into(),
            monk: None,
        });
        let mut record = observe(&base, &img, face.as_ref(), table, &config, seed)?;
        record.image_path = relative_to(&image_path, out_dir);
        record.mask_path = relative_to(&mask_path, out_dir);
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Usage(format!("no PNG images in {}", images.display())));
    }
    write_manifest(&records, out, seed, "annotate")
}

fn cmd_synth(spec: &str, out: &Path, seed: Option<u64>, records_per_house: Option<usize>) -> Result<()> {
    let mut spec: SynthSpec = if spec == "defaults" { SynthSpec::default() } else { io::read_json(Path::new(spec))? };
    if spec.format_version != SYNTH_FORMAT_VERSION {
        return Err(Error::Spec(format!("unsupported spec format_version {}", spec.format_version)));
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = records_per_house {
        for h in &mut spec.houses {
            h.records = n;
        }
    }
    let corpus = generate_synthetic(&spec)?;
    corpus.write(out)?;
    io::write_json(
        &meta_path(&out.join(crate::synth::TRUTH_MANIFEST)),
        &ManifestMeta {
            format_version: MANIFEST_FORMAT_VERSION,
            seed: spec.seed,
            generator: "synth".into(),
            records: corpus.records.len(),
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    manifest: &Path,
    observed: Option<&Path>,
    task: Task,
    kind: FeatureKind,
    out: &Path,
    eval_fraction: f64,
    config: &PipelineConfig,
    min_anchor_count: usize,
) -> Result<()> {
    if !(0.0..1.0).contains(&eval_fraction) {
        return Err(Error::Usage("--eval-fraction must lie in [0, 1)".into()));
    }
    let seed = config.train.seed;
    let meta_file = out.join(TRAIN_META);
    let mut meta = if meta_file.exists() {
        let m: TrainMeta = io::read_json(&meta_file)?;
        if m.seed != seed || m.features != kind || m.eval_fraction != eval_fraction {
            return Err(Error::Usage(format!(
                "{} was trained with seed {}, features {}, eval fraction {}",
                out.display(),
                m.seed,
                m.features,
                m.eval_fraction
            )));
        }
        m
    } else {
        TrainMeta { format_version: REPORT_FORMAT_VERSION, seed, features: kind, eval_fraction, tasks: vec![], n_train: 0 }
    };

    let data = Dataset::load(manifest, observed, kind)?;
    let (train_idx, _) = split_indices(data.truth.len(), eval_fraction, seed);
    let truth = data.truth_refs();
    let table = ColorTable::css();
    let examples = pipeline_examples(&data.features, &truth);
    let train_examples: Vec<_> = train_idx.iter().map(|&i| examples[i].clone()).collect();

    match task {
        Task::Bk | Task::Css | Task::Pipeline => {
            let models = pipeline::train_pipeline(&train_examples, table, config)?;
            if matches!(task, Task::Bk | Task::Pipeline) {
                save_classifier(&models.bk, &out.join(BK_MODEL))?;
            }
            if matches!(task, Task::Css | Task::Pipeline) {
                for (family, m) in &models.css {
                    save_classifier(m, &css_model_path(out, *family))?;
                }
            }
            if task == Task::Pipeline {
                io::write_json(&out.join(REGRESSOR), &models.regressor)?;
            }
        }
        Task::Regress => {
            let data: Vec<_> = train_examples.iter().map(|e| (e.features.clone(), e.lab)).collect();
            let mut m = train_lab_regressor(&data, config.ridge)?;
            m.seed = seed;
            io::write_json(&out.join(REGRESSOR), &m)?;
        }
        Task::Multilabel => {
            let sets = palette_sets(&truth, table);
            let m = train_palette_model(&data.features, &sets, &train_idx, &config.train)?;
            save_classifier(&m, &out.join(MULTILABEL_MODEL))?;
        }
        Task::Anchor => {
            let pairs: Vec<_> = data.truth.iter().zip(&data.observed).collect();
            let ad = anchor_data(&pairs, table);
            let rows = anchor_rows(&ad, &train_idx);
            if rows.is_empty() {
                return Err(Error::Usage("anchor task needs garments with a second palette slot".into()));
            }
            let m = train_anchor_models(&ad, &rows, min_anchor_count, &config.train)?;
            io::write_json(&out.join(ANCHOR_MODELS), &m)?;
        }
    }
    let name = format!("{task:?}").to_lowercase();
    if !meta.tasks.contains(&name) {
        meta.tasks.push(name);
        meta.tasks.sort();
    }
    meta.n_train = train_idx.len();
    io::write_json(&meta_file, &meta)
}

/// Positions in `ad.rows` whose record index is in `idx`.
fn anchor_rows(ad: &experiments::AnchorData, idx: &[usize]) -> Vec<usize> {
    let wanted: std::collections::BTreeSet<usize> = idx.iter().copied().collect();
    (0..ad.rows.len()).filter(|&k| wanted.contains(&ad.rows[k])).collect()
}

fn save_classifier(m: &ClassifierModel, path: &Path) -> Result<()> {
    io::write_file(path, (m.to_json() + "\n").as_bytes())
}

fn load_classifier(path: &Path, kind: FeatureKind) -> Result<ClassifierModel> {
    Ok(ClassifierModel::load(path, Some(kind.schema()))?)
}

fn cmd_evaluate(manifest: &Path, observed: Option<&Path>, dir: &Path, radius: f64, report: &Path) -> Result<()> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::Usage("--radius must be a non-negative number".into()));
    }
    let meta: TrainMeta = io::read_json(&dir.join(TRAIN_META))?;
    let kind = meta.features;
    let mut css = BTreeMap::new();
    for family in BkFamily::ALL {
        let p = css_model_path(dir, family);
        if p.exists() {
            css.insert(family, load_classifier(&p, kind)?);
        }
    }
    let models = PipelineModels {
        bk: load_classifier(&dir.join(BK_MODEL), kind)?,
        css,
        regressor: RegressorModel::load(&dir.join(REGRESSOR), Some(kind.schema()))?,
    };

    let data = Dataset::load(manifest, observed, kind)?;
    let (train_idx, eval_idx) = split_indices(data.truth.len(), meta.eval_fraction, meta.seed);
    if eval_idx.is_empty() {
        return Err(Error::Usage("evaluation split is empty".into()));
    }
    let truth = data.truth_refs();
    let table = ColorTable::css();
    let (stages, bk_lift, monk_bk_cramers_v) =
        experiments::evaluate_pipeline(&models, &data.features, &truth, &train_idx, &eval_idx, table, radius)?;

    let multilabel_path = dir.join(MULTILABEL_MODEL);
    let multilabel = if multilabel_path.exists() {
        let m = load_classifier(&multilabel_path, kind)?;
        Some(evaluate_palette_model(&m, &data.features, &palette_sets(&truth, table), &eval_idx)?)
    } else {
        None
    };
    let anchor_path = dir.join(ANCHOR_MODELS);
    let anchor = if anchor_path.exists() {
        let m: AnchorModels = io::read_json(&anchor_path)?;
        let pairs: Vec<_> = data.truth.iter().zip(&data.observed).collect();
        let ad = anchor_data(&pairs, table);
        Some(evaluate_anchor(&m, &ad, &anchor_rows(&ad, &eval_idx))?)
    } else {
        None
    };

    let out = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: meta.seed,
        features: kind,
        n_train: train_idx.len(),
        n_eval: eval_idx.len(),
        stages,
        bk_lift,
        anchor,
        multilabel,
        monk_bk_cramers_v,
    };
    io::write_json(report, &out)
}

