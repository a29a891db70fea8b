use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataio::{holdout_split, load_csv, DatasetMeta, DatasetSchema, EncodedDataset, PreprocessorState};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::io;
use crate::model::{build_encoder, EncoderCheckpoint, EncoderConfig, HeadCheckpoint, HeadMeta, Parameterized};
use crate::rng;
use crate::sscl::{self, EpochRecord, SplitPlan};
use crate::synthetic::{self, SyntheticSpec};
use crate::transfer::{self, AliasTable, TransferReport};

use super::config::RunConfig;
use super::manifest::RunManifest;

/// Fixed artifact names inside the work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub workdir: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            workdir: cfg.workdir.clone(),
        }
    }

    pub fn preprocessor(&self) -> PathBuf {
        self.workdir.join("preprocessor.json")
    }

    pub fn encoder_set(&self) -> PathBuf {
        self.workdir.join("encoder-set.bin")
    }

    pub fn head_set(&self) -> PathBuf {
        self.workdir.join("head-set.bin")
    }

    pub fn encoder(&self) -> PathBuf {
        self.workdir.join("encoder.ckpt")
    }

    pub fn history(&self) -> PathBuf {
        self.workdir.join("history.json")
    }

    pub fn head(&self) -> PathBuf {
        self.workdir.join("head.ckpt")
    }

    pub fn report(&self) -> PathBuf {
        self.workdir.join("report.json")
    }

    pub fn transfer_report(&self) -> PathBuf {
        self.workdir.join("transfer-report.json")
    }

    pub fn transfer_head(&self) -> PathBuf {
        self.workdir.join("transfer-head.ckpt")
    }
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is not set")))
}

fn encode_csv(path: &Path, schema: &DatasetSchema, state: &PreprocessorState) -> Result<EncodedDataset> {
    let records = load_csv(path, schema)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (samples, stats) = state.transform_all(&records);
    if stats.masked_missing > 0 {
        log::info!(
            "{}: {} missing categorical values encoded as zero",
            path.display(),
            stats.masked_missing
        );
    }
    Ok(EncodedDataset {
        meta: DatasetMeta {
            schema: schema.name.clone(),
            schema_fingerprint: schema.fingerprint(),
            class_names: schema.class_names.clone(),
            normal_class: schema.normal_class.clone(),
            width: state.width(),
        },
        samples,
    })
}

fn log_counts(label: &str, ds: &EncodedDataset) {
    log::info!("{label}: {} records, encoded width {}", ds.samples.len(), ds.meta.width);
    for (name, n) in ds.class_counts() {
        log::info!("  {name:<16} {n}");
    }
}

/// Fit min-max/one-hot encoding on the encoder set and encode both sets.
pub fn preprocess(cfg: &RunConfig) -> Result<PathBuf> {
    let encoder_csv = required(&cfg.preprocess.encoder_csv, "preprocess.encoder_csv")?;
    let schema = DatasetSchema::load(Path::new(&cfg.preprocess.schema))?;
    let layout = Layout::new(cfg);

    let records = load_csv(encoder_csv, &schema)?;
    let state = crate::dataio::fit_preprocessor(&records, &schema)?;
    for name in state.degenerate_features() {
        log::warn!("feature {name:?} is constant in the encoder set and encodes as 0");
    }
    state.save(&layout.preprocessor())?;
    let encoder_set = encode_csv(encoder_csv, &schema, &state)?;
    log_counts("encoder set", &encoder_set);
    encoder_set.save(&layout.encoder_set())?;

    let mut manifest = RunManifest::new("preprocess", cfg)
        .input(encoder_csv)?
        .output(&layout.preprocessor())?
        .output(&layout.encoder_set())?;
    if let Some(head_csv) = &cfg.preprocess.head_csv {
        let head_set = encode_csv(head_csv, &schema, &state)?;
        log_counts("head set", &head_set);
        head_set.save(&layout.head_set())?;
        manifest = manifest.input(head_csv)?.output(&layout.head_set())?;
    }
    manifest.write_beside(&layout.preprocessor())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct History {
    pub batch_size: usize,
    pub temperature: f64,
    pub mask_ratio: f64,
    pub train_samples: usize,
    pub heldout_samples: usize,
    pub epochs: Vec<EpochRecord>,
}

/// Contrastive pretraining on the encoder set, with a held-out part for
/// monitoring.
pub fn pretrain(cfg: &RunConfig) -> Result<History> {
    cfg.validate_pretrain()?;
    let layout = Layout::new(cfg);
    let data = EncodedDataset::load(&layout.encoder_set())?;
    let schema = if cfg.pretrain.mask_groups {
        let s = DatasetSchema::load(Path::new(&cfg.preprocess.schema))?;
        if s.fingerprint() != data.meta.schema_fingerprint {
            return Err(Error::SchemaMismatch(
                "encoder set was built with a different schema".into(),
            ));
        }
        Some(s)
    } else {
        None
    };
    let contrastive = cfg.contrastive(schema.as_ref())?;
    log::info!(
        "batch size {}, temperature {}, mask ratio {}, {} epochs",
        contrastive.batch_size,
        contrastive.temperature,
        contrastive.masking.ratio,
        contrastive.epochs
    );
    let (train, heldout) = holdout_split(&data.samples, 1.0 - cfg.pretrain.heldout_fraction, cfg.seed);
    let enc_cfg = EncoderConfig::preset(&cfg.pretrain.preset, data.meta.width)?;
    let (mut encoder, mut projector) = build_encoder(enc_cfg, cfg.seed)?;
    log::info!(
        "{} encoder: {} trainable parameters with projection",
        cfg.pretrain.preset,
        encoder.count_parameters() + projector.count_parameters()
    );
    let records = sscl::pretrain(&mut encoder, &mut projector, &train, &heldout, &contrastive)?;

    let checkpoint = EncoderCheckpoint {
        encoder,
        projector,
        extra: json!({
            "schema": data.meta.schema,
            "schema_fingerprint": data.meta.schema_fingerprint,
            "preprocessor_sha256": io::sha256_file(&layout.preprocessor()).ok(),
        }),
    };
    checkpoint.save(&layout.encoder())?;
    let history = History {
        batch_size: contrastive.batch_size,
        temperature: contrastive.temperature,
        mask_ratio: contrastive.masking.ratio,
        train_samples: train.len(),
        heldout_samples: heldout.len(),
        epochs: records,
    };
    let json = serde_json::to_string_pretty(&history).expect("history serialises");
    io::write_atomic(&layout.history(), json.as_bytes())?;
    RunManifest::new("pretrain", cfg)
        .input(&layout.encoder_set())?
        .output(&layout.encoder())?
        .output(&layout.history())?
        .write_beside(&layout.encoder())?;
    Ok(history)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeadProvenance {
    plan: SplitPlan,
    encoder_sha256: String,
    train_counts: Vec<usize>,
}

/// Train a classifier on the frozen encoder over the head set's training split.
pub fn train_head(cfg: &RunConfig, head_path: &Path) -> Result<HeadCheckpoint> {
    cfg.validate_head()?;
    let layout = Layout::new(cfg);
    let plan = cfg.split_plan()?;
    let head_cfg = cfg.head_config();
    let ck = EncoderCheckpoint::load(&layout.encoder())?;
    let data = EncodedDataset::load(&layout.head_set())?;
    let splits = sscl::head_splits(
        &data.samples,
        &data.meta.class_names,
        data.meta.normal_class.as_deref(),
        &plan,
    )?;
    let head = sscl::train_head(
        &ck.encoder,
        &ck.projector,
        &splits.train,
        splits.class_names.len(),
        &head_cfg,
    )?;
    let provenance = HeadProvenance {
        plan,
        encoder_sha256: io::sha256_file(&layout.encoder())?,
        train_counts: splits.train_counts(),
    };
    let out = HeadCheckpoint {
        head,
        meta: HeadMeta {
            representation: head_cfg.representation,
            class_names: splits.class_names,
            extra: serde_json::to_value(provenance).expect("provenance serialises"),
        },
    };
    out.save(head_path)?;
    RunManifest::new("train-head", cfg)
        .input(&layout.encoder())?
        .input(&layout.head_set())?
        .output(head_path)?
        .write_beside(head_path)?;
    Ok(out)
}

/// Score a trained head on the head set's test split.
pub fn evaluate(cfg: &RunConfig, head_path: &Path, report_path: &Path) -> Result<MetricsReport> {
    let layout = Layout::new(cfg);
    let ck = EncoderCheckpoint::load(&layout.encoder())?;
    let head = HeadCheckpoint::load(head_path)?;
    let provenance: HeadProvenance = serde_json::from_value(head.meta.extra.clone())
        .map_err(|e| Error::format(head_path, format!("missing training provenance: {e}")))?;
    if provenance.encoder_sha256 != io::sha256_file(&layout.encoder())? {
        return Err(Error::Config(format!(
            "{} was trained on a different encoder checkpoint",
            head_path.display()
        )));
    }
    let data = EncodedDataset::load(&layout.head_set())?;
    let splits = sscl::head_splits(
        &data.samples,
        &data.meta.class_names,
        data.meta.normal_class.as_deref(),
        &provenance.plan,
    )?;
    let report = sscl::evaluate_head(
        &ck.encoder,
        &ck.projector,
        &head.head,
        &splits.test,
        &splits.class_names,
    )?;
    io::write_atomic(report_path, report.to_json().as_bytes())?;
    RunManifest::new("evaluate", cfg)
        .input(&layout.encoder())?
        .input(head_path)?
        .input(&layout.head_set())?
        .output(report_path)?
        .write_beside(report_path)?;
    Ok(report)
}

/// Align a foreign dataset to the encoder's inputs, train a head on it and
/// score it.
pub fn transfer_eval(cfg: &RunConfig, report_path: &Path) -> Result<TransferReport> {
    cfg.validate_head()?;
    let t = &cfg.transfer;
    let target_schema_path = t
        .target_schema
        .as_deref()
        .ok_or_else(|| Error::Config("transfer.target_schema is not set".into()))?;
    let target_csv = required(&t.target_csv, "transfer.target_csv")?;
    let layout = Layout::new(cfg);
    let original = DatasetSchema::load(Path::new(&cfg.preprocess.schema))?;
    let target = DatasetSchema::load(Path::new(target_schema_path))?;
    let aliases = match &t.aliases {
        Some(p) => AliasTable::load(p)?,
        None => AliasTable::default(),
    };
    let map = transfer::build_alignment(&original, &target, &aliases)?;
    let stats = map.stats();
    log::info!(
        "alignment: {} mapped, {} masked, {} target positions omitted",
        stats.mapped,
        stats.masked,
        stats.omitted
    );
    let original_state = PreprocessorState::load(&layout.preprocessor())?;
    original_state.check_schema(&original)?;
    let ck = EncoderCheckpoint::load(&layout.encoder())?;

    let records = load_csv(target_csv, &target)?;
    let state = transfer::target_preprocessor(&records, &target, &original, &original_state, &aliases)?;
    let (samples, _) = state.transform_all(&records);
    let (head, report) = transfer::transfer_evaluate(
        &ck.encoder,
        &ck.projector,
        &map,
        &samples,
        &target.class_names,
        target.normal_class.as_deref(),
        &cfg.split_plan()?,
        &cfg.head_config(),
    )?;
    let head_path = layout.transfer_head();
    HeadCheckpoint {
        meta: HeadMeta {
            representation: head.representation,
            class_names: report.metrics.per_class.iter().map(|c| c.class.clone()).collect(),
            extra: json!({ "target_schema": target.name, "alignment": stats }),
        },
        head,
    }
    .save(&head_path)?;
    io::write_atomic(report_path, report.to_json().as_bytes())?;
    let mut manifest = RunManifest::new("transfer-eval", cfg)
        .input(&layout.encoder())?
        .input(&layout.preprocessor())?
        .input(target_csv)?;
    if let Some(p) = &t.aliases {
        manifest = manifest.input(p)?;
    }
    manifest
        .output(&head_path)?
        .output(report_path)?
        .write_beside(report_path)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRequest {
    pub out_dir: PathBuf,
    pub spec: SyntheticSpec,
    /// Leading share of rows written as the encoder set; the rest is the head set.
    pub encoder_fraction: f64,
    /// Number of features removed in the reduced target copy (0 = none).
    pub drop: usize,
}

/// Files written by [`generate_synthetic`], relative to the output directory.
pub const SYNTHETIC_ENCODER: &str = "synthetic-encoder";
pub const SYNTHETIC_HEAD: &str = "synthetic-head";
pub const SYNTHETIC_REDUCED: &str = "synthetic-reduced";

/// Write the two-blob data as encoder/head CSVs sharing one schema, plus an
/// optional reduced-feature copy of the head set with its own schema.
pub fn generate_synthetic(req: &SyntheticRequest) -> Result<Vec<PathBuf>> {
    if !(req.encoder_fraction > 0.0 && req.encoder_fraction < 1.0) {
        return Err(Error::Config("encoder_fraction must lie in (0, 1)".into()));
    }
    if req.drop >= req.spec.features {
        return Err(Error::Config("cannot drop every feature".into()));
    }
    let data = synthetic::generate(&req.spec)?;
    let cut = ((req.encoder_fraction * data.rows.len() as f64).round() as usize).clamp(1, data.rows.len() - 1);
    let part = |range: std::ops::Range<usize>| synthetic::SyntheticData {
        feature_names: data.feature_names.clone(),
        rows: data.rows[range.clone()].to_vec(),
        labels: data.labels[range].to_vec(),
    };
    let encoder_part = part(0..cut);
    let head_part = part(cut..data.rows.len());
    let dir = &req.out_dir;
    let schema_path = dir.join("synthetic.schema.toml");
    io::write_atomic(&schema_path, data.schema("synthetic").to_toml().as_bytes())?;
    let mut written = vec![schema_path];
    for (stem, d) in [(SYNTHETIC_ENCODER, &encoder_part), (SYNTHETIC_HEAD, &head_part)] {
        let p = dir.join(format!("{stem}.csv"));
        io::write_atomic(&p, &d.to_csv()?)?;
        written.push(p);
    }
    if req.drop > 0 {
        let mut r = rng::stream(req.spec.seed, "synthetic-drop");
        let mut picked = index::sample(&mut r, req.spec.features, req.drop).into_vec();
        picked.sort_unstable();
        let names: Vec<String> = picked.iter().map(|&i| data.feature_names[i].clone()).collect();
        log::info!("reduced copy drops {names:?}");
        head_part.without(&names).write(dir, SYNTHETIC_REDUCED)?;
        written.push(dir.join(format!("{SYNTHETIC_REDUCED}.csv")));
        written.push(dir.join(format!("{SYNTHETIC_REDUCED}.schema.toml")));
    }
    Ok(written)
}
