//! File-level operations behind the `owah` command: dataset generation,
//! network training, evaluation and record replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use owah::baselines::{GpnTag, HelperResources, HelperSpec};
use owah::bench::{generate_dataset, run_eval_with_records, Dataset, DatasetManifest, EvalConfig, EvalReport, Split};
use owah::episode::EpisodeRecord;
use owah::nopa::NopaConfig;
use owah::gpn::{train_gpn, GpnParams, TrainConfig, EMBED_DIM, HIDDEN_DIM};
use owah::worldsim::SceneGraph;

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "OWAH_DATA_DIR";

pub fn dataset_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{split}.json"))
}

pub fn gpn_path(dir: &Path, tag: GpnTag) -> PathBuf {
    dir.join(match tag {
        GpnTag::Large => "gpn_large.bin",
        GpnTag::Small => "gpn_small.bin",
    })
}

/// Generates a split and writes it to the data directory.
pub fn gen_data(dir: &Path, split: Split, count: usize, seed: u64) -> Result<Dataset> {
    let manifest = DatasetManifest::new(split, count, seed);
    let data = generate_dataset(&manifest)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dataset_path(dir, split);
    fs::write(&path, data.to_json()).with_context(|| format!("writing {}", path.display()))?;
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Dataset::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub examples: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Held-out loss before and after training.
    pub heldout: Option<(f64, f64)>,
}

/// Trains on `dataset`, writes the checkpoint to `out`, and scores the
/// held-out set when given.
pub fn train(dataset: &Path, heldout: Option<&Path>, cfg: &TrainConfig, out: &Path) -> Result<TrainSummary> {
    let examples = load_dataset(dataset)?.gpn_examples()?;
    let outcome = train_gpn(&examples, EMBED_DIM, HIDDEN_DIM, cfg)?;
    let heldout = match heldout {
        Some(p) => {
            let test = load_dataset(p)?.gpn_examples()?;
            let fresh = GpnParams::init(outcome.params.rows(), EMBED_DIM, HIDDEN_DIM, cfg.seed);
            Some((fresh.loss(&test)?, outcome.params.loss(&test)?))
        }
        None => None,
    };
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, outcome.params.to_bytes()).with_context(|| format!("writing {}", out.display()))?;
    Ok(TrainSummary {
        examples: examples.len(),
        initial_loss: outcome.initial_loss,
        final_loss: outcome.epoch_losses.last().copied().unwrap_or(outcome.initial_loss),
        heldout,
    })
}

pub fn load_gpn(path: &Path) -> Result<GpnParams> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    GpnParams::from_bytes(&bytes, None).with_context(|| format!("loading {}", path.display()))
}

/// Loads whichever checkpoints exist in the data directory.
pub fn load_resources(dir: &Path) -> Result<HelperResources> {
    let load = |tag| -> Result<Option<Arc<GpnParams>>> {
        let p = gpn_path(dir, tag);
        Ok(if p.exists() { Some(Arc::new(load_gpn(&p)?)) } else { None })
    };
    Ok(HelperResources { gpn_large: load(GpnTag::Large)?, gpn_small: load(GpnTag::Small)?, ..Default::default() })
}

/// Evaluates a helper on a split stored in the data directory, returning
/// the report and every episode record.
pub fn eval(
    dir: &Path,
    spec: &HelperSpec,
    split: Split,
    runs: u32,
    seed: u64,
    nopa: NopaConfig,
) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    let data = load_dataset(&dataset_path(dir, split))?;
    let resources = HelperResources { nopa, ..load_resources(dir)? };
    if spec.needs_gpn() {
        let p = gpn_path(dir, spec.gpn);
        if !p.exists() {
            bail!("{spec} needs a trained network at {}; run `owah train-gpn` first", p.display());
        }
    }
    let cfg = EvalConfig { runs, seed, resources, ..Default::default() };
    Ok(run_eval_with_records(&data, spec, &cfg)?)
}

/// Writes the JSON report and its F1 curve CSV next to each other.
pub fn write_report(report: &EvalReport, out: &Path) -> Result<()> {
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
    fs::write(out.with_extension("csv"), report.f1_csv())?;
    Ok(())
}

/// Writes one `<episode>_<index>.jsonl` file per record, numbered in
/// report order.
pub fn write_records(records: &[EpisodeRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, r) in records.iter().enumerate() {
        let path = dir.join(format!("{}_{i:03}.jsonl", r.header.episode));
        fs::write(&path, r.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Replays a JSONL episode record, checking every state hash.
pub fn replay(path: &Path) -> Result<(EpisodeRecord, SceneGraph)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record = EpisodeRecord::from_jsonl(&text)?;
    let last = record.replay()?;
    Ok((record, last))
}
