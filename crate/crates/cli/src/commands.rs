use std::fs;
use std::path::Path;
use std::time::Instant;

use ftp_core::harness::{
    cells_csv, export_embeddings, labels_csv, parse_keyframes, parse_seeds, parse_subsets, run_cell,
    stage1_checkpoint, stage2_checkpoint, summarize, table_csv, table_text, AblationPlan, CellResult, Layer,
    RunRecord,
};
use ftp_core::train::{append_csv, evaluate, run_stage1, run_stage2, Checkpoint, Prepared, RunConfig, TraceRow};
use ftp_core::world::{keyframes_of, load_dataset, save_dataset, Split, SyntheticVideo, World};
use ftp_core::{Error, FtpModel, PromptSet, Result, Tensor};
use rayon::prelude::*;

use crate::Common;

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::desk(),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.finish()?;
    Ok(cfg)
}

fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    if path.exists() {
        fs::remove_file(path)?;
    }
    append_csv(path, rows)
}

fn write_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    cfg.to_manifest().write(&out.join("config.txt"))
}

fn fresh_checkpoint_dir(out: &Path) -> Result<std::path::PathBuf> {
    let dir = out.join("checkpoint");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn check_compatible(model: &FtpModel, cfg: &RunConfig) -> Result<()> {
    let want = cfg.model_config();
    let got = &model.config;
    if got.feature_dims() != want.feature_dims() || got.classes != want.classes {
        return Err(Error::Shape(format!(
            "checkpoint expects feature maps {:?} over {} classes, dataset has {:?} over {}",
            got.feature_dims(),
            got.classes,
            want.feature_dims(),
            want.classes
        )));
    }
    Ok(())
}

pub fn stage1(common: &Common, out: &Path, prompts: Option<&str>, k: Option<usize>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(p) = prompts {
        cfg.prompts = p.parse()?;
    }
    if let Some(k) = k {
        cfg.keyframes = k;
    }
    cfg.validate()?;
    if cfg.prompts.is_empty() {
        return Err(Error::config("stage 1 needs at least one prompt"));
    }
    let started = Instant::now();
    let data = Prepared::new(&cfg)?;
    let model = FtpModel::init(cfg.model_config(), cfg.seed)?;
    let outcome = run_stage1(&cfg, &data, model)?;
    fs::create_dir_all(out)?;
    let ck = stage1_checkpoint(&cfg, &outcome);
    let hash = ck.save(&fresh_checkpoint_dir(out)?)?;
    write_trace(&out.join("trace.csv"), &outcome.trace)?;
    write_config(out, &cfg)?;
    let first = outcome.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("stage1 prompts={} keyframes={} seed={}", cfg.prompts, cfg.keyframes, cfg.seed);
    println!("info_nce first_epoch={first:.6} final_epoch={last:.6}");
    println!("checkpoint {} ({})", out.join("checkpoint").display(), hash);
    eprintln!("elapsed {:.2?}", started.elapsed());
    Ok(())
}

pub fn stage2(common: &Common, out: &Path, checkpoint: Option<&Path>, no_ftp: bool) -> Result<()> {
    let mut cfg = load_config(common)?;
    let parent = match (checkpoint, no_ftp) {
        (Some(dir), _) => {
            let ck = Checkpoint::load(dir)?;
            if ck.stage != 1 {
                return Err(Error::config(format!(
                    "{} is a stage-{} checkpoint; stage 2 starts from stage 1",
                    dir.display(),
                    ck.stage
                )));
            }
            check_compatible(&ck.model, &cfg)?;
            cfg.prompts = ck.prompts;
            cfg.keyframes = ck.keyframes;
            Some(ck)
        }
        (None, true) => {
            cfg.prompts = PromptSet::EMPTY;
            None
        }
        (None, false) => {
            return Err(Error::config(
                "stage 2 needs a stage-1 `--checkpoint`, or `--no-ftp` for the baseline",
            ))
        }
    };
    let started = Instant::now();
    let data = Prepared::new(&cfg)?;
    let model = match &parent {
        Some(ck) => ck.model.clone(),
        None => FtpModel::init(cfg.model_config(), cfg.seed)?,
    };
    let outcome = run_stage2(&cfg, &data, model)?;
    fs::create_dir_all(out)?;
    let ck = stage2_checkpoint(&cfg, &outcome, parent.as_ref());
    let hash = ck.save(&fresh_checkpoint_dir(out)?)?;
    write_trace(&out.join("trace.csv"), &outcome.trace)?;
    write_config(out, &cfg)?;
    let record = RunRecord {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        prompts: cfg.prompts,
        keyframes: cfg.keyframes,
        stage1_hash: parent.as_ref().map(|p| p.content_hash()),
        stage2_hash: hash.clone(),
        best_epoch: outcome.best_epoch,
        heldout: outcome.best_metrics.clone(),
        stage1_first_loss: None,
        stage1_final_loss: None,
    };
    record.to_manifest().write(&out.join("record.txt"))?;
    println!("stage2 {} seed={}", ck.provenance(), cfg.seed);
    println!(
        "best epoch {}: heldout top1={:.4} top5={:.4}",
        outcome.best_epoch, outcome.best_metrics.top1, outcome.best_metrics.top5
    );
    println!("checkpoint {} ({})", out.join("checkpoint").display(), hash);
    eprintln!("elapsed {:.2?}", started.elapsed());
    Ok(())
}

/// Feature maps and labels of one split, from a saved dataset or
/// regenerated from the config.
fn split_maps(cfg: &RunConfig, dataset: Option<&Path>, split: &str) -> Result<(Vec<Tensor>, Vec<usize>)> {
    let split: Split = split.parse()?;
    let world = World::new(cfg.world.clone())?;
    let videos: Vec<SyntheticVideo> = match dataset {
        Some(dir) => load_dataset(dir, split.name(), &cfg.world)?,
        None => {
            let n = match split {
                Split::Train => cfg.train_per_class,
                Split::Heldout => cfg.heldout_per_class,
            };
            world.generate(split, n)?
        }
    };
    let maps = videos
        .iter()
        .map(|v| world.stubs().visual_encode(&v.frames))
        .collect::<Result<Vec<_>>>()?;
    Ok((maps, videos.iter().map(|v| v.label).collect()))
}

pub fn eval(common: &Common, checkpoint: &Path, dataset: Option<&Path>, split: &str, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let ck = Checkpoint::load(checkpoint)?;
    check_compatible(&ck.model, &cfg)?;
    let (maps, labels) = split_maps(&cfg, dataset, split)?;
    let m = evaluate(&ck.model, &maps, &labels, ck.prompts)?;
    let mut report = ftp_core::manifest::Manifest::new();
    report.push("checkpoint", ck.content_hash());
    report.push("split", split);
    report.push("samples", m.samples);
    report.push("top1", m.top1);
    report.push("top5", m.top5);
    for (c, acc) in m.per_class.iter().enumerate() {
        report.push(&format!("class.{c}"), acc);
    }
    print!("{}", report.render());
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        report.write(&dir.join("metrics.txt"))?;
    }
    Ok(())
}

fn threads() -> Result<usize> {
    match std::env::var("FTP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(format!("FTP_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn record_name(r: &CellResult) -> String {
    let k = r.cell.keyframes.map_or_else(|| "-".to_string(), |k| k.to_string());
    format!("{}_k{}_s{}.txt", r.cell.prompts, k, r.cell.seed)
}

pub fn ablate(common: &Common, out: &Path, prompts: &str, k: &str, seeds: &str) -> Result<()> {
    let cfg = load_config(common)?;
    let plan = AblationPlan::new(parse_subsets(prompts)?, parse_keyframes(k)?, parse_seeds(seeds)?)?;
    let cells = plan.cells();
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| cells.par_iter().map(|&c| run_cell(&cfg, c)).collect());

    fs::create_dir_all(out.join("records"))?;
    for r in &results {
        if let Ok(rec) = &r.outcome {
            rec.to_manifest().write(&out.join("records").join(record_name(r)))?;
        }
    }
    let rows = summarize(&results);
    fs::write(out.join("table.csv"), table_csv(&rows))?;
    let text = table_text(&rows);
    fs::write(out.join("table.txt"), &text)?;
    fs::write(out.join("cells.csv"), cells_csv(&results))?;
    write_config(out, &cfg)?;
    print!("{text}");
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see cells.csv", results.len());
    }
    eprintln!("{} cells in {:.2?}", results.len(), started.elapsed());
    Ok(())
}

pub fn export(
    common: &Common,
    checkpoint: &Path,
    layer: &str,
    dataset: Option<&Path>,
    split: &str,
    out: &Path,
) -> Result<()> {
    let layer: Layer = layer.parse()?;
    let cfg = load_config(common)?;
    let ck = Checkpoint::load(checkpoint)?;
    check_compatible(&ck.model, &cfg)?;
    let (maps, labels) = split_maps(&cfg, dataset, split)?;
    let emb = export_embeddings(&ck.model, &maps, layer, ck.prompts)?;
    fs::create_dir_all(out)?;
    ftp_core::ftpt::write(&out.join("embeddings.ftpt"), &emb)?;
    fs::write(out.join("labels.csv"), labels_csv(&labels))?;
    println!("{} rows of width {} to {}", emb.dims()[0], emb.dims()[1], out.display());
    Ok(())
}

pub fn keyframes(
    common: &Common,
    index: Option<usize>,
    video: Option<&Path>,
    split: &str,
    k: usize,
    out: &Path,
) -> Result<()> {
    let clip = match (video, index) {
        (Some(path), _) => ftp_core::ftpt::read(path)?,
        (None, index) => {
            let cfg = load_config(common)?;
            let split: Split = split.parse()?;
            let n = match split {
                Split::Train => cfg.train_per_class,
                Split::Heldout => cfg.heldout_per_class,
            };
            let mut videos = World::new(cfg.world.clone())?.generate(split, n)?;
            let i = index.unwrap_or(0);
            if i >= videos.len() {
                return Err(Error::config(format!(
                    "video index {i} out of range for {} {} videos",
                    videos.len(),
                    split.name()
                )));
            }
            videos.swap_remove(i).frames
        }
    };
    let kf = keyframes_of(&clip, k)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ftp_core::ftpt::write(out, &kf.pixels)?;
    let idx: Vec<String> = kf.indices.iter().map(|i| i.to_string()).collect();
    println!("indices {}", idx.join(","));
    println!("image {:?} to {}", kf.pixels.dims(), out.display());
    Ok(())
}

pub fn dataset(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let world = World::new(cfg.world.clone())?;
    let train = world.generate(Split::Train, cfg.train_per_class)?;
    let heldout = world.generate(Split::Heldout, cfg.heldout_per_class)?;
    let files = save_dataset(out, &cfg.world, world.stubs(), &[("train", &train), ("heldout", &heldout)])?;
    println!("{} files in {}", files.files.len(), files.dir.display());
    Ok(())
}
