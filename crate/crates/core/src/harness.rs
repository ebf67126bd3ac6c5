//! Experiment protocols on top of the trainers: ablation plans over prompt
//! subsets, keyframe counts and seeds; result tables; run records; and
//! embedding export.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::autograd::Graph;
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::model::FtpModel;
use crate::prompt::{Prompt, PromptSet};
use crate::tensor::Tensor;
use crate::train::{run_stage1, run_stage2, Checkpoint, Metrics, Prepared, RunConfig, Stage1Outcome, Stage2Outcome};

/// The cross product of prompt subsets, keyframe counts and seeds. The
/// baseline (empty subset) is always part of the plan; it does not depend
/// on the keyframe count, so it runs once per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationPlan {
    pub subsets: Vec<PromptSet>,
    pub keyframes: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// Parses `"AB,CD,ABCD"`; duplicates are rejected.
pub fn parse_subsets(s: &str) -> Result<Vec<PromptSet>> {
    let mut out: Vec<PromptSet> = Vec::new();
    for part in s.split(',') {
        let set: PromptSet = part.trim().parse()?;
        if out.contains(&set) {
            return Err(Error::config(format!("duplicate prompt subset `{set}` in plan")));
        }
        out.push(set);
    }
    Ok(out)
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid {what} `{}`", p.trim())))
        })
        .collect()
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    parse_list(s, "seed")
}

pub fn parse_keyframes(s: &str) -> Result<Vec<usize>> {
    parse_list(s, "keyframe count")
}

/// One run of the plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub prompts: PromptSet,
    /// `None` for the baseline, which never describes keyframes.
    pub keyframes: Option<usize>,
    pub seed: u64,
}

impl AblationPlan {
    pub fn new(mut subsets: Vec<PromptSet>, keyframes: Vec<usize>, seeds: Vec<u64>) -> Result<Self> {
        for (i, s) in subsets.iter().enumerate() {
            if subsets[..i].contains(s) {
                return Err(Error::config(format!("duplicate prompt subset `{s}` in plan")));
            }
        }
        if !subsets.contains(&PromptSet::EMPTY) {
            subsets.insert(0, PromptSet::EMPTY);
        }
        if keyframes.is_empty() || seeds.is_empty() {
            return Err(Error::config("plan needs at least one keyframe count and one seed"));
        }
        for (i, k) in keyframes.iter().enumerate() {
            if keyframes[..i].contains(k) {
                return Err(Error::config(format!("duplicate keyframe count {k} in plan")));
            }
        }
        Ok(Self {
            subsets,
            keyframes,
            seeds,
        })
    }

    /// Cells in a fixed order: subset, then keyframe count, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &prompts in &self.subsets {
            let ks: Vec<Option<usize>> = if prompts.is_empty() {
                vec![None]
            } else {
                self.keyframes.iter().map(|&k| Some(k)).collect()
            };
            for k in ks {
                for &seed in &self.seeds {
                    out.push(Cell {
                        prompts,
                        keyframes: k,
                        seed,
                    });
                }
            }
        }
        out
    }
}

/// Everything a two-stage run produces.
#[derive(Clone, Debug)]
pub struct TwoStage {
    pub config: RunConfig,
    pub stage1: Option<(Stage1Outcome, Checkpoint)>,
    pub stage2: Stage2Outcome,
    pub checkpoint: Checkpoint,
}

pub fn stage1_checkpoint(cfg: &RunConfig, s1: &Stage1Outcome) -> Checkpoint {
    Checkpoint {
        stage: 1,
        model: s1.model.clone(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        prompts: cfg.prompts,
        keyframes: cfg.keyframes,
        epoch: cfg.stage1.epochs,
        parent: None,
    }
}

pub fn stage2_checkpoint(cfg: &RunConfig, s2: &Stage2Outcome, parent: Option<&Checkpoint>) -> Checkpoint {
    Checkpoint {
        stage: 2,
        model: s2.best.clone(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        prompts: cfg.prompts,
        keyframes: cfg.keyframes,
        epoch: s2.best_epoch,
        parent: parent.map(|p| p.content_hash()),
    }
}

/// Stage 1 (skipped for the empty prompt set) followed by stage 2, in memory.
pub fn run_two_stage(cfg: &RunConfig) -> Result<TwoStage> {
    let data = Prepared::new(cfg)?;
    let init = FtpModel::init(cfg.model_config(), cfg.seed)?;
    let (model, stage1) = if cfg.prompts.is_empty() {
        (init, None)
    } else {
        let s1 = run_stage1(cfg, &data, init)?;
        let ck = stage1_checkpoint(cfg, &s1);
        (s1.model.clone(), Some((s1, ck)))
    };
    let s2 = run_stage2(cfg, &data, model)?;
    let checkpoint = stage2_checkpoint(cfg, &s2, stage1.as_ref().map(|(_, c)| c));
    Ok(TwoStage {
        config: cfg.clone(),
        stage1,
        stage2: s2,
        checkpoint,
    })
}

/// Identity and outcome of one run. Re-running the recorded config
/// reproduces the metrics and hashes exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub prompts: PromptSet,
    pub keyframes: usize,
    pub stage1_hash: Option<String>,
    pub stage2_hash: String,
    pub best_epoch: usize,
    pub heldout: Metrics,
    pub stage1_first_loss: Option<f64>,
    pub stage1_final_loss: Option<f64>,
}

impl RunRecord {
    pub fn from_run(run: &TwoStage) -> Self {
        let s1 = run.stage1.as_ref();
        Self {
            config_hash: run.config.hash(),
            seed: run.config.seed,
            prompts: run.config.prompts,
            keyframes: run.config.keyframes,
            stage1_hash: s1.map(|(_, c)| c.content_hash()),
            stage2_hash: run.checkpoint.content_hash(),
            best_epoch: run.stage2.best_epoch,
            heldout: run.stage2.best_metrics.clone(),
            stage1_first_loss: s1.and_then(|(o, _)| o.epoch_losses.first().copied()),
            stage1_final_loss: s1.and_then(|(o, _)| o.epoch_losses.last().copied()),
        }
    }

    /// Manifest form; wall-clock time is deliberately absent so records
    /// of identical runs are byte-identical.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.push("config_hash", &self.config_hash);
        m.push("seed", self.seed);
        m.push("prompts", self.prompts);
        m.push("keyframes", self.keyframes);
        m.push("stage1_checkpoint", self.stage1_hash.as_deref().unwrap_or("none"));
        m.push("stage2_checkpoint", &self.stage2_hash);
        m.push("best_epoch", self.best_epoch);
        m.push("heldout.top1", self.heldout.top1);
        m.push("heldout.top5", self.heldout.top5);
        if let (Some(a), Some(b)) = (self.stage1_first_loss, self.stage1_final_loss) {
            m.push("stage1.first_epoch_loss", a);
            m.push("stage1.final_epoch_loss", b);
        }
        m
    }
}

/// Outcome of one plan cell; failures are kept, not propagated.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<RunRecord, String>,
}

/// Runs one cell of a plan against `base`.
pub fn run_cell(base: &RunConfig, cell: Cell) -> CellResult {
    let mut cfg = base.with_seed(cell.seed);
    cfg.prompts = cell.prompts;
    if let Some(k) = cell.keyframes {
        cfg.keyframes = k;
    }
    let outcome = cfg
        .validate()
        .and_then(|_| run_two_stage(&cfg))
        .map(|run| RunRecord::from_run(&run))
        .map_err(|e| e.to_string());
    CellResult { cell, outcome }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub prompts: PromptSet,
    pub keyframes: Option<usize>,
    pub runs: usize,
    pub failed: usize,
    pub top1_mean: f64,
    pub top1_sd: f64,
    pub top5_mean: f64,
    pub top5_sd: f64,
    pub top1_median: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates results by (subset, keyframes). Rows are sorted by subset
/// size, then mean top-1 (descending), then subset and keyframe count.
pub fn summarize(results: &[CellResult]) -> Vec<TableRow> {
    let mut keys: Vec<(PromptSet, Option<usize>)> = Vec::new();
    for r in results {
        let key = (r.cell.prompts, r.cell.keyframes);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut rows: Vec<TableRow> = keys
        .into_iter()
        .map(|(prompts, keyframes)| {
            let group: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.cell.prompts == prompts && r.cell.keyframes == keyframes)
                .collect();
            let ok: Vec<&RunRecord> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let top1: Vec<f64> = ok.iter().map(|r| r.heldout.top1).collect();
            let top5: Vec<f64> = ok.iter().map(|r| r.heldout.top5).collect();
            let (top1_mean, top1_sd) = mean_sd(&top1);
            let (top5_mean, top5_sd) = mean_sd(&top5);
            TableRow {
                prompts,
                keyframes,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                top1_mean,
                top1_sd,
                top5_mean,
                top5_sd,
                top1_median: median(&top1),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.prompts
            .len()
            .cmp(&b.prompts.len())
            .then(b.top1_mean.total_cmp(&a.top1_mean))
            .then(a.prompts.to_string().cmp(&b.prompts.to_string()))
            .then(a.keyframes.cmp(&b.keyframes))
    });
    rows
}

fn k_label(k: Option<usize>) -> String {
    k.map_or_else(|| "-".to_string(), |k| k.to_string())
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("prompts,size,keyframes,runs,failed,top1_mean,top1_sd,top1_median,top5_mean,top5_sd\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.prompts,
            r.prompts.len(),
            k_label(r.keyframes),
            r.runs,
            r.failed,
            r.top1_mean,
            r.top1_sd,
            r.top1_median,
            r.top5_mean,
            r.top5_sd
        );
    }
    s
}

/// Fixed-width text twin of [`table_csv`], percentages with one decimal.
pub fn table_text(rows: &[TableRow]) -> String {
    let header = ["prompts", "K", "runs", "failed", "top-1 (%)", "top-5 (%)"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.prompts.to_string(),
                k_label(r.keyframes),
                r.runs.to_string(),
                r.failed.to_string(),
                format!("{:.1} +- {:.1}", 100.0 * r.top1_mean, 100.0 * r.top1_sd),
                format!("{:.1} +- {:.1}", 100.0 * r.top5_mean, 100.0 * r.top5_sd),
            ]
        })
        .collect();
    let mut width = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(width)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(&header.map(String::from));
    s.push_str(&line(&width.map(|w| "-".repeat(w))));
    for row in &body {
        s.push_str(&line(row));
    }
    s
}

/// Per-cell CSV: one line per run, failures carry their message.
pub fn cells_csv(results: &[CellResult]) -> String {
    let mut s = String::from("prompts,keyframes,seed,status,top1,top5,best_epoch,stage2_checkpoint\n");
    for r in results {
        let c = &r.cell;
        match &r.outcome {
            Ok(rec) => {
                let _ = writeln!(
                    s,
                    "{},{},{},ok,{},{},{},{}",
                    c.prompts,
                    k_label(c.keyframes),
                    c.seed,
                    rec.heldout.top1,
                    rec.heldout.top5,
                    rec.best_epoch,
                    rec.stage2_hash
                );
            }
            Err(e) => {
                let _ = writeln!(
                    s,
                    "{},{},{},failed: {},,,,",
                    c.prompts,
                    k_label(c.keyframes),
                    c.seed,
                    e.replace([',', '\n'], ";")
                );
            }
        }
    }
    s
}

/// Which activation to export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    /// Mean-pooled tokens after both transformer blocks, `[D]` per sample.
    PreClassifier,
    /// Flattened processor output of one prompt, `[(T + N) * D]`.
    Processor(Prompt),
}

impl FromStr for Layer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre_classifier" => Ok(Layer::PreClassifier),
            _ => s
                .strip_prefix('v')
                .and_then(|i| i.parse::<usize>().ok())
                .filter(|i| (1..=4).contains(i))
                .map(|i| Layer::Processor(Prompt::from_index(i).expect("in range")))
                .ok_or_else(|| Error::config(format!("unknown layer `{s}` (pre_classifier|v1|v2|v3|v4)"))),
        }
    }
}

/// One row per feature map.
pub fn export_embeddings(model: &FtpModel, maps: &[Tensor], layer: Layer, prompts: PromptSet) -> Result<Tensor> {
    let mut rows = Vec::new();
    let mut width = 0;
    for m in maps {
        let row = match layer {
            Layer::PreClassifier => {
                let mut g = Graph::new();
                let pv = model.bind(&mut g);
                let mv = g.constant(m.clone());
                let e = model.embedding(&mut g, &pv, mv, prompts)?;
                g.value(e).clone()
            }
            Layer::Processor(p) => model.spatio_temporal(m, p)?,
        };
        width = row.len();
        rows.extend_from_slice(row.data());
    }
    Tensor::new(vec![maps.len(), width], rows)
}

pub fn labels_csv(labels: &[usize]) -> String {
    let mut s = String::from("row,label\n");
    for (i, y) in labels.iter().enumerate() {
        let _ = writeln!(s, "{i},{y}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(top1: f64) -> RunRecord {
        RunRecord {
            config_hash: "c".into(),
            seed: 1,
            prompts: PromptSet::EMPTY,
            keyframes: 5,
            stage1_hash: None,
            stage2_hash: "h".into(),
            best_epoch: 1,
            heldout: Metrics {
                top1,
                top5: top1.max(0.5),
                per_class: vec![],
                samples: 10,
            },
            stage1_first_loss: None,
            stage1_final_loss: None,
        }
    }

    #[test]
    fn plan_counts_and_baseline() {
        let subsets = parse_subsets("none,A,ABCD").unwrap();
        let plan = AblationPlan::new(subsets, vec![5], vec![1, 2, 3]).unwrap();
        assert_eq!(plan.cells().len(), 9);
        let plan = AblationPlan::new(parse_subsets("AB,CD").unwrap(), vec![5], vec![1]).unwrap();
        assert_eq!(plan.subsets[0], PromptSet::EMPTY);
        assert_eq!(plan.cells().len(), 3);
    }

    #[test]
    fn baseline_runs_once_per_seed_across_keyframes() {
        let plan = AblationPlan::new(vec![PromptSet::ALL], vec![1, 3, 5, 7], vec![1, 2]).unwrap();
        let cells = plan.cells();
        assert_eq!(cells.len(), 2 + 8);
        assert_eq!(cells.iter().filter(|c| c.keyframes.is_none()).count(), 2);
    }

    #[test]
    fn duplicates_are_rejected() {
        assert!(parse_subsets("AB,CD,BA").is_err());
        assert!(AblationPlan::new(vec![PromptSet::ALL, PromptSet::ALL], vec![5], vec![1]).is_err());
        assert!(AblationPlan::new(vec![PromptSet::ALL], vec![5, 5], vec![1]).is_err());
    }

    #[test]
    fn summary_sorts_by_size_then_accuracy() {
        let mk = |p: &str, seed, top1| CellResult {
            cell: Cell {
                prompts: p.parse().unwrap(),
                keyframes: if p == "none" { None } else { Some(5) },
                seed,
            },
            outcome: Ok(record(top1)),
        };
        let results = vec![
            mk("ABCD", 1, 0.9),
            mk("A", 1, 0.5),
            mk("A", 2, 0.7),
            mk("B", 1, 0.8),
            mk("none", 1, 0.4),
            CellResult {
                cell: Cell {
                    prompts: "B".parse().unwrap(),
                    keyframes: Some(5),
                    seed: 2,
                },
                outcome: Err("boom".into()),
            },
        ];
        let rows = summarize(&results);
        let order: Vec<String> = rows.iter().map(|r| r.prompts.to_string()).collect();
        assert_eq!(order, ["none", "B", "A", "ABCD"]);
        assert!((rows[2].top1_mean - 0.6).abs() < 1e-12);
        assert!((rows[2].top1_sd - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(rows[1].failed, 1);
        assert!(rows.iter().all(|r| r.top5_mean >= r.top1_mean));
        let text = table_text(&rows);
        assert!(text.lines().all(|l| !l.ends_with(' ')));
        assert_eq!(table_csv(&rows).lines().count(), 5);
        assert!(cells_csv(&results).contains("failed: boom"));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn layer_names() {
        assert_eq!("pre_classifier".parse::<Layer>().unwrap(), Layer::PreClassifier);
        assert_eq!("v3".parse::<Layer>().unwrap(), Layer::Processor(Prompt::Description));
        assert!(matches!("v5".parse::<Layer>(), Err(Error::Config { .. })));
    }
}
