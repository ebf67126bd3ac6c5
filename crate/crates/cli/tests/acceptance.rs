//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ftp_core::gradcheck::{end_to_end_cross_entropy, end_to_end_info_nce, op_suite};
use ftp_core::harness::median;
use ftp_core::model::scope;
use ftp_core::objectives::{cross_entropy_smoothed, InfoNce};
use ftp_core::train::{run_stage1, Checkpoint, Prepared, RunConfig};
use ftp_core::world::{extract_keyframes, Split, World};
use ftp_core::{FtpModel, Graph, ParamGroup, PromptSet, Tensor};

const FTP: &str = env!("CARGO_BIN_EXE_ftp");
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ftp(args: &[&str]) -> (i32, String) {
    let out = Command::new(FTP)
        .args(args)
        .env("FTP_THREADS", std::env::var("FTP_THREADS").unwrap_or_else(|_| "4".into()))
        .output()
        .expect("spawn ftp");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn gradients() -> Outcome {
    const TOL: f64 = 1e-3;
    let t0 = Instant::now();
    let mut worst = ("", 0.0f64);
    let mut record = |name: &'static str, err: f64| {
        if !(err < worst.1) {
            worst = (name, err);
        }
    };
    for (name, err) in op_suite(1).expect("op suite") {
        record(name, err);
    }
    record("forward+info_nce", end_to_end_info_nce(1).expect("info_nce check"));
    record("forward+smoothed_ce", end_to_end_cross_entropy(1).expect("ce check"));
    let took = t0.elapsed();
    outcome(
        worst.1 < TOL && took < Duration::from_secs(60),
        format!("worst relative error {:.2e} ({}), {:.1?}", worst.1, worst.0, took),
    )
}

fn structural() -> Outcome {
    let mut fails = Vec::new();
    let cfg = RunConfig::desk().with_seed(11);
    let mut model = FtpModel::init(cfg.model_config(), 11).expect("init");
    // non-trivial integration weights so the zero-input identity is meaningful
    let mut r = ftp_core::rng::stream(11, &[1]);
    for (id, name) in model.params.iter().map(|(id, n, _)| (id, n.to_string())).collect::<Vec<_>>() {
        if model.params.group(id) == ParamGroup::Integration && name.ends_with("weight") {
            let dims = model.params.get(id).dims().to_vec();
            model.params.set(id, Tensor::randn(&dims, 1.0, &mut r)).expect("set");
        }
    }
    let world = World::new(cfg.world.clone()).expect("world");
    let videos = world.generate(Split::Train, 1).expect("videos");
    let m = world.stubs().visual_encode(&videos[0].frames).expect("encode");

    let mut g = Graph::new();
    let pv = model.bind(&mut g);
    let mv = g.constant(m.clone());
    let rows = cfg.world.rows();
    let zeros: Vec<Option<_>> = (0..4)
        .map(|_| Some(g.constant(Tensor::zeros(&[rows, cfg.world.dim]))))
        .collect();
    let f = model.integrate(&mut g, &pv, mv, &zeros).expect("integrate");
    if g.value(f).payload_bytes() != m.payload_bytes() {
        fails.push("integrate(m, 0) != m");
    }

    let mut g = Graph::new();
    let pv = model.bind(&mut g);
    let mv = g.constant(m.clone());
    let a = model.forward_logits(&mut g, &pv, mv, PromptSet::EMPTY).expect("forward");
    let b = model.classify_logits(&mut g, &pv, mv).expect("classify");
    if g.value(a).payload_bytes() != g.value(b).payload_bytes() {
        fails.push("empty-prompt forward != classify");
    }

    let (h, w) = (cfg.world.height, cfg.world.width);
    for v in &videos {
        for k in 1..=cfg.world.frames {
            let kf = extract_keyframes(v, k).expect("keyframes");
            for (j, &fi) in kf.indices.iter().enumerate() {
                for y in 0..h {
                    let band = &kf.pixels.data()[(y * w * k + j * w) * 3..(y * w * k + (j + 1) * w) * 3];
                    let src = &v.frames.data()[((fi * h + y) * w) * 3..((fi * h + y + 1) * w) * 3];
                    if band.iter().zip(src).any(|(a, b)| a.to_bits() != b.to_bits()) {
                        fails.push("keyframe band differs from source frame");
                    }
                }
            }
        }
    }

    let mut r = ftp_core::rng::stream(12, &[2]);
    let x = Tensor::<f32>::randn(&[3, 4, 5], 1.0, &mut r);
    let y = Tensor::<f32>::randn(&[3, 4, 5], 1.0, &mut r);
    for axis in 0..3 {
        let c = x.concat(&y, axis).expect("concat");
        let n = x.dims()[axis];
        let back_x = c.narrow(axis, 0, n).expect("narrow");
        let back_y = c.narrow(axis, n, n).expect("narrow");
        if back_x.payload_bytes() != x.payload_bytes() || back_y.payload_bytes() != y.payload_bytes() {
            fails.push("concat/narrow round trip");
        }
    }
    fails.dedup();
    outcome(fails.is_empty(), if fails.is_empty() { "all identities bit-exact".into() } else { fails.join("; ") })
}

fn loss_analytics() -> Outcome {
    let nce = InfoNce::default();
    let b = 6;
    let same = Tensor::<f64>::from_fn(&[b, 8], |i| ((i % 8) as f64).cos());
    let identical = nce.loss(&same, &same).expect("loss");
    let e1 = (identical - (b as f64).ln()).abs();

    let c = 10;
    let uniform = Tensor::<f64>::full(&[4, c], 1.0 / c as f64);
    let ce = cross_entropy_smoothed(&uniform, &[0, 3, 5, 9], 0.1).expect("ce");
    let e2 = (ce - (c as f64).ln()).abs();

    let eye = Tensor::<f64>::identity(4);
    let ortho = nce.loss(&eye, &eye).expect("loss");
    let closed = (1.0 + 3.0 * (-1.0f64 / 0.07).exp()).ln();
    let e3 = (ortho - closed).abs();
    outcome(
        e1 < 1e-6 && e2 < 1e-12 && e3 < 1e-6,
        format!("|nce-lnB| {e1:.1e}, |ce-lnC| {e2:.1e}, |nce-closed| {e3:.1e}"),
    )
}

fn smoke_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join(format!("smoke{}.txt", extra.len()));
    let text = format!(
        "seed = 5\nstage1.epochs = 5\nstage1.warmup_epochs = 1\nstage2.epochs = 5\nstage2.warmup_epochs = 1\n{extra}"
    );
    fs::write(&path, text).expect("write config");
    path
}

fn params_of(ck: &Checkpoint, pred: impl Fn(ParamGroup) -> bool) -> BTreeMap<String, Vec<u8>> {
    ck.model
        .params
        .iter()
        .filter(|(id, _, _)| pred(ck.model.params.group(*id)))
        .map(|(_, n, t)| (n.to_string(), t.payload_bytes()))
        .collect()
}

fn freeze() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg_path = smoke_config(tmp.path(), "");
    let cfg = RunConfig::read(&cfg_path).expect("config");
    let mut fails = Vec::new();

    // stubs are only ever borrowed by the trainer
    let data = Prepared::new(&cfg).expect("data");
    let before = data.world.stubs().checksums();
    run_stage1(&cfg, &data, FtpModel::init(cfg.model_config(), cfg.seed).unwrap()).expect("stage1");
    if data.world.stubs().checksums() != before {
        fails.push("stub checksums changed in stage 1".to_string());
    }

    let s1 = tmp.path().join("s1");
    let s2 = tmp.path().join("s2");
    let (c1, o1) = ftp(&["stage1", "--config", p(&cfg_path), "--out", p(&s1)]);
    let (c2, o2) = ftp(&["stage2", "--config", p(&cfg_path), "--out", p(&s2), "--checkpoint", p(&s1.join("checkpoint"))]);
    if c1 != 0 || c2 != 0 {
        fails.push(format!("smoke runs exited {c1}/{c2}: {o1}{o2}"));
    } else {
        let init = Checkpoint {
            stage: 0,
            model: FtpModel::init(cfg.model_config(), cfg.seed).unwrap(),
            seed: cfg.seed,
            config_hash: String::new(),
            prompts: cfg.prompts,
            keyframes: cfg.keyframes,
            epoch: 0,
            parent: None,
        };
        let k1 = Checkpoint::load(&s1.join("checkpoint")).expect("load s1");
        let k2 = Checkpoint::load(&s2.join("checkpoint")).expect("load s2");
        let not_proc = |g| !matches!(g, ParamGroup::Processor(_));
        let proc = |g| matches!(g, ParamGroup::Processor(_));
        if params_of(&k1, not_proc) != params_of(&init, not_proc) {
            fails.push("stage 1 moved integration/classifier parameters".into());
        }
        if params_of(&k1, proc) == params_of(&init, proc) {
            fails.push("stage 1 did not train the processors".into());
        }
        if params_of(&k2, proc) != params_of(&k1, proc) {
            fails.push("stage 2 moved processor parameters".into());
        }
    }

    let bad = smoke_config(tmp.path(), "fault_injection = write_frozen\n");
    let (f1, _) = ftp(&["stage1", "--config", p(&bad), "--out", p(&tmp.path().join("f1"))]);
    let (f2, _) = ftp(&["stage2", "--config", p(&bad), "--out", p(&tmp.path().join("f2")), "--checkpoint", p(&s1.join("checkpoint"))]);
    if f1 != 3 || f2 != 3 {
        fails.push(format!("injected frozen write exited {f1}/{f2}, expected 3/3"));
    }
    outcome(
        fails.is_empty(),
        if fails.is_empty() { "frozen groups checksum-identical; injected writes exit 3".into() } else { fails.join("; ") },
    )
}

fn alignment() -> Outcome {
    let t0 = Instant::now();
    let ratios: Vec<f64> = SEEDS
        .iter()
        .map(|&s| {
            let cfg = RunConfig::desk().with_seed(s);
            let data = Prepared::new(&cfg).expect("data");
            let model = FtpModel::init(cfg.model_config(), s).expect("init");
            let out = run_stage1(&cfg, &data, model).expect("stage1");
            out.epoch_losses.last().unwrap() / out.epoch_losses.first().unwrap()
        })
        .collect();
    let med = median(&ratios);
    let took = t0.elapsed();
    outcome(
        med <= 0.70 && took < Duration::from_secs(300),
        format!("median final/first InfoNCE {med:.3} (need <= 0.70), {took:.1?}"),
    )
}

/// `(prompts, keyframes) -> top-1 per seed` from an ablation's cells.csv.
fn read_cells(path: &Path) -> BTreeMap<(String, String), Vec<f64>> {
    let text = fs::read_to_string(path).expect("cells.csv");
    let mut out: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[3] == "ok" {
            out.entry((f[0].into(), f[1].into())).or_default().push(f[4].parse().expect("top1"));
        }
    }
    out
}

fn ablate(out: &Path, prompts: &str, k: &str) -> (i32, String) {
    ftp(&["ablate", "--out", p(out), "--prompts", prompts, "--k", k, "--seeds", "1,2,3,4,5"])
}

fn ftp_benefit() -> Outcome {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().expect("tempdir");
    let (code, log) = ablate(tmp.path(), "none,A,B,C,D,AB,AC,AD,BC,BD,CD,ABCD", "5");
    if code != 0 {
        return outcome(false, format!("ablate exited {code}: {log}"));
    }
    let cells = read_cells(&tmp.path().join("cells.csv"));
    let by_subset = |s: &str| -> Vec<f64> {
        cells
            .iter()
            .find(|((p, _), _)| p == s)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    };
    let base = by_subset("none");
    let full = by_subset("ABCD");
    if base.len() != 5 || full.len() != 5 {
        return outcome(false, "missing seeds in ablation output");
    }
    let gain = median(&full) - median(&base);
    // per seed, the mean over all subsets of a size; then the median over seeds
    let size_curve: Vec<f64> = [0usize, 1, 2, 4]
        .iter()
        .map(|&size| {
            let groups: Vec<&Vec<f64>> = cells
                .iter()
                .filter(|((p, _), _)| p.parse::<PromptSet>().map(|s| s.len()).ok() == Some(size))
                .map(|(_, v)| v)
                .collect();
            let per_seed: Vec<f64> = (0..SEEDS.len())
                .map(|i| groups.iter().map(|g| g[i]).sum::<f64>() / groups.len() as f64)
                .collect();
            median(&per_seed)
        })
        .collect();
    let monotone = size_curve.windows(2).all(|w| w[1] >= w[0]);
    let took = t0.elapsed();
    let curve: Vec<String> = size_curve.iter().map(|v| format!("{:.3}", v)).collect();
    outcome(
        gain >= 0.05 && monotone && took < Duration::from_secs(1800),
        format!(
            "ABCD - none = {:+.1} points (need >= 5), size curve 0/1/2/4 = {} (monotone: {monotone}), {took:.1?}",
            100.0 * gain,
            curve.join("/")
        ),
    )
}

fn keyframe_sweep() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (code, log) = ablate(tmp.path(), "ABCD", "1,3,5,7");
    if code != 0 {
        return outcome(false, format!("ablate exited {code}: {log}"));
    }
    let cells = read_cells(&tmp.path().join("cells.csv"));
    let curve: Vec<(usize, f64)> = [1usize, 3, 5, 7]
        .iter()
        .map(|&k| (k, median(&cells[&("ABCD".to_string(), k.to_string())])))
        .collect();
    let best = curve
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let text: Vec<String> = curve.iter().map(|(k, v)| format!("K={k}:{v:.3}")).collect();
    outcome(best.0 == 5, format!("median top-1 {}; argmax K={}", text.join(" "), best.0))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("read_dir") {
            let path = e.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).expect("read"));
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let cfg_path = smoke_config(tmp.path(), "");
    let cfg = p(&cfg_path).to_string();
    let runs = |tag: &str| -> Result<PathBuf, String> {
        let root = tmp.path().join(tag);
        let s1 = root.join("s1");
        let s2 = root.join("s2");
        let ck1 = s1.join("checkpoint");
        let ck2 = s2.join("checkpoint");
        let cmds: Vec<Vec<String>> = vec![
            vec!["stage1".into(), "--config".into(), cfg.clone(), "--out".into(), p(&s1).into()],
            vec!["stage2".into(), "--config".into(), cfg.clone(), "--out".into(), p(&s2).into(), "--checkpoint".into(), p(&ck1).into()],
            vec!["stage2".into(), "--config".into(), cfg.clone(), "--out".into(), p(&root.join("base")).into(), "--no-ftp".into()],
            vec!["eval".into(), "--config".into(), cfg.clone(), "--checkpoint".into(), p(&ck2).into(), "--out".into(), p(&root.join("eval")).into()],
            vec!["export".into(), "--config".into(), cfg.clone(), "--checkpoint".into(), p(&ck2).into(), "--layer".into(), "v1".into(), "--out".into(), p(&root.join("export")).into()],
            vec!["keyframes".into(), "--config".into(), cfg.clone(), "--k".into(), "5".into(), "--out".into(), p(&root.join("kf.ftpt")).into()],
            vec!["ablate".into(), "--config".into(), cfg.clone(), "--prompts".into(), "A".into(), "--k".into(), "5".into(), "--seeds".into(), "1,2".into(), "--out".into(), p(&root.join("ablate")).into()],
        ];
        for c in &cmds {
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            let (code, log) = ftp(&args);
            if code != 0 {
                return Err(format!("{} exited {code}: {log}", c[0]));
            }
        }
        Ok(root)
    };
    let (a, b) = match (runs("a"), runs("b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    let (ta, tb) = (tree(&a), tree(&b));
    let differing: Vec<String> = ta
        .iter()
        .filter(|(k, v)| tb.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let same_set = ta.keys().eq(tb.keys());
    outcome(
        differing.is_empty() && same_set && ta.len() > 10,
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", ta.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn overhead() -> Outcome {
    let cfg = RunConfig::desk();
    let model = FtpModel::init(cfg.model_config(), 1).expect("init");
    let m = Tensor::zeros(&cfg.model_config().feature_dims());
    let mut g = Graph::new();
    let pv = model.bind(&mut g);
    let mv = g.constant(m);
    model.forward_logits(&mut g, &pv, mv, PromptSet::ALL).expect("forward");
    let f = g.flops();
    let get = |k: &str| f.get(k).copied().unwrap_or(0) as f64;
    let extra = get(scope::POOLING) + get(scope::PROCESSOR) + get(scope::INTEGRATION);
    let blocks = get(scope::BLOCKS);
    let ratio = extra / blocks;
    outcome(
        blocks > 0.0 && ratio <= 0.10,
        format!("processors + integration = {extra} FLOPs, blocks = {blocks}, ratio {:.2}%", 100.0 * ratio),
    )
}

fn main() {
    // libtest flags such as `--nocapture` or test filters are accepted and ignored
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradients),
        ("structural identities", structural),
        ("loss analytics", loss_analytics),
        ("freeze discipline", freeze),
        ("alignment learning", alignment),
        ("prompt benefit trend", ftp_benefit),
        ("keyframe sweep shape", keyframe_sweep),
        ("determinism", determinism),
        ("overhead bound", overhead),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {:<22} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
