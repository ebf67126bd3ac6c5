use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ftp_core::objectives::InfoNce;
use ftp_core::train::RunConfig;
use ftp_core::{FtpModel, Graph, Prompt, PromptSet, Tensor};

fn setup() -> (FtpModel, Tensor) {
    let cfg = RunConfig::desk();
    let model = FtpModel::init(cfg.model_config(), 1).expect("init");
    let mut r = ftp_core::rng::stream(1, &[0]);
    let m = Tensor::randn(&cfg.model_config().feature_dims(), 1.0, &mut r);
    (model, m)
}

fn forward(c: &mut Criterion) {
    let (model, m) = setup();
    for (name, prompts) in [("forward/none", PromptSet::EMPTY), ("forward/ABCD", PromptSet::ALL)] {
        c.bench_function(name, |b| {
            b.iter(|| {
                let mut g = Graph::new();
                let pv = model.bind(&mut g);
                let mv = g.constant(m.clone());
                model.forward_logits(&mut g, &pv, mv, prompts).expect("forward")
            })
        });
    }
    c.bench_function("forward_backward/ABCD", |b| {
        b.iter(|| {
            let mut g = Graph::new();
            let pv = model.bind(&mut g);
            let mv = g.constant(m.clone());
            let logits = model.forward_logits(&mut g, &pv, mv, PromptSet::ALL).expect("forward");
            let loss = g.sum_all(logits);
            g.backward(loss).expect("backward")
        })
    });
}

fn contrastive(c: &mut Criterion) {
    let (model, m) = setup();
    let batch = 32;
    let maps = Tensor::from_fn(&[batch, m.len()], |i| m.data()[i % m.len()]);
    let mut dims = vec![batch];
    dims.extend_from_slice(m.dims());
    let maps = maps.reshape(&dims).expect("reshape");
    let mut r = ftp_core::rng::stream(2, &[0]);
    let width = model.spatio_temporal(&m, Prompt::Category).expect("v").len();
    let text = Tensor::randn(&[batch, width], 1.0, &mut r);
    let nce = InfoNce::default();
    c.bench_function("stage1_step/batch32", |b| {
        b.iter_batched(
            || (maps.clone(), text.clone()),
            |(maps, text)| {
                let mut g = Graph::new();
                let pv = model.bind(&mut g);
                let mv = g.constant(maps);
                let v = model.feature_process_batch(&mut g, &pv, mv, Prompt::Category).expect("v");
                let e = g.constant(text);
                let l = nce.loss_graph(&mut g, v, e).expect("loss");
                g.backward(l).expect("backward")
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, forward, contrastive);
criterion_main!(benches);
