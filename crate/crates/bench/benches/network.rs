use criterion::{criterion_group, criterion_main, Criterion};
use evcoref::mlnn::{batch_loss_and_grad, predict_pairs, Objective};
use evcoref_bench::{pair_fixture, small_mlnn_config};

fn training_step(c: &mut Criterion) {
    let cfg = small_mlnn_config();
    let f = pair_fixture(&cfg);
    let batch: Vec<usize> = (0..32.min(f.pairs.pairs.len())).collect();
    for (name, objective) in [
        ("joint", Objective::Joint),
        ("classifier_only", Objective::ClassifierOnly),
    ] {
        c.bench_function(&format!("pair_batch_grad/{name}/32"), |b| {
            b.iter(|| batch_loss_and_grad(&f.model, &f.pairs, &batch, objective).unwrap())
        });
    }
}

fn inference(c: &mut Criterion) {
    let cfg = small_mlnn_config();
    let f = pair_fixture(&cfg);
    let doc = &f.corpus.documents[0];
    c.bench_function("predict_pairs/one_doc", |b| {
        b.iter(|| {
            predict_pairs(
                &f.model,
                doc,
                &doc.gold_mentions,
                &f.vocab,
                &cfg.encoder.features,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, training_step, inference);
criterion_main!(benches);
