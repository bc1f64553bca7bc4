use criterion::{criterion_group, criterion_main, Criterion};
use evcoref::chains::{build_chains, FilterPolicy};
use evcoref::metrics::score_corpus;
use evcoref::{CorefLabel, PairDecision};
use evcoref_bench::chain_pairs;

fn scoring(c: &mut Criterion) {
    let (gold, pred) = chain_pairs(20);
    c.bench_function("score_corpus/100_docs", |b| {
        b.iter(|| score_corpus(&gold, &pred).unwrap())
    });
}

fn clustering(c: &mut Criterion) {
    let ids: Vec<String> = (0..200).map(|i| format!("m{i}")).collect();
    let decisions: Vec<PairDecision> = (0..200)
        .flat_map(|i| (i + 1..200).map(move |j| (i, j)))
        .map(|(i, j)| PairDecision {
            a: format!("m{i}"),
            b: format!("m{j}"),
            label: if (i * 31 + j * 17) % 97 == 0 {
                CorefLabel::Coref
            } else {
                CorefLabel::NonCoref
            },
            confidence: 0.55 + ((i + j) % 10) as f64 / 40.0,
            similarity: ((i * j) % 21) as f64 / 10.0 - 1.0,
        })
        .collect();
    let policy = FilterPolicy::WithRescue(Default::default());
    c.bench_function("build_chains/200_mentions", |b| {
        b.iter(|| build_chains("d", &ids, &decisions, &policy).unwrap())
    });
}

criterion_group!(benches, scoring, clustering);
criterion_main!(benches);
