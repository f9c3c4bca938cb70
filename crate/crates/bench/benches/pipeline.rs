use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use masgram_core::backend::ScriptedBackend;
use masgram_core::components::TaskContext;
use masgram_core::eval::extract_answer;
use masgram_core::executor::Executor;
use masgram_core::grammar::base_mases;

fn extraction(c: &mut Criterion) {
    let text = "Let x = \\boxed{3}. Then, after checking, ".repeat(40) + "the answer is \\boxed{\\frac{1}{2}}.";
    c.bench_function("extract_answer", |b| b.iter(|| extract_answer(black_box(&text))));
}

fn execution(c: &mut Criterion) {
    let backend = ScriptedBackend::echo();
    let executor = Executor::new(&backend, "gpt-4o-mini");
    let task = TaskContext::new("What is 17 + 25?").unwrap();
    let mut group = c.benchmark_group("execute");
    for mas in base_mases() {
        group.bench_function(mas.name, |b| {
            b.iter(|| executor.execute(&mas.sequence, &task, None).unwrap().call_count())
        });
    }
    group.finish();
}

criterion_group!(benches, extraction, execution);
criterion_main!(benches);
