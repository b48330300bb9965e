use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fsrc_core::encoder::{ToyEncoder, ToyEncoderParams};
use fsrc_core::evaluator::score_pairs;
use fsrc_core::par::with_workers;
use fsrc_core::renderer::MarkerScheme;
use fsrc_core::sampler::{generate_episode_batch, generate_pairs, EpisodeConfig, PairDatasetConfig};
use fsrc_core::synth::{generate, SynthConfig};

fn worker_counts() -> Vec<usize> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    if n > 1 {
        vec![1, n]
    } else {
        vec![1]
    }
}

fn episodes(c: &mut Criterion) {
    let corpus = generate(&SynthConfig::default()).unwrap();
    let config = EpisodeConfig { m: 5, k: 5, q: 5, nota_rate: 0.5, seed: 1 };
    let scheme = MarkerScheme::default();
    let mut group = c.benchmark_group("episode_batch_2000");
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| with_workers(w, || generate_episode_batch(&corpus, &config, 2000, &scheme).unwrap()))
        });
    }
    group.finish();
}

fn pair_scoring(c: &mut Criterion) {
    let corpus = generate(&SynthConfig::default()).unwrap();
    let pairs =
        generate_pairs(&corpus, &PairDatasetConfig { size: 5000, ..Default::default() }, &MarkerScheme::default())
            .unwrap();
    let encoder = ToyEncoder::init(&ToyEncoderParams::default()).unwrap();
    let mut group = c.benchmark_group("score_pairs_5000");
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| with_workers(w, || score_pairs(&encoder, &pairs).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, episodes, pair_scoring);
criterion_main!(benches);
