use criterion::{criterion_group, criterion_main, Criterion};
use mulop_core::decompose::{block_norms, decompose};
use mulop_core::dyadic::Ambient;
use mulop_core::haar::HaarBasis;
use mulop_core::lpnum::{op_norm, LpOperator, NormMode, PowerOpts, WeightedSpace};
use mulop_core::measure::MeasureSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_haar_build(c: &mut Criterion) {
    let m = MeasureSpec::uniform(Ambient::Line, 0);
    c.bench_function("haar_build_line_l10_p3", |b| {
        b.iter(|| HaarBasis::build(std::hint::black_box(&m), 10, 3.0).unwrap())
    });
}

fn bench_block_norms(c: &mut Criterion) {
    let m = MeasureSpec::uniform(Ambient::Line, 0);
    c.bench_function("block_norms_line_l10_p3", |b| {
        b.iter(|| block_norms(std::hint::black_box(&m), 3.0, 10, 2).unwrap())
    });
}

fn bench_decompose(c: &mut Criterion) {
    let m = MeasureSpec::uniform(Ambient::Line, 0);
    c.bench_function("decompose_line_l6_eps05_p3", |b| {
        b.iter(|| decompose(std::hint::black_box(&m), 3.0, 0.5, 6).unwrap())
    });
}

fn bench_power_iteration(c: &mut Criterion) {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let entries = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let space = WeightedSpace::sequence(dim, 2.5).unwrap();
    let op = LpOperator::new(space.clone(), space, entries).unwrap();
    c.bench_function("power_iteration_64_p2_5", |b| {
        b.iter(|| {
            op_norm(std::hint::black_box(&op), NormMode::TwoSided(PowerOpts::default())).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_haar_build,
    bench_block_norms,
    bench_decompose,
    bench_power_iteration
);
criterion_main!(benches);
