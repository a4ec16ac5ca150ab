use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C;
use superphonon_core::integrate::{integrate, step_rk4};
use superphonon_core::lindblad::{thermal_state, Frame, HermitianGenerator, HilbertSpec};
use superphonon_core::moments::{rhs_exact2, rhs_meanfield};
use superphonon_core::{simulate, ClosureScheme, IntegratorConfig, MomentState, SystemParams};

fn figure2(n: u32) -> SystemParams {
    SystemParams::new(n, 15.0, 5.0, 0.5, 10.0)
}

fn mean_field() -> SystemParams {
    SystemParams::new(200, 50.0, 5.0, 5.0, 10.0)
}

fn moments(c: &mut Criterion) {
    let p2 = figure2(2);
    let s2 = MomentState::initial(&p2, ClosureScheme::Exact2);
    c.bench_function("rhs/exact2", |b| b.iter(|| rhs_exact2(black_box(&s2), &p2).unwrap()));

    let pm = mean_field();
    let sm = MomentState::initial(&pm, ClosureScheme::MeanFieldA);
    c.bench_function("rhs/mean-field-a", |b| b.iter(|| rhs_meanfield(black_box(&sm), &pm).unwrap()));

    let cfg = IntegratorConfig::default();
    c.bench_function("simulate/exact2 t=4", |b| {
        b.iter(|| simulate(&p2, ClosureScheme::Exact2, 4.0, 0.002, &cfg).unwrap())
    });
    c.bench_function("simulate/mean-field-a N=200", |b| {
        b.iter(|| simulate(&pm, ClosureScheme::MeanFieldA, 0.1, 2.5e-4, &cfg).unwrap())
    });
}

fn density_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("hermitian-generator");
    for (n, k) in [(1u32, 150u32), (2, 150)] {
        let spec = HilbertSpec::new(n, k).unwrap();
        let p = figure2(n);
        let gen = HermitianGenerator::new(&spec, &p, Frame::Rotating).unwrap();
        let th = thermal_state(p.nbar, k).unwrap();
        let mut y = vec![C::default(); gen.len()];
        for (q, &pop) in th.populations.iter().enumerate() {
            y[gen.index(q, q)] = C::new(pop, 0.0);
        }
        let mut dy = vec![C::default(); y.len()];
        group.bench_function(format!("apply N={n} K={}", k + 1), |b| {
            b.iter(|| gen.apply(black_box(0.3), black_box(&y), &mut dy))
        });
    }
    group.finish();
}

fn integrators(c: &mut Criterion) {
    let lambda = C::new(-1.0, 20.0);
    let y0 = vec![C::new(1.0, 0.0); 16];
    c.bench_function("step_rk4/16", |b| {
        let mut f = |_: f64, y: &[C], dy: &mut [C]| {
            for (d, v) in dy.iter_mut().zip(y) {
                *d = lambda * v;
            }
        };
        b.iter(|| step_rk4(&mut f, black_box(&y0), 0.0, 1e-3).unwrap())
    });
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.01).collect();
    let cfg = IntegratorConfig::default();
    c.bench_function("dopri5/16 t=1", |b| {
        b.iter(|| {
            integrate(
                |_, y: &[C], dy: &mut [C]| {
                    for (d, v) in dy.iter_mut().zip(y) {
                        *d = lambda * v;
                    }
                },
                black_box(&y0),
                0.0,
                &grid,
                &cfg,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, moments, density_matrix, integrators);
criterion_main!(benches);
