//! Hot paths: ordinal arithmetic, transfinite runs, enumeration prefixes,
//! and forced-fact derivation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ittm::forcing::{self, ForcingConfig};
use ittm::{
    jump_approx, programs, BitGenerator, Ordinal, ProgramEnumeration, RunConfig, Runner, Tape,
};

fn zeros() -> Tape {
    Tape::new(BitGenerator::Const(false))
}

fn ordinal_ops(c: &mut Criterion) {
    let mut pool = Vec::new();
    for a in 0..6u64 {
        for b in 0..6u64 {
            let mut o = Ordinal::zero();
            for _ in 0..a {
                o = o.plus(&Ordinal::omega_pow(Ordinal::nat(2)));
            }
            for _ in 0..b {
                o = o.plus(&Ordinal::omega());
            }
            pool.push(o.plus(&Ordinal::nat(a * 7 + b)));
        }
    }
    c.bench_function("ordinal add and compare over a 36-element pool", |bench| {
        bench.iter(|| {
            let mut acc = Ordinal::zero();
            let mut flips = 0u32;
            for x in &pool {
                acc = acc.plus(x);
                if acc > *x {
                    flips += 1;
                }
            }
            black_box((acc, flips))
        })
    });
    c.bench_function("next limit stage across levels 1..4", |bench| {
        bench.iter(|| {
            let mut acc = Ordinal::zero();
            for x in &pool {
                for level in 1..=4u32 {
                    acc = x.next_limit(level).plus(&acc);
                }
            }
            black_box(acc)
        })
    });
}

fn transfinite_runs(c: &mut Criterion) {
    let deep = programs::stdlib_program("halt-at-omega-squared").unwrap();
    c.bench_function("halt at w^2+2 from a cold start", |bench| {
        bench.iter(|| {
            let (outcome, _) = Runner::new(&deep).record_trace(false).run(zeros());
            black_box(outcome)
        })
    });
    let blink = programs::stdlib_program("blinker").unwrap();
    c.bench_function("certify the blinker divergence", |bench| {
        bench.iter(|| {
            let (outcome, _) = Runner::new(&blink).record_trace(false).run(zeros());
            black_box(outcome)
        })
    });
}

fn enumeration_prefix(c: &mut Criterion) {
    let enumeration = ProgramEnumeration::standard();
    let cfg = RunConfig { max_steps_per_block: 128, max_tower: 3, max_history: 32 };
    c.bench_function("partition the first 64 programs on const(0)", |bench| {
        bench.iter(|| black_box(jump_approx(&enumeration, &zeros(), 64, cfg)))
    });
}

fn forced_facts(c: &mut Criterion) {
    let blink = programs::stdlib_program("blinker").unwrap();
    let cfg = ForcingConfig { window: 64, condition_len: 16, max_steps: 64 };
    c.bench_function("eight forced-fact steps plus the limit table", |bench| {
        bench.iter(|| {
            let mut tables = vec![forcing::initial_table(&blink, &cfg)];
            for _ in 0..8 {
                let next = forcing::boolean_step(&blink, tables.last().unwrap(), &cfg).unwrap();
                tables.push(next);
            }
            black_box(forcing::boolean_limit(&tables, &cfg).unwrap())
        })
    });
    c.bench_function("collapse the blinker against a periodic input", |bench| {
        let x = Tape::new("periodic(1;0)".parse::<BitGenerator>().unwrap());
        bench.iter(|| black_box(forcing::collapse_check(&blink, &x, &cfg)))
    });
}

criterion_group!(benches, ordinal_ops, transfinite_runs, enumeration_prefix, forced_facts);
criterion_main!(benches);
