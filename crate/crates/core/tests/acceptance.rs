//! Acceptance suite. Runs every criterion in sequence (timings are taken on
//! an otherwise idle process), prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use softdeadline::arrivals::{
    generate_trace, ArrivalTrace, DistributionSpec, Horizon, ScenarioConfig,
};
use softdeadline::coupling::verify_coupling;
use softdeadline::disciplines::{check_ll_order, DisciplineId};
use softdeadline::majorization::{apply_permutation, majorizes, ConvexFn, Permutation};
use softdeadline::queue::{residuals_in_deadline_order, simulate, simulate_with_log};
use softdeadline::stats::{compare_disciplines, sample_decision_states};

use DisciplineId::{Edf, Fifo, Ldf, Lifo};

const PAIRS: [(DisciplineId, DisciplineId); 5] = [
    (Edf, Fifo),
    (Edf, Lifo),
    (Edf, Ldf),
    (Fifo, Ldf),
    (Lifo, Ldf),
];

type Criterion = (&'static str, fn() -> Outcome);

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

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

/// Four arrival/service families times three loads.
fn scenario_matrix() -> Vec<(String, ScenarioConfig)> {
    let mut out = Vec::new();
    for rho in [0.5, 0.8, 0.95] {
        let families = [
            (
                "M/M",
                DistributionSpec::exponential(1.0),
                DistributionSpec::exponential(1.0 / rho),
                DistributionSpec::exponential(0.2),
            ),
            (
                "M/D",
                DistributionSpec::exponential(1.0),
                DistributionSpec::deterministic(rho),
                DistributionSpec::uniform(-2.0, 12.0),
            ),
            (
                "D/M",
                DistributionSpec::deterministic(1.0),
                DistributionSpec::exponential(1.0 / rho),
                DistributionSpec::exponential(0.5),
            ),
            (
                "GI/GI",
                DistributionSpec::gamma(2.0, 0.5),
                DistributionSpec::uniform(0.5 * rho, 1.5 * rho),
                DistributionSpec::shifted(DistributionSpec::gamma(2.0, 2.0), -1.0),
            ),
        ];
        for (name, interarrival, service, patience) in families {
            out.push((
                format!("{name} rho={rho}"),
                ScenarioConfig {
                    interarrival,
                    service,
                    patience,
                    seed: 0,
                    horizon: Horizon::Cycles(1),
                },
            ));
        }
    }
    out
}

#[derive(Default)]
struct PairTally {
    cycles: usize,
    identity_failures: usize,
    majorization_failures: usize,
    replay_majorization_failures: usize,
    order_changes: usize,
    splits: usize,
}

fn exact_coupling() -> Outcome {
    const TRACES_PER_SCENARIO: u64 = 84;
    const CYCLES_PER_TRACE: usize = 25;
    let start = Instant::now();
    let matrix = scenario_matrix();
    let traces: Vec<ArrivalTrace> = matrix
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, (_, cfg))| {
            (0..TRACES_PER_SCENARIO).map(move |t| {
                let cfg = cfg
                    .with_seed(1_000 * s as u64 + t)
                    .with_horizon(Horizon::Cycles(CYCLES_PER_TRACE));
                generate_trace(&cfg).expect("stable scenario")
            })
        })
        .collect();

    // decision states seen on the traces, for the ≪ precondition
    let logs: Vec<_> = traces
        .par_iter()
        .step_by(8)
        .flat_map_iter(|tr| [Edf, Ldf, Fifo, Lifo].map(|d| simulate_with_log(tr, d, 200).1))
        .collect();
    let states = sample_decision_states(&logs, 200, 7);

    let mut lines = Vec::new();
    let mut pass = true;
    let mut total_cycles = 0;
    for (phi, psi) in PAIRS {
        let ll = check_ll_order(phi, psi, &states)
            .expect("deterministic pair")
            .holds();
        let tally = traces
            .par_iter()
            .map(|tr| {
                let r = verify_coupling(tr, phi, psi).expect("coupling runs");
                let mut t = PairTally::default();
                for c in &r.cycles {
                    t.cycles += 1;
                    t.identity_failures += usize::from(!c.identity_ok);
                    t.majorization_failures += usize::from(!c.majorization_ok);
                    t.replay_majorization_failures += usize::from(!c.replay_majorization_ok);
                    t.order_changes += usize::from(!c.order_preserved);
                    t.splits += usize::from(!c.cycle_preserved);
                }
                t
            })
            .reduce(PairTally::default, |a, b| PairTally {
                cycles: a.cycles + b.cycles,
                identity_failures: a.identity_failures + b.identity_failures,
                majorization_failures: a.majorization_failures + b.majorization_failures,
                replay_majorization_failures: a.replay_majorization_failures
                    + b.replay_majorization_failures,
                order_changes: a.order_changes + b.order_changes,
                splits: a.splits + b.splits,
            });
        total_cycles = tally.cycles;
        pass &= ll && tally.identity_failures == 0 && tally.majorization_failures == 0;
        lines.push(format!(
            "({phi},{psi}) ll={ll} identity_fail={} major_fail={} replay_major_fail={} order_changed={} split={}",
            tally.identity_failures,
            tally.majorization_failures,
            tally.replay_majorization_failures,
            tally.order_changes,
            tally.splits
        ));
    }
    let elapsed = start.elapsed();
    pass &= traces.len() >= 1_000 && total_cycles >= 20_000 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} traces, {} cycles per pair, {}; {}",
            traces.len(),
            total_cycles,
            secs(elapsed),
            lines.join("; ")
        ),
    )
}

/// `x ≺ y` straight from the definition: equal totals and, for every size
/// `k`, the best `k`-subset sum of `x` does not exceed that of `y`.
fn brute_force_majorizes(x: &[i64], y: &[i64]) -> bool {
    fn best_by_size(v: &[i64]) -> Vec<i64> {
        let n = v.len();
        let mut best = vec![i64::MIN; n + 1];
        for mask in 0u32..(1 << n) {
            let k = mask.count_ones() as usize;
            let s: i64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| v[i]).sum();
            best[k] = best[k].max(s);
        }
        best
    }
    let (bx, by) = (best_by_size(x), best_by_size(y));
    bx[x.len()] == by[y.len()] && bx.iter().zip(&by).all(|(a, b)| a <= b)
}

fn all_vectors(n: usize) -> Vec<Vec<i64>> {
    (0..7usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let d = (code % 7) as i64 - 3;
                    code /= 7;
                    d
                })
                .collect()
        })
        .collect()
}

fn as_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&t| t as f64).collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0usize;
    let mut mismatches = 0usize;
    let mut positives = 0usize;

    for n in 1..=4 {
        let vs = all_vectors(n);
        let (p, m, t) = vs
            .par_iter()
            .map(|x| {
                let xf = as_f64(x);
                let mut acc = (0usize, 0usize, 0usize);
                for y in &vs {
                    let got = majorizes(&xf, &as_f64(y), 0.0).unwrap();
                    acc.0 += 1;
                    acc.1 += usize::from(got != brute_force_majorizes(x, y));
                    acc.2 += usize::from(got);
                }
                acc
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        pairs += p;
        mismatches += m;
        positives += t;
    }

    // lengths 5 and 6: half the pairs drawn from equal-sum classes
    for n in 5..=6 {
        let vs = all_vectors(n);
        let mut by_sum: HashMap<i64, Vec<usize>> = HashMap::new();
        for (i, v) in vs.iter().enumerate() {
            by_sum.entry(v.iter().sum()).or_default().push(i);
        }
        let (p, m, t) = (0..1_000_000u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(k);
                rng.set_stream(n as u64);
                let y = &vs[rng.random_range(0..vs.len())];
                let x = if k % 2 == 0 {
                    let class = &by_sum[&y.iter().sum::<i64>()];
                    &vs[class[rng.random_range(0..class.len())]]
                } else {
                    &vs[rng.random_range(0..vs.len())]
                };
                let got = majorizes(&as_f64(x), &as_f64(y), 0.0).unwrap();
                (
                    1usize,
                    usize::from(got != brute_force_majorizes(x, y)),
                    usize::from(got),
                )
            })
            .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        pairs += p;
        mismatches += m;
        positives += t;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut negation_failures = 0;
    let mut reordering_failures = 0;
    let mut reordering_instances = 0;
    for _ in 0..100_000 {
        let n = rng.random_range(1..=8);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
        let mut y = x.clone();
        // a few Robin Hood transfers keep x ≺ y likely without forcing it
        for _ in 0..rng.random_range(0..4) {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let d = rng.random_range(-2..=2) as f64;
            y[i] += d;
            y[j] -= d;
        }
        let neg = |v: &[f64]| v.iter().map(|t| -t).collect::<Vec<_>>();
        if majorizes(&x, &y, 0.0).unwrap() != majorizes(&neg(&x), &neg(&y), 0.0).unwrap() {
            negation_failures += 1;
        }

        let inverted: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| x[i] > x[j])
            .collect();
        if inverted.is_empty() {
            continue;
        }
        let (i, j) = inverted[rng.random_range(0..inverted.len())];
        let g = Permutation::transposition(n, i, j).unwrap();
        let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(-5..=5) as f64).collect();
        z.sort_by(f64::total_cmp);
        let gx = apply_permutation(&g, &x).unwrap();
        let lhs: Vec<f64> = gx.iter().zip(&z).map(|(a, b)| a - b).collect();
        let rhs: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
        reordering_instances += 1;
        if !majorizes(&lhs, &rhs, 0.0).unwrap() {
            reordering_failures += 1;
        }
    }

    let pass =
        pairs >= 1_000_000 && mismatches == 0 && negation_failures == 0 && reordering_failures == 0;
    outcome(
        pass,
        format!(
            "{pairs} pairs ({positives} majorized), {mismatches} oracle mismatches; negation 0/{} -> {negation_failures} failures; reordering {reordering_failures}/{reordering_instances} failures; {}",
            100_000,
            secs(start.elapsed())
        ),
    )
}

fn mm_08(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        interarrival: DistributionSpec::exponential(1.0),
        service: DistributionSpec::exponential(1.25),
        patience: DistributionSpec::exponential(0.2),
        seed,
        horizon: Horizon::Cycles(100_000),
    }
}

fn lateness_ordering() -> Outcome {
    let start = Instant::now();
    let g = ConvexFn::NegativePart;
    let report = compare_disciplines(&mm_08(11), &[Edf, Fifo, Lifo, Ldf], &[g], 100_000)
        .expect("comparison runs");
    let elapsed = start.elapsed();
    let est = |d| report.estimate(d, g).expect("estimated");
    let (edf, ldf) = (est(Edf), est(Ldf));
    let middle_ok = [Fifo, Lifo]
        .iter()
        .all(|&d| edf.value <= est(d).value && est(d).value <= ldf.value);
    let disjoint = match (edf.interval(), ldf.interval()) {
        (Some((_, e1)), Some((l0, _))) => e1 < l0,
        _ => false,
    };
    let pass = middle_ok && disjoint && elapsed < Duration::from_secs(30);
    let show = |d: DisciplineId| {
        let e = est(d);
        format!(
            "{d}={:.5}±{:.5}",
            e.value,
            e.ci_halfwidth.unwrap_or(f64::NAN)
        )
    };
    outcome(
        pass,
        format!(
            "{} {} {} {}; ordered={middle_ok} edf/ldf disjoint={disjoint}; {}",
            show(Edf),
            show(Fifo),
            show(Lifo),
            show(Ldf),
            secs(elapsed)
        ),
    )
}

fn linear_equality() -> Outcome {
    let start = Instant::now();
    let ds = [Edf, Fifo, Lifo, Ldf];
    let g = ConvexFn::Linear;
    let mut failures = Vec::new();
    let matrix = scenario_matrix();
    for (s, (name, cfg)) in matrix.iter().enumerate() {
        let report = compare_disciplines(&cfg.with_seed(500 + s as u64), &ds, &[g], 20_000)
            .expect("comparison runs");
        for (i, &a) in ds.iter().enumerate() {
            for &b in &ds[i + 1..] {
                let (ea, eb) = (
                    report.estimate(a, g).unwrap(),
                    report.estimate(b, g).unwrap(),
                );
                if !ea.overlaps(eb) {
                    failures.push(format!(
                        "{name}: {a}={:.4} vs {b}={:.4}",
                        ea.value, eb.value
                    ));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} scenarios x 6 pairs, 20000 cycles each, {} non-overlapping{}; {}",
            matrix.len(),
            failures.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(" [{}]", failures.join("; "))
            },
            secs(start.elapsed())
        ),
    )
}

fn deterministic_patience_coincidence() -> Outcome {
    let mut mismatched = 0;
    let matrix = scenario_matrix();
    for t in 0..100u64 {
        let (_, base) = &matrix[t as usize % matrix.len()];
        let cfg = ScenarioConfig {
            patience: DistributionSpec::deterministic(5.0),
            ..base.clone()
        }
        .with_seed(9_000 + t)
        .with_horizon(Horizon::Cycles(200));
        let trace = generate_trace(&cfg).expect("stable scenario");
        let (edf, fifo) = (simulate(&trace, Edf), simulate(&trace, Fifo));
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let same = edf.service_order == fifo.service_order
            && bits(&edf.begin_service) == bits(&fifo.begin_service)
            && bits(&edf.residual_patience) == bits(&fifo.residual_patience)
            && bits(&edf.lateness) == bits(&fifo.lateness)
            && edf.cycles == fifo.cycles;
        mismatched += usize::from(!same);
    }
    outcome(mismatched == 0, format!("100 traces, {mismatched} differ"))
}

fn trace_e_oracle() -> Outcome {
    let tr =
        ArrivalTrace::from_parts(&[0.0, 1.0, 2.0], &[5.0, 2.0, 3.0], &[10.0, 9.0, 1.0]).unwrap();
    let (edf, ldf) = (simulate(&tr, Edf), simulate(&tr, Ldf));
    let r = verify_coupling(&tr, Edf, Ldf).unwrap();
    let c = &r.cycles[0];
    let mut checks = vec![
        ("EDF L", edf.lateness == [0.0, 0.0, 2.0]),
        ("LDF L", ldf.lateness == [0.0, 0.0, 4.0]),
        ("EDF B", edf.begin_service == [0.0, 8.0, 5.0]),
        ("LDF B", ldf.begin_service == [0.0, 5.0, 7.0]),
        ("gamma", c.gamma.as_slice() == [0, 2, 1]),
        ("r_phi", c.r_phi == [-2.0, 10.0, 3.0]),
        ("r_psi", c.r_psi == [-4.0, 10.0, 5.0]),
        ("identity", c.identity_ok),
        ("majorization", majorizes(&c.r_phi, &c.r_psi, 0.0).unwrap()),
        ("decomposition", c.decomposition_ok),
    ];
    checks.push((
        "EDF residuals by deadline",
        residuals_in_deadline_order(&tr, &edf, 0).unwrap() == [-2.0, 10.0, 2.0],
    ));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} values reproduced exactly", checks.len())
        } else {
            format!("mismatch in {}", failed.join(", "))
        },
    )
}

fn performance_floor() -> Outcome {
    let cfg = mm_08(3).with_horizon(Horizon::Customers(1_000_000));
    let start = Instant::now();
    let trace = generate_trace(&cfg).expect("generation");
    let generated = start.elapsed();
    let s = simulate(&trace, Edf);
    let elapsed = start.elapsed();
    outcome(
        s.len() == 1_000_000 && elapsed < Duration::from_secs(5),
        format!(
            "10^6 customers, {} cycles: generate {} + simulate {} = {}",
            s.cycles.len(),
            secs(generated),
            secs(elapsed - generated),
            secs(elapsed)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("exact coupling verification", exact_coupling),
        ("majorization oracle equivalence", oracle_equivalence),
        (
            "lateness ordering EDF <= FIFO,LIFO <= LDF",
            lateness_ordering,
        ),
        ("linear-g equality", linear_equality),
        (
            "deterministic patience EDF = FIFO",
            deterministic_patience_coincidence,
        ),
        ("hand-traced oracle", trace_e_oracle),
        ("performance floor", performance_floor),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
