//! Regenerative estimation of per-customer stationary (Palm) means.
//!
//! Busy cycles started from an empty system are i.i.d., so the stationary
//! mean of `g(R)` seen by an arriving customer is estimated by the ratio
//! `Σ_cycles Σ_i g(R_i) / Σ_cycles |cycle|`. The confidence interval comes
//! from the delta method on that ratio. This approximates the stationary
//! quantity only as well as the ergodic averages have converged.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::arrivals::{generate_trace, Horizon, ScenarioConfig};
use crate::disciplines::{check_ll_order, synthetic_states, DecisionState, DisciplineId};
use crate::error::{Error, Result};
use crate::majorization::ConvexFn;
use crate::queue::{simulate, simulate_with_log, Decision, Schedule};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PalmEstimate {
    pub g: ConvexFn,
    pub value: f64,
    /// `None` with fewer than two cycles.
    pub ci_halfwidth: Option<f64>,
    pub n_cycles: usize,
    pub n_customers: usize,
}

impl PalmEstimate {
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.ci_halfwidth.map(|h| (self.value - h, self.value + h))
    }

    /// `true` when both intervals exist and intersect.
    pub fn overlaps(&self, other: &PalmEstimate) -> bool {
        match (self.interval(), other.interval()) {
            (Some((a0, a1)), Some((b0, b1))) => a0 <= b1 && b0 <= a1,
            _ => false,
        }
    }
}

/// Ratio estimate of `E⁰[g(R)]` over every busy cycle of the given
/// schedules.
pub fn palm_mean(schedules: &[&Schedule], g: ConvexFn) -> Result<PalmEstimate> {
    let mut sums = Vec::new();
    for s in schedules {
        for c in &s.cycles {
            let y: f64 = s
                .cycle_values(&s.residual_patience, c)
                .iter()
                .map(|&r| g.eval(r))
                .sum();
            sums.push((y, c.len()));
        }
    }
    palm_from_cycle_sums(&sums, g)
}

/// Ratio estimator from per-cycle `(Σ g, cycle size)` pairs.
pub fn palm_from_cycle_sums(sums: &[(f64, usize)], g: ConvexFn) -> Result<PalmEstimate> {
    if sums.is_empty() {
        return Err(Error::Estimation("no complete busy cycle".into()));
    }
    let k = sums.len();
    let total_y: f64 = sums.iter().map(|s| s.0).sum();
    let total_n: usize = sums.iter().map(|s| s.1).sum();
    let value = total_y / total_n as f64;
    let ci_halfwidth = (k >= 2).then(|| {
        let mean_n = total_n as f64 / k as f64;
        let s2 = sums
            .iter()
            .map(|&(y, n)| {
                let z = y - value * n as f64;
                z * z
            })
            .sum::<f64>()
            / (k - 1) as f64;
        Z_95 * s2.sqrt() / (mean_n * (k as f64).sqrt())
    });
    Ok(PalmEstimate {
        g,
        value,
        ci_halfwidth,
        n_cycles: k,
        n_customers: total_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisciplineRow {
    pub discipline: DisciplineId,
    pub estimates: Vec<PalmEstimate>,
}

/// Ordering verdict for a pair with `phi ≪ psi` verified.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub phi: DisciplineId,
    pub psi: DisciplineId,
    pub g: ConvexFn,
    /// Point estimates ordered as `E⁰[g(R^Φ)] ≤ E⁰[g(R^Ψ)]`.
    pub confirmed: bool,
    /// Confidence intervals disjoint.
    pub separated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rho: f64,
    pub seed: u64,
    pub n_cycles: usize,
    pub functions: Vec<ConvexFn>,
    pub grid: Vec<DisciplineRow>,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonReport {
    pub fn estimate(&self, d: DisciplineId, g: ConvexFn) -> Option<&PalmEstimate> {
        self.grid
            .iter()
            .find(|r| r.discipline == d)?
            .estimates
            .iter()
            .find(|e| e.g == g)
    }

    pub fn verdict(&self, phi: DisciplineId, psi: DisciplineId, g: ConvexFn) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .find(|v| v.phi == phi && v.psi == psi && v.g == g)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["discipline", "g", "estimate", "ci_halfwidth", "n_cycles"])?;
        for row in &self.grid {
            for e in &row.estimates {
                out.write_record([
                    row.discipline.to_string(),
                    e.g.to_string(),
                    format!("{:.16e}", e.value),
                    e.ci_halfwidth
                        .map(|h| format!("{h:.16e}"))
                        .unwrap_or_default(),
                    e.n_cycles.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Decision states for `≪` checks: contested decisions observed while
/// simulating, plus synthetic states.
pub fn sample_decision_states(
    schedules_logs: &[Vec<Decision>],
    cap: usize,
    seed: u64,
) -> Vec<DecisionState> {
    let mut states: Vec<DecisionState> = schedules_logs
        .iter()
        .flat_map(|log| log.iter().take(cap).map(|d| d.state.clone()))
        .collect();
    states.extend(synthetic_states(cap.max(1), 8, seed));
    states
}

/// Simulates every discipline on one common trace of `n_cycles` busy
/// cycles and estimates `E⁰[g(R)]` for each `g`. Verdicts are issued only
/// for ordered pairs of distinct deterministic disciplines that pass the
/// sampled `≪` check.
pub fn compare_disciplines(
    config: &ScenarioConfig,
    disciplines: &[DisciplineId],
    functions: &[ConvexFn],
    n_cycles: usize,
) -> Result<ComparisonReport> {
    if disciplines.is_empty() {
        return Err(Error::Config("no discipline to compare".into()));
    }
    if functions.is_empty() {
        return Err(Error::Config("no function to estimate".into()));
    }
    if n_cycles < 100 {
        return Err(Error::Config(format!(
            "need at least 100 cycles, got {n_cycles}"
        )));
    }
    let util = config.utilization();
    if !util.stable {
        return Err(Error::Unstable { rho: util.rho });
    }
    let trace = generate_trace(&config.with_horizon(Horizon::Cycles(n_cycles)))?;
    let runs: Vec<(Schedule, Vec<Decision>)> = disciplines
        .par_iter()
        .map(|&d| {
            if d.is_deterministic() {
                simulate_with_log(&trace, d, 2_000)
            } else {
                (simulate(&trace, d), Vec::new())
            }
        })
        .collect();

    let grid = disciplines
        .iter()
        .zip(&runs)
        .map(|(&d, (s, _))| {
            let estimates = functions
                .iter()
                .map(|&g| palm_mean(&[s], g))
                .collect::<Result<Vec<_>>>()?;
            Ok(DisciplineRow {
                discipline: d,
                estimates,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let logs: Vec<_> = runs.into_iter().map(|(_, log)| log).collect();
    let states = sample_decision_states(&logs, 2_000, config.seed);
    let mut verdicts = Vec::new();
    for (i, &phi) in disciplines.iter().enumerate() {
        for (j, &psi) in disciplines.iter().enumerate() {
            if i == j || phi == psi || !phi.is_deterministic() || !psi.is_deterministic() {
                continue;
            }
            if !check_ll_order(phi, psi, &states)?.holds() {
                continue;
            }
            for (k, &g) in functions.iter().enumerate() {
                let (a, b) = (&grid[i].estimates[k], &grid[j].estimates[k]);
                verdicts.push(Verdict {
                    phi,
                    psi,
                    g,
                    confirmed: a.value <= b.value,
                    separated: a
                        .interval()
                        .zip(b.interval())
                        .is_some_and(|((_, a1), (b0, _))| a1 < b0),
                });
            }
        }
    }
    Ok(ComparisonReport {
        rho: util.rho,
        seed: config.seed,
        n_cycles,
        functions: functions.to_vec(),
        grid,
        verdicts,
    })
}

/// Independent replications of [`compare_disciplines`] with seeds
/// `seed, seed+1, ...`, run in parallel and returned in seed order.
pub fn replicate(
    config: &ScenarioConfig,
    disciplines: &[DisciplineId],
    functions: &[ConvexFn],
    n_cycles: usize,
    replications: usize,
) -> Result<Vec<ComparisonReport>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            compare_disciplines(
                &config.with_seed(config.seed.wrapping_add(r)),
                disciplines,
                functions,
                n_cycles,
            )
        })
        .collect()
}
