//! Interchange coupling between two disciplines on one busy cycle.
//!
//! For a cycle served by `Φ` and `Ψ` on the same input `N`:
//!
//! * `α` maps deadline rank → customer (stable in arrival index),
//! * `φ` / `ψ` map service position → deadline rank under `Φ` / `Ψ`,
//! * `γ = α ∘ ψ ∘ φ⁻¹ ∘ α⁻¹` sends the customer served at some position by
//!   `Φ` to the customer served at that same position by `Ψ`.
//!
//! Giving customer `n` the service duration `σ_{γ(n)}` yields the input
//! `N^γ`. Three checks are then run per cycle, with `Φ` re-simulated on
//! `N^γ`:
//!
//! 1. begin-service identity `B^{N^γ,Φ}_{α(n)} = B^{N,Ψ}_{γ∘α(n)}` (exact),
//! 2. majorization `R^{N^γ,Φ}_α ≺ R^{N,Ψ}_α`,
//! 3. decomposition of `γ` (in deadline-rank coordinates) into reordering
//!    transpositions of `B^{N,Ψ}_α`.
//!
//! All permutations here are local to the cycle: offset `k` stands for
//! customer `cycle.first + k`.

use serde::Serialize;

use crate::arrivals::ArrivalTrace;
use crate::disciplines::DisciplineId;
use crate::error::{Error, Result};
use crate::majorization::{
    decompose_into_reorderings, majorizes, Permutation, DEFAULT_SUM_TOLERANCE,
};
use crate::queue::{deadline_order, simulate, simulate_with_log, Cycle, Decision, Schedule};

/// `(α, φ)` for one cycle of `schedule`.
pub fn deadline_rank_maps(
    trace: &ArrivalTrace,
    schedule: &Schedule,
    cycle: &Cycle,
) -> Result<(Permutation, Permutation)> {
    if trace.len() != schedule.len() || cycle.last >= trace.len() || cycle.first > cycle.last {
        return Err(Error::Inconsistent(format!(
            "cycle {cycle:?} does not fit the trace"
        )));
    }
    let alpha = deadline_order(trace, cycle);
    let rank = alpha.inverse();
    let served = schedule.served_in(cycle);
    let phi = served
        .iter()
        .map(|&c| {
            if cycle.customers().contains(&c) {
                Ok(rank[c - cycle.first])
            } else {
                Err(Error::Inconsistent(format!(
                    "customer {c} served inside cycle {cycle:?}"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((alpha, Permutation::new(phi)?))
}

/// `γ = α ∘ ψ ∘ φ⁻¹ ∘ α⁻¹`.
pub fn build_gamma(
    alpha: &Permutation,
    phi: &Permutation,
    psi: &Permutation,
) -> Result<Permutation> {
    alpha
        .compose(psi)?
        .compose(&phi.inverse())?
        .compose(&alpha.inverse())
}

/// Assembles per-cycle permutations into one permutation of the whole trace.
/// Customers outside every listed cycle are fixed.
pub fn block_gamma(n: usize, blocks: &[(Cycle, Permutation)]) -> Result<Permutation> {
    let mut g: Vec<usize> = (0..n).collect();
    for (c, local) in blocks {
        if c.last >= n || local.len() != c.len() {
            return Err(Error::Domain(format!(
                "block {c:?} does not fit {n} customers"
            )));
        }
        for k in 0..local.len() {
            g[c.first + k] = c.first + local[k];
        }
    }
    Permutation::new(g)
}

/// `N^γ`: customer `n` receives service duration `σ_{γ(n)}`. `γ` must map
/// every cycle onto itself.
pub fn rearrange_services(
    trace: &ArrivalTrace,
    gamma: &Permutation,
    cycles: &[Cycle],
) -> Result<ArrivalTrace> {
    if gamma.len() != trace.len() {
        return Err(Error::LengthMismatch {
            expected: trace.len(),
            actual: gamma.len(),
        });
    }
    let mut owner = vec![usize::MAX; trace.len()];
    for (k, c) in cycles.iter().enumerate() {
        for i in c.customers() {
            owner[i] = k;
        }
    }
    for i in 0..gamma.len() {
        let j = gamma[i];
        let same_block = if owner[i] == usize::MAX {
            i == j
        } else {
            owner[i] == owner[j]
        };
        if !same_block {
            return Err(Error::Domain(format!(
                "γ maps customer {i} to {j} across cycles"
            )));
        }
    }
    trace.with_services(&gamma.apply(&trace.services())?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCoupling {
    pub first: usize,
    pub last: usize,
    pub gamma: Permutation,
    pub identity_ok: bool,
    pub majorization_ok: bool,
    pub decomposition_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_error: Option<String>,
    /// `Φ` on `N^γ` serves the cycle in the same order as `Φ` on `N`.
    pub order_preserved: bool,
    /// The cycle is still a single busy cycle on `N^γ`.
    pub cycle_preserved: bool,
    /// Majorization with `B^{N^γ,Φ}` taken as `B^{N,Ψ}_{γ∘α}` instead of
    /// re-simulated.
    pub replay_majorization_ok: bool,
    pub r_phi: Vec<f64>,
    pub r_psi: Vec<f64>,
}

impl CycleCoupling {
    pub fn cycle(&self) -> Cycle {
        Cycle {
            first: self.first,
            last: self.last,
        }
    }

    pub fn passed(&self) -> bool {
        self.identity_ok && self.majorization_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingReport {
    pub phi: DisciplineId,
    pub psi: DisciplineId,
    pub cycles: Vec<CycleCoupling>,
}

impl CouplingReport {
    /// Cycles failing the identity or the majorization check.
    pub fn failures(&self) -> impl Iterator<Item = &CycleCoupling> {
        self.cycles.iter().filter(|c| !c.passed())
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Runs the three per-cycle checks for `Φ = phi` against `Ψ = psi`.
pub fn verify_coupling(
    trace: &ArrivalTrace,
    phi: DisciplineId,
    psi: DisciplineId,
) -> Result<CouplingReport> {
    for d in [phi, psi] {
        if !d.is_deterministic() {
            return Err(Error::Contract(format!("{d} cannot be coupled pathwise")));
        }
    }
    let on_phi = simulate(trace, phi);
    let on_psi = simulate(trace, psi);
    if on_phi.cycles != on_psi.cycles {
        return Err(Error::Inconsistent(format!(
            "{phi} and {psi} disagree on busy cycles"
        )));
    }
    let cycles = on_psi.cycles.clone();

    let mut blocks = Vec::with_capacity(cycles.len());
    let mut alphas = Vec::with_capacity(cycles.len());
    for c in &cycles {
        let (alpha, phi_map) = deadline_rank_maps(trace, &on_phi, c)?;
        let (_, psi_map) = deadline_rank_maps(trace, &on_psi, c)?;
        blocks.push((*c, build_gamma(&alpha, &phi_map, &psi_map)?));
        alphas.push(alpha);
    }
    let gamma = block_gamma(trace.len(), &blocks)?;
    let rearranged = rearrange_services(trace, &gamma, &cycles)?;
    let on_rearranged = simulate(&rearranged, phi);
    let deadlines = trace.deadlines();

    let records = blocks
        .into_iter()
        .zip(alphas)
        .map(|((c, local_gamma), alpha)| {
            let at = |k: usize| c.first + k;
            let ranks = alpha.as_slice();

            let identity_ok = ranks.iter().all(|&k| {
                on_rearranged.begin_service[at(k)] == on_psi.begin_service[at(local_gamma[k])]
            });
            let r_phi: Vec<f64> = ranks
                .iter()
                .map(|&k| on_rearranged.residual_patience[at(k)])
                .collect();
            let r_psi: Vec<f64> = ranks
                .iter()
                .map(|&k| on_psi.residual_patience[at(k)])
                .collect();
            let majorization_ok = majorizes(&r_phi, &r_psi, DEFAULT_SUM_TOLERANCE)?;

            let replayed: Vec<f64> = ranks
                .iter()
                .map(|&k| deadlines[at(k)] - on_psi.begin_service[at(local_gamma[k])])
                .collect();
            let replay_majorization_ok = majorizes(&replayed, &r_psi, DEFAULT_SUM_TOLERANCE)?;

            let gamma_in_ranks = alpha.inverse().compose(&local_gamma)?.compose(&alpha)?;
            let b_psi: Vec<f64> = ranks.iter().map(|&k| on_psi.begin_service[at(k)]).collect();
            let (decomposition_ok, decomposition_error) =
                match decompose_into_reorderings(&gamma_in_ranks, &b_psi) {
                    Ok(_) => (true, None),
                    Err(e @ Error::NotDecomposable { .. }) => (false, Some(e.to_string())),
                    Err(e) => return Err(e),
                };

            let mut replay_order: Vec<usize> = c.customers().collect();
            replay_order.sort_by(|&a, &b| {
                on_rearranged.begin_service[a].total_cmp(&on_rearranged.begin_service[b])
            });
            let order_preserved = replay_order == on_phi.served_in(&c);
            let cycle_preserved = on_rearranged
                .cycles
                .binary_search_by_key(&c.first, |k| k.first)
                .is_ok_and(|i| on_rearranged.cycles[i] == c);

            Ok(CycleCoupling {
                first: c.first,
                last: c.last,
                gamma: local_gamma,
                identity_ok,
                majorization_ok,
                decomposition_ok,
                decomposition_error,
                order_preserved,
                cycle_preserved,
                replay_majorization_ok,
                r_phi,
                r_psi,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CouplingReport {
        phi,
        psi,
        cycles: records,
    })
}

/// Contested decisions `d` takes while serving `cycle`; attached to
/// counterexample dumps.
pub fn cycle_decisions(trace: &ArrivalTrace, d: DisciplineId, cycle: &Cycle) -> Vec<Decision> {
    let (_, log) = simulate_with_log(trace, d, usize::MAX);
    log.into_iter()
        .filter(|dec| {
            dec.state
                .waiting
                .iter()
                .all(|w| cycle.customers().contains(&w.index))
        })
        .collect()
}
