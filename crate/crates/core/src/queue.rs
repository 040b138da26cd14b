//! Non-preemptive single-server event engine.
//!
//! Events at one epoch are ordered: service completion, then arrivals, then
//! the scheduling decision. An arrival that coincides with the completion
//! that empties the system therefore opens a new busy cycle. Within a cycle
//! the clock advances only by adding service durations to the cycle's
//! first arrival time, in service order.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::arrivals::{exact, ArrivalTrace};
use crate::disciplines::{DecisionState, DisciplineId, WaitingCustomer, WaitingRoom};
use crate::error::{Error, Result};
use crate::majorization::Permutation;

/// A busy cycle, as the inclusive range of arrival indices it serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cycle {
    pub first: usize,
    pub last: usize,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn customers(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub discipline: DisciplineId,
    pub begin_service: Vec<f64>,
    pub waiting: Vec<f64>,
    pub residual_patience: Vec<f64>,
    pub lateness: Vec<f64>,
    /// Service position → customer index.
    pub service_order: Permutation,
    pub cycles: Vec<Cycle>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.begin_service.len()
    }

    pub fn is_empty(&self) -> bool {
        self.begin_service.is_empty()
    }

    /// Customers of `cycle` in the order they were served.
    pub fn served_in(&self, cycle: &Cycle) -> &[usize] {
        // cycles occupy contiguous blocks of service positions, in cycle order
        // and the customers arriving before a cycle are exactly those served before it
        &self.service_order.as_slice()[cycle.first..=cycle.last]
    }

    /// Total lateness, residual patience etc. restricted to a cycle.
    pub fn cycle_values<'a>(&'a self, values: &'a [f64], cycle: &Cycle) -> &'a [f64] {
        &values[cycle.first..=cycle.last]
    }

    pub fn write_csv<W: Write>(&self, trace: &ArrivalTrace, w: W) -> Result<()> {
        if trace.len() != self.len() {
            return Err(Error::Inconsistent(
                "trace and schedule sizes differ".into(),
            ));
        }
        let mut cycle_of = vec![0usize; self.len()];
        for (k, c) in self.cycles.iter().enumerate() {
            for i in c.customers() {
                cycle_of[i] = k;
            }
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "index", "arrival", "service", "deadline", "begin", "waiting", "residual", "lateness",
            "cycle",
        ])?;
        for (i, c) in trace.customers().iter().enumerate() {
            out.write_record([
                i.to_string(),
                exact(c.arrival_time),
                exact(c.service_duration),
                exact(c.deadline),
                exact(self.begin_service[i]),
                exact(self.waiting[i]),
                exact(self.residual_patience[i]),
                exact(self.lateness[i]),
                cycle_of[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One scheduling decision, for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decision {
    pub state: DecisionState,
    pub chosen: usize,
}

/// Runs `discipline` on `trace`.
pub fn simulate(trace: &ArrivalTrace, discipline: DisciplineId) -> Schedule {
    run(trace, discipline, None)
}

/// Like [`simulate`], also returning the first `max_entries` decisions
/// taken with two or more customers waiting.
pub fn simulate_with_log(
    trace: &ArrivalTrace,
    discipline: DisciplineId,
    max_entries: usize,
) -> (Schedule, Vec<Decision>) {
    let mut log = Vec::new();
    let s = run(trace, discipline, Some((&mut log, max_entries)));
    (s, log)
}

fn run(
    trace: &ArrivalTrace,
    discipline: DisciplineId,
    mut log: Option<(&mut Vec<Decision>, usize)>,
) -> Schedule {
    let cs = trace.customers();
    let n = cs.len();
    let mut begin = vec![0.0; n];
    let mut order = Vec::with_capacity(n);
    let mut cycles = Vec::new();
    let mut room = WaitingRoom::new(discipline);
    // only maintained when logging
    let mut present: Vec<usize> = Vec::new();

    let mut next = 0;
    while next < n {
        // server idle and nobody waiting: the next arrival opens a cycle
        let cycle_first = next;
        let mut now = cs[next].arrival_time;
        loop {
            while next < n && cs[next].arrival_time <= now {
                room.push(next, cs[next].deadline);
                if log.is_some() {
                    present.push(next);
                }
                next += 1;
            }
            let Some(c) = room.pop() else { break };
            if let Some((log, cap)) = log.as_mut() {
                if present.len() > 1 && log.len() < *cap {
                    let waiting = present
                        .iter()
                        .map(|&i| WaitingCustomer {
                            index: i,
                            deadline: cs[i].deadline,
                            arrival_time: cs[i].arrival_time,
                        })
                        .collect();
                    log.push(Decision {
                        state: DecisionState { now, waiting },
                        chosen: c,
                    });
                }
                present.retain(|&i| i != c);
            }
            begin[c] = now;
            order.push(c);
            now += cs[c].service_duration;
            // completion precedes a simultaneous arrival only when it empties the system
            if room.is_empty() && next < n && cs[next].arrival_time >= now {
                break;
            }
        }
        cycles.push(Cycle {
            first: cycle_first,
            last: next - 1,
        });
    }

    let waiting: Vec<f64> = (0..n).map(|i| begin[i] - cs[i].arrival_time).collect();
    let residual: Vec<f64> = (0..n).map(|i| cs[i].deadline - begin[i]).collect();
    let lateness = residual.iter().map(|&r| (-r).max(0.0)).collect();
    Schedule {
        discipline,
        begin_service: begin,
        waiting,
        residual_patience: residual,
        lateness,
        service_order: Permutation::new(order).expect("every customer served once"),
        cycles,
    }
}

/// Recovers the busy cycles from begin-service epochs alone.
///
/// Customer `c` opens a cycle iff every earlier customer has completed
/// service by `c`'s arrival.
pub fn busy_cycles(trace: &ArrivalTrace, schedule: &Schedule) -> Result<Vec<Cycle>> {
    let cs = trace.customers();
    if cs.len() != schedule.len() {
        return Err(Error::Inconsistent(format!(
            "trace has {} customers, schedule {}",
            cs.len(),
            schedule.len()
        )));
    }
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut done = f64::NEG_INFINITY;
    for (i, c) in cs.iter().enumerate() {
        let b = schedule.begin_service[i];
        if !(b >= c.arrival_time) {
            return Err(Error::Inconsistent(format!(
                "customer {i} begins before arriving"
            )));
        }
        if c.arrival_time >= done {
            if b != c.arrival_time {
                return Err(Error::Inconsistent(format!(
                    "customer {i} finds the system empty but waits"
                )));
            }
            if let Some(last) = cycles.last_mut() {
                last.last = i - 1;
            }
            cycles.push(Cycle { first: i, last: i });
        }
        done = done.max(b + c.service_duration);
    }
    if let Some(last) = cycles.last_mut() {
        last.last = cs.len() - 1;
    }
    Ok(cycles)
}

/// Residual patiences of `cycle`'s customers sorted by (deadline, index).
pub fn residuals_in_deadline_order(
    trace: &ArrivalTrace,
    schedule: &Schedule,
    cycle: usize,
) -> Result<Vec<f64>> {
    let c = schedule.cycles.get(cycle).ok_or_else(|| {
        Error::Domain(format!(
            "cycle {cycle} out of range ({})",
            schedule.cycles.len()
        ))
    })?;
    if trace.len() != schedule.len() {
        return Err(Error::Inconsistent(
            "trace and schedule sizes differ".into(),
        ));
    }
    let alpha = deadline_order(trace, c);
    Ok(alpha
        .as_slice()
        .iter()
        .map(|&k| schedule.residual_patience[c.first + k])
        .collect())
}

/// `α` for a cycle: deadline rank → local customer offset within the cycle.
pub fn deadline_order(trace: &ArrivalTrace, cycle: &Cycle) -> Permutation {
    let cs = &trace.customers()[cycle.first..=cycle.last];
    let mut idx: Vec<usize> = (0..cs.len()).collect();
    idx.sort_by(|&a, &b| {
        cs[a]
            .deadline
            .partial_cmp(&cs[b].deadline)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Permutation::new(idx).expect("sorted indices form a permutation")
}
