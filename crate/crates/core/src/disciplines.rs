//! Non-preemptive selection policies and the `≪` compliance relation.
//!
//! `Φ ≪ Ψ` holds when, at every decision instant, the customer chosen by
//! `Φ` has a deadline no later than the one chosen by `Ψ`. Ties are always
//! broken toward the smallest arrival index.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Substream id used by `random:<seed>` disciplines.
const STREAM_DISCIPLINE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DisciplineId {
    Edf,
    Ldf,
    Fifo,
    Lifo,
    Random(u64),
}

impl DisciplineId {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, DisciplineId::Random(_))
    }
}

impl fmt::Display for DisciplineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisciplineId::Edf => write!(f, "edf"),
            DisciplineId::Ldf => write!(f, "ldf"),
            DisciplineId::Fifo => write!(f, "fifo"),
            DisciplineId::Lifo => write!(f, "lifo"),
            DisciplineId::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for DisciplineId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "edf" => Ok(DisciplineId::Edf),
            "ldf" => Ok(DisciplineId::Ldf),
            "fifo" => Ok(DisciplineId::Fifo),
            "lifo" => Ok(DisciplineId::Lifo),
            other => other
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(DisciplineId::Random)
                .ok_or_else(|| Error::UnknownDiscipline(s.to_string())),
        }
    }
}

impl TryFrom<String> for DisciplineId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DisciplineId> for String {
    fn from(d: DisciplineId) -> Self {
        d.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaitingCustomer {
    pub index: usize,
    pub deadline: f64,
    pub arrival_time: f64,
}

/// What the server sees when it becomes free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionState {
    pub now: f64,
    pub waiting: Vec<WaitingCustomer>,
}

impl DecisionState {
    pub fn residual_patience(&self, w: &WaitingCustomer) -> f64 {
        w.deadline - self.now
    }

    pub fn deadline_of(&self, index: usize) -> Option<f64> {
        self.waiting
            .iter()
            .find(|w| w.index == index)
            .map(|w| w.deadline)
    }
}

fn deadline(a: &WaitingCustomer, b: &WaitingCustomer) -> Ordering {
    a.deadline
        .partial_cmp(&b.deadline)
        .unwrap_or(Ordering::Equal)
}

fn arrival(a: &WaitingCustomer, b: &WaitingCustomer) -> Ordering {
    a.arrival_time
        .partial_cmp(&b.arrival_time)
        .unwrap_or(Ordering::Equal)
}

/// Stateful selector; only `random:<seed>` actually carries state.
pub struct Selector {
    id: DisciplineId,
    rng: Option<ChaCha8Rng>,
}

impl Selector {
    pub fn new(id: DisciplineId) -> Self {
        let rng = match id {
            DisciplineId::Random(seed) => Some(discipline_stream(seed)),
            _ => None,
        };
        Selector { id, rng }
    }

    pub fn select(&mut self, s: &DecisionState) -> Result<usize> {
        if s.waiting.is_empty() {
            return Err(Error::Contract(
                "selection requested with an empty waiting set".into(),
            ));
        }
        let w = &s.waiting;
        let chosen = match self.id {
            DisciplineId::Edf => w
                .iter()
                .min_by(|a, b| deadline(a, b).then(a.index.cmp(&b.index))),
            DisciplineId::Ldf => w
                .iter()
                .min_by(|a, b| deadline(b, a).then(a.index.cmp(&b.index))),
            DisciplineId::Fifo => w
                .iter()
                .min_by(|a, b| arrival(a, b).then(a.index.cmp(&b.index))),
            DisciplineId::Lifo => w
                .iter()
                .min_by(|a, b| arrival(b, a).then(a.index.cmp(&b.index))),
            DisciplineId::Random(_) => {
                // canonical order makes the draw independent of presentation order
                let mut sorted: Vec<&WaitingCustomer> = w.iter().collect();
                sorted.sort_by_key(|c| c.index);
                let rng = self.rng.as_mut().expect("random selector has a stream");
                Some(sorted[rng.random_range(0..sorted.len())])
            }
        };
        Ok(chosen.expect("nonempty").index)
    }
}

fn discipline_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_DISCIPLINE);
    rng
}

/// Customer selected by `d` in state `s`. For `random:<seed>` this is the
/// first draw of a fresh stream; use [`Selector`] for a sequence of draws.
pub fn select(d: DisciplineId, s: &DecisionState) -> Result<usize> {
    Selector::new(d).select(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LlCounterexample {
    pub state: DecisionState,
    pub phi_choice: usize,
    pub psi_choice: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LlReport {
    pub phi: DisciplineId,
    pub psi: DisciplineId,
    pub checked: usize,
    pub counterexample: Option<LlCounterexample>,
}

impl LlReport {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Checks `phi ≪ psi` pointwise on the sampled states.
pub fn check_ll_order(
    phi: DisciplineId,
    psi: DisciplineId,
    states: &[DecisionState],
) -> Result<LlReport> {
    for d in [phi, psi] {
        if !d.is_deterministic() {
            return Err(Error::Contract(format!("{d} has no pointwise ≪ meaning")));
        }
    }
    if states.is_empty() {
        return Err(Error::Contract("no decision states to check".into()));
    }
    for s in states {
        let (a, b) = (select(phi, s)?, select(psi, s)?);
        let (da, db) = (s.deadline_of(a).unwrap(), s.deadline_of(b).unwrap());
        if !(da <= db) {
            return Ok(LlReport {
                phi,
                psi,
                checked: states.len(),
                counterexample: Some(LlCounterexample {
                    state: s.clone(),
                    phi_choice: a,
                    psi_choice: b,
                }),
            });
        }
    }
    Ok(LlReport {
        phi,
        psi,
        checked: states.len(),
        counterexample: None,
    })
}

/// Random decision states with 1..=`max_waiting` customers, including
/// deliberate deadline ties.
pub fn synthetic_states(n: usize, max_waiting: usize, seed: u64) -> Vec<DecisionState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let now = rng.random_range(0.0..100.0);
            let m = rng.random_range(1..=max_waiting.max(1));
            let mut arrivals: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..now)).collect();
            arrivals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let base = rng.random_range(0..1000usize);
            let waiting = arrivals
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    // integer deadlines so ties occur
                    let deadline = now.floor() + rng.random_range(-20i32..20) as f64;
                    WaitingCustomer {
                        index: base + k,
                        deadline,
                        arrival_time: t,
                    }
                })
                .collect();
            DecisionState { now, waiting }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) struct DeadlineKey {
    deadline: f64,
    index: usize,
}

impl Eq for DeadlineKey {}

impl Ord for DeadlineKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // +0.0 folds -0.0 into 0.0 so total_cmp agrees with ==
        (self.deadline + 0.0)
            .total_cmp(&(other.deadline + 0.0))
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for DeadlineKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Waiting room used by the event engine. Each variant realizes the same
/// choice as [`select`] in amortized logarithmic time.
pub(crate) enum WaitingRoom {
    Edf(BinaryHeap<Reverse<DeadlineKey>>),
    Ldf(BinaryHeap<(MaxDeadline, Reverse<usize>)>),
    Fifo(VecDeque<usize>),
    Lifo(Vec<usize>),
    Random(Vec<usize>, Box<ChaCha8Rng>),
}

/// Deadline ordered by value only, for the LDF max-heap.
#[derive(Clone, Copy, PartialEq)]
pub(crate) struct MaxDeadline(f64);

impl Eq for MaxDeadline {}

impl Ord for MaxDeadline {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0 + 0.0).total_cmp(&(other.0 + 0.0))
    }
}

impl PartialOrd for MaxDeadline {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl WaitingRoom {
    pub(crate) fn new(d: DisciplineId) -> Self {
        match d {
            DisciplineId::Edf => WaitingRoom::Edf(BinaryHeap::new()),
            DisciplineId::Ldf => WaitingRoom::Ldf(BinaryHeap::new()),
            DisciplineId::Fifo => WaitingRoom::Fifo(VecDeque::new()),
            DisciplineId::Lifo => WaitingRoom::Lifo(Vec::new()),
            DisciplineId::Random(seed) => {
                WaitingRoom::Random(Vec::new(), Box::new(discipline_stream(seed)))
            }
        }
    }

    pub(crate) fn push(&mut self, index: usize, deadline: f64) {
        match self {
            WaitingRoom::Edf(h) => h.push(Reverse(DeadlineKey { deadline, index })),
            WaitingRoom::Ldf(h) => h.push((MaxDeadline(deadline), Reverse(index))),
            WaitingRoom::Fifo(q) => q.push_back(index),
            WaitingRoom::Lifo(s) => s.push(index),
            WaitingRoom::Random(v, _) => {
                // kept sorted by index; arrivals come in index order
                v.push(index)
            }
        }
    }

    pub(crate) fn pop(&mut self) -> Option<usize> {
        match self {
            WaitingRoom::Edf(h) => h.pop().map(|Reverse(k)| k.index),
            WaitingRoom::Ldf(h) => h.pop().map(|(_, Reverse(i))| i),
            WaitingRoom::Fifo(q) => q.pop_front(),
            WaitingRoom::Lifo(s) => s.pop(),
            WaitingRoom::Random(v, rng) => {
                if v.is_empty() {
                    None
                } else {
                    let k = rng.random_range(0..v.len());
                    Some(v.remove(k))
                }
            }
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        match self {
            WaitingRoom::Edf(h) => h.is_empty(),
            WaitingRoom::Ldf(h) => h.is_empty(),
            WaitingRoom::Fifo(q) => q.is_empty(),
            WaitingRoom::Lifo(s) => s.is_empty(),
            WaitingRoom::Random(v, _) => v.is_empty(),
        }
    }
}
