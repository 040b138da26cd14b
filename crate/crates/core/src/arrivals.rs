//! Renewal (GI) arrival traces marked with i.i.d. service durations and
//! patiences.
//!
//! Sampling is reproducible across platforms: each trace draws from three
//! ChaCha8 substreams keyed by the 64-bit seed (`seed_from_u64`), with
//! stream ids 0 (interarrivals), 1 (services) and 2 (patiences). Uniform
//! variates are taken on the open interval (0, 1) from the top 53 bits of
//! a `u64`. Exponential variates use inversion `-ln(u)/rate`, uniform ones
//! `lo + (hi - lo)u`, and gamma variates the `rand_distr` Marsaglia–Tsang
//! sampler.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STREAM_INTERARRIVAL: u64 = 0;
const STREAM_SERVICE: u64 = 1;
const STREAM_PATIENCE: u64 = 2;

/// A law on the real line. Parameters are in seconds where applicable.
///
/// Serialized as `{"family": "...", "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential {
        rate: f64,
    },
    Deterministic {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Shifted {
        base: Box<DistributionSpec>,
        offset: f64,
    },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn deterministic(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        DistributionSpec::Uniform { lo, hi }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        DistributionSpec::Gamma { shape, scale }
    }

    pub fn shifted(base: DistributionSpec, offset: f64) -> Self {
        DistributionSpec::Shifted {
            base: Box::new(base),
            offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            DistributionSpec::Exponential { rate } => {
                finite("rate", *rate)?;
                if *rate <= 0.0 {
                    return Err(Error::Config(format!("rate must be > 0, got {rate}")));
                }
            }
            DistributionSpec::Deterministic { value } => finite("value", *value)?,
            DistributionSpec::Uniform { lo, hi } => {
                finite("lo", *lo)?;
                finite("hi", *hi)?;
                if lo > hi {
                    return Err(Error::Config(format!("uniform lo {lo} > hi {hi}")));
                }
            }
            DistributionSpec::Gamma { shape, scale } => {
                finite("shape", *shape)?;
                finite("scale", *scale)?;
                if *shape <= 0.0 || *scale <= 0.0 {
                    return Err(Error::Config(format!(
                        "gamma shape and scale must be > 0, got ({shape}, {scale})"
                    )));
                }
            }
            DistributionSpec::Shifted { base, offset } => {
                finite("offset", *offset)?;
                base.validate()?;
            }
        }
        Ok(())
    }

    /// Closed-form mean.
    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistributionSpec::Gamma { shape, scale } => shape * scale,
            DistributionSpec::Shifted { base, offset } => base.mean() + offset,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / (rate * rate),
            DistributionSpec::Deterministic { .. } => 0.0,
            DistributionSpec::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            DistributionSpec::Gamma { shape, scale } => shape * scale * scale,
            DistributionSpec::Shifted { base, .. } => base.variance(),
        }
    }

    /// Supremum of the support; used to reject laws that can only produce
    /// nonpositive durations.
    fn support_max(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { .. } | DistributionSpec::Gamma { .. } => f64::INFINITY,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Uniform { hi, .. } => *hi,
            DistributionSpec::Shifted { base, offset } => base.support_max() + offset,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            DistributionSpec::Deterministic { .. } => true,
            DistributionSpec::Uniform { lo, hi } => lo == hi,
            DistributionSpec::Shifted { base, .. } => base.is_deterministic(),
            _ => false,
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => -open_unit(rng).ln() / rate,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Uniform { lo, hi } => lo + (hi - lo) * open_unit(rng),
            DistributionSpec::Gamma { shape, scale } => rand_distr::Gamma::new(*shape, *scale)
                .expect("validated gamma parameters")
                .sample(rng),
            DistributionSpec::Shifted { base, offset } => base.sample(rng) + offset,
        }
    }
}

/// Uniform on (0, 1), never 0 or 1.
fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn mean_of(spec: &DistributionSpec) -> f64 {
    spec.mean()
}

/// How long a generated trace runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// A fixed number of customers.
    Customers(usize),
    /// A fixed number of complete busy cycles.
    Cycles(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
    pub patience: DistributionSpec,
    pub seed: u64,
    pub horizon: Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Utilization {
    pub rho: f64,
    pub stable: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (role, spec) in [
            ("interarrival", &self.interarrival),
            ("service", &self.service),
        ] {
            spec.validate()
                .map_err(|e| Error::Config(format!("{role}: {e}")))?;
            if spec.support_max() <= 0.0 {
                return Err(Error::Config(format!(
                    "{role} law cannot produce positive durations"
                )));
            }
        }
        self.patience
            .validate()
            .map_err(|e| Error::Config(format!("patience: {e}")))?;
        match self.horizon {
            Horizon::Customers(0) | Horizon::Cycles(0) => {
                Err(Error::Config("horizon must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn utilization(&self) -> Utilization {
        let rho = self.service.mean() / self.interarrival.mean();
        Utilization {
            rho,
            stable: rho < 1.0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Self {
        ScenarioConfig {
            horizon,
            ..self.clone()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn utilization(config: &ScenarioConfig) -> Utilization {
    config.utilization()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub index: usize,
    pub arrival_time: f64,
    pub service_duration: f64,
    pub initial_patience: f64,
    pub deadline: f64,
}

impl Customer {
    pub fn new(
        index: usize,
        arrival_time: f64,
        service_duration: f64,
        initial_patience: f64,
    ) -> Self {
        Customer {
            index,
            arrival_time,
            service_duration,
            initial_patience,
            deadline: arrival_time + initial_patience,
        }
    }
}

/// A finite realization of the marked arrival process.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ArrivalTrace {
    customers: Vec<Customer>,
}

impl ArrivalTrace {
    pub fn new(customers: Vec<Customer>) -> Result<Self> {
        for (k, c) in customers.iter().enumerate() {
            if c.index != k {
                return Err(Error::Domain(format!(
                    "customer {k} carries index {}",
                    c.index
                )));
            }
            if !(c.arrival_time.is_finite() && c.initial_patience.is_finite()) {
                return Err(Error::Domain(format!("customer {k} has non-finite fields")));
            }
            if !(c.service_duration > 0.0 && c.service_duration.is_finite()) {
                return Err(Error::Domain(format!(
                    "customer {k} has service duration {}",
                    c.service_duration
                )));
            }
            if c.deadline != c.arrival_time + c.initial_patience {
                return Err(Error::Domain(format!(
                    "customer {k} deadline is not arrival + patience"
                )));
            }
            if k > 0 && !(c.arrival_time > customers[k - 1].arrival_time) {
                return Err(Error::Domain(format!(
                    "arrival times not strictly increasing at {k}"
                )));
            }
        }
        Ok(ArrivalTrace { customers })
    }

    pub fn from_parts(arrivals: &[f64], services: &[f64], patiences: &[f64]) -> Result<Self> {
        if arrivals.len() != services.len() || arrivals.len() != patiences.len() {
            return Err(Error::LengthMismatch {
                expected: arrivals.len(),
                actual: services.len().min(patiences.len()),
            });
        }
        let customers = (0..arrivals.len())
            .map(|k| Customer::new(k, arrivals[k], services[k], patiences[k]))
            .collect();
        Self::new(customers)
    }

    pub fn customers(&self) -> &[Customer] {
        &self.customers
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn arrivals(&self) -> Vec<f64> {
        self.customers.iter().map(|c| c.arrival_time).collect()
    }

    pub fn services(&self) -> Vec<f64> {
        self.customers.iter().map(|c| c.service_duration).collect()
    }

    pub fn patiences(&self) -> Vec<f64> {
        self.customers.iter().map(|c| c.initial_patience).collect()
    }

    pub fn deadlines(&self) -> Vec<f64> {
        self.customers.iter().map(|c| c.deadline).collect()
    }

    /// Same arrivals and patiences, new service durations.
    pub fn with_services(&self, services: &[f64]) -> Result<Self> {
        Self::from_parts(&self.arrivals(), services, &self.patiences())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "arrival", "service", "patience"])?;
        for c in &self.customers {
            out.write_record([
                c.index.to_string(),
                exact(c.arrival_time),
                exact(c.service_duration),
                exact(c.initial_patience),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            index: usize,
            arrival: f64,
            service: f64,
            patience: f64,
        }
        let mut input = csv::Reader::from_reader(r);
        let headers = input.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["index", "arrival", "service", "patience"] {
            return Err(Error::Domain(format!(
                "unexpected trace header {headers:?}"
            )));
        }
        let mut customers = Vec::new();
        for row in input.deserialize() {
            let row: Row = row?;
            customers.push(Customer::new(
                row.index,
                row.arrival,
                row.service,
                row.patience,
            ));
        }
        Self::new(customers)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub(crate) fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn positive(role: &str, k: usize, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Generation(format!(
            "{role} sample {k} is {v}; law must be positive"
        )))
    }
}

/// Draws a trace; a deterministic function of the config (seed included).
///
/// The first customer arrives at time 0. With a cycle horizon the trace
/// stops right before the arrival that would open cycle `n + 1`.
pub fn generate_trace(config: &ScenarioConfig) -> Result<ArrivalTrace> {
    config.validate()?;
    let util = config.utilization();
    if let Horizon::Cycles(_) = config.horizon {
        if !util.stable {
            return Err(Error::Unstable { rho: util.rho });
        }
    }
    let mut gaps = stream(config.seed, STREAM_INTERARRIVAL);
    let mut services = stream(config.seed, STREAM_SERVICE);
    let mut patiences = stream(config.seed, STREAM_PATIENCE);

    let mut customers = Vec::new();
    let mut t = 0.0;
    let mut cycles = 0usize;
    // completion epoch of the work present; arrivals at or after it find the system empty
    let mut work_done_at = f64::NEG_INFINITY;
    loop {
        let k = customers.len();
        if let Horizon::Customers(n) = config.horizon {
            if k == n {
                break;
            }
        }
        if k > 0 {
            let gap = positive("interarrival", k, config.interarrival.sample(&mut gaps))?;
            t += gap;
        }
        if t >= work_done_at {
            if let Horizon::Cycles(n) = config.horizon {
                if cycles == n {
                    break;
                }
            }
            cycles += 1;
            work_done_at = t;
        }
        let sigma = positive("service", k, config.service.sample(&mut services))?;
        let p = config.patience.sample(&mut patiences);
        if !p.is_finite() {
            return Err(Error::Generation(format!("patience sample {k} is {p}")));
        }
        work_done_at += sigma;
        customers.push(Customer::new(k, t, sigma, p));
    }
    ArrivalTrace::new(customers)
}

/// Sample mean and standard error, used by distribution sanity tests.
pub fn sample_stats<R: Rng>(spec: &DistributionSpec, rng: &mut R, n: usize) -> (f64, f64) {
    let xs: Vec<f64> = (0..n).map(|_| spec.sample(rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
