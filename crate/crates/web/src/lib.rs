//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every binding takes and returns JSON strings. The `*_json` functions do
//! the work and are callable natively, which is how they are tested.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use softdeadline::majorization::{
    convex_dominance_check, majorizes, DominanceReport, DEFAULT_SUM_TOLERANCE,
};
use softdeadline::{simulate, ConvexFn, Cycle, DisciplineId, Horizon, ScenarioConfig};

/// Largest trace the schedule view accepts.
pub const MAX_CUSTOMERS: usize = 2_000;
/// Largest cycle count the comparison view accepts.
pub const MAX_CYCLES: usize = 200_000;

#[derive(Serialize)]
struct Row {
    index: usize,
    arrival: f64,
    service: f64,
    deadline: f64,
    begin: f64,
    residual: f64,
    lateness: f64,
}

#[derive(Serialize)]
struct ScheduleView {
    discipline: DisciplineId,
    rho: f64,
    customers: Vec<Row>,
    cycles: Vec<Cycle>,
    mean_lateness: f64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Simulates `discipline` on the first `customers` arrivals of the scenario.
pub fn schedule_json(
    config_json: &str,
    discipline: &str,
    customers: usize,
) -> Result<String, String> {
    if customers == 0 || customers > MAX_CUSTOMERS {
        return Err(format!("customers must be in 1..={MAX_CUSTOMERS}"));
    }
    let cfg = ScenarioConfig::from_json(config_json).map_err(err)?;
    let d: DisciplineId = discipline.parse().map_err(err)?;
    let trace = softdeadline::generate_trace(&cfg.with_horizon(Horizon::Customers(customers)))
        .map_err(err)?;
    let s = simulate(&trace, d);
    let rows: Vec<Row> = trace
        .customers()
        .iter()
        .enumerate()
        .map(|(i, c)| Row {
            index: i,
            arrival: c.arrival_time,
            service: c.service_duration,
            deadline: c.deadline,
            begin: s.begin_service[i],
            residual: s.residual_patience[i],
            lateness: s.lateness[i],
        })
        .collect();
    let view = ScheduleView {
        discipline: d,
        rho: cfg.utilization().rho,
        mean_lateness: s.lateness.iter().sum::<f64>() / customers as f64,
        customers: rows,
        cycles: s.cycles,
    };
    serde_json::to_string(&view).map_err(err)
}

/// Runs the common-trace comparison; `disciplines` and `functions` are
/// comma-separated names.
pub fn compare_json(
    config_json: &str,
    disciplines: &str,
    functions: &str,
    cycles: usize,
) -> Result<String, String> {
    if cycles > MAX_CYCLES {
        return Err(format!("at most {MAX_CYCLES} cycles in the browser"));
    }
    let cfg = ScenarioConfig::from_json(config_json).map_err(err)?;
    let ds = parse_list::<DisciplineId>(disciplines)?;
    let fns = parse_list::<ConvexFn>(functions)?;
    let report = softdeadline::compare_disciplines(&cfg, &ds, &fns, cycles).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

#[derive(Serialize)]
struct MajorizationView {
    majorized: bool,
    /// Sums of the k largest entries, k = 1..n.
    top_sums_x: Vec<f64>,
    top_sums_y: Vec<f64>,
    dominance: DominanceReport,
}

/// Checks `x ≺ y` for comma-separated vectors and evaluates the built-in
/// convex family on both.
pub fn majorization_json(x: &str, y: &str) -> Result<String, String> {
    let x = parse_list::<f64>(x)?;
    let y = parse_list::<f64>(y)?;
    let majorized = majorizes(&x, &y, DEFAULT_SUM_TOLERANCE).map_err(err)?;
    let top = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        s.iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect()
    };
    let view = MajorizationView {
        majorized,
        top_sums_x: top(&x),
        top_sums_y: top(&y),
        dominance: convex_dominance_check(&x, &y, &ConvexFn::default_family()).map_err(err)?,
    };
    serde_json::to_string(&view).map_err(err)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

#[wasm_bindgen]
pub fn simulate_schedule(
    config_json: &str,
    discipline: &str,
    customers: usize,
) -> Result<String, JsError> {
    schedule_json(config_json, discipline, customers).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare(
    config_json: &str,
    disciplines: &str,
    functions: &str,
    cycles: usize,
) -> Result<String, JsError> {
    compare_json(config_json, disciplines, functions, cycles).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn check_majorization(x: &str, y: &str) -> Result<String, JsError> {
    majorization_json(x, y).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const MM: &str = r#"{
        "interarrival": {"family": "exponential", "params": {"rate": 1.0}},
        "service": {"family": "exponential", "params": {"rate": 1.25}},
        "patience": {"family": "exponential", "params": {"rate": 0.2}},
        "seed": 1,
        "horizon": {"cycles": 100}
    }"#;

    #[test]
    fn schedule_view() {
        let v: Value = serde_json::from_str(&schedule_json(MM, "edf", 50).unwrap()).unwrap();
        assert_eq!(v["customers"].as_array().unwrap().len(), 50);
        assert_eq!(v["discipline"], "edf");
        assert!((v["rho"].as_f64().unwrap() - 0.8).abs() < 1e-12);
        assert!(schedule_json(MM, "srpt", 50).is_err());
        assert!(schedule_json(MM, "edf", 0).is_err());
        assert!(schedule_json("{}", "edf", 5).is_err());
    }

    #[test]
    fn compare_view() {
        let v: Value =
            serde_json::from_str(&compare_json(MM, "edf,ldf", "lateness", 500).unwrap()).unwrap();
        assert_eq!(v["grid"].as_array().unwrap().len(), 2);
        assert_eq!(v["verdicts"][0]["phi"], "edf");
        assert!(compare_json(MM, "", "lateness", 500).is_err());
        assert!(compare_json(MM, "edf", "cubic", 500).is_err());
    }

    #[test]
    fn majorization_view() {
        let v: Value =
            serde_json::from_str(&majorization_json("-2,10,3", "-4,10,5").unwrap()).unwrap();
        assert_eq!(v["majorized"], true);
        assert_eq!(v["top_sums_x"], serde_json::json!([10.0, 13.0, 11.0]));
        let v: Value = serde_json::from_str(&majorization_json("1,2,3", "2,2,2").unwrap()).unwrap();
        assert_eq!(v["majorized"], false);
        assert!(majorization_json("1,2", "1").is_err());
        assert!(majorization_json("1,x", "1,2").is_err());
    }
}
