//! Complexity sweeps: run a template over several party counts and fit the
//! growth exponent of message and byte totals on a log-log scale.

use serde::Serialize;

use crate::runner::Outcome;
use crate::scenario::{Protocol, Scenario, SchemaError};
use crate::suites::{max_f, par_map};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    /// Slope: the fitted growth exponent.
    pub exponent: f64,
    /// Intercept `ln c` of `y ≈ c·x^exponent`.
    pub intercept: f64,
    pub r2: f64,
}

/// Fits `y ≈ c·x^k`. Needs at least two distinct positive `x`.
pub fn loglog(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(Fit { exponent, intercept, r2 })
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub f: usize,
    pub l: usize,
    pub messages: u64,
    pub bytes: u64,
    pub end_time: String,
    pub violations: usize,
}

/// Sweep table with fitted exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub message_exponent: Option<Fit>,
    pub byte_exponent: Option<Fit>,
}

/// Full-length inputs that agree up to the last element.
pub fn diverse_inputs(n: usize, l: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|i| (0..l).map(|k| if k + 1 == l { format!("x{i}") } else { format!("v{k}") }).collect())
        .collect()
}

/// Runs `template` once per `n` (with the largest tolerated `f`, and `L = n`
/// when `l_equals_n`), fault-free, with [`diverse_inputs`] for vector
/// protocols.
pub fn sweep(template: &Scenario, ns: &[usize], l_equals_n: bool) -> Result<SweepReport, SchemaError> {
    let scenarios: Vec<Scenario> = ns
        .iter()
        .map(|&n| {
            let mut sc = template.clone();
            sc.n = n;
            sc.f = max_f(sc.protocol, n);
            if l_equals_n {
                sc.l = n;
            }
            sc.adversary.clear();
            sc.suspension = None;
            sc.inputs = Default::default();
            if matches!(sc.protocol, Protocol::Pc3 | Protocol::PcOpt | Protocol::Pc5f1 | Protocol::Spc) {
                sc.inputs.vectors = Some(diverse_inputs(n, sc.l));
            }
            sc
        })
        .collect();
    for sc in &scenarios {
        sc.validate()?;
    }
    let rows = par_map(&scenarios, |sc| {
        let o = Outcome::of(sc.clone()).expect("validated");
        SweepRow {
            n: sc.n,
            f: sc.f,
            l: sc.l,
            messages: o.sim.messages,
            bytes: o.sim.bytes,
            end_time: o.sim.end_time.to_string(),
            violations: o.violations.len(),
        }
    });
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let msgs: Vec<f64> = rows.iter().map(|r| r.messages as f64).collect();
    let bytes: Vec<f64> = rows.iter().map(|r| r.bytes as f64).collect();
    Ok(SweepReport { message_exponent: loglog(&xs, &msgs), byte_exponent: loglog(&xs, &bytes), rows })
}

