//! Per-timestep statistics of `M_t` across many traces.
//!
//! Percentiles use the nearest-rank rule: the `p`-th percentile of `N`
//! sorted values is the value at 1-based rank `ceil(p * N / 100)` (at least
//! 1). The standard deviation is the population one (divide by `N`).

use std::fmt::Write as _;

use crate::cli::files::fmt_f64;
use crate::measurement::StepRecord;

pub const LOW_PERCENTILE: usize = 20;
pub const HIGH_PERCENTILE: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub timestep: usize,
    pub mean: f64,
    pub std: f64,
    pub p20: f64,
    pub p80: f64,
}

/// 1-based nearest rank for integer percent `pct` of `n` values.
pub fn nearest_rank(pct: usize, n: usize) -> usize {
    (pct * n).div_ceil(100).max(1)
}

/// Nearest-rank percentile of already sorted values.
pub fn percentile(sorted: &[f64], pct: usize) -> f64 {
    sorted[nearest_rank(pct, sorted.len()) - 1]
}

pub fn step_stats(traces: &[Vec<StepRecord>]) -> Result<Vec<StepStats>, String> {
    let first = traces.first().ok_or("no traces given")?;
    for (i, t) in traces.iter().enumerate() {
        if t.len() != first.len() {
            return Err(format!(
                "trace {i} has {} steps, trace 0 has {} (all traces need the same T)",
                t.len(),
                first.len()
            ));
        }
    }
    let n = traces.len() as f64;
    let mut out = Vec::with_capacity(first.len());
    for (i, step) in first.iter().enumerate() {
        let mut values: Vec<f64> = traces.iter().map(|t| t[i].m_mean).collect();
        // shifted by the first value so constant columns give exactly 0
        let shift = values[0];
        let d_mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
        let d_sq = values.iter().map(|v| (v - shift) * (v - shift)).sum::<f64>() / n;
        let mean = shift + d_mean;
        let var = (d_sq - d_mean * d_mean).max(0.0);
        values.sort_by(f64::total_cmp);
        out.push(StepStats {
            timestep: step.timestep,
            mean,
            std: var.sqrt(),
            p20: percentile(&values, LOW_PERCENTILE),
            p80: percentile(&values, HIGH_PERCENTILE),
        });
    }
    Ok(out)
}

pub fn write_stats(stats: &[StepStats], n_traces: usize) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# m_mean over {n_traces} traces; std is the population std; percentiles are nearest-rank, rank = ceil(p*N)"
    )
    .unwrap();
    out.push_str("timestep\tmean\tstd\tp20\tp80\n");
    for s in stats {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            s.timestep,
            fmt_f64(s.mean),
            fmt_f64(s.std),
            fmt_f64(s.p20),
            fmt_f64(s.p80)
        )
        .unwrap();
    }
    out
}

pub fn parse_stats(text: &str) -> Result<Vec<StepStats>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate().skip(2) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(format!("line {}: expected 5 columns", no + 1));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format!("line {}: bad number `{s}`", no + 1))
        };
        out.push(StepStats {
            timestep: f[0].parse().map_err(|_| format!("line {}: bad timestep", no + 1))?,
            mean: num(f[1])?,
            std: num(f[2])?,
            p20: num(f[3])?,
            p80: num(f[4])?,
        });
    }
    Ok(out)
}
