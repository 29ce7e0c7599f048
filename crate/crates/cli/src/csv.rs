//! CSV emission with a pinned schema. Numbers carry 9 significant digits;
//! unavailable diagnostics serialize as empty fields.

use pc_core::optimizer::RunHistory;
use pc_core::Real;

pub const HEADER: &str = "run_id,iteration,oracle_calls,beta,model_components,e_qg,kl_pq,best_g";

/// 9 significant digits, scientific.
pub fn sig9(x: Real) -> String {
    format!("{x:.8e}")
}

fn opt_sig9(x: Option<Real>) -> String {
    x.map(sig9).unwrap_or_default()
}

/// One CSV line per iteration record of a run.
pub fn rows(run_id: u64, history: &RunHistory<Real>) -> Vec<String> {
    history
        .records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                run_id,
                r.iteration,
                r.cumulative_oracle_calls,
                sig9(r.beta),
                r.density.component_count(),
                opt_sig9(r.e_qg),
                opt_sig9(r.kl_pq),
                sig9(r.best_g),
            )
        })
        .collect()
}

/// Parses `(run_id, iteration, beta)` columns back out of a results file;
/// enough structure for the best-fit schedule's second phase.
pub fn parse_beta_trajectories(text: &str) -> Result<Vec<Vec<Real>>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => return Err(format!("unexpected CSV header: {other:?}")),
    }
    let mut per_run: Vec<(u64, Vec<(usize, Real)>)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!("line {}: expected 8 fields", lineno + 2));
        }
        let run_id: u64 = fields[0]
            .parse()
            .map_err(|_| format!("line {}: bad run_id", lineno + 2))?;
        let iteration: usize = fields[1]
            .parse()
            .map_err(|_| format!("line {}: bad iteration", lineno + 2))?;
        let beta: Real = fields[3]
            .parse()
            .map_err(|_| format!("line {}: bad beta", lineno + 2))?;
        match per_run.iter_mut().find(|(id, _)| *id == run_id) {
            Some((_, rows)) => rows.push((iteration, beta)),
            None => per_run.push((run_id, vec![(iteration, beta)])),
        }
    }
    if per_run.is_empty() {
        return Err("CSV contains no data rows".into());
    }
    Ok(per_run
        .into_iter()
        .map(|(_, mut rows)| {
            rows.sort_by_key(|(it, _)| *it);
            rows.into_iter().map(|(_, beta)| beta).collect()
        })
        .collect())
}
