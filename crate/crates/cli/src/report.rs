//! Human-readable tables over one or more run directories.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use crate::artifacts::{read_cauchy, read_config, read_summary, read_timeseries, Assertion, Relation};

fn fmt_measured(a: &Assertion) -> String {
    a.measured.map_or("non-finite".to_string(), |m| format!("{m:.6e}"))
}

pub fn report(dirs: &[&Path]) -> Result<String> {
    let mut out = String::new();
    let mut runs = Vec::new();
    for dir in dirs {
        let summary = read_summary(dir)?;
        let cfg = read_config(dir)?;
        writeln!(out, "== {} ({})", dir.display(), cfg.experiment)?;
        writeln!(out, "{:<40} {:>14} {:>4} {:>14}  result", "assertion", "measured", "", "threshold")?;
        for a in &summary {
            let rel = match a.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            writeln!(
                out,
                "{:<40} {:>14} {:>4} {:>14.6e}  {}",
                a.name,
                fmt_measured(a),
                rel,
                a.threshold,
                if a.pass { "PASS" } else { "FAIL" }
            )?;
        }
        let passed = summary.iter().filter(|a| a.pass).count();
        writeln!(out, "{passed}/{} assertions passed", summary.len())?;

        let cauchy = read_cauchy(dir)?;
        if !cauchy.is_empty() {
            writeln!(out, "cauchy history:")?;
            writeln!(out, "{:>4} {:>10} {:>14} {:>14}", "n", "t_n", "X distance", "Y distance")?;
            for r in &cauchy {
                writeln!(out, "{:>4} {:>10.4} {:>14.6e} {:>14.6e}", r.n, r.t_n, r.x_distance, r.y_distance)?;
            }
        }
        if let Some((t, _, e)) = read_timeseries(dir)?
            .into_iter()
            .filter(|r| r.1 == "asymptotic_error")
            .max_by(|a, b| a.0.total_cmp(&b.0))
        {
            writeln!(out, "final asymptotic error {e:.6e} at t = {t}")?;
        }
        runs.push((dir, cfg, summary));
    }

    // Convergence order between consecutive runs whose dt halves.
    for pair in runs.windows(2) {
        let (da, ca, sa) = &pair[0];
        let (db, cb, sb) = &pair[1];
        if ca.experiment != cb.experiment {
            continue;
        }
        let ratio = ca.solver.dt / cb.solver.dt;
        if (ratio - 2.0).abs() > 1e-9 {
            continue;
        }
        writeln!(out, "== dt halving {} -> {}", da.display(), db.display())?;
        writeln!(out, "{:<40} {:>12} {:>8}", "assertion", "error ratio", "order")?;
        for a in sa {
            let Some(b) = sb.iter().find(|b| b.name == a.name) else {
                continue;
            };
            if let (Some(x), Some(y)) = (a.measured, b.measured) {
                if x > 0.0 && y > 0.0 {
                    writeln!(out, "{:<40} {:>12.4} {:>8.3}", a.name, x / y, (x / y).log2())?;
                }
            }
        }
    }
    Ok(out)
}
