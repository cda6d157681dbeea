//! Deterministic CSV reporting.
//!
//! One schema for certification runs: header `n,quantity,value`, one row per
//! `(horizon, quantity)` pair in a fixed order, UTF-8, LF endings, numeric
//! fields with 17 significant digits. Identical outcomes serialize to
//! identical bytes.

use std::io::Write;

use crate::error::Result;
use crate::harness::{HorizonOutcome, VerifyOutcome};

/// Render a number with 17 significant digits (round-trip exact for `f64`).
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Header of the certification report.
pub const VERIFY_CSV_HEADER: &str = "n,quantity,value";

/// Serialize a certification outcome. Row order per horizon is fixed:
/// the weighted-error certificate, the Hellinger-chain certificate, the
/// misselection rate, then one selection frequency per class member; a
/// horizon that overflowed contributes a single `overflow` row. The final
/// row `all,certified,…` states whether every bound held.
pub fn write_verify_csv<W: Write>(outcome: &VerifyOutcome, mut out: W) -> Result<()> {
    writeln!(out, "{VERIFY_CSV_HEADER}")?;
    let mut row = |n: &str, quantity: &str, value: f64| -> Result<()> {
        writeln!(out, "{n},{quantity},{}", format_value(value))?;
        Ok(())
    };
    for horizon in &outcome.horizons {
        match horizon {
            HorizonOutcome::Report(r) => {
                let n = r.horizon.to_string();
                let t1 = &r.theorem1;
                let t2 = &r.theorem2;
                let s = &r.summary;
                row(&n, "lhs", t1.lhs)?;
                row(&n, "se_lhs", t1.se_lhs)?;
                row(&n, "mi_estimate", t1.mi_estimate)?;
                row(&n, "rhs_mi", t1.rhs_mi)?;
                row(&n, "rhs_log_card", t1.rhs_log_card)?;
                row(&n, "holds_mi", flag(t1.holds_mi))?;
                row(&n, "holds_log_card", flag(t1.holds_log_card))?;
                row(&n, "slack_ratio", t1.slack_ratio)?;
                row(&n, "e_h2", t2.e_h2)?;
                row(&n, "se_e_h2", t2.se_e_h2)?;
                row(&n, "middle_term", t2.middle_term)?;
                row(&n, "rhs_theorem2", t2.rhs)?;
                row(&n, "holds_theorem2", flag(t2.holds))?;
                row(&n, "misselection_rate", s.mean_misselection)?;
                let t = s.trials as f64;
                for (j, &c) in s.selection_counts.iter().enumerate() {
                    row(&n, &format!("selection_freq_{j}"), c as f64 / t)?;
                }
            }
            HorizonOutcome::Overflow { horizon, .. } => {
                row(&horizon.to_string(), "overflow", 1.0)?;
            }
        }
    }
    row("all", "certified", flag(outcome.certified))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_with_17_significant_digits() {
        assert_eq!(format_value(0.5), "5.0000000000000000e-1");
        assert_eq!(format_value(1.0 / 3.0), "3.3333333333333331e-1");
        let x = 0.1 + 0.2;
        let back: f64 = format_value(x).parse().unwrap();
        assert_eq!(back, x);
    }
}
