//! Experiment orchestration behind the command-line front end.
//!
//! `verify_bound` walks the configured horizons in order, runs the seeded
//! trial sweep for each, evaluates both certificates and collects the
//! outcome; horizons that overflow are recorded and the remaining ones still
//! run. The stream for (horizon index `h`, trial `t`) is
//! `(h << 32) + t` under the config's base seed, which is what makes reruns
//! and alternative worker counts byte-identical.
//!
//! The `cmd_*` functions are thin wrappers that render one operation each as
//! CSV on an output sink.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::ar_model::{simulate, SystemMatrix, Trajectory};
use crate::config::ExperimentConfig;
use crate::divergence::{hellinger_sq_exact, hellinger_sq_mc, kl, tv_mc};
use crate::error::{Error, Result};
use crate::inference::{
    mle_select, run_trials, theorem1_certificate, theorem2_certificate, BoundReport,
    HypothesisClass, Theorem2Report, TrialSummary,
};
use crate::report::{format_value, write_verify_csv};
use crate::seed::SeedSpec;

/// Everything measured at one horizon.
#[derive(Debug, Clone)]
pub struct HorizonReport {
    pub horizon: usize,
    pub summary: TrialSummary,
    pub theorem1: BoundReport,
    pub theorem2: Theorem2Report,
}

impl HorizonReport {
    pub fn all_bounds_hold(&self) -> bool {
        self.theorem1.holds_mi && self.theorem1.holds_log_card && self.theorem2.holds
    }
}

/// Per-horizon result: a full report, or the overflow that aborted it.
#[derive(Debug, Clone)]
pub enum HorizonOutcome {
    Report(HorizonReport),
    Overflow { horizon: usize, error: Error },
}

/// Outcome of a full certification run.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub class_size: usize,
    pub horizons: Vec<HorizonOutcome>,
    /// True when every horizon completed and every bound held.
    pub certified: bool,
    pub any_overflow: bool,
}

/// Run the certification experiment described by `config`.
pub fn verify_bound(config: &ExperimentConfig) -> Result<VerifyOutcome> {
    let (class, _) = config.build_class()?;
    let mut horizons = Vec::with_capacity(config.horizons.len());
    let mut certified = true;
    let mut any_overflow = false;
    for (h, &n) in config.horizons.iter().enumerate() {
        let seed = SeedSpec::new(config.base_seed, (h as u64) << 32);
        match run_trials(&config.truth, &class, n, config.trials, seed) {
            Ok(summary) => {
                let report = HorizonReport {
                    horizon: n,
                    theorem1: theorem1_certificate(&summary, &class),
                    theorem2: theorem2_certificate(&summary),
                    summary,
                };
                certified &= report.all_bounds_hold();
                horizons.push(HorizonOutcome::Report(report));
            }
            Err(e) if e.is_overflow() => {
                certified = false;
                any_overflow = true;
                horizons.push(HorizonOutcome::Overflow { horizon: n, error: e });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(VerifyOutcome {
        class_size: class.len(),
        horizons,
        certified,
        any_overflow,
    })
}

/// Simulate and render the trajectory as CSV.
pub fn cmd_simulate<W: Write>(
    a: &SystemMatrix,
    steps: usize,
    seed: SeedSpec,
    out: W,
) -> Result<()> {
    simulate(a, steps, seed)?.write_csv(out)
}

/// Exact and sampled divergences between two laws, one CSV row.
pub fn cmd_divergence<W: Write>(
    a: &SystemMatrix,
    b: &SystemMatrix,
    steps: usize,
    samples: usize,
    seed: SeedSpec,
    mut out: W,
) -> Result<()> {
    let kl_est = kl(a, b, steps)?;
    let h2 = hellinger_sq_exact(a, b, steps)?;
    let h2_mc = hellinger_sq_mc(a, b, steps, samples, seed.with_stream(0))?;
    let tv = tv_mc(a, b, steps, samples, seed.with_stream(1))?;
    writeln!(
        out,
        "kl,hellinger_sq,hellinger_sq_mc,hellinger_sq_mc_se,tv_mc,tv_mc_se"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        format_value(kl_est.value),
        format_value(h2.value),
        format_value(h2_mc.value),
        format_value(h2_mc.std_error),
        format_value(tv.value),
        format_value(tv.std_error),
    )?;
    Ok(())
}

/// Select the maximum-likelihood member for a trajectory; one CSV row per
/// member with its log-likelihood and a selection marker.
pub fn cmd_mle<W: Write>(traj: &Trajectory, class: &HypothesisClass, mut out: W) -> Result<()> {
    let (selected, lls) = mle_select(traj, class)?;
    writeln!(out, "member,log_likelihood,selected")?;
    for (j, ll) in lls.iter().enumerate() {
        writeln!(
            out,
            "{j},{},{}",
            format_value(*ll),
            if j == selected { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Run `verify_bound` for a config file and write the CSV report.
///
/// `seed_override` replaces the config's base seed, `output_override` its
/// output path. Returns the outcome plus the path written, so the caller can
/// map certification state onto an exit status.
pub fn cmd_verify_bound(
    config_path: &Path,
    seed_override: Option<u64>,
    output_override: Option<PathBuf>,
) -> Result<(VerifyOutcome, PathBuf)> {
    let text = std::fs::read_to_string(config_path)?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(seed) = seed_override {
        config.base_seed = seed;
    }
    if let Some(path) = output_override {
        config.output_path = path;
    }
    let outcome = verify_bound(&config)?;
    let file = File::create(&config.output_path)?;
    let mut writer = BufWriter::new(file);
    write_verify_csv(&outcome, &mut writer)?;
    writer.flush()?;
    Ok((outcome, config.output_path.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ClassSpec;

    fn scalar_config(truth: f64, horizons: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            truth: SystemMatrix::scalar(truth).unwrap(),
            class_spec: ClassSpec::Grid {
                center: SystemMatrix::scalar(0.0).unwrap(),
                radius: 0.9,
                points_per_axis: 3,
            },
            horizons,
            trials,
            mc_samples: 1000,
            base_seed: 7,
            output_path: PathBuf::from("unused.csv"),
        }
    }

    #[test]
    fn verify_bound_runs_every_horizon() {
        let outcome = verify_bound(&scalar_config(0.5, vec![10, 25], 60)).unwrap();
        assert_eq!(outcome.horizons.len(), 2);
        assert_eq!(outcome.class_size, 4);
        assert!(!outcome.any_overflow);
    }

    #[test]
    fn overflow_horizon_is_recorded_and_the_rest_still_run() {
        let mut config = scalar_config(2.0, vec![10, 600], 8);
        config.class_spec = ClassSpec::Explicit(vec![SystemMatrix::scalar(2.0).unwrap()]);
        // Keep a companion so the class is not a singleton at n = 600.
        if let ClassSpec::Explicit(members) = &mut config.class_spec {
            members.push(SystemMatrix::scalar(0.0).unwrap());
        }
        let outcome = verify_bound(&config).unwrap();
        assert!(outcome.any_overflow);
        assert!(!outcome.certified);
        assert!(matches!(outcome.horizons[0], HorizonOutcome::Report(_)));
        match &outcome.horizons[1] {
            HorizonOutcome::Overflow { horizon, error } => {
                assert_eq!(*horizon, 600);
                assert!(error.is_overflow());
            }
            other => panic!("expected overflow outcome, got {other:?}"),
        }
    }

    #[test]
    fn divergence_row_is_zero_for_equal_laws() {
        let a = SystemMatrix::scalar(0.5).unwrap();
        let mut buf = Vec::new();
        cmd_divergence(&a, &a, 4, 128, SeedSpec::new(3, 0), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "kl,hellinger_sq,hellinger_sq_mc,hellinger_sq_mc_se,tv_mc,tv_mc_se"
        );
        let fields: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(fields[0], 0.0);
        assert!(fields[1].abs() <= 1e-12);
        assert_eq!(fields[2], 0.0);
        assert_eq!(fields[4], 0.0);
    }
}
