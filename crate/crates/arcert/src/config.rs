//! Experiment configuration: flat, human-writable key-value text.
//!
//! Four sections, one level deep, diff-friendly. Matrices are row-major with
//! rows separated by `;` and entries by `,`. Unknown sections or keys are
//! rejected, and parsing reports every validation problem at once rather
//! than stopping at the first.
//!
//! ```text
//! [model]
//! truth = 0.5
//!
//! [class]
//! mode = grid             # grid | explicit
//! center = 0
//! radius = 0.9
//! points_per_axis = 5
//! # members = 0.5 | 0.3   # explicit mode: '|'-separated matrices
//!
//! [experiment]
//! horizons = 10,40,160
//! trials = 2000           # default 1000
//! mc_samples = 100000     # default 100000
//! base_seed = 1           # default 0
//!
//! [output]
//! path = report.csv       # default report.csv
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::ar_model::SystemMatrix;
use crate::error::{Error, Result};
use crate::inference::{grid_class, HypothesisClass};

/// How the hypothesis class is specified; the truth is injected afterwards
/// in either mode.
#[derive(Debug, Clone)]
pub enum ClassSpec {
    Explicit(Vec<SystemMatrix>),
    Grid {
        center: SystemMatrix,
        radius: f64,
        points_per_axis: usize,
    },
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub truth: SystemMatrix,
    pub class_spec: ClassSpec,
    /// Strictly ascending horizons, one certified sweep per entry.
    pub horizons: Vec<usize>,
    /// Trials per horizon.
    pub trials: usize,
    /// Sample count for sampled divergences (`divergence` subcommand and
    /// any estimate that cannot be computed exactly).
    pub mc_samples: usize,
    pub base_seed: u64,
    pub output_path: PathBuf,
}

const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_MC_SAMPLES: usize = 100_000;
const DEFAULT_OUTPUT: &str = "report.csv";

const KNOWN_KEYS: &[&str] = &[
    "model.truth",
    "class.mode",
    "class.members",
    "class.center",
    "class.radius",
    "class.points_per_axis",
    "experiment.horizons",
    "experiment.trials",
    "experiment.mc_samples",
    "experiment.base_seed",
    "output.path",
];

impl ExperimentConfig {
    /// Parse and validate config text; on failure, the error lists every
    /// problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let mut errors = Vec::new();
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        let mut section: Option<String> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !["model", "class", "experiment", "output"].contains(&name) {
                    errors.push(format!("line {}: unknown section [{name}]", lineno + 1));
                    section = None;
                } else {
                    section = Some(name.to_string());
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ));
                continue;
            };
            let Some(sec) = &section else {
                errors.push(format!(
                    "line {}: key '{}' appears before any section header",
                    lineno + 1,
                    key.trim()
                ));
                continue;
            };
            let full = format!("{sec}.{}", key.trim());
            if !KNOWN_KEYS.contains(&full.as_str()) {
                errors.push(format!("line {}: unknown key '{full}'", lineno + 1));
                continue;
            }
            // Strip a trailing comment, then whitespace.
            let value = value.split('#').next().unwrap_or("").trim().to_string();
            if entries.insert(full.clone(), value).is_some() {
                errors.push(format!("line {}: duplicate key '{full}'", lineno + 1));
            }
        }

        let mut take = |key: &str| entries.remove(key);

        let truth = match take("model.truth") {
            Some(v) => match v.parse::<SystemMatrix>() {
                Ok(m) => Some(m),
                Err(e) => {
                    errors.push(format!("model.truth: {e}"));
                    None
                }
            },
            None => {
                errors.push("model.truth is required".into());
                None
            }
        };

        let mode = take("class.mode");
        let members_raw = take("class.members");
        let center_raw = take("class.center");
        let radius_raw = take("class.radius");
        let points_raw = take("class.points_per_axis");

        let class_spec = match mode.as_deref() {
            Some("explicit") => {
                for (k, v) in [
                    ("class.center", &center_raw),
                    ("class.radius", &radius_raw),
                    ("class.points_per_axis", &points_raw),
                ] {
                    if v.is_some() {
                        errors.push(format!("{k} is only valid with class.mode = grid"));
                    }
                }
                match members_raw {
                    Some(raw) => {
                        let mut members = Vec::new();
                        for part in raw.split('|') {
                            match part.trim().parse::<SystemMatrix>() {
                                Ok(m) => members.push(m),
                                Err(e) => errors.push(format!("class.members: {e}")),
                            }
                        }
                        Some(ClassSpec::Explicit(members))
                    }
                    None => {
                        errors.push("class.members is required when class.mode = explicit".into());
                        None
                    }
                }
            }
            Some("grid") => {
                if members_raw.is_some() {
                    errors.push("class.members is only valid with class.mode = explicit".into());
                }
                let center = match center_raw {
                    Some(v) => match v.parse::<SystemMatrix>() {
                        Ok(m) => Some(m),
                        Err(e) => {
                            errors.push(format!("class.center: {e}"));
                            None
                        }
                    },
                    None => {
                        errors.push("class.center is required when class.mode = grid".into());
                        None
                    }
                };
                let radius = match radius_raw {
                    Some(v) => match v.parse::<f64>() {
                        Ok(r) if r > 0.0 && r.is_finite() => Some(r),
                        Ok(r) => {
                            errors.push(format!("class.radius must be positive, got {r}"));
                            None
                        }
                        Err(_) => {
                            errors.push(format!("class.radius: '{v}' is not a number"));
                            None
                        }
                    },
                    None => {
                        errors.push("class.radius is required when class.mode = grid".into());
                        None
                    }
                };
                let points = match points_raw {
                    Some(v) => match v.parse::<usize>() {
                        Ok(p) if p >= 1 => Some(p),
                        _ => {
                            errors.push(format!(
                                "class.points_per_axis must be a positive integer, got '{v}'"
                            ));
                            None
                        }
                    },
                    None => {
                        errors
                            .push("class.points_per_axis is required when class.mode = grid".into());
                        None
                    }
                };
                match (center, radius, points) {
                    (Some(center), Some(radius), Some(points_per_axis)) => Some(ClassSpec::Grid {
                        center,
                        radius,
                        points_per_axis,
                    }),
                    _ => None,
                }
            }
            Some(other) => {
                errors.push(format!(
                    "class.mode must be 'explicit' or 'grid', got '{other}'"
                ));
                None
            }
            None => {
                errors.push("class.mode is required".into());
                None
            }
        };

        let horizons = match take("experiment.horizons") {
            Some(raw) => {
                let mut hs = Vec::new();
                let mut ok = true;
                for part in raw.split(',') {
                    match part.trim().parse::<usize>() {
                        Ok(h) if h >= 1 => hs.push(h),
                        _ => {
                            errors.push(format!(
                                "experiment.horizons: '{}' is not a positive integer",
                                part.trim()
                            ));
                            ok = false;
                        }
                    }
                }
                if ok && hs.is_empty() {
                    errors.push("experiment.horizons must list at least one horizon".into());
                    ok = false;
                }
                if ok && !hs.windows(2).all(|w| w[0] < w[1]) {
                    errors.push("horizons must be strictly ascending".into());
                    ok = false;
                }
                if ok {
                    Some(hs)
                } else {
                    None
                }
            }
            None => {
                errors.push("experiment.horizons is required".into());
                None
            }
        };

        let parse_count = |errors: &mut Vec<String>, key: &str, raw: Option<String>, default| {
            match raw {
                Some(v) => match v.parse::<usize>() {
                    Ok(t) if t >= 1 => t,
                    _ => {
                        errors.push(format!("{key} must be a positive integer, got '{v}'"));
                        default
                    }
                },
                None => default,
            }
        };
        let trials = parse_count(
            &mut errors,
            "experiment.trials",
            take("experiment.trials"),
            DEFAULT_TRIALS,
        );
        let mc_samples = parse_count(
            &mut errors,
            "experiment.mc_samples",
            take("experiment.mc_samples"),
            DEFAULT_MC_SAMPLES,
        );
        let base_seed = match take("experiment.base_seed") {
            Some(v) => match v.parse::<u64>() {
                Ok(s) => s,
                Err(_) => {
                    errors.push(format!(
                        "experiment.base_seed must be an unsigned 64-bit integer, got '{v}'"
                    ));
                    0
                }
            },
            None => 0,
        };
        let output_path = PathBuf::from(
            take("output.path").unwrap_or_else(|| DEFAULT_OUTPUT.to_string()),
        );

        // Cross-key dimension checks, naming the offending keys.
        if let (Some(truth), Some(spec)) = (&truth, &class_spec) {
            match spec {
                ClassSpec::Grid { center, .. } => {
                    if center.dim() != truth.dim() {
                        errors.push(format!(
                            "model.truth has dimension {} but class.center has dimension {}",
                            truth.dim(),
                            center.dim()
                        ));
                    }
                }
                ClassSpec::Explicit(members) => {
                    for (j, m) in members.iter().enumerate() {
                        if m.dim() != truth.dim() {
                            errors.push(format!(
                                "model.truth has dimension {} but class.members[{j}] has dimension {}",
                                truth.dim(),
                                m.dim()
                            ));
                        }
                    }
                }
            }
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(ExperimentConfig {
            truth: truth.expect("validated above"),
            class_spec: class_spec.expect("validated above"),
            horizons: horizons.expect("validated above"),
            trials,
            mc_samples,
            base_seed,
            output_path,
        })
    }

    /// Materialize the hypothesis class with the truth injected; returns the
    /// class and the truth's index.
    pub fn build_class(&self) -> Result<(HypothesisClass, usize)> {
        let mut class = match &self.class_spec {
            ClassSpec::Explicit(members) => HypothesisClass::new(members.clone())?,
            ClassSpec::Grid {
                center,
                radius,
                points_per_axis,
            } => grid_class(center, *radius, *points_per_axis)?,
        };
        let idx = class.inject_truth(&self.truth)?;
        Ok((class, idx))
    }
}
