//! Run configuration, reproducibility manifests, and the run→fit handoff.
//!
//! A run is described by a flat key-value text file (`key = value` per line,
//! `#` comments), optionally overridden by `--set key=value` assignments.
//! Parsing is strict: unknown keys, duplicate keys, and malformed values are
//! errors, so a typo cannot silently fall back to a default.
//!
//! Every run writes a [`Manifest`] echoing the fully resolved configuration
//! (every key explicit, presets expanded to their field values) plus the
//! seed, so the exact run can be reproduced bit-for-bit from the manifest
//! alone — even if a named preset's definition changes later.
//!
//! [`RunSummary`] is the JSON document a `run` leaves next to its CSV: the
//! raw counts, the per-time fidelity metrics, the post-selection retention
//! (when applicable), and a fit-ready handoff block with the model kind and
//! per-state rate pinning already chosen.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{
    compute_metrics, retention, EngineKind, ExperimentError, ExperimentPlan, MemoryResult,
    MetricsRow, QubitKind, RetentionRow, StateSeries, TimeGrid,
};
use crate::fit::{ModelKind, RatePinning};
use crate::ft::decoder::DecodeMode;
use crate::ft::encode::LogicalState;
use crate::noise::{NoiseConfig, NoiseError};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate config key {key:?} (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("override {0:?} is not of the form key=value")]
    BadOverride(String),
    #[error("unknown config key {key:?}; known keys: {known}")]
    UnknownKey { key: String, known: String },
    #[error("bad value for {key}: {msg}")]
    BadValue { key: String, msg: String },
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Plan(#[from] ExperimentError),
}

// ---------------------------------------------------------------------------
// Key-value map
// ---------------------------------------------------------------------------

/// An ordered key → value map parsed from config text and `--set` overrides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parse config text: one `key = value` per line, `#` starts a comment,
    /// blank lines ignored. Duplicate keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("expected key = value, got {stripped:?}"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Parse { line, msg: "empty key".into() });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate { key, line });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply one `key=value` override (the `--set` flag); replacing an
    /// existing value is the point, so duplicates are allowed here.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::BadOverride(assignment.to_string()));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// The map as config text, keys sorted: parseable by [`ConfigMap::parse`].
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Every key the `run` subcommand understands.
pub const RUN_KEYS: &[&str] = &[
    "kind",
    "states",
    "times",
    "cycles",
    "shots",
    "mode",
    "engine",
    "coherent_dephasing",
    "assume_partners",
    "seed",
    "noise",
    "noise.gamma_fast",
    "noise.gamma_quasi",
    "noise.zone_count",
    "noise.pair_colocated",
    "noise.differential_fraction",
    "noise.p1",
    "noise.p2",
    "noise.p_meas",
    "noise.p_spam_extra",
    "noise.p_leak",
    "noise.tau_cycle",
    "noise.field_sensitivity",
];

/// A fully resolved memory-experiment run: the plan plus reporting options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub plan: ExperimentPlan,
    /// Fill missing cardinal states from their orthogonal partners when
    /// computing fidelity metrics (the three-state shortcut).
    pub assume_partners: bool,
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.into(), msg: msg.into() }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(bad(key, format!("expected true/false, got {other:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, format!("{e} (got {value:?})")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|tok| parse_num::<T>(key, tok.trim())).collect()
}

/// Resolve a noise preset name to its configuration.
pub fn noise_preset(name: &str) -> Option<NoiseConfig> {
    match name {
        "ideal" => Some(NoiseConfig::ideal()),
        "h1_like" => Some(NoiseConfig::h1_like()),
        "depolarizing_only" => Some(NoiseConfig::depolarizing_only(6.0e-3)),
        "dephasing_only" => {
            Some(NoiseConfig::dephasing_only(0.0, std::f64::consts::SQRT_2 * 0.5))
        }
        _ => None,
    }
}

impl RunConfig {
    /// Build from a key-value map, consuming it; leftover keys are errors.
    pub fn from_map(mut map: ConfigMap) -> Result<Self, ConfigError> {
        let kind = match map.take("kind").as_deref() {
            Some("physical") => QubitKind::Physical,
            Some("dfs") => QubitKind::Dfs,
            Some("dfs_qec") => QubitKind::DfsQec,
            Some(other) => {
                return Err(bad("kind", format!("expected physical/dfs/dfs_qec, got {other:?}")))
            }
            None => return Err(ConfigError::MissingKey("kind")),
        };

        let states_text = map.take("states").ok_or(ConfigError::MissingKey("states"))?;
        let states = states_text
            .split(',')
            .map(|tok| LogicalState::from_str(tok.trim()).map_err(|e| bad("states", e)))
            .collect::<Result<Vec<_>, _>>()?;

        let times = map.take("times");
        let cycles = map.take("cycles");
        let time_grid = match (times, cycles) {
            (Some(_), Some(_)) => {
                return Err(bad("times", "give times (seconds) or cycles, not both"))
            }
            (Some(ts), None) => TimeGrid::Seconds(parse_list::<f64>("times", &ts)?),
            (None, Some(ns)) => TimeGrid::Cycles(parse_list::<usize>("cycles", &ns)?),
            (None, None) => return Err(ConfigError::MissingKey("times (or cycles)")),
        };

        let mut plan = ExperimentPlan::new(kind, states, time_grid);
        if let Some(v) = map.take("shots") {
            plan.shots = parse_num("shots", &v)?;
        }
        if let Some(v) = map.take("mode") {
            plan.mode = match v.as_str() {
                "correct" => DecodeMode::Correct,
                "post_select" | "post-select" => DecodeMode::PostSelect,
                other => {
                    return Err(bad("mode", format!("expected correct/post_select, got {other:?}")))
                }
            };
        }
        if let Some(v) = map.take("engine") {
            plan.engine = match v.as_str() {
                "tableau" => EngineKind::Tableau,
                "statevector" => EngineKind::Statevector,
                other => {
                    return Err(bad(
                        "engine",
                        format!("expected tableau/statevector, got {other:?}"),
                    ))
                }
            };
        }
        if let Some(v) = map.take("coherent_dephasing") {
            plan.coherent_dephasing = parse_bool("coherent_dephasing", &v)?;
        }
        if let Some(v) = map.take("seed") {
            plan.seed = parse_num("seed", &v)?;
        }

        plan.noise = match map.take("noise") {
            None => NoiseConfig::h1_like(),
            Some(name) => noise_preset(&name).ok_or_else(|| {
                bad(
                    "noise",
                    format!(
                        "unknown preset {name:?}; presets: ideal, h1_like, \
                         depolarizing_only, dephasing_only"
                    ),
                )
            })?,
        };
        let n = &mut plan.noise;
        for (key, field) in [
            ("noise.gamma_fast", &mut n.gamma_fast as &mut f64),
            ("noise.gamma_quasi", &mut n.gamma_quasi),
            ("noise.differential_fraction", &mut n.differential_fraction),
            ("noise.p1", &mut n.p1),
            ("noise.p2", &mut n.p2),
            ("noise.p_meas", &mut n.p_meas),
            ("noise.p_spam_extra", &mut n.p_spam_extra),
            ("noise.p_leak", &mut n.p_leak),
            ("noise.tau_cycle", &mut n.tau_cycle),
            ("noise.field_sensitivity", &mut n.field_sensitivity),
        ] {
            if let Some(v) = map.take(key) {
                *field = parse_num(key, &v)?;
            }
        }
        if let Some(v) = map.take("noise.zone_count") {
            n.zone_count = parse_num("noise.zone_count", &v)?;
        }
        if let Some(v) = map.take("noise.pair_colocated") {
            n.pair_colocated = parse_bool("noise.pair_colocated", &v)?;
        }

        let assume_partners = match map.take("assume_partners") {
            Some(v) => parse_bool("assume_partners", &v)?,
            None => false,
        };

        if let Some(key) = map.keys().next() {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                known: RUN_KEYS.join(", "),
            });
        }

        plan.validate()?;
        Ok(Self { plan, assume_partners })
    }

    /// The fully resolved configuration as a canonical map: every key
    /// explicit, noise preset expanded to its field values. Feeding this back
    /// through [`RunConfig::from_map`] reproduces the run exactly.
    pub fn to_map(&self) -> ConfigMap {
        let mut map = ConfigMap::default();
        let plan = &self.plan;
        map.insert(
            "kind",
            match plan.kind {
                QubitKind::Physical => "physical",
                QubitKind::Dfs => "dfs",
                QubitKind::DfsQec => "dfs_qec",
            }
            .into(),
        );
        let states: Vec<&str> = plan.states.iter().map(|s| s.label()).collect();
        map.insert("states", states.join(","));
        match &plan.time_grid {
            TimeGrid::Seconds(ts) => {
                let toks: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                map.insert("times", toks.join(","));
            }
            TimeGrid::Cycles(ns) => {
                let toks: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
                map.insert("cycles", toks.join(","));
            }
        }
        map.insert("shots", plan.shots.to_string());
        map.insert(
            "mode",
            match plan.mode {
                DecodeMode::Correct => "correct",
                DecodeMode::PostSelect => "post_select",
            }
            .into(),
        );
        map.insert(
            "engine",
            match plan.engine {
                EngineKind::Tableau => "tableau",
                EngineKind::Statevector => "statevector",
            }
            .into(),
        );
        map.insert("coherent_dephasing", plan.coherent_dephasing.to_string());
        map.insert("assume_partners", self.assume_partners.to_string());
        map.insert("seed", plan.seed.to_string());
        // The preset is expanded rather than named so the echo stays valid
        // even if a preset's definition changes in a later version.
        map.insert("noise", "ideal".into());
        let n = &plan.noise;
        map.insert("noise.gamma_fast", n.gamma_fast.to_string());
        map.insert("noise.gamma_quasi", n.gamma_quasi.to_string());
        map.insert("noise.zone_count", n.zone_count.to_string());
        map.insert("noise.pair_colocated", n.pair_colocated.to_string());
        map.insert("noise.differential_fraction", n.differential_fraction.to_string());
        map.insert("noise.p1", n.p1.to_string());
        map.insert("noise.p2", n.p2.to_string());
        map.insert("noise.p_meas", n.p_meas.to_string());
        map.insert("noise.p_spam_extra", n.p_spam_extra.to_string());
        map.insert("noise.p_leak", n.p_leak.to_string());
        map.insert("noise.tau_cycle", n.tau_cycle.to_string());
        map.insert("noise.field_sensitivity", n.field_sensitivity.to_string());
        map
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// The reproducibility record written next to every run's outputs: rerunning
/// the same binary version with `config` and the recorded seed reproduces
/// the output files byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Fully resolved configuration (canonical key-value form).
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: &ConfigMap, seed: u64, workers: Option<usize>) -> Self {
        Self {
            tool: "dfsqec".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: config.entries().clone(),
            seed,
            workers,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// The embedded config as parseable config text.
    pub fn config_text(&self) -> String {
        ConfigMap { entries: self.config.clone() }.canonical_text()
    }
}

// ---------------------------------------------------------------------------
// Run summary (the JSON document next to the CSV)
// ---------------------------------------------------------------------------

/// One state's series with the rate pinning the fit stage should apply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesHandoff {
    pub pinning: RatePinning,
    #[serde(flatten)]
    pub series: StateSeries,
}

/// Pooled post-selection retention counts, ready for the retention fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetentionHandoff {
    pub time_s: Vec<f64>,
    pub accepted: Vec<u64>,
    pub total: Vec<u64>,
}

/// Everything the `fit` subcommand needs from a run, self-contained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitHandoff {
    /// Decay-model family for the survival series (free decay in seconds for
    /// bare and pair memories, per-cycle decay for the error-corrected one).
    pub model: ModelKind,
    /// Cycle period, for evaluating per-cycle models against wall-clock time.
    pub tau_cycle: f64,
    pub series: Vec<SeriesHandoff>,
    pub retention: Option<RetentionHandoff>,
}

/// The JSON summary written by a memory run: counts, metrics, retention, and
/// the fit handoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub result: MemoryResult,
    /// Per-time fidelity metrics; absent when the run's states cannot support
    /// them (see `metrics_note`).
    pub metrics: Option<Vec<MetricsRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics_note: Option<String>,
    /// Post-selection retention rows (post-selected error-corrected runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retention: Option<Vec<RetentionRow>>,
    pub fit: FitHandoff,
}

impl RunSummary {
    /// Assemble the summary from a finished run. Metric computation failures
    /// (an incomplete state set without partner filling) are recorded in
    /// `metrics_note` rather than failing the run.
    pub fn build(result: MemoryResult, assume_partners: bool) -> Self {
        let (metrics, metrics_note) = match compute_metrics(&result, assume_partners) {
            Ok(rows) => (Some(rows), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let retention_rows = retention(&result).ok();
        let model = match result.kind {
            QubitKind::DfsQec => ModelKind::CycleDecay,
            QubitKind::Physical | QubitKind::Dfs => ModelKind::FreeDecay,
        };
        let series = result
            .fit_series()
            .into_iter()
            .map(|series| SeriesHandoff {
                pinning: match model {
                    ModelKind::FreeDecay => RatePinning::for_state(series.state),
                    _ => RatePinning::None,
                },
                series,
            })
            .collect();
        let retention_handoff = retention_rows.as_ref().map(|rows| RetentionHandoff {
            time_s: rows.iter().map(|r| r.time_s).collect(),
            accepted: rows.iter().map(|r| r.accepted).collect(),
            total: rows.iter().map(|r| r.total).collect(),
        });
        Self {
            fit: FitHandoff {
                model,
                tau_cycle: result.tau_cycle,
                series,
                retention: retention_handoff,
            },
            metrics,
            metrics_note,
            retention: retention_rows,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String, ConfigError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run_memory;

    fn base_text() -> &'static str {
        "# error-corrected memory, two states\n\
         kind = dfs_qec\n\
         states = 0, +\n\
         cycles = 1, 2, 3\n\
         shots = 50\n\
         mode = post_select\n\
         noise = depolarizing_only\n\
         noise.p2 = 5e-3\n\
         seed = 9\n"
    }

    #[test]
    fn config_text_parses_with_comments_and_round_trips() {
        let map = ConfigMap::parse(base_text()).unwrap();
        assert_eq!(map.entries().get("kind").unwrap(), "dfs_qec");
        assert_eq!(map.entries().get("states").unwrap(), "0, +");
        let reparsed = ConfigMap::parse(&map.canonical_text()).unwrap();
        assert_eq!(map, reparsed);
    }

    #[test]
    fn presets_resolve_and_field_overrides_apply_on_top() {
        let config = RunConfig::from_map(ConfigMap::parse(base_text()).unwrap()).unwrap();
        let plan = &config.plan;
        assert_eq!(plan.kind, QubitKind::DfsQec);
        assert_eq!(plan.states, vec![LogicalState::Zero, LogicalState::Plus]);
        assert_eq!(plan.time_grid, TimeGrid::Cycles(vec![1, 2, 3]));
        assert_eq!(plan.shots, 50);
        assert_eq!(plan.mode, DecodeMode::PostSelect);
        assert_eq!(plan.seed, 9);
        // Preset field, then the override on top of it.
        assert_eq!(plan.noise.p1, 0.0);
        assert_eq!(plan.noise.p2, 5e-3);
        assert!(!config.assume_partners);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let mut map = ConfigMap::parse(base_text()).unwrap();
        map.set("shotz=100").unwrap();
        let err = RunConfig::from_map(map).unwrap_err();
        assert!(
            matches!(&err, ConfigError::UnknownKey { key, .. } if key == "shotz"),
            "{err}"
        );

        let dup = ConfigMap::parse("shots = 1\nshots = 2\n").unwrap_err();
        assert!(matches!(&dup, ConfigError::Duplicate { key, line: 2 } if key == "shots"));
    }

    #[test]
    fn set_overrides_replace_file_values() {
        let mut map = ConfigMap::parse(base_text()).unwrap();
        map.set("shots = 75").unwrap();
        map.set("mode=correct").unwrap();
        let config = RunConfig::from_map(map).unwrap();
        assert_eq!(config.plan.shots, 75);
        assert_eq!(config.plan.mode, DecodeMode::Correct);
        assert!(matches!(
            ConfigMap::default().set("no_equals_sign"),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn bad_values_name_the_key() {
        for (line, key) in [
            ("states = q", "states"),
            ("mode = maybe", "mode"),
            ("noise = loud", "noise"),
            ("noise.p2 = high", "noise.p2"),
            ("coherent_dephasing = sometimes", "coherent_dephasing"),
        ] {
            let text = base_text().replace(
                match key {
                    "states" => "states = 0, +",
                    "mode" => "mode = post_select",
                    "noise" => "noise = depolarizing_only",
                    "noise.p2" => "noise.p2 = 5e-3",
                    _ => "seed = 9",
                },
                line,
            );
            let text = if key == "coherent_dephasing" {
                format!("{}coherent_dephasing = sometimes\n", base_text())
            } else {
                text
            };
            let err = RunConfig::from_map(ConfigMap::parse(&text).unwrap()).unwrap_err();
            match &err {
                ConfigError::BadValue { key: k, .. } => assert_eq!(k, key),
                other => panic!("expected BadValue for {key}, got {other}"),
            }
        }
    }

    #[test]
    fn missing_and_conflicting_grids_are_rejected() {
        let err =
            RunConfig::from_map(ConfigMap::parse("kind = physical\nstates = +\n").unwrap())
                .unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey(_)));

        let both = "kind = physical\nstates = +\ntimes = 1\ncycles = 1\n";
        let err = RunConfig::from_map(ConfigMap::parse(both).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));

        // Grid/kind mismatch is caught by plan validation.
        let mismatched = "kind = physical\nstates = +\ncycles = 1,2\n";
        let err = RunConfig::from_map(ConfigMap::parse(mismatched).unwrap()).unwrap_err();
        assert!(matches!(err, ConfigError::Plan(_)));
    }

    #[test]
    fn resolved_echo_is_a_fixed_point_and_reproduces_the_plan() {
        let config = RunConfig::from_map(ConfigMap::parse(base_text()).unwrap()).unwrap();
        let echo = config.to_map();
        let config2 = RunConfig::from_map(echo.clone()).unwrap();
        assert_eq!(config2.to_map(), echo, "echo must be a fixed point");
        // The echoed config names every run key explicitly.
        for key in RUN_KEYS {
            let has = echo.entries().contains_key(*key)
                || (*key == "times" && echo.entries().contains_key("cycles"))
                || (*key == "cycles" && echo.entries().contains_key("times"));
            assert!(has, "echo missing {key}");
        }
    }

    #[test]
    fn manifest_embeds_the_config_and_yields_runnable_text() {
        let config = RunConfig::from_map(ConfigMap::parse(base_text()).unwrap()).unwrap();
        let manifest = Manifest::new("run", &config.to_map(), 9, Some(4));
        let json = manifest.to_json();
        let back: Manifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.subcommand, "run");
        assert_eq!(back.seed, 9);
        let reread = ConfigMap::parse(&back.config_text()).unwrap();
        let config2 = RunConfig::from_map(reread).unwrap();
        assert_eq!(config2.plan.seed, config.plan.seed);
        assert_eq!(config2.plan.noise.p2, config.plan.noise.p2);
    }

    #[test]
    fn run_summary_carries_counts_metrics_and_fit_handoff() {
        let text = "kind = dfs_qec\nstates = 0, +, +i\ncycles = 1, 2\nshots = 20\n\
                    mode = post_select\nnoise = ideal\nseed = 3\nassume_partners = true\n";
        let config = RunConfig::from_map(ConfigMap::parse(text).unwrap()).unwrap();
        let result = run_memory(&config.plan).unwrap();
        let summary = RunSummary::build(result, config.assume_partners);
        let metrics = summary.metrics.as_ref().expect("metrics with partner filling");
        assert_eq!(metrics.len(), 2);
        assert!((metrics[0].f_process - 1.0).abs() < 1e-12, "noiseless run");
        let retention = summary.retention.as_ref().expect("post-selected run");
        assert_eq!(retention.len(), 2);
        assert_eq!(summary.fit.model, ModelKind::CycleDecay);
        assert_eq!(summary.fit.series.len(), 3);
        assert!(summary.fit.series.iter().all(|s| s.pinning == RatePinning::None));
        assert!(summary.fit.retention.is_some());

        let json = summary.to_json().unwrap();
        let back = RunSummary::from_json(&json).unwrap();
        assert_eq!(back.fit.series[0].series.x, summary.fit.series[0].series.x);
        assert_eq!(back.result.cells.len(), summary.result.cells.len());
    }

    #[test]
    fn free_decay_handoffs_pin_rates_by_state_class() {
        let text = "kind = physical\nstates = 0, +, +i\ntimes = 0, 1\nshots = 10\nnoise = ideal\n";
        let config = RunConfig::from_map(ConfigMap::parse(text).unwrap()).unwrap();
        let result = run_memory(&config.plan).unwrap();
        let summary = RunSummary::build(result, true);
        assert_eq!(summary.fit.model, ModelKind::FreeDecay);
        let pin_of = |state: LogicalState| {
            summary
                .fit
                .series
                .iter()
                .find(|s| s.series.state == state)
                .map(|s| s.pinning)
                .unwrap()
        };
        assert_eq!(pin_of(LogicalState::Zero), RatePinning::PinGaussian);
        assert_eq!(pin_of(LogicalState::Plus), RatePinning::PinExponential);
        assert_eq!(pin_of(LogicalState::PlusI), RatePinning::PinExponential);
        assert!(summary.retention.is_none());
        assert!(summary.fit.retention.is_none());
    }
}
