pub mod build;
pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

use std::path::Path;

use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult, Context};

/// Reads a config file as raw JSON and as a typed scenario.
pub fn load_config(path: &Path) -> CliResult<(Value, ScenarioConfig)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let raw: Value =
        serde_json::from_str(&text).map_err(|e| CliError::schema("config", e.to_string()))?;
    let cfg = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::schema("config", e.to_string()))?;
    Ok((raw, cfg))
}

/// Checks everything that can be checked without integrating.
pub fn validate(cfg: &ScenarioConfig) -> CliResult<Value> {
    build::validate_config(cfg)?;
    let scenario = build::build_scenario(&cfg.model)?;
    let rho = build::initial_state(&cfg.initial_state, &scenario, cfg.time.t0)?;
    let mut deferred = Vec::new();
    for (k, g) in cfg.gauges.iter().enumerate() {
        if build::needs_context(g) {
            deferred.push(g.label(k));
            continue;
        }
        let gauge = build::build_gauge(g, k, &scenario, None)?;
        gauge.validate(
            scenario.model.signature(),
            &gaugetherm::master_equation::VALIDATION_TIMES,
        )
        .at(&format!("gauges[{k}]"))?;
    }
    Ok(json!({
        "ok": true,
        "model": cfg.model.kind(),
        "dim": scenario.model.dim(),
        "channels": scenario.model.num_channels(),
        "initial_trace_error": rho.trace_error(),
        "gauges_needing_trajectory": deferred,
    }))
}
