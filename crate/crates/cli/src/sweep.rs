//! Parameter sweeps over a base scenario.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};
use crate::run::run_scenario;

/// Replaces the value at a dotted path such as `model.epsilon` or `gauges.1.c`.
pub fn set_path(root: &mut Value, dotted: &str, value: Value) -> CliResult<()> {
    let err = |msg: String| CliError::schema("sweep.parameter", msg);
    let mut cur = root;
    let segments: Vec<&str> = dotted.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(err(format!("malformed path {dotted:?}")));
    }
    let (last, parents) = segments.split_last().expect("split yields one segment");
    for seg in parents {
        cur = match cur {
            Value::Object(map) => map
                .get_mut(*seg)
                .ok_or_else(|| err(format!("{dotted:?}: no field {seg:?}")))?,
            Value::Array(items) => {
                let k: usize = seg
                    .parse()
                    .map_err(|_| err(format!("{dotted:?}: {seg:?} is not an index")))?;
                items
                    .get_mut(k)
                    .ok_or_else(|| err(format!("{dotted:?}: index {k} out of range")))?
            }
            _ => return Err(err(format!("{dotted:?}: {seg:?} is not a container"))),
        };
    }
    match cur {
        Value::Object(map) => {
            map.insert((*last).to_string(), value);
        }
        Value::Array(items) => {
            let k: usize = last
                .parse()
                .map_err(|_| err(format!("{dotted:?}: {last:?} is not an index")))?;
            let slot = items
                .get_mut(k)
                .ok_or_else(|| err(format!("{dotted:?}: index {k} out of range")))?;
            *slot = value;
        }
        _ => return Err(err(format!("{dotted:?}: parent is not a container"))),
    }
    Ok(())
}

/// One scenario per sweep value, checked before anything runs.
pub fn expand(raw: &Value) -> CliResult<(String, Vec<(Value, ScenarioConfig)>)> {
    let cfg: ScenarioConfig = serde_json::from_value(raw.clone())
        .map_err(|e| CliError::schema("config", e.to_string()))?;
    let sweep = cfg
        .sweep
        .ok_or_else(|| CliError::schema("sweep", "the config has no sweep section"))?;
    if sweep.values.is_empty() {
        return Err(CliError::schema("sweep.values", "value list is empty"));
    }
    let mut base = raw.clone();
    if let Value::Object(map) = &mut base {
        map.remove("sweep");
    }
    let points = sweep
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut patched = base.clone();
            set_path(&mut patched, &sweep.parameter, v.clone())?;
            let point: ScenarioConfig = serde_json::from_value(patched).map_err(|e| {
                CliError::schema(format!("sweep.values[{k}]"), e.to_string())
            })?;
            crate::build::validate_config(&point)?;
            Ok((v.clone(), point))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((sweep.parameter, points))
}

/// Runs every point in parallel, keeping the input order. Failures of single
/// points are recorded in their rows.
pub fn run_sweep(raw: &Value) -> CliResult<Value> {
    let (parameter, points) = expand(raw)?;
    let rows: Vec<Value> = points
        .par_iter()
        .map(|(v, cfg)| match run_scenario(cfg) {
            Ok(out) => json!({"value": v, "summary": out.summary}),
            Err(e) => json!({"value": v, "error": e.to_json()["error"]}),
        })
        .collect();
    Ok(json!({"parameter": parameter, "rows": rows}))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_path_walks_objects_and_arrays() {
        let mut v = json!({"model": {"epsilon": 0.5}, "gauges": [{"c": 1}, {"c": 2}]});
        set_path(&mut v, "model.epsilon", json!(0.7)).unwrap();
        set_path(&mut v, "gauges.1.c", json!([0.0, 1.0])).unwrap();
        assert_eq!(v["model"]["epsilon"], json!(0.7));
        assert_eq!(v["gauges"][1]["c"], json!([0.0, 1.0]));
        assert!(set_path(&mut v, "gauges.5.c", json!(1)).is_err());
        assert!(set_path(&mut v, "model..x", json!(1)).is_err());
    }
}
