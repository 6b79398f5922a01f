//! Scenario files.
//!
//! A scenario file is TOML. It may name a preset with `preset = "hex19"` and
//! override any field; tables are merged key by key, except that a table whose
//! `kind` differs from the preset's replaces it wholesale. Unknown keys are
//! rejected.
//!
//! ```toml
//! preset = "two-cell"
//! algorithm = "refim"
//! slots = 1000
//!
//! [feedback]
//! period_slots = 50
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};
use toml::Value;

use crate::engine::{Scenario, PRESETS};
use crate::oracle::ToySpec;
use crate::{Error, Result};

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() && same_kind(slot, &v) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn same_kind(a: &Value, b: &Value) -> bool {
    match (a.get("kind"), b.get("kind")) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

/// Parses scenario TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut doc: toml::Table = text.parse().map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
    let base = match doc.remove("preset") {
        Some(Value::String(name)) => Scenario::preset(&name)?,
        Some(_) => return Err(Error::Config("preset must be a string".into())),
        None => Scenario::default(),
    };
    let mut merged = Value::try_from(&base).map_err(|e| Error::Config(format!("cannot encode scenario: {e}")))?;
    merge(&mut merged, Value::Table(doc));
    let sc: Scenario = merged
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("invalid scenario: {e}")))?;
    sc.validate()?;
    Ok(sc)
}

/// A preset name or a path to a scenario file.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    if PRESETS.contains(&arg) {
        return Scenario::preset(arg);
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!(
            "cannot read scenario '{arg}': {e} (presets: {})",
            PRESETS.join(", ")
        ))
    })?;
    parse_scenario(&text)
}

/// `toy` or a path to a TOML file with [`ToySpec`] fields.
pub fn load_toy(arg: &str) -> Result<ToySpec> {
    if arg == "toy" {
        return Ok(ToySpec::default());
    }
    let text =
        std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read oracle config '{arg}': {e}")))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("invalid oracle config: {e}")))
}

/// SHA-256 over the canonical JSON encoding of the scenario, hex.
pub fn config_hash(sc: &Scenario) -> String {
    let json = serde_json::to_string(sc).expect("scenario is serializable");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// The scenario as TOML, e.g. for `refim show`.
pub fn to_toml(sc: &Scenario) -> Result<String> {
    toml::to_string_pretty(sc).map_err(|e| Error::Config(format!("cannot encode scenario: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Algorithm, NetworkSpec};

    #[test]
    fn preset_plus_overrides() {
        let sc = parse_scenario("preset = \"two-cell\"\nalgorithm = \"wf\"\n[feedback]\nperiod_slots = 7\n").unwrap();
        assert_eq!(sc.algorithm, Algorithm::Wf);
        assert_eq!(sc.feedback.period_slots, 7);
        assert_eq!(sc.feedback.reference_count, 1);
        assert!(matches!(sc.network, NetworkSpec::TwoCell { .. }));
    }

    #[test]
    fn kind_switch_replaces_table() {
        let sc = parse_scenario(
            "[network]\nkind = \"two_cell\"\nbs_distance_m = 1500.0\ncenter_band_m = [100.0, 200.0]\nedge_band_m = [500.0, 600.0]\nusers_per_group = 2\n",
        )
        .unwrap();
        assert!(matches!(sc.network, NetworkSpec::TwoCell { users_per_group: 2, .. }));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_scenario("slotz = 3").is_err());
        assert!(parse_scenario("[propagation]\nnoise = 1.0").is_err());
        assert!(parse_scenario("preset = \"nowhere\"").is_err());
        assert!(parse_scenario("slots = 10\nwarmup_slots = 20").is_err());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let sc = Scenario::preset(name).unwrap();
            let back = parse_scenario(&to_toml(&sc).unwrap()).unwrap();
            assert_eq!(back, sc);
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::preset("hex19").unwrap();
        let b = Scenario { seed: 2, ..a.clone() };
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
