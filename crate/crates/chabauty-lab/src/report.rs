//! Machine-readable report envelopes: a versioned schema tag, the model,
//! a hash of the effective configuration, the tool version, and a short
//! tag naming the check or experiment the payload came from.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "chabauty-lab/1";

/// Hex digest of the canonical JSON form of a configuration.
pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_string(config).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Wrap a payload in the standard envelope.
pub fn envelope(model: &str, check: &str, config: &Value, payload: Value) -> Value {
    json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "model": model,
        "check": check,
        "config_hash": config_hash(config),
        "config": config,
        "payload": payload,
    })
}
