//! Deterministic output: CSV with shortest round-trip float formatting,
//! JSON with sorted keys, and the run manifest (written last).

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

/// Shortest decimal that round-trips; `{}` on f64 does exactly that.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x}")
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(buf.as_bytes())
}

/// serde_json's map is a BTreeMap, so keys come out sorted.
pub fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")
}

pub fn config_hash(canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest(
    dir: &Path,
    experiment: &str,
    canonical_config: &str,
    seed: u64,
    wall_ms: u128,
    warnings: &[String],
) -> std::io::Result<()> {
    let manifest = json!({
        "experiment": experiment,
        "config_hash": config_hash(canonical_config),
        "seed": seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": wall_ms as u64,
        "warnings": warnings,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}
