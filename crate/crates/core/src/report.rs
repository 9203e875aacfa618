//! Output files: metadata header, CSV and JSON encodings, atomic writes.
//!
//! CSV files start with `# key=value` comment lines carrying the metadata;
//! JSON files wrap the payload as `{"meta": ..., "result": ...}`. Nothing
//! time- or host-dependent is recorded, so equal inputs give equal bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dice::DiceBoundReport;
use crate::error::{Error, Result};
use crate::game::StrategyProfile;
use crate::logit::TraceResult;
use crate::paradox::RegionSample;

pub const TOOL_NAME: &str = "qre";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON encoding of the run configuration.
    pub config_hash: String,
}

impl Metadata {
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Result<Self> {
        Ok(Metadata {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed,
            config_hash: config_hash(config)?,
        })
    }

    fn header_lines(&self) -> String {
        format!(
            "# tool={}\n# version={}\n# seed={}\n# config_hash={}\n",
            self.tool, self.version, self.seed, self.config_hash
        )
    }
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Metadata comment lines followed by a header row and data rows.
pub fn csv_bytes<S: AsRef<str>>(
    meta: &Metadata,
    header: &[S],
    rows: &[Vec<String>],
) -> Result<Vec<u8>> {
    let mut out = meta.header_lines().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for r in rows {
            if r.len() != header.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row has {} fields, header has {}",
                    r.len(),
                    header.len()
                )));
            }
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Metadata,
    result: &'a T,
}

/// Pretty-printed `{"meta": ..., "result": ...}` with a trailing newline.
pub fn json_bytes<T: Serialize>(meta: &Metadata, result: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Envelope { meta, result })?;
    out.push(b'\n');
    Ok(out)
}

/// Splits a CSV file produced by [`csv_bytes`] into its metadata pairs and
/// the remaining table text.
pub fn split_csv_metadata(text: &str) -> (Vec<(String, String)>, String) {
    let mut meta = Vec::new();
    let mut rest = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ").and_then(|l| l.split_once('=')) {
            Some((k, v)) if rest.is_empty() => meta.push((k.to_string(), v.to_string())),
            _ => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    (meta, rest)
}

/// Header and rows: `lambda, residual`, then `p{i}_a{j}` for every entry.
pub fn trace_table(trace: &TraceResult) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["lambda".to_string(), "residual".to_string()];
    if let Some(first) = trace.points.first() {
        header.extend(profile_columns(&first.profile));
    }
    let rows = trace
        .points
        .iter()
        .map(|p| {
            let mut r = vec![p.lambda.to_string(), p.residual.to_string()];
            r.extend(p.profile.flatten().iter().map(f64::to_string));
            r
        })
        .collect();
    (header, rows)
}

/// Column names `p{i}_a{j}` (both 1-based) of a profile's entries.
pub fn profile_columns(profile: &StrategyProfile) -> Vec<String> {
    profile
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.len()).map(move |j| format!("p{}_a{}", i + 1, j + 1)))
        .collect()
}

/// One row per (utility vector, base): inputs, per-action probabilities,
/// tied-face count, implication flag (empty unless `K = 3`) and pass flag.
pub fn dice_table(report: &DiceBoundReport) -> (Vec<String>, Vec<Vec<String>>) {
    let k = report.k;
    let mut header: Vec<String> = (1..=k).map(|a| format!("v{a}")).collect();
    header.extend((1..=k).map(|a| format!("base{a}")));
    header.extend((1..=k).map(|a| format!("prob_a{a}")));
    header.extend(["tied_faces", "implication", "pass"].map(String::from));
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.utilities.iter().map(f64::to_string).collect();
            row.extend(r.base.iter().map(f64::to_string));
            row.extend(r.probabilities.iter().map(f64::to_string));
            row.push(r.tied_faces.to_string());
            row.push(r.implication.map_or(String::new(), |b| b.to_string()));
            row.push(r.pass.to_string());
            row
        })
        .collect();
    (header, rows)
}

/// Profile entries plus the classification label.
pub fn region_table(samples: &[RegionSample]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = samples
        .first()
        .map(|s| profile_columns(&s.profile))
        .unwrap_or_default();
    header.push("classification".into());
    let rows = samples
        .iter()
        .map(|s| {
            let mut r: Vec<String> = s.profile.flatten().iter().map(f64::to_string).collect();
            r.push(s.classification.label());
            r
        })
        .collect();
    (header, rows)
}
