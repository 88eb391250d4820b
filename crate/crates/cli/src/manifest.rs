//! Report provenance. Every CSV or JSON report embeds the fully resolved
//! command that produced it (defaults and environment fallbacks already
//! applied), so the report regenerates from nothing but its own header.

use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Subcommand name.
    pub command: String,
    /// Resolved argument vector, minus binary and subcommand.
    pub args: Vec<String>,
    /// Root seed, for commands that draw random numbers.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub version: String,
    /// RFC 3339, UTC. The one field exempt from byte-identical regeneration.
    pub timestamp: String,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            args,
            seed,
            version: VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest has no unserializable fields")
    }

    /// The form embedded at the top of CSV reports.
    pub fn csv_comment(&self) -> String {
        format!("# manifest: {}", self.to_json())
    }

    /// Recover the manifest from a report: either the `# manifest:` comment
    /// of a CSV or the `manifest` field of a JSON object.
    pub fn from_report(text: &str) -> anyhow::Result<Self> {
        if let Some(line) = text.lines().find(|l| l.starts_with("# manifest: ")) {
            let json = line.trim_start_matches("# manifest: ");
            return Ok(serde_json::from_str(json)?);
        }
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|_| anyhow::anyhow!("report is neither a manifest-bearing CSV nor JSON"))?;
        let manifest = value
            .get("manifest")
            .ok_or_else(|| anyhow::anyhow!("JSON report has no `manifest` field"))?;
        Ok(serde_json::from_value(manifest.clone())?)
    }

    /// Argument vector that reproduces this report.
    pub fn argv(&self) -> Vec<String> {
        let mut v = vec!["quant8".to_string(), self.command.clone()];
        v.extend(self.args.iter().cloned());
        v
    }
}

/// Blank every timestamp value in a report so two generations of the same
/// manifest can be compared byte for byte.
pub fn strip_timestamps(text: &str) -> String {
    let key = "\"timestamp\":";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(key) {
        let after_key = pos + key.len();
        out.push_str(&rest[..after_key]);
        rest = &rest[after_key..];
        let ws = rest.len() - rest.trim_start_matches(' ').len();
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        if let Some(stripped) = rest.strip_prefix('"') {
            if let Some(end) = stripped.find('"') {
                out.push_str("\"<timestamp>");
                rest = &stripped[end..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_csv_comment() {
        let m = Manifest::new("sweep-be", vec!["--size".into(), "8".into()], Some(42));
        let report = format!("{}\nheader\n1,2\n", m.csv_comment());
        let back = Manifest::from_report(&report).unwrap();
        assert_eq!(back.command, "sweep-be");
        assert_eq!(back.args, m.args);
        assert_eq!(back.seed, Some(42));
        assert_eq!(back.argv()[0], "quant8");
        assert_eq!(back.argv()[1], "sweep-be");
    }

    #[test]
    fn strips_compact_and_pretty_timestamps() {
        let compact = r#"{"timestamp":"2026-01-01T00:00:00+00:00"}"#;
        assert_eq!(strip_timestamps(compact), r#"{"timestamp":"<timestamp>"}"#);
        let pretty = "\"timestamp\": \"2026-01-01T00:00:00Z\"";
        assert_eq!(strip_timestamps(pretty), "\"timestamp\": \"<timestamp>\"");
        let two = format!("{compact}\n{compact}");
        assert_eq!(strip_timestamps(&two).matches("<timestamp>").count(), 2);
    }

    #[test]
    fn different_generation_times_compare_equal_after_stripping() {
        let a = Manifest::new("formats", vec![], None);
        let mut b = a.clone();
        b.timestamp = "1999-12-31T23:59:59+00:00".into();
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(strip_timestamps(&a.to_json()), strip_timestamps(&b.to_json()));
    }
}
