//! Serialized outputs: CSV tables and JSON documents, written atomically
//! (temp file + rename) so interrupted runs leave no partial files.
//! Floating-point values serialize with 17 significant digits, enough to
//! round-trip `f64` exactly.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// 17-significant-digit decimal form of an `f64`; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A plain numeric table.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        write_atomic(path, self.to_string().as_bytes())
    }

    /// Re-ingest a table written by [`Csv::write`].
    pub fn read(path: &Path) -> Result<Csv, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .unwrap_or("")
            .split(',')
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(
                line.split(',')
                    .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        Ok(Csv { header, rows })
    }
}

/// Write bytes atomically: to `<path>.tmp`, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let io = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

/// Serialize a JSON document with a stable, sorted-key layout.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let doc = serde_json::to_value(value)?;
    let text = serde_json::to_string_pretty(&sort_keys(doc))?;
    write_atomic(path, format!("{text}\n").as_bytes())
}

fn sort_keys(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let mut sorted: Vec<(String, serde_json::Value)> = map.into_iter().collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            serde_json::Value::Object(
                sorted
                    .into_iter()
                    .map(|(k, val)| (k, sort_keys(val)))
                    .collect(),
            )
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.into_iter().map(sort_keys).collect())
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly_at_17_digits() {
        for v in [
            0.1,
            std::f64::consts::PI,
            -1.2345678901234567e-300,
            33e-3,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_round_trips_through_disk() {
        let dir = std::env::temp_dir().join("mescr_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.csv");
        let mut csv = Csv::new(&["a", "b"]);
        csv.push(vec![1.0 / 3.0, 2e-17]);
        csv.push(vec![-4.5, std::f64::consts::E]);
        csv.write(&path).unwrap();
        let back = Csv::read(&path).unwrap();
        assert_eq!(back.header, vec!["a", "b"]);
        for (r1, r2) in csv.rows.iter().zip(&back.rows) {
            for (v1, v2) in r1.iter().zip(r2) {
                assert_eq!(v1.to_bits(), v2.to_bits());
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn atomic_write_leaves_no_tmp_file() {
        let dir = std::env::temp_dir().join("mescr_atomic_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.json");
        write_json(&path, &serde_json::json!({"z": 1, "a": 2})).unwrap();
        let names: Vec<String> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["out.json".to_string()]);
        // keys are sorted for byte-stable output
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
