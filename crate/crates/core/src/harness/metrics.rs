use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "iteration,train_loss,test_loss,test_accuracy,wall_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: Option<f64>,
    pub wall_ms: u64,
}

/// CSV text for a metrics history. Floats use Rust's shortest round-trip
/// formatting, so the text is a pure function of the values.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let acc = r.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iteration, r.train_loss, r.test_loss, acc, r.wall_ms
        );
    }
    s
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, metrics_csv(records)).map_err(|e| Error::io(path, e))
}

/// Parses text produced by [`metrics_csv`].
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                record: None,
                message: "missing metrics header".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                record: Some(i - 1),
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            Ok(MetricsRecord {
                iteration: f[0].parse().map_err(|_| bad("iteration"))?,
                train_loss: f[1].parse().map_err(|_| bad("train_loss"))?,
                test_loss: f[2].parse().map_err(|_| bad("test_loss"))?,
                test_accuracy: if f[3].is_empty() {
                    None
                } else {
                    Some(f[3].parse().map_err(|_| bad("test_accuracy"))?)
                },
                wall_ms: f[4].parse().map_err(|_| bad("wall_ms"))?,
            })
        })
        .collect()
}
