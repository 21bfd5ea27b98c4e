//! Parameter checkpoints: a JSON header line followed by one JSON line per
//! tensor holding its row-major values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamSet};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    spec: serde_json::Value,
    seed: u64,
    metadata: serde_json::Value,
    tensors: Vec<TensorShape>,
}

#[derive(Serialize, Deserialize)]
struct TensorLine {
    name: String,
    values: Vec<f64>,
}

/// A model's parameters plus enough description to rebuild it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Model family, e.g. `"rn"` or `"mann"`.
    pub kind: String,
    pub spec: serde_json::Value,
    pub seed: u64,
    /// Free-form run metadata (training classes, entangling seed, …).
    pub metadata: serde_json::Value,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: CHECKPOINT_FORMAT_VERSION,
            kind: self.kind.clone(),
            spec: self.spec.clone(),
            seed: self.seed,
            metadata: self.metadata.clone(),
            tensors: self
                .params
                .iter()
                .map(|(name, t)| TensorShape {
                    name: name.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let io = |e| Error::io("<checkpoint stream>", e);
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
        for (name, t) in self.params.iter() {
            let line = TensorLine {
                name: name.to_string(),
                values: t.values().to_vec(),
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("tensor serializes")).map_err(io)?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Checkpoint> {
        let mut lines = r.lines();
        let perr = |line: usize, msg: String| Error::Parse {
            line,
            record: None,
            message: msg,
        };
        let first = lines
            .next()
            .ok_or_else(|| perr(1, "empty checkpoint".into()))?
            .map_err(|e| perr(1, e.to_string()))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| perr(1, e.to_string()))?;
        if header.version != CHECKPOINT_FORMAT_VERSION {
            return Err(perr(1, format!("unsupported checkpoint version {}", header.version)));
        }
        let mut params = ParamSet::new();
        for (i, shape) in header.tensors.iter().enumerate() {
            let lineno = i + 2;
            let line = lines
                .next()
                .ok_or_else(|| perr(lineno, format!("missing tensor `{}`", shape.name)))?
                .map_err(|e| perr(lineno, e.to_string()))?;
            let t: TensorLine =
                serde_json::from_str(&line).map_err(|e| perr(lineno, e.to_string()))?;
            if t.name != shape.name {
                return Err(perr(lineno, format!("expected tensor `{}`, found `{}`", shape.name, t.name)));
            }
            let m = Matrix::from_vec(shape.rows, shape.cols, t.values)
                .map_err(|e| perr(lineno, e.to_string()))?;
            params.push(t.name, m)?;
        }
        Ok(Checkpoint {
            kind: header.kind,
            spec: header.spec,
            seed: header.seed,
            metadata: header.metadata,
            params,
        })
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::RnSpec;
    use crate::numerics::RngStream;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = RnSpec::symmetric(10, &[8, 8], 8, 16);
        let mut params = spec.init(&mut RngStream::new(1, 0), false);
        params.flat_set(3, 0.1 + 0.2);
        params.flat_set(4, f64::MIN_POSITIVE);
        params.flat_set(5, -1.0 / 3.0);
        let ck = Checkpoint {
            kind: "rn".into(),
            spec: serde_json::to_value(&spec).unwrap(),
            seed: 1,
            metadata: serde_json::json!({"note": "x"}),
            params,
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.params.tensors().iter().zip(ck.params.tensors()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_tensor_is_a_parse_error() {
        let spec = RnSpec::symmetric(2, &[], 2, 1);
        let ck = Checkpoint {
            kind: "rn".into(),
            spec: serde_json::to_value(&spec).unwrap(),
            seed: 0,
            metadata: serde_json::Value::Null,
            params: spec.init(&mut RngStream::new(0, 0), false),
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().take(2).collect();
        assert!(matches!(
            Checkpoint::read_from(cut.join("\n").as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
