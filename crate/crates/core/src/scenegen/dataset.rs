use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classes::{adjacency_target, target_width, Relation, SceneClass};
use super::generate::{generate_scene, GeneratorParams, SceneDescription, FEATURE_LAYOUT};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};
use crate::par::Exec;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Adjacency,
    OneHot,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacency" => Ok(TargetMode::Adjacency),
            "one_hot" => Ok(TargetMode::OneHot),
            other => Err(Error::Config(format!("unknown target mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub class_index: usize,
    pub scene: SceneDescription,
}

/// Labelled scenes over a fixed class table.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub classes: Vec<SceneClass>,
    pub samples: Vec<Sample>,
    pub target_mode: TargetMode,
    pub relation: Relation,
    pub generator: GeneratorParams,
}

impl Dataset {
    /// Generates `samples_per_class` scenes per class, class-major. Sample `s`
    /// draws from `rng.derive(s)`, so the result is independent of `exec`.
    pub fn generate(
        classes: Vec<SceneClass>,
        samples_per_class: usize,
        relation: Relation,
        target_mode: TargetMode,
        generator: GeneratorParams,
        rng: &RngStream,
        exec: Exec,
    ) -> Result<Self> {
        let total = classes.len() * samples_per_class;
        let scenes = exec.map_range(total, |s| {
            let class_index = s / samples_per_class;
            let mut r = rng.derive(s as u64);
            generate_scene(&classes[class_index], &generator, &mut r).map(|scene| Sample {
                class_index,
                scene,
            })
        });
        let samples = scenes.into_iter().collect::<Result<Vec<_>>>()?;
        let ds = Dataset {
            classes,
            samples,
            target_mode,
            relation,
            generator,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut counts = vec![0usize; self.classes.len()];
        for (i, s) in self.samples.iter().enumerate() {
            *counts.get_mut(s.class_index).ok_or_else(|| {
                Error::param(format!("sample {i} has class index {} out of range", s.class_index))
            })? += 1;
        }
        if counts.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::param(format!("unequal per-class sample counts {counts:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn target_width(&self) -> usize {
        match self.target_mode {
            TargetMode::Adjacency => target_width(self.relation),
            TargetMode::OneHot => self.classes.len(),
        }
    }

    /// Target vector for a class index under this dataset's target mode.
    pub fn target_for(&self, class_index: usize) -> Vec<f64> {
        match self.target_mode {
            TargetMode::Adjacency => adjacency_target(&self.classes[class_index], self.relation),
            TargetMode::OneHot => {
                let mut t = vec![0.0; self.classes.len()];
                t[class_index] = 1.0;
                t
            }
        }
    }

    /// Stacked targets for the given sample indices.
    pub fn targets(&self, indices: &[usize]) -> Matrix {
        let w = self.target_width();
        let mut m = Matrix::zeros(indices.len(), w);
        for (r, &i) in indices.iter().enumerate() {
            m.row_mut(r)
                .copy_from_slice(&self.target_for(self.samples[i].class_index));
        }
        m
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            classes: self.classes.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            target_mode: self.target_mode,
            relation: self.relation,
            generator: self.generator,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: DATASET_FORMAT_VERSION,
            target_mode: self.target_mode,
            relation: self.relation,
            feature_layout: FEATURE_LAYOUT.iter().map(|s| s.to_string()).collect(),
            generator_params: self.generator,
            classes: self.classes.clone(),
        };
        let io = |e: std::io::Error| Error::io("<dataset stream>", e);
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
        for s in &self.samples {
            let m = s.scene.matrix();
            let rows: Vec<&[f64]> = (0..m.rows()).map(|r| m.row(r)).collect();
            let line = serde_json::to_string(&RecordOut {
                class_index: s.class_index,
                d: rows,
            })
            .expect("record serializes");
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Dataset> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| parse_err(1, None, "empty dataset file"))?
            .map_err(|e| parse_err(1, None, &e.to_string()))?;
        let header: Header =
            serde_json::from_str(&first).map_err(|e| parse_err(1, None, &e.to_string()))?;
        if header.version != DATASET_FORMAT_VERSION {
            return Err(parse_err(1, None, &format!("unsupported version {}", header.version)));
        }
        if header.feature_layout != FEATURE_LAYOUT {
            return Err(parse_err(1, None, "unexpected feature layout"));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| parse_err(lineno, Some(i), &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordIn = serde_json::from_str(&line)
                .map_err(|e| parse_err(lineno, Some(i), &e.to_string()))?;
            let m = Matrix::from_rows(&rec.d).map_err(|e| parse_err(lineno, Some(i), &e.to_string()))?;
            let scene = SceneDescription::from_matrix(m)
                .map_err(|e| parse_err(lineno, Some(i), &e.to_string()))?;
            if rec.class_index >= header.classes.len() {
                return Err(parse_err(lineno, Some(i), "class index out of range"));
            }
            samples.push(Sample {
                class_index: rec.class_index,
                scene,
            });
        }
        let ds = Dataset {
            classes: header.classes,
            samples,
            target_mode: header.target_mode,
            relation: header.relation,
            generator: header.generator_params,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn read(path: &Path) -> Result<Dataset> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_from(BufReader::new(f))
    }
}

fn parse_err(line: usize, record: Option<usize>, message: &str) -> Error {
    Error::Parse {
        line,
        record,
        message: message.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    target_mode: TargetMode,
    relation: Relation,
    feature_layout: Vec<String>,
    generator_params: GeneratorParams,
    classes: Vec<SceneClass>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    class_index: usize,
    #[serde(rename = "D")]
    d: Vec<&'a [f64]>,
}

#[derive(Deserialize)]
struct RecordIn {
    class_index: usize,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}
