//! Multiple-choice QA records and the JSON-lines files they live in.
//!
//! A corpus directory holds `scene_graphs.jsonl` (one graph per line, keyed
//! by `image_id`), `image_features.jsonl` (`{"image_id", "features"}`),
//! and split files of [`QaSample`] records.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingTable;
use crate::error::{Error, Result};
use crate::heads::{ModelConfig, SampleInput};
use crate::scene_graph::SceneGraph;

/// One question with `K` candidate answers. `correct_index` is 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaSample {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image_id: String,
    pub question: String,
    pub candidates: Vec<String>,
    pub correct_index: usize,
    /// Named groups of decoy positions, e.g. `{"qou": [..], "iou": [..]}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoy_groups: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

impl QaSample {
    pub fn label(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}:{}", self.image_id, self.question))
    }

    pub fn answer(&self) -> &str {
        &self.candidates[self.correct_index]
    }

    pub fn question_type(&self) -> &str {
        self.question_type.as_deref().unwrap_or("other")
    }

    /// Candidate positions other than the correct one.
    pub fn decoys(&self) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&i| i != self.correct_index)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Sample {
            sample: self.label(),
            message,
        };
        let k = self.candidates.len();
        if k < 2 {
            return Err(fail(format!("{k} candidates, need at least 2")));
        }
        if self.correct_index >= k {
            return Err(fail(format!(
                "correct_index {} out of range for {k} candidates",
                self.correct_index
            )));
        }
        let answer = self.answer();
        if self.decoys().iter().any(|&d| self.candidates[d] == answer) {
            return Err(fail("a decoy repeats the correct answer".into()));
        }
        if let Some(groups) = &self.decoy_groups {
            for (name, members) in groups {
                if members.iter().any(|&i| i >= k || i == self.correct_index) {
                    return Err(fail(format!(
                        "decoy group `{name}` names a non-decoy position"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<QaSample>> {
    let samples: Vec<QaSample> = read_jsonl(path.as_ref())?;
    for s in &samples {
        s.validate()?;
    }
    Ok(samples)
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[QaSample]) -> Result<()> {
    write_jsonl(path.as_ref(), samples)
}

/// Scene graphs keyed by `image_id`; every line must carry one.
pub fn load_scene_graphs(path: impl AsRef<Path>) -> Result<HashMap<String, SceneGraph>> {
    let path = path.as_ref();
    let graphs: Vec<SceneGraph> = read_jsonl(path)?;
    let mut out = HashMap::with_capacity(graphs.len());
    for (i, g) in graphs.into_iter().enumerate() {
        let report = g.validate();
        if !report.is_ok() {
            return Err(Error::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: report
                    .violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        let id = g.image_id.clone().ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            line: i + 1,
            message: "scene graph has no image_id".into(),
        })?;
        out.insert(id, g);
    }
    Ok(out)
}

pub fn write_scene_graphs(path: impl AsRef<Path>, graphs: &[SceneGraph]) -> Result<()> {
    write_jsonl(path.as_ref(), graphs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageFeatures {
    pub image_id: String,
    pub features: Vec<f64>,
}

pub fn load_image_features(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<f64>>> {
    let rows: Vec<ImageFeatures> = read_jsonl(path.as_ref())?;
    Ok(rows.into_iter().map(|r| (r.image_id, r.features)).collect())
}

pub fn write_image_features(path: impl AsRef<Path>, rows: &[ImageFeatures]) -> Result<()> {
    write_jsonl(path.as_ref(), rows)
}

/// Scene graphs and image features shared by every split of a corpus.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub graphs: HashMap<String, SceneGraph>,
    pub images: HashMap<String, Vec<f64>>,
}

impl Context {
    /// Embeds every sample. Fails on the first sample whose graph or
    /// image features are missing.
    pub fn encode(
        &self,
        samples: &[QaSample],
        table: &EmbeddingTable,
        cfg: &ModelConfig,
    ) -> Result<Vec<SampleInput>> {
        let empty = SceneGraph::default();
        samples
            .par_iter()
            .map(|s| {
                let graph = match self.graphs.get(&s.image_id) {
                    Some(g) => g,
                    None if cfg.no_graph => &empty,
                    None => {
                        return Err(Error::Sample {
                            sample: s.label(),
                            message: format!("no scene graph for image `{}`", s.image_id),
                        })
                    }
                };
                let image = if cfg.encoder.use_image() {
                    let f = self.images.get(&s.image_id).ok_or_else(|| Error::Sample {
                        sample: s.label(),
                        message: format!("no image features for image `{}`", s.image_id),
                    })?;
                    if f.len() != cfg.encoder.d_img {
                        return Err(Error::Sample {
                            sample: s.label(),
                            message: format!(
                                "image features have width {}, expected {}",
                                f.len(),
                                cfg.encoder.d_img
                            ),
                        });
                    }
                    Some(f.as_slice())
                } else {
                    None
                };
                SampleInput::encode(graph, &s.question, &s.candidates, image, table, cfg).map_err(
                    |e| Error::Sample {
                        sample: s.label(),
                        message: e.to_string(),
                    },
                )
            })
            .collect()
    }
}

/// A split together with its encoded inputs.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<QaSample>,
    pub inputs: Vec<SampleInput>,
}

impl Dataset {
    pub fn new(
        samples: Vec<QaSample>,
        ctx: &Context,
        table: &EmbeddingTable,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let inputs = ctx.encode(&samples, table, cfg)?;
        Ok(Dataset { samples, inputs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The samples of one question type, keeping their order.
    pub fn filter_type(&self, question_type: &str) -> Dataset {
        let (samples, inputs) = self
            .samples
            .iter()
            .zip(&self.inputs)
            .filter(|(s, _)| s.question_type() == question_type)
            .map(|(s, x)| (s.clone(), x.clone()))
            .unzip();
        Dataset { samples, inputs }
    }
}

/// Distinct question types in order of first appearance.
pub fn question_types(samples: &[QaSample]) -> Vec<String> {
    let mut seen = HashSet::new();
    samples
        .iter()
        .map(|s| s.question_type().to_string())
        .filter(|t| seen.insert(t.clone()))
        .collect()
}
