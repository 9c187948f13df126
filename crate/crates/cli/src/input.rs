use lk_core::metricfield::{Chart, ChartFile, MetricSource};
use lk_core::submersion::{SubmersionChart, SubmersionFile};
use lk_core::tubeoracle::{Embedding, EmbeddingFile};
use lk_core::zoo::{self, ZooEntry, ZooObject};
use lk_core::{LkError, Result};
use serde_json::Value;

pub enum Input {
    Zoo(ZooEntry),
    Charts(Vec<Chart>),
    Submersion(SubmersionChart),
    Embedding(Embedding),
}

fn decode<T: serde::de::DeserializeOwned>(v: Value, path: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| LkError::invalid(format!("{path}: {e}")))
}

pub fn load(uri: &str) -> Result<Input> {
    if uri.starts_with("zoo:") {
        return Ok(Input::Zoo(zoo::from_uri(uri)?));
    }
    let text = std::fs::read_to_string(uri).map_err(|e| LkError::invalid(format!("cannot read {uri}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| LkError::invalid(format!("{uri}: {e}")))?;
    match &v {
        Value::Array(_) => {
            let files: Vec<ChartFile> = decode(v, uri)?;
            if files.is_empty() {
                return Err(LkError::invalid(format!("{uri}: empty atlas")));
            }
            let charts = files.iter().map(Chart::from_file).collect::<Result<Vec<_>>>()?;
            if charts.iter().any(|c| c.dim() != charts[0].dim()) {
                return Err(LkError::invalid(format!("{uri}: charts differ in dimension")));
            }
            Ok(Input::Charts(charts))
        }
        Value::Object(m) if m.contains_key("total_chart") => {
            Ok(Input::Submersion(SubmersionChart::from_file(&decode::<SubmersionFile>(v, uri)?)?))
        }
        Value::Object(m) if m.contains_key("coords") => {
            Ok(Input::Embedding(Embedding::from_file(&decode::<EmbeddingFile>(v, uri)?)?))
        }
        Value::Object(m) if m.contains_key("metric") => {
            Ok(Input::Charts(vec![Chart::from_file(&decode::<ChartFile>(v, uri)?)?]))
        }
        _ => Err(LkError::invalid(format!(
            "{uri}: not a chart, atlas, submersion or embedding description"
        ))),
    }
}

impl Input {
    pub fn atlas(&self) -> Result<Vec<&Chart>> {
        match self {
            Input::Zoo(e) => Ok(e.atlas()),
            Input::Charts(c) => Ok(c.iter().collect()),
            Input::Submersion(sc) => Ok(vec![sc.total()]),
            Input::Embedding(_) => Err(LkError::invalid(
                "an embedding file carries no intrinsic metric; use a chart",
            )),
        }
    }

    pub fn submersion(&self) -> Result<&SubmersionChart> {
        match self {
            Input::Zoo(e) => e
                .submersion()
                .ok_or_else(|| LkError::invalid(format!("zoo entry {} is not a submersion", e.name))),
            Input::Submersion(sc) => Ok(sc),
            _ => Err(LkError::invalid("input is not a submersion")),
        }
    }

    pub fn embedding(&self) -> Result<&Embedding> {
        match self {
            Input::Zoo(e) => e
                .embedding()
                .ok_or_else(|| LkError::invalid(format!("zoo entry {} is not an embedding", e.name))),
            Input::Embedding(emb) => Ok(emb),
            _ => Err(LkError::invalid("input is not an embedding")),
        }
    }

    /// Intrinsic charts of an embedded zoo entry, for the Steiner comparison.
    pub fn intrinsic(&self) -> Option<Vec<&Chart>> {
        match self {
            Input::Zoo(ZooEntry {
                object: ZooObject::Embedded { intrinsic, .. },
                ..
            }) => Some(intrinsic.iter().collect()),
            _ => None,
        }
    }
}
