//! Text checkpoint: model configuration, every parameter tensor, and the
//! edges needed to re-run evaluation.
//!
//! ```text
//! fgat-checkpoint 1
//! nodes <N>
//! model <key>=<value> ...
//! meta <key> <value...>          (zero or more)
//! edges <train|test_positive|test_negative> <count>
//! <src> <dst>                    (count lines, dense ids)
//! tensor <name> <dim> [<dim>...]
//! <values of one row, space separated>   (one line per leading index)
//! end
//! ```
//!
//! Tensors appear in the canonical order of `FgatParams::names`. Values use
//! the shortest decimal form that parses back to the same number.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{FgatError, Result};
use crate::graph::Edge;
use crate::model::{FgatModel, FgatParams, ModelConfig};
use crate::scalar::Scalar;

const MAGIC: &str = "fgat-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: FgatModel<T>,
    pub train_edges: Vec<Edge>,
    pub test_positives: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
    pub meta: BTreeMap<String, String>,
}

fn bad(msg: impl Into<String>) -> FgatError {
    FgatError::Checkpoint(msg.into())
}

fn config_pairs(c: &ModelConfig) -> Vec<(&'static str, String)> {
    vec![
        ("embedding_dim", c.embedding_dim.to_string()),
        ("num_heads", c.num_heads.to_string()),
        ("num_layers", c.num_layers.to_string()),
        ("dropout", format!("{:?}", c.dropout)),
        ("leaky_slope", format!("{:?}", c.leaky_slope)),
        ("layer_norm_eps", format!("{:?}", c.layer_norm_eps)),
        ("projection_init_scale", format!("{:?}", c.projection_init_scale)),
        ("seed", c.seed.to_string()),
    ]
}

fn parse_config(fields: &[&str]) -> Result<ModelConfig> {
    let mut c = ModelConfig::default();
    let mut seen = 0;
    for field in fields {
        let (k, v) = field.split_once('=').ok_or_else(|| bad(format!("bad model field {field:?}")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad value for {k}: {v:?}")));
        let int = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("bad value for {k}: {v:?}")));
        match k {
            "embedding_dim" => c.embedding_dim = int(v)? as usize,
            "num_heads" => c.num_heads = int(v)? as usize,
            "num_layers" => c.num_layers = int(v)? as usize,
            "dropout" => c.dropout = num(v)?,
            "leaky_slope" => c.leaky_slope = num(v)?,
            "layer_norm_eps" => c.layer_norm_eps = num(v)?,
            "projection_init_scale" => c.projection_init_scale = num(v)?,
            "seed" => c.seed = int(v)?,
            other => return Err(bad(format!("unknown model field {other:?}"))),
        }
        seen += 1;
    }
    if seen != config_pairs(&c).len() {
        return Err(bad("incomplete model line"));
    }
    c.validate()?;
    Ok(c)
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "nodes {}", self.model.params.num_nodes());
        let cfg: Vec<String> = config_pairs(&self.model.config)
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(out, "model {}", cfg.join(" "));
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, edges) in [
            ("train", &self.train_edges),
            ("test_positive", &self.test_positives),
            ("test_negative", &self.test_negatives),
        ] {
            let _ = writeln!(out, "edges {name} {}", edges.len());
            for (s, d) in edges.iter() {
                let _ = writeln!(out, "{s} {d}");
            }
        }
        for (name, t) in self.model.params.names().iter().zip(self.model.params.tensors()) {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {name} {}", dims.join(" "));
            for r in 0..t.rows() {
                let row: Vec<String> = t.row(r).iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("truncated before {what}")));

        let header = next("header")?;
        if header != format!("{MAGIC} {VERSION}") {
            return Err(bad(format!("unsupported header {header:?}")));
        }
        let nodes = next("nodes")?
            .strip_prefix("nodes ")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| bad("bad nodes line"))?;
        let model_line = next("model")?;
        let fields: Vec<&str> = model_line
            .strip_prefix("model ")
            .ok_or_else(|| bad("missing model line"))?
            .split_whitespace()
            .collect();
        let config = parse_config(&fields)?;

        let mut meta = BTreeMap::new();
        let mut line = next("edges")?;
        while let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_string(), v.to_string());
            line = next("edges")?;
        }

        let mut edge_lists = Vec::with_capacity(3);
        for name in ["train", "test_positive", "test_negative"] {
            let count = line
                .strip_prefix(&format!("edges {name} "))
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(format!("expected edges {name}, got {line:?}")))?;
            let mut edges = Vec::with_capacity(count);
            for _ in 0..count {
                let l = next("edge")?;
                let mut it = l.split_whitespace().map(str::parse::<usize>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(s)), Some(Ok(d)), None) if s < nodes && d < nodes => edges.push((s, d)),
                    _ => return Err(bad(format!("bad edge line {l:?}"))),
                }
            }
            edge_lists.push(edges);
            line = next("section")?;
        }

        let mut params = FgatParams::<T>::init(&config, nodes)?;
        let names = params.names();
        for (name, slot) in names.iter().zip(params.tensors_mut()) {
            let rest = line
                .strip_prefix("tensor ")
                .ok_or_else(|| bad(format!("expected tensor {name}, got {line:?}")))?;
            let mut parts = rest.split_whitespace();
            if parts.next() != Some(name.as_str()) {
                return Err(bad(format!("expected tensor {name}, got {line:?}")));
            }
            let shape = parts
                .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad dim in {line:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if shape != slot.shape() {
                return Err(bad(format!("tensor {name}: shape {shape:?}, expected {:?}", slot.shape())));
            }
            let mut data = Vec::with_capacity(slot.len());
            for _ in 0..slot.rows() {
                for tok in next("tensor row")?.split_whitespace() {
                    data.push(tok.parse::<T>().map_err(|_| bad(format!("bad value {tok:?} in {name}")))?);
                }
            }
            *slot = Tensor::new(shape, data).map_err(|_| bad(format!("tensor {name}: wrong value count")))?;
            line = next("section")?;
        }
        if line != "end" {
            return Err(bad(format!("expected end, got {line:?}")));
        }
        let mut lists = edge_lists.into_iter();
        Ok(Self {
            model: FgatModel { config, params },
            train_edges: lists.next().unwrap_or_default(),
            test_positives: lists.next().unwrap_or_default(),
            test_negatives: lists.next().unwrap_or_default(),
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| FgatError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| FgatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}
