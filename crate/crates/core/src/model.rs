//! Stacked multi-head graph attention with pre-norm residual blocks and a
//! dot-product link decoder.
//!
//! One block maps `h` (width `D`) to
//!
//! ```text
//! z   = LayerNorm(h)
//! p_k = z · W_k                                    (per head, width D/K)
//! e   = LeakyReLU(a_k[..D/K]·p_k[v] + a_k[D/K..]·p_k[u])   for u ∈ N(v)
//! α   = softmax of e over N(v)
//! c_v = ∥_k Σ_u α_vu p_k[u]
//! out = h + Dropout(ReLU(c · P + b))
//! ```
//!
//! so every residual is an identity skip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tape, Tensor, Var};
use crate::error::{FgatError, Result};
use crate::graph::{Edge, MessageEdges};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub layer_norm_eps: f64,
    /// Multiplier on the Glorot bound of the output projection. Small values
    /// start every block close to the identity.
    pub projection_init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 128,
            num_heads: 4,
            num_layers: 4,
            dropout: 0.1,
            leaky_slope: 0.2,
            layer_norm_eps: 1e-5,
            projection_init_scale: 0.1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Width `F'` of each attention head.
    pub fn head_dim(&self) -> usize {
        self.embedding_dim / self.num_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FgatError::InvalidArgument(m));
        if self.embedding_dim == 0 || self.num_heads == 0 {
            return bad("dim and heads must be positive".into());
        }
        if !self.embedding_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "dim {} must be divisible by heads {}",
                self.embedding_dim, self.num_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0,1)".into());
        }
        if !(self.leaky_slope.is_finite() && self.layer_norm_eps > 0.0 && self.projection_init_scale > 0.0) {
            return bad("leaky slope, layer-norm eps and projection scale must be positive finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    /// `D × F'`; the transpose of the usual `F' × D` attention weight.
    pub weight: Tensor<T>,
    /// `2F' × 1`: destination half then source half.
    pub attention: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub heads: Vec<HeadParams<T>>,
    /// `K·F' × D`
    pub proj_weight: Tensor<T>,
    pub proj_bias: Tensor<T>,
    pub ln_gamma: Tensor<T>,
    pub ln_beta: Tensor<T>,
}

/// Every trainable tensor: node embedding table plus per-layer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FgatParams<T> {
    pub embeddings: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Scalar> FgatParams<T> {
    pub fn init(config: &ModelConfig, num_nodes: usize) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let fh = config.head_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embeddings = Tensor::uniform(vec![num_nodes, d], 1.0 / (d as f64).sqrt(), &mut rng);
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                heads: (0..config.num_heads)
                    .map(|_| HeadParams {
                        weight: Tensor::uniform(vec![d, fh], glorot(d, fh), &mut rng),
                        attention: Tensor::uniform(vec![2 * fh, 1], glorot(2 * fh, 1), &mut rng),
                    })
                    .collect(),
                proj_weight: Tensor::uniform(
                    vec![fh * config.num_heads, d],
                    glorot(fh * config.num_heads, d) * config.projection_init_scale,
                    &mut rng,
                ),
                proj_bias: Tensor::zeros(vec![d]),
                ln_gamma: Tensor::filled(vec![d], T::one()),
                ln_beta: Tensor::zeros(vec![d]),
            })
            .collect();
        Ok(Self { embeddings, layers })
    }

    pub fn num_nodes(&self) -> usize {
        self.embeddings.rows()
    }

    /// Canonical tensor order shared by `names`, `tensors`, `tensors_mut`
    /// and [`BoundParams::all`].
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["embeddings".to_string()];
        for (l, layer) in self.layers.iter().enumerate() {
            for k in 0..layer.heads.len() {
                out.push(format!("layer{l}.head{k}.weight"));
                out.push(format!("layer{l}.head{k}.attention"));
            }
            out.push(format!("layer{l}.proj_weight"));
            out.push(format!("layer{l}.proj_bias"));
            out.push(format!("layer{l}.ln_gamma"));
            out.push(format!("layer{l}.ln_beta"));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.embeddings];
        for layer in &self.layers {
            for head in &layer.heads {
                out.push(&head.weight);
                out.push(&head.attention);
            }
            out.extend([&layer.proj_weight, &layer.proj_bias, &layer.ln_gamma, &layer.ln_beta]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.embeddings];
        for layer in &mut self.layers {
            for head in &mut layer.heads {
                out.push(&mut head.weight);
                out.push(&mut head.attention);
            }
            out.push(&mut layer.proj_weight);
            out.push(&mut layer.proj_bias);
            out.push(&mut layer.ln_gamma);
            out.push(&mut layer.ln_beta);
        }
        out
    }

    /// Records every tensor on `tape`, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        self.bind_with(|t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
    }

    /// Reuses already-recorded variables, given in canonical order.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<BoundParams> {
        let expected = self.tensors().len();
        if vars.len() != expected {
            return Err(FgatError::Shape {
                op: "bind_vars",
                detail: format!("{} vars for {expected} tensors", vars.len()),
            });
        }
        let mut it = vars.iter().copied();
        Ok(self.bind_with(|_| it.next().expect("length checked")))
    }

    fn bind_with(&self, mut leaf: impl FnMut(&Tensor<T>) -> Var) -> BoundParams {
        let embeddings = leaf(&self.embeddings);
        let mut all = vec![embeddings];
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut heads = Vec::with_capacity(layer.heads.len());
            for head in &layer.heads {
                let h = BoundHead {
                    weight: leaf(&head.weight),
                    attention: leaf(&head.attention),
                };
                all.extend([h.weight, h.attention]);
                heads.push(h);
            }
            let b = BoundLayer {
                heads,
                proj_weight: leaf(&layer.proj_weight),
                proj_bias: leaf(&layer.proj_bias),
                ln_gamma: leaf(&layer.ln_gamma),
                ln_beta: leaf(&layer.ln_beta),
            };
            all.extend([b.proj_weight, b.proj_bias, b.ln_gamma, b.ln_beta]);
            layers.push(b);
        }
        BoundParams {
            embeddings,
            layers,
            all,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundHead {
    pub weight: Var,
    pub attention: Var,
}

#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub heads: Vec<BoundHead>,
    pub proj_weight: Var,
    pub proj_bias: Var,
    pub ln_gamma: Var,
    pub ln_beta: Var,
}

#[derive(Debug, Clone)]
pub struct BoundParams {
    pub embeddings: Var,
    pub layers: Vec<BoundLayer>,
    /// Same order as [`FgatParams::tensors`].
    pub all: Vec<Var>,
}

/// Per-message attention logits of one head, plus the head's transformed
/// node features `z · W`.
pub fn attention_logits<T: Scalar>(
    tape: &mut Tape<T>,
    head: BoundHead,
    z: Var,
    edges: &MessageEdges,
    slope: T,
) -> Result<(Var, Var)> {
    let fh = tape.value(head.weight).shape()[1];
    if tape.value(head.attention).len() != 2 * fh {
        return Err(FgatError::Shape {
            op: "attention_logits",
            detail: format!("attention vector length {} for head width {fh}", tape.value(head.attention).len()),
        });
    }
    let projected = tape.matmul(z, head.weight)?;
    let a_dst = tape.slice_rows(head.attention, 0, fh)?;
    let a_src = tape.slice_rows(head.attention, fh, 2 * fh)?;
    let s_dst = tape.matmul(projected, a_dst)?;
    let s_src = tape.matmul(projected, a_src)?;
    let e_dst = tape.gather_rows(s_dst, &edges.dst)?;
    let e_src = tape.gather_rows(s_src, &edges.src)?;
    let raw = tape.add(e_dst, e_src)?;
    let logits = tape.leaky_relu(raw, slope)?;
    Ok((logits, projected))
}

/// Output of one block, with the per-head attention weights kept for
/// inspection.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub output: Var,
    pub attention: Vec<Var>,
}

pub fn fgat_layer_forward<T: Scalar>(
    tape: &mut Tape<T>,
    config: &ModelConfig,
    layer: &BoundLayer,
    h: Var,
    edges: &MessageEdges,
    train: bool,
    dropout_seed: u64,
) -> Result<LayerOutput> {
    let n = edges.num_nodes;
    if tape.value(h).rows() != n {
        return Err(FgatError::Shape {
            op: "fgat_layer",
            detail: format!("{} feature rows for {n} nodes", tape.value(h).rows()),
        });
    }
    let z = tape.layer_norm(h, layer.ln_gamma, layer.ln_beta, T::lit(config.layer_norm_eps))?;
    let mut head_outputs = Vec::with_capacity(layer.heads.len());
    let mut attention = Vec::with_capacity(layer.heads.len());
    for &head in &layer.heads {
        let (logits, projected) = attention_logits(tape, head, z, edges, T::lit(config.leaky_slope))?;
        let weights = tape.segment_softmax(logits, &edges.dst, n)?;
        let messages = tape.gather_rows(projected, &edges.src)?;
        let weighted = tape.mul_rows(messages, weights)?;
        head_outputs.push(tape.scatter_add_rows(weighted, &edges.dst, n)?);
        attention.push(weights);
    }
    let concat = tape.concat(&head_outputs, 1)?;
    let proj = tape.matmul(concat, layer.proj_weight)?;
    let proj = tape.add_bias(proj, layer.proj_bias)?;
    let act = tape.relu(proj)?;
    let dropped = tape.dropout(act, config.dropout, dropout_seed, train)?;
    let output = tape.add(dropped, h)?;
    Ok(LayerOutput { output, attention })
}

/// Seed of the dropout mask of `layer` for a given forward pass.
pub fn layer_dropout_seed(pass_seed: u64, layer: usize) -> u64 {
    pass_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((layer as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// Runs every block in sequence starting from the embedding table.
pub fn model_forward<T: Scalar>(
    tape: &mut Tape<T>,
    config: &ModelConfig,
    params: &BoundParams,
    edges: &MessageEdges,
    train: bool,
    pass_seed: u64,
) -> Result<Var> {
    let mut h = params.embeddings;
    for (l, layer) in params.layers.iter().enumerate() {
        h = fgat_layer_forward(tape, config, layer, h, edges, train, layer_dropout_seed(pass_seed, l))?.output;
    }
    Ok(h)
}

/// `h_x · h_y` for each pair, as a tape value of length `pairs.len()`.
pub fn link_logits<T: Scalar>(tape: &mut Tape<T>, h: Var, pairs: &[Edge]) -> Result<Var> {
    let xs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let hx = tape.gather_rows(h, &xs)?;
    let hy = tape.gather_rows(h, &ys)?;
    tape.row_dot(hx, hy)
}

/// `sigmoid(h_x · h_y)` from a materialized node matrix.
pub fn link_probability<T: Scalar>(h: &Tensor<T>, x: usize, y: usize) -> Result<T> {
    let n = h.rows();
    for id in [x, y] {
        if id >= n {
            return Err(FgatError::IndexOutOfRange { index: id, len: n });
        }
    }
    let dot: T = h.row(x).iter().zip(h.row(y)).map(|(&a, &b)| a * b).sum();
    Ok(sigmoid(dot))
}

/// Configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FgatModel<T> {
    pub config: ModelConfig,
    pub params: FgatParams<T>,
}

impl<T: Scalar> FgatModel<T> {
    pub fn new(config: ModelConfig, num_nodes: usize) -> Result<Self> {
        Ok(Self {
            config,
            params: FgatParams::init(&config, num_nodes)?,
        })
    }

    /// Final node matrix `H` in evaluation mode.
    pub fn embed(&self, edges: &MessageEdges) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let h = model_forward(&mut tape, &self.config, &bound, edges, false, 0)?;
        Ok(tape.value(h).clone())
    }

    /// Link probabilities of `pairs` in evaluation mode.
    pub fn predict(&self, edges: &MessageEdges, pairs: &[Edge]) -> Result<Vec<T>> {
        let h = self.embed(edges)?;
        pairs.iter().map(|&(x, y)| link_probability(&h, x, y)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn small_config(layers: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: 8,
            num_heads: 2,
            num_layers: layers,
            dropout: 0.0,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert_eq!(ModelConfig::default().head_dim(), 32);
        let bad = ModelConfig {
            num_heads: 3,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            dropout: 1.0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tensor_listing_is_consistent() {
        let mut p = FgatParams::<f64>::init(&small_config(2), 5).unwrap();
        let names = p.names();
        assert_eq!(names.len(), p.tensors().len());
        assert_eq!(names.len(), p.tensors_mut().len());
        assert_eq!(names.len(), 1 + 2 * (2 * 2 + 4));
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape, true);
        assert_eq!(bound.all.len(), names.len());
        for (v, t) in bound.all.iter().zip(p.tensors()) {
            assert_eq!(tape.value(*v), t);
        }
    }

    #[test]
    fn zero_attention_vector_gives_zero_logits() {
        let g = Graph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        let edges = g.message_edges();
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::uniform(vec![3, 4], 1.0, &mut ChaCha8Rng::seed_from_u64(1)));
        let head = BoundHead {
            weight: tape.constant(Tensor::identity(4)),
            attention: tape.constant(Tensor::zeros(vec![8, 1])),
        };
        let (logits, _) = attention_logits(&mut tape, head, z, &edges, 0.2).unwrap();
        assert!(tape.value(logits).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_layers_return_embeddings() {
        let model = FgatModel::<f64>::new(small_config(0), 4).unwrap();
        let g = Graph::from_edges(4, vec![(0, 1)]).unwrap();
        assert_eq!(model.embed(&g.message_edges()).unwrap(), model.params.embeddings);
    }

    #[test]
    fn eval_forward_is_deterministic_and_train_forward_seeded() {
        let cfg = ModelConfig {
            dropout: 0.3,
            ..small_config(2)
        };
        let model = FgatModel::<f64>::new(cfg, 5).unwrap();
        let g = Graph::from_edges(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let e = g.message_edges();
        assert_eq!(model.embed(&e).unwrap(), model.embed(&e).unwrap());
        let run = |seed| {
            let mut tape = Tape::new();
            let b = model.params.bind(&mut tape, false);
            let h = model_forward(&mut tape, &cfg, &b, &e, true, seed).unwrap();
            tape.value(h).clone()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn link_probability_examples() {
        let h = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8]).unwrap();
        assert_eq!(link_probability(&h, 0, 1).unwrap(), 0.5);
        let p: f64 = link_probability(&h, 2, 2).unwrap();
        assert!((p - 0.7310585786300049).abs() < 1e-15);
        assert_eq!(link_probability(&h, 0, 2).unwrap(), link_probability(&h, 2, 0).unwrap());
        assert!(link_probability(&h, 0, 3).is_err());
    }
}
