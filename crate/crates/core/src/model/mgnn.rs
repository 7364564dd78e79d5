use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::census::MotifId;
use crate::rng::stream;
use crate::sparse::CsrMatrix;
use crate::tensor::{glorot_uniform, ParamId, ParamSet, Tape, Tensor, Var};

use super::config::{AlphaMode, Combiner, ModelConfig, SigmaBeta, Task, Variant};
use super::inputs::GraphInputs;
use super::ModelError;

#[derive(Debug, Clone)]
struct MotifLayer {
    w: ParamId,
    w_att: Option<ParamId>,
    /// Redundancy-minimization weights; absent for the no-delta variant.
    delta: Option<DeltaParams>,
}

#[derive(Debug, Clone)]
struct DeltaParams {
    w_f: ParamId,
    b_f: ParamId,
    w_fk: Vec<ParamId>,
    b_fk: Vec<ParamId>,
}

#[derive(Debug, Clone)]
enum Layer {
    Gcn { w: ParamId },
    Motif(MotifLayer),
}

/// Inverted dropout applied to every layer input during training.
#[derive(Debug)]
pub struct Dropout {
    pub rate: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    fn mask(&mut self, rows: usize, cols: usize) -> Arc<Tensor> {
        let keep = 1.0 - self.rate;
        let data = (0..rows * cols)
            .map(|_| if self.rng.random_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        Arc::new(Tensor::new(rows, cols, data).expect("mask shape"))
    }
}

/// A stack of motif layers (or GCN layers for the no-motif variant) with a
/// task head. Weights multiply from the right: `H W`.
#[derive(Debug, Clone)]
pub struct MgnnModel {
    config: ModelConfig,
    variant: Variant,
    d_in: usize,
    params: ParamSet,
    layers: Vec<Layer>,
    head: Vec<(ParamId, ParamId)>,
}

fn zeros_row(d: usize) -> Tensor {
    Tensor::zeros(1, d)
}

impl MgnnModel {
    /// Fresh model with weights drawn from the `init` stream of `seed`.
    pub fn new(config: ModelConfig, variant: Variant, d_in: usize, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if d_in == 0 {
            return Err(ModelError::Config("input feature width must be positive".into()));
        }
        let mut rng = stream(seed, "init");
        let mut params = ParamSet::new();
        let mut layers = Vec::new();
        let mut width = d_in;
        for l in 0..config.layers() {
            let (dg, dp) = (config.d_gcn[l], config.d_prime[l]);
            let w = params.add(format!("layer{l}.W"), glorot_uniform(width, dg, &mut rng))?;
            let layer = match variant {
                Variant::NoMotif => Layer::Gcn { w },
                _ => {
                    let w_att = match config.alpha_mode {
                        AlphaMode::Attention => {
                            Some(params.add(format!("layer{l}.W_att"), glorot_uniform(dg, dg, &mut rng))?)
                        }
                        AlphaMode::Constant => None,
                    };
                    let delta = if variant == Variant::NoDelta {
                        None
                    } else {
                        let w_f = params.add(format!("layer{l}.W_f"), glorot_uniform(dg, dp, &mut rng))?;
                        let b_f = params.add(format!("layer{l}.b_f"), zeros_row(dp))?;
                        let mut w_fk = Vec::new();
                        let mut b_fk = Vec::new();
                        for k in MotifId::all() {
                            let n = k.number();
                            w_fk.push(params.add(
                                format!("layer{l}.W_f{n}"),
                                glorot_uniform(MotifId::COUNT * dg, dp, &mut rng),
                            )?);
                            b_fk.push(params.add(format!("layer{l}.b_f{n}"), zeros_row(dp))?);
                        }
                        Some(DeltaParams { w_f, b_f, w_fk, b_fk })
                    };
                    Layer::Motif(MotifLayer { w, w_att, delta })
                }
            };
            layers.push(layer);
            width = Self::layer_width(&config, variant, l);
        }
        let mut head = Vec::new();
        let mut dims = Vec::new();
        match config.task {
            Task::Node => dims.push((width, config.n_classes)),
            Task::Graph => {
                dims.push((width, config.head_hidden));
                dims.push((config.head_hidden, config.head_hidden));
                dims.push((config.head_hidden, config.n_classes));
            }
            Task::Link => {}
        }
        for (i, (a, b)) in dims.into_iter().enumerate() {
            let w = params.add(format!("head.fc{i}.W"), glorot_uniform(a, b, &mut rng))?;
            let bias = params.add(format!("head.fc{i}.b"), zeros_row(b))?;
            head.push((w, bias));
        }
        Ok(Self {
            config,
            variant,
            d_in,
            params,
            layers,
            head,
        })
    }

    /// Output width of layer `l`.
    pub fn layer_width(config: &ModelConfig, variant: Variant, l: usize) -> usize {
        let (dg, dp) = (config.d_gcn[l], config.d_prime[l]);
        match variant {
            Variant::NoMotif => dg,
            Variant::NoDelta => MotifId::COUNT * dg,
            Variant::Combiner(Combiner::Sum | Combiner::Mean | Combiner::Max) => dp,
            Variant::Full | Variant::SingleMotif(_) | Variant::Combiner(Combiner::Concat) => MotifId::COUNT * dp,
        }
    }

    pub fn embedding_width(&self) -> usize {
        Self::layer_width(&self.config, self.variant, self.config.layers() - 1)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn input_width(&self) -> usize {
        self.d_in
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Node embeddings after the last layer.
    pub fn embed(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &GraphInputs,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<Var, ModelError> {
        if inputs.features.cols() != self.d_in {
            return Err(ModelError::Config(format!(
                "model expects {} input features, got {}",
                self.d_in,
                inputs.features.cols()
            )));
        }
        let mut h = tape.constant(inputs.features.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            if let Some(d) = dropout.as_deref_mut().filter(|d| d.rate > 0.0) {
                let (r, c) = tape.value(h).shape();
                h = tape.mul_const(h, d.mask(r, c))?;
            }
            h = match layer {
                Layer::Gcn { w } => {
                    let hw = tape.matmul(h, vars[w.index()])?;
                    let z = tape.spmm(&inputs.a_tilde, hw)?;
                    tape.relu(z)?
                }
                Layer::Motif(ml) => self.motif_layer(tape, vars, ml, l, h, inputs)?,
            };
        }
        Ok(h)
    }

    fn motif_layer(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        ml: &MotifLayer,
        l: usize,
        h: Var,
        inputs: &GraphInputs,
    ) -> Result<Var, ModelError> {
        let v = |id: ParamId| vars[id.index()];
        let hw = tape.matmul(h, v(ml.w))?;
        let z = tape.spmm(&inputs.a_tilde, hw)?;
        let n = inputs.node_count();
        let zero = tape.constant(Tensor::zeros(n, self.config.d_gcn[l]));
        let active: Vec<MotifId> = match self.variant {
            Variant::SingleMotif(k) => vec![k],
            _ => MotifId::all().collect(),
        };
        let mut hk = [zero; MotifId::COUNT];
        let zw = match ml.w_att {
            Some(w_att) => Some(tape.matmul(z, v(w_att))?),
            None => None,
        };
        for k in active {
            let pattern = inputs.motifs.get(k);
            let values = inputs.motifs.values(k);
            let coef = match zw {
                None => tape.constant(values.as_ref().clone()),
                Some(zw) => {
                    let scores = tape.edge_bilinear(pattern, zw, z)?;
                    let weights = tape.edge_softmax(pattern, scores)?;
                    tape.mul_const(weights, Arc::clone(values))?
                }
            };
            hk[k.index()] = tape.edge_aggregate(pattern, coef, z, self.config.agg)?;
        }
        let Some(delta) = &ml.delta else {
            let blocks = hk.iter().map(|&b| tape.relu(b)).collect::<Result<Vec<_>, _>>()?;
            return Ok(tape.concat(&blocks)?);
        };
        let mut blocks = Vec::with_capacity(MotifId::COUNT);
        for k in 0..MotifId::COUNT {
            let fh = tape.matmul(hk[k], v(delta.w_f))?;
            let f = tape.add_row_bias(fh, v(delta.b_f))?;
            let mut others: Vec<Var> = (0..MotifId::COUNT).filter(|&j| j != k).map(|j| hk[j]).collect();
            others.push(z);
            let hbar = tape.concat(&others)?;
            let gh = tape.matmul(hbar, v(delta.w_fk[k]))?;
            let g = tape.add_row_bias(gh, v(delta.b_fk[k]))?;
            blocks.push(redundancy_minimize(tape, f, g, self.config.sigma_beta)?);
        }
        let combiner = match self.variant {
            Variant::Combiner(c) => c,
            _ => Combiner::Concat,
        };
        combine_blocks(tape, &blocks, combiner)
    }

    fn fc(&self, tape: &mut Tape, vars: &[Var], i: usize, x: Var) -> Result<Var, ModelError> {
        let (w, b) = self.head[i];
        let xw = tape.matmul(x, vars[w.index()])?;
        Ok(tape.add_row_bias(xw, vars[b.index()])?)
    }

    /// Per-node class logits (node head).
    pub fn node_logits(&self, tape: &mut Tape, vars: &[Var], h: Var) -> Result<Var, ModelError> {
        self.expect_task(Task::Node)?;
        self.fc(tape, vars, 0, h)
    }

    /// Per-graph class logits: sum readout through `pool`, then three
    /// fully connected layers with ReLU between them.
    pub fn graph_logits(&self, tape: &mut Tape, vars: &[Var], h: Var, pool: &Arc<CsrMatrix>) -> Result<Var, ModelError> {
        self.expect_task(Task::Graph)?;
        let r = tape.spmm(pool, h)?;
        let a = self.fc(tape, vars, 0, r)?;
        let a = tape.relu(a)?;
        let b = self.fc(tape, vars, 1, a)?;
        let b = tape.relu(b)?;
        self.fc(tape, vars, 2, b)
    }

    /// Inner-product logits for node pairs (link head).
    pub fn link_logits(&self, tape: &mut Tape, h: Var, pairs: Arc<Vec<(usize, usize)>>) -> Result<Var, ModelError> {
        self.expect_task(Task::Link)?;
        Ok(tape.pair_inner(h, pairs)?)
    }

    fn expect_task(&self, task: Task) -> Result<(), ModelError> {
        if self.config.task == task {
            Ok(())
        } else {
            Err(ModelError::HeadMismatch {
                model: self.config.task,
                requested: task,
            })
        }
    }

    /// Forward pass with frozen weights.
    pub fn embeddings(&self, inputs: &GraphInputs) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.value.clone())).collect();
        let h = self.embed(&mut tape, &vars, inputs, None)?;
        Ok(tape.value(h).clone())
    }

    /// Class probabilities per node (node task) or per graph (graph task).
    pub fn predict_proba(&self, inputs: &GraphInputs, pool: Option<&Arc<CsrMatrix>>) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.value.clone())).collect();
        let h = self.embed(&mut tape, &vars, inputs, None)?;
        let logits = match (self.config.task, pool) {
            (Task::Node, _) => self.node_logits(&mut tape, &vars, h)?,
            (Task::Graph, Some(pool)) => self.graph_logits(&mut tape, &vars, h, pool)?,
            (Task::Graph, None) => return Err(ModelError::Config("graph prediction needs a pooling matrix".into())),
            (Task::Link, _) => {
                return Err(ModelError::HeadMismatch {
                    model: Task::Link,
                    requested: Task::Node,
                })
            }
        };
        let p = tape.row_softmax(logits)?;
        Ok(tape.value(p).clone())
    }

    /// Link probabilities `sigmoid(h_u . h_v)`.
    pub fn predict_links(&self, inputs: &GraphInputs, pairs: &[(usize, usize)]) -> Result<Vec<f64>, ModelError> {
        let h = self.embeddings(inputs)?;
        Ok(link_scores(&h, pairs))
    }
}

/// `relu(β ⊙ (F - G))` with `β = σ_β(rowsum(F ⊙ G))`, one β per row.
pub fn redundancy_minimize(tape: &mut Tape, f: Var, g: Var, sigma_beta: SigmaBeta) -> Result<Var, ModelError> {
    let fg = tape.mul(f, g)?;
    let s = tape.row_sum(fg)?;
    let beta = match sigma_beta {
        SigmaBeta::Sigmoid => tape.sigmoid(s)?,
        SigmaBeta::Tanh => tape.tanh(s)?,
    };
    let diff = tape.sub(f, g)?;
    let gated = tape.mul_column(diff, beta)?;
    Ok(tape.relu(gated)?)
}

/// Merges the per-motif blocks; only concatenation keeps them recoverable.
pub fn combine_blocks(tape: &mut Tape, blocks: &[Var], combiner: Combiner) -> Result<Var, ModelError> {
    Ok(match combiner {
        Combiner::Concat => tape.concat(blocks)?,
        Combiner::Sum => sum_all_blocks(tape, blocks)?,
        Combiner::Mean => {
            let s = sum_all_blocks(tape, blocks)?;
            tape.scale(s, 1.0 / blocks.len() as f64)?
        }
        Combiner::Max => tape.elementwise_max(blocks)?,
    })
}

fn sum_all_blocks(tape: &mut Tape, blocks: &[Var]) -> Result<Var, ModelError> {
    let mut acc = blocks[0];
    for &b in &blocks[1..] {
        acc = tape.add(acc, b)?;
    }
    Ok(acc)
}

/// `sigmoid(h_u . h_v)` for each pair.
pub fn link_scores(h: &Tensor, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| {
            let dot: f64 = h.row(u).iter().zip(h.row(v)).map(|(a, b)| a * b).sum();
            1.0 / (1.0 + (-dot).exp())
        })
        .collect()
}
