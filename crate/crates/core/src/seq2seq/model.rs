use rand::Rng as _;

use super::gru::{self, GruGrads, GruStep, GruWeights};
use super::{AttentionNorm, ModelConfig, ModelError};
use crate::numcore::kernels::{affine_into, axpy, dot, matvec_t_acc, outer_acc, softmax_in_place};
use crate::numcore::{dropout_mask, Gradients, ParamStore, Rng, Tensor, PROB_FLOOR};
use crate::textdata::{pad_for_pyramid, SymbolId, SOS, VOCAB_SIZE};

/// Whether dropout is active. Training carries the generator that draws
/// the masks; evaluation is deterministic and consumes no randomness.
pub enum Phase<'a> {
    Eval,
    Train(&'a mut Rng),
}

impl Phase<'_> {
    fn mask(&mut self, len: usize, rate: f64) -> Option<Vec<f64>> {
        match self {
            Phase::Train(rng) if rate > 0.0 => {
                Some(dropout_mask(len, rate, rng).expect("rate validated by ModelConfig"))
            }
            _ => None,
        }
    }

    pub fn is_training(&self) -> bool {
        matches!(self, Phase::Train(_))
    }
}

#[derive(Debug, Clone, Copy)]
struct GruIds {
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct AffineIds {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct EncoderLayerIds {
    /// Pairwise reduction feeding this layer; absent on the first layer.
    reduce: Option<AffineIds>,
    fwd: GruIds,
    bwd: GruIds,
}

#[derive(Debug, Clone)]
struct Layout {
    enc_embed: usize,
    encoder: Vec<EncoderLayerIds>,
    dec_embed: usize,
    decoder: Vec<GruIds>,
    query: AffineIds,
    key: AffineIds,
    combine: AffineIds,
    project: AffineIds,
}

/// Parameter names and shapes in canonical order.
pub fn parameter_manifest(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (h, e, v) = (cfg.hidden, cfg.embedding, cfg.vocab);
    let mut out = Vec::new();
    let gru = |out: &mut Vec<(String, Vec<usize>)>, prefix: &str, input: usize| {
        out.push((format!("{prefix}.w_input"), vec![3 * h, input]));
        out.push((format!("{prefix}.w_hidden"), vec![3 * h, h]));
        out.push((format!("{prefix}.bias"), vec![3 * h]));
    };
    out.push(("encoder.embedding".into(), vec![v, e]));
    for j in 0..cfg.encoder_layers {
        let input = if j == 0 {
            e
        } else {
            out.push((format!("encoder.layer{j}.reduce.weight"), vec![h, 2 * h]));
            out.push((format!("encoder.layer{j}.reduce.bias"), vec![h]));
            h
        };
        gru(&mut out, &format!("encoder.layer{j}.forward"), input);
        gru(&mut out, &format!("encoder.layer{j}.backward"), input);
    }
    out.push(("decoder.embedding".into(), vec![v, e]));
    for l in 0..cfg.decoder_layers {
        gru(&mut out, &format!("decoder.layer{l}"), if l == 0 { e } else { h });
    }
    out.push(("attention.query.weight".into(), vec![h, h]));
    out.push(("attention.query.bias".into(), vec![h]));
    out.push(("attention.key.weight".into(), vec![h, h]));
    out.push(("attention.key.bias".into(), vec![h]));
    out.push(("output.combine.weight".into(), vec![h, 2 * h]));
    out.push(("output.combine.bias".into(), vec![h]));
    out.push(("output.project.weight".into(), vec![v, h]));
    out.push(("output.project.bias".into(), vec![v]));
    out
}

fn is_bias(name: &str) -> bool {
    name.ends_with("bias")
}

impl Layout {
    fn resolve(store: &ParamStore, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let id = |name: String| -> Result<usize, ModelError> {
            store
                .id(&name)
                .ok_or_else(|| ModelError::Config(format!("missing parameter {name}")))
        };
        let gru = |prefix: String| -> Result<GruIds, ModelError> {
            Ok(GruIds {
                w: id(format!("{prefix}.w_input"))?,
                u: id(format!("{prefix}.w_hidden"))?,
                b: id(format!("{prefix}.bias"))?,
            })
        };
        let affine = |prefix: &str| -> Result<AffineIds, ModelError> {
            Ok(AffineIds {
                w: id(format!("{prefix}.weight"))?,
                b: id(format!("{prefix}.bias"))?,
            })
        };
        let encoder = (0..cfg.encoder_layers)
            .map(|j| {
                Ok(EncoderLayerIds {
                    reduce: if j == 0 {
                        None
                    } else {
                        Some(affine(&format!("encoder.layer{j}.reduce"))?)
                    },
                    fwd: gru(format!("encoder.layer{j}.forward"))?,
                    bwd: gru(format!("encoder.layer{j}.backward"))?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let decoder = (0..cfg.decoder_layers)
            .map(|l| gru(format!("decoder.layer{l}")))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Layout {
            enc_embed: id("encoder.embedding".into())?,
            encoder,
            dec_embed: id("decoder.embedding".into())?,
            decoder,
            query: affine("attention.query")?,
            key: affine("attention.key")?,
            combine: affine("output.combine")?,
            project: affine("output.project")?,
        })
    }
}

/// Top-layer encoder states plus their precomputed attention keys.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    contexts: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
    source_len: usize,
}

impl EncodedSource {
    /// The context vectors `c_1..c_K`.
    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Length of the source before pyramid padding.
    pub fn source_len(&self) -> usize {
        self.source_len
    }
}

/// Hidden vectors of every decoder layer plus the last emitted symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<Vec<f64>>,
    pub prev: SymbolId,
}

struct EncoderLayerTrace {
    /// Layer inputs before dropout. Only kept for reduced layers.
    reduced: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
    fwd: Vec<GruStep>,
    bwd: Vec<GruStep>,
    out: Vec<Vec<f64>>,
}

struct EncoderTrace {
    ids: Vec<SymbolId>,
    layers: Vec<EncoderLayerTrace>,
}

struct DecoderStepTrace {
    input: SymbolId,
    layers: Vec<GruStep>,
    masks: Vec<Option<Vec<f64>>>,
    query: Vec<f64>,
    alpha: Vec<f64>,
    score_sum: f64,
    combine_in: Vec<f64>,
    combine_mask: Option<Vec<f64>>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

/// `(−ln p_y, −ln p_y − ln V)` from raw logits, both computed in log
/// space. The clamp at [`PROB_FLOOR`] matches `cross_entropy`.
fn step_nll(logits: &[f64], y: SymbolId) -> (f64, f64) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - m).exp()).sum();
    let shifted = logits[y] - m;
    let floor = PROB_FLOOR.ln();
    let logp = shifted - sum.ln();
    if logp < floor {
        let v = logits.len() as f64;
        return (-floor, -floor - v.ln());
    }
    (-logp, (sum / logits.len() as f64).ln() - shifted)
}

#[derive(Debug, Default, Clone, Copy)]
struct LossPair {
    nll: f64,
    excess: f64,
}

/// Teacher-forced statistics for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub loss: f64,
    /// Predicted positions (target length minus ⟨sos⟩).
    pub steps: usize,
    /// Positions whose argmax equals the gold symbol.
    pub correct: usize,
}

/// Pyramidal bidirectional GRU encoder with an attention GRU decoder.
#[derive(Debug, Clone)]
pub struct Seq2Seq {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
    }
}

impl Seq2Seq {
    /// Weights and embeddings uniform in `[-init_scale, init_scale]`,
    /// biases zero, drawn in manifest order.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let s = config.init_scale;
        let mut params = ParamStore::new();
        for (name, shape) in parameter_manifest(&config) {
            let mut t = Tensor::zeros(&shape);
            if !is_bias(&name) {
                t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-s..=s));
            }
            params.insert(&name, t)?;
        }
        Self::from_params(config, params)
    }

    /// Wraps an existing store; names and shapes must match the manifest.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let manifest = parameter_manifest(&config);
        if manifest.len() != params.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameters, store has {}",
                manifest.len(),
                params.len()
            )));
        }
        for ((name, shape), (pname, t)) in manifest.iter().zip(params.iter()) {
            if name != pname || shape.as_slice() != t.shape() {
                return Err(ModelError::Config(format!(
                    "parameter {pname} {:?} does not match expected {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        let layout = Layout::resolve(&params, &config)?;
        Ok(Seq2Seq { config, params, layout })
    }

    /// Every parameter set to zero.
    pub fn zeroed(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in parameter_manifest(&config) {
            params.insert(&name, Tensor::zeros(&shape))?;
        }
        Self::from_params(config, params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Changes the dropout rate used by [`Phase::Train`] passes.
    pub fn set_dropout(&mut self, rate: f64) -> Result<(), ModelError> {
        let cfg = ModelConfig {
            dropout: rate,
            ..self.config.clone()
        };
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn p(&self, id: usize) -> &[f64] {
        self.params.get(id).data()
    }

    fn gru(&self, ids: GruIds) -> GruWeights<'_> {
        GruWeights {
            w: self.p(ids.w),
            u: self.p(ids.u),
            b: self.p(ids.b),
        }
    }

    fn check_ids(&self, ids: &[SymbolId]) -> Result<(), ModelError> {
        match ids.iter().find(|&&i| i >= VOCAB_SIZE) {
            Some(bad) => Err(ModelError::Argument(format!("symbol id {bad} out of range"))),
            None => Ok(()),
        }
    }

    /// Runs the encoder. The source is padded with ⟨eos⟩ to a multiple of
    /// `2^(N-1)` first, so the result has `⌈T / 2^(N-1)⌉` states.
    pub fn encode(&self, source: &[SymbolId], phase: &mut Phase<'_>) -> Result<EncodedSource, ModelError> {
        Ok(self.encode_traced(source, phase)?.0)
    }

    fn encode_traced(
        &self,
        source: &[SymbolId],
        phase: &mut Phase<'_>,
    ) -> Result<(EncodedSource, EncoderTrace), ModelError> {
        if source.is_empty() {
            return Err(ModelError::Argument("empty source sequence".into()));
        }
        self.check_ids(source)?;
        let h = self.config.hidden;
        let rate = self.config.dropout;
        let ids = pad_for_pyramid(source, self.config.encoder_layers);
        let embed = self.params.get(self.layout.enc_embed);

        let mut layers: Vec<EncoderLayerTrace> = Vec::with_capacity(self.config.encoder_layers);
        for (j, lids) in self.layout.encoder.iter().enumerate() {
            let (reduced, inputs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match (j, lids.reduce) {
                (0, _) | (_, None) => (Vec::new(), ids.iter().map(|&i| embed.row(i).to_vec()).collect()),
                (_, Some(red)) => {
                    let below = &layers[j - 1].out;
                    let (w, b) = (self.p(red.w), self.p(red.b));
                    let reduced: Vec<Vec<f64>> = below
                        .chunks_exact(2)
                        .map(|pair| {
                            let cat = [pair[0].as_slice(), pair[1].as_slice()].concat();
                            let mut c = vec![0.0; h];
                            affine_into(w, b, &cat, &mut c);
                            c.iter_mut().for_each(|v| *v = v.tanh());
                            c
                        })
                        .collect();
                    (reduced.clone(), reduced)
                }
            };
            let masks: Option<Vec<Vec<f64>>> = if phase.is_training() && rate > 0.0 {
                Some(inputs.iter().map(|x| phase.mask(x.len(), rate).unwrap()).collect())
            } else {
                None
            };
            let dropped: Vec<Vec<f64>> = match &masks {
                Some(ms) => inputs
                    .into_iter()
                    .zip(ms)
                    .map(|(mut x, m)| {
                        x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                        x
                    })
                    .collect(),
                None => inputs,
            };
            let len = dropped.len();
            let mut fwd: Vec<GruStep> = Vec::with_capacity(len);
            let mut prev = vec![0.0; h];
            for x in &dropped {
                let step = gru::forward(self.gru(lids.fwd), x.clone(), prev);
                prev = step.h.clone();
                fwd.push(step);
            }
            let mut bwd_rev: Vec<GruStep> = Vec::with_capacity(len);
            let mut prev = vec![0.0; h];
            for x in dropped.iter().rev() {
                let step = gru::forward(self.gru(lids.bwd), x.clone(), prev);
                prev = step.h.clone();
                bwd_rev.push(step);
            }
            bwd_rev.reverse();
            let out: Vec<Vec<f64>> = fwd
                .iter()
                .zip(&bwd_rev)
                .map(|(f, b)| f.h.iter().zip(&b.h).map(|(x, y)| x + y).collect())
                .collect();
            layers.push(EncoderLayerTrace {
                reduced,
                masks,
                fwd,
                bwd: bwd_rev,
                out,
            });
        }

        let contexts = layers.last().expect("at least one encoder layer").out.clone();
        let (kw, kb) = (self.p(self.layout.key.w), self.p(self.layout.key.b));
        let keys = contexts
            .iter()
            .map(|c| {
                let mut k = vec![0.0; h];
                affine_into(kw, kb, c, &mut k);
                k.iter_mut().for_each(|v| *v = v.tanh());
                k
            })
            .collect();
        Ok((
            EncodedSource {
                contexts,
                keys,
                source_len: source.len(),
            },
            EncoderTrace { ids, layers },
        ))
    }

    pub fn initial_state(&self) -> DecoderState {
        DecoderState {
            layers: vec![vec![0.0; self.config.hidden]; self.config.decoder_layers],
            prev: SOS,
        }
    }

    /// Attention over `enc` for a top decoder state: returns the weighted
    /// context `a` and the weights `α`.
    pub fn attend(&self, top: &[f64], enc: &EncodedSource) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        if enc.is_empty() {
            return Err(ModelError::Argument("attention over an empty encoding".into()));
        }
        if top.len() != self.config.hidden {
            return Err(ModelError::Argument(format!(
                "decoder state has {} values, expected {}",
                top.len(),
                self.config.hidden
            )));
        }
        let (_, alpha, _) = self.attention_weights(top, enc);
        Ok((self.weighted_context(&alpha, enc), alpha))
    }

    fn attention_weights(&self, top: &[f64], enc: &EncodedSource) -> (Vec<f64>, Vec<f64>, f64) {
        let h = self.config.hidden;
        let mut query = vec![0.0; h];
        affine_into(
            self.p(self.layout.query.w),
            self.p(self.layout.query.b),
            top,
            &mut query,
        );
        query.iter_mut().for_each(|v| *v = v.tanh());
        let mut alpha: Vec<f64> = enc.keys.iter().map(|k| dot(&query, k)).collect();
        let mut sum = 0.0;
        match self.config.attention {
            AttentionNorm::Softmax => softmax_in_place(&mut alpha),
            AttentionNorm::Linear => {
                sum = alpha.iter().sum();
                alpha.iter_mut().for_each(|v| *v /= sum);
            }
        }
        (query, alpha, sum)
    }

    fn weighted_context(&self, alpha: &[f64], enc: &EncodedSource) -> Vec<f64> {
        let mut a = vec![0.0; self.config.hidden];
        for (w, c) in alpha.iter().zip(&enc.contexts) {
            axpy(*w, c, &mut a);
        }
        a
    }

    /// One decoder step: returns the next-symbol distribution and the
    /// updated state.
    pub fn decode_step(
        &self,
        prev: SymbolId,
        state: &DecoderState,
        enc: &EncodedSource,
        phase: &mut Phase<'_>,
    ) -> Result<(Vec<f64>, DecoderState), ModelError> {
        if prev >= VOCAB_SIZE {
            return Err(ModelError::Argument(format!("symbol id {prev} out of range")));
        }
        if state.layers.len() != self.config.decoder_layers {
            return Err(ModelError::Argument(format!(
                "decoder state has {} layers, model has {}",
                state.layers.len(),
                self.config.decoder_layers
            )));
        }
        let trace = self.decoder_step_traced(prev, &state.layers, enc, phase);
        let next = DecoderState {
            layers: trace.layers.iter().map(|s| s.h.clone()).collect(),
            prev,
        };
        Ok((trace.probs, next))
    }

    fn decoder_step_traced(
        &self,
        prev: SymbolId,
        state: &[Vec<f64>],
        enc: &EncodedSource,
        phase: &mut Phase<'_>,
    ) -> DecoderStepTrace {
        let h = self.config.hidden;
        let rate = self.config.dropout;
        let mut input = self.params.get(self.layout.dec_embed).row(prev).to_vec();
        let mut layers = Vec::with_capacity(self.config.decoder_layers);
        let mut masks = Vec::with_capacity(self.config.decoder_layers);
        for (l, ids) in self.layout.decoder.iter().enumerate() {
            let mask = phase.mask(input.len(), rate);
            apply_mask(&mut input, &mask);
            let step = gru::forward(self.gru(*ids), input, state[l].clone());
            input = step.h.clone();
            layers.push(step);
            masks.push(mask);
        }
        let top = input;
        let (query, alpha, score_sum) = self.attention_weights(&top, enc);
        let attended = self.weighted_context(&alpha, enc);

        let mut combine_in = [attended.as_slice(), top.as_slice()].concat();
        let combine_mask = phase.mask(combine_in.len(), rate);
        apply_mask(&mut combine_in, &combine_mask);
        let mut hidden = vec![0.0; h];
        affine_into(
            self.p(self.layout.combine.w),
            self.p(self.layout.combine.b),
            &combine_in,
            &mut hidden,
        );
        hidden.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut logits = vec![0.0; self.config.vocab];
        affine_into(
            self.p(self.layout.project.w),
            self.p(self.layout.project.b),
            &hidden,
            &mut logits,
        );
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        DecoderStepTrace {
            input: prev,
            layers,
            masks,
            query,
            alpha,
            score_sum,
            combine_in,
            combine_mask,
            hidden,
            logits,
            probs,
        }
    }

    fn check_pair(&self, source: &[SymbolId], target: &[SymbolId]) -> Result<(), ModelError> {
        if target.len() < 2 {
            return Err(ModelError::Argument(
                "target must hold ⟨sos⟩ and at least one predicted symbol".into(),
            ));
        }
        if source.is_empty() {
            return Err(ModelError::Argument("empty source sequence".into()));
        }
        self.check_ids(source)?;
        self.check_ids(target)
    }

    fn forward(
        &self,
        source: &[SymbolId],
        target: &[SymbolId],
        phase: &mut Phase<'_>,
    ) -> Result<(LossPair, EncodedSource, EncoderTrace, Vec<DecoderStepTrace>), ModelError> {
        self.check_pair(source, target)?;
        let (enc, etrace) = self.encode_traced(source, phase)?;
        let mut state: Vec<Vec<f64>> = vec![vec![0.0; self.config.hidden]; self.config.decoder_layers];
        let mut steps = Vec::with_capacity(target.len() - 1);
        let mut loss = LossPair::default();
        for t in 1..target.len() {
            let trace = self.decoder_step_traced(target[t - 1], &state, &enc, phase);
            let (nll, excess) = step_nll(&trace.logits, target[t]);
            loss.nll += nll;
            loss.excess += excess;
            state = trace.layers.iter().map(|s| s.h.clone()).collect();
            steps.push(trace);
        }
        Ok((loss, enc, etrace, steps))
    }

    /// Teacher-forced `−Σ_t ln P(y_t | x, y_<t)` over every position after
    /// ⟨sos⟩. The decoder starts from zero states.
    pub fn sequence_loss(
        &self,
        source: &[SymbolId],
        target: &[SymbolId],
        phase: &mut Phase<'_>,
    ) -> Result<f64, ModelError> {
        let loss = self.forward(source, target, phase)?.0.nll;
        if !loss.is_finite() {
            return Err(ModelError::NonFinite(format!("loss {loss}")));
        }
        Ok(loss)
    }

    /// [`sequence_loss`](Self::sequence_loss) minus `L·ln V`, where `L` is
    /// the number of predicted positions. The constant shift leaves every
    /// gradient unchanged while keeping the value near zero for a
    /// near-uniform model, which keeps finite differences clear of
    /// rounding noise.
    pub fn excess_loss(
        &self,
        source: &[SymbolId],
        target: &[SymbolId],
        phase: &mut Phase<'_>,
    ) -> Result<f64, ModelError> {
        let loss = self.forward(source, target, phase)?.0.excess;
        if !loss.is_finite() {
            return Err(ModelError::NonFinite(format!("loss {loss}")));
        }
        Ok(loss)
    }

    /// Loss plus argmax accuracy, with dropout off.
    pub fn score_pair(&self, source: &[SymbolId], target: &[SymbolId]) -> Result<PairScore, ModelError> {
        let (loss, _, _, steps) = self.forward(source, target, &mut Phase::Eval)?;
        let loss = loss.nll;
        let correct = steps
            .iter()
            .zip(&target[1..])
            .filter(|(s, &y)| argmax(&s.probs) == y)
            .count();
        Ok(PairScore {
            loss,
            steps: steps.len(),
            correct,
        })
    }

    /// Exact gradients of [`sequence_loss`](Self::sequence_loss) for every
    /// parameter. The dropout masks drawn on the way forward are reused
    /// on the way back.
    pub fn backward(
        &self,
        source: &[SymbolId],
        target: &[SymbolId],
        phase: &mut Phase<'_>,
    ) -> Result<(f64, Gradients), ModelError> {
        let mut grads = self.params.zero_grads();
        let loss = self.accumulate_gradients(source, target, phase, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds this pair's gradients into `grads` and returns its loss.
    pub fn accumulate_gradients(
        &self,
        source: &[SymbolId],
        target: &[SymbolId],
        phase: &mut Phase<'_>,
        grads: &mut Gradients,
    ) -> Result<f64, ModelError> {
        let (loss, enc, etrace, steps) = self.forward(source, target, phase)?;
        let loss = loss.nll;
        if !loss.is_finite() {
            return Err(ModelError::NonFinite(format!("loss {loss}")));
        }
        let h = self.config.hidden;
        let k_len = enc.len();
        let lay = &self.layout;
        let g = grads.tensors_mut();

        let mut d_contexts = vec![vec![0.0; h]; k_len];
        let mut d_keys = vec![vec![0.0; h]; k_len];
        let mut d_next: Vec<Vec<f64>> = vec![vec![0.0; h]; self.config.decoder_layers];

        for (t, st) in steps.iter().enumerate().rev() {
            let gold = target[t + 1];
            let mut dlogits = st.probs.clone();
            if step_nll(&st.logits, gold).0 >= -PROB_FLOOR.ln() {
                dlogits.fill(0.0);
            } else {
                dlogits[gold] -= 1.0;
            }
            {
                let [gw, gb] = g.get_disjoint_mut([lay.project.w, lay.project.b]).unwrap();
                outer_acc(&dlogits, &st.hidden, gw.data_mut());
                axpy(1.0, &dlogits, gb.data_mut());
            }
            let mut d_hidden = vec![0.0; h];
            matvec_t_acc(self.p(lay.project.w), &dlogits, &mut d_hidden);
            for (dv, hv) in d_hidden.iter_mut().zip(&st.hidden) {
                if *hv <= 0.0 {
                    *dv = 0.0;
                }
            }
            {
                let [gw, gb] = g.get_disjoint_mut([lay.combine.w, lay.combine.b]).unwrap();
                outer_acc(&d_hidden, &st.combine_in, gw.data_mut());
                axpy(1.0, &d_hidden, gb.data_mut());
            }
            let mut d_combine = vec![0.0; 2 * h];
            matvec_t_acc(self.p(lay.combine.w), &d_hidden, &mut d_combine);
            apply_mask(&mut d_combine, &st.combine_mask);
            let (d_attended, d_top_out) = d_combine.split_at(h);

            // a = Σ α_k c_k
            let mut d_alpha = vec![0.0; k_len];
            for k in 0..k_len {
                axpy(st.alpha[k], d_attended, &mut d_contexts[k]);
                d_alpha[k] = dot(d_attended, &enc.contexts[k]);
            }
            let weighted: f64 = st.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            let d_scores: Vec<f64> = match self.config.attention {
                AttentionNorm::Softmax => st.alpha.iter().zip(&d_alpha).map(|(a, d)| a * (d - weighted)).collect(),
                AttentionNorm::Linear => d_alpha.iter().map(|d| (d - weighted) / st.score_sum).collect(),
            };
            // u_k = q · key_k
            let mut d_query = vec![0.0; h];
            for k in 0..k_len {
                axpy(d_scores[k], &enc.keys[k], &mut d_query);
                axpy(d_scores[k], &st.query, &mut d_keys[k]);
            }
            for (dq, q) in d_query.iter_mut().zip(&st.query) {
                *dq *= 1.0 - q * q;
            }
            let top = &st.layers.last().unwrap().h;
            {
                let [gw, gb] = g.get_disjoint_mut([lay.query.w, lay.query.b]).unwrap();
                outer_acc(&d_query, top, gw.data_mut());
                axpy(1.0, &d_query, gb.data_mut());
            }
            let mut d_top = d_top_out.to_vec();
            matvec_t_acc(self.p(lay.query.w), &d_query, &mut d_top);

            let mut from_above = d_top;
            for l in (0..self.config.decoder_layers).rev() {
                let mut dh = std::mem::take(&mut d_next[l]);
                axpy(1.0, &from_above, &mut dh);
                let ids = lay.decoder[l];
                let mut dx = vec![0.0; st.layers[l].x.len()];
                let mut dh_prev = vec![0.0; h];
                {
                    let [gw, gu, gb] = g.get_disjoint_mut([ids.w, ids.u, ids.b]).unwrap();
                    gru::backward(
                        self.gru(ids),
                        &st.layers[l],
                        &dh,
                        GruGrads {
                            w: gw.data_mut(),
                            u: gu.data_mut(),
                            b: gb.data_mut(),
                        },
                        &mut dx,
                        &mut dh_prev,
                    );
                }
                d_next[l] = dh_prev;
                apply_mask(&mut dx, &st.masks[l]);
                if l == 0 {
                    axpy(1.0, &dx, g[lay.dec_embed].row_mut(st.input));
                } else {
                    from_above = dx;
                }
            }
        }

        // key_k = tanh(W_key c_k + b_key)
        for k in 0..k_len {
            let dpre: Vec<f64> = d_keys[k]
                .iter()
                .zip(&enc.keys[k])
                .map(|(d, y)| d * (1.0 - y * y))
                .collect();
            {
                let [gw, gb] = g.get_disjoint_mut([lay.key.w, lay.key.b]).unwrap();
                outer_acc(&dpre, &enc.contexts[k], gw.data_mut());
                axpy(1.0, &dpre, gb.data_mut());
            }
            matvec_t_acc(self.p(lay.key.w), &dpre, &mut d_contexts[k]);
        }

        let mut d_out = d_contexts;
        for (j, lt) in etrace.layers.iter().enumerate().rev() {
            let lids = &lay.encoder[j];
            let len = lt.out.len();
            let din = lt.fwd[0].x.len();
            let mut dx = vec![vec![0.0; din]; len];
            let mut carry = vec![0.0; h];
            {
                let [gw, gu, gb] = g.get_disjoint_mut([lids.fwd.w, lids.fwd.u, lids.fwd.b]).unwrap();
                for t in (0..len).rev() {
                    let mut dh = carry;
                    axpy(1.0, &d_out[t], &mut dh);
                    let mut next = vec![0.0; h];
                    gru::backward(
                        self.gru(lids.fwd),
                        &lt.fwd[t],
                        &dh,
                        GruGrads {
                            w: gw.data_mut(),
                            u: gu.data_mut(),
                            b: gb.data_mut(),
                        },
                        &mut dx[t],
                        &mut next,
                    );
                    carry = next;
                }
            }
            let mut carry = vec![0.0; h];
            {
                let [gw, gu, gb] = g.get_disjoint_mut([lids.bwd.w, lids.bwd.u, lids.bwd.b]).unwrap();
                for t in 0..len {
                    let mut dh = carry;
                    axpy(1.0, &d_out[t], &mut dh);
                    let mut next = vec![0.0; h];
                    gru::backward(
                        self.gru(lids.bwd),
                        &lt.bwd[t],
                        &dh,
                        GruGrads {
                            w: gw.data_mut(),
                            u: gu.data_mut(),
                            b: gb.data_mut(),
                        },
                        &mut dx[t],
                        &mut next,
                    );
                    carry = next;
                }
            }
            if let Some(masks) = &lt.masks {
                for (d, m) in dx.iter_mut().zip(masks) {
                    d.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
            }
            match lids.reduce {
                None => {
                    let emb = &mut g[lay.enc_embed];
                    for (t, d) in dx.iter().enumerate() {
                        axpy(1.0, d, emb.row_mut(etrace.ids[t]));
                    }
                }
                Some(red) => {
                    let below = &etrace.layers[j - 1].out;
                    let mut d_below = vec![vec![0.0; h]; below.len()];
                    let [gw, gb] = g.get_disjoint_mut([red.w, red.b]).unwrap();
                    for t in 0..len {
                        let dpre: Vec<f64> = dx[t]
                            .iter()
                            .zip(&lt.reduced[t])
                            .map(|(d, c)| d * (1.0 - c * c))
                            .collect();
                        let cat = [below[2 * t].as_slice(), below[2 * t + 1].as_slice()].concat();
                        outer_acc(&dpre, &cat, gw.data_mut());
                        axpy(1.0, &dpre, gb.data_mut());
                        let mut dcat = vec![0.0; 2 * h];
                        matvec_t_acc(self.p(red.w), &dpre, &mut dcat);
                        axpy(1.0, &dcat[..h], &mut d_below[2 * t]);
                        axpy(1.0, &dcat[h..], &mut d_below[2 * t + 1]);
                    }
                    d_out = d_below;
                }
            }
        }
        Ok(loss)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng::seeded;
    use crate::numcore::{grad_check, GradCheckConfig};
    use crate::textdata::{source_ids, target_ids, CharVocab, EOS};

    fn small(h: usize, n: usize, m: usize, scale: f64, seed: u64) -> Seq2Seq {
        let cfg = ModelConfig {
            init_scale: scale,
            dropout: 0.0,
            ..ModelConfig::small(h, n, m)
        };
        Seq2Seq::new(cfg, &mut seeded(seed)).unwrap()
    }

    fn pair(src: &str, tgt: &str) -> (Vec<SymbolId>, Vec<SymbolId>) {
        (source_ids(&CharVocab, src), target_ids(&CharVocab, tgt))
    }

    fn check(model: &mut Seq2Seq, src: &[SymbolId], tgt: &[SymbolId], dropout_seed: Option<u64>) -> f64 {
        let phase_for = |seed: Option<u64>| seed.map(seeded);
        let mut rng = phase_for(dropout_seed);
        let mut phase = match rng.as_mut() {
            Some(r) => Phase::Train(r),
            None => Phase::Eval,
        };
        let (_, grads) = model.backward(src, tgt, &mut phase).unwrap();
        let cfg = model.config.clone();
        let mut store = model.params.clone();
        let report = grad_check(
            |p| {
                let m = Seq2Seq::from_params(cfg.clone(), p.clone()).unwrap();
                let mut rng = phase_for(dropout_seed);
                let mut phase = match rng.as_mut() {
                    Some(r) => Phase::Train(r),
                    None => Phase::Eval,
                };
                m.excess_loss(src, tgt, &mut phase).unwrap()
            },
            &grads,
            &mut store,
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(report.checked, model.params.num_values());
        if report.max_rel_error >= 1e-4 {
            eprintln!("{:?}\n{:?}", report.worst, report.per_tensor);
        }
        report.max_rel_error
    }

    #[test]
    fn manifest_keys_match_gradient_keys() {
        let m = small(4, 3, 2, 0.1, 1);
        let (s, t) = pair("abc", "abd");
        let (_, g) = m.backward(&s, &t, &mut Phase::Eval).unwrap();
        let gnames: Vec<&str> = g.iter().map(|(n, _)| n).collect();
        let pnames: Vec<&str> = m.params().names().collect();
        assert_eq!(gnames, pnames);
        for ((_, gt), (_, pt)) in g.iter().zip(m.params().iter()) {
            assert_eq!(gt.shape(), pt.shape());
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Seq2Seq::zeroed(ModelConfig::small(6, 2, 2)).unwrap();
        let (s, t) = pair("hello", "help");
        let loss = m.sequence_loss(&s, &t, &mut Phase::Eval).unwrap();
        let steps = (t.len() - 1) as f64;
        assert!((loss - steps * (98f64).ln()).abs() < 1e-9);
        let enc = m.encode(&s, &mut Phase::Eval).unwrap();
        let (p, _) = m.decode_step(SOS, &m.initial_state(), &enc, &mut Phase::Eval).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 98.0).abs() < 1e-15));
    }

    #[test]
    fn encoder_length_follows_pyramid() {
        for n in 1..=4 {
            let m = small(3, n, 1, 0.1, 2);
            for t in [1usize, 2, 7, 16, 17] {
                let ids = vec![EOS; t];
                let enc = m.encode(&ids, &mut Phase::Eval).unwrap();
                assert_eq!(enc.len(), m.config().encoded_len(t), "T={t} N={n}");
                assert_eq!(enc.source_len(), t);
            }
        }
        let m = small(3, 3, 1, 0.1, 2);
        assert_eq!(m.encode(&[1; 16], &mut Phase::Eval).unwrap().len(), 4);
        assert_eq!(m.encode(&[1; 17], &mut Phase::Eval).unwrap().len(), 5);
    }

    #[test]
    fn attention_is_a_distribution() {
        let m = small(5, 2, 2, 0.5, 3);
        let (s, _) = pair("some longer source text", "");
        let enc = m.encode(&s, &mut Phase::Eval).unwrap();
        let (a, alpha) = m.attend(&[0.3, -0.2, 0.9, 0.0, 0.1], &enc).unwrap();
        assert_eq!(alpha.len(), enc.len());
        assert!(alpha.iter().all(|&w| w >= 0.0));
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.len(), 5);

        let one = m.encode(&[4], &mut Phase::Eval).unwrap();
        let (a, alpha) = m.attend(&[1.0; 5], &one).unwrap();
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(a, one.contexts()[0]);
    }

    #[test]
    fn decode_step_is_pure_in_eval() {
        let m = small(6, 2, 3, 0.3, 4);
        let (s, _) = pair("xyz", "");
        let enc = m.encode(&s, &mut Phase::Eval).unwrap();
        let st = m.initial_state();
        let a = m.decode_step(SOS, &st, &enc, &mut Phase::Eval).unwrap();
        let b = m.decode_step(SOS, &st, &enc, &mut Phase::Eval).unwrap();
        assert_eq!(a, b);
        assert!((a.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.decode_step(98, &st, &enc, &mut Phase::Eval).is_err());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let m = small(4, 2, 1, 0.1, 5);
        assert!(matches!(m.encode(&[], &mut Phase::Eval), Err(ModelError::Argument(_))));
        assert!(m.sequence_loss(&[1], &[SOS], &mut Phase::Eval).is_err());
    }

    #[test]
    fn end_to_end_gradient_check() {
        // Weights at ±1 keep gradient components well above the ~1e-11
        // rounding floor of the central differences.
        for seed in [11, 12, 13] {
            let mut m = small(8, 2, 2, 1.0, seed);
            let (s, t) = pair("cat s", "cats!");
            let err = check(&mut m, &s, &t, None);
            assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn gradient_check_with_dropout_masks() {
        let cfg = ModelConfig {
            init_scale: 1.0,
            dropout: 0.3,
            ..ModelConfig::small(5, 3, 2)
        };
        let mut m = Seq2Seq::new(cfg, &mut seeded(12)).unwrap();
        let (s, t) = pair("abcde", "abXde");
        let err = check(&mut m, &s, &t, Some(99));
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn linear_attention_gradient_check() {
        let cfg = ModelConfig {
            init_scale: 1.0,
            dropout: 0.0,
            attention: AttentionNorm::Linear,
            ..ModelConfig::small(4, 2, 1)
        };
        let mut m = Seq2Seq::new(cfg, &mut seeded(13)).unwrap();
        // Keep the scores positive so the normalizer stays away from zero.
        let kb = m.params.id("attention.key.bias").unwrap();
        let qb = m.params.id("attention.query.bias").unwrap();
        m.params.get_mut(kb).fill(1.0);
        m.params.get_mut(qb).fill(1.0);
        let (s, t) = pair("abcdefg", "abxdefg");
        let err = check(&mut m, &s, &t, None);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradients_are_additive() {
        let m = small(4, 2, 2, 0.3, 14);
        let (s, t) = pair("dog", "dogs");
        let (l1, g1) = m.backward(&s, &t, &mut Phase::Eval).unwrap();
        let mut g2 = m.params().zero_grads();
        let l2a = m.accumulate_gradients(&s, &t, &mut Phase::Eval, &mut g2).unwrap();
        let l2b = m.accumulate_gradients(&s, &t, &mut Phase::Eval, &mut g2).unwrap();
        assert_eq!(l1, l2a);
        assert_eq!(l2a + l2b, 2.0 * l1);
        for ((_, a), (_, b)) in g1.iter().zip(g2.iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((2.0 * x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gru_cell_op_matches_shapes() {
        use super::super::{gru_cell, GruParams};
        let p = GruParams {
            w: Tensor::zeros(&[6, 3]),
            u: Tensor::zeros(&[6, 2]),
            b: Tensor::zeros(&[6]),
        };
        let h = gru_cell(&Tensor::zeros(&[2]), &Tensor::vector(&[1.0, 2.0, 3.0]), &p).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert!(matches!(
            gru_cell(&Tensor::zeros(&[2]), &Tensor::zeros(&[4]), &p),
            Err(ModelError::Dimension(_))
        ));
    }
}
