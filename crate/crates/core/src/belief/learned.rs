//! Linear-softmax auto-regressive belief model.
//!
//! Slot `j` of the observer's hand is predicted by `softmax(W_j x_j)` where
//! `x_j` is the belief context with cards `0..j` decoded. Each position has
//! its own weight matrix, stored feature-major so sparse contexts can be
//! accumulated column by column.
//!
//! # File format
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "HLBSBLF1"
//! encoder_version  u64
//! num_colors       u8
//! num_ranks        u8
//! hand_size        u8
//! max_hint_tokens  u8
//! max_lives        u8
//! rank_counts      u8 x num_ranks
//! vocab_size       u32
//! feature_len      u32
//! positions        u32
//! steps            u64
//! train_loss       f64
//! heldout_loss     f64
//! seed             u64
//! params           f64 x positions*feature_len*vocab_size
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;

use crate::engine::{Card, CardCounts, Hand, Variant};
use crate::error::{Error, Result};
use crate::observe::{encoder_version, log_count, BeliefContext, Layout, Observation};
use crate::rng::Rng;

const MAGIC: &[u8; 8] = b"HLBSBLF1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub steps: u64,
    pub train_loss: f64,
    pub heldout_loss: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedBeliefModel {
    variant: Variant,
    encoder_version: u64,
    feature_len: usize,
    vocab: usize,
    positions: usize,
    weights: Vec<f64>,
    pub meta: TrainingMeta,
}

#[derive(Clone, Copy)]
struct Decoded {
    cards: usize,
    log_count: usize,
    zero: usize,
}

impl LearnedBeliefModel {
    /// All-zero parameters: every conditional is uniform.
    pub fn zeros(variant: Variant) -> LearnedBeliefModel {
        let layout = Layout::belief(variant);
        let (f, v, p) = (layout.len(), variant.vocab_size(), variant.hand_size());
        LearnedBeliefModel {
            variant,
            encoder_version: encoder_version(&variant),
            feature_len: f,
            vocab: v,
            positions: p,
            weights: vec![0.0; p * f * v],
            meta: TrainingMeta::default(),
        }
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn encoder_version(&self) -> u64 {
        self.encoder_version
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn params(&self) -> &[f64] {
        &self.weights
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    fn column(&self, pos: usize, feature: usize) -> &[f64] {
        let o = (pos * self.feature_len + feature) * self.vocab;
        &self.weights[o..o + self.vocab]
    }

    fn decoded(&self) -> Decoded {
        let layout = Layout::belief(self.variant);
        Decoded {
            cards: layout.block("decoded_cards").offset,
            log_count: layout.block("decoded_log_count").offset,
            zero: layout.block("decoded_zero").offset,
        }
    }

    fn check(&self, ctx: &BeliefContext) -> Result<()> {
        if ctx.encoder_version != self.encoder_version {
            return Err(Error::EncoderMismatch { expected: self.encoder_version, found: ctx.encoder_version });
        }
        if ctx.features.len() != self.feature_len || ctx.position >= self.positions {
            return Err(Error::parse(format!(
                "context of length {} at position {} does not fit a model with {} features and {} positions",
                ctx.features.len(),
                ctx.position,
                self.feature_len,
                self.positions
            )));
        }
        Ok(())
    }

    /// Base features of the observer's view, excluding the decoded block, as
    /// sparse `(index, value)` pairs.
    pub fn sparse_base(&self, obs: &Observation) -> Vec<(u32, f64)> {
        let layout = Layout::belief(self.variant);
        let mut dense = vec![0.0; layout.len()];
        layout.fill_belief_base(obs, &mut dense);
        dense
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i as u32, x))
            .collect()
    }

    fn add_column(&self, pos: usize, feature: usize, x: f64, logits: &mut [f64]) {
        for (l, w) in logits.iter_mut().zip(self.column(pos, feature)) {
            *l += x * w;
        }
    }

    /// Adds the decoded-block contribution for `prefix` at position `pos`.
    fn add_decoded(&self, d: Decoded, pos: usize, unseen: &CardCounts, prefix: &[Card], logits: &mut [f64]) {
        self.for_each_decoded(d, unseen, prefix, |i, x| self.add_column(pos, i, x, logits));
    }

    fn for_each_decoded(&self, d: Decoded, unseen: &CardCounts, prefix: &[Card], mut f: impl FnMut(usize, f64)) {
        let v = &self.variant;
        for (k, &c) in prefix.iter().enumerate() {
            f(d.cards + k * self.vocab + v.vocab_index(c), 1.0);
        }
        let mut rest = *unseen;
        for &c in prefix {
            rest.remove(c);
        }
        for card in v.cards() {
            let i = v.vocab_index(card);
            let n = rest.get(card);
            if n == 0 {
                f(d.zero + i, 1.0);
            } else {
                let lc = log_count(n);
                if lc != 0.0 {
                    f(d.log_count + i, lc);
                }
            }
        }
    }

    /// Mean over slots of `-ln p(hand_j | context, hand_0..j)`. When `grad` is
    /// given, adds `scale` times the gradient of that value.
    pub fn chain_loss(
        &self,
        base: &[(u32, f64)],
        unseen: &CardCounts,
        hand: &[Card],
        mut grad: Option<(&mut [f64], f64)>,
    ) -> f64 {
        let d = self.decoded();
        let n = hand.len().max(1) as f64;
        let mut logits = vec![0.0; self.vocab];
        let mut total = 0.0;
        for (pos, &target) in hand.iter().enumerate() {
            logits.iter_mut().for_each(|l| *l = 0.0);
            for &(i, x) in base {
                self.add_column(pos, i as usize, x, &mut logits);
            }
            self.add_decoded(d, pos, unseen, &hand[..pos], &mut logits);
            let p = softmax_in_place(&mut logits);
            let t = self.variant.vocab_index(target);
            total -= p[t].ln();
            if let Some((g, scale)) = grad.as_mut() {
                // d(-ln p_t)/dz = p - e_t
                let mut dz = p.to_vec();
                dz[t] -= 1.0;
                let s = *scale / n;
                let mut acc = |i: usize, x: f64| {
                    let o = (pos * self.feature_len + i) * self.vocab;
                    for (gv, dv) in g[o..o + self.vocab].iter_mut().zip(&dz) {
                        *gv += s * x * dv;
                    }
                };
                for &(i, x) in base {
                    acc(i as usize, x);
                }
                self.for_each_decoded(d, unseen, &hand[..pos], acc);
            }
        }
        total / n
    }

    /// Per-card cross entropy of the observer's true hand.
    pub fn cross_entropy(&self, obs: &Observation, hand: &[Card]) -> f64 {
        self.chain_loss(&self.sparse_base(obs), &obs.unseen_counts(), hand, None)
    }

    /// Precomputes everything about `obs` that does not depend on the decoded prefix.
    pub fn sampler(&self, obs: &Observation) -> BeliefSampler<'_> {
        let base = self.sparse_base(obs);
        let hand_len = obs.own_knowledge().len();
        let mut base_logits = vec![0.0; hand_len * self.vocab];
        for pos in 0..hand_len {
            let out = &mut base_logits[pos * self.vocab..(pos + 1) * self.vocab];
            for &(i, x) in &base {
                self.add_column(pos, i as usize, x, out);
            }
        }
        BeliefSampler {
            model: self,
            decoded: self.decoded(),
            base_logits,
            unseen: obs.unseen_counts(),
            masks: obs.own_knowledge().iter().map(|k| k.mask).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let v = &self.variant;
        let mut b = Vec::with_capacity(64 + 8 * self.weights.len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&self.encoder_version.to_le_bytes());
        b.extend_from_slice(&[
            v.num_colors() as u8,
            v.num_ranks() as u8,
            v.hand_size() as u8,
            v.max_hint_tokens(),
            v.max_lives(),
        ]);
        b.extend_from_slice(v.rank_counts());
        for x in [self.vocab, self.feature_len, self.positions] {
            b.extend_from_slice(&(x as u32).to_le_bytes());
        }
        b.extend_from_slice(&self.meta.steps.to_le_bytes());
        b.extend_from_slice(&self.meta.train_loss.to_le_bytes());
        b.extend_from_slice(&self.meta.heldout_loss.to_le_bytes());
        b.extend_from_slice(&self.meta.seed.to_le_bytes());
        for w in &self.weights {
            b.extend_from_slice(&w.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LearnedBeliefModel> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::parse("not a belief model file"));
        }
        let version = read_u64(&mut r)?;
        let mut head = [0u8; 5];
        r.read_exact(&mut head)?;
        let mut counts = vec![0u8; head[1] as usize];
        r.read_exact(&mut counts)?;
        let variant = Variant::new(head[0], head[1], &counts, head[2], head[3], head[4], 2)?;
        let vocab = read_u32(&mut r)? as usize;
        let feature_len = read_u32(&mut r)? as usize;
        let positions = read_u32(&mut r)? as usize;
        let meta = TrainingMeta {
            steps: read_u64(&mut r)?,
            train_loss: read_f64(&mut r)?,
            heldout_loss: read_f64(&mut r)?,
            seed: read_u64(&mut r)?,
        };
        let expected = encoder_version(&variant);
        if version != expected {
            return Err(Error::EncoderMismatch { expected, found: version });
        }
        let n = positions * feature_len * vocab;
        if r.len() != 8 * n {
            return Err(Error::parse(format!("expected {n} parameters, found {} bytes", r.len())));
        }
        let weights = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let model = LearnedBeliefModel { variant, encoder_version: version, feature_len, vocab, positions, weights, meta };
        let fresh = LearnedBeliefModel::zeros(variant);
        if (fresh.feature_len, fresh.vocab, fresh.positions) != (feature_len, vocab, positions) {
            return Err(Error::parse("model shape does not match its variant"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LearnedBeliefModel> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Numerically stable softmax, written over `z`.
pub(crate) fn softmax_in_place(z: &mut [f64]) -> &[f64] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in z.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in z.iter_mut() {
        *x /= total;
    }
    z
}

/// Distribution over the card vocabulary for one context.
pub fn belief_forward(model: &LearnedBeliefModel, ctx: &BeliefContext) -> Result<Vec<f64>> {
    model.check(ctx)?;
    let mut logits = vec![0.0; model.vocab];
    for (i, &x) in ctx.features.0.iter().enumerate() {
        if x != 0.0 {
            model.add_column(ctx.position, i, x, &mut logits);
        }
    }
    softmax_in_place(&mut logits);
    Ok(logits)
}

/// Fast repeated sampling of hands for one observation.
pub struct BeliefSampler<'a> {
    model: &'a LearnedBeliefModel,
    decoded: Decoded,
    base_logits: Vec<f64>,
    unseen: CardCounts,
    masks: Vec<u64>,
}

impl BeliefSampler<'_> {
    pub fn hand_len(&self) -> usize {
        self.masks.len()
    }

    /// Conditional distribution of slot `prefix.len()`.
    pub fn distribution(&self, prefix: &[Card]) -> Vec<f64> {
        let v = self.model.vocab;
        let pos = prefix.len();
        let mut logits = self.base_logits[pos * v..(pos + 1) * v].to_vec();
        self.model.add_decoded(self.decoded, pos, &self.unseen, prefix, &mut logits);
        softmax_in_place(&mut logits);
        logits
    }

    /// Draws one hand from the model; `None` if it breaks a hint mask or the
    /// card count (checked as soon as each card is drawn).
    pub fn draw(&self, rng: &mut Rng) -> Option<Hand> {
        let variant = &self.model.variant;
        let mut hand = Hand::new();
        let mut rest = self.unseen;
        for pos in 0..self.hand_len() {
            let p = self.distribution(&hand);
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            let mut idx = p.len() - 1;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            let card = variant.vocab_card(idx);
            if self.masks[pos] & card.bit() == 0 || !rest.remove(card) {
                return None;
            }
            hand.push(card);
        }
        Some(hand)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleConfig {
    /// Total draws allowed per requested hand before giving up.
    pub max_attempts_per_hand: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { max_attempts_per_hand: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub hands: Vec<Hand>,
    pub attempts: usize,
    pub fallback: bool,
}

/// Rejection-samples `n` consistent hands, signalling fallback once
/// `n * max_attempts_per_hand` draws have been spent.
pub fn sample_hands(
    model: &LearnedBeliefModel,
    obs: &Observation,
    n: usize,
    config: SampleConfig,
    rng: &mut Rng,
) -> SampleOutcome {
    let sampler = model.sampler(obs);
    let limit = n.max(1) * config.max_attempts_per_hand;
    let mut hands = Vec::with_capacity(n);
    let mut attempts = 0;
    while hands.len() < n {
        if attempts == limit {
            return SampleOutcome { hands, attempts, fallback: true };
        }
        attempts += 1;
        if let Some(h) = sampler.draw(rng) {
            hands.push(h);
        }
    }
    SampleOutcome { hands, attempts, fallback: false }
}
