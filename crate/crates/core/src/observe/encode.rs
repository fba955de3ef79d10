//! Fixed-layout feature encoders.
//!
//! Two layouts exist per variant: the public layout (used by the value
//! model) and the belief-context layout, which starts with the public layout
//! and appends observer-relative blocks plus a trailing "decoded" block that
//! carries the cards already decoded by the auto-regressive belief chain.
//! Only the decoded block depends on the decoded prefix.
//!
//! [`layout_document`] renders both layouts as text; its FNV-1a hash is the
//! encoder version that model files record.

use std::fmt::Write as _;

use super::{Observation, PrivateObs, PublicState};
use crate::engine::{Action, Card, Variant, NUM_PLAYERS};
use crate::error::{Error, Result};

/// Bumped whenever a block is added, removed or reinterpreted.
pub const ENCODER_VERSION: u32 = 1;

const DECK_BUCKETS: [u8; 5] = [0, 2, 5, 10, 20];
/// Value used in place of `ln 0`.
const LOG_ZERO: f64 = 0.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Input to one step of the auto-regressive belief chain.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefContext {
    /// Slot being predicted (equals the length of the decoded prefix).
    pub position: usize,
    pub encoder_version: u64,
    pub features: FeatureVector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    variant: Variant,
    blocks: Vec<Block>,
    len: usize,
}

impl Layout {
    fn builder(variant: Variant) -> Layout {
        Layout { variant, blocks: Vec::new(), len: 0 }
    }

    fn push(&mut self, name: &'static str, len: usize) {
        self.blocks.push(Block { name, offset: self.len, len });
        self.len += len;
    }

    pub fn public(variant: Variant) -> Layout {
        let v = variant;
        let (nc, nr, h, vs) = (v.num_colors(), v.num_ranks(), v.hand_size(), v.vocab_size());
        let mut l = Layout::builder(variant);
        l.push("fireworks", nc * (nr + 1));
        l.push("discards", vs);
        l.push("hint_tokens", v.max_hint_tokens() as usize + 1);
        l.push("life_tokens", v.max_lives() as usize + 1);
        l.push("deck_bucket", DECK_BUCKETS.len() + 1);
        l.push("deck_fraction", 1);
        l.push("knowledge_p0", h * vs);
        l.push("knowledge_p1", h * vs);
        l.push("touched_p0", h);
        l.push("touched_p1", h);
        l.push("last_event", 1 + 4 * NUM_PLAYERS);
        l.push("last_touched", h);
        l.push("countdown", NUM_PLAYERS + 2);
        l.push("current_player", NUM_PLAYERS);
        l.push("score", 1);
        l.push("potential", 1);
        l.push("terminal", 1);
        l.push("bias", 1);
        l
    }

    pub fn belief(variant: Variant) -> Layout {
        let (h, vs) = (variant.hand_size(), variant.vocab_size());
        let mut l = Layout::public(variant);
        l.push("own_knowledge", h * vs);
        l.push("own_touched", h);
        l.push("own_playable", h * vs);
        l.push("last_hint_playable", h * vs);
        l.push("last_hint_newest_playable", h * vs);
        l.push("partner_passed_playable", h * vs);
        l.push("unseen_log_count", vs);
        l.push("unseen_zero", vs);
        l.push("decoded_cards", h.saturating_sub(1) * vs);
        l.push("decoded_log_count", vs);
        l.push("decoded_zero", vs);
        l
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> &Block {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .unwrap_or_else(|| panic!("no feature block named {name}"))
    }

    /// First index of the decoded block (belief layouts only).
    pub fn decoded_start(&self) -> usize {
        self.block("decoded_cards").offset
    }

    fn slice<'a>(&self, out: &'a mut [f64], name: &str) -> &'a mut [f64] {
        let b = self.block(name);
        &mut out[b.offset..b.offset + b.len]
    }

    /// Writes the public blocks.
    pub fn fill_public(&self, public: &PublicState, out: &mut [f64]) {
        let v = &self.variant;
        let (nc, nr, h) = (v.num_colors(), v.num_ranks(), v.hand_size());
        {
            let f = self.slice(out, "fireworks");
            for c in 0..nc {
                f[c * (nr + 1) + public.fireworks[c] as usize] = 1.0;
            }
        }
        {
            let d = self.slice(out, "discards");
            for card in v.cards() {
                d[v.vocab_index(card)] = public.discards.get(card) as f64 / v.copies(card) as f64;
            }
        }
        self.slice(out, "hint_tokens")[public.hint_tokens as usize] = 1.0;
        self.slice(out, "life_tokens")[public.life_tokens as usize] = 1.0;
        let bucket = DECK_BUCKETS.iter().position(|&b| public.deck_size <= b).unwrap_or(DECK_BUCKETS.len());
        self.slice(out, "deck_bucket")[bucket] = 1.0;
        let initial = (v.deck_size() - NUM_PLAYERS * h).max(1);
        self.slice(out, "deck_fraction")[0] = public.deck_size as f64 / initial as f64;
        for (p, (kname, tname)) in [("knowledge_p0", "touched_p0"), ("knowledge_p1", "touched_p1")].into_iter().enumerate() {
            let k = self.slice(out, kname);
            for (s, slot) in public.knowledge[p].iter().enumerate() {
                write_mask(v, slot.mask, &mut k[s * v.vocab_size()..(s + 1) * v.vocab_size()]);
            }
            let t = self.slice(out, tname);
            for (s, slot) in public.knowledge[p].iter().enumerate() {
                t[s] = slot.touched as u8 as f64;
            }
        }
        match &public.last_event {
            None => self.slice(out, "last_event")[0] = 1.0,
            Some(e) => {
                self.slice(out, "last_event")[1 + e.actor as usize * 4 + e.action.kind().index()] = 1.0;
                let t = self.slice(out, "last_touched");
                for (s, x) in t.iter_mut().enumerate() {
                    *x = ((e.touched >> s) & 1) as f64;
                }
            }
        }
        let cd = match public.final_countdown {
            None => 0,
            Some(k) => 1 + k as usize,
        };
        self.slice(out, "countdown")[cd.min(NUM_PLAYERS + 1)] = 1.0;
        self.slice(out, "current_player")[public.current_player as usize] = 1.0;
        let max = v.max_score() as f64;
        self.slice(out, "score")[0] = public.score() as f64 / max;
        self.slice(out, "potential")[0] = potential_score(public) as f64 / max;
        self.slice(out, "terminal")[0] = public.terminal as u8 as f64;
        self.slice(out, "bias")[0] = 1.0;
    }

    /// Writes the public and observer-relative blocks, leaving the decoded block zero.
    pub fn fill_belief_base(&self, obs: &Observation, out: &mut [f64]) {
        self.fill_public(&obs.public, out);
        let v = &self.variant;
        let vs = v.vocab_size();
        let public = &obs.public;
        let me = obs.observer();
        let playable = public.playable_mask();
        let own = &public.knowledge[me];
        {
            let k = self.slice(out, "own_knowledge");
            for (s, slot) in own.iter().enumerate() {
                write_mask(v, slot.mask, &mut k[s * vs..(s + 1) * vs]);
            }
        }
        {
            let t = self.slice(out, "own_touched");
            for (s, slot) in own.iter().enumerate() {
                t[s] = slot.touched as u8 as f64;
            }
        }
        {
            let p = self.slice(out, "own_playable");
            for (s, slot) in own.iter().enumerate() {
                write_mask(v, slot.mask & playable, &mut p[s * vs..(s + 1) * vs]);
            }
        }
        if let Some(e) = &public.last_event {
            if e.actor as usize != me {
                match e.action {
                    Action::HintColor { .. } | Action::HintRank { .. } => {
                        let newest = (0..8).rev().find(|s| e.touched & (1 << s) != 0);
                        let lh = self.block("last_hint_playable").offset;
                        let ln = self.block("last_hint_newest_playable").offset;
                        for (s, slot) in own.iter().enumerate() {
                            if e.touched & (1 << s) != 0 {
                                write_mask(v, slot.mask & playable, &mut out[lh + s * vs..lh + (s + 1) * vs]);
                            }
                            if newest == Some(s) {
                                write_mask(v, slot.mask & playable, &mut out[ln + s * vs..ln + (s + 1) * vs]);
                            }
                        }
                    }
                    Action::Discard(_) if public.hint_tokens >= 2 => {
                        // The partner had a token and still did not hint a playable card.
                        let pp = self.block("partner_passed_playable").offset;
                        for (s, slot) in own.iter().enumerate() {
                            if slot.mask & !playable != 0 {
                                write_mask(v, slot.mask & playable, &mut out[pp + s * vs..pp + (s + 1) * vs]);
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        let unseen = obs.unseen_counts();
        let (lc, z) = (self.block("unseen_log_count").offset, self.block("unseen_zero").offset);
        for card in v.cards() {
            let i = v.vocab_index(card);
            let n = unseen.get(card);
            out[lc + i] = log_count(n);
            out[z + i] = (n == 0) as u8 as f64;
        }
    }

    /// Writes the decoded block for a prefix, given the observer's unseen pool.
    pub fn fill_decoded(&self, unseen: &crate::engine::CardCounts, prefix: &[Card], out: &mut [f64]) {
        let v = &self.variant;
        let vs = v.vocab_size();
        let dc = self.block("decoded_cards");
        out[dc.offset..dc.offset + dc.len].fill(0.0);
        for (k, &card) in prefix.iter().enumerate() {
            out[dc.offset + k * vs + v.vocab_index(card)] = 1.0;
        }
        let mut rest = *unseen;
        for &card in prefix {
            rest.remove(card);
        }
        let (lc, z) = (self.block("decoded_log_count").offset, self.block("decoded_zero").offset);
        for card in v.cards() {
            let i = v.vocab_index(card);
            let n = rest.get(card);
            out[lc + i] = log_count(n);
            out[z + i] = (n == 0) as u8 as f64;
        }
    }
}

#[inline]
pub(crate) fn log_count(n: u8) -> f64 {
    if n == 0 {
        LOG_ZERO
    } else {
        (n as f64).ln()
    }
}

fn write_mask(v: &Variant, mask: u64, out: &mut [f64]) {
    for card in v.cards() {
        if mask & card.bit() != 0 {
            out[v.vocab_index(card)] = 1.0;
        }
    }
}

/// Highest score still reachable given which cards have been discarded.
pub fn potential_score(public: &PublicState) -> u32 {
    if public.life_tokens == 0 {
        return 0;
    }
    let v = &public.variant;
    (0..v.num_colors())
        .map(|c| {
            let mut top = public.fireworks[c] as u32;
            for r in public.fireworks[c]..v.num_ranks() as u8 {
                let card = Card::new(c as u8, r);
                if public.discards.get(card) >= v.copies(card) {
                    break;
                }
                top = r as u32 + 1;
            }
            top
        })
        .sum()
}

pub fn encode_public(public: &PublicState) -> FeatureVector {
    let layout = Layout::public(public.variant);
    let mut out = vec![0.0; layout.len()];
    layout.fill_public(public, &mut out);
    FeatureVector(out)
}

/// Context for predicting slot `prefix.len()` of the observer's own hand.
pub fn encode_belief_context(public: &PublicState, private: &PrivateObs, prefix: &[Card]) -> Result<BeliefContext> {
    let v = public.variant;
    if prefix.len() >= public.knowledge[private.observer as usize].len() {
        return Err(Error::parse("decoded prefix covers the whole hand"));
    }
    let layout = Layout::belief(v);
    let obs = Observation { public: public.clone(), private: private.clone() };
    let mut out = vec![0.0; layout.len()];
    layout.fill_belief_base(&obs, &mut out);
    layout.fill_decoded(&obs.unseen_counts(), prefix, &mut out);
    Ok(BeliefContext {
        position: prefix.len(),
        encoder_version: encoder_version(&v),
        features: FeatureVector(out),
    })
}

/// Text description of both layouts for a variant.
pub fn layout_document(variant: &Variant) -> String {
    let mut s = String::new();
    writeln!(s, "# feature layout, encoder version {ENCODER_VERSION}").unwrap();
    writeln!(
        s,
        "# variant: colors={} ranks={} rank_counts={:?} hand_size={} max_hint_tokens={} max_lives={}",
        variant.num_colors(),
        variant.num_ranks(),
        variant.rank_counts(),
        variant.hand_size(),
        variant.max_hint_tokens(),
        variant.max_lives()
    )
    .unwrap();
    for (title, layout) in [("public", Layout::public(*variant)), ("belief", Layout::belief(*variant))] {
        writeln!(s, "[{title}] length={}", layout.len()).unwrap();
        for b in layout.blocks() {
            writeln!(s, "{:<28} offset={:<5} len={}", b.name, b.offset, b.len).unwrap();
        }
    }
    s
}

/// 64-bit FNV-1a hash of [`layout_document`].
pub fn encoder_version(variant: &Variant) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in layout_document(variant).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
