//! Beliefs over the observer's own hand.
//!
//! Three families: grounded (hint masks plus card counting), exact
//! counterfactual (grounded filtered by the partner's blueprint), and a
//! learned auto-regressive model.

mod exact;
mod learned;

pub use exact::{ExactBeliefTracker, ExactSampler, TrackerConfig, DEFAULT_CANDIDATE_BOUND};
pub use learned::{
    belief_forward, sample_hands, BeliefSampler, LearnedBeliefModel, SampleConfig, SampleOutcome, TrainingMeta,
};

use crate::engine::{Card, CardCounts, Hand, Variant, MAX_HAND};
use crate::error::{Error, Result};

/// Either per-slot marginals over the card vocabulary or a weighted set of
/// complete hands.
#[derive(Clone, Debug, PartialEq)]
pub enum HandDistribution {
    Marginals(Vec<Vec<f64>>),
    Hands { hands: Vec<Hand>, weights: Vec<f64> },
}

impl HandDistribution {
    /// Per-card cross entropy of the true hand, in nats. Marginal beliefs
    /// score each slot independently; hand sets score the joint probability.
    /// Returns `+inf` when the true hand has zero probability.
    pub fn cross_entropy(&self, variant: &Variant, true_hand: &[Card]) -> f64 {
        let n = true_hand.len().max(1) as f64;
        match self {
            HandDistribution::Marginals(m) => {
                -true_hand
                    .iter()
                    .zip(m)
                    .map(|(&c, p)| p[variant.vocab_index(c)].ln())
                    .sum::<f64>()
                    / n
            }
            HandDistribution::Hands { hands, weights } => {
                let p: f64 = hands
                    .iter()
                    .zip(weights)
                    .filter(|(h, _)| h.as_slice() == true_hand)
                    .map(|(_, &w)| w)
                    .sum();
                -p.ln() / n
            }
        }
    }

    /// Per-slot marginals (computed from the hand set if needed).
    pub fn marginals(&self, variant: &Variant) -> Vec<Vec<f64>> {
        match self {
            HandDistribution::Marginals(m) => m.clone(),
            HandDistribution::Hands { hands, weights } => {
                let len = hands.first().map_or(0, |h| h.len());
                let mut m = vec![vec![0.0; variant.vocab_size()]; len];
                for (h, &w) in hands.iter().zip(weights) {
                    for (s, &c) in h.iter().enumerate() {
                        m[s][variant.vocab_index(c)] += w;
                    }
                }
                m
            }
        }
    }
}

/// Per-slot `P(c) ∝ pool[c]` restricted to the slot's hint mask.
pub fn grounded_marginals(variant: &Variant, pool: &CardCounts, masks: &[u64]) -> Result<HandDistribution> {
    let mut out = Vec::with_capacity(masks.len());
    for (slot, &mask) in masks.iter().enumerate() {
        let mut p = vec![0.0; variant.vocab_size()];
        let mut total = 0.0;
        for card in variant.cards() {
            if mask & card.bit() != 0 {
                let w = pool.get(card) as f64;
                p[variant.vocab_index(card)] = w;
                total += w;
            }
        }
        if total == 0.0 {
            return Err(Error::InconsistentObservation { slot });
        }
        p.iter_mut().for_each(|x| *x /= total);
        out.push(p);
    }
    Ok(HandDistribution::Marginals(out))
}

/// Number of ordered ways to draw `hand` from `pool`: the product over card
/// types of falling factorials `pool[c] (pool[c]-1) ...`.
pub fn counting_weight(pool: &CardCounts, hand: &[Card]) -> f64 {
    let mut used = [0u8; crate::engine::CARD_SPACE];
    let mut w = 1.0;
    for &c in hand {
        let have = pool.get(c);
        let k = &mut used[c.packed()];
        if *k >= have {
            return 0.0;
        }
        w *= (have - *k) as f64;
        *k += 1;
    }
    w
}

/// Probability of `hand` under the grounded joint belief: uniform over deals
/// of the pool, restricted to hands that satisfy every slot mask.
pub fn grounded_hand_probability(variant: &Variant, pool: &CardCounts, masks: &[u64], hand: &[Card]) -> f64 {
    if hand.len() != masks.len() || hand.iter().zip(masks).any(|(c, &m)| m & c.bit() == 0) {
        return 0.0;
    }
    let w = counting_weight(pool, hand);
    if w == 0.0 {
        return 0.0;
    }
    w / grounded_partition(variant, pool, masks)
}

/// Sum of [`counting_weight`] over all mask-consistent hands, by dynamic
/// programming over subsets of filled slots.
pub fn grounded_partition(variant: &Variant, pool: &CardCounts, masks: &[u64]) -> f64 {
    let h = masks.len();
    debug_assert!(h <= MAX_HAND);
    let full = (1usize << h) - 1;
    let mut dp = vec![0.0f64; 1 << h];
    let mut next = vec![0.0f64; 1 << h];
    dp[0] = 1.0;
    for card in variant.cards() {
        let n = pool.get(card) as usize;
        if n == 0 {
            continue;
        }
        let allowed = (0..h).filter(|&s| masks[s] & card.bit() != 0).fold(0usize, |a, s| a | 1 << s);
        if allowed == 0 {
            continue;
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for filled in 0..=full {
            let base = dp[filled];
            if base == 0.0 {
                continue;
            }
            let free = allowed & !filled;
            // Enumerate subsets of `free`, including the empty one.
            let mut t = free;
            loop {
                let k = t.count_ones() as usize;
                if k <= n {
                    let fall: f64 = (0..k).map(|i| (n - i) as f64).product();
                    next[filled | t] += base * fall;
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & free;
            }
        }
        std::mem::swap(&mut dp, &mut next);
    }
    dp[full]
}

/// Per-card cross entropy of the true hand under the grounded joint belief.
pub fn grounded_cross_entropy(variant: &Variant, pool: &CardCounts, masks: &[u64], true_hand: &[Card]) -> f64 {
    -grounded_hand_probability(variant, pool, masks, true_hand).ln() / true_hand.len().max(1) as f64
}

pub(crate) fn pack(hand: &[Card]) -> u64 {
    hand.iter().enumerate().fold(0u64, |acc, (i, c)| acc | (c.packed() as u64) << (8 * i))
}

#[inline]
pub(crate) fn slot_of(packed: u64, i: usize) -> Card {
    Card::from_packed(((packed >> (8 * i)) & 0xff) as usize)
}

pub(crate) fn unpack(packed: u64, len: usize) -> Hand {
    (0..len).map(|i| slot_of(packed, i)).collect()
}

/// Drops slot `i`, shifting later slots down.
pub(crate) fn remove_slot(packed: u64, i: usize) -> u64 {
    let low = packed & ((1u64 << (8 * i)) - 1);
    let high = if i >= 7 { 0 } else { (packed >> (8 * (i + 1))) << (8 * i) };
    low | high
}
