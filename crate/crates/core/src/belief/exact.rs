use rand::Rng as _;

use super::{counting_weight, pack, remove_slot, slot_of, unpack, HandDistribution};
use crate::engine::{Action, Card, CardCounts, Hand, PublicEvent, Variant, CARD_SPACE};
use crate::error::{Error, Result};
use crate::observe::{Observation, PrivateObs, PublicState};
use crate::policy::{Blueprint, PolicyMemory};
use crate::rng::Rng;

/// Enough for every opening hand of the 5-card variant (about 7.0M ordered
/// hands) but not the 6- or 7-card variants.
pub const DEFAULT_CANDIDATE_BOUND: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrackerConfig {
    pub bound: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { bound: DEFAULT_CANDIDATE_BOUND }
    }
}

/// Every assignment of identities to the observer's hand that is consistent
/// with hints, card counting and the partner's blueprint.
///
/// Candidates are packed hands (one byte per slot). A candidate's weight is
/// its likelihood times the number of ordered ways to draw it from the
/// observer's unseen pool, which makes the normalized weights the posterior
/// under a uniformly shuffled deck.
#[derive(Clone, Debug)]
pub struct ExactBeliefTracker {
    variant: Variant,
    observer: usize,
    hand_len: usize,
    candidates: Vec<u64>,
    /// `None` means every likelihood is one (deterministic blueprints).
    likelihood: Option<Vec<f64>>,
    /// Partner memory per candidate, only for non-Markov blueprints.
    memories: Option<Vec<PolicyMemory>>,
    pool: CardCounts,
    bound: usize,
}

impl ExactBeliefTracker {
    pub fn new(obs: &Observation, blueprint: &dyn Blueprint, config: TrackerConfig) -> Result<Self> {
        let variant = obs.public.variant;
        let pool = obs.unseen_counts();
        let masks: Vec<u64> = obs.own_knowledge().iter().map(|k| k.mask).collect();
        let mut candidates = Vec::new();
        let mut used = [0u8; CARD_SPACE];
        enumerate(&variant, &pool, &masks, 0, 0, &mut used, &mut candidates, config.bound)?;
        let n = candidates.len();
        Ok(ExactBeliefTracker {
            variant,
            observer: obs.observer(),
            hand_len: masks.len(),
            candidates,
            likelihood: None,
            memories: (!blueprint.is_markov()).then(|| vec![PolicyMemory::default(); n]),
            pool,
            bound: config.bound,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn observer(&self) -> usize {
        self.observer
    }

    pub fn hand_len(&self) -> usize {
        self.hand_len
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn candidate(&self, i: usize) -> Hand {
        unpack(self.candidates[i], self.hand_len)
    }

    pub fn contains(&self, hand: &[Card]) -> bool {
        hand.len() == self.hand_len && self.candidates.contains(&pack(hand))
    }

    fn raw_weight(&self, i: usize) -> f64 {
        let hand = self.candidate(i);
        let w = counting_weight(&self.pool, &hand);
        match &self.likelihood {
            Some(l) => w * l[i],
            None => w,
        }
    }

    /// Normalized candidate weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = (0..self.len()).map(|i| self.raw_weight(i)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    pub fn hand_probability(&self, hand: &[Card]) -> f64 {
        if hand.len() != self.hand_len {
            return 0.0;
        }
        let key = pack(hand);
        let mut total = 0.0;
        let mut hit = 0.0;
        for i in 0..self.len() {
            let w = self.raw_weight(i);
            total += w;
            if self.candidates[i] == key {
                hit += w;
            }
        }
        hit / total
    }

    /// Per-card cross entropy of `hand` under the joint posterior.
    pub fn cross_entropy(&self, hand: &[Card]) -> f64 {
        -self.hand_probability(hand).ln() / hand.len().max(1) as f64
    }

    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let vs = self.variant.vocab_size();
        let mut m = vec![vec![0.0; vs]; self.hand_len];
        let mut total = 0.0;
        for i in 0..self.len() {
            let w = self.raw_weight(i);
            total += w;
            for (s, row) in m.iter_mut().enumerate() {
                row[self.variant.vocab_index(slot_of(self.candidates[i], s))] += w;
            }
        }
        m.iter_mut().flatten().for_each(|x| *x /= total);
        m
    }

    pub fn distribution(&self) -> HandDistribution {
        HandDistribution::Hands {
            hands: (0..self.len()).map(|i| self.candidate(i)).collect(),
            weights: self.weights(),
        }
    }

    /// Cumulative weights for repeated i.i.d. sampling.
    pub fn sampler(&self) -> ExactSampler<'_> {
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.raw_weight(i);
            cumulative.push(acc);
        }
        ExactSampler { tracker: self, cumulative }
    }

    /// Folds in one public event. `pre` is the public state the actor saw,
    /// `post` the observer's view after the event.
    pub fn update(
        &mut self,
        blueprint: &dyn Blueprint,
        pre: &PublicState,
        event: &PublicEvent,
        post: &Observation,
    ) -> Result<()> {
        let what = || format!("turn {} {}", event.turn, event.action);
        if event.actor as usize == self.observer {
            if let Action::Play(slot) | Action::Discard(slot) = event.action {
                let card = event.revealed.ok_or_else(|| Error::parse("play/discard without revealed card"))?;
                let slot = slot as usize;
                self.retain(|packed, _| slot_of(packed, slot) == card);
                for c in self.candidates.iter_mut() {
                    *c = remove_slot(*c, slot);
                }
                self.hand_len -= 1;
                self.pool = post.unseen_counts();
                if event.drew {
                    let mask = post.own_knowledge().last().map_or(0, |k| k.mask);
                    self.extend(mask)?;
                }
            }
        } else {
            self.filter_partner_action(blueprint, pre, event);
            if let Action::HintColor { target, .. } | Action::HintRank { target, .. } = event.action {
                if target as usize == self.observer {
                    let attr = match event.action {
                        Action::HintColor { color, .. } => self.variant.color_mask(color),
                        Action::HintRank { rank, .. } => self.variant.rank_mask(rank),
                        _ => unreachable!(),
                    };
                    let len = self.hand_len;
                    let touched = event.touched;
                    self.retain(|packed, _| {
                        (0..len).all(|s| (slot_of(packed, s).bit() & attr != 0) == (touched & (1 << s) != 0))
                    });
                }
            }
            self.pool = post.unseen_counts();
            let pool = self.pool;
            let len = self.hand_len;
            self.retain(|packed, _| counting_weight(&pool, &unpack(packed, len)) > 0.0);
        }
        if self.is_empty() {
            return Err(Error::FilteredToEmpty { event: what() });
        }
        Ok(())
    }

    fn filter_partner_action(&mut self, blueprint: &dyn Blueprint, pre: &PublicState, event: &PublicEvent) {
        let partner = 1 - self.observer;
        if self.memories.is_none() {
            if let Some(a) = blueprint.hand_free_action(pre, partner) {
                if a != event.action {
                    self.candidates.clear();
                    self.likelihood = None;
                }
                return;
            }
        }
        let masks = pre.knowledge[partner].iter().map(|k| k.mask).collect();
        let mut view = PrivateObs {
            observer: partner as u8,
            partner_hand: Hand::new(),
            own_hint_masks: masks,
        };
        let len = self.hand_len;
        let observed = event.action;
        match self.memories.take() {
            None => {
                let empty = PolicyMemory::default();
                self.retain(|packed, _| {
                    view.partner_hand = unpack(packed, len);
                    blueprint.act_parts(pre, &view, &empty).0 == observed
                });
            }
            Some(memories) => {
                let mut next = Vec::with_capacity(memories.len());
                let mut keep = Vec::with_capacity(memories.len());
                for (i, m) in memories.iter().enumerate() {
                    view.partner_hand = unpack(self.candidates[i], len);
                    let (a, m2) = blueprint.act_parts(pre, &view, m);
                    keep.push(a == observed);
                    if a == observed {
                        next.push(m2);
                    }
                }
                self.retain(|_, i| keep[i]);
                self.memories = Some(next);
            }
        }
    }

    fn retain(&mut self, mut keep: impl FnMut(u64, usize) -> bool) {
        let mut j = 0;
        for i in 0..self.candidates.len() {
            if keep(self.candidates[i], i) {
                self.candidates[j] = self.candidates[i];
                if let Some(l) = self.likelihood.as_mut() {
                    l[j] = l[i];
                }
                if let Some(m) = self.memories.as_mut() {
                    if m.len() == self.candidates.len() {
                        m.swap(j, i);
                    }
                }
                j += 1;
            }
        }
        self.candidates.truncate(j);
        if let Some(l) = self.likelihood.as_mut() {
            l.truncate(j);
        }
        if let Some(m) = self.memories.as_mut() {
            m.truncate(j);
        }
    }

    /// Appends a newly drawn slot with every identity the pool still allows.
    fn extend(&mut self, mask: u64) -> Result<()> {
        let v = self.variant;
        let len = self.hand_len;
        let options: Vec<Card> = v.cards().filter(|c| mask & c.bit() != 0 && self.pool.get(*c) > 0).collect();
        let room = |packed: u64, c: Card| {
            let held = (0..len).filter(|&s| slot_of(packed, s) == c).count();
            (held as u8) < self.pool.get(c)
        };
        let total: usize = self.candidates.iter().map(|&p| options.iter().filter(|&&c| room(p, c)).count()).sum();
        if total > self.bound {
            return Err(Error::BeliefSpaceTooLarge { bound: self.bound });
        }
        let mut next = Vec::with_capacity(total);
        let mut lik = self.likelihood.as_ref().map(|_| Vec::with_capacity(total));
        let mut mem = self.memories.as_ref().map(|_| Vec::with_capacity(total));
        for (i, &p) in self.candidates.iter().enumerate() {
            for &c in &options {
                if room(p, c) {
                    next.push(p | (c.packed() as u64) << (8 * len));
                    if let (Some(out), Some(l)) = (lik.as_mut(), self.likelihood.as_ref()) {
                        out.push(l[i]);
                    }
                    if let (Some(out), Some(m)) = (mem.as_mut(), self.memories.as_ref()) {
                        out.push(m[i].clone());
                    }
                }
            }
        }
        self.candidates = next;
        self.likelihood = lik;
        self.memories = mem;
        self.hand_len += 1;
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    v: &Variant,
    pool: &CardCounts,
    masks: &[u64],
    slot: usize,
    prefix: u64,
    used: &mut [u8; CARD_SPACE],
    out: &mut Vec<u64>,
    bound: usize,
) -> Result<()> {
    if slot == masks.len() {
        if out.len() >= bound {
            return Err(Error::BeliefSpaceTooLarge { bound });
        }
        out.push(prefix);
        return Ok(());
    }
    for card in v.cards() {
        let p = card.packed();
        if masks[slot] & card.bit() == 0 || used[p] >= pool.get(card) {
            continue;
        }
        used[p] += 1;
        let r = enumerate(v, pool, masks, slot + 1, prefix | (p as u64) << (8 * slot), used, out, bound);
        used[p] -= 1;
        r?;
    }
    Ok(())
}

/// I.i.d. draws from a tracker's normalized weights.
pub struct ExactSampler<'a> {
    tracker: &'a ExactBeliefTracker,
    cumulative: Vec<f64>,
}

impl ExactSampler<'_> {
    pub fn sample(&self, rng: &mut Rng) -> Hand {
        let total = *self.cumulative.last().expect("non-empty tracker");
        let x = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1);
        self.tracker.candidate(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::grounded_marginals;
    use crate::engine::GameState;
    use crate::policy::RuleBlueprint;

    fn play_tracked(v: Variant, seed: u64, observer: usize, turns: usize) -> (GameState, ExactBeliefTracker) {
        let bp = RuleBlueprint::V1;
        let mut s = GameState::new_game(v, seed);
        let mut t = ExactBeliefTracker::new(&Observation::new(&s, observer), &bp, TrackerConfig::default()).unwrap();
        for _ in 0..turns {
            if s.is_terminal() {
                break;
            }
            let pre = PublicState::from_state(&s);
            s.step(bp.act_in(&s)).unwrap();
            t.update(&bp, &pre, s.last_event().unwrap(), &Observation::new(&s, observer)).unwrap();
            assert!(t.contains(s.hand(observer)), "truth dropped at turn {}", s.turn());
        }
        (s, t)
    }

    #[test]
    fn fresh_tracker_marginals_equal_grounded() {
        let v = Variant::mini();
        let s = GameState::new_game(v, 3);
        let o = Observation::new(&s, 0);
        let t = ExactBeliefTracker::new(&o, &RuleBlueprint::V1, TrackerConfig::default()).unwrap();
        let g = grounded_marginals(&v, &o.unseen_counts(), &o.private.own_hint_masks).unwrap().marginals(&v);
        for (a, b) in t.marginals().iter().flatten().zip(g.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn true_hand_survives_whole_games() {
        for seed in 0..20 {
            for observer in 0..2 {
                let (s, t) = play_tracked(Variant::mini(), seed, observer, 100);
                assert!(s.is_terminal());
                let w: f64 = t.weights().iter().sum();
                assert!((w - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn five_card_opening_fits_the_default_bound() {
        let (_, t) = play_tracked(Variant::standard(), 7, 0, 4);
        assert!(t.len() <= DEFAULT_CANDIDATE_BOUND);
    }

    #[test]
    fn bound_violation_is_reported() {
        let s = GameState::new_game(Variant::standard(), 1);
        let e = ExactBeliefTracker::new(&Observation::new(&s, 0), &RuleBlueprint::V1, TrackerConfig { bound: 1000 })
            .unwrap_err();
        assert!(e.is_belief_space_too_large());
        assert!(e.to_string().contains("belief-space too large"));
    }

    #[test]
    fn uninformative_partner_action_leaves_distribution_unchanged() {
        let v = Variant::mini();
        let bp = RuleBlueprint::V1;
        let mut checked = 0;
        for seed in 0..100 {
            let mut s = GameState::new_game(v, seed);
            let mut t = ExactBeliefTracker::new(&Observation::new(&s, 0), &bp, TrackerConfig::default()).unwrap();
            let pre = PublicState::from_state(&s);
            s.step(bp.act_in(&s)).unwrap();
            t.update(&bp, &pre, s.last_event().unwrap(), &Observation::new(&s, 0)).unwrap();
            let pre = PublicState::from_state(&s);
            if s.is_terminal() || bp.hand_free_action(&pre, 1).is_none() {
                continue;
            }
            s.step(bp.act_in(&s)).unwrap();
            let post = Observation::new(&s, 0);
            t.update(&bp, &pre, s.last_event().unwrap(), &post).unwrap();
            // Nothing learned beyond hints and counting.
            let fresh = ExactBeliefTracker::new(&post, &bp, TrackerConfig::default()).unwrap();
            assert_eq!(t.distribution(), fresh.distribution());
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn sampler_frequencies_track_weights() {
        let (_, t) = play_tracked(Variant::mini(), 4, 0, 3);
        let w = t.weights();
        let sampler = t.sampler();
        let mut rng = crate::rng::stream(1, &[]);
        let n = 200_000;
        let mut counts = vec![0usize; t.len()];
        for _ in 0..n {
            let h = sampler.sample(&mut rng);
            let i = (0..t.len()).find(|&i| t.candidate(i) == h).unwrap();
            counts[i] += 1;
        }
        for (c, p) in counts.iter().zip(&w) {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 5.0 * sd + 1e-9);
        }
    }
}
