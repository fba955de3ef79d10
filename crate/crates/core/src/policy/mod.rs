//! Blueprint policies.
//!
//! A blueprint maps a player's view (public state plus private observation)
//! and an opaque memory to an action. The rule blueprints here are Markov, so
//! their memory is always empty.

use crate::engine::{Action, Card, GameState};
use crate::error::{Error, Result};
use crate::observe::{Observation, PrivateObs, PublicState};

/// Opaque recurrent state carried between a policy's decisions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PolicyMemory(pub Vec<u64>);

impl PolicyMemory {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub trait Blueprint: Send + Sync {
    fn name(&self) -> &str;

    fn is_markov(&self) -> bool;

    /// Chooses an action for the player described by `private`. Must be
    /// deterministic and return a legal action on non-terminal states.
    fn act_parts(&self, public: &PublicState, private: &PrivateObs, memory: &PolicyMemory) -> (Action, PolicyMemory);

    fn act(&self, obs: &Observation, memory: &PolicyMemory) -> (Action, PolicyMemory) {
        self.act_parts(&obs.public, &obs.private, memory)
    }

    /// The action `actor` would take regardless of the cards in its
    /// partner's hand, when that can be decided from public information alone.
    fn hand_free_action(&self, _public: &PublicState, _actor: usize) -> Option<Action> {
        None
    }

    /// Convenience for simulation: act as the current player of `state`.
    fn act_in(&self, state: &GameState) -> Action {
        let obs = Observation::new(state, state.current_player());
        self.act(&obs, &PolicyMemory::default()).0
    }
}

/// True iff `blueprint` would take `observed` from this view.
pub fn policy_consistent(
    blueprint: &dyn Blueprint,
    public: &PublicState,
    private: &PrivateObs,
    memory: &PolicyMemory,
    observed: Action,
) -> bool {
    blueprint.act_parts(public, private, memory).0 == observed
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rules {
    Full,
    Weak,
}

/// Deterministic priority-cascade blueprint.
///
/// `rule-v1`:
/// 1. play the highest own slot whose mask proves it playable;
/// 2. with a hint token, hint the partner's newest playable card that the
///    partner cannot already prove playable, using the attribute that leaves
///    fewer plausible identities (rank on ties);
/// 3. discard the lowest own slot whose mask proves it already played;
/// 4. discard the lowest untouched slot, else slot 0;
/// 5. give the rank hint touching the most partner cards.
///
/// Discards are skipped while hint tokens are full. `rule-weak-v1` keeps only
/// rules 1, 4 and 5.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RuleBlueprint {
    rules: Rules,
}

impl RuleBlueprint {
    pub const V1: RuleBlueprint = RuleBlueprint { rules: Rules::Full };
    pub const WEAK_V1: RuleBlueprint = RuleBlueprint { rules: Rules::Weak };

    pub fn by_name(name: &str) -> Result<RuleBlueprint> {
        match name {
            "rule-v1" => Ok(Self::V1),
            "rule-weak-v1" => Ok(Self::WEAK_V1),
            other => Err(Error::parse(format!(
                "unknown blueprint {other:?} (expected rule-v1 or rule-weak-v1)"
            ))),
        }
    }

    fn public_rules(&self, public: &PublicState, me: usize) -> Option<Action> {
        let playable = public.playable_mask();
        let own = &public.knowledge[me];
        // Rule 1.
        if let Some(s) = (0..own.len()).rev().find(|&s| own[s].mask & !playable == 0) {
            return Some(Action::Play(s as u8));
        }
        if public.hint_tokens > 0 && self.rules == Rules::Full {
            return None;
        }
        self.discard_rules(public, me)
    }

    fn discard_rules(&self, public: &PublicState, me: usize) -> Option<Action> {
        if !public.discard_legal() {
            return None;
        }
        let own = &public.knowledge[me];
        // Rule 3.
        if self.rules == Rules::Full {
            let played = public.played_mask();
            if let Some(s) = own.iter().position(|k| k.mask & !played == 0) {
                return Some(Action::Discard(s as u8));
            }
        }
        // Rule 4.
        let s = own.iter().position(|k| !k.touched).unwrap_or(0);
        Some(Action::Discard(s as u8))
    }

    fn hint_rule(public: &PublicState, me: usize, partner_hand: &[Card]) -> Option<Action> {
        let v = &public.variant;
        let partner = 1 - me;
        let target = partner as u8;
        let playable = public.playable_mask();
        let know = &public.knowledge[partner];
        for (s, &card) in partner_hand.iter().enumerate().rev() {
            let mask = know[s].mask;
            if card.bit() & playable == 0 || mask & !playable == 0 {
                continue;
            }
            let cm = v.color_mask(card.color());
            let rm = v.rank_mask(card.rank());
            let color_known = mask & !cm == 0;
            let rank_known = mask & !rm == 0;
            let by_color = (mask & cm).count_ones();
            let by_rank = (mask & rm).count_ones();
            let use_color = !color_known && (rank_known || by_color < by_rank);
            return Some(if use_color {
                Action::HintColor { target, color: card.color() }
            } else {
                Action::HintRank { target, rank: card.rank() }
            });
        }
        None
    }

    fn widest_rank_hint(public: &PublicState, me: usize, partner_hand: &[Card]) -> Action {
        let mut counts = [0u8; crate::engine::MAX_RANKS];
        for c in partner_hand {
            counts[c.rank() as usize] += 1;
        }
        let best = (0..public.variant.num_ranks())
            .max_by_key(|&r| (counts[r], std::cmp::Reverse(r)))
            .unwrap_or(0);
        Action::HintRank { target: (1 - me) as u8, rank: best as u8 }
    }
}

impl Blueprint for RuleBlueprint {
    fn name(&self) -> &str {
        match self.rules {
            Rules::Full => "rule-v1",
            Rules::Weak => "rule-weak-v1",
        }
    }

    fn is_markov(&self) -> bool {
        true
    }

    fn act_parts(&self, public: &PublicState, private: &PrivateObs, _memory: &PolicyMemory) -> (Action, PolicyMemory) {
        let me = private.observer as usize;
        let partner_hand = &private.partner_hand;
        if let Some(a) = self.public_rules(public, me) {
            return (a, PolicyMemory::default());
        }
        if self.rules == Rules::Full && public.hint_tokens > 0 {
            if let Some(a) = Self::hint_rule(public, me, partner_hand) {
                return (a, PolicyMemory::default());
            }
            if let Some(a) = self.discard_rules(public, me) {
                return (a, PolicyMemory::default());
            }
        }
        (Self::widest_rank_hint(public, me, partner_hand), PolicyMemory::default())
    }

    fn hand_free_action(&self, public: &PublicState, actor: usize) -> Option<Action> {
        self.public_rules(public, actor)
    }
}
