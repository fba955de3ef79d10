//! Public/private factorization of a game state.
//!
//! [`PublicState`] holds everything both players know; [`PrivateObs`] adds
//! what only one player sees (the partner's hand). Together they determine a
//! player's view, so policies and belief models only ever condition on the pair.

mod encode;

pub use encode::{
    encode_belief_context, encode_public, encoder_version, layout_document, BeliefContext, Block, FeatureVector,
    Layout, ENCODER_VERSION,
};
pub(crate) use encode::log_count;
pub use encode::potential_score;

use arrayvec::ArrayVec;

use crate::engine::{
    playable_mask, played_mask, Action, Card, CardCounts, GameState, Hand, HandKnowledge, PublicEvent, SlotKnowledge,
    Variant, MAX_COLORS, MAX_HAND, NUM_PLAYERS,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicState {
    pub variant: Variant,
    pub fireworks: [u8; MAX_COLORS],
    pub discards: CardCounts,
    pub hint_tokens: u8,
    pub life_tokens: u8,
    pub deck_size: u8,
    /// Hint knowledge for both players' slots.
    pub knowledge: [HandKnowledge; NUM_PLAYERS],
    pub last_event: Option<PublicEvent>,
    pub turn: u32,
    pub current_player: u8,
    pub final_countdown: Option<u8>,
    pub terminal: bool,
}

/// One player's private observation: the partner's hand and their own hint masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateObs {
    pub observer: u8,
    pub partner_hand: Hand,
    pub own_hint_masks: ArrayVec<u64, MAX_HAND>,
}

/// A player's complete view: public state plus private observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub public: PublicState,
    pub private: PrivateObs,
}

impl PublicState {
    pub fn from_state(state: &GameState) -> PublicState {
        let mut fireworks = [0u8; MAX_COLORS];
        fireworks[..state.fireworks().len()].copy_from_slice(state.fireworks());
        PublicState {
            variant: *state.variant(),
            fireworks,
            discards: *state.discards(),
            hint_tokens: state.hint_tokens(),
            life_tokens: state.life_tokens(),
            deck_size: state.deck_size() as u8,
            knowledge: [state.knowledge(0).clone(), state.knowledge(1).clone()],
            last_event: state.last_event().copied(),
            turn: state.turn(),
            current_player: state.current_player() as u8,
            final_countdown: state.final_countdown(),
            terminal: state.is_terminal(),
        }
    }

    /// Rebuilds the public state from public events alone, without any card
    /// identities beyond those revealed by plays and discards.
    pub fn replay(variant: Variant, events: &[PublicEvent]) -> Result<PublicState> {
        let full = SlotKnowledge { mask: variant.full_mask(), touched: false };
        let h = variant.hand_size();
        let mut s = PublicState {
            variant,
            fireworks: [0; MAX_COLORS],
            discards: CardCounts::default(),
            hint_tokens: variant.max_hint_tokens(),
            life_tokens: variant.max_lives(),
            deck_size: (variant.deck_size() - NUM_PLAYERS * h) as u8,
            knowledge: [
                std::iter::repeat_n(full, h).collect(),
                std::iter::repeat_n(full, h).collect(),
            ],
            last_event: None,
            turn: 0,
            current_player: 0,
            final_countdown: None,
            terminal: false,
        };
        for e in events {
            if s.terminal || e.turn != s.turn || e.actor != s.current_player {
                return Err(Error::parse(format!("public event at turn {} out of sequence", e.turn)));
            }
            let me = e.actor as usize;
            let countdown_was_active = s.final_countdown.is_some();
            match e.action {
                Action::Play(slot) | Action::Discard(slot) => {
                    let card = e.revealed.ok_or_else(|| Error::parse("play/discard without revealed card"))?;
                    if slot as usize >= s.knowledge[me].len() {
                        return Err(Error::parse("slot out of range"));
                    }
                    s.knowledge[me].remove(slot as usize);
                    if let Action::Play(_) = e.action {
                        let color = card.color() as usize;
                        if s.fireworks[color] == card.rank() {
                            s.fireworks[color] += 1;
                            if s.fireworks[color] as usize == variant.num_ranks()
                                && s.hint_tokens < variant.max_hint_tokens()
                            {
                                s.hint_tokens += 1;
                            }
                        } else {
                            s.discards.add(card);
                            s.life_tokens -= 1;
                        }
                    } else {
                        s.discards.add(card);
                        s.hint_tokens += 1;
                    }
                    if e.drew {
                        s.knowledge[me].push(full);
                        s.deck_size -= 1;
                        if s.deck_size == 0 {
                            s.final_countdown = Some(NUM_PLAYERS as u8);
                        }
                    }
                }
                Action::HintColor { target, .. } | Action::HintRank { target, .. } => {
                    let attr = match e.action {
                        Action::HintColor { color, .. } => variant.color_mask(color),
                        Action::HintRank { rank, .. } => variant.rank_mask(rank),
                        _ => unreachable!(),
                    };
                    for (i, k) in s.knowledge[target as usize].iter_mut().enumerate() {
                        if e.touched & (1 << i) != 0 {
                            k.mask &= attr;
                            k.touched = true;
                        } else {
                            k.mask &= !attr;
                        }
                    }
                    s.hint_tokens -= 1;
                }
            }
            if countdown_was_active {
                if let Some(c) = s.final_countdown.as_mut() {
                    *c -= 1;
                }
            }
            s.last_event = Some(*e);
            s.turn += 1;
            s.current_player = 1 - s.current_player;
            let total: u32 = s.fireworks[..variant.num_colors()].iter().map(|&f| f as u32).sum();
            s.terminal = s.life_tokens == 0 || s.final_countdown == Some(0) || total == variant.max_score();
        }
        Ok(s)
    }

    pub fn hand_len(&self, player: usize) -> usize {
        self.knowledge[player].len()
    }

    pub fn discard_legal(&self) -> bool {
        self.hint_tokens < self.variant.max_hint_tokens()
    }

    pub fn playable_mask(&self) -> u64 {
        playable_mask(&self.variant, &self.fireworks)
    }

    /// Cards already on their firework (no longer useful).
    pub fn played_mask(&self) -> u64 {
        played_mask(&self.variant, &self.fireworks)
    }

    pub fn score(&self) -> u32 {
        if self.life_tokens == 0 {
            0
        } else {
            self.fireworks[..self.variant.num_colors()].iter().map(|&f| f as u32).sum()
        }
    }

    /// Full deck minus discards and played cards.
    pub fn remaining_counts(&self) -> CardCounts {
        let mut pool = self.variant.full_deck();
        for (card, n) in self.discards.iter() {
            for _ in 0..n {
                pool.remove(card);
            }
        }
        for color in 0..self.variant.num_colors() {
            for rank in 0..self.fireworks[color] {
                pool.remove(Card::new(color as u8, rank));
            }
        }
        pool
    }
}

impl Observation {
    pub fn new(state: &GameState, player: usize) -> Observation {
        Observation {
            public: PublicState::from_state(state),
            private: observe(state, player),
        }
    }

    pub fn observer(&self) -> usize {
        self.private.observer as usize
    }

    pub fn partner(&self) -> usize {
        1 - self.observer()
    }

    pub fn own_knowledge(&self) -> &HandKnowledge {
        &self.public.knowledge[self.observer()]
    }

    /// Cards this player cannot see (own hand plus deck).
    pub fn unseen_counts(&self) -> CardCounts {
        let mut pool = self.public.remaining_counts();
        for &c in &self.private.partner_hand {
            pool.remove(c);
        }
        pool
    }

    /// The observation the partner would have if the observer's hand were `hand`.
    pub fn partner_view(public: &PublicState, observer: usize, hand: &[Card]) -> Observation {
        let partner = 1 - observer;
        Observation {
            public: public.clone(),
            private: PrivateObs {
                observer: partner as u8,
                partner_hand: hand.iter().copied().collect(),
                own_hint_masks: public.knowledge[partner].iter().map(|k| k.mask).collect(),
            },
        }
    }
}

/// What `player` privately observes in `state`.
pub fn observe(state: &GameState, player: usize) -> PrivateObs {
    PrivateObs {
        observer: player as u8,
        partner_hand: state.hand(1 - player).clone(),
        own_hint_masks: state.knowledge(player).iter().map(|k| k.mask).collect(),
    }
}

/// Splits a state into its public part and each player's private feature
/// (the partner hand that player sees).
pub fn factorize(state: &GameState) -> (PublicState, [Hand; NUM_PLAYERS]) {
    (PublicState::from_state(state), [state.hand(1).clone(), state.hand(0).clone()])
}

/// Inverse of [`factorize`] for one player.
pub fn reconstruct(public: &PublicState, observer: usize, private_feature: &Hand) -> PrivateObs {
    PrivateObs {
        observer: observer as u8,
        partner_hand: private_feature.clone(),
        own_hint_masks: public.knowledge[observer].iter().map(|k| k.mask).collect(),
    }
}
