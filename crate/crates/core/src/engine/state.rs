use arrayvec::ArrayVec;
use rand::seq::SliceRandom;

use super::action::{Action, MAX_ACTIONS};
use super::card::{Card, CardCounts, MAX_COLORS, MAX_HAND, NUM_PLAYERS};
use super::event::{Event, PublicEvent};
use super::variant::Variant;
use crate::error::{Error, Result};
use crate::rng;

pub type Hand = ArrayVec<Card, MAX_HAND>;
pub type ActionList = ArrayVec<Action, MAX_ACTIONS>;

/// What a player has been told about one of their own slots.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SlotKnowledge {
    /// Plausible identities (packed card space), after positive and negative hints.
    pub mask: u64,
    /// Whether a hint ever touched this slot.
    pub touched: bool,
}

pub type HandKnowledge = ArrayVec<SlotKnowledge, MAX_HAND>;

/// Full hidden state of a two-player game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameState {
    variant: Variant,
    /// Undrawn cards; the next card to draw is at the end.
    deck: Vec<Card>,
    hands: [Hand; NUM_PLAYERS],
    knowledge: [HandKnowledge; NUM_PLAYERS],
    fireworks: [u8; MAX_COLORS],
    discards: CardCounts,
    hint_tokens: u8,
    life_tokens: u8,
    current_player: u8,
    final_countdown: Option<u8>,
    terminal: bool,
    turn: u32,
    last_event: Option<PublicEvent>,
    events: Vec<Event>,
    record_events: bool,
}

impl GameState {
    /// Deals a new game whose deck order is a deterministic function of `seed`.
    pub fn new_game(variant: Variant, seed: u64) -> GameState {
        let mut order = variant.ordered_deck();
        let mut rng = rng::stream(seed, &[0x6465_616c]);
        order.shuffle(&mut rng);
        GameState::from_deck_order(variant, &order).expect("shuffled full deck is valid")
    }

    /// Builds a game from an explicit deck order: player 0 receives the first
    /// `hand_size` cards, player 1 the next `hand_size`, and draws follow in order.
    pub fn from_deck_order(variant: Variant, order: &[Card]) -> Result<GameState> {
        if CardCounts::from_cards(order) != variant.full_deck() {
            return Err(Error::InvalidVariant("deck order is not a permutation of the variant deck".into()));
        }
        let h = variant.hand_size();
        let full = SlotKnowledge { mask: variant.full_mask(), touched: false };
        let mut hands: [Hand; NUM_PLAYERS] = Default::default();
        let mut knowledge: [HandKnowledge; NUM_PLAYERS] = Default::default();
        for p in 0..NUM_PLAYERS {
            hands[p].extend(order[p * h..(p + 1) * h].iter().copied());
            knowledge[p].extend(std::iter::repeat_n(full, h));
        }
        let deck: Vec<Card> = order[NUM_PLAYERS * h..].iter().rev().copied().collect();
        Ok(GameState {
            variant,
            deck,
            hands,
            knowledge,
            fireworks: [0; MAX_COLORS],
            discards: CardCounts::default(),
            hint_tokens: variant.max_hint_tokens(),
            life_tokens: variant.max_lives(),
            current_player: 0,
            final_countdown: None,
            terminal: false,
            turn: 0,
            last_event: None,
            events: Vec::new(),
            record_events: true,
        })
    }

    /// Copy for simulation: identical rules state, no event log.
    pub fn clone_for_rollout(&self) -> GameState {
        GameState {
            variant: self.variant,
            deck: self.deck.clone(),
            hands: self.hands.clone(),
            knowledge: self.knowledge.clone(),
            fireworks: self.fireworks,
            discards: self.discards,
            hint_tokens: self.hint_tokens,
            life_tokens: self.life_tokens,
            current_player: self.current_player,
            final_countdown: self.final_countdown,
            terminal: self.terminal,
            turn: self.turn,
            last_event: self.last_event,
            events: Vec::new(),
            record_events: false,
        }
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }
    pub fn hand(&self, player: usize) -> &Hand {
        &self.hands[player]
    }
    pub fn knowledge(&self, player: usize) -> &HandKnowledge {
        &self.knowledge[player]
    }
    pub fn fireworks(&self) -> &[u8] {
        &self.fireworks[..self.variant.num_colors()]
    }
    pub fn discards(&self) -> &CardCounts {
        &self.discards
    }
    pub fn hint_tokens(&self) -> u8 {
        self.hint_tokens
    }
    pub fn life_tokens(&self) -> u8 {
        self.life_tokens
    }
    pub fn deck_size(&self) -> usize {
        self.deck.len()
    }
    /// Undrawn cards, next draw last.
    pub fn deck(&self) -> &[Card] {
        &self.deck
    }
    pub fn current_player(&self) -> usize {
        self.current_player as usize
    }
    pub fn final_countdown(&self) -> Option<u8> {
        self.final_countdown
    }
    pub fn turn(&self) -> u32 {
        self.turn
    }
    pub fn last_event(&self) -> Option<&PublicEvent> {
        self.last_event.as_ref()
    }
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Sum of the fireworks, or zero once every life is lost.
    pub fn score(&self) -> u32 {
        if self.life_tokens == 0 {
            0
        } else {
            self.fireworks_total()
        }
    }

    fn fireworks_total(&self) -> u32 {
        self.fireworks().iter().map(|&f| f as u32).sum()
    }

    /// Cards whose play would advance a firework right now.
    pub fn playable_mask(&self) -> u64 {
        playable_mask(&self.variant, &self.fireworks)
    }

    /// Every card the given player cannot see: their own hand plus the deck.
    pub fn unseen_counts(&self, player: usize) -> CardCounts {
        let mut pool = self.variant.full_deck();
        for &c in &self.hands[1 - player] {
            pool.remove(c);
        }
        self.remove_public_cards(&mut pool);
        pool
    }

    fn remove_public_cards(&self, pool: &mut CardCounts) {
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
    }

    /// Checks that deck, hands, discards and played cards partition the full deck.
    pub fn conserves_cards(&self) -> bool {
        let mut seen = self.discards;
        for &c in self.deck.iter().chain(self.hands.iter().flatten()) {
            seen.add(c);
        }
        for color in 0..self.variant.num_colors() {
            for rank in 0..self.fireworks[color] {
                seen.add(Card::new(color as u8, rank));
            }
        }
        seen == self.variant.full_deck()
    }

    /// Legal actions in canonical order: plays, discards, color hints, rank hints.
    pub fn legal_actions(&self) -> Result<Vec<Action>> {
        if self.terminal {
            return Err(Error::GameOver);
        }
        let mut out = ActionList::new();
        self.legal_actions_into(&mut out);
        Ok(out.to_vec())
    }

    /// Allocation-free variant of [`GameState::legal_actions`]; empty when terminal.
    pub fn legal_actions_into(&self, out: &mut ActionList) {
        out.clear();
        if self.terminal {
            return;
        }
        let me = self.current_player as usize;
        let n = self.hands[me].len() as u8;
        out.extend((0..n).map(Action::Play));
        if self.hint_tokens < self.variant.max_hint_tokens() {
            out.extend((0..n).map(Action::Discard));
        }
        if self.hint_tokens > 0 {
            let target = 1 - self.current_player;
            let held = self.hands[target as usize].iter().fold(0u64, |m, c| m | c.bit());
            for color in 0..self.variant.num_colors() as u8 {
                if held & self.variant.color_mask(color) != 0 {
                    out.push(Action::HintColor { target, color });
                }
            }
            for rank in 0..self.variant.num_ranks() as u8 {
                if held & self.variant.rank_mask(rank) != 0 {
                    out.push(Action::HintRank { target, rank });
                }
            }
        }
    }

    pub fn check_legal(&self, action: Action) -> Result<()> {
        if self.terminal {
            return Err(Error::GameOver);
        }
        let me = self.current_player as usize;
        let n = self.hands[me].len() as u8;
        let v = &self.variant;
        match action {
            Action::Play(s) | Action::Discard(s) if s >= n => {
                Err(Error::illegal(action, format!("slot {s} is empty (hand holds {n} cards)")))
            }
            Action::Discard(_) if self.hint_tokens >= v.max_hint_tokens() => {
                Err(Error::illegal(action, "cannot discard with all hint tokens available"))
            }
            Action::Play(_) | Action::Discard(_) => Ok(()),
            Action::HintColor { target, .. } | Action::HintRank { target, .. } => {
                if target as usize >= NUM_PLAYERS || target == self.current_player {
                    return Err(Error::illegal(action, "hint target must be the partner"));
                }
                if self.hint_tokens == 0 {
                    return Err(Error::illegal(action, "no hint tokens left"));
                }
                let attr = match action {
                    Action::HintColor { color, .. } if (color as usize) < v.num_colors() => v.color_mask(color),
                    Action::HintRank { rank, .. } if (rank as usize) < v.num_ranks() => v.rank_mask(rank),
                    _ => return Err(Error::illegal(action, "hinted attribute outside the variant")),
                };
                if self.hands[target as usize].iter().all(|c| c.bit() & attr == 0) {
                    return Err(Error::illegal(action, "hint touches no card"));
                }
                Ok(())
            }
        }
    }

    /// Pure transition: returns the successor state and the reward.
    pub fn apply(&self, action: Action) -> Result<(GameState, i32)> {
        let mut next = self.clone();
        let r = next.step(action)?;
        Ok((next, r))
    }

    /// In-place transition after a legality check.
    pub fn step(&mut self, action: Action) -> Result<i32> {
        self.check_legal(action)?;
        Ok(self.step_unchecked(action))
    }

    /// In-place transition for actions already known to be legal.
    ///
    /// The reward is the change in [`GameState::score`], so a bomb-out yields
    /// minus the fireworks total and rewards always sum to the final score.
    pub fn step_unchecked(&mut self, action: Action) -> i32 {
        debug_assert!(self.check_legal(action).is_ok(), "illegal {action} in step_unchecked");
        let me = self.current_player as usize;
        let v = self.variant;
        let countdown_was_active = self.final_countdown.is_some();
        let mut reward = 0i32;
        let mut revealed = None;
        let mut drawn = None;
        let mut touched = 0u8;
        match action {
            Action::Play(s) | Action::Discard(s) => {
                let card = self.hands[me].remove(s as usize);
                self.knowledge[me].remove(s as usize);
                revealed = Some(card);
                if let Action::Play(_) = action {
                    let color = card.color() as usize;
                    if self.fireworks[color] == card.rank() {
                        self.fireworks[color] += 1;
                        reward = 1;
                        if self.fireworks[color] as usize == v.num_ranks() && self.hint_tokens < v.max_hint_tokens() {
                            self.hint_tokens += 1;
                        }
                    } else {
                        self.discards.add(card);
                        self.life_tokens -= 1;
                        if self.life_tokens == 0 {
                            reward = -(self.fireworks_total() as i32);
                        }
                    }
                } else {
                    self.discards.add(card);
                    self.hint_tokens += 1;
                }
                if let Some(next) = self.deck.pop() {
                    self.hands[me].push(next);
                    self.knowledge[me].push(SlotKnowledge { mask: v.full_mask(), touched: false });
                    drawn = Some(next);
                    if self.deck.is_empty() {
                        self.final_countdown = Some(v.num_players() as u8);
                    }
                }
            }
            Action::HintColor { target, .. } | Action::HintRank { target, .. } => {
                let attr = match action {
                    Action::HintColor { color, .. } => v.color_mask(color),
                    Action::HintRank { rank, .. } => v.rank_mask(rank),
                    _ => unreachable!(),
                };
                let t = target as usize;
                for (i, (card, k)) in self.hands[t].iter().zip(self.knowledge[t].iter_mut()).enumerate() {
                    if card.bit() & attr != 0 {
                        k.mask &= attr;
                        k.touched = true;
                        touched |= 1 << i;
                    } else {
                        k.mask &= !attr;
                    }
                }
                self.hint_tokens -= 1;
            }
        }
        if countdown_was_active {
            if let Some(c) = self.final_countdown.as_mut() {
                *c -= 1;
            }
        }
        let event = Event {
            turn: self.turn,
            actor: me as u8,
            action,
            revealed,
            touched,
            drawn,
        };
        self.last_event = Some(event.public());
        if self.record_events {
            self.events.push(event);
        }
        self.turn += 1;
        self.current_player = 1 - self.current_player;
        self.terminal = self.life_tokens == 0
            || self.final_countdown == Some(0)
            || self.fireworks_total() == v.max_score();
        reward
    }

    /// Reconstructs a game from its seed and event log, checking every recorded
    /// outcome (revealed and drawn cards, touched slots) along the way.
    pub fn replay(variant: Variant, seed: u64, events: &[Event]) -> Result<GameState> {
        let mut state = GameState::new_game(variant, seed);
        for (i, e) in events.iter().enumerate() {
            if e.turn != state.turn || e.actor as usize != state.current_player() {
                return Err(Error::parse(format!("event {i} out of sequence")));
            }
            state.step(e.action)?;
            if state.events.last() != Some(e) {
                return Err(Error::parse(format!("event {i} does not match the replayed outcome")));
            }
        }
        Ok(state)
    }

    /// Replaces a player's hand and the undrawn deck (next draw last).
    /// Used to impute hidden information; the caller keeps the multiset valid.
    pub(crate) fn set_hidden(&mut self, player: usize, hand: &[Card], deck: Vec<Card>) {
        debug_assert_eq!(hand.len(), self.hands[player].len());
        debug_assert_eq!(deck.len(), self.deck.len());
        self.hands[player].clear();
        self.hands[player].extend(hand.iter().copied());
        self.deck = deck;
    }
}

/// Cards that advance a firework given the current stacks.
pub fn playable_mask(variant: &Variant, fireworks: &[u8; MAX_COLORS]) -> u64 {
    (0..variant.num_colors()).fold(0, |m, c| {
        let f = fireworks[c];
        if (f as usize) < variant.num_ranks() {
            m | Card::new(c as u8, f).bit()
        } else {
            m
        }
    })
}

/// Cards whose rank is already on their firework.
pub fn played_mask(variant: &Variant, fireworks: &[u8; MAX_COLORS]) -> u64 {
    (0..variant.num_colors()).fold(0, |m, c| (0..fireworks[c]).fold(m, |m, r| m | Card::new(c as u8, r).bit()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Card {
        Card::parse(s).unwrap()
    }

    /// Deck order with the given opening hands; remaining cards in canonical order.
    fn rigged(variant: Variant, p0: &[&str], p1: &[&str]) -> GameState {
        let mut rest = variant.full_deck();
        let mut order = Vec::new();
        for s in p0.iter().chain(p1) {
            assert!(rest.remove(c(s)));
            order.push(c(s));
        }
        for card in variant.ordered_deck() {
            if rest.remove(card) {
                order.push(card);
            }
        }
        GameState::from_deck_order(variant, &order).unwrap()
    }

    #[test]
    fn fresh_game_setup() {
        let s = GameState::new_game(Variant::standard(), 3);
        assert_eq!(s.hint_tokens(), 8);
        assert_eq!(s.life_tokens(), 3);
        assert_eq!(s.deck_size(), 40);
        assert_eq!(s.score(), 0);
        assert!(!s.is_terminal());
        assert_eq!(s.current_player(), 0);
        assert!(s.conserves_cards());
        assert_eq!(s, GameState::new_game(Variant::standard(), 3));
        assert_ne!(s, GameState::new_game(Variant::standard(), 4));
    }

    #[test]
    fn fresh_game_actions_have_no_discards() {
        let s = GameState::new_game(Variant::standard(), 11);
        let acts = s.legal_actions().unwrap();
        let partner = s.hand(1);
        let colors = (0..5u8).filter(|&col| partner.iter().any(|c| c.color() == col)).count();
        let ranks = (0..5u8).filter(|&r| partner.iter().any(|c| c.rank() == r)).count();
        assert_eq!(acts.iter().filter(|a| matches!(a, Action::Play(_))).count(), 5);
        assert_eq!(acts.iter().filter(|a| matches!(a, Action::Discard(_))).count(), 0);
        assert_eq!(acts.len(), 5 + colors + ranks);
        assert_eq!(&acts[..5], &[0, 1, 2, 3, 4].map(Action::Play));
    }

    #[test]
    fn play_advances_or_costs_a_life() {
        let v = Variant::standard();
        let mut s = rigged(v, &["R1", "R2", "R3", "Y1", "Y1"], &["G1", "G2", "G3", "G4", "G5"]);
        assert_eq!(s.step(Action::Play(2)).unwrap(), 0);
        assert_eq!(s.life_tokens(), 2);
        assert_eq!(s.discards().get(c("R3")), 1);
        s.step(Action::HintRank { target: 0, rank: 0 }).unwrap();
        assert_eq!(s.step(Action::Play(0)).unwrap(), 1);
        s.step(Action::HintRank { target: 0, rank: 0 }).unwrap();
        assert_eq!(s.step(Action::Play(0)).unwrap(), 1);
        assert_eq!(s.fireworks()[0], 2);
        assert!(s.conserves_cards());
    }

    #[test]
    fn correct_play_on_red_two() {
        let v = Variant::standard();
        let mut s = rigged(v, &["R1", "Y1", "R2", "B1", "R3"], &["G1", "G2", "G3", "G4", "G5"]);
        s.step(Action::Play(0)).unwrap();
        s.step(Action::HintRank { target: 0, rank: 1 }).unwrap();
        s.step(Action::Play(1)).unwrap();
        s.step(Action::HintRank { target: 0, rank: 2 }).unwrap();
        assert_eq!(s.fireworks()[0], 2);
        let slot = s.hand(0).iter().position(|&x| x == c("R3")).unwrap() as u8;
        assert_eq!(s.step(Action::Play(slot)).unwrap(), 1);
        assert_eq!(s.fireworks()[0], 3);
    }

    #[test]
    fn discard_regains_a_token_and_is_illegal_when_full() {
        let mut s = GameState::new_game(Variant::standard(), 5);
        assert!(s.check_legal(Action::Discard(0)).is_err());
        s.step(Action::HintRank { target: 1, rank: s.hand(1)[0].rank() }).unwrap();
        s.step(Action::HintRank { target: 0, rank: s.hand(0)[0].rank() }).unwrap();
        assert_eq!(s.hint_tokens(), 6);
        s.step(Action::Discard(0)).unwrap();
        assert_eq!(s.hint_tokens(), 7);
        s.step(Action::Discard(0)).unwrap();
        assert_eq!(s.hint_tokens(), 8);
    }

    #[test]
    fn no_hints_without_tokens_or_targets() {
        let v = Variant::standard();
        let mut s = rigged(v, &["R1", "R1", "R1", "Y1", "Y1"], &["G1", "G2", "G3", "G4", "G5"]);
        assert!(s.check_legal(Action::HintColor { target: 1, color: 0 }).is_err());
        assert!(!s.legal_actions().unwrap().contains(&Action::HintColor { target: 1, color: 0 }));
        for _ in 0..8 {
            let a = Action::HintColor { target: 1 - s.current_player() as u8, color: if s.current_player() == 0 { 2 } else { 0 } };
            s.step(a).unwrap();
        }
        assert_eq!(s.hint_tokens(), 0);
        assert!(s.legal_actions().unwrap().iter().all(|a| !a.is_hint()));
    }

    #[test]
    fn hints_update_positive_and_negative_knowledge() {
        let v = Variant::standard();
        let mut s = rigged(v, &["R1", "Y2", "G1", "B3", "W4"], &["G2", "G3", "G4", "G5", "B5"]);
        s.step(Action::HintColor { target: 1, color: 2 }).unwrap();
        s.step(Action::HintRank { target: 0, rank: 0 }).unwrap();
        let k = s.knowledge(0);
        let ones = v.rank_mask(0);
        assert_eq!(k[0].mask, ones);
        assert_eq!(k[2].mask, ones);
        assert!(k[0].touched && k[2].touched && !k[1].touched);
        for i in [1, 3, 4] {
            assert_eq!(k[i].mask, v.full_mask() & !ones);
        }
        assert_eq!(s.last_event().unwrap().touched, 0b00101);
    }

    #[test]
    fn bomb_out_scores_zero_and_ends_the_game() {
        let v = Variant::standard();
        let mut s = rigged(v, &["R1", "Y3", "Y4", "B3", "W4"], &["G2", "G3", "G4", "G5", "B5"]);
        assert_eq!(s.step(Action::Play(0)).unwrap(), 1);
        s.step(Action::HintRank { target: 0, rank: 3 }).unwrap();
        let mut total = 1;
        for _ in 0..5 {
            if s.is_terminal() {
                break;
            }
            if s.current_player() == 0 {
                total += s.step(Action::Play(0)).unwrap();
            } else {
                total += s.step(Action::HintRank { target: 0, rank: s.hand(0)[0].rank() }).unwrap();
            }
        }
        assert!(s.is_terminal());
        assert_eq!(s.life_tokens(), 0);
        assert_eq!(s.score(), 0);
        assert_eq!(total, 0);
    }

    #[test]
    fn deck_exhaustion_grants_each_player_one_last_turn() {
        let v = Variant::mini();
        let mut s = GameState::new_game(v, 9);
        // Discard when allowed, otherwise hint, until the last card is drawn.
        let filler = |s: &GameState| {
            let p = s.current_player();
            if s.hint_tokens() < v.max_hint_tokens() {
                Action::Discard(0)
            } else {
                Action::HintRank { target: 1 - p as u8, rank: s.hand(1 - p)[0].rank() }
            }
        };
        while s.deck_size() > 0 {
            s.step(filler(&s)).unwrap();
            assert!(!s.is_terminal());
        }
        assert_eq!(s.final_countdown(), Some(2));
        let last_drawer = 1 - s.current_player();
        s.step(filler(&s)).unwrap();
        assert!(!s.is_terminal());
        assert_eq!(s.current_player(), last_drawer);
        s.step(filler(&s)).unwrap();
        assert!(s.is_terminal());
        assert!(s.legal_actions().is_err());
    }

    #[test]
    fn completing_a_stack_restores_a_hint() {
        let v = Variant::mini();
        // Player 0 holds R1,R2 then draws R3 after playing.
        let order: Vec<Card> = ["R1", "R2", "Y1", "Y1", "R3", "R1", "R2", "Y2", "Y2", "Y3"].iter().map(|s| c(s)).collect();
        let mut s = GameState::from_deck_order(v, &order).unwrap();
        s.step(Action::Play(0)).unwrap();
        s.step(Action::HintRank { target: 0, rank: 1 }).unwrap();
        s.step(Action::Play(0)).unwrap();
        s.step(Action::HintRank { target: 0, rank: 2 }).unwrap();
        assert_eq!(s.hint_tokens(), 6);
        let slot = s.hand(0).iter().position(|&x| x == c("R3")).unwrap() as u8;
        s.step(Action::Play(slot)).unwrap();
        assert_eq!(s.fireworks()[0], 3);
        assert_eq!(s.hint_tokens(), 7);
    }

    #[test]
    fn illegal_actions_name_the_rule() {
        let s = GameState::new_game(Variant::standard(), 1);
        let e = s.check_legal(Action::Play(7)).unwrap_err().to_string();
        assert!(e.contains("slot 7"), "{e}");
        let e = s.check_legal(Action::HintRank { target: 0, rank: 0 }).unwrap_err().to_string();
        assert!(e.contains("partner"), "{e}");
    }
}
