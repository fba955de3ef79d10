use std::path::Path;

use serde::{Deserialize, Serialize};

use super::card::{Card, MAX_COLORS, MAX_HAND, MAX_RANKS, NUM_PLAYERS};
use crate::error::{Error, Result};

/// Rules configuration. Construct through [`Variant::new`] or a preset so the
/// invariants below always hold:
///
/// * `rank_counts` has `num_ranks` entries, each at least one;
/// * the packed vocabulary (`num_colors * num_ranks`) fits a 32-entry table;
/// * both hands can be dealt with at least one card left to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Variant {
    num_colors: u8,
    num_ranks: u8,
    rank_counts: [u8; MAX_RANKS],
    hand_size: u8,
    max_hint_tokens: u8,
    max_lives: u8,
    num_players: u8,
}

/// Text form of a [`Variant`]; every field is optional and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantConfig {
    pub num_colors: u8,
    pub num_ranks: u8,
    pub rank_counts: Vec<u8>,
    pub hand_size: u8,
    pub max_hint_tokens: u8,
    pub max_lives: u8,
    pub num_players: u8,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig::from(&Variant::standard())
    }
}

impl From<&Variant> for VariantConfig {
    fn from(v: &Variant) -> Self {
        VariantConfig {
            num_colors: v.num_colors,
            num_ranks: v.num_ranks,
            rank_counts: v.rank_counts().to_vec(),
            hand_size: v.hand_size,
            max_hint_tokens: v.max_hint_tokens,
            max_lives: v.max_lives,
            num_players: v.num_players,
        }
    }
}

impl TryFrom<VariantConfig> for Variant {
    type Error = Error;

    fn try_from(c: VariantConfig) -> Result<Variant> {
        Variant::new(
            c.num_colors,
            c.num_ranks,
            &c.rank_counts,
            c.hand_size,
            c.max_hint_tokens,
            c.max_lives,
            c.num_players,
        )
    }
}

impl Variant {
    pub fn new(
        num_colors: u8,
        num_ranks: u8,
        rank_counts: &[u8],
        hand_size: u8,
        max_hint_tokens: u8,
        max_lives: u8,
        num_players: u8,
    ) -> Result<Variant> {
        let bad = |m: String| Err(Error::InvalidVariant(m));
        if num_colors == 0 || num_colors as usize > MAX_COLORS {
            return bad(format!("num_colors must be in 1..={MAX_COLORS}"));
        }
        if num_ranks == 0 || num_ranks as usize > MAX_RANKS {
            return bad(format!("num_ranks must be in 1..={MAX_RANKS}"));
        }
        if num_colors as usize * num_ranks as usize > 32 {
            return bad("num_colors * num_ranks must not exceed 32".into());
        }
        if rank_counts.len() != num_ranks as usize {
            return bad(format!("rank_counts has {} entries, expected {num_ranks}", rank_counts.len()));
        }
        if rank_counts.contains(&0) {
            return bad("every rank needs at least one copy".into());
        }
        if num_players as usize != NUM_PLAYERS {
            return bad("only two-player games are supported".into());
        }
        if hand_size == 0 || hand_size as usize > MAX_HAND {
            return bad(format!("hand_size must be in 1..={MAX_HAND}"));
        }
        if max_lives == 0 {
            return bad("max_lives must be positive".into());
        }
        let mut counts = [0u8; MAX_RANKS];
        counts[..rank_counts.len()].copy_from_slice(rank_counts);
        let v = Variant {
            num_colors,
            num_ranks,
            rank_counts: counts,
            hand_size,
            max_hint_tokens,
            max_lives,
            num_players,
        };
        if v.deck_size() > 255 {
            return bad("deck larger than 255 cards".into());
        }
        if hand_size as usize * num_players as usize >= v.deck_size() {
            return bad("deck must hold more cards than both hands".into());
        }
        Ok(v)
    }

    /// Standard 50-card game with five-card hands.
    pub fn standard() -> Variant {
        Variant::new(5, 5, &[3, 2, 2, 2, 1], 5, 8, 3, 2).unwrap()
    }

    pub fn six_card() -> Variant {
        Variant::new(5, 5, &[3, 2, 2, 2, 1], 6, 8, 3, 2).unwrap()
    }

    /// Seven-card hands with the hint cap lowered to four.
    pub fn seven_card() -> Variant {
        Variant::new(5, 5, &[3, 2, 2, 2, 1], 7, 4, 3, 2).unwrap()
    }

    /// Two colors, three ranks, two-card hands: small enough to enumerate every deal.
    pub fn mini() -> Variant {
        Variant::new(2, 3, &[2, 2, 1], 2, 8, 3, 2).unwrap()
    }

    pub fn preset(name: &str) -> Option<Variant> {
        match name {
            "standard" | "default" | "5card" | "5-card" => Some(Variant::standard()),
            "6card" | "6-card" => Some(Variant::six_card()),
            "7card" | "7-card" => Some(Variant::seven_card()),
            "mini" => Some(Variant::mini()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Variant> {
        let cfg: VariantConfig = toml::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
        Variant::try_from(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&VariantConfig::from(self)).expect("variant config serializes")
    }

    /// Loads a variant from a TOML file, or resolves a preset name.
    pub fn load(spec: &str) -> Result<Variant> {
        let path = Path::new(spec);
        if path.is_file() {
            return Variant::from_toml(&std::fs::read_to_string(path)?);
        }
        Variant::preset(spec).ok_or_else(|| Error::InvalidVariant(format!("no such file or preset: {spec}")))
    }

    #[inline]
    pub fn num_colors(&self) -> usize {
        self.num_colors as usize
    }
    #[inline]
    pub fn num_ranks(&self) -> usize {
        self.num_ranks as usize
    }
    #[inline]
    pub fn rank_counts(&self) -> &[u8] {
        &self.rank_counts[..self.num_ranks as usize]
    }
    #[inline]
    pub fn copies(&self, card: Card) -> u8 {
        self.rank_counts[card.rank() as usize]
    }
    #[inline]
    pub fn hand_size(&self) -> usize {
        self.hand_size as usize
    }
    #[inline]
    pub fn max_hint_tokens(&self) -> u8 {
        self.max_hint_tokens
    }
    #[inline]
    pub fn max_lives(&self) -> u8 {
        self.max_lives
    }
    #[inline]
    pub fn num_players(&self) -> usize {
        self.num_players as usize
    }

    pub fn deck_size(&self) -> usize {
        self.num_colors() * self.rank_counts().iter().map(|&c| c as usize).sum::<usize>()
    }

    pub fn max_score(&self) -> u32 {
        (self.num_colors() * self.num_ranks()) as u32
    }

    /// Number of distinct card identities (the belief vocabulary).
    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.num_colors() * self.num_ranks()
    }

    #[inline]
    pub fn vocab_index(&self, card: Card) -> usize {
        card.color() as usize * self.num_ranks() + card.rank() as usize
    }

    #[inline]
    pub fn vocab_card(&self, index: usize) -> Card {
        Card::new((index / self.num_ranks()) as u8, (index % self.num_ranks()) as u8)
    }

    pub fn cards(&self) -> impl Iterator<Item = Card> + '_ {
        (0..self.vocab_size()).map(|i| self.vocab_card(i))
    }

    /// Bitmask (packed card space) of every identity in this variant.
    pub fn full_mask(&self) -> u64 {
        self.cards().fold(0, |m, c| m | c.bit())
    }

    pub fn color_mask(&self, color: u8) -> u64 {
        (0..self.num_ranks).fold(0, |m, r| m | Card::new(color, r).bit())
    }

    pub fn rank_mask(&self, rank: u8) -> u64 {
        (0..self.num_colors).fold(0, |m, c| m | Card::new(c, rank).bit())
    }

    /// Multiset of the full deck.
    pub fn full_deck(&self) -> super::card::CardCounts {
        let mut counts = super::card::CardCounts::default();
        for card in self.cards() {
            for _ in 0..self.copies(card) {
                counts.add(card);
            }
        }
        counts
    }

    /// Deck in canonical (unshuffled) order.
    pub fn ordered_deck(&self) -> Vec<Card> {
        self.cards()
            .flat_map(|c| std::iter::repeat_n(c, self.copies(c) as usize))
            .collect()
    }
}
