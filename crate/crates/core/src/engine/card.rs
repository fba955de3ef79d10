use std::fmt;

use crate::error::{Error, Result};

pub const MAX_COLORS: usize = 8;
pub const MAX_RANKS: usize = 8;
pub const MAX_HAND: usize = 7;
pub const NUM_PLAYERS: usize = 2;
/// Size of the packed card space (`color << 3 | rank`).
pub const CARD_SPACE: usize = MAX_COLORS * MAX_RANKS;

const COLOR_LETTERS: &[u8; MAX_COLORS] = b"RYGWBMCK";

/// A card identity packed as `color << 3 | rank` (both zero-based).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Card(u8);

impl Card {
    #[inline]
    pub const fn new(color: u8, rank: u8) -> Card {
        Card((color << 3) | rank)
    }

    #[inline]
    pub const fn color(self) -> u8 {
        self.0 >> 3
    }

    #[inline]
    pub const fn rank(self) -> u8 {
        self.0 & 7
    }

    /// Position in the packed 64-entry card space.
    #[inline]
    pub const fn packed(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn from_packed(p: usize) -> Card {
        Card(p as u8)
    }

    #[inline]
    pub const fn bit(self) -> u64 {
        1u64 << self.0
    }

    pub fn parse(s: &str) -> Result<Card> {
        let b = s.as_bytes();
        if b.len() != 2 {
            return Err(Error::parse(format!("bad card {s:?}")));
        }
        let color = COLOR_LETTERS
            .iter()
            .position(|&c| c == b[0])
            .ok_or_else(|| Error::parse(format!("bad card color in {s:?}")))?;
        let rank = (b[1] as char)
            .to_digit(10)
            .filter(|&d| (1..=MAX_RANKS as u32).contains(&d))
            .ok_or_else(|| Error::parse(format!("bad card rank in {s:?}")))?;
        Ok(Card::new(color as u8, rank as u8 - 1))
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", COLOR_LETTERS[self.color() as usize] as char, self.rank() + 1)
    }
}

impl fmt::Debug for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn color_letter(color: u8) -> char {
    COLOR_LETTERS[color as usize] as char
}

pub fn parse_color(s: &str) -> Result<u8> {
    match s.as_bytes() {
        [c] => COLOR_LETTERS
            .iter()
            .position(|x| x == c)
            .map(|p| p as u8)
            .ok_or_else(|| Error::parse(format!("bad color {s:?}"))),
        _ => Err(Error::parse(format!("bad color {s:?}"))),
    }
}

/// Multiset of cards as a fixed-size count array over the packed card space.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CardCounts([u8; CARD_SPACE]);

impl Default for CardCounts {
    fn default() -> Self {
        CardCounts([0; CARD_SPACE])
    }
}

impl CardCounts {
    #[inline]
    pub fn get(&self, card: Card) -> u8 {
        self.0[card.packed()]
    }

    #[inline]
    pub fn add(&mut self, card: Card) {
        self.0[card.packed()] += 1;
    }

    /// Removes one copy; returns false (and leaves the set unchanged) when absent.
    #[inline]
    pub fn remove(&mut self, card: Card) -> bool {
        let c = &mut self.0[card.packed()];
        if *c == 0 {
            false
        } else {
            *c -= 1;
            true
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    /// Bitmask of cards with at least one copy.
    pub fn support(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold(0u64, |m, (i, _)| m | (1u64 << i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Card, u8)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (Card::from_packed(i), c))
    }

    pub fn from_cards<'a>(cards: impl IntoIterator<Item = &'a Card>) -> Self {
        let mut out = CardCounts::default();
        for &c in cards {
            out.add(c);
        }
        out
    }
}

impl fmt::Debug for CardCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}
