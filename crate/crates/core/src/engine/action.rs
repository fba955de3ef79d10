use std::fmt;

use super::card::{color_letter, MAX_COLORS, MAX_HAND, MAX_RANKS};
use super::variant::Variant;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Action {
    Play(u8),
    Discard(u8),
    HintColor { target: u8, color: u8 },
    HintRank { target: u8, rank: u8 },
}

/// Upper bound on the number of distinct actions in any variant.
pub const MAX_ACTIONS: usize = 2 * MAX_HAND + MAX_COLORS + MAX_RANKS;

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Play(_) => ActionKind::Play,
            Action::Discard(_) => ActionKind::Discard,
            Action::HintColor { .. } => ActionKind::HintColor,
            Action::HintRank { .. } => ActionKind::HintRank,
        }
    }

    pub fn is_hint(&self) -> bool {
        matches!(self, Action::HintColor { .. } | Action::HintRank { .. })
    }

    /// Position of this action in the canonical ordering (plays, discards,
    /// color hints, rank hints). Hint targets are implied in two-player games.
    pub fn canonical_index(&self, variant: &Variant) -> usize {
        let h = variant.hand_size();
        match *self {
            Action::Play(s) => s as usize,
            Action::Discard(s) => h + s as usize,
            Action::HintColor { color, .. } => 2 * h + color as usize,
            Action::HintRank { rank, .. } => 2 * h + variant.num_colors() + rank as usize,
        }
    }

    /// Inverse of [`Action::canonical_index`] for the given actor.
    pub fn from_canonical_index(variant: &Variant, actor: u8, index: usize) -> Option<Action> {
        let h = variant.hand_size();
        let target = 1 - actor;
        let nc = variant.num_colors();
        Some(if index < h {
            Action::Play(index as u8)
        } else if index < 2 * h {
            Action::Discard((index - h) as u8)
        } else if index < 2 * h + nc {
            Action::HintColor { target, color: (index - 2 * h) as u8 }
        } else if index < 2 * h + nc + variant.num_ranks() {
            Action::HintRank { target, rank: (index - 2 * h - nc) as u8 }
        } else {
            return None;
        })
    }

    pub fn num_canonical(variant: &Variant) -> usize {
        2 * variant.hand_size() + variant.num_colors() + variant.num_ranks()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Action::Play(s) => write!(f, "play:{s}"),
            Action::Discard(s) => write!(f, "discard:{s}"),
            Action::HintColor { target, color } => write!(f, "hint-color:{target}:{}", color_letter(color)),
            Action::HintRank { target, rank } => write!(f, "hint-rank:{target}:{}", rank + 1),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ActionKind {
    Play,
    Discard,
    HintColor,
    HintRank,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Play => "play",
            ActionKind::Discard => "discard",
            ActionKind::HintColor => "hint-color",
            ActionKind::HintRank => "hint-rank",
        }
    }

    pub fn parse(s: &str) -> Option<ActionKind> {
        Some(match s {
            "play" => ActionKind::Play,
            "discard" => ActionKind::Discard,
            "hint-color" => ActionKind::HintColor,
            "hint-rank" => ActionKind::HintRank,
            _ => return None,
        })
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}
