//! Two-player Hanabi rules with configurable deck, hand size and token caps.

mod action;
mod card;
mod event;
mod state;
mod variant;

pub use action::{Action, ActionKind, MAX_ACTIONS};
pub use card::{color_letter, parse_color, Card, CardCounts, CARD_SPACE, MAX_COLORS, MAX_HAND, MAX_RANKS, NUM_PLAYERS};
pub use event::{parse_log, write_log, Event, PublicEvent};
pub use state::{playable_mask, played_mask, ActionList, GameState, Hand, HandKnowledge, SlotKnowledge};
pub use variant::{Variant, VariantConfig};
