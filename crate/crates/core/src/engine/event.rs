//! Event records and their line format.
//!
//! One event per line, six comma-separated fields:
//!
//! ```text
//! turn,actor,kind,payload,revealed,drawn
//! ```
//!
//! * `turn`, `actor`: decimal integers.
//! * `kind`: `play`, `discard`, `hint-color` or `hint-rank`.
//! * `payload`: the slot for plays and discards; `target/value/slots` for
//!   hints, where `value` is a color letter (`R Y G W B M C K`) or a 1-based
//!   rank and `slots` lists touched slots ascending, joined by `+`.
//! * `revealed`, `drawn`: a card such as `R3` (color letter, 1-based rank) or `-`.

use std::fmt::Write as _;

use super::action::{Action, ActionKind};
use super::card::{color_letter, parse_color, Card};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Event {
    pub turn: u32,
    pub actor: u8,
    pub action: Action,
    /// Card leaving the actor's hand on a play or discard.
    pub revealed: Option<Card>,
    /// Slots touched by a hint, as a bitmask.
    pub touched: u8,
    pub drawn: Option<Card>,
}

/// An event as everyone sees it: identical to [`Event`] except that the drawn
/// card's identity is hidden.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PublicEvent {
    pub turn: u32,
    pub actor: u8,
    pub action: Action,
    pub revealed: Option<Card>,
    pub touched: u8,
    pub drew: bool,
}

impl Event {
    pub fn public(&self) -> PublicEvent {
        PublicEvent {
            turn: self.turn,
            actor: self.actor,
            action: self.action,
            revealed: self.revealed,
            touched: self.touched,
            drew: self.drawn.is_some(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(32);
        write!(s, "{},{},{},", self.turn, self.actor, self.action.kind().as_str()).unwrap();
        match self.action {
            Action::Play(slot) | Action::Discard(slot) => write!(s, "{slot}").unwrap(),
            Action::HintColor { target, color } => {
                write!(s, "{target}/{}/{}", color_letter(color), slots_text(self.touched)).unwrap()
            }
            Action::HintRank { target, rank } => {
                write!(s, "{target}/{}/{}", rank + 1, slots_text(self.touched)).unwrap()
            }
        }
        let card = |c: Option<Card>| c.map_or_else(|| "-".to_string(), |c| c.to_string());
        write!(s, ",{},{}", card(self.revealed), card(self.drawn)).unwrap();
        s
    }

    pub fn parse_line(line: &str) -> Result<Event> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        let [turn, actor, kind, payload, revealed, drawn] = fields[..] else {
            return Err(Error::parse(format!("expected 6 fields in event {line:?}")));
        };
        let num = |s: &str| s.parse::<u32>().map_err(|_| Error::parse(format!("bad number {s:?} in {line:?}")));
        let turn = num(turn)?;
        let actor = num(actor)? as u8;
        let kind = ActionKind::parse(kind).ok_or_else(|| Error::parse(format!("bad kind in {line:?}")))?;
        let mut touched = 0u8;
        let action = match kind {
            ActionKind::Play => Action::Play(num(payload)? as u8),
            ActionKind::Discard => Action::Discard(num(payload)? as u8),
            ActionKind::HintColor | ActionKind::HintRank => {
                let parts: Vec<&str> = payload.split('/').collect();
                let [target, value, slots] = parts[..] else {
                    return Err(Error::parse(format!("bad hint payload in {line:?}")));
                };
                for slot in slots.split('+').filter(|s| !s.is_empty()) {
                    touched |= 1 << num(slot)?;
                }
                let target = num(target)? as u8;
                if kind == ActionKind::HintColor {
                    Action::HintColor { target, color: parse_color(value)? }
                } else {
                    let r = num(value)?;
                    if r == 0 {
                        return Err(Error::parse(format!("rank 0 in {line:?}")));
                    }
                    Action::HintRank { target, rank: r as u8 - 1 }
                }
            }
        };
        let card = |s: &str| if s == "-" { Ok(None) } else { Card::parse(s).map(Some) };
        Ok(Event {
            turn,
            actor,
            action,
            revealed: card(revealed)?,
            touched,
            drawn: card(drawn)?,
        })
    }
}

fn slots_text(mask: u8) -> String {
    (0..8)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

pub fn write_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<Event>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(Event::parse_line).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format_is_stable() {
        let e = Event {
            turn: 12,
            actor: 1,
            action: Action::HintColor { target: 0, color: 0 },
            revealed: None,
            touched: 0b10101,
            drawn: None,
        };
        assert_eq!(e.to_line(), "12,1,hint-color,0/R/0+2+4,-,-");
        assert_eq!(Event::parse_line(&e.to_line()).unwrap(), e);
        let p = Event {
            turn: 3,
            actor: 0,
            action: Action::Play(4),
            revealed: Some(Card::new(1, 2)),
            touched: 0,
            drawn: Some(Card::new(4, 0)),
        };
        assert_eq!(p.to_line(), "3,0,play,4,Y3,B1");
        assert_eq!(Event::parse_line(&p.to_line()).unwrap(), p);
        let h = Event::parse_line("5,0,hint-rank,1/5/3,-,-").unwrap();
        assert_eq!(h.action, Action::HintRank { target: 1, rank: 4 });
        assert_eq!(h.touched, 0b1000);
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in ["", "1,0,play,0,-", "1,0,jump,0,-,-", "x,0,play,0,-,-", "1,0,hint-rank,1/0/0,-,-", "1,0,play,0,Q9,-"] {
            assert!(Event::parse_line(bad).is_err(), "{bad}");
        }
    }
}
