//! Self-play data, the replay buffer and the supervised trainers.
//!
//! # Text format
//!
//! One trajectory per line, five tab-separated fields:
//!
//! ```text
//! seed  variant  hands  returns  events
//! ```
//!
//! * `seed`: decimal deal seed.
//! * `variant`: `colors/ranks/counts/hand/hints/lives`, counts joined by `-`,
//!   e.g. `5/5/3-2-2-2-1/5/8/3`.
//! * `hands`: the acting player's hand at each turn, space separated, cards
//!   joined by `.` (e.g. `R1.Y3.B2`).
//! * `returns`: return-to-go at every turn plus the terminal zero, space separated.
//! * `events`: event lines (see [`crate::engine::Event::to_line`]) joined by `;`.

mod train;
mod value;

pub use train::{belief_examples, train_belief, train_belief_online, BeliefExample, TrainConfig, TrainReport};
pub use value::{train_value, ValueConfig, ValueFunction, ValueModel, ValueReport, ZeroValue, RIDGE_LAMBDA};

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use crate::engine::{Action, Card, Event, GameState, Hand, Variant};
use crate::error::{Error, Result};
use crate::policy::Blueprint;
use crate::rng::{game_seed, Rng};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub variant: Variant,
    pub seed: u64,
    pub events: Vec<Event>,
    /// Hand of the player to act, before each turn.
    pub hands: Vec<Hand>,
    /// `returns[t]` is the sum of rewards from turn `t` on; the last entry is 0.
    pub returns: Vec<i32>,
}

impl TrajectoryRecord {
    /// Plays one self-play game under `blueprint`.
    pub fn play(blueprint: &dyn Blueprint, variant: Variant, seed: u64) -> TrajectoryRecord {
        let mut s = GameState::new_game(variant, seed);
        let mut hands = Vec::new();
        let mut rewards = Vec::new();
        while !s.is_terminal() {
            hands.push(s.hand(s.current_player()).clone());
            let a = blueprint.act_in(&s);
            rewards.push(s.step(a).expect("blueprint actions are legal"));
        }
        let mut returns = vec![0; rewards.len() + 1];
        for t in (0..rewards.len()).rev() {
            returns[t] = rewards[t] + returns[t + 1];
        }
        TrajectoryRecord { variant, seed, events: s.events().to_vec(), hands, returns }
    }

    pub fn turns(&self) -> usize {
        self.events.len()
    }

    pub fn score(&self) -> i32 {
        self.returns[0]
    }

    /// Every state of the game, from the deal to the terminal state.
    pub fn states(&self) -> Result<Vec<GameState>> {
        let mut s = GameState::new_game(self.variant, self.seed);
        let mut out = Vec::with_capacity(self.events.len() + 1);
        out.push(s.clone_for_rollout());
        for (t, e) in self.events.iter().enumerate() {
            if s.hand(s.current_player()) != &self.hands[t] {
                return Err(Error::parse(format!("record {}: hand mismatch at turn {t}", self.seed)));
            }
            s.step(e.action)?;
            if s.events().last() != Some(e) {
                return Err(Error::parse(format!("record {}: event {t} does not replay", self.seed)));
            }
            out.push(s.clone_for_rollout());
        }
        Ok(out)
    }

    pub fn to_line(&self) -> String {
        let hands: Vec<String> = self
            .hands
            .iter()
            .map(|h| h.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("."))
            .collect();
        let returns: Vec<String> = self.returns.iter().map(|r| r.to_string()).collect();
        let events: Vec<String> = self.events.iter().map(|e| e.to_line()).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.seed,
            variant_text(&self.variant),
            hands.join(" "),
            returns.join(" "),
            events.join(";")
        )
    }

    pub fn parse_line(line: &str) -> Result<TrajectoryRecord> {
        let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split('\t').collect();
        let [seed, variant, hands, returns, events] = fields[..] else {
            return Err(Error::parse("trajectory line needs 5 tab-separated fields"));
        };
        let seed = seed.parse().map_err(|_| Error::parse(format!("bad seed {seed:?}")))?;
        let variant = parse_variant(variant)?;
        let hands = hands
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|h| h.split('.').map(Card::parse).collect::<Result<Hand>>())
            .collect::<Result<Vec<_>>>()?;
        let returns = returns
            .split(' ')
            .map(|r| r.parse().map_err(|_| Error::parse(format!("bad return {r:?}"))))
            .collect::<Result<Vec<i32>>>()?;
        let events = events
            .split(';')
            .filter(|s| !s.is_empty())
            .map(Event::parse_line)
            .collect::<Result<Vec<_>>>()?;
        if hands.len() != events.len() || returns.len() != events.len() + 1 {
            return Err(Error::parse(format!("record {seed}: field lengths disagree")));
        }
        Ok(TrajectoryRecord { variant, seed, events, hands, returns })
    }
}

fn variant_text(v: &Variant) -> String {
    let counts: Vec<String> = v.rank_counts().iter().map(|c| c.to_string()).collect();
    format!(
        "{}/{}/{}/{}/{}/{}",
        v.num_colors(),
        v.num_ranks(),
        counts.join("-"),
        v.hand_size(),
        v.max_hint_tokens(),
        v.max_lives()
    )
}

fn parse_variant(s: &str) -> Result<Variant> {
    let bad = || Error::parse(format!("bad variant {s:?}"));
    let f: Vec<&str> = s.split('/').collect();
    let [c, r, counts, h, t, l] = f[..] else { return Err(bad()) };
    let num = |x: &str| x.parse::<u8>().map_err(|_| bad());
    let counts = counts.split('-').map(num).collect::<Result<Vec<_>>>()?;
    Variant::new(num(c)?, num(r)?, &counts, num(h)?, num(t)?, num(l)?, 2)
}

/// Bounded FIFO of trajectories with uniform sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayBuffer {
    variant: Variant,
    capacity: usize,
    records: VecDeque<TrajectoryRecord>,
}

const BUFFER_MAGIC: &[u8; 8] = b"HLBSBUF1";
const NONE_CARD: u8 = 0xff;

impl ReplayBuffer {
    pub fn new(variant: Variant, capacity: usize) -> ReplayBuffer {
        ReplayBuffer { variant, capacity: capacity.max(1), records: VecDeque::new() }
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TrajectoryRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter()
    }

    pub fn sample(&self, rng: &mut Rng) -> Option<&TrajectoryRecord> {
        if self.records.is_empty() {
            return None;
        }
        self.records.get(rng.random_range(0..self.records.len()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, capacity: Option<usize>) -> Result<ReplayBuffer> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(TrajectoryRecord::parse_line)
            .collect::<Result<Vec<_>>>()?;
        let variant = records.first().map(|r| r.variant).ok_or_else(|| Error::EmptyData("no trajectories".into()))?;
        let mut buf = ReplayBuffer::new(variant, capacity.unwrap_or(records.len()));
        for r in records {
            if r.variant != variant {
                return Err(Error::parse("trajectories from different variants"));
            }
            buf.push(r);
        }
        Ok(buf)
    }

    /// Columnar binary cache.
    ///
    /// ```text
    /// magic "HLBSBUF1", variant (colors, ranks, hand, hints, lives, counts...),
    /// u32 capacity, u32 records,
    /// seeds   u64 x records
    /// turns   u32 x records
    /// events  8 bytes per event: actor, kind, slot-or-target, value, touched,
    ///         revealed, drawn, 0   (cards packed, 0xff for none)
    /// hands   hand_size bytes per turn, padded with 0xff
    /// returns i16 per turn plus one per record
    /// ```
    pub fn to_binary(&self) -> Vec<u8> {
        let v = &self.variant;
        let mut b = Vec::new();
        b.extend_from_slice(BUFFER_MAGIC);
        b.extend_from_slice(&[
            v.num_colors() as u8,
            v.num_ranks() as u8,
            v.hand_size() as u8,
            v.max_hint_tokens(),
            v.max_lives(),
        ]);
        b.extend_from_slice(v.rank_counts());
        b.extend_from_slice(&(self.capacity as u32).to_le_bytes());
        b.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            b.extend_from_slice(&r.seed.to_le_bytes());
        }
        for r in &self.records {
            b.extend_from_slice(&(r.turns() as u32).to_le_bytes());
        }
        let card = |c: Option<Card>| c.map_or(NONE_CARD, |c| c.packed() as u8);
        for r in &self.records {
            for e in &r.events {
                let (a, val) = match e.action {
                    Action::Play(s) | Action::Discard(s) => (s, 0),
                    Action::HintColor { target, color } => (target, color),
                    Action::HintRank { target, rank } => (target, rank),
                };
                b.extend_from_slice(&[
                    e.actor,
                    e.action.kind().index() as u8,
                    a,
                    val,
                    e.touched,
                    card(e.revealed),
                    card(e.drawn),
                    0,
                ]);
            }
        }
        for r in &self.records {
            for h in &r.hands {
                for i in 0..v.hand_size() {
                    b.push(h.get(i).map_or(NONE_CARD, |c| c.packed() as u8));
                }
            }
        }
        for r in &self.records {
            for &x in &r.returns {
                b.extend_from_slice(&(x as i16).to_le_bytes());
            }
        }
        b
    }

    pub fn from_binary(bytes: &[u8]) -> Result<ReplayBuffer> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<Vec<u8>> {
            let mut v = vec![0u8; n];
            r.read_exact(&mut v).map_err(|_| Error::parse("truncated buffer file"))?;
            Ok(v)
        };
        if take(8)? != BUFFER_MAGIC {
            return Err(Error::parse("not a replay buffer file"));
        }
        let head = take(5)?;
        let counts = take(head[1] as usize)?;
        let variant = Variant::new(head[0], head[1], &counts, head[2], head[3], head[4], 2)?;
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
        let capacity = u32_at(&take(4)?);
        let n = u32_at(&take(4)?);
        let seeds: Vec<u64> = take(8 * n)?.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let turns: Vec<usize> = take(4 * n)?.chunks_exact(4).map(u32_at).collect();
        let total: usize = turns.iter().sum();
        let card = |x: u8| (x != NONE_CARD).then(|| Card::from_packed(x as usize));
        let ev = take(8 * total)?;
        let hands = take(variant.hand_size() * total)?;
        let rets: Vec<i32> = take(2 * (total + n))?
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as i32)
            .collect();
        let mut buf = ReplayBuffer::new(variant, capacity);
        let (mut e_at, mut r_at) = (0, 0);
        for (i, &t) in turns.iter().enumerate() {
            let mut events = Vec::with_capacity(t);
            let mut hs = Vec::with_capacity(t);
            for k in 0..t {
                let x = &ev[8 * (e_at + k)..8 * (e_at + k + 1)];
                let action = match x[1] {
                    0 => Action::Play(x[2]),
                    1 => Action::Discard(x[2]),
                    2 => Action::HintColor { target: x[2], color: x[3] },
                    3 => Action::HintRank { target: x[2], rank: x[3] },
                    _ => return Err(Error::parse("bad action kind in buffer file")),
                };
                events.push(Event {
                    turn: k as u32,
                    actor: x[0],
                    action,
                    revealed: card(x[5]),
                    touched: x[4],
                    drawn: card(x[6]),
                });
                let h = variant.hand_size();
                hs.push(hands[h * (e_at + k)..h * (e_at + k + 1)].iter().filter_map(|&c| card(c)).collect());
            }
            e_at += t;
            let returns = rets[r_at..r_at + t + 1].to_vec();
            r_at += t + 1;
            buf.push(TrajectoryRecord { variant, seed: seeds[i], events, hands: hs, returns });
        }
        Ok(buf)
    }

    /// Writes the binary cache for `.bin` paths and the text format otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            f.write_all(&self.to_binary())?;
        } else {
            f.write_all(self.to_text().as_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ReplayBuffer> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(BUFFER_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            Self::from_text(&String::from_utf8_lossy(&bytes), None)
        }
    }
}

/// `n_games` self-play games; game `i` is dealt from `game_seed(seed, i)`.
pub fn generate_selfplay(blueprint: &dyn Blueprint, variant: Variant, n_games: usize, seed: u64) -> ReplayBuffer {
    generate_selfplay_from(blueprint, variant, seed, 0..n_games as u64)
}

/// Self-play over an explicit range of game indices.
pub fn generate_selfplay_from(
    blueprint: &dyn Blueprint,
    variant: Variant,
    seed: u64,
    indices: std::ops::Range<u64>,
) -> ReplayBuffer {
    let records: Vec<TrajectoryRecord> = indices
        .into_par_iter()
        .map(|i| TrajectoryRecord::play(blueprint, variant, game_seed(seed, i)))
        .collect();
    let mut buf = ReplayBuffer::new(variant, records.len());
    for r in records {
        buf.push(r);
    }
    buf
}
