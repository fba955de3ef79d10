//! C interface to the hlbs engine, belief models and search.
//!
//! Objects cross the boundary as opaque pointers created by `*_new` / `*_load`
//! and released with the matching `*_free`. Every fallible call returns an
//! [`HlbsStatus`]; the message of the most recent failure on the calling
//! thread is available from [`hlbs_last_error`]. Actions are passed as their
//! canonical index (plays, discards, color hints, rank hints).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hlbs::belief::{ExactBeliefTracker, LearnedBeliefModel, TrackerConfig};
use hlbs::engine::{Action, GameState, Variant};
use hlbs::learn::{ValueModel, ZeroValue};
use hlbs::observe::{Observation, PublicState};
use hlbs::policy::{Blueprint, RuleBlueprint};
use hlbs::search::{decide, decision_seed, BeliefMode, BeliefSource, Depth, SearchConfig, UcbConfig};
use hlbs::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlbsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidVariant = 3,
    IllegalAction = 4,
    GameOver = 5,
    BeliefSpaceTooLarge = 6,
    InvalidConfig = 7,
    Parse = 8,
    Io = 9,
    BufferTooSmall = 10,
    Internal = 11,
}

/// Values of [`HlbsSearchConfig::mode`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlbsBeliefMode {
    Learned = 0,
    Exact = 1,
}

/// Search parameters; fill with [`hlbs_search_config_default`] first.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HlbsSearchConfig {
    pub num_rollouts: u32,
    /// Searcher turns before bootstrapping; 0 plays every rollout to the end.
    pub depth: u32,
    pub delta: f64,
    pub ucb_enabled: bool,
    pub ucb_c: f64,
    pub ucb_min_samples: u32,
    pub max_attempts_multiplier: u32,
    /// An [`HlbsBeliefMode`] value.
    pub mode: u32,
    pub seed: u64,
}

/// Outcome of one search decision.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct HlbsDecision {
    pub action: u32,
    pub blueprint_action: u32,
    pub deviated: bool,
    pub fallback: bool,
    pub rollouts: u64,
}

/// Opaque game handle.
pub struct HlbsGame {
    state: GameState,
    seed: u64,
    blueprint: RuleBlueprint,
    trackers: [Option<ExactBeliefTracker>; 2],
}

/// Opaque learned belief model.
pub struct HlbsBelief(LearnedBeliefModel);

/// Opaque value model.
pub struct HlbsValue(ValueModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HlbsStatus {
    match e.root() {
        Error::InvalidVariant(_) => HlbsStatus::InvalidVariant,
        Error::IllegalAction { .. } => HlbsStatus::IllegalAction,
        Error::GameOver => HlbsStatus::GameOver,
        Error::BeliefSpaceTooLarge { .. } => HlbsStatus::BeliefSpaceTooLarge,
        Error::InvalidConfig(_) => HlbsStatus::InvalidConfig,
        Error::Parse(_) | Error::EncoderMismatch { .. } => HlbsStatus::Parse,
        Error::Io(_) => HlbsStatus::Io,
        _ => HlbsStatus::Internal,
    }
}

struct Fail(HlbsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: HlbsStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, recording failures and catching panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HlbsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlbsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HlbsStatus::Internal
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(HlbsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(HlbsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(HlbsStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(HlbsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return fail(HlbsStatus::NullPointer, format!("{what} is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_out<T: Copy>(items: &[T], out: *mut T, cap: usize, len: *mut usize) -> Result<(), Fail> {
    write_out(len, items.len(), "length output")?;
    if items.len() > cap {
        return fail(HlbsStatus::BufferTooSmall, format!("need room for {} items, got {cap}", items.len()));
    }
    if !items.is_empty() {
        if out.is_null() {
            return fail(HlbsStatus::NullPointer, "output buffer is null");
        }
        std::ptr::copy_nonoverlapping(items.as_ptr(), out, items.len());
    }
    Ok(())
}

fn index_of(state: &GameState, a: Action) -> u32 {
    a.canonical_index(state.variant()) as u32
}

fn action_at(state: &GameState, index: u32) -> Result<Action, Fail> {
    Action::from_canonical_index(state.variant(), state.current_player() as u8, index as usize)
        .ok_or_else(|| Fail(HlbsStatus::InvalidArgument, format!("no action with index {index}")))
}

// ---------------------------------------------------------------------------
// library

/// Version string, valid for the life of the program.
#[no_mangle]
pub extern "C" fn hlbs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread (empty if none). The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hlbs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// games

/// Deals a new game of the named variant (`standard`, `6card`, `7card`,
/// `mini`, or a path to a TOML file).
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_new(variant: *const c_char, seed: u64, out: *mut *mut HlbsGame) -> HlbsStatus {
    guard(|| {
        let v = Variant::load(text(variant, "variant")?)?;
        let game = HlbsGame {
            state: GameState::new_game(v, seed),
            seed,
            blueprint: RuleBlueprint::V1,
            trackers: [None, None],
        };
        write_out(out, Box::into_raw(Box::new(game)), "game output")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_game_free(game: *mut HlbsGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Selects the blueprint (`rule-v1` or `rule-weak-v1`) used by
/// [`hlbs_game_blueprint_action`], exact tracking and search. Only allowed
/// before the first move.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_set_blueprint(game: *mut HlbsGame, name: *const c_char) -> HlbsStatus {
    guard(|| {
        let g = borrow_mut(game, "game")?;
        if g.state.turn() > 0 {
            return fail(HlbsStatus::InvalidArgument, "the blueprint can only change before the first move");
        }
        g.blueprint = RuleBlueprint::by_name(text(name, "blueprint")?)?;
        g.trackers = [None, None];
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_game_is_terminal(game: *const HlbsGame, out: *mut bool) -> HlbsStatus {
    guard(|| write_out(out, borrow(game, "game")?.state.is_terminal(), "output"))
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_game_score(game: *const HlbsGame, out: *mut u32) -> HlbsStatus {
    guard(|| write_out(out, borrow(game, "game")?.state.score(), "output"))
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_game_turn(game: *const HlbsGame, out: *mut u32) -> HlbsStatus {
    guard(|| write_out(out, borrow(game, "game")?.state.turn(), "output"))
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_game_current_player(game: *const HlbsGame, out: *mut u32) -> HlbsStatus {
    guard(|| write_out(out, borrow(game, "game")?.state.current_player() as u32, "output"))
}

/// Hint tokens, life tokens and cards left in the deck.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_tokens(
    game: *const HlbsGame,
    hints: *mut u32,
    lives: *mut u32,
    deck: *mut u32,
) -> HlbsStatus {
    guard(|| {
        let s = &borrow(game, "game")?.state;
        write_out(hints, s.hint_tokens() as u32, "hints output")?;
        write_out(lives, s.life_tokens() as u32, "lives output")?;
        write_out(deck, s.deck_size() as u32, "deck output")
    })
}

/// Firework height per color.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_fireworks(
    game: *const HlbsGame,
    out: *mut u8,
    cap: usize,
    len: *mut usize,
) -> HlbsStatus {
    guard(|| {
        let s = &borrow(game, "game")?.state;
        copy_out(&s.fireworks()[..s.variant().num_colors()], out, cap, len)
    })
}

/// Cards in `player`'s hand, oldest first, packed as `color << 3 | rank`.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_hand(
    game: *const HlbsGame,
    player: u32,
    out: *mut u8,
    cap: usize,
    len: *mut usize,
) -> HlbsStatus {
    guard(|| {
        let s = &borrow(game, "game")?.state;
        if player > 1 {
            return fail(HlbsStatus::InvalidArgument, format!("no player {player}"));
        }
        let cards: Vec<u8> = s.hand(player as usize).iter().map(|c| c.packed() as u8).collect();
        copy_out(&cards, out, cap, len)
    })
}

/// Canonical indices of the current player's legal actions.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_legal_actions(
    game: *const HlbsGame,
    out: *mut u32,
    cap: usize,
    len: *mut usize,
) -> HlbsStatus {
    guard(|| {
        let s = &borrow(game, "game")?.state;
        let legal: Vec<u32> = s.legal_actions()?.into_iter().map(|a| index_of(s, a)).collect();
        copy_out(&legal, out, cap, len)
    })
}

/// Writes the text form of an action (`play:0`, `hint-rank:1:3`, ...) as a
/// NUL-terminated string. `len` receives the length without the NUL.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_action_name(
    game: *const HlbsGame,
    action: u32,
    out: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> HlbsStatus {
    guard(|| {
        let s = &borrow(game, "game")?.state;
        let name = action_at(s, action)?.to_string();
        write_out(len, name.len(), "length output")?;
        if name.len() + 1 > cap {
            return fail(HlbsStatus::BufferTooSmall, format!("need {} bytes", name.len() + 1));
        }
        if out.is_null() {
            return fail(HlbsStatus::NullPointer, "output buffer is null");
        }
        std::ptr::copy_nonoverlapping(name.as_ptr() as *const c_char, out, name.len());
        out.add(name.len()).write(0);
        Ok(())
    })
}

/// The blueprint's move in the current state.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_blueprint_action(game: *const HlbsGame, out: *mut u32) -> HlbsStatus {
    guard(|| {
        let g = borrow(game, "game")?;
        if g.state.is_terminal() {
            return fail(HlbsStatus::GameOver, "game over");
        }
        write_out(out, index_of(&g.state, g.blueprint.act_in(&g.state)), "output")
    })
}

/// Plays `action` for the current player and writes the reward. Exact belief
/// trackers are advanced too; if one cannot follow the move (the partner left
/// the blueprint) it is dropped and the call still succeeds.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_step(game: *mut HlbsGame, action: u32, reward: *mut i32) -> HlbsStatus {
    guard(|| {
        let g = borrow_mut(game, "game")?;
        if g.state.is_terminal() {
            return fail(HlbsStatus::GameOver, "game over");
        }
        let a = action_at(&g.state, action)?;
        let pre = PublicState::from_state(&g.state);
        let r = g.state.step(a)?;
        let event = *g.state.last_event().expect("event after a step");
        for (p, slot) in g.trackers.iter_mut().enumerate() {
            if let Some(t) = slot {
                if t.update(&g.blueprint, &pre, &event, &Observation::new(&g.state, p)).is_err() {
                    *slot = None;
                }
            }
        }
        if !reward.is_null() {
            reward.write(r);
        }
        Ok(())
    })
}

/// Starts exact belief tracking for `player`. Must be called before the first
/// move; `bound` caps the number of candidate hands (0 for the default).
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_track_exact(game: *mut HlbsGame, player: u32, bound: usize) -> HlbsStatus {
    guard(|| {
        let g = borrow_mut(game, "game")?;
        if player > 1 {
            return fail(HlbsStatus::InvalidArgument, format!("no player {player}"));
        }
        if g.state.turn() > 0 {
            return fail(HlbsStatus::InvalidArgument, "exact tracking must start before the first move");
        }
        let config = if bound == 0 { TrackerConfig::default() } else { TrackerConfig { bound } };
        let obs = Observation::new(&g.state, player as usize);
        g.trackers[player as usize] = Some(ExactBeliefTracker::new(&obs, &g.blueprint, config)?);
        Ok(())
    })
}

/// Whether `player` still has an exact tracker.
#[no_mangle]
pub unsafe extern "C" fn hlbs_game_has_exact(game: *const HlbsGame, player: u32, out: *mut bool) -> HlbsStatus {
    guard(|| {
        let g = borrow(game, "game")?;
        let has = g.trackers.get(player as usize).is_some_and(|t| t.is_some());
        write_out(out, has, "output")
    })
}

// ---------------------------------------------------------------------------
// models

#[no_mangle]
pub unsafe extern "C" fn hlbs_belief_load(path: *const c_char, out: *mut *mut HlbsBelief) -> HlbsStatus {
    guard(|| {
        let m = LearnedBeliefModel::load(Path::new(text(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(HlbsBelief(m))), "model output")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_belief_free(model: *mut HlbsBelief) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_value_load(path: *const c_char, out: *mut *mut HlbsValue) -> HlbsStatus {
    guard(|| {
        let m = ValueModel::load(Path::new(text(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(HlbsValue(m))), "model output")
    })
}

#[no_mangle]
pub unsafe extern "C" fn hlbs_value_free(model: *mut HlbsValue) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// search

#[no_mangle]
pub unsafe extern "C" fn hlbs_search_config_default(out: *mut HlbsSearchConfig) -> HlbsStatus {
    guard(|| {
        let d = SearchConfig::default();
        let c = HlbsSearchConfig {
            num_rollouts: d.num_rollouts as u32,
            depth: match d.depth {
                Depth::Turns(k) => k,
                Depth::Full => 0,
            },
            delta: d.delta,
            ucb_enabled: d.ucb.enabled,
            ucb_c: d.ucb.c,
            ucb_min_samples: d.ucb.min_samples as u32,
            max_attempts_multiplier: d.max_attempts_multiplier as u32,
            mode: HlbsBeliefMode::Learned as u32,
            seed: d.seed,
        };
        write_out(out, c, "config output")
    })
}

/// Searches the current player's move. `belief` is required in learned mode
/// and ignored in exact mode (which needs [`hlbs_game_track_exact`]);
/// `value` is required when `config.depth > 0`. The game is not advanced.
#[no_mangle]
pub unsafe extern "C" fn hlbs_search_decide(
    game: *const HlbsGame,
    belief: *const HlbsBelief,
    value: *const HlbsValue,
    config: *const HlbsSearchConfig,
    out: *mut HlbsDecision,
) -> HlbsStatus {
    guard(|| {
        let g = borrow(game, "game")?;
        let c = *borrow(config, "config")?;
        if g.state.is_terminal() {
            return fail(HlbsStatus::GameOver, "game over");
        }
        let cfg = SearchConfig {
            num_rollouts: c.num_rollouts as usize,
            depth: if c.depth == 0 { Depth::Full } else { Depth::Turns(c.depth) },
            delta: c.delta,
            ucb: UcbConfig { enabled: c.ucb_enabled, c: c.ucb_c, min_samples: c.ucb_min_samples as u64 },
            max_attempts_multiplier: c.max_attempts_multiplier as usize,
            seed: c.seed,
            mode: match c.mode {
                m if m == HlbsBeliefMode::Learned as u32 => BeliefMode::Learned,
                m if m == HlbsBeliefMode::Exact as u32 => BeliefMode::Exact,
                m => return fail(HlbsStatus::InvalidArgument, format!("unknown belief mode {m}")),
            },
            parallel: false,
        };
        let p = g.state.current_player();
        let source = match cfg.mode {
            BeliefMode::Learned => BeliefSource::Learned(
                &belief.as_ref().ok_or_else(|| Fail(HlbsStatus::NullPointer, "learned search needs a belief model".into()))?.0,
            ),
            BeliefMode::Exact => BeliefSource::Exact(g.trackers[p].as_ref().ok_or_else(|| {
                Fail(HlbsStatus::InvalidConfig, format!("no exact tracker for player {p}"))
            })?),
        };
        let zero = ZeroValue;
        let value_fn: &dyn hlbs::learn::ValueFunction = match (value.as_ref(), cfg.depth) {
            (Some(v), _) => &v.0,
            (None, Depth::Full) => &zero,
            (None, Depth::Turns(_)) => {
                return fail(HlbsStatus::InvalidConfig, "bootstrapped search needs a value model");
            }
        };
        let seed = decision_seed(cfg.seed, g.seed, g.state.turn());
        let (a, report) = decide(&g.state, source, &g.blueprint, value_fn, &cfg, seed)?;
        let d = HlbsDecision {
            action: index_of(&g.state, a),
            blueprint_action: index_of(&g.state, report.blueprint),
            deviated: report.deviated,
            fallback: report.fallback,
            rollouts: report.rollouts as u64,
        };
        write_out(out, d, "decision output")
    })
}
