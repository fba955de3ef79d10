//! One-ply search over blueprint rollouts.
//!
//! For each decision the searcher samples hands for itself from a belief
//! (learned model or exact tracker), imputes full game states, and estimates
//! the return of every legal action by playing the action and then letting
//! both players follow the blueprint. The blueprint action is replaced only
//! when another action beats it by more than `delta`.
//!
//! Worlds are shared across actions: the `k`-th rollout of every action runs
//! in the same imputed world, so differences between actions are measured on
//! common random numbers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::belief::{ExactBeliefTracker, ExactSampler, LearnedBeliefModel, TrackerConfig};
use crate::engine::{Action, Card, GameState, Variant};
pub use crate::learn::{ValueFunction, ValueModel, ZeroValue};
use crate::error::{Error, Result};
use crate::observe::{Observation, PublicState};
use crate::policy::Blueprint;
use crate::rng::{derive_seed, stream, Rng};

const TAG_HANDS: u64 = 0x68_616e_6473;
const TAG_WORLD: u64 = 0x77_6f72_6c64;
const TAG_ROLLOUT: u64 = 0x72_6f6c_6c;
const TAG_DECIDE: u64 = 0x64_6563_6964;

/// Rollout horizon in searcher turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    Turns(u32),
    Full,
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Turns(k) => write!(f, "{k}"),
            Depth::Full => f.write_str("inf"),
        }
    }
}

impl FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Depth> {
        match s {
            "inf" | "infinity" | "full" => Ok(Depth::Full),
            _ => match s.parse::<u32>() {
                Ok(k) if k >= 1 => Ok(Depth::Turns(k)),
                _ => Err(Error::parse(format!("depth must be a positive integer or 'inf', got {s:?}"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeliefMode {
    Learned,
    Exact,
}

impl FromStr for BeliefMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<BeliefMode> {
        match s {
            "learned" => Ok(BeliefMode::Learned),
            "exact" => Ok(BeliefMode::Exact),
            _ => Err(Error::parse(format!("mode must be 'learned' or 'exact', got {s:?}"))),
        }
    }
}

impl fmt::Display for BeliefMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeliefMode::Learned => "learned",
            BeliefMode::Exact => "exact",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UcbConfig {
    pub enabled: bool,
    /// Exploration constant; `f64::INFINITY` disables elimination.
    pub c: f64,
    /// Samples every surviving action needs before anything is eliminated.
    pub min_samples: u64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        UcbConfig { enabled: false, c: 3.0, min_samples: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Total rollouts per decision, shared by all legal actions.
    pub num_rollouts: usize,
    pub depth: Depth,
    pub delta: f64,
    pub ucb: UcbConfig,
    /// Learned mode gives up after this many draws per needed hand.
    pub max_attempts_multiplier: usize,
    pub seed: u64,
    pub mode: BeliefMode,
    /// Run the rollouts of each round on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            num_rollouts: 10_000,
            depth: Depth::Turns(16),
            delta: 0.05,
            ucb: UcbConfig::default(),
            max_attempts_multiplier: 100,
            seed: 0,
            mode: BeliefMode::Learned,
            parallel: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rollouts == 0 {
            return Err(Error::InvalidConfig("num_rollouts must be at least 1".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be non-negative, got {}", self.delta)));
        }
        if self.depth == Depth::Turns(0) {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        if self.ucb.enabled && !(self.ucb.c >= 0.0) {
            return Err(Error::InvalidConfig(format!("UCB constant must be non-negative, got {}", self.ucb.c)));
        }
        if self.max_attempts_multiplier == 0 {
            return Err(Error::InvalidConfig("attempt multiplier must be at least 1".into()));
        }
        Ok(())
    }
}

/// Running statistics of one action's rollout returns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionEstimate {
    pub action: Action,
    pub count: u64,
    pub mean: f64,
    m2: f64,
    pub ucb: f64,
    pub lcb: f64,
    pub eliminated: bool,
}

impl ActionEstimate {
    pub fn new(action: Action) -> ActionEstimate {
        ActionEstimate {
            action,
            count: 0,
            mean: 0.0,
            m2: 0.0,
            ucb: f64::INFINITY,
            lcb: f64::NEG_INFINITY,
            eliminated: false,
        }
    }

    /// Welford update.
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Unbiased sample variance (0 below two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn sem(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    fn set_bounds(&mut self, c: f64) {
        let w = c * self.sem();
        self.ucb = self.mean + w;
        self.lcb = self.mean - w;
    }
}

/// Recomputes bounds and eliminates every surviving action whose upper bound
/// falls below the best lower bound. `protected` (the blueprint action) is
/// never eliminated. Nothing happens until every survivor has at least
/// `max(min_samples, 2)` samples, or when `c` is not finite.
pub fn ucb_update(estimates: &mut [ActionEstimate], c: f64, min_samples: u64, protected: Option<Action>) {
    let live = || estimates.iter().filter(|e| !e.eliminated);
    if !c.is_finite() || live().any(|e| e.count < min_samples.max(2)) {
        return;
    }
    for e in estimates.iter_mut().filter(|e| !e.eliminated) {
        e.set_bounds(c);
    }
    let best_lcb = estimates.iter().filter(|e| !e.eliminated).map(|e| e.lcb).fold(f64::NEG_INFINITY, f64::max);
    for e in estimates.iter_mut().filter(|e| !e.eliminated) {
        if e.ucb < best_lcb && Some(e.action) != protected {
            e.eliminated = true;
        }
    }
}

/// Replaces `searcher`'s hand by `hand` and reshuffles the rest of the
/// searcher's unseen pool into the deck.
pub fn impute(state: &GameState, searcher: usize, hand: &[Card], rng: &mut Rng) -> GameState {
    let mut pool = state.unseen_counts(searcher);
    for &c in hand {
        let ok = pool.remove(c);
        debug_assert!(ok, "imputed hand holds a card outside the unseen pool");
    }
    let mut deck: Vec<Card> = pool.iter().flat_map(|(c, n)| std::iter::repeat_n(c, n as usize)).collect();
    deck.shuffle(rng);
    let mut world = state.clone_for_rollout();
    world.set_hidden(searcher, hand, deck);
    world
}

/// Plays `first` from `world`, then the blueprint for both players until the
/// searcher (the player to move in `world`) has had `depth - 1` more turns or
/// the game ends. A truncated rollout adds `value` of the state reached.
pub fn rollout_return(
    world: &GameState,
    first: Action,
    depth: Depth,
    blueprint: &dyn Blueprint,
    value: &dyn ValueFunction,
    rng: &mut Rng,
) -> f64 {
    let searcher = world.current_player();
    let mut s = world.clone_for_rollout();
    let mut total = s.step_unchecked(first) as f64;
    let mut turns = 1u32;
    while !s.is_terminal() {
        if s.current_player() == searcher {
            if let Depth::Turns(k) = depth {
                if turns >= k {
                    return total + value.value(&s, rng);
                }
            }
            turns += 1;
        }
        let a = blueprint.act_in(&s);
        total += s.step_unchecked(a) as f64;
    }
    total
}

/// Where the searcher's hands come from.
#[derive(Clone, Copy)]
pub enum BeliefSource<'a> {
    Learned(&'a LearnedBeliefModel),
    Exact(&'a ExactBeliefTracker),
}

impl BeliefSource<'_> {
    fn mode(&self) -> BeliefMode {
        match self {
            BeliefSource::Learned(_) => BeliefMode::Learned,
            BeliefSource::Exact(_) => BeliefMode::Exact,
        }
    }
}

enum HandSource<'a> {
    Learned { sampler: crate::belief::BeliefSampler<'a>, attempts: usize },
    Exact(ExactSampler<'a>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub turn: u32,
    pub player: usize,
    pub chosen: Action,
    pub blueprint: Action,
    /// One entry per legal action, in canonical order.
    pub estimates: Vec<ActionEstimate>,
    pub deviated: bool,
    pub fallback: bool,
    pub rollouts: usize,
    pub hand_draws: usize,
    pub elapsed_us: u64,
}

impl SearchReport {
    /// Tab-separated record. Elapsed time is written as `-` unless
    /// `with_time`, so that reports stay reproducible byte for byte.
    pub fn to_line(&self, with_time: bool) -> String {
        let est: Vec<String> = self
            .estimates
            .iter()
            .map(|e| format!("{}={:.6}/{}{}", e.action, e.mean, e.count, if e.eliminated { "x" } else { "" }))
            .collect();
        let elapsed = if with_time { self.elapsed_us.to_string() } else { "-".into() };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.turn,
            self.player,
            self.chosen,
            self.blueprint,
            self.deviated as u8,
            self.fallback as u8,
            elapsed,
            est.join(",")
        )
    }

    pub const HEADER: &'static str = "turn\tplayer\tchosen\tblueprint\tdeviated\tfallback\telapsed_us\testimates";
}

/// Chooses an action for `searcher`, who must be to move in `state`.
///
/// `seed` fixes every random choice, so the result does not depend on
/// `config.parallel` or thread scheduling.
pub fn decide(
    state: &GameState,
    source: BeliefSource<'_>,
    blueprint: &dyn Blueprint,
    value: &dyn ValueFunction,
    config: &SearchConfig,
    seed: u64,
) -> Result<(Action, SearchReport)> {
    config.validate()?;
    if source.mode() != config.mode {
        return Err(Error::InvalidConfig(format!(
            "search configured for {} beliefs but given {}",
            config.mode,
            source.mode()
        )));
    }
    let start = Instant::now();
    let searcher = state.current_player();
    let variant = *state.variant();
    let obs = Observation::new(state, searcher);
    let bp_action = blueprint.act(&obs, &Default::default()).0;
    let mut legal = state.legal_actions()?;
    legal.sort_by_key(|a| a.canonical_index(&variant));
    let mut estimates: Vec<ActionEstimate> = legal.iter().map(|&a| ActionEstimate::new(a)).collect();
    let bp_idx = legal.iter().position(|&a| a == bp_action).expect("blueprint returned an illegal action");

    let mut report = SearchReport {
        turn: state.turn(),
        player: searcher,
        chosen: bp_action,
        blueprint: bp_action,
        estimates: Vec::new(),
        deviated: false,
        fallback: false,
        rollouts: 0,
        hand_draws: 0,
        elapsed_us: 0,
    };

    let mut hands = match source {
        BeliefSource::Learned(m) => {
            if m.variant() != &variant {
                return Err(Error::InvalidConfig("belief model was trained for another variant".into()));
            }
            HandSource::Learned { sampler: m.sampler(&obs), attempts: 0 }
        }
        BeliefSource::Exact(t) => {
            if t.observer() != searcher {
                return Err(Error::InvalidConfig("tracker belongs to the other player".into()));
            }
            HandSource::Exact(t.sampler())
        }
    };
    let mut hand_rng = stream(seed, &[TAG_HANDS]);
    let mut worlds: Vec<GameState> = Vec::new();

    let ucb_active = config.ucb.enabled && config.ucb.c.is_finite();
    let mut done = 0usize;
    'rounds: while done < config.num_rollouts {
        let round: Vec<usize> = (0..estimates.len())
            .filter(|&i| !estimates[i].eliminated)
            .take(config.num_rollouts - done)
            .collect();
        let need = round.iter().map(|&i| estimates[i].count as usize + 1).max().unwrap_or(0);
        while worlds.len() < need {
            let k = worlds.len();
            let hand = match &mut hands {
                HandSource::Exact(s) => s.sample(&mut hand_rng),
                HandSource::Learned { sampler, attempts } => loop {
                    if *attempts >= config.max_attempts_multiplier * (k + 1) {
                        report.fallback = true;
                        report.hand_draws = *attempts;
                        break 'rounds;
                    }
                    *attempts += 1;
                    if let Some(h) = sampler.draw(&mut hand_rng) {
                        break h;
                    }
                },
            };
            worlds.push(impute(state, searcher, &hand, &mut stream(seed, &[TAG_WORLD, k as u64])));
        }
        let run = |&i: &usize| {
            let a = estimates[i].action;
            let k = estimates[i].count;
            let mut rng = stream(seed, &[TAG_ROLLOUT, a.canonical_index(&variant) as u64, k]);
            rollout_return(&worlds[k as usize], a, config.depth, blueprint, value, &mut rng)
        };
        let returns: Vec<f64> = if config.parallel {
            round.par_iter().map(run).collect()
        } else {
            round.iter().map(run).collect()
        };
        for (&i, r) in round.iter().zip(returns) {
            estimates[i].push(r);
        }
        done += round.len();
        if ucb_active {
            ucb_update(&mut estimates, config.ucb.c, config.ucb.min_samples, Some(bp_action));
        }
    }
    report.rollouts = done;
    if let HandSource::Learned { attempts, .. } = hands {
        report.hand_draws = attempts;
    } else {
        report.hand_draws = worlds.len();
    }

    if !report.fallback {
        let mut best = bp_idx;
        for (i, e) in estimates.iter().enumerate() {
            if !e.eliminated && e.count > 0 && (estimates[best].count == 0 || e.mean > estimates[best].mean) {
                best = i;
            }
        }
        // Lowest canonical index among equal means.
        if let Some(i) = estimates.iter().position(|e| !e.eliminated && e.count > 0 && e.mean == estimates[best].mean) {
            best = i;
        }
        let bp_mean = estimates[bp_idx].mean;
        if estimates[bp_idx].count > 0 && estimates[best].mean > bp_mean + config.delta {
            report.chosen = estimates[best].action;
            report.deviated = report.chosen != bp_action;
        }
    }
    report.estimates = estimates;
    report.elapsed_us = start.elapsed().as_micros() as u64;
    Ok((report.chosen, report))
}

/// Value stub that averages `completions` blueprint playouts, each with the
/// deck reshuffled. Hands are left as they are.
pub struct CompletionMeanValue<B> {
    pub blueprint: B,
    pub completions: usize,
}

impl<B: Blueprint> ValueFunction for CompletionMeanValue<B> {
    fn value(&self, state: &GameState, rng: &mut Rng) -> f64 {
        if state.is_terminal() || self.completions == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for _ in 0..self.completions {
            let mut s = state.clone_for_rollout();
            let mut deck = s.deck().to_vec();
            deck.shuffle(rng);
            let p = s.current_player();
            let hand = s.hand(p).clone();
            s.set_hidden(p, &hand, deck);
            while !s.is_terminal() {
                let a = self.blueprint.act_in(&s);
                total += s.step_unchecked(a) as f64;
            }
        }
        total / self.completions as f64
    }
}

/// Which players search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Searchers {
    None,
    One(usize),
    Both,
}

impl Searchers {
    pub fn includes(&self, player: usize) -> bool {
        match *self {
            Searchers::None => false,
            Searchers::One(p) => p == player,
            Searchers::Both => true,
        }
    }
}

impl FromStr for Searchers {
    type Err = Error;

    fn from_str(s: &str) -> Result<Searchers> {
        match s {
            "none" => Ok(Searchers::None),
            "0" => Ok(Searchers::One(0)),
            "1" => Ok(Searchers::One(1)),
            "both" => Ok(Searchers::Both),
            _ => Err(Error::parse(format!("searcher must be 0, 1, both or none, got {s:?}"))),
        }
    }
}

impl fmt::Display for Searchers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Searchers::None => f.write_str("none"),
            Searchers::One(p) => write!(f, "{p}"),
            Searchers::Both => f.write_str("both"),
        }
    }
}

/// Everything a searching player needs besides the game itself.
#[derive(Clone, Copy)]
pub struct SearchSetup<'a> {
    pub blueprint: &'a dyn Blueprint,
    pub value: &'a dyn ValueFunction,
    pub belief: Option<&'a LearnedBeliefModel>,
    pub tracker: TrackerConfig,
    pub config: SearchConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameOutcome {
    pub seed: u64,
    pub score: u32,
    pub turns: u32,
    pub actions: Vec<Action>,
    pub reports: Vec<SearchReport>,
}

impl GameOutcome {
    pub fn deviations(&self) -> usize {
        self.reports.iter().filter(|r| r.deviated).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.reports.iter().filter(|r| r.fallback).count()
    }

    pub fn search_us(&self) -> u64 {
        self.reports.iter().map(|r| r.elapsed_us).sum()
    }
}

/// Plays one game from `seed`. Players in `searchers` use [`decide`], the
/// others follow the blueprint. Errors carry the turn they occurred at.
pub fn play_game_with_search(
    variant: Variant,
    seed: u64,
    searchers: Searchers,
    setup: &SearchSetup<'_>,
) -> Result<GameOutcome> {
    let cfg = &setup.config;
    if searchers != Searchers::None {
        cfg.validate()?;
        match cfg.mode {
            BeliefMode::Learned if setup.belief.is_none() => {
                return Err(Error::InvalidConfig("learned search needs a belief model".into()));
            }
            BeliefMode::Exact if searchers == Searchers::Both => {
                return Err(Error::InvalidConfig(
                    "exact beliefs assume a blueprint partner; use one searcher".into(),
                ));
            }
            _ => {}
        }
    }
    let mut state = GameState::new_game(variant, seed);
    let mut trackers: Vec<(usize, ExactBeliefTracker)> = Vec::new();
    if searchers != Searchers::None && cfg.mode == BeliefMode::Exact {
        for p in 0..2 {
            if searchers.includes(p) {
                let t = ExactBeliefTracker::new(&Observation::new(&state, p), setup.blueprint, setup.tracker)
                    .map_err(|e| at(0, e))?;
                trackers.push((p, t));
            }
        }
    }
    let mut actions = Vec::new();
    let mut reports = Vec::new();
    while !state.is_terminal() {
        let p = state.current_player();
        let turn = state.turn();
        let action = if searchers.includes(p) {
            let source = match cfg.mode {
                BeliefMode::Learned => BeliefSource::Learned(setup.belief.expect("checked above")),
                BeliefMode::Exact => {
                    BeliefSource::Exact(&trackers.iter().find(|(q, _)| *q == p).expect("tracker per searcher").1)
                }
            };
            let dseed = decision_seed(cfg.seed, seed, turn);
            let (a, r) = decide(&state, source, setup.blueprint, setup.value, cfg, dseed).map_err(|e| at(turn, e))?;
            reports.push(r);
            a
        } else {
            setup.blueprint.act_in(&state)
        };
        let pre = (!trackers.is_empty()).then(|| PublicState::from_state(&state));
        state.step(action).map_err(|e| at(turn, e))?;
        actions.push(action);
        if let Some(pre) = pre {
            let event = *state.last_event().expect("event after a step");
            for (q, t) in trackers.iter_mut() {
                t.update(setup.blueprint, &pre, &event, &Observation::new(&state, *q)).map_err(|e| at(turn, e))?;
            }
        }
    }
    Ok(GameOutcome { seed, score: state.score(), turns: state.turn(), actions, reports })
}

/// Seed of the search at `turn` of the game dealt from `game_seed`.
pub fn decision_seed(base: u64, game_seed: u64, turn: u32) -> u64 {
    derive_seed(base, &[TAG_DECIDE, game_seed, turn as u64])
}

fn at(turn: u32, e: Error) -> Error {
    match e {
        e @ Error::AtTurn { .. } => e,
        e => Error::AtTurn { turn, source: Box::new(e) },
    }
}

/// Pure blueprint self-play score.
pub fn blueprint_score(blueprint: &dyn Blueprint, variant: Variant, seed: u64) -> u32 {
    let mut s = GameState::new_game(variant, seed);
    while !s.is_terminal() {
        let a = blueprint.act_in(&s);
        s.step_unchecked(a);
    }
    s.score()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{generate_selfplay, train_belief, TrainConfig};
    use crate::policy::RuleBlueprint;

    fn mid(v: Variant, seed: u64, turns: usize) -> GameState {
        let mut s = GameState::new_game(v, seed);
        for _ in 0..turns {
            if s.is_terminal() {
                break;
            }
            let a = RuleBlueprint::V1.act_in(&s);
            s.step(a).unwrap();
        }
        s
    }

    fn small(mode: BeliefMode) -> SearchConfig {
        SearchConfig { num_rollouts: 200, depth: Depth::Full, mode, seed: 3, ..Default::default() }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [3.0, -1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let mut e = ActionEstimate::new(Action::Play(0));
        xs.iter().for_each(|&x| e.push(x));
        let m = xs.iter().sum::<f64>() / 8.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 7.0;
        assert!((e.mean - m).abs() < 1e-12);
        assert!((e.variance() - v).abs() < 1e-12);
    }

    fn est(a: Action, xs: &[f64]) -> ActionEstimate {
        let mut e = ActionEstimate::new(a);
        xs.iter().for_each(|&x| e.push(x));
        e
    }

    #[test]
    fn ucb_eliminates_disjoint_intervals_only() {
        let lo = est(Action::Play(0), &[0.0, 0.1, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1]);
        let hi = est(Action::Play(1), &[5.0, 5.1, 5.0, 5.1, 5.0, 5.1, 5.0, 5.1]);
        let mut v = vec![lo, hi];
        ucb_update(&mut v, 3.0, 8, None);
        assert!(v[0].eliminated && !v[1].eliminated);

        let mut v = vec![lo, hi];
        ucb_update(&mut v, 3.0, 8, Some(Action::Play(0)));
        assert!(!v[0].eliminated, "blueprint action is immune");

        let same = est(Action::Play(2), &[1.0; 8]);
        let mut v = vec![same, ActionEstimate { action: Action::Play(3), ..same }];
        ucb_update(&mut v, 3.0, 8, None);
        assert!(v.iter().all(|e| !e.eliminated));

        let mut v = vec![lo, hi];
        ucb_update(&mut v, f64::INFINITY, 8, None);
        assert!(v.iter().all(|e| !e.eliminated));

        let mut v = vec![est(Action::Play(0), &[0.0, 0.0]), est(Action::Play(1), &[9.0, 9.0])];
        ucb_update(&mut v, 3.0, 8, None);
        assert!(v.iter().all(|e| !e.eliminated), "too few samples");
    }

    #[test]
    fn imputed_worlds_conserve_cards() {
        let v = Variant::standard();
        for seed in 0..20 {
            let s = mid(v, seed, 7);
            if s.is_terminal() {
                continue;
            }
            let p = s.current_player();
            let mut rng = stream(seed, &[]);
            let w = impute(&s, p, &s.hand(p).clone(), &mut rng);
            assert!(w.conserves_cards());
            assert_eq!(w.deck_size(), s.deck_size());
            assert_eq!(w.hand(1 - p), s.hand(1 - p));
        }
    }

    #[test]
    fn full_depth_rollout_in_true_world_equals_score_gain() {
        let v = Variant::standard();
        let s = mid(v, 5, 6);
        let a = RuleBlueprint::V1.act_in(&s);
        let r = rollout_return(&s, a, Depth::Full, &RuleBlueprint::V1, &ZeroValue, &mut stream(0, &[]));
        let mut t = s.clone();
        while !t.is_terminal() {
            let a = RuleBlueprint::V1.act_in(&t);
            t.step(a).unwrap();
        }
        assert_eq!(r, t.score() as f64 - s.score() as f64);
    }

    #[test]
    fn depth_one_stops_at_the_searchers_next_turn() {
        struct Marker;
        impl ValueFunction for Marker {
            fn value(&self, state: &GameState, _rng: &mut Rng) -> f64 {
                1000.0 + state.turn() as f64
            }
        }
        let s = mid(Variant::standard(), 2, 3);
        let a = RuleBlueprint::V1.act_in(&s);
        let r = rollout_return(&s, a, Depth::Turns(1), &RuleBlueprint::V1, &Marker, &mut stream(0, &[]));
        let (s1, r1) = s.apply(a).unwrap();
        let a2 = RuleBlueprint::V1.act_in(&s1);
        let (_, r2) = s1.apply(a2).unwrap();
        assert_eq!(r, (r1 + r2) as f64 + 1000.0 + (s.turn() + 2) as f64);
    }

    fn mini_model() -> LearnedBeliefModel {
        let buf = generate_selfplay(&RuleBlueprint::V1, Variant::mini(), 200, 9);
        train_belief(&buf, &TrainConfig { steps: 300, ..Default::default() }).unwrap().0
    }

    #[test]
    fn infinite_delta_always_returns_the_blueprint_action() {
        let m = mini_model();
        let cfg = SearchConfig { delta: f64::INFINITY, ..small(BeliefMode::Learned) };
        for seed in 0..10 {
            let s = mid(Variant::mini(), seed, 2);
            if s.is_terminal() {
                continue;
            }
            let (a, r) = decide(&s, BeliefSource::Learned(&m), &RuleBlueprint::V1, &ZeroValue, &cfg, seed).unwrap();
            assert_eq!(a, RuleBlueprint::V1.act_in(&s));
            assert!(!r.deviated);
        }
    }

    #[test]
    fn decide_is_deterministic_and_parallel_invariant() {
        let m = mini_model();
        let s = mid(Variant::mini(), 4, 2);
        let cfg = small(BeliefMode::Learned);
        let (_, mut a) = decide(&s, BeliefSource::Learned(&m), &RuleBlueprint::V1, &ZeroValue, &cfg, 11).unwrap();
        let par = SearchConfig { parallel: true, ..cfg };
        let (_, mut b) = decide(&s, BeliefSource::Learned(&m), &RuleBlueprint::V1, &ZeroValue, &par, 11).unwrap();
        a.elapsed_us = 0;
        b.elapsed_us = 0;
        assert_eq!(a, b);
        assert_eq!(a.rollouts, 200);
        let counts: Vec<u64> = a.estimates.iter().map(|e| e.count).collect();
        let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "equal split {counts:?}");
    }

    #[test]
    fn rollout_budget_smaller_than_action_count() {
        let s = mid(Variant::standard(), 1, 0);
        let t = ExactBeliefTracker::new(&Observation::new(&s, 0), &RuleBlueprint::V1, TrackerConfig::default()).unwrap();
        let cfg = SearchConfig { num_rollouts: 3, ..small(BeliefMode::Exact) };
        let (a, r) = decide(&s, BeliefSource::Exact(&t), &RuleBlueprint::V1, &ZeroValue, &cfg, 0).unwrap();
        assert_eq!(r.rollouts, 3);
        assert!(s.legal_actions().unwrap().contains(&a));
    }

    #[test]
    fn searcher_none_is_blueprint_play() {
        let setup = SearchSetup {
            blueprint: &RuleBlueprint::V1,
            value: &ZeroValue,
            belief: None,
            tracker: TrackerConfig::default(),
            config: SearchConfig::default(),
        };
        for seed in 0..5 {
            let g = play_game_with_search(Variant::standard(), seed, Searchers::None, &setup).unwrap();
            assert_eq!(g.score, blueprint_score(&RuleBlueprint::V1, Variant::standard(), seed));
            assert!(g.reports.is_empty());
        }
    }

    #[test]
    fn exact_search_game_on_mini_completes() {
        let setup = SearchSetup {
            blueprint: &RuleBlueprint::V1,
            value: &ZeroValue,
            belief: None,
            tracker: TrackerConfig::default(),
            config: small(BeliefMode::Exact),
        };
        let g = play_game_with_search(Variant::mini(), 3, Searchers::One(0), &setup).unwrap();
        assert!(!g.reports.is_empty());
        assert!(g.reports.iter().all(|r| r.player == 0 && !r.fallback));
    }

    #[test]
    fn tracker_overflow_carries_turn() {
        let setup = SearchSetup {
            blueprint: &RuleBlueprint::V1,
            value: &ZeroValue,
            belief: None,
            tracker: TrackerConfig { bound: 1000 },
            config: small(BeliefMode::Exact),
        };
        let e = play_game_with_search(Variant::standard(), 0, Searchers::One(1), &setup).unwrap_err();
        assert!(e.is_belief_space_too_large());
        assert!(matches!(e, Error::AtTurn { turn: 0, .. }));
    }

    #[test]
    fn report_line_has_no_time_unless_asked() {
        let s = mid(Variant::mini(), 0, 0);
        let t = ExactBeliefTracker::new(&Observation::new(&s, 0), &RuleBlueprint::V1, TrackerConfig::default()).unwrap();
        let (_, r) = decide(&s, BeliefSource::Exact(&t), &RuleBlueprint::V1, &ZeroValue, &small(BeliefMode::Exact), 0).unwrap();
        let line = r.to_line(false);
        assert_eq!(line.split('\t').count(), SearchReport::HEADER.split('\t').count());
        assert_eq!(line.split('\t').nth(6), Some("-"));
    }
}
