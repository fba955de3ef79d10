#![allow(dead_code)]

use std::collections::HashMap;

use hlbs::engine::{Card, GameState, Variant};
use hlbs::observe::Observation;
use hlbs::policy::Blueprint;

/// Every distinct ordering of the full deck (multiset permutations). Under a
/// uniform shuffle each one is equally likely.
pub fn all_deals(variant: &Variant) -> Vec<Vec<Card>> {
    let mut counts: Vec<(Card, u8)> = variant.full_deck().iter().collect();
    let n = variant.deck_size();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(counts: &mut [(Card, u8)], n: usize, cur: &mut Vec<Card>, out: &mut Vec<Vec<Card>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..counts.len() {
            if counts[i].1 > 0 {
                counts[i].1 -= 1;
                cur.push(counts[i].0);
                rec(counts, n, cur, out);
                cur.pop();
                counts[i].1 += 1;
            }
        }
    }
    rec(&mut counts, n, &mut cur, &mut out);
    out
}

/// Posterior over the observer's own hand at every turn of the blueprint
/// game dealt from `seed`, by simulating every deal and keeping those whose
/// observation sequence matches the real one.
pub fn brute_force_posteriors(
    variant: Variant,
    deals: &[Vec<Card>],
    blueprint: &dyn Blueprint,
    seed: u64,
    observer: usize,
) -> Vec<HashMap<Vec<Card>, f64>> {
    let mut truth = vec![GameState::new_game(variant, seed)];
    while !truth.last().unwrap().is_terminal() {
        let s = truth.last().unwrap();
        let a = blueprint.act_in(s);
        truth.push(s.apply(a).unwrap().0);
    }
    let views: Vec<Observation> = truth.iter().map(|s| Observation::new(s, observer)).collect();
    let h = variant.hand_size();
    let partner = &truth[0].hand(1 - observer)[..];
    let mut counts = vec![HashMap::<Vec<Card>, f64>::new(); truth.len()];
    for d in deals {
        let dealt = if observer == 0 { &d[h..2 * h] } else { &d[..h] };
        if dealt != partner {
            continue;
        }
        let mut g = GameState::from_deck_order(variant, d).unwrap();
        for (t, view) in views.iter().enumerate() {
            if Observation::new(&g, observer) != *view {
                break;
            }
            *counts[t].entry(g.hand(observer).to_vec()).or_default() += 1.0;
            if g.is_terminal() {
                break;
            }
            let a = blueprint.act_in(&g);
            g.step(a).unwrap();
        }
    }
    for c in counts.iter_mut() {
        let total: f64 = c.values().sum();
        c.values_mut().for_each(|v| *v /= total);
    }
    counts
}

/// Plays the blueprint game of `seed` to its end and returns every state.
pub fn blueprint_states(variant: Variant, blueprint: &dyn Blueprint, seed: u64) -> Vec<GameState> {
    let mut out = vec![GameState::new_game(variant, seed)];
    while !out.last().unwrap().is_terminal() {
        let s = out.last().unwrap();
        let a = blueprint.act_in(s);
        out.push(s.apply(a).unwrap().0);
    }
    out
}

/// Largest absolute difference between the exact tracker's posterior and the
/// brute-force posterior over every turn of one game, plus the number of
/// turns compared.
pub fn tracker_max_error(
    variant: Variant,
    deals: &[Vec<Card>],
    blueprint: &dyn Blueprint,
    seed: u64,
    observer: usize,
) -> (f64, usize) {
    use hlbs::belief::{ExactBeliefTracker, TrackerConfig};
    use hlbs::observe::PublicState;

    let brute = brute_force_posteriors(variant, deals, blueprint, seed, observer);
    let states = blueprint_states(variant, blueprint, seed);
    let mut tracker =
        ExactBeliefTracker::new(&Observation::new(&states[0], observer), blueprint, TrackerConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for (t, s) in states.iter().enumerate() {
        if t > 0 {
            let pre = PublicState::from_state(&states[t - 1]);
            let event = *s.last_event().unwrap();
            tracker.update(blueprint, &pre, &event, &Observation::new(s, observer)).unwrap();
        }
        let w = tracker.weights();
        let mut seen = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let hand = tracker.candidate(i).to_vec();
            let b = brute[t].get(&hand).copied().unwrap_or(0.0);
            seen += b;
            worst = worst.max((wi - b).abs());
        }
        // Mass the brute force puts on hands the tracker dropped.
        worst = worst.max((1.0 - seen).abs());
    }
    (worst, states.len())
}

/// Worst per-coordinate relative error between the analytic gradient of the
/// belief chain loss and central finite differences.
pub fn gradient_check(model: &mut hlbs::belief::LearnedBeliefModel, obs: &Observation, hand: &[Card]) -> f64 {
    let base = model.sparse_base(obs);
    let unseen = obs.unseen_counts();
    let mut grad = vec![0.0; model.params().len()];
    model.chain_loss(&base, &unseen, hand, Some((&mut grad, 1.0)));
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..grad.len() {
        let w = model.params()[i];
        model.params_mut()[i] = w + h;
        let up = model.chain_loss(&base, &unseen, hand, None);
        model.params_mut()[i] = w - h;
        let down = model.chain_loss(&base, &unseen, hand, None);
        model.params_mut()[i] = w;
        let fd = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((grad[i] - fd).abs() / scale);
    }
    worst
}

/// A small belief model with random weights.
pub fn random_model(variant: Variant, seed: u64, scale: f64) -> hlbs::belief::LearnedBeliefModel {
    use rand::Rng as _;
    let mut m = hlbs::belief::LearnedBeliefModel::zeros(variant);
    let mut rng = hlbs::rng::stream(seed, &[17]);
    for w in m.params_mut() {
        *w = rng.random_range(-scale..scale);
    }
    m
}

/// State after `turns` blueprint moves (or the last non-terminal one).
pub fn blueprint_state_at(variant: Variant, blueprint: &dyn Blueprint, seed: u64, turns: usize) -> GameState {
    let states = blueprint_states(variant, blueprint, seed);
    let last_live = states.len().saturating_sub(2);
    states[turns.min(last_live)].clone()
}

/// Uniformly random legal play for `steps` actions over as many games as
/// needed. Checks card conservation after every step, that rewards add up to
/// the final score, that bomb-outs score zero and that an emptied deck
/// leaves exactly one more turn per player. Returns the number of games.
pub fn random_playout_fuzz(variant: Variant, seed: u64, steps: usize) -> Result<usize, String> {
    use rand::seq::IndexedRandom;
    let mut rng = hlbs::rng::stream(seed, &[0x66757a7a]);
    let mut done = 0usize;
    let mut games = 0usize;
    while done < steps {
        let mut s = GameState::new_game(variant, hlbs::rng::game_seed(seed, games as u64));
        games += 1;
        let mut total = 0i64;
        let mut emptied_at: Option<u32> = None;
        while !s.is_terminal() {
            let legal = s.legal_actions().map_err(|e| e.to_string())?;
            let a = *legal.choose(&mut rng).ok_or("no legal action")?;
            total += s.step(a).map_err(|e| e.to_string())? as i64;
            done += 1;
            if !s.conserves_cards() {
                return Err(format!("card conservation broken at turn {}", s.turn()));
            }
            if s.deck_size() == 0 && emptied_at.is_none() {
                emptied_at = Some(s.turn());
            }
        }
        if total != s.score() as i64 {
            return Err(format!("rewards sum to {total}, score is {}", s.score()));
        }
        if s.life_tokens() == 0 {
            if s.score() != 0 {
                return Err("bomb-out did not score zero".into());
            }
        } else if s.score() != variant.max_score() {
            let Some(t) = emptied_at else {
                return Err("game ended with cards left and no bomb-out or perfect score".into());
            };
            if s.turn() != t + variant.num_players() as u32 {
                return Err(format!("deck emptied at turn {t} but the game ended at {}", s.turn()));
            }
        }
    }
    Ok(games)
}

/// Quickly trained belief model for tests.
pub fn quick_model(variant: Variant, games: usize, steps: usize) -> hlbs::belief::LearnedBeliefModel {
    use hlbs::learn::{generate_selfplay, train_belief, TrainConfig};
    let buf = generate_selfplay(&hlbs::policy::RuleBlueprint::V1, variant, games, 1234);
    let cfg = TrainConfig { steps, lr: 0.01, eval_every: 100, ..Default::default() };
    train_belief(&buf, &cfg).unwrap().0
}

/// Every arrangement of the multiset `cards` that fits the slot masks.
pub fn arrangements(cards: &[Card], masks: &[u64]) -> Vec<Vec<Card>> {
    fn rec(left: &mut Vec<Card>, masks: &[u64], cur: &mut Vec<Card>, out: &mut Vec<Vec<Card>>) {
        if cur.len() == masks.len() {
            out.push(cur.clone());
            return;
        }
        let mut tried: Vec<Card> = Vec::new();
        for i in 0..left.len() {
            let c = left[i];
            if tried.contains(&c) || masks[cur.len()] & c.bit() == 0 {
                continue;
            }
            tried.push(c);
            left.remove(i);
            cur.push(c);
            rec(left, masks, cur, out);
            cur.pop();
            left.insert(i, c);
        }
    }
    let mut out = Vec::new();
    rec(&mut cards.to_vec(), masks, &mut Vec::new(), &mut out);
    out
}

/// Score gained by playing `first` and then following the blueprint to the end.
pub fn playout_gain(state: &GameState, first: hlbs::engine::Action, blueprint: &dyn Blueprint) -> i64 {
    let (mut s, _) = state.apply(first).unwrap();
    while !s.is_terminal() {
        let a = blueprint.act_in(&s);
        s = s.apply(a).unwrap().0;
    }
    s.score() as i64 - state.score() as i64
}
