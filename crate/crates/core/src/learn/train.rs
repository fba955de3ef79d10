use rand::Rng as _;

use super::{generate_selfplay_from, ReplayBuffer};
use crate::belief::LearnedBeliefModel;
use crate::engine::{Hand, Variant};
use crate::error::{Error, Result};
use crate::observe::Observation;
use crate::policy::Blueprint;
use crate::rng::{derive_seed, stream};

/// One supervised example: the acting player's view and their true hand.
#[derive(Clone, Debug)]
pub struct BeliefExample {
    pub seed: u64,
    pub turn: u32,
    pub obs: Observation,
    pub hand: Hand,
}

/// Splits every non-terminal turn of the buffer into training (even seeds)
/// and held-out (odd seeds) examples.
pub fn belief_examples(buffer: &ReplayBuffer) -> Result<(Vec<BeliefExample>, Vec<BeliefExample>)> {
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for r in buffer.iter() {
        let states = r.states()?;
        for s in &states[..r.turns()] {
            let p = s.current_player();
            let ex = BeliefExample { seed: r.seed, turn: s.turn(), obs: Observation::new(s, p), hand: s.hand(p).clone() };
            if r.seed % 2 == 0 {
                train.push(ex);
            } else {
                heldout.push(ex);
            }
        }
    }
    Ok((train, heldout))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Held-out loss is measured every `eval_every` steps.
    pub eval_every: usize,
    /// Stop after this many evaluations without `min_improvement`.
    pub patience: usize,
    pub min_improvement: f64,
    /// At most this many held-out examples are scored per evaluation.
    pub eval_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.005,
            steps: 20_000,
            batch: 128,
            seed: 0,
            eval_every: 100,
            patience: 20,
            min_improvement: 1e-3,
            eval_cap: 4000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub steps_run: usize,
    pub converged: bool,
    pub train_loss: f64,
    pub heldout_loss: f64,
    /// `(step, running train loss, held-out loss)` at each evaluation.
    pub curve: Vec<(usize, f64, f64)>,
}

fn mean_loss(model: &LearnedBeliefModel, examples: &[BeliefExample]) -> f64 {
    let total: f64 = examples
        .iter()
        .map(|e| model.chain_loss(&model.sparse_base(&e.obs), &e.obs.unseen_counts(), &e.hand, None))
        .sum();
    total / examples.len().max(1) as f64
}

/// Fits the auto-regressive belief model by Adam on the mean per-card
/// negative log-likelihood. Keeps the parameters with the best held-out loss.
pub fn train_belief(buffer: &ReplayBuffer, config: &TrainConfig) -> Result<(LearnedBeliefModel, TrainReport)> {
    let (train, heldout) = belief_examples(buffer)?;
    train_belief_on(&train, &heldout, LearnedBeliefModel::zeros(*buffer.variant()), config)
}

pub fn train_belief_on(
    train: &[BeliefExample],
    heldout: &[BeliefExample],
    init: LearnedBeliefModel,
    config: &TrainConfig,
) -> Result<(LearnedBeliefModel, TrainReport)> {
    if train.is_empty() {
        return Err(Error::EmptyData("no training examples".into()));
    }
    let monitor: &[BeliefExample] = if heldout.is_empty() { train } else { heldout };
    let monitor = &monitor[..monitor.len().min(config.eval_cap)];
    let mut model = init;
    let n = model.params().len();
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut rng = stream(config.seed, &[0x7472_6169_6e]);
    let mut best = (mean_loss(&model, monitor), model.params().to_vec());
    let mut report = TrainReport { curve: vec![(0, best.0, best.0)], ..Default::default() };
    let mut stale = 0;
    let mut running = 0.0;
    let mut running_n = 0usize;
    let batch = config.batch.max(1);
    for step in 1..=config.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..batch {
            let e = &train[rng.random_range(0..train.len())];
            let base = model.sparse_base(&e.obs);
            loss += model.chain_loss(&base, &e.obs.unseen_counts(), &e.hand, Some((&mut grad, 1.0 / batch as f64)));
        }
        loss /= batch as f64;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        running += loss;
        running_n += 1;
        let c1 = 1.0 - b1.powi(step as i32);
        let c2 = 1.0 - b2.powi(step as i32);
        for (((w, g), mi), vi) in model.params_mut().iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
            if *g == 0.0 && *mi == 0.0 {
                continue;
            }
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            *w -= config.lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
        report.steps_run = step;
        if step % config.eval_every.max(1) == 0 || step == config.steps {
            let h = mean_loss(&model, monitor);
            if !h.is_finite() {
                return Err(Error::Diverged { step, loss: h });
            }
            report.curve.push((step, running / running_n as f64, h));
            report.train_loss = running / running_n as f64;
            running = 0.0;
            running_n = 0;
            if h < best.0 - config.min_improvement {
                stale = 0;
            } else {
                stale += 1;
            }
            if h < best.0 {
                best = (h, model.params().to_vec());
            }
            if stale >= config.patience {
                report.converged = true;
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best.1);
    report.heldout_loss = if heldout.is_empty() { best.0 } else { mean_loss(&model, heldout) };
    model.meta.steps = report.steps_run as u64;
    model.meta.train_loss = report.train_loss;
    model.meta.heldout_loss = report.heldout_loss;
    model.meta.seed = config.seed;
    Ok((model, report))
}

/// Online variant of [`train_belief`]: every epoch plays `games_per_epoch`
/// fresh games (never reusing a deal) and continues training from the
/// previous epoch's weights for `config.steps / epochs` steps. Returns the
/// model, the report (curve steps are cumulative) and the last epoch's buffer.
pub fn train_belief_online(
    blueprint: &dyn Blueprint,
    variant: Variant,
    games_per_epoch: usize,
    epochs: usize,
    config: &TrainConfig,
) -> Result<(LearnedBeliefModel, TrainReport, ReplayBuffer)> {
    if epochs == 0 || games_per_epoch == 0 {
        return Err(Error::InvalidConfig("online training needs at least one epoch and one game".into()));
    }
    let mut model = LearnedBeliefModel::zeros(variant);
    let mut report = TrainReport::default();
    let mut buffer = ReplayBuffer::new(variant, 0);
    let per_epoch = (config.steps / epochs).max(1);
    for e in 0..epochs {
        let lo = (e * games_per_epoch) as u64;
        buffer = generate_selfplay_from(blueprint, variant, config.seed, lo..lo + games_per_epoch as u64);
        let (train, heldout) = belief_examples(&buffer)?;
        let cfg = TrainConfig { steps: per_epoch, seed: derive_seed(config.seed, &[e as u64]), ..*config };
        let (m, r) = train_belief_on(&train, &heldout, model, &cfg)?;
        model = m;
        let offset = report.steps_run;
        let skip = usize::from(e > 0);
        report.curve.extend(r.curve.iter().skip(skip).map(|&(s, t, h)| (s + offset, t, h)));
        report.steps_run += r.steps_run;
        report.train_loss = r.train_loss;
        report.heldout_loss = r.heldout_loss;
        report.converged = r.converged;
    }
    model.meta.steps = report.steps_run as u64;
    model.meta.seed = config.seed;
    Ok((model, report, buffer))
}
