//! Experiment commands behind the `hlbs` binary.
//!
//! Every command writes a main CSV, a JSON summary next to it, and a
//! `.timing.csv` sidecar. Everything except the sidecar is a deterministic
//! function of the command line minus `--jobs` and the output paths.

pub mod stats;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::belief::{grounded_cross_entropy, ExactBeliefTracker, LearnedBeliefModel, TrackerConfig, DEFAULT_CANDIDATE_BOUND};
use crate::engine::{GameState, Variant};
use crate::learn::{generate_selfplay, train_belief, train_belief_online, train_value, TrainConfig, ValueConfig};
use crate::observe::{encoder_version, layout_document, Observation, PublicState};
use crate::policy::{Blueprint, RuleBlueprint};
use crate::rng::{derive_seed, game_seed};
use crate::search::{
    play_game_with_search, BeliefMode, Depth, SearchConfig, SearchSetup, Searchers, UcbConfig, ValueFunction, ValueModel,
    ZeroValue,
};
use stats::{mean, sem, sign_test};

/// Bumped whenever a CSV header or number format changes.
pub const CSV_SCHEMA: u32 = 1;

pub fn version_string() -> String {
    format!("v{}-enc{}", env!("CARGO_PKG_VERSION"), crate::observe::ENCODER_VERSION)
}

#[derive(Parser, Debug)]
#[command(name = "hlbs", version, about = "Belief-based search for two-player Hanabi")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Paired-seed evaluation of blueprint and search conditions.
    Eval(EvalArgs),
    /// Generate blueprint self-play and fit the belief and value models.
    Train(TrainArgs),
    /// Per-turn cross entropy of grounded, learned and exact beliefs.
    BeliefQuality(BeliefQualityArgs),
    /// Depth x rollouts grid at a constant number of rollout steps.
    SweepDepth(SweepDepthArgs),
    /// Split a fixed budget between self-play data and belief training.
    SweepBudget(SweepBudgetArgs),
    /// One searcher against both players searching.
    Degradation(DegradationArgs),
    /// Print the feature layouts of a variant.
    Layout(LayoutArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CommonArgs {
    /// Preset name (standard, 6card, 7card, mini) or a TOML file.
    #[arg(long, default_value = "standard")]
    pub variant: String,
    #[arg(long, default_value = "rule-v1")]
    pub blueprint: String,
    #[arg(long, default_value_t = 100)]
    pub games: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub belief: Option<PathBuf>,
    #[arg(long)]
    pub value: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub rollouts: usize,
    /// Searcher turns per rollout, or `inf`. Defaults to 16 with a value
    /// model and `inf` without one.
    #[arg(long)]
    pub depth: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value = "learned")]
    pub mode: String,
    #[arg(long, default_value = "0")]
    pub searcher: String,
    #[arg(long)]
    pub ucb: bool,
    #[arg(long, default_value_t = 3.0)]
    pub ucb_c: f64,
    #[arg(long, default_value_t = 8)]
    pub ucb_min: u64,
    /// Draws per needed hand before learned sampling falls back.
    #[arg(long, default_value_t = 100)]
    pub attempts: usize,
    /// Candidate bound of the exact tracker.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_BOUND)]
    pub bound: usize,
    /// Also write per-move search reports.
    #[arg(long)]
    pub moves: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Comma-separated: blueprint, lbs, exact, lbs-K, lbs-inf, exact-K, exact-inf.
    #[arg(long, default_value = "blueprint,search")]
    pub conditions: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Regenerate the self-play buffer each epoch; `--games` is then per epoch.
    #[arg(long)]
    pub online: bool,
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    /// Where to write the belief model.
    #[arg(long, default_value = "belief.bin")]
    #[serde(skip)]
    pub belief: PathBuf,
    /// Where to write the value model.
    #[arg(long, default_value = "value.bin")]
    #[serde(skip)]
    pub value: PathBuf,
    /// Optionally keep the self-play data (`.bin` for the binary format).
    #[arg(long)]
    #[serde(skip)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BeliefQualityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub belief: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_BOUND)]
    pub bound: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepDepthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Depths of the grid; rollouts shrink in proportion.
    #[arg(long, default_value = "1,2,4,8,16")]
    pub depths: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepBudgetArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Self-play games when the whole budget goes to data.
    #[arg(long, default_value_t = 2000)]
    pub budget_games: usize,
    /// Training steps when the whole budget goes to training.
    #[arg(long, default_value_t = 4000)]
    pub budget_steps: usize,
    /// Fractions of the budget spent on belief training.
    #[arg(long, default_value = "0,0.2,0.4,0.6,0.8")]
    pub splits: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DegradationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LayoutArgs {
    #[arg(long, default_value = "standard")]
    pub variant: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => cmd_eval(&a),
        Command::Train(a) => cmd_train(&a),
        Command::BeliefQuality(a) => cmd_belief_quality(&a),
        Command::SweepDepth(a) => cmd_sweep_depth(&a),
        Command::SweepBudget(a) => cmd_sweep_budget(&a),
        Command::Degradation(a) => cmd_degradation(&a),
        Command::Layout(a) => cmd_layout(&a),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        b = b.num_threads(j);
    }
    Ok(b.build()?)
}

struct Outputs {
    main: PathBuf,
}

impl Outputs {
    fn new(out: &Option<PathBuf>, default: &str) -> Result<Outputs> {
        let main = out.clone().unwrap_or_else(|| PathBuf::from(default));
        if let Some(dir) = main.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Outputs { main })
    }

    /// `runs/eval.csv` with suffix `json` gives `runs/eval.json`.
    fn sidecar(&self, suffix: &str) -> PathBuf {
        let stem = self.main.with_extension("");
        PathBuf::from(format!("{}.{suffix}", stem.display()))
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    fn summary(&self, command: &str, spec: &impl Serialize, totals: serde_json::Value) -> Result<()> {
        let doc = json!({
            "command": command,
            "version": version_string(),
            "csv_schema": CSV_SCHEMA,
            "spec": spec,
            "totals": totals,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(&self.sidecar("json"), text.as_bytes())
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// Fixed six-decimal formatting; empty for undefined values.
pub fn fmt6(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        String::new()
    }
}

fn load_variant(spec: &str) -> Result<Variant> {
    Variant::load(spec).with_context(|| format!("loading variant {spec:?}"))
}

fn load_belief(path: &Path, variant: &Variant) -> Result<LearnedBeliefModel> {
    let m = LearnedBeliefModel::load(path).with_context(|| format!("loading belief model {}", path.display()))?;
    if m.variant() != variant {
        bail!("belief model {} was trained for a different variant", path.display());
    }
    Ok(m)
}

fn load_value(path: &Path, variant: &Variant) -> Result<ValueModel> {
    let m = ValueModel::load(path).with_context(|| format!("loading value model {}", path.display()))?;
    if m.variant() != variant {
        bail!("value model {} was trained for a different variant", path.display());
    }
    Ok(m)
}

/// What a game is played with.
struct GameCtx {
    variant: Variant,
    blueprint: RuleBlueprint,
    belief: Option<LearnedBeliefModel>,
    value: Option<ValueModel>,
    tracker: TrackerConfig,
    base: SearchConfig,
    default_depth: Depth,
    searchers: Searchers,
    keep_moves: bool,
}

impl GameCtx {
    fn new(common: &CommonArgs, search: &SearchArgs) -> Result<GameCtx> {
        let variant = load_variant(&common.variant)?;
        let blueprint = RuleBlueprint::by_name(&common.blueprint)?;
        let belief = search.belief.as_deref().map(|p| load_belief(p, &variant)).transpose()?;
        let value = search.value.as_deref().map(|p| load_value(p, &variant)).transpose()?;
        let default_depth = match &search.depth {
            Some(d) => d.parse()?,
            None if value.is_some() => Depth::Turns(16),
            None => Depth::Full,
        };
        let base = SearchConfig {
            num_rollouts: search.rollouts,
            depth: default_depth,
            delta: search.delta,
            ucb: UcbConfig { enabled: search.ucb, c: search.ucb_c, min_samples: search.ucb_min },
            max_attempts_multiplier: search.attempts,
            seed: common.seed,
            mode: search.mode.parse()?,
            parallel: false,
        };
        base.validate()?;
        Ok(GameCtx {
            variant,
            blueprint,
            belief,
            value,
            tracker: TrackerConfig { bound: search.bound },
            base,
            default_depth,
            searchers: search.searcher.parse()?,
            keep_moves: search.moves,
        })
    }

    fn check(&self, cond: &Condition) -> Result<()> {
        if let Condition::Search { mode, depth, searchers, .. } = cond {
            if *mode == BeliefMode::Exact && *searchers == Searchers::Both {
                return Err(crate::Error::InvalidConfig(format!(
                    "condition {}: exact beliefs assume the partner plays the blueprint",
                    cond.label()
                ))
                .into());
            }
            if *mode == BeliefMode::Learned && self.belief.is_none() {
                bail!("condition {} needs --belief", cond.label());
            }
            if matches!(depth, Depth::Turns(_)) && self.value.is_none() {
                bail!("condition {} bootstraps and needs --value (or use depth inf)", cond.label());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Condition {
    Blueprint,
    Search { mode: BeliefMode, depth: Depth, searchers: Searchers, rollouts: usize },
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Blueprint => "blueprint".into(),
            Condition::Search { mode, depth, searchers, .. } => {
                let m = match mode {
                    BeliefMode::Learned => "lbs",
                    BeliefMode::Exact => "exact",
                };
                match searchers {
                    Searchers::Both => format!("both-{m}-{depth}"),
                    _ => format!("{m}-{depth}"),
                }
            }
        }
    }
}

fn parse_conditions(text: &str, ctx: &GameCtx) -> Result<Vec<Condition>> {
    let mut out = Vec::new();
    for raw in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, depth) = match raw.split_once('-') {
            Some((n, d)) => (n, d.parse::<Depth>()?),
            None => (raw, ctx.default_depth),
        };
        let mode = match name {
            "blueprint" | "bp" => {
                out.push(Condition::Blueprint);
                continue;
            }
            "search" => ctx.base.mode,
            "lbs" => BeliefMode::Learned,
            "exact" => BeliefMode::Exact,
            _ => bail!("unknown condition {raw:?}"),
        };
        out.push(Condition::Search { mode, depth, searchers: ctx.searchers, rollouts: ctx.base.num_rollouts });
    }
    if out.is_empty() {
        bail!("no conditions given");
    }
    for c in &out {
        ctx.check(c)?;
    }
    Ok(out)
}

/// One finished (or failed) game of one condition.
#[derive(Clone, Debug, PartialEq)]
pub struct GameResult {
    pub index: u64,
    pub seed: u64,
    pub score: Option<u32>,
    pub turns: u32,
    pub decisions: usize,
    pub deviations: usize,
    pub fallbacks: usize,
    pub error: Option<String>,
    pub elapsed_us: u64,
    pub search_us: u64,
    pub moves: Vec<String>,
}

fn play_one(ctx: &GameCtx, cond: &Condition, index: u64, base_seed: u64) -> GameResult {
    let seed = game_seed(base_seed, index);
    let start = Instant::now();
    let (searchers, cfg) = match *cond {
        Condition::Blueprint => (Searchers::None, ctx.base),
        Condition::Search { mode, depth, searchers, rollouts } => {
            (searchers, SearchConfig { mode, depth, num_rollouts: rollouts, ..ctx.base })
        }
    };
    let value: &dyn ValueFunction = match &ctx.value {
        Some(v) => v,
        None => &ZeroValue,
    };
    let setup = SearchSetup {
        blueprint: &ctx.blueprint,
        value,
        belief: ctx.belief.as_ref(),
        tracker: ctx.tracker,
        config: cfg,
    };
    let res = play_game_with_search(ctx.variant, seed, searchers, &setup);
    let elapsed_us = start.elapsed().as_micros() as u64;
    match res {
        Ok(g) => GameResult {
            index,
            seed,
            score: Some(g.score),
            turns: g.turns,
            decisions: g.reports.len(),
            deviations: g.deviations(),
            fallbacks: g.fallbacks(),
            error: None,
            elapsed_us,
            search_us: g.search_us(),
            moves: if ctx.keep_moves { g.reports.iter().map(|r| r.to_line(false)).collect() } else { Vec::new() },
        },
        Err(e) => GameResult {
            index,
            seed,
            score: None,
            turns: 0,
            decisions: 0,
            deviations: 0,
            fallbacks: 0,
            error: Some(e.to_string()),
            elapsed_us,
            search_us: 0,
            moves: Vec::new(),
        },
    }
}

fn play_condition(pool: &rayon::ThreadPool, ctx: &GameCtx, cond: &Condition, games: usize, seed: u64) -> Vec<GameResult> {
    pool.install(|| (0..games as u64).into_par_iter().map(|i| play_one(ctx, cond, i, seed)).collect())
}

/// Summary of one condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub condition: String,
    pub n: usize,
    pub failed: usize,
    pub mean: f64,
    pub sem: f64,
    pub deviation_rate: f64,
    pub fallback_rate: f64,
    pub mean_ms_per_game: f64,
    pub status: String,
}

impl ResultRow {
    pub fn from_games(condition: String, games: &[GameResult]) -> ResultRow {
        let scores: Vec<f64> = games.iter().filter_map(|g| g.score.map(f64::from)).collect();
        let failed = games.len() - scores.len();
        let status = match games.iter().find_map(|g| g.error.as_ref()) {
            None => "ok".to_string(),
            Some(e) => format!("failed: {e}"),
        };
        // Rates cover completed games only.
        let done: Vec<&GameResult> = games.iter().filter(|g| g.score.is_some()).collect();
        let decisions: usize = done.iter().map(|g| g.decisions).sum();
        let rate = |k: usize| if decisions == 0 { 0.0 } else { k as f64 / decisions as f64 };
        ResultRow {
            condition,
            n: scores.len(),
            failed,
            mean: mean(&scores),
            sem: sem(&scores),
            deviation_rate: rate(done.iter().map(|g| g.deviations).sum()),
            fallback_rate: rate(done.iter().map(|g| g.fallbacks).sum()),
            mean_ms_per_game: if done.is_empty() {
                f64::NAN
            } else {
                done.iter().map(|g| g.elapsed_us as f64).sum::<f64>() / done.len() as f64 / 1000.0
            },
            status,
        }
    }

    pub const HEADER: [&'static str; 8] =
        ["condition", "n", "failed", "mean", "sem", "deviation_rate", "fallback_rate", "status"];

    /// Deterministic columns; wall-clock lives in the timing sidecar.
    pub fn record(&self) -> Vec<String> {
        vec![
            self.condition.clone(),
            self.n.to_string(),
            self.failed.to_string(),
            fmt6(self.mean),
            fmt6(self.sem),
            fmt6(self.deviation_rate),
            fmt6(self.fallback_rate),
            self.status.clone(),
        ]
    }
}

fn games_csv(runs: &[(String, Vec<GameResult>)]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (label, games) in runs {
        for g in games {
            rows.push(vec![
                label.clone(),
                g.index.to_string(),
                g.seed.to_string(),
                g.score.map(|s| s.to_string()).unwrap_or_default(),
                g.turns.to_string(),
                g.decisions.to_string(),
                g.deviations.to_string(),
                g.fallbacks.to_string(),
                g.error.clone().unwrap_or_default(),
            ]);
        }
    }
    csv_bytes(
        &["condition", "game", "seed", "score", "turns", "decisions", "deviations", "fallbacks", "error"],
        &rows,
    )
}

fn timing_csv(runs: &[(String, Vec<GameResult>)]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (label, games) in runs {
        for g in games {
            let per_decision = if g.decisions == 0 { f64::NAN } else { g.search_us as f64 / g.decisions as f64 };
            rows.push(vec![
                label.clone(),
                g.index.to_string(),
                g.elapsed_us.to_string(),
                g.search_us.to_string(),
                fmt6(per_decision),
            ]);
        }
    }
    csv_bytes(&["condition", "game", "elapsed_us", "search_us", "us_per_decision"], &rows)
}

fn moves_tsv(runs: &[(String, Vec<GameResult>)]) -> Vec<u8> {
    let mut text = format!("condition\tgame\t{}\n", crate::search::SearchReport::HEADER);
    for (label, games) in runs {
        for g in games {
            for m in &g.moves {
                text.push_str(&format!("{label}\t{}\t{m}\n", g.index));
            }
        }
    }
    text.into_bytes()
}

/// Scores of the games both conditions completed, paired by game index.
fn paired(a: &[GameResult], b: &[GameResult]) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| Some((f64::from(x.score?), f64::from(y.score?))))
        .unzip()
}

fn comparisons(runs: &[(String, Vec<GameResult>)]) -> serde_json::Value {
    let mut out = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (a, b) = paired(&runs[j].1, &runs[i].1);
            if a.is_empty() {
                continue;
            }
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            out.push(json!({
                "a": runs[j].0,
                "b": runs[i].0,
                "pairs": a.len(),
                "mean_difference": mean(&diff),
                "sem_difference": sem(&diff),
                "sign_test": sign_test(&a, &b),
            }));
        }
    }
    serde_json::Value::Array(out)
}

fn write_game_outputs(
    out: &Outputs,
    runs: &[(String, Vec<GameResult>)],
    rows: &[Vec<String>],
    header: &[&str],
    keep_moves: bool,
) -> Result<()> {
    out.write(&out.main, &csv_bytes(header, rows)?)?;
    out.write(&out.sidecar("games.csv"), &games_csv(runs)?)?;
    out.write(&out.sidecar("timing.csv"), &timing_csv(runs)?)?;
    if keep_moves {
        out.write(&out.sidecar("moves.tsv"), &moves_tsv(runs))?;
    }
    Ok(())
}

fn row_json(rows: &[ResultRow]) -> serde_json::Value {
    // Wall-clock is left out so that the summary stays reproducible.
    rows.iter()
        .map(|r| {
            json!({
                "condition": r.condition,
                "n": r.n,
                "failed": r.failed,
                "mean": r.mean,
                "sem": r.sem,
                "deviation_rate": r.deviation_rate,
                "fallback_rate": r.fallback_rate,
                "status": r.status,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// commands

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ctx = GameCtx::new(&args.common, &args.search)?;
    let conditions = parse_conditions(&args.conditions, &ctx)?;
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "eval.csv")?;
    let mut runs = Vec::new();
    for c in &conditions {
        let games = play_condition(&pool, &ctx, c, args.common.games, args.common.seed);
        runs.push((c.label(), games));
    }
    let rows: Vec<ResultRow> = runs.iter().map(|(l, g)| ResultRow::from_games(l.clone(), g)).collect();
    for r in &rows {
        eprintln!("{:<16} n={:<5} mean={:.4} sem={:.4} status={}", r.condition, r.n, r.mean, r.sem, r.status);
    }
    let records: Vec<Vec<String>> = rows.iter().map(ResultRow::record).collect();
    write_game_outputs(&out, &runs, &records, &ResultRow::HEADER, ctx.keep_moves)?;
    out.summary("eval", args, json!({ "rows": row_json(&rows), "comparisons": comparisons(&runs) }))
}

pub fn cmd_degradation(args: &DegradationArgs) -> Result<()> {
    let ctx = GameCtx::new(&args.common, &args.search)?;
    let single = match ctx.searchers {
        Searchers::One(p) => p,
        _ => 0,
    };
    let conditions = [
        Condition::Search {
            mode: BeliefMode::Learned,
            depth: ctx.default_depth,
            searchers: Searchers::One(single),
            rollouts: ctx.base.num_rollouts,
        },
        Condition::Search {
            mode: BeliefMode::Learned,
            depth: ctx.default_depth,
            searchers: Searchers::Both,
            rollouts: ctx.base.num_rollouts,
        },
    ];
    for c in &conditions {
        ctx.check(c)?;
    }
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "degradation.csv")?;
    let mut runs = Vec::new();
    for c in &conditions {
        runs.push((c.label(), play_condition(&pool, &ctx, c, args.common.games, args.common.seed)));
    }
    let rows: Vec<ResultRow> = runs.iter().map(|(l, g)| ResultRow::from_games(l.clone(), g)).collect();
    let direction_ok = rows[1].mean <= rows[0].mean;
    eprintln!(
        "single {:.4} +- {:.4}, both {:.4} +- {:.4}: both <= single {}",
        rows[0].mean,
        rows[0].sem,
        rows[1].mean,
        rows[1].sem,
        if direction_ok { "pass" } else { "fail" }
    );
    let records: Vec<Vec<String>> = rows.iter().map(ResultRow::record).collect();
    write_game_outputs(&out, &runs, &records, &ResultRow::HEADER, ctx.keep_moves)?;
    out.summary(
        "degradation",
        args,
        json!({
            "rows": row_json(&rows),
            "comparisons": comparisons(&runs),
            "both_not_better_than_single": direction_ok,
        }),
    )
}

pub fn cmd_sweep_depth(args: &SweepDepthArgs) -> Result<()> {
    let ctx = GameCtx::new(&args.common, &args.search)?;
    let depths: Vec<u32> = args
        .depths
        .split(',')
        .map(|d| d.trim().parse::<u32>().with_context(|| format!("bad depth {d:?}")))
        .collect::<Result<_>>()?;
    if depths.is_empty() || depths.contains(&0) {
        bail!("--depths needs positive integers");
    }
    let d0 = depths[0] as usize;
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "sweep-depth.csv")?;
    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &d in &depths {
        let rollouts = (ctx.base.num_rollouts * d0 / d as usize).max(1);
        let cond = Condition::Search {
            mode: ctx.base.mode,
            depth: Depth::Turns(d),
            searchers: ctx.searchers,
            rollouts,
        };
        ctx.check(&cond)?;
        let games = play_condition(&pool, &ctx, &cond, args.common.games, args.common.seed);
        cells.push((d, rollouts));
        runs.push((format!("depth-{d}-rollouts-{rollouts}"), games));
    }
    let rows: Vec<ResultRow> = runs.iter().map(|(l, g)| ResultRow::from_games(l.clone(), g)).collect();
    let records: Vec<Vec<String>> = rows
        .iter()
        .zip(&cells)
        .map(|(r, &(d, n))| {
            let mut rec = vec![d.to_string(), n.to_string(), (d as usize * n).to_string()];
            rec.extend(r.record());
            rec
        })
        .collect();
    let mut header = vec!["depth", "rollouts", "rollout_steps"];
    header.extend(ResultRow::HEADER);
    write_game_outputs(&out, &runs, &records, &header, ctx.keep_moves)?;
    out.summary("sweep-depth", args, json!({ "rows": row_json(&rows) }))
}

pub fn cmd_sweep_budget(args: &SweepBudgetArgs) -> Result<()> {
    let mut ctx = GameCtx::new(&args.common, &args.search)?;
    if ctx.base.mode != BeliefMode::Learned {
        bail!("sweep-budget varies the learned belief; use --mode learned");
    }
    let splits: Vec<f64> = args
        .splits
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad split {s:?}")))
        .collect::<Result<_>>()?;
    if splits.iter().any(|f| !(0.0..=1.0).contains(f)) {
        bail!("splits must lie in [0, 1]");
    }
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "sweep-budget.csv")?;
    let bp_games = play_condition(&pool, &ctx, &Condition::Blueprint, args.common.games, args.common.seed);
    let bp_row = ResultRow::from_games("blueprint".into(), &bp_games);
    let mut records = Vec::new();
    let mut runs = vec![("blueprint".to_string(), bp_games)];
    let mut summary = Vec::new();
    let data_seed = derive_seed(args.common.seed, &[0x6461_7461]);
    for &f in &splits {
        let data_games = (((1.0 - f) * args.budget_games as f64).round() as usize).max(2);
        let steps = (f * args.budget_steps as f64).round() as usize;
        let buffer = pool.install(|| generate_selfplay(&ctx.blueprint, ctx.variant, data_games, data_seed));
        let (model, heldout) = if steps == 0 {
            (LearnedBeliefModel::zeros(ctx.variant), f64::NAN)
        } else {
            let cfg = TrainConfig { steps, seed: args.common.seed, ..Default::default() };
            let (m, r) = train_belief(&buffer, &cfg)?;
            (m, r.heldout_loss)
        };
        ctx.belief = Some(model);
        let cond = Condition::Search {
            mode: BeliefMode::Learned,
            depth: ctx.default_depth,
            searchers: ctx.searchers,
            rollouts: ctx.base.num_rollouts,
        };
        ctx.check(&cond)?;
        let label = format!("split-{f}");
        let games = play_condition(&pool, &ctx, &cond, args.common.games, args.common.seed);
        let row = ResultRow::from_games(label.clone(), &games);
        records.push(vec![
            f.to_string(),
            data_games.to_string(),
            steps.to_string(),
            fmt6(heldout),
            fmt6(bp_row.mean),
            fmt6(row.mean),
            fmt6(row.sem),
            row.n.to_string(),
            fmt6(row.fallback_rate),
            fmt6(row.deviation_rate),
        ]);
        summary.push(json!({
            "split": f,
            "data_games": data_games,
            "train_steps": steps,
            "heldout_loss": heldout,
            "lbs": row_json(std::slice::from_ref(&row))[0],
        }));
        runs.push((label, games));
    }
    let header = [
        "split",
        "data_games",
        "train_steps",
        "heldout_loss",
        "blueprint_mean",
        "lbs_mean",
        "lbs_sem",
        "n",
        "fallback_rate",
        "deviation_rate",
    ];
    write_game_outputs(&out, &runs, &records, &header, ctx.keep_moves)?;
    out.summary("sweep-budget", args, json!({ "blueprint": row_json(&[bp_row])[0], "splits": summary }))
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let variant = load_variant(&args.common.variant)?;
    let blueprint = RuleBlueprint::by_name(&args.common.blueprint)?;
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "train.csv")?;
    let cfg = TrainConfig {
        lr: args.lr,
        steps: args.steps,
        batch: args.batch,
        patience: args.patience,
        seed: args.common.seed,
        ..Default::default()
    };
    // Online mode hands back its last epoch, which also feeds the value model.
    let (belief, report, buffer) = pool.install(|| {
        if args.online {
            train_belief_online(&blueprint, variant, args.common.games, args.epochs, &cfg)
        } else {
            let buffer = generate_selfplay(&blueprint, variant, args.common.games, args.common.seed);
            train_belief(&buffer, &cfg).map(|(m, r)| (m, r, buffer))
        }
    })?;
    if let Some(p) = &args.data {
        buffer.save(p)?;
    }
    belief.save(&args.belief)?;
    let (value, vreport) = train_value(&buffer, &ValueConfig::default())?;
    value.save(&args.value)?;
    eprintln!(
        "belief: {} steps, held-out loss {:.4} (converged: {}); value: held-out rmse {:.4}",
        report.steps_run, report.heldout_loss, report.converged, vreport.heldout_rmse
    );
    let rows: Vec<Vec<String>> =
        report.curve.iter().map(|&(s, t, h)| vec![s.to_string(), fmt6(t), fmt6(h)]).collect();
    out.write(&out.main, &csv_bytes(&["step", "train_loss", "heldout_loss"], &rows)?)?;
    let scores: Vec<f64> = buffer.iter().map(|r| r.score() as f64).collect();
    out.summary(
        "train",
        args,
        json!({
            "games": buffer.len(),
            "blueprint_mean": mean(&scores),
            "blueprint_sem": sem(&scores),
            "encoder_version": format!("{:#018x}", encoder_version(&variant)),
            "belief": {
                "steps_run": report.steps_run,
                "converged": report.converged,
                "train_loss": report.train_loss,
                "heldout_loss": report.heldout_loss,
            },
            "value": {
                "train_rmse": vreport.train_rmse,
                "heldout_rmse": vreport.heldout_rmse,
                "ridge": vreport.ridge_used,
                "train_samples": vreport.train_samples,
                "heldout_samples": vreport.heldout_samples,
            },
        }),
    )
}

/// Per-turn cross entropies of one blueprint self-play game.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GameCurves {
    pub grounded: Vec<f64>,
    pub learned: Vec<f64>,
    /// `None` when the exact tracker exceeded its bound.
    pub exact: Option<Vec<f64>>,
}

pub fn belief_curves(
    variant: Variant,
    blueprint: &dyn Blueprint,
    model: &LearnedBeliefModel,
    tracker: TrackerConfig,
    seed: u64,
) -> crate::Result<GameCurves> {
    let mut s = GameState::new_game(variant, seed);
    let mut trackers = Vec::new();
    for p in 0..2 {
        match ExactBeliefTracker::new(&Observation::new(&s, p), blueprint, tracker) {
            Ok(t) => trackers.push(t),
            Err(e) if e.is_belief_space_too_large() => {
                trackers.clear();
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut out = GameCurves { exact: (!trackers.is_empty()).then(Vec::new), ..Default::default() };
    while !s.is_terminal() {
        let p = s.current_player();
        let obs = Observation::new(&s, p);
        let hand = s.hand(p).clone();
        let masks: Vec<u64> = obs.own_knowledge().iter().map(|k| k.mask).collect();
        out.grounded.push(grounded_cross_entropy(&variant, &obs.unseen_counts(), &masks, &hand));
        out.learned.push(model.cross_entropy(&obs, &hand));
        if let Some(e) = out.exact.as_mut() {
            e.push(trackers[p].cross_entropy(&hand));
        }
        let a = blueprint.act_in(&s);
        let pre = PublicState::from_state(&s);
        s.step(a)?;
        if out.exact.is_some() {
            let event = *s.last_event().expect("event after a step");
            for (q, t) in trackers.iter_mut().enumerate() {
                match t.update(blueprint, &pre, &event, &Observation::new(&s, q)) {
                    Ok(()) => {}
                    Err(e) if e.is_belief_space_too_large() => {
                        out.exact = None;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

pub fn cmd_belief_quality(args: &BeliefQualityArgs) -> Result<()> {
    let variant = load_variant(&args.common.variant)?;
    let blueprint = RuleBlueprint::by_name(&args.common.blueprint)?;
    let model = load_belief(&args.belief, &variant)?;
    let pool = pool(args.common.jobs)?;
    let out = Outputs::new(&args.common.out, "belief-quality.csv")?;
    let tracker = TrackerConfig { bound: args.bound };
    let curves: Vec<GameCurves> = pool.install(|| {
        (0..args.common.games as u64)
            .into_par_iter()
            .map(|i| belief_curves(variant, &blueprint, &model, tracker, game_seed(args.common.seed, i)))
            .collect::<crate::Result<_>>()
    })?;
    let with_exact = curves.iter().all(|c| c.exact.is_some());
    if !with_exact {
        eprintln!("warning: exact belief exceeded {} candidates; exact column omitted", args.bound);
    }
    let turns = curves.iter().map(|c| c.grounded.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut between = 0usize;
    let (mut tot_g, mut tot_l, mut tot_e, mut tot_n) = (0.0, 0.0, 0.0, 0usize);
    for t in 0..turns {
        let at: Vec<&GameCurves> = curves.iter().filter(|c| c.grounded.len() > t).collect();
        let n = at.len() as f64;
        let g = at.iter().map(|c| c.grounded[t]).sum::<f64>() / n;
        let l = at.iter().map(|c| c.learned[t]).sum::<f64>() / n;
        tot_g += g * n;
        tot_l += l * n;
        tot_n += at.len();
        let mut row = vec![t.to_string(), fmt6(g), fmt6(l)];
        if with_exact {
            let e = at.iter().map(|c| c.exact.as_ref().unwrap()[t]).sum::<f64>() / n;
            tot_e += e * n;
            if e < l && l < g {
                between += 1;
            }
            row.push(fmt6(e));
        }
        row.push(at.len().to_string());
        rows.push(row);
    }
    let header: Vec<&str> = if with_exact {
        vec!["turn", "grounded", "learned", "exact", "n_at_turn"]
    } else {
        vec!["turn", "grounded", "learned", "n_at_turn"]
    };
    out.write(&out.main, &csv_bytes(&header, &rows)?)?;
    let n = tot_n.max(1) as f64;
    out.summary(
        "belief-quality",
        args,
        json!({
            "samples": tot_n,
            "turns": turns,
            "grounded": tot_g / n,
            "learned": tot_l / n,
            "exact": if with_exact { json!(tot_e / n) } else { serde_json::Value::Null },
            "learned_between_fraction": if with_exact && turns > 0 { json!(between as f64 / turns as f64) } else { serde_json::Value::Null },
        }),
    )
}

pub fn cmd_layout(args: &LayoutArgs) -> Result<()> {
    let variant = load_variant(&args.variant)?;
    let doc = layout_document(&variant);
    match &args.out {
        Some(p) => std::fs::write(p, doc).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{doc}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecars_share_the_stem() {
        let o = Outputs { main: PathBuf::from("runs/eval.csv") };
        assert_eq!(o.sidecar("json"), PathBuf::from("runs/eval.json"));
        assert_eq!(o.sidecar("timing.csv"), PathBuf::from("runs/eval.timing.csv"));
    }

    #[test]
    fn result_row_counts_failures() {
        let ok = |i, s| GameResult {
            index: i,
            seed: i,
            score: Some(s),
            turns: 40,
            decisions: 10,
            deviations: 2,
            fallbacks: 1,
            error: None,
            elapsed_us: 5,
            search_us: 4,
            moves: vec![],
        };
        let bad = GameResult { score: None, error: Some("boom".into()), decisions: 0, ..ok(2, 0) };
        let r = ResultRow::from_games("x".into(), &[ok(0, 10), ok(1, 14), bad]);
        assert_eq!((r.n, r.failed), (2, 1));
        assert!((r.mean - 12.0).abs() < 1e-12);
        assert!((r.sem - 2.0).abs() < 1e-12);
        assert!((r.deviation_rate - 0.2).abs() < 1e-12);
        assert_eq!(r.status, "failed: boom");
        assert_eq!(r.record()[3], "12.000000");
    }

    #[test]
    fn fmt6_blanks_undefined() {
        assert_eq!(fmt6(f64::NAN), "");
        assert_eq!(fmt6(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn condition_labels() {
        let c = Condition::Search { mode: BeliefMode::Exact, depth: Depth::Full, searchers: Searchers::One(0), rollouts: 1 };
        assert_eq!(c.label(), "exact-inf");
        let c = Condition::Search { mode: BeliefMode::Learned, depth: Depth::Turns(16), searchers: Searchers::Both, rollouts: 1 };
        assert_eq!(c.label(), "both-lbs-16");
    }
}
