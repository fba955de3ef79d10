//! One pass/fail line per acceptance criterion.
//!
//! `HLBS_ACCEPT_ONLY=3,7` runs a subset. `HLBS_FULL=1` runs criterion 6 at
//! full size (2000 paired games) instead of the 200-game smoke version.
//! Failures are reported but only change the exit status under
//! `HLBS_ACCEPT_STRICT=1`.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hlbs::belief::{ExactBeliefTracker, LearnedBeliefModel, TrackerConfig};
use hlbs::cli::{belief_curves, stats};
use hlbs::engine::{Card, GameState, Variant};
use hlbs::learn::{generate_selfplay, train_belief, TrainConfig, ZeroValue};
use hlbs::observe::Observation;
use hlbs::policy::{Blueprint, RuleBlueprint};
use hlbs::rng::{game_seed, stream};
use hlbs::search::*;
use rand::Rng as _;

const BP: RuleBlueprint = RuleBlueprint::V1;

// Tolerances.
const ORACLE_TOL: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-4;
const CE_MARGIN: f64 = 0.02;
const SMOKE_P: f64 = 0.05;
const FULL_P: f64 = 0.01;
const RSS_SPREAD: f64 = 0.10;
const RSS_CEILING_KIB: u64 = 512 * 1024;
const BOOTSTRAP_SE: f64 = 2.0;
const UCB_AGREEMENT: f64 = 0.95;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn standard_model() -> &'static LearnedBeliefModel {
    static M: OnceLock<LearnedBeliefModel> = OnceLock::new();
    M.get_or_init(|| {
        let buf = generate_selfplay(&BP, Variant::standard(), 10_000, 1234);
        train_belief(&buf, &TrainConfig::default()).unwrap().0
    })
}

fn hlbs_bin<S: AsRef<std::ffi::OsStr> + std::fmt::Debug>(
    args: &[S],
    envs: &[(&str, &str)],
) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hlbs"))
        .args(args)
        .envs(envs.iter().copied())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("hlbs {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

// 1 ------------------------------------------------------------------------

fn rules() -> Outcome {
    let v = Variant::standard();
    ensure(v.deck_size() == 50, "deck size")?;
    let deck = v.full_deck();
    for c in 0..5u8 {
        let counts: Vec<u8> = (0..5u8).map(|r| deck.get(Card::new(c, r))).collect();
        ensure(counts == [3, 2, 2, 2, 1], format!("color {c} counts {counts:?}"))?;
    }
    // The fuzz checks conservation each step, zero on bomb-out and one final
    // turn per player after the deck empties.
    let mut games = 0;
    for (i, v) in [Variant::standard(), Variant::six_card(), Variant::seven_card(), Variant::mini()].into_iter().enumerate()
    {
        games += common::random_playout_fuzz(v, 100 + i as u64, 250_000)?;
    }
    Ok(format!("1e6 fuzz steps over {games} games"))
}

// 2 ------------------------------------------------------------------------

fn exact_oracle() -> Outcome {
    let v = Variant::mini();
    let deals = common::all_deals(&v);
    let mut worst = 0.0f64;
    let mut turns = 0;
    for seed in 0..200 {
        for observer in 0..2 {
            let (e, n) = common::tracker_max_error(v, &deals, &BP, seed, observer);
            worst = worst.max(e);
            turns += n;
        }
    }
    ensure(worst <= ORACLE_TOL, format!("max error {worst:.3e}"))?;
    Ok(format!("200 games, {turns} observer-turns, max error {worst:.1e}"))
}

// 3 ------------------------------------------------------------------------

fn belief_ordering() -> Outcome {
    let v = Variant::mini();
    let buf = generate_selfplay(&BP, v, 8000, 1234);
    let (model, report) = train_belief(&buf, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let mut per_turn: Vec<[f64; 4]> = Vec::new(); // grounded, learned, exact, n
    for i in 0..500 {
        let c = belief_curves(v, &BP, &model, TrackerConfig::default(), game_seed(7, i)).map_err(|e| e.to_string())?;
        let exact = c.exact.ok_or("exact tracker overflowed on mini")?;
        for t in 0..c.grounded.len() {
            ensure(
                exact[t] <= c.grounded[t] + 1e-12,
                format!("game {i} turn {t}: exact {} > grounded {}", exact[t], c.grounded[t]),
            )?;
            if per_turn.len() <= t {
                per_turn.push([0.0; 4]);
            }
            per_turn[t][0] += c.grounded[t];
            per_turn[t][1] += c.learned[t];
            per_turn[t][2] += exact[t];
            per_turn[t][3] += 1.0;
        }
    }
    let n: f64 = per_turn.iter().map(|r| r[3]).sum();
    let avg = |k: usize| per_turn.iter().map(|r| r[k]).sum::<f64>() / n;
    let (g, l, e) = (avg(0), avg(1), avg(2));
    let between = per_turn.iter().filter(|r| r[2] <= r[1] && r[1] < r[0]).count();
    let detail = format!(
        "CE/card exact {e:.4} learned {l:.4} grounded {g:.4}; learned between on {between}/{} turns; converged {}",
        per_turn.len(),
        report.converged
    );
    ensure(e <= l && l < g && g - l >= CE_MARGIN, detail.clone())?;
    Ok(detail)
}

// 4 ------------------------------------------------------------------------

fn gradients() -> Outcome {
    let v = Variant::mini();
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let s = common::blueprint_state_at(v, &BP, 1000 + i, (i % 11) as usize);
        let p = s.current_player();
        let mut m = common::random_model(v, i, 0.5);
        worst = worst.max(common::gradient_check(&mut m, &Observation::new(&s, p), s.hand(p)));
    }
    ensure(worst < GRAD_TOL, format!("worst relative error {worst:.3e}"))?;
    Ok(format!("100 instances, worst relative error {worst:.1e}"))
}

// 5 ------------------------------------------------------------------------

fn delta_infinity() -> Outcome {
    let v = Variant::standard();
    let model = standard_model();
    let config = SearchConfig { num_rollouts: 50, depth: Depth::Full, delta: f64::INFINITY, ..Default::default() };
    let setup = SearchSetup {
        blueprint: &BP,
        value: &ZeroValue,
        belief: Some(model),
        tracker: TrackerConfig::default(),
        config,
    };
    for i in 0..500 {
        let seed = game_seed(0, i);
        let g = play_game_with_search(v, seed, Searchers::One((i % 2) as usize), &setup).map_err(|e| e.to_string())?;
        let bp = common::blueprint_states(v, &BP, seed);
        let bp_actions: Vec<_> = bp.last().unwrap().events().iter().map(|e| e.action).collect();
        ensure(g.actions == bp_actions, format!("game {i} diverges from the blueprint"))?;
    }
    Ok("500 games identical to blueprint self-play".into())
}

// 6 ------------------------------------------------------------------------

fn full_run() -> bool {
    std::env::var("HLBS_FULL").is_ok_and(|v| v == "1")
}

fn search_improves() -> Outcome {
    let full = full_run();
    let (games, p_max) = if full { (2000u64, FULL_P) } else { (200, SMOKE_P) };
    let v = Variant::standard();
    let model = standard_model();
    let config = SearchConfig { num_rollouts: 1000, depth: Depth::Full, delta: 0.05, ..Default::default() };
    let run = |mode: BeliefMode| -> Result<Vec<f64>, String> {
        let setup = SearchSetup {
            blueprint: &BP,
            value: &ZeroValue,
            belief: Some(model),
            tracker: TrackerConfig::default(),
            config: SearchConfig { mode, ..config },
        };
        (0..games)
            .map(|i| {
                play_game_with_search(v, game_seed(0, i), Searchers::One(0), &setup)
                    .map(|g| g.score as f64)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let bp: Vec<f64> = (0..games).map(|i| blueprint_score(&BP, v, game_seed(0, i)) as f64).collect();
    let lbs = run(BeliefMode::Learned)?;
    let exact = run(BeliefMode::Exact)?;
    let t_lbs = stats::sign_test(&lbs, &bp);
    let t_exact = stats::sign_test(&exact, &bp);
    let (m_bp, m_lbs, m_exact) = (stats::mean(&bp), stats::mean(&lbs), stats::mean(&exact));
    let detail = format!(
        "{games} games: blueprint {m_bp:.3}, lbs-inf {m_lbs:.3} (p {:.2e}), exact-inf {m_exact:.3} (p {:.2e}){}",
        t_lbs.p_two_sided,
        t_exact.p_two_sided,
        if full { "" } else { " [smoke; HLBS_FULL=1 for 2000 games]" }
    );
    let better = m_lbs > m_bp && m_exact > m_bp;
    ensure(
        better && t_lbs.p_two_sided < p_max && t_exact.p_two_sided < p_max && m_exact >= m_lbs,
        detail.clone(),
    )?;
    Ok(detail)
}

// 7 ------------------------------------------------------------------------

fn peak_rss_kib(stderr: &[u8]) -> Option<u64> {
    String::from_utf8_lossy(stderr).lines().find_map(|l| l.strip_prefix("peak_rss_kib ")?.trim().parse().ok())
}

fn memory_scaling() -> Outcome {
    let seven = Variant::seven_card();
    ensure(seven.max_hint_tokens() == 4, "7-card hint cap")?;
    let s = GameState::new_game(seven, 0);
    match ExactBeliefTracker::new(&Observation::new(&s, 0), &BP, TrackerConfig::default()) {
        Err(e) if e.to_string().contains("belief-space too large") => {}
        Err(e) => return Err(format!("unexpected error {e}")),
        Ok(_) => return Err("exact tracker accepted a 7-card hand".into()),
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rss = Vec::new();
    for name in ["standard", "6card", "7card"] {
        let model = dir.path().join(format!("{name}.bin"));
        hlbs_bin(
            &[
                "train", "--variant", name, "--games", "500", "--steps", "300", "--jobs", "1", "--out",
                &path_str(&dir.path().join(format!("{name}-train.csv"))), "--belief", &path_str(&model), "--value",
                &path_str(&dir.path().join(format!("{name}-value.bin"))),
            ],
            &[],
        )?;
        let out = hlbs_bin(
            &[
                "eval", "--variant", name, "--games", "50", "--rollouts", "100", "--conditions", "lbs-inf", "--belief",
                &path_str(&model), "--jobs", "1", "--out", &path_str(&dir.path().join(format!("{name}-eval.csv"))),
            ],
            &[("HLBS_PEAK_RSS", "1")],
        )?;
        let games = std::fs::read_to_string(dir.path().join(format!("{name}-eval.csv"))).map_err(|e| e.to_string())?;
        let row: Vec<&str> = games.lines().nth(1).unwrap_or_default().split(',').collect();
        ensure(row.get(1) == Some(&"50") && row.get(2) == Some(&"0"), format!("{name}: not all 50 games finished"))?;
        rss.push((name, peak_rss_kib(&out.stderr).ok_or("no peak_rss_kib line")?));
    }
    let lo = rss.iter().map(|r| r.1).min().unwrap() as f64;
    let hi = rss.iter().map(|r| r.1).max().unwrap() as f64;
    let detail = format!(
        "exact 7-card rejected; learned peak RSS {}",
        rss.iter().map(|(n, k)| format!("{n} {:.1} MiB", *k as f64 / 1024.0)).collect::<Vec<_>>().join(", ")
    );
    ensure(hi <= RSS_CEILING_KIB as f64 && hi / lo - 1.0 <= RSS_SPREAD, detail.clone())?;
    Ok(detail)
}

// 8 ------------------------------------------------------------------------

fn bootstrap_consistency() -> Outcome {
    let v = Variant::standard();
    let value = CompletionMeanValue { blueprint: BP, completions: 8 };
    let mut rng = stream(8, &[]);
    let mut diffs = Vec::new();
    let mut seed = 0u64;
    while diffs.len() < 1000 {
        seed += 1;
        let s = common::blueprint_state_at(v, &BP, game_seed(8, seed), rng.random_range(2..40));
        if s.is_terminal() {
            continue;
        }
        let a = BP.act_in(&s);
        let mut d = 0.0;
        for _ in 0..4 {
            // Keeping the true hand and reshuffling the deck gives both
            // estimators the same distribution of futures.
            let p = s.current_player();
            let w = impute(&s, p, s.hand(p), &mut rng);
            let full = rollout_return(&w, a, Depth::Full, &BP, &ZeroValue, &mut rng);
            let boot = rollout_return(&w, a, Depth::Turns(2), &BP, &value, &mut rng);
            d += (full - boot) / 4.0;
        }
        diffs.push(d);
    }
    let m = stats::mean(&diffs);
    let se = stats::sem(&diffs);
    let detail = format!("1000 states: mean(full - bootstrapped) {m:+.4}, SE {se:.4}");
    ensure(m.abs() <= BOOTSTRAP_SE * se, detail.clone())?;
    Ok(detail)
}

// 9 ------------------------------------------------------------------------

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|r| r.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let models = root.path().join("models");
    std::fs::create_dir_all(&models).map_err(|e| e.to_string())?;
    let (b, v) = (path_str(&models.join("b.bin")), path_str(&models.join("v.bin")));
    hlbs_bin(
        &[
            "train", "--variant", "mini", "--games", "400", "--steps", "300", "--out",
            &path_str(&models.join("t.csv")), "--belief", &b, "--value", &v,
        ],
        &[],
    )?;
    let strs = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<String>>();
    let search = strs(&["--variant", "mini", "--games", "8", "--rollouts", "40", "--belief", &b, "--value", &v]);
    let with = |head: &str, tail: &[&str]| [strs(&[head]), search.clone(), strs(tail)].concat();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("train", strs(&["train", "--variant", "mini", "--games", "200", "--steps", "200"])),
        ("eval", with("eval", &["--conditions", "blueprint,lbs-inf,exact-inf,lbs-2", "--moves"])),
        ("belief-quality", strs(&["belief-quality", "--variant", "mini", "--games", "20", "--belief", &b])),
        ("sweep-depth", with("sweep-depth", &["--depths", "1,2,4"])),
        ("sweep-budget", with("sweep-budget", &["--budget-games", "200", "--budget-steps", "100", "--splits", "0.2,0.6"])),
        ("degradation", with("degradation", &[])),
        ("layout", strs(&["layout", "--variant", "mini"])),
    ];
    let mut checked = 0;
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for (run, jobs) in [("a", "1"), ("b", "8"), ("c", "8")] {
            let dir = root.path().join(format!("{name}-{run}"));
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let mut full = args.clone();
            full.extend(strs(&["--out", &path_str(&dir.join("out.csv"))]));
            if *name != "layout" {
                full.extend(strs(&["--jobs", jobs]));
            }
            if *name == "train" {
                full.extend(strs(&["--belief", &path_str(&dir.join("b.bin")), "--value", &path_str(&dir.join("v.bin"))]));
            }
            let out = hlbs_bin(&full, &[])?;
            let mut files: Vec<(String, Vec<u8>)> = files_in(&dir)
                .into_iter()
                .filter(|p| !p.to_string_lossy().ends_with(".timing.csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect();
            files.push(("stdout".into(), out.stdout));
            outputs.push(files);
        }
        for other in &outputs[1..] {
            for (a, b) in outputs[0].iter().zip(other) {
                ensure(a == b, format!("{name}: {} differs between runs", a.0))?;
            }
            ensure(outputs[0].len() == other.len(), format!("{name}: different file sets"))?;
        }
        checked += outputs[0].len();
    }
    Ok(format!("{} commands, {checked} outputs byte-identical across jobs 1/8 and reruns", commands.len()))
}

// 10 -----------------------------------------------------------------------

fn ucb_soundness() -> Outcome {
    let v = Variant::standard();
    let model = standard_model();
    let src = BeliefSource::Learned(model);
    let base = SearchConfig { num_rollouts: 400, depth: Depth::Full, ..Default::default() };
    let inf = SearchConfig { ucb: UcbConfig { enabled: true, c: f64::INFINITY, min_samples: 8 }, ..base };
    let c3 = SearchConfig { ucb: UcbConfig { enabled: true, c: 3.0, min_samples: 8 }, ..base };
    let mut rng = stream(10, &[]);
    let (mut agree, mut pruned_any) = (0, 0);
    for i in 0..1000u64 {
        let s = common::blueprint_state_at(v, &BP, game_seed(10, i), rng.random_range(0..50));
        let seed = game_seed(11, i);
        let (a, mut ra) = decide(&s, src, &BP, &ZeroValue, &base, seed).map_err(|e| e.to_string())?;
        let (b, mut rb) = decide(&s, src, &BP, &ZeroValue, &inf, seed).map_err(|e| e.to_string())?;
        ra.elapsed_us = 0;
        rb.elapsed_us = 0;
        ensure(a == b && ra == rb, format!("decision {i}: c = inf differs from unpruned"))?;
        let (c, rc) = decide(&s, src, &BP, &ZeroValue, &c3, seed).map_err(|e| e.to_string())?;
        agree += (c == a) as usize;
        pruned_any += rc.estimates.iter().any(|e| e.eliminated) as usize;
    }
    let frac = agree as f64 / 1000.0;
    let detail = format!("c=inf identical on 1000/1000; c=3 agrees on {frac:.3} ({pruned_any} decisions pruned)");
    ensure(frac >= UCB_AGREEMENT, detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "rules conformance", rules, Duration::from_secs(60)),
        (2, "exact belief oracle", exact_oracle, Duration::from_secs(300)),
        (3, "belief ordering", belief_ordering, Duration::from_secs(900)),
        (4, "gradient check", gradients, Duration::from_secs(60)),
        (5, "delta degeneracy", delta_infinity, Duration::from_secs(300)),
        (6, "search beats blueprint", search_improves, Duration::from_secs(if full_run() { 4 * 3600 } else { 1200 })),
        (7, "memory scaling", memory_scaling, Duration::from_secs(1800)),
        (8, "bootstrap consistency", bootstrap_consistency, Duration::from_secs(600)),
        (9, "determinism", determinism, Duration::from_secs(600)),
        (10, "ucb soundness", ucb_soundness, Duration::from_secs(900)),
    ];
    let only: Option<Vec<u32>> = std::env::var("HLBS_ACCEPT_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if took <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {}s budget", budget.as_secs())),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} {status} {name} ({:.1}s): {detail}", took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        if std::env::var("HLBS_ACCEPT_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
