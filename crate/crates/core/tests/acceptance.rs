//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails. Built with `harness = false`, so the lines are
//! visible under a plain `cargo test`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use plansteer::annotate::{annotate_suite, validate_annotations};
use plansteer::bench::{execute, latency_breakdown, summarize, BenchConfig, SummaryRow};
use plansteer::policy::{PolicyConfig, ReasoningPolicy};
use plansteer::rng::SegmentStreams;
use plansteer::rollout::{hypothesize_predict, replay, sync_pool, EnvPool, RolloutError, RoundSpec};
use plansteer::stats::{mean_se, newcombe_difference, wilson_interval};
use plansteer::steer::{run_episode, Episode, SteerConfig, Strategy};
use plansteer::taskworld::{sample_scene, state_hash, suite_size, SuiteTag};
use plansteer::verify::{LatencyModel, VerifierConfig};

type Outcome = Result<String, String>;

fn within(actual: f64, target: f64, rel: f64) -> bool {
    (actual - target).abs() <= rel * target
}

fn episode(suite: SuiteTag, task: usize, seed: u64, pcfg: &PolicyConfig, scfg: &SteerConfig, lat: &LatencyModel) -> Episode {
    run_episode(suite, task, seed, pcfg, scfg, lat).expect("episode runs")
}

/// Amortized latency of the calibrated preset on the in-distribution suite.
fn criterion_1() -> Outcome {
    let cfg = BenchConfig {
        suites: vec![SuiteTag::Id],
        k_sweep: vec![1, 10],
        steer: vec![SteerConfig::with(Strategy::Seal, 10)],
        ..BenchConfig::default()
    };
    let rows = latency_breakdown(&execute(&cfg).map_err(|e| e.to_string())?.records).map_err(|e| e.to_string())?;
    let targets = [(1usize, 86.0, 61.0, 147.0), (10, 184.0, 163.0, 347.0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, sample, wait, total) in targets {
        let row = rows.iter().find(|r| r.k == k).ok_or(format!("no row for k={k}"))?;
        let good = within(row.sample_ms_per_step, sample, 0.10)
            && within(row.verify_wait_ms_per_step, wait, 0.10)
            && within(row.total_ms_per_step, total, 0.10);
        ok &= good;
        parts.push(format!(
            "k={k}: sample {:.1} (target {sample}), wait {:.1} (target {wait}), total {:.1} (target {total})",
            row.sample_ms_per_step, row.verify_wait_ms_per_step, row.total_ms_per_step
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// With a perfect verifier, a segment is aligned unless all K candidates
/// pick the wrong object, so the aligned rate is 1 - p^K.
fn criterion_2() -> Outcome {
    const SEGMENTS: u64 = 2000;
    let basket_tasks = [0usize, 1, 7];
    let lat = LatencyModel { verifier: VerifierConfig::oracle(), ..LatencyModel::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.2, 0.5] {
        let pcfg = PolicyConfig { p_plan_err: 0.0, p_wrong: p, p_noise: 0.0, ..PolicyConfig::default() };
        for k in [1usize, 2, 5, 10] {
            let scfg = SteerConfig { step_budget: Some(1), ..SteerConfig::with(Strategy::Seal, k) };
            let aligned: u64 = (0..SEGMENTS)
                .into_par_iter()
                .map(|seed| {
                    let task = basket_tasks[(seed % 3) as usize];
                    let ep = episode(SuiteTag::Id, task, seed, &pcfg, &scfg, &lat);
                    u64::from(ep.trace[0].executed_aligned)
                })
                .sum();
            let expected = 1.0 - p.powi(k as i32);
            let (lo, hi) = wilson_interval(aligned, SEGMENTS, 0.99).map_err(|e| e.to_string())?;
            let good = (lo..=hi).contains(&expected);
            ok &= good;
            parts.push(format!(
                "p={p} k={k}: {:.4} vs {expected:.4} [{lo:.4}, {hi:.4}]{}",
                aligned as f64 / SEGMENTS as f64,
                if good { "" } else { " MISS" }
            ));
        }
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Steering over one candidate with a verifier that accepts instantly must
/// reproduce the unsteered run exactly.
fn criterion_3() -> Outcome {
    let pcfg = PolicyConfig::default();
    let lat = LatencyModel { verifier: VerifierConfig::accept_all(), ..LatencyModel::default() };
    let seal = SteerConfig::with(Strategy::Seal, 1);
    let none = SteerConfig::with(Strategy::None, 1);
    let mut mismatches = Vec::new();
    for seed in 0..100u64 {
        let suite = SuiteTag::ALL[(seed % 6) as usize];
        let task = (seed / 6) as usize % suite_size(suite);
        let mut a = episode(suite, task, seed, &pcfg, &seal, &lat).record;
        let b = episode(suite, task, seed, &pcfg, &none, &lat).record;
        a.strategy = b.strategy;
        if a != b {
            mismatches.push(seed);
        }
    }
    if mismatches.is_empty() {
        Ok("100 seeds across all suites, records identical apart from strategy".into())
    } else {
        Err(format!("records differ for seeds {mismatches:?}"))
    }
}

fn mean_steps_se(records: &[plansteer::steer::TrialRecord], k: usize) -> (f64, f64) {
    let xs: Vec<f64> = records.iter().filter(|r| r.k == k).map(|r| r.env_steps as f64).collect();
    mean_se(&xs)
}

/// Success does not drop and episode length does not grow as K increases,
/// beyond what the confidence intervals allow, while per-step latency rises.
fn criterion_4() -> Outcome {
    let cfg = BenchConfig {
        suites: vec![SuiteTag::Id],
        steer: vec![SteerConfig::with(Strategy::Seal, 10)],
        ..BenchConfig::default()
    };
    let res = execute(&cfg).map_err(|e| e.to_string())?;
    let lat = latency_breakdown(&res.records).map_err(|e| e.to_string())?;
    let rows: Vec<SummaryRow> = summarize(&res.records)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|r| r.task == "all")
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for pair in cfg.k_sweep.windows(2) {
        let (k0, k1) = (pair[0], pair[1]);
        let r0 = rows.iter().find(|r| r.k == k0).ok_or("missing row")?;
        let r1 = rows.iter().find(|r| r.k == k1).ok_or("missing row")?;
        let succ_ok = r1.success_rate >= r0.success_rate || r1.ci_hi >= r0.ci_lo;
        let (m0, s0) = mean_steps_se(&res.records, k0);
        let (m1, s1) = mean_steps_se(&res.records, k1);
        let steps_ok = m1 <= m0 || m1 - 1.96 * s1 <= m0 + 1.96 * s0;
        let t0 = lat.iter().find(|r| r.k == k0).ok_or("missing latency row")?.total_ms_per_step;
        let t1 = lat.iter().find(|r| r.k == k1).ok_or("missing latency row")?.total_ms_per_step;
        let lat_ok = t1 > t0;
        ok &= succ_ok && steps_ok && lat_ok;
        parts.push(format!(
            "k {k0}->{k1}: success {:.3}->{:.3}, steps {m0:.1}->{m1:.1}, total {t0:.1}->{t1:.1} ms/step{}",
            r0.success_rate,
            r1.success_rate,
            if succ_ok && steps_ok && lat_ok { "" } else { " VIOLATION" }
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Verified steering beats both the unsteered policy and the miscalibrated
/// value heuristic on the hardest suites, and the heuristic does worse than
/// no steering at all on the composition suite.
fn criterion_5() -> Outcome {
    let cfg = BenchConfig {
        suites: vec![SuiteTag::Compose, SuiteTag::VisualViewpoint],
        k_sweep: vec![10],
        ..BenchConfig::default()
    };
    let rows: Vec<SummaryRow> = summarize(&execute(&cfg).map_err(|e| e.to_string())?.records)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|r| r.task == "all")
        .collect();
    let get = |suite: SuiteTag, strategy: Strategy| {
        rows.iter()
            .find(|r| r.suite == suite && r.strategy == strategy)
            .ok_or(format!("missing {suite} {strategy}"))
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for suite in cfg.suites.clone() {
        let seal = get(suite, Strategy::Seal)?;
        for other in [Strategy::None, Strategy::Value] {
            let o = get(suite, other)?;
            let (lo, _) = newcombe_difference(seal.successes, seal.trials, o.successes, o.trials, 0.95)
                .map_err(|e| e.to_string())?;
            ok &= lo > 0.0;
            parts.push(format!(
                "{suite}: seal {:.3} vs {other} {:.3}, gap lower bound {lo:.3}",
                seal.success_rate, o.success_rate
            ));
        }
    }
    let value = get(SuiteTag::Compose, Strategy::Value)?;
    let none = get(SuiteTag::Compose, Strategy::None)?;
    let below = value.success_rate < none.success_rate;
    ok &= below;
    parts.push(format!("compose: value {:.3} < none {:.3}: {below}", value.success_rate, none.success_rate));
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// After every sync all replicas equal the base, and the base equals the
/// chosen branch replayed from the pre-sync state. Syncing a candidate that
/// no longer matches the base is refused.
fn criterion_6() -> Outcome {
    const TARGET: u64 = 10_000;
    let pcfg = PolicyConfig::default();
    let lat = LatencyModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut segments = 0u64;
    let mut stale_checks = 0u64;
    let mut ep = 0u64;
    while segments < TARGET {
        let suite = SuiteTag::ALL[(ep % 6) as usize];
        let task_index = rng.gen_range(0..suite_size(suite));
        let seed = rng.gen::<u64>();
        let k = rng.gen_range(1..=10);
        let (state, task) = sample_scene(suite, task_index, seed).map_err(|e| e.to_string())?;
        let policy = ReasoningPolicy::new(&pcfg, suite);
        let spec = RoundSpec { policy: &policy, lat: &lat, t0: 0.0, dynamics_noise: 0.0, chunk_len: None };
        let mut pool = EnvPool::new(&state, k);
        let mut last = None;
        for s in 0..12u64 {
            let streams = SegmentStreams::new(seed, s);
            let real = pool.base_state().clone();
            let Some(plan) = policy
                .generate_plan(&real, last.as_ref(), &task, &mut streams.plan())
                .map_err(|e| e.to_string())?
            else {
                break;
            };
            let cands = hypothesize_predict(&mut pool, &plan, &spec, &streams).map_err(|e| e.to_string())?;
            let pick = rng.gen_range(0..k);
            let expected = replay(&real, &cands[pick].tokens);
            sync_pool(&mut pool, &cands[pick]).map_err(|e| e.to_string())?;
            pool.check_coherent().map_err(|e| format!("episode {ep} segment {s}: {e}"))?;
            if pool.base_state() != &expected {
                return Err(format!("episode {ep} segment {s}: base differs from replay"));
            }
            let h = state_hash(&expected);
            if pool.replica_hashes().iter().any(|&r| r != h) {
                return Err(format!("episode {ep} segment {s}: replica hash mismatch"));
            }
            if h != state_hash(&real) {
                let other = &cands[(pick + 1) % k];
                if !matches!(sync_pool(&mut pool, other), Err(RolloutError::Stale { .. })) {
                    return Err(format!("episode {ep} segment {s}: stale sync accepted"));
                }
                stale_checks += 1;
            }
            last = Some(plan);
            segments += 1;
            if segments == TARGET {
                break;
            }
        }
        ep += 1;
    }
    Ok(format!("{segments} segments over {ep} episodes coherent; {stale_checks} stale syncs refused"))
}

/// Annotated demonstrations validate without a single violation.
fn criterion_7() -> Outcome {
    let per_suite = [167usize, 167, 167, 167, 166, 166];
    let mut episodes = 0;
    let mut segments = 0;
    let mut violations = Vec::new();
    for (suite, n) in SuiteTag::ALL.into_iter().zip(per_suite) {
        let data = annotate_suite(suite, n, 1000).map_err(|e| e.to_string())?;
        let rep = validate_annotations(&data);
        episodes += rep.episodes;
        segments += rep.segments;
        violations.extend(rep.violations.into_iter().map(|v| format!("{suite}: {}", v.detail)));
    }
    if episodes != 1000 {
        return Err(format!("expected 1000 demos, got {episodes}"));
    }
    if violations.is_empty() {
        Ok(format!("{episodes} demos, {segments} segments, 0 violations"))
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    }
}

/// A verifier that rejects everything forces a fallback on every segment; a
/// perfect verifier leaves a segment misaligned exactly when no candidate was
/// aligned.
fn criterion_8() -> Outcome {
    let pcfg = PolicyConfig::default();
    let calibrated = LatencyModel::calibrated();
    let reject = LatencyModel {
        verifier: VerifierConfig { beta: 1.0, alpha: 0.0, ..calibrated.verifier },
        ..calibrated
    };
    let scfg = SteerConfig::with(Strategy::Seal, 5);
    let mut seg_total = 0u64;
    for seed in 0..120u64 {
        let suite = SuiteTag::ALL[(seed % 6) as usize];
        let ep = episode(suite, (seed / 6) as usize % suite_size(suite), seed, &pcfg, &scfg, &reject);
        let r = &ep.record;
        if r.fallback_count != r.reasoning_steps || ep.trace.iter().any(|t| !t.fallback_used) {
            return Err(format!("seed {seed}: {} fallbacks over {} segments", r.fallback_count, r.reasoning_steps));
        }
        seg_total += r.reasoning_steps;
    }

    let oracle = LatencyModel { verifier: VerifierConfig { alpha: 0.0, beta: 0.0, ..calibrated.verifier }, ..calibrated };
    let scfg = SteerConfig::with(Strategy::Seal, 3);
    let mut misaligned = 0u64;
    for seed in 0..300u64 {
        let suite = SuiteTag::ALL[(seed % 6) as usize];
        let ep = episode(suite, (seed / 6) as usize % suite_size(suite), seed, &pcfg, &scfg, &oracle);
        let none_aligned = ep.trace.iter().filter(|t| t.candidates.iter().all(|c| !c.aligned)).count() as u64;
        if ep.record.misaligned_segments != none_aligned {
            return Err(format!(
                "seed {seed}: {} misaligned segments but {none_aligned} with no aligned candidate",
                ep.record.misaligned_segments
            ));
        }
        misaligned += none_aligned;
    }
    if misaligned == 0 {
        return Err("perfect-verifier runs produced no misaligned segment to cross-check".into());
    }
    Ok(format!(
        "reject-all: fallback on all {seg_total} segments; perfect verifier: {misaligned} misaligned segments all unrecoverable"
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "amortized latency breakdown", criterion_1),
        (2, "best-of-K alignment law", criterion_2),
        (3, "single-candidate equivalence", criterion_3),
        (4, "trend over K", criterion_4),
        (5, "strategy ordering", criterion_5),
        (6, "pool coherence and replay", criterion_6),
        (7, "annotation validity", criterion_7),
        (8, "fallback and misalignment accounting", criterion_8),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
