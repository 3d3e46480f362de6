//! Acceptance suite: runs every criterion, prints one pass/fail line each,
//! then fails if any criterion failed.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{all_bottleneck, binomial, oracle_best, random_trajectories, rng, SMALL, TAU};
use tump::evaluation::{run_sweep, SweepSpec};
use tump::fixtures::demo_trajectories;
use tump::generator::{generate_city, generate_network, NetworkConfig, Technology};
use tump::io::{self, StationRegistry};
use tump::solvers::DEFAULT_ENUMERATION_CAP;
use tump::{
    build_hypergraph, build_instance, generate_mesh, generate_scenario, generate_star, solve, solve_decg,
    solve_decg_with, solve_incg, Algorithm, DecgOptions, Preset, ProblemInstance, StationId, Trajectory,
    VisitRecord,
};

type Outcome = Result<String, String>;

fn ids(names: &[u32]) -> Vec<StationId> {
    names.iter().map(|&i| StationId(i)).collect()
}

fn count(inst: &ProblemInstance, alg: Algorithm) -> usize {
    solve(inst, alg, DEFAULT_ENUMERATION_CAP).unwrap().solution.satisfied_count
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn golden_utilities() -> Outcome {
    let start = Instant::now();
    let expected = [
        (Algorithm::Exact, [11, 4, 2]),
        (Algorithm::SimG, [8, 4, 0]),
        (Algorithm::IncG, [11, 4, 0]),
        (Algorithm::DecG, [11, 4, 2]),
    ];
    for (alg, want) in expected {
        for (gamma, want) in [0.33, 0.5, 1.0].into_iter().zip(want) {
            let inst = build_instance(&demo_trajectories(), TAU, gamma, 3).unwrap();
            let got = count(&inst, alg);
            check(got == want, format!("{alg} at gamma {gamma}: got {got}, expected {want}"))?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("12 cells match in {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn golden_deletions() -> Outcome {
    let expected = [
        (0.33, [1, 2, 3, 5, 6, 7, 8, 13, 14, 15, 9, 10]),
        (0.5, [1, 2, 3, 8, 13, 14, 15, 5, 6, 4, 7, 9]),
        (1.0, [1, 7, 2, 6, 3, 4, 5, 8, 9, 13, 11, 15]),
    ];
    for (gamma, order) in expected {
        let inst = build_instance(&demo_trajectories(), TAU, gamma, 3).unwrap();
        let got = solve_decg(&inst, &BTreeSet::new()).unwrap().selection_order;
        let names: Vec<String> = got.iter().map(|s| s.to_string()).collect();
        check(got == ids(&order), format!("gamma {gamma}: {}", names.join(",")))?;
    }
    Ok("three deletion orders match".into())
}

fn oracle_dominance() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let heuristics = [Algorithm::SimG, Algorithm::IncG, Algorithm::DecG];
    let mut equal = [0usize; 3];
    for case in 0..500 {
        let ts = random_trajectories(&mut r, &SMALL);
        let gamma = [0.33, 0.5, 1.0][case % 3];
        let base = build_instance(&ts, TAU, gamma, 0).unwrap();
        let k = (1 + r.below(4)).min(base.n());
        let inst = base.with_budget(k);
        let exact = count(&inst, Algorithm::Exact);
        let brute = oracle_best(&ts, TAU, gamma, k);
        check(exact == brute, format!("case {case}: exact {exact} but brute force {brute}"))?;
        for (i, alg) in heuristics.into_iter().enumerate() {
            let h = count(&inst, alg);
            check(h <= exact, format!("case {case}: {alg} {h} beats exact {exact}"))?;
            equal[i] += usize::from(h == exact);
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "500 instances in {:.1} s; optimal in simg {}/500, incg {}/500, decg {}/500",
        elapsed.as_secs_f64(),
        equal[0],
        equal[1],
        equal[2]
    ))
}

fn incremental_equals_one_shot() -> Outcome {
    let mut r = rng(4);
    let mut splits = 0;
    for case in 0..200 {
        let ts = random_trajectories(&mut r, &SMALL);
        let gamma = [0.33, 0.5, 1.0][case % 3];
        let base = build_instance(&ts, TAU, gamma, 0).unwrap();
        let k = 1 + r.below(base.n().min(6));
        let inc_full = solve_incg(&base.with_budget(k), &BTreeSet::new()).unwrap();
        let dec_full = solve_decg(&base.with_budget(k), &BTreeSet::new()).unwrap();
        for k1 in 0..=k {
            let k2 = k - k1;
            splits += 1;
            let first = solve_incg(&base.with_budget(k1), &BTreeSet::new()).unwrap();
            let second = solve_incg(&base.with_budget(k2), &first.solution.upgraded).unwrap();
            check(
                second.solution.upgraded == inc_full.solution.upgraded,
                format!("case {case}: incg split {k1}+{k2} differs from one-shot {k}"),
            )?;

            let a = solve_decg(&base.with_budget(k1), &BTreeSet::new()).unwrap();
            let grown = solve_decg_with(
                &base.with_budget(k),
                &DecgOptions {
                    locked: a.solution.upgraded.clone(),
                    ..DecgOptions::default()
                },
            )
            .unwrap();
            check(
                grown.solution.upgraded == dec_full.solution.upgraded,
                format!("case {case}: decg split {k1}+{k2} differs from one-shot {k}"),
            )?;

            // continuing a larger run down to a smaller budget
            let frozen: BTreeSet<StationId> = dec_full.selection_order.iter().copied().collect();
            let shrunk = solve_decg(&base.with_budget(k1), &frozen).unwrap();
            check(
                shrunk.solution.upgraded == a.solution.upgraded,
                format!("case {case}: decg continuation to {k1} differs"),
            )?;
        }
    }
    Ok(format!("200 instances, {splits} splits, incg and decg identical"))
}

fn decg_bound() -> Outcome {
    let mut r = rng(5);
    let mut tight = 0;
    for case in 0..200 {
        let n = 4 + r.below(9);
        let m = 1 + r.below(30);
        let ts = all_bottleneck(&mut r, n, m, 4);
        let base = build_instance(&ts, TAU, 1.0, 0).unwrap();
        let k = 1 + r.below(base.n());
        let inst = base.with_budget(k);
        let got = count(&inst, Algorithm::DecG) as f64;
        let d = inst.d_max();
        let bound = inst.m() as f64 * binomial(k, d) / binomial(inst.n(), d);
        check(
            got + 1e-9 >= bound,
            format!("case {case}: decg {got} below bound {bound:.3} (n={}, k={k}, d_max={d})", inst.n()),
        )?;
        tight += usize::from(bound > 0.0);
    }
    Ok(format!("200 instances hold the bound ({tight} with a non-zero bound)"))
}

fn adversarial() -> Outcome {
    // half-overlap: T_j = {B_j, B_{j+h}} for j < h, plus T_m over B_1..B_h
    let n = 10u32;
    let h = n / 2;
    let visit = |s: u32| VisitRecord::new(StationId(s), 60_000, 100.0);
    let mut ts: Vec<Trajectory> = (1..=h - 1)
        .map(|j| Trajectory::new(j as u64, vec![visit(j), visit(j + h)]))
        .collect();
    ts.push(Trajectory::new(h as u64, (1..=h).map(visit).collect()));
    let mut simg_zero = Vec::new();
    for k in 2..h as usize {
        let inst = build_instance(&ts, TAU, 1.0, k).unwrap();
        let (s, e) = (count(&inst, Algorithm::SimG), count(&inst, Algorithm::Exact));
        check(s == 0 && e >= 1, format!("simg construction, k={k}: simg {s}, exact {e}"))?;
        simg_zero.push(k);
    }

    // two disjoint alternating trajectories, k = n/2
    let t1 = Trajectory::new(1, (1..=n).step_by(2).map(visit).collect());
    let t2 = Trajectory::new(2, (2..=n).step_by(2).map(visit).collect());
    let inst = build_instance(&[t1, t2], TAU, 1.0, h as usize).unwrap();
    let (i, e) = (count(&inst, Algorithm::IncG), count(&inst, Algorithm::Exact));
    check(i == 0 && e >= 1, format!("incg construction: incg {i}, exact {e}"))?;
    Ok(format!("n={n}: simg 0 for k in {simg_zero:?}, incg 0 at k={h}; exact >= 1 in both"))
}

fn network_statistics() -> Outcome {
    let city = generate_city(&Preset::BangaloreLike.config(21).city).unwrap();
    let mut cfg = NetworkConfig::with_seed(21);
    cfg.num_stations = Some(10_000);
    let stations = generate_network(&cfg, &city.homes, &city.offices).unwrap();
    check(stations.len() == 10_000, format!("{} stations", stations.len()))?;
    let n = stations.len() as f64;
    let g2 = stations.iter().filter(|s| s.technology == Technology::G2).count() as f64 / n;
    let congested = stations.iter().filter(|s| s.congested).count() as f64 / n;
    check((g2 - 0.82).abs() <= 0.02, format!("2G share {g2}"))?;
    check((congested - 0.20).abs() <= 0.02, format!("congested share {congested}"))?;
    for s in &stations {
        let [lo, hi] = cfg.ranges.range_for(s.technology, s.congested);
        check(
            (lo..=hi).contains(&s.per_user_throughput_kbps),
            format!("{} throughput {} outside [{lo}, {hi}]", s.id, s.per_user_throughput_kbps),
        )?;
    }
    Ok(format!("2G {g2:.4}, congested {congested:.4}, all throughputs in range"))
}

fn one_cell(algorithm: Algorithm, ts: &[Trajectory], seed: u64) -> f64 {
    let mut spec = SweepSpec::new(vec![algorithm], vec![0.2], vec![1.0]);
    spec.repetitions = 1;
    spec.seed = seed;
    run_sweep(&spec, ts).unwrap().rows[0].satisfied_fraction.unwrap()
}

fn star_vs_mesh() -> Outcome {
    let seed = 7;
    let star = generate_star(5_000, 430, seed).unwrap();
    let mesh = generate_mesh(5_000, 430, seed).unwrap();
    let s = one_cell(Algorithm::DecG, &star.trajectories, seed);
    let m = one_cell(Algorithm::DecG, &mesh.trajectories, seed);
    check(s > m, format!("star {s} is not above mesh {m}"))?;
    Ok(format!("decg at k'=0.2, gamma=1: star {s:.4} > mesh {m:.4}"))
}

fn headline_improvement() -> Outcome {
    let seed = 7;
    let cfg = Preset::NycLike.config(seed).scaled(0.1);
    let scenario = generate_scenario(&cfg).unwrap();
    let simg = one_cell(Algorithm::SimG, &scenario.trajectories, seed);
    let decg = one_cell(Algorithm::DecG, &scenario.trajectories, seed);
    check(decg >= 2.0 * simg, format!("decg {decg} < 2 x simg {simg}"))?;
    Ok(format!(
        "nyc-like, m={}: decg {decg:.4} vs simg {simg:.4} ({:.1}x)",
        scenario.trajectories.len(),
        decg / simg
    ))
}

fn monotonicity() -> Outcome {
    let mut r = rng(10);
    let k_grid = [0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
    let gamma_grid = [1.0, 0.8, 0.5, 0.33];
    let algorithms = vec![Algorithm::SimG, Algorithm::IncG, Algorithm::DecG, Algorithm::Exact];
    let mut violations = Vec::new();
    for case in 0..50 {
        let ts = random_trajectories(&mut r, &SMALL);
        let mut spec = SweepSpec::new(algorithms.clone(), k_grid.to_vec(), gamma_grid.to_vec());
        spec.repetitions = 1;
        let rows = run_sweep(&spec, &ts).unwrap().rows;
        let frac = |a: usize, ki: usize, gi: usize| {
            rows[(a * k_grid.len() + ki) * gamma_grid.len() + gi].satisfied_fraction.unwrap()
        };
        for (a, alg) in algorithms.iter().enumerate() {
            for gi in 0..gamma_grid.len() {
                for ki in 1..k_grid.len() {
                    if frac(a, ki, gi) < frac(a, ki - 1, gi) {
                        violations.push(format!(
                            "case {case} {alg}: gamma {} k' {} -> {} drops {} -> {}",
                            gamma_grid[gi],
                            k_grid[ki - 1],
                            k_grid[ki],
                            frac(a, ki - 1, gi),
                            frac(a, ki, gi)
                        ));
                    }
                }
            }
            for ki in 0..k_grid.len() {
                for gi in 1..gamma_grid.len() {
                    if frac(a, ki, gi) < frac(a, ki, gi - 1) {
                        violations.push(format!(
                            "case {case} {alg}: k' {} gamma {} -> {} drops {} -> {}",
                            k_grid[ki],
                            gamma_grid[gi - 1],
                            gamma_grid[gi],
                            frac(a, ki, gi - 1),
                            frac(a, ki, gi)
                        ));
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok("50 instances x 4 solvers monotone in k' and gamma".into())
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    }
}

fn scale_smoke() -> Outcome {
    let start = Instant::now();
    let cfg = Preset::NycLike.config(1);
    let scenario = generate_scenario(&cfg).unwrap();
    let generated = start.elapsed();
    let base = build_instance(&scenario.trajectories, TAU, 1.0, 0).unwrap();
    let k = tump::evaluation::budget_for(0.2, base.n());
    let inst = base.with_budget(k);
    let t = Instant::now();
    let dec = count(&inst, Algorithm::DecG);
    let dec_time = t.elapsed();
    let t = Instant::now();
    let inc = count(&inst, Algorithm::IncG);
    let inc_time = t.elapsed();
    let total = start.elapsed();
    check(total < Duration::from_secs(300), format!("took {total:?}"))?;
    let graph = build_hypergraph(&inst);
    let incidences: usize = (0..inst.n()).map(|v| graph.degree(v)).sum();
    check(
        incidences <= inst.m() * inst.d_max(),
        format!("{incidences} incidences exceed m*d_max"),
    )?;
    Ok(format!(
        "m={} n={} d_max={}: generate {:.1} s, decg {:.1} s ({dec}), incg {:.1} s ({inc}); {incidences} incidences <= m*d_max={}",
        inst.m(),
        inst.n(),
        inst.d_max(),
        generated.as_secs_f64(),
        dec_time.as_secs_f64(),
        inc_time.as_secs_f64(),
        inst.m() * inst.d_max()
    ))
}

fn round_trip_and_determinism() -> Outcome {
    let configs = vec![
        Preset::Star.config(3).scaled(0.2),
        Preset::Mesh.config(3).scaled(0.2),
        Preset::NycLike.config(3).scaled(0.02),
        Preset::AtlantaLike.config(3).scaled(0.02),
        Preset::BangaloreLike.config(3).scaled(0.04),
    ];
    for cfg in &configs {
        let a = generate_scenario(cfg).unwrap();
        let b = generate_scenario(cfg).unwrap();
        let files_a = io::render_scenario(cfg, &a).unwrap();
        let files_b = io::render_scenario(cfg, &b).unwrap();
        check(files_a == files_b, format!("{} output differs between runs", cfg.topology))?;

        let manifest = io::parse_manifest(&files_a.manifest).unwrap();
        let registry = StationRegistry::from_ordered(manifest.station_ids.clone());
        let trace = io::read_trace(files_a.trace.as_bytes(), Some(&registry)).unwrap();
        check(trace.trajectories == a.trajectories, "trajectories differ after round trip")?;
        let original = build_instance(&a.trajectories, TAU, 1.0, 5).unwrap();
        let parsed = build_instance(&trace.trajectories, TAU, 1.0, 5).unwrap();
        check(original == parsed, "instance differs after round trip")?;

        let k = tump::evaluation::budget_for(0.1, original.n());
        let inst = original.with_budget(k);
        for alg in [Algorithm::SimG, Algorithm::IncG, Algorithm::DecG] {
            let x = solve(&inst, alg, 0).unwrap();
            let y = solve(&parsed.with_budget(k), alg, 0).unwrap();
            check(
                x.selection_order == y.selection_order,
                format!("{alg} selection order differs between runs"),
            )?;
        }
    }
    Ok(format!("{} scenarios byte-identical, round-trip exact, solver orders stable", configs.len()))
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("golden utilities table", golden_utilities),
        ("golden deletion orders", golden_deletions),
        ("oracle dominance", oracle_dominance),
        ("incremental equals one-shot", incremental_equals_one_shot),
        ("decg approximation bound", decg_bound),
        ("no-bound adversarial instances", adversarial),
        ("generator network statistics", network_statistics),
        ("star beats mesh", star_vs_mesh),
        ("headline improvement (relaxed 2x)", headline_improvement),
        ("monotonicity in k' and gamma", monotonicity),
        ("scale smoke test", scale_smoke),
        ("round trip and determinism", round_trip_and_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
