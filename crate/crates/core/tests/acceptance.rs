//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use munchkin_core::callgraph::build_callgraph;
use munchkin_core::executor::{run_concrete, CoverageMap, DEFAULT_STEP_LIMIT};
use munchkin_core::generator::{generate_program, ground_truth_coverage, GenParams, TABLE1_GRID};
use munchkin_core::ir::{InputVector, Program};
use munchkin_core::orchestrator::{
    run_all, run_fs, run_fuzz_only, run_sf, run_symex_only, CampaignReport, HybridConfig, Mode,
};
use munchkin_core::report::{
    emit_plot_dat, parse_plot_dat, plot_rows, render_plot_dat, report_to_json_without_duration,
};
use munchkin_core::symex::{symex_campaign, SymexConfig, SymexLimits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const TOTAL_FUNCS: [usize; 12] = [4, 8, 16, 32, 5, 14, 41, 122, 6, 22, 86, 342];

fn grid() -> impl Iterator<Item = (usize, u32, u32, Program)> {
    TABLE1_GRID.iter().enumerate().map(|(i, &(b, d))| {
        (
            i + 1,
            b,
            d,
            generate_program(&GenParams::new(b, d)).expect("grid params are valid"),
        )
    })
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn function_counts() -> Outcome {
    let start = Instant::now();
    let counts: Vec<usize> = TABLE1_GRID
        .iter()
        .map(|&(b, d)| generate_program(&GenParams::new(b, d)).map(|p| p.num_functions()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(counts == TOTAL_FUNCS, || format!("counts {counts:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{counts:?} in {elapsed:.2?}"))
}

fn symex_completeness() -> Outcome {
    let mut worst = (0u64, Duration::ZERO);
    for (id, _, _, p) in grid() {
        let start = Instant::now();
        let r = symex_campaign(
            &p,
            &SymexConfig::baseline(SymexLimits {
                max_states: 1_000_000,
                max_queries: 100_000,
            }),
        )
        .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure(r.coverage.functions().len() == p.num_functions(), || {
            format!(
                "P{id}: {}/{} functions",
                r.coverage.functions().len(),
                p.num_functions()
            )
        })?;
        ensure(r.stats.queries <= 100_000, || {
            format!("P{id}: {} queries", r.stats.queries)
        })?;
        ensure(elapsed <= Duration::from_secs(60), || format!("P{id}: {elapsed:?}"))?;
        worst = (worst.0.max(r.stats.queries), worst.1.max(elapsed));
    }
    Ok(format!("12/12 at 100%, max {} queries, max {:.2?}", worst.0, worst.1))
}

fn fs_efficiency() -> Outcome {
    let cfg = HybridConfig::default();
    let mut rows = Vec::new();
    for (id, _, _, p) in grid() {
        let fs = run_fs(&p, &cfg).map_err(|e| e.to_string())?;
        let symex = run_symex_only(&p, &cfg).map_err(|e| e.to_string())?;
        ensure(fs.percent() == 100 && fs.covered() == p.num_functions(), || {
            format!("P{id}: FS covered {}/{}", fs.covered(), p.num_functions())
        })?;
        ensure(symex.percent() == 100, || {
            format!("P{id}: symex-only {}%", symex.percent())
        })?;
        let (a, b) = (fs.solver_stats.queries, symex.solver_stats.queries);
        ensure(a < b, || format!("P{id}: FS {a} queries vs symex-only {b}"))?;
        rows.push(format!("P{id} {a}<{b}"));
    }
    Ok(rows.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let mut checked = 0;
    for (id, b, d, p) in grid() {
        let params = GenParams::new(b, d);
        if params.range_size() > 256 {
            continue;
        }
        let truth = ground_truth_coverage(&params).map_err(|e| e.to_string())?;
        let mut union = CoverageMap::new();
        let rejected = run_concrete(&p, &InputVector::new(vec![-1]), DEFAULT_STEP_LIMIT);
        ensure(
            rejected.coverage.functions() == &BTreeSet::from(["main".to_string()]),
            || format!("P{id}: input -1 covers {:?}", rejected.coverage.functions()),
        )?;
        union.merge_from(&rejected.coverage);
        for v in 0..params.range_size() as i64 {
            let run = run_concrete(&p, &InputVector::new(vec![v as i32]), DEFAULT_STEP_LIMIT);
            ensure(run.coverage.functions() == &truth[&v], || {
                format!("P{id}: input {v} differs from oracle")
            })?;
            union.merge_from(&run.coverage);
        }
        let all: BTreeSet<String> = p.function_names().map(String::from).collect();
        ensure(union.functions() == &all, || format!("P{id}: union misses functions"))?;
        checked += 1;
    }
    Ok(format!("{checked} programs, exact set equality"))
}

/// Every covered function of a report is entered by replaying its suite.
fn witnessed(p: &Program, r: &CampaignReport) -> bool {
    let mut replayed = CoverageMap::new();
    for t in &r.test_suite {
        replayed.merge_from(&run_concrete(p, t, DEFAULT_STEP_LIMIT).coverage);
    }
    r.coverage.functions().is_subset(replayed.functions())
}

fn soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut campaigns, mut tests) = (0u32, 0u64);
    for i in 0..600u32 {
        let b = rng.gen_range(2..=3);
        let d = rng.gen_range(1..=3);
        let params = GenParams::new(b, d).with_seed(rng.gen_range(0..4));
        let p = generate_program(&params).map_err(|e| e.to_string())?;
        let seed = rng.gen::<u64>();
        let limits = SymexLimits {
            max_states: rng.gen_range(1..200),
            max_queries: rng.gen_range(1..80),
        };
        match i % 4 {
            0 | 1 => {
                let cfg = if i % 4 == 0 {
                    SymexConfig {
                        rng_seed: seed,
                        ..SymexConfig::baseline(limits)
                    }
                } else {
                    let names: Vec<&str> = p.function_names().collect();
                    SymexConfig::sonar(names[rng.gen_range(0..names.len())], limits)
                };
                let r = symex_campaign(&p, &cfg).map_err(|e| e.to_string())?;
                for t in &r.test_cases {
                    let replay = run_concrete(&p, &t.input, DEFAULT_STEP_LIMIT);
                    ensure(t.covering.is_subset(replay.coverage.functions()), || {
                        format!("campaign {i}: test {:?} does not replay its attribution", t.input)
                    })?;
                    tests += 1;
                }
            }
            k => {
                let cfg = HybridConfig {
                    mode: if k == 2 { Mode::Fs } else { Mode::Sf },
                    fuzz_budget: rng.gen_range(0..100),
                    symex_limits: limits,
                    per_target_query_budget: rng.gen_range(1..50),
                    rng_seed: seed,
                    ..HybridConfig::default()
                };
                let r = if k == 2 { run_fs(&p, &cfg) } else { run_sf(&p, &cfg) }.map_err(|e| e.to_string())?;
                ensure(witnessed(&p, &r), || {
                    format!("campaign {i}: {} coverage not witnessed", r.technique)
                })?;
                tests += r.test_suite.len() as u64;
            }
        }
        campaigns += 1;
    }
    ensure(campaigns >= 500, || format!("only {campaigns} campaigns"))?;
    Ok(format!("{campaigns} campaigns, {tests} test cases replayed"))
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for (b, d) in [(3, 3), (2, 4)] {
        let p = generate_program(&GenParams::new(b, d)).map_err(|e| e.to_string())?;
        let cfg = HybridConfig {
            fuzz_budget: 300,
            rng_seed: 7,
            ..HybridConfig::default()
        };
        let runs: Vec<Vec<String>> = (0..3)
            .map(|_| {
                run_all(&p, &cfg)
                    .map(|rs| rs.iter().map(report_to_json_without_duration).collect())
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        ensure(runs.iter().all(|r| r == &runs[0]), || {
            format!("({b},{d}) reports differ between runs")
        })?;
        compared += runs[0].len();
    }
    Ok(format!("{compared} reports x 3 runs byte-identical"))
}

fn depth_profile() -> Outcome {
    let p = generate_program(&GenParams::new(3, 3)).map_err(|e| e.to_string())?;
    let cfg = HybridConfig {
        fuzz_budget: 200,
        ..HybridConfig::default()
    };
    let fuzz = run_fuzz_only(&p, &cfg);
    let fs = run_fs(&p, &cfg).map_err(|e| e.to_string())?;
    ensure(fuzz.percent() < 100, || {
        format!("fuzz-only already at {}%", fuzz.percent())
    })?;
    for (f, h) in fuzz.per_depth.iter().zip(&fs.per_depth) {
        ensure(f.depth == h.depth && h.percent >= f.percent, || {
            format!("depth {}: FS {}% < fuzz {}%", h.depth, h.percent, f.percent)
        })?;
    }
    let last = fs.per_depth.last().ok_or("empty depth table")?;
    ensure(last.percent == 100, || {
        format!("FS {}% at max depth {}", last.percent, last.depth)
    })?;
    let fmt = |r: &CampaignReport| {
        r.per_depth
            .iter()
            .map(|row| row.percent.to_string())
            .collect::<Vec<_>>()
            .join("/")
    };
    Ok(format!("fuzz {} vs FS {}", fmt(&fuzz), fmt(&fs)))
}

fn plot_format() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = HybridConfig {
        fuzz_budget: 100,
        ..HybridConfig::default()
    };
    let mut lines = 0;
    for (id, _, _, p) in grid() {
        let reports = run_all(&p, &cfg).map_err(|e| e.to_string())?;
        let tables = [0, 1, 2, 3].map(|i| reports[i].per_depth.as_slice());
        let path = dir.path().join(format!("plot-{}.dat", p.name()));
        emit_plot_dat(tables, &path).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        for (n, line) in text.lines().enumerate() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            ensure(cols.len() == 5, || {
                format!("P{id} line {}: {} columns", n + 1, cols.len())
            })?;
            ensure(cols[0].parse::<u32>().is_ok(), || {
                format!("P{id} line {}: depth `{}`", n + 1, cols[0])
            })?;
            ensure(cols[1..].iter().all(|c| c.parse::<f64>().is_ok()), || {
                format!("P{id} line {}: `{line}`", n + 1)
            })?;
            lines += 1;
        }
        let parsed = parse_plot_dat(&text).map_err(|e| e.to_string())?;
        let expected = plot_rows(tables).map_err(|e| e.to_string())?;
        ensure(parsed == expected, || format!("P{id}: parsed rows differ"))?;
        ensure(render_plot_dat(&parsed) == text, || format!("P{id}: re-render differs"))?;
        let cg = build_callgraph(&p);
        ensure(parsed.len() as u32 == cg.max_depth().unwrap_or(0) + 1, || {
            format!("P{id}: row count")
        })?;
    }
    Ok(format!("12 files, {lines} rows, round-trip exact"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("function-count fidelity", function_counts),
        ("symex completeness", symex_completeness),
        ("FS completeness and efficiency", fs_efficiency),
        ("oracle equivalence", oracle_equivalence),
        ("soundness of emitted tests", soundness),
        ("determinism", determinism),
        ("depth profile", depth_profile),
        ("plot-data format", plot_format),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {name}: {detail} ({:.2?})", i + 1, start.elapsed());
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
