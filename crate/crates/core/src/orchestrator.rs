//! Hybrid campaigns: fuzzing followed by targeted symbolic execution (FS),
//! symbolic execution followed by seeded fuzzing (SF), and the two
//! single-technique baselines.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::{build_callgraph, frontier_set, CallGraph, DistanceCache};
use crate::executor::{CoverageMap, DEFAULT_STEP_LIMIT};
use crate::fuzzer::{fuzz_campaign, FuzzConfig};
use crate::ir::{FunctionName, InputVector, Program};
use crate::report::{depth_table, DepthRow};
use crate::symex::{
    symex_campaign, symex_campaign_with, Solver, SolverStats, Strategy, SymResult, SymexConfig, SymexError,
    SymexLimits, DEFAULT_MAX_INPUTS,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid hybrid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Symex(#[from] SymexError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "fs")]
    Fs,
    #[serde(rename = "sf")]
    Sf,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fs" => Ok(Mode::Fs),
            "sf" => Ok(Mode::Sf),
            other => Err(format!("unknown mode `{other}` (expected fs or sf)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "AFL-like")]
    AflLike,
    #[serde(rename = "SymexOnly")]
    SymexOnly,
    #[serde(rename = "FS")]
    Fs,
    #[serde(rename = "SF")]
    Sf,
}

impl Technique {
    /// Column order of plot files.
    pub const PLOT_ORDER: [Technique; 4] = [Technique::SymexOnly, Technique::AflLike, Technique::Fs, Technique::Sf];

    pub fn label(self) -> &'static str {
        match self {
            Technique::AflLike => "AFL-like",
            Technique::SymexOnly => "SymexOnly",
            Technique::Fs => "FS",
            Technique::Sf => "SF",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridConfig {
    pub mode: Mode,
    /// Fuzzer executions after the seeds.
    pub fuzz_budget: u64,
    /// Limits of the SF symex phase and of the symex-only baseline. In FS the
    /// state limit applies to each target.
    pub symex_limits: SymexLimits,
    /// Query budget of each FS target.
    pub per_target_query_budget: u64,
    pub seeds: Vec<InputVector>,
    pub rng_seed: u64,
    pub step_limit: u64,
    pub max_inputs: u32,
    /// Run the FS targets of each frontier wave concurrently.
    pub parallel: bool,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fs,
            fuzz_budget: 2_000,
            symex_limits: SymexLimits::default(),
            per_target_query_budget: 10_000,
            seeds: Vec::new(),
            rng_seed: 0,
            step_limit: DEFAULT_STEP_LIMIT,
            max_inputs: DEFAULT_MAX_INPUTS,
            parallel: false,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.mode == Mode::Fs && self.per_target_query_budget == 0 {
            return Err(OrchestratorError::Config(
                "FS requires per_target_query_budget > 0".into(),
            ));
        }
        if self.symex_limits.max_states == 0 || self.symex_limits.max_queries == 0 {
            return Err(OrchestratorError::Config("symex limits must be positive".into()));
        }
        if self.step_limit == 0 {
            return Err(OrchestratorError::Config("step_limit must be positive".into()));
        }
        Ok(())
    }

    fn fuzz_config(&self) -> FuzzConfig {
        FuzzConfig {
            rng_seed: self.rng_seed,
            budget: self.fuzz_budget,
            step_limit: self.step_limit,
            ..FuzzConfig::default()
        }
    }

    fn baseline_symex(&self) -> SymexConfig {
        SymexConfig {
            search: Strategy::Baseline,
            target: None,
            limits: self.symex_limits,
            max_inputs: self.max_inputs,
            rng_seed: self.rng_seed,
            step_limit: self.step_limit,
        }
    }

    fn sonar_symex(&self, target: &str) -> SymexConfig {
        SymexConfig {
            search: Strategy::Sonar,
            target: Some(target.to_string()),
            limits: SymexLimits {
                max_states: self.symex_limits.max_states,
                max_queries: self.per_target_query_budget,
            },
            max_inputs: self.max_inputs,
            rng_seed: self.rng_seed,
            step_limit: self.step_limit,
        }
    }
}

/// One directed symbolic run of an FS campaign.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetAttempt {
    pub target: FunctionName,
    pub reached: bool,
    pub queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub technique: Technique,
    pub program: String,
    pub coverage: CoverageMap,
    pub per_depth: Vec<DepthRow>,
    /// Functions with no call path from `main`; excluded from `per_depth`.
    pub unreachable: usize,
    pub solver_stats: SolverStats,
    pub executions: u64,
    pub test_suite: Vec<InputVector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TargetAttempt>,
    pub duration: f64,
}

impl CampaignReport {
    #[allow(clippy::too_many_arguments)]
    fn build(
        technique: Technique,
        p: &Program,
        cg: &CallGraph,
        coverage: CoverageMap,
        solver_stats: SolverStats,
        executions: u64,
        test_suite: Vec<InputVector>,
        started: Instant,
    ) -> Self {
        Self {
            technique,
            program: p.name().to_string(),
            per_depth: depth_table(&coverage, cg),
            unreachable: cg.nodes().len() - cg.num_reachable(),
            coverage,
            solver_stats,
            executions,
            test_suite,
            targets: Vec::new(),
            duration: started.elapsed().as_secs_f64(),
        }
    }

    pub fn covered(&self) -> usize {
        self.per_depth.iter().map(|r| r.covered).sum()
    }

    pub fn total(&self) -> usize {
        self.per_depth.iter().map(|r| r.total).sum()
    }

    /// Overall reachable-function coverage, rounded half up.
    pub fn percent(&self) -> u32 {
        crate::report::percent(self.covered(), self.total())
    }
}

fn push_unique(suite: &mut Vec<InputVector>, seen: &mut BTreeSet<InputVector>, input: &InputVector) {
    if seen.insert(input.clone()) {
        suite.push(input.clone());
    }
}

/// Fuzz, then run sonar search toward each reachable function the fuzzer
/// missed, frontier first. Coverage is re-merged after every target so
/// functions reached on the way are not targeted again.
pub fn run_fs(p: &Program, cfg: &HybridConfig) -> Result<CampaignReport, OrchestratorError> {
    cfg.validate()?;
    if cfg.mode != Mode::Fs {
        return Err(OrchestratorError::Config("run_fs requires mode fs".into()));
    }
    let started = Instant::now();
    let cg = build_callgraph(p);
    let fuzz = fuzz_campaign(p, &cfg.seeds, &cfg.fuzz_config());

    let mut coverage = fuzz.cumulative.clone();
    let mut executions = fuzz.executions;
    let mut suite = Vec::new();
    let mut seen = BTreeSet::new();
    for input in fuzz.corpus.inputs() {
        push_unique(&mut suite, &mut seen, input);
    }

    let distances = DistanceCache::new(p);
    let mut attempted: BTreeSet<FunctionName> = BTreeSet::new();
    let mut attempts = Vec::new();
    let mut stats = SolverStats::default();
    let mut solver = Solver::new();

    let mut absorb = |r: &SymResult, target: &str, coverage: &mut CoverageMap| {
        coverage.merge_from(&r.coverage);
        executions += r.test_cases.len() as u64;
        for t in &r.test_cases {
            push_unique(&mut suite, &mut seen, &t.input);
        }
        attempts.push(TargetAttempt {
            target: target.to_string(),
            reached: r.target_reached(),
            queries: r.stats.queries,
        });
    };

    loop {
        let order = frontier_set(&cg, coverage.functions());
        let pending: Vec<&FunctionName> = order
            .functions
            .iter()
            .filter(|f| cg.is_reachable(f) && !attempted.contains(*f))
            .collect();
        let Some(first) = pending.first() else {
            break;
        };
        if cfg.parallel {
            // One wave: every pending frontier target, each on its own solver.
            let mut wave: Vec<&FunctionName> = pending.iter().copied().filter(|f| order.is_frontier(f)).collect();
            if wave.is_empty() {
                wave.push(first);
            }
            let results: Vec<Result<SymResult, SymexError>> = wave
                .par_iter()
                .map(|t| {
                    let mut own = Solver::new();
                    symex_campaign_with(p, &cfg.sonar_symex(t), &mut own, Some(&distances))
                })
                .collect();
            for (t, r) in wave.iter().zip(results) {
                let r = r?;
                stats = stats.add(&r.stats);
                attempted.insert((*t).clone());
                absorb(&r, t, &mut coverage);
            }
        } else {
            let t = (*first).clone();
            let r = symex_campaign_with(p, &cfg.sonar_symex(&t), &mut solver, Some(&distances))?;
            attempted.insert(t.clone());
            absorb(&r, &t, &mut coverage);
        }
    }
    if !cfg.parallel {
        stats = solver.stats();
    }

    let mut report = CampaignReport::build(Technique::Fs, p, &cg, coverage, stats, executions, suite, started);
    report.targets = attempts;
    Ok(report)
}

/// Baseline symbolic execution, then fuzzing seeded with its test cases
/// (or `[0]` when it produced none).
pub fn run_sf(p: &Program, cfg: &HybridConfig) -> Result<CampaignReport, OrchestratorError> {
    cfg.validate()?;
    if cfg.mode != Mode::Sf {
        return Err(OrchestratorError::Config("run_sf requires mode sf".into()));
    }
    let started = Instant::now();
    let cg = build_callgraph(p);
    let sym = symex_campaign(p, &cfg.baseline_symex())?;
    let seeds: Vec<InputVector> = sym.test_cases.iter().map(|t| t.input.clone()).collect();
    let fuzz = fuzz_campaign(p, &seeds, &cfg.fuzz_config());

    let mut coverage = sym.coverage.clone();
    coverage.merge_from(&fuzz.cumulative);
    let mut suite = Vec::new();
    let mut seen = BTreeSet::new();
    for input in seeds.iter().chain(fuzz.corpus.inputs()) {
        push_unique(&mut suite, &mut seen, input);
    }
    let executions = sym.test_cases.len() as u64 + fuzz.executions;
    Ok(CampaignReport::build(
        Technique::Sf,
        p,
        &cg,
        coverage,
        sym.stats,
        executions,
        suite,
        started,
    ))
}

/// Dispatches on `cfg.mode`.
pub fn run_hybrid(p: &Program, cfg: &HybridConfig) -> Result<CampaignReport, OrchestratorError> {
    match cfg.mode {
        Mode::Fs => run_fs(p, cfg),
        Mode::Sf => run_sf(p, cfg),
    }
}

pub fn run_fuzz_only(p: &Program, cfg: &HybridConfig) -> CampaignReport {
    let started = Instant::now();
    let cg = build_callgraph(p);
    let fuzz = fuzz_campaign(p, &cfg.seeds, &cfg.fuzz_config());
    let suite = fuzz.corpus.inputs().cloned().collect();
    CampaignReport::build(
        Technique::AflLike,
        p,
        &cg,
        fuzz.cumulative,
        SolverStats::default(),
        fuzz.executions,
        suite,
        started,
    )
}

pub fn run_symex_only(p: &Program, cfg: &HybridConfig) -> Result<CampaignReport, OrchestratorError> {
    let started = Instant::now();
    let cg = build_callgraph(p);
    let sym = symex_campaign(p, &cfg.baseline_symex())?;
    let suite = sym.test_cases.iter().map(|t| t.input.clone()).collect();
    Ok(CampaignReport::build(
        Technique::SymexOnly,
        p,
        &cg,
        sym.coverage,
        sym.stats,
        sym.test_cases.len() as u64,
        suite,
        started,
    ))
}

/// Fuzz-only and symex-only reports under the budgets of `cfg`.
pub fn run_baselines(p: &Program, cfg: &HybridConfig) -> Result<(CampaignReport, CampaignReport), OrchestratorError> {
    Ok((run_fuzz_only(p, cfg), run_symex_only(p, cfg)?))
}

/// All four techniques in plot order: SymexOnly, AFL-like, FS, SF.
pub fn run_all(p: &Program, cfg: &HybridConfig) -> Result<[CampaignReport; 4], OrchestratorError> {
    let (fuzz, symex) = run_baselines(p, cfg)?;
    let fs = run_fs(
        p,
        &HybridConfig {
            mode: Mode::Fs,
            ..cfg.clone()
        },
    )?;
    let sf = run_sf(
        p,
        &HybridConfig {
            mode: Mode::Sf,
            ..cfg.clone()
        },
    )?;
    Ok([symex, fuzz, fs, sf])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::run_concrete;
    use crate::generator::{generate_program, GenParams};

    fn cfg(mode: Mode, fuzz_budget: u64) -> HybridConfig {
        HybridConfig {
            mode,
            fuzz_budget,
            ..HybridConfig::default()
        }
    }

    #[test]
    fn fs_covers_2_3() {
        let p = generate_program(&GenParams::new(2, 3)).unwrap();
        let r = run_fs(&p, &cfg(Mode::Fs, 20)).unwrap();
        assert_eq!(r.coverage.functions().len(), 16);
        assert_eq!(r.percent(), 100);
    }

    #[test]
    fn fs_with_complete_fuzzing_issues_no_queries() {
        let p = generate_program(&GenParams::new(2, 1)).unwrap();
        let r = run_fs(&p, &cfg(Mode::Fs, 10_000)).unwrap();
        assert_eq!(r.percent(), 100);
        assert_eq!(r.solver_stats.queries, 0);
        assert!(r.targets.is_empty());
    }

    #[test]
    fn fs_witnesses_every_covered_function() {
        let p = generate_program(&GenParams::new(3, 2)).unwrap();
        let r = run_fs(&p, &cfg(Mode::Fs, 50)).unwrap();
        let mut replayed = CoverageMap::new();
        for t in &r.test_suite {
            replayed.merge_from(&run_concrete(&p, t, DEFAULT_STEP_LIMIT).coverage);
        }
        assert_eq!(replayed.functions(), r.coverage.functions());
    }

    #[test]
    fn parallel_fs_matches_sequential_coverage() {
        let p = generate_program(&GenParams::new(3, 3)).unwrap();
        let seq = run_fs(&p, &cfg(Mode::Fs, 100)).unwrap();
        let par = run_fs(
            &p,
            &HybridConfig {
                parallel: true,
                ..cfg(Mode::Fs, 100)
            },
        )
        .unwrap();
        assert_eq!(seq.coverage.functions(), par.coverage.functions());
    }

    #[test]
    fn sf_degenerates_to_fuzzing() {
        let p = generate_program(&GenParams::new(2, 2)).unwrap();
        let c = HybridConfig {
            symex_limits: SymexLimits {
                max_states: 1,
                max_queries: 1,
            },
            ..cfg(Mode::Sf, 500)
        };
        let sf = run_sf(&p, &c).unwrap();
        let fuzz = run_fuzz_only(&p, &c);
        assert_eq!(sf.coverage.functions(), fuzz.coverage.functions());
    }

    #[test]
    fn sf_full_symex_phase() {
        let p = generate_program(&GenParams::new(2, 2)).unwrap();
        let r = run_sf(&p, &cfg(Mode::Sf, 0)).unwrap();
        assert_eq!(r.percent(), 100);
    }

    #[test]
    fn mode_mismatch_and_bad_budget() {
        let p = generate_program(&GenParams::new(2, 1)).unwrap();
        assert!(run_fs(&p, &cfg(Mode::Sf, 0)).is_err());
        let bad = HybridConfig {
            per_target_query_budget: 0,
            ..cfg(Mode::Fs, 0)
        };
        assert!(matches!(run_fs(&p, &bad), Err(OrchestratorError::Config(_))));
    }
}
