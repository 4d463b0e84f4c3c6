//! Coverage-guided mutational fuzzer over int32 input vectors.
//!
//! Corpus entries are scheduled round-robin with constant energy: one mutant
//! per scheduling step. A mutant joins the corpus only when it sets an edge
//! bit, or enters a function, that no earlier execution did.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::executor::{run_concrete, CoverageMap, Outcome, DEFAULT_STEP_LIMIT};
use crate::ir::{InputVector, Program};

pub const DEFAULT_HAVOC_STACKING: u32 = 4;
pub const MAX_DELTA: i32 = 35;
/// Vectors are not grown past this length by insert or duplicate.
pub const MAX_INPUT_LEN: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzConfig {
    pub rng_seed: u64,
    /// Number of mutant executions after the seeds have run.
    pub budget: u64,
    pub step_limit: u64,
    pub havoc_stacking: u32,
    /// Optional wall-clock cap. Results are only reproducible without it.
    pub time_limit: Option<Duration>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            budget: 10_000,
            step_limit: DEFAULT_STEP_LIMIT,
            havoc_stacking: DEFAULT_HAVOC_STACKING,
            time_limit: None,
        }
    }
}

impl FuzzConfig {
    pub fn with_budget(budget: u64, rng_seed: u64) -> Self {
        Self {
            budget,
            rng_seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub input: InputVector,
    pub coverage: CoverageMap,
    /// Global execution index (seeds first, starting at 0).
    pub discovery_iteration: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &InputVector> {
        self.entries.iter().map(|e| &e.input)
    }

    /// Writes each entry as `id-<iteration>.txt` in the test-case text format.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.entries
            .iter()
            .map(|e| {
                let path = dir.join(format!("id-{}.txt", e.discovery_iteration));
                std::fs::write(&path, e.input.to_text())?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub input: InputVector,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzResult {
    pub corpus: Corpus,
    pub cumulative: CoverageMap,
    pub executions: u64,
    /// Distinct inputs that ended in a fault or hit the step limit.
    pub faults: Vec<Fault>,
}

/// A single mutation with all random choices already made.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mutation {
    BitFlip { pos: usize, bit: u32 },
    Add { pos: usize, delta: i32 },
    Sub { pos: usize, delta: i32 },
    Interesting { pos: usize, value: i32 },
    Duplicate { pos: usize },
    Insert { pos: usize, value: i32 },
    Delete { pos: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    BitFlip,
    Add,
    Sub,
    Interesting,
    Duplicate,
    Insert,
    Delete,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::BitFlip,
        MutationKind::Add,
        MutationKind::Sub,
        MutationKind::Interesting,
        MutationKind::Duplicate,
        MutationKind::Insert,
        MutationKind::Delete,
    ];
}

impl Mutation {
    pub fn kind(&self) -> MutationKind {
        match self {
            Mutation::BitFlip { .. } => MutationKind::BitFlip,
            Mutation::Add { .. } => MutationKind::Add,
            Mutation::Sub { .. } => MutationKind::Sub,
            Mutation::Interesting { .. } => MutationKind::Interesting,
            Mutation::Duplicate { .. } => MutationKind::Duplicate,
            Mutation::Insert { .. } => MutationKind::Insert,
            Mutation::Delete { .. } => MutationKind::Delete,
        }
    }
}

static INTERESTING: LazyLock<Vec<i32>> = LazyLock::new(|| {
    let mut out = vec![0, 1, -1, i32::MIN, i32::MAX];
    for k in 1..=30 {
        let p = 1i32 << k;
        out.push(p - 1);
        out.push(p + 1);
    }
    out.sort_unstable();
    out.dedup();
    out
});

/// 0, 1, -1, the int32 extremes, and 2^k ± 1 for k in 1..=30.
pub fn interesting_values() -> &'static [i32] {
    &INTERESTING
}

/// Applies `m` in place. Operations that need an existing element are no-ops
/// on an empty vector, and positions are taken modulo the length.
pub fn apply_mutation(values: &mut Vec<i32>, m: Mutation) {
    let len = values.len();
    let at = |pos: usize| pos % len;
    match m {
        Mutation::Insert { pos, value } => {
            if len < MAX_INPUT_LEN {
                values.insert(pos.min(len), value);
            }
        }
        _ if len == 0 => {}
        Mutation::BitFlip { pos, bit } => values[at(pos)] ^= 1 << (bit % 32),
        Mutation::Add { pos, delta } => values[at(pos)] = values[at(pos)].wrapping_add(delta),
        Mutation::Sub { pos, delta } => values[at(pos)] = values[at(pos)].wrapping_sub(delta),
        Mutation::Interesting { pos, value } => values[at(pos)] = value,
        Mutation::Duplicate { pos } => {
            if len < MAX_INPUT_LEN {
                let v = values[at(pos)];
                values.insert(at(pos), v);
            }
        }
        Mutation::Delete { pos } => {
            values.remove(at(pos));
        }
    }
}

/// Draws one mutation for a vector of length `len`.
pub fn random_mutation(len: usize, rng: &mut impl Rng) -> Mutation {
    let kind = MutationKind::ALL[rng.gen_range(0..MutationKind::ALL.len())];
    let pos = if len == 0 { 0 } else { rng.gen_range(0..len) };
    let interesting = interesting_values();
    match kind {
        MutationKind::BitFlip => Mutation::BitFlip {
            pos,
            bit: rng.gen_range(0..32),
        },
        MutationKind::Add => Mutation::Add {
            pos,
            delta: rng.gen_range(1..=MAX_DELTA),
        },
        MutationKind::Sub => Mutation::Sub {
            pos,
            delta: rng.gen_range(1..=MAX_DELTA),
        },
        MutationKind::Interesting => Mutation::Interesting {
            pos,
            value: interesting[rng.gen_range(0..interesting.len())],
        },
        MutationKind::Duplicate => Mutation::Duplicate { pos },
        MutationKind::Insert => Mutation::Insert {
            pos: rng.gen_range(0..=len),
            value: if rng.gen_bool(0.5) {
                interesting[rng.gen_range(0..interesting.len())]
            } else {
                rng.gen_range(-MAX_DELTA..=MAX_DELTA)
            },
        },
        MutationKind::Delete => Mutation::Delete { pos },
    }
}

/// Applies between 1 and `havoc_stacking` random mutations and returns the
/// mutant with the mutations used.
pub fn mutate_traced(input: &InputVector, havoc_stacking: u32, rng: &mut impl Rng) -> (InputVector, Vec<Mutation>) {
    let n = rng.gen_range(1..=havoc_stacking.max(1));
    let mut values = input.0.clone();
    let mut trace = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let m = random_mutation(values.len(), rng);
        apply_mutation(&mut values, m);
        trace.push(m);
    }
    (InputVector(values), trace)
}

pub fn mutate(input: &InputVector, havoc_stacking: u32, rng: &mut impl Rng) -> InputVector {
    mutate_traced(input, havoc_stacking, rng).0
}

struct Campaign<'p> {
    program: &'p Program,
    step_limit: u64,
    corpus: Corpus,
    cumulative: CoverageMap,
    executions: u64,
    faults: Vec<Fault>,
    faulted: BTreeSet<InputVector>,
}

impl Campaign<'_> {
    fn execute(&mut self, input: InputVector) {
        let iteration = self.executions;
        self.executions += 1;
        let run = run_concrete(self.program, &input, self.step_limit);
        if run.outcome != Outcome::Completed && self.faulted.insert(input.clone()) {
            self.faults.push(Fault {
                input: input.clone(),
                outcome: run.outcome,
            });
        }
        // A new function also counts, in case all its edges collide in the map.
        let fresh = self.cumulative.new_edges_in(&run.coverage) > 0
            || run.coverage.functions().iter().any(|f| !self.cumulative.covers(f));
        if fresh {
            self.cumulative.merge_from(&run.coverage);
            self.corpus.entries.push(CorpusEntry {
                input,
                coverage: run.coverage,
                discovery_iteration: iteration,
            });
        }
    }
}

/// Runs every seed, then `cfg.budget` mutants. An empty seed list is replaced
/// by the single seed `[0]`.
pub fn fuzz_campaign(p: &Program, seeds: &[InputVector], cfg: &FuzzConfig) -> FuzzResult {
    let started = Instant::now();
    let default_seed = [InputVector(vec![0])];
    let seeds = if seeds.is_empty() { &default_seed[..] } else { seeds };
    let mut c = Campaign {
        program: p,
        step_limit: cfg.step_limit,
        corpus: Corpus::default(),
        cumulative: CoverageMap::new(),
        executions: 0,
        faults: Vec::new(),
        faulted: BTreeSet::new(),
    };
    for s in seeds {
        c.execute(s.clone());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut cursor = 0usize;
    for i in 0..cfg.budget {
        if let Some(limit) = cfg.time_limit {
            if i % 256 == 0 && started.elapsed() >= limit {
                break;
            }
        }
        let parent = &c.corpus.entries[cursor % c.corpus.len()].input;
        cursor = (cursor + 1) % c.corpus.len();
        let child = mutate(parent, cfg.havoc_stacking, &mut rng);
        c.execute(child);
    }

    FuzzResult {
        corpus: c.corpus,
        cumulative: c.cumulative,
        executions: c.executions,
        faults: c.faults,
    }
}
