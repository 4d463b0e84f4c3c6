use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::solver::{SolveResult, Solver, SolverStats};
use super::{Constraint, LinExpr, PathCondition, SymValue};
use crate::callgraph::{DistanceCache, DistanceField};
use crate::executor::{run_concrete, CoverageMap, DEFAULT_STEP_LIMIT};
use crate::ir::{BinOp, Block, Function, FunctionName, InputVector, Instruction, Operand, Program, Terminator};

pub const DEFAULT_MAX_INPUTS: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymexError {
    #[error("unknown target function `{0}`")]
    UnknownTarget(String),
    #[error("sonar search requires a target function")]
    MissingTarget,
    #[error("limit `{0}` must be positive")]
    ZeroLimit(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Uniformly random state selection.
    Baseline,
    /// Closest state to the target's entry block first.
    Sonar,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "sonar" => Ok(Strategy::Sonar),
            other => Err(format!(
                "unknown search strategy `{other}` (expected baseline or sonar)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymexLimits {
    /// Maximum number of scheduling decisions.
    pub max_states: u64,
    /// Maximum number of solver queries charged to the campaign.
    pub max_queries: u64,
}

impl Default for SymexLimits {
    fn default() -> Self {
        Self {
            max_states: 100_000,
            max_queries: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymexConfig {
    pub search: Strategy,
    /// When set, the campaign stops at the first symbolic entry into it.
    pub target: Option<FunctionName>,
    pub limits: SymexLimits,
    pub max_inputs: u32,
    pub rng_seed: u64,
    /// Per-state instruction budget, also used for replays.
    pub step_limit: u64,
}

impl Default for SymexConfig {
    fn default() -> Self {
        Self {
            search: Strategy::Baseline,
            target: None,
            limits: SymexLimits::default(),
            max_inputs: DEFAULT_MAX_INPUTS,
            rng_seed: 0,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

impl SymexConfig {
    pub fn sonar(target: impl Into<String>, limits: SymexLimits) -> Self {
        Self {
            search: Strategy::Sonar,
            target: Some(target.into()),
            limits,
            ..Self::default()
        }
    }

    pub fn baseline(limits: SymexLimits) -> Self {
        Self {
            limits,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: InputVector,
    /// Functions entered when `input` is replayed concretely.
    pub covering: BTreeSet<FunctionName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Exhausted,
    TargetReached,
    StateLimit,
    QueryLimit,
}

#[derive(Clone, Debug)]
pub struct SymResult {
    pub test_cases: Vec<TestCase>,
    /// Union of the replay coverage of every emitted test case, plus `main`.
    pub coverage: CoverageMap,
    /// Solver activity charged to this campaign.
    pub stats: SolverStats,
    pub states_explored: u64,
    /// Queries charged when each function was first entered symbolically.
    pub first_entry_queries: BTreeMap<FunctionName, u64>,
    pub termination: Termination,
    /// Inputs that drive a path into division or remainder by zero.
    pub faults: Vec<InputVector>,
}

impl SymResult {
    pub fn target_reached(&self) -> bool {
        self.termination == Termination::TargetReached
    }
}

#[derive(Clone, Debug)]
struct SymFrame<'p> {
    function: &'p Function,
    block: &'p Block,
    index: usize,
    locals: HashMap<&'p str, SymValue>,
    ret_dest: Option<&'p str>,
}

impl SymFrame<'_> {
    fn value(&self, op: &Operand) -> SymValue {
        match op {
            Operand::Const(v) => SymValue::concrete(*v),
            Operand::Local(name) => self
                .locals
                .get(name.as_str())
                .cloned()
                .expect("validated: locals are defined before use"),
        }
    }
}

/// One symbolic execution state.
#[derive(Clone, Debug)]
pub struct SymState<'p> {
    id: u64,
    frames: Vec<SymFrame<'p>>,
    pc: PathCondition,
    inputs_read: u32,
    queries_charged: u64,
    steps: u64,
}

impl<'p> SymState<'p> {
    fn initial(p: &'p Program) -> Self {
        let main = p.entry();
        SymState {
            id: 0,
            frames: vec![SymFrame {
                function: main,
                block: main.entry(),
                index: 0,
                locals: HashMap::new(),
                ret_dest: None,
            }],
            pc: PathCondition::new(),
            inputs_read: 0,
            queries_charged: 0,
            steps: 0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn path_condition(&self) -> &PathCondition {
        &self.pc
    }

    pub fn inputs_read(&self) -> u32 {
        self.inputs_read
    }

    pub fn queries_charged(&self) -> u64 {
        self.queries_charged
    }

    pub fn function(&self) -> &str {
        &self.frames.last().expect("live state has a frame").function.name
    }

    pub fn block(&self) -> &crate::ir::BlockId {
        &self.frames.last().expect("live state has a frame").block.id
    }

    fn top(&mut self) -> &mut SymFrame<'p> {
        self.frames.last_mut().expect("live state has a frame")
    }
}

/// Chooses the index of the next state to run.
///
/// Baseline picks uniformly at random. Sonar picks the state whose current
/// block is closest to the target (unreachable counts as infinitely far),
/// breaking ties by fewer charged queries, then by age.
pub fn select_next_state(
    frontier: &[SymState<'_>],
    search: Strategy,
    df: Option<&DistanceField>,
    rng: &mut ChaCha8Rng,
) -> usize {
    assert!(!frontier.is_empty(), "select_next_state on an empty frontier");
    match (search, df) {
        (Strategy::Sonar, Some(df)) => frontier
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| {
                let d = df.get(s.function(), s.block()).unwrap_or(u32::MAX);
                (d, s.queries_charged, s.id)
            })
            .map(|(i, _)| i)
            .expect("non-empty frontier"),
        _ => rng.gen_range(0..frontier.len()),
    }
}

/// Result of running a state until it forks or stops.
enum Step<'p> {
    Forked(Vec<SymState<'p>>),
    Finished,
    Stop(Termination),
}

struct Engine<'a, 'p> {
    program: &'p Program,
    cfg: &'a SymexConfig,
    solver: &'a mut Solver,
    query_base: u64,
    next_id: u64,
    emitted_cover: BTreeSet<FunctionName>,
    test_cases: Vec<TestCase>,
    coverage: CoverageMap,
    first_entry: BTreeMap<FunctionName, u64>,
    faults: Vec<InputVector>,
}

impl<'a, 'p> Engine<'a, 'p> {
    fn charged(&self) -> u64 {
        self.solver.stats().queries - self.query_base
    }

    fn budget_left(&self) -> bool {
        self.charged() < self.cfg.limits.max_queries
    }

    /// Counted solve, refused once the query budget is spent.
    fn check(&mut self, pc: &PathCondition, num_vars: u32) -> Option<SolveResult> {
        if !self.solver.is_cached(pc) && !self.budget_left() {
            return None;
        }
        Some(self.solver.solve(pc, num_vars as usize))
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    /// A concrete input for the state's path, if one can be found.
    fn model_for(&mut self, state: &SymState<'p>) -> Option<InputVector> {
        match self.check(&state.pc, state.inputs_read)? {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat => None,
            SolveResult::Unknown => {
                let linear = state.pc.linear_part();
                match self.check(&linear, state.inputs_read)? {
                    SolveResult::Sat(m) => Some(m),
                    _ => None,
                }
            }
        }
    }

    fn emit(&mut self, state: &SymState<'p>) {
        let Some(input) = self.model_for(state) else {
            return;
        };
        let replay = run_concrete(self.program, &input, self.cfg.step_limit);
        self.coverage.merge_from(&replay.coverage);
        let covering = replay.coverage.functions().clone();
        self.emitted_cover.extend(covering.iter().cloned());
        self.test_cases.push(TestCase { input, covering });
    }

    /// Bookkeeping for a symbolic call into `callee`. Returns `true` when the
    /// campaign target has been reached.
    fn on_entry(&mut self, state: &SymState<'p>, callee: &str) -> bool {
        let charged = self.charged();
        self.first_entry.entry(callee.to_string()).or_insert(charged);
        let is_target = self.cfg.target.as_deref() == Some(callee);
        if is_target || !self.emitted_cover.contains(callee) {
            self.emit(state);
        }
        is_target
    }

    fn fault(&mut self, state: &SymState<'p>) {
        if let Some(m) = self.model_for(state) {
            self.faults.push(m);
        }
    }

    /// Admits `state` extended by `c` if the extension may be feasible.
    /// `None` means the query budget ran out.
    fn extend(&mut self, state: &SymState<'p>, c: Constraint) -> Option<Option<SymState<'p>>> {
        let pc = state.pc.with(c);
        let fresh = !self.solver.is_cached(&pc);
        let result = self.check(&pc, state.inputs_read)?;
        if !result.maybe_feasible() {
            return Some(None);
        }
        let mut succ = state.clone();
        succ.id = self.fresh_id();
        succ.pc = pc;
        if fresh {
            succ.queries_charged += 1;
        }
        Some(Some(succ))
    }

    fn binop(
        &mut self,
        state: &mut SymState<'p>,
        op: BinOp,
        lhs: SymValue,
        rhs: SymValue,
    ) -> Result<SymValue, BinOutcome> {
        if let (Some(a), Some(b)) = (lhs.as_concrete(), rhs.as_concrete()) {
            return op.eval(a, b).map(SymValue::concrete).map_err(|_| BinOutcome::Fault);
        }
        match op {
            BinOp::Add | BinOp::Sub => Ok(match (&lhs, &rhs) {
                (SymValue::Linear(a), SymValue::Linear(b)) => {
                    SymValue::Linear(if op == BinOp::Add { a.add(b) } else { a.sub(b) })
                }
                _ => SymValue::Opaque,
            }),
            BinOp::Mul => Ok(match (&lhs, &rhs) {
                (SymValue::Linear(a), _) if a.as_constant() == Some(0) => SymValue::concrete(0),
                (_, SymValue::Linear(b)) if b.as_constant() == Some(0) => SymValue::concrete(0),
                (SymValue::Linear(a), SymValue::Linear(b)) => match (a.as_constant(), b.as_constant()) {
                    (Some(k), _) => SymValue::Linear(b.scale(k)),
                    (_, Some(k)) => SymValue::Linear(a.scale(k)),
                    _ => SymValue::Opaque,
                },
                _ => SymValue::Opaque,
            }),
            BinOp::Div | BinOp::Mod => match &rhs {
                SymValue::Linear(d) if d.as_constant() == Some(0) => Err(BinOutcome::Fault),
                SymValue::Linear(d) if d.as_constant().is_none() => {
                    // Fork on a zero divisor.
                    let zero = Constraint::new(crate::ir::CmpOp::Eq, rhs.clone(), SymValue::concrete(0));
                    let Some(faulting) = self.extend(state, zero.clone()) else {
                        return Err(BinOutcome::OutOfQueries);
                    };
                    if let Some(f) = faulting {
                        self.fault(&f);
                    }
                    let Some(ok) = self.extend(state, zero.negate()) else {
                        return Err(BinOutcome::OutOfQueries);
                    };
                    match ok {
                        Some(ok) => {
                            state.pc = ok.pc;
                            state.queries_charged = ok.queries_charged;
                            Ok(SymValue::Opaque)
                        }
                        None => Err(BinOutcome::Infeasible),
                    }
                }
                _ => Ok(SymValue::Opaque),
            },
        }
    }

    /// Runs `state` until it forks, finishes, or the campaign must stop.
    fn run(&mut self, mut state: SymState<'p>) -> Step<'p> {
        loop {
            if state.steps >= self.cfg.step_limit {
                return Step::Finished;
            }
            state.steps += 1;
            let frame = state.top();
            let block = frame.block;
            if let Some(inst) = block.instructions.get(frame.index) {
                frame.index += 1;
                match inst {
                    Instruction::Const { dest, value } => {
                        frame.locals.insert(dest, SymValue::concrete(*value));
                    }
                    Instruction::ReadInput { dest } => {
                        let v = if state.inputs_read < self.cfg.max_inputs {
                            let v = SymValue::Linear(LinExpr::var(state.inputs_read));
                            state.inputs_read += 1;
                            v
                        } else {
                            SymValue::concrete(0)
                        };
                        state.top().locals.insert(dest, v);
                    }
                    Instruction::Print { .. } => {}
                    Instruction::BinOp { dest, op, lhs, rhs } => {
                        let (l, r) = (frame.value(lhs), frame.value(rhs));
                        match self.binop(&mut state, *op, l, r) {
                            Ok(v) => {
                                state.top().locals.insert(dest, v);
                            }
                            Err(BinOutcome::Fault) => {
                                self.fault(&state);
                                return Step::Finished;
                            }
                            Err(BinOutcome::Infeasible) => return Step::Finished,
                            Err(BinOutcome::OutOfQueries) => return Step::Stop(Termination::QueryLimit),
                        }
                    }
                    Instruction::Call { dest, callee, args } => {
                        let target = self.program.function(callee).expect("validated: callee exists");
                        let locals = target
                            .params
                            .iter()
                            .map(String::as_str)
                            .zip(args.iter().map(|a| frame.value(a)))
                            .collect();
                        state.frames.push(SymFrame {
                            function: target,
                            block: target.entry(),
                            index: 0,
                            locals,
                            ret_dest: dest.as_deref(),
                        });
                        if self.on_entry(&state, callee) {
                            return Step::Stop(Termination::TargetReached);
                        }
                    }
                }
                continue;
            }

            match &block.terminator {
                Terminator::Jump(next) => {
                    frame.block = frame.function.block(next).expect("validated target");
                    frame.index = 0;
                }
                Terminator::Return(value) => {
                    let ret = value.as_ref().map_or(SymValue::concrete(0), |v| frame.value(v));
                    let done = state.frames.pop().expect("frame");
                    let Some(caller) = state.frames.last_mut() else {
                        return Step::Finished;
                    };
                    if let Some(d) = done.ret_dest {
                        caller.locals.insert(d, ret);
                    }
                }
                Terminator::Branch {
                    cmp,
                    lhs,
                    rhs,
                    then_block,
                    else_block,
                } => {
                    let (l, r) = (frame.value(lhs), frame.value(rhs));
                    if let (Some(a), Some(b)) = (l.as_concrete(), r.as_concrete()) {
                        let next = if cmp.eval(a, b) { then_block } else { else_block };
                        frame.block = frame.function.block(next).expect("validated target");
                        frame.index = 0;
                        continue;
                    }
                    let c = Constraint::new(*cmp, l, r);
                    let mut successors = Vec::with_capacity(2);
                    for (constraint, target) in [(c.negate(), else_block), (c, then_block)].into_iter().rev() {
                        let Some(succ) = self.extend(&state, constraint) else {
                            return Step::Stop(Termination::QueryLimit);
                        };
                        if let Some(mut succ) = succ {
                            let top = succ.top();
                            top.block = top.function.block(target).expect("validated target");
                            top.index = 0;
                            successors.push(succ);
                        }
                    }
                    return Step::Forked(successors);
                }
            }
        }
    }
}

enum BinOutcome {
    Fault,
    Infeasible,
    OutOfQueries,
}

/// Runs a symbolic-execution campaign with a fresh solver.
pub fn symex_campaign(p: &Program, cfg: &SymexConfig) -> Result<SymResult, SymexError> {
    let mut solver = Solver::new();
    symex_campaign_with(p, cfg, &mut solver, None)
}

/// Runs a campaign on a caller-owned solver (sharing its query cache) and an
/// optional shared distance cache.
pub fn symex_campaign_with(
    p: &Program,
    cfg: &SymexConfig,
    solver: &mut Solver,
    distances: Option<&DistanceCache<'_>>,
) -> Result<SymResult, SymexError> {
    if cfg.limits.max_states == 0 {
        return Err(SymexError::ZeroLimit("max_states"));
    }
    if cfg.limits.max_queries == 0 {
        return Err(SymexError::ZeroLimit("max_queries"));
    }
    if let Some(t) = &cfg.target {
        if p.function(t).is_none() {
            return Err(SymexError::UnknownTarget(t.clone()));
        }
    }
    let df: Option<Arc<DistanceField>> = match (cfg.search, &cfg.target) {
        (Strategy::Sonar, None) => return Err(SymexError::MissingTarget),
        (Strategy::Sonar, Some(t)) => Some(
            match distances {
                Some(cache) => cache.get(t),
                None => crate::callgraph::sonar_distances(p, t).map(Arc::new),
            }
            .map_err(|_| SymexError::UnknownTarget(t.clone()))?,
        ),
        (Strategy::Baseline, _) => None,
    };

    let start_stats = solver.stats();
    let mut engine = Engine {
        program: p,
        cfg,
        solver,
        query_base: start_stats.queries,
        next_id: 0,
        emitted_cover: BTreeSet::new(),
        test_cases: Vec::new(),
        coverage: CoverageMap::from_functions([crate::ir::ENTRY_FUNCTION]),
        first_entry: BTreeMap::from([(crate::ir::ENTRY_FUNCTION.to_string(), 0)]),
        faults: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut frontier = vec![SymState::initial(p)];
    let mut states_explored = 0u64;

    let termination = loop {
        if frontier.is_empty() {
            break Termination::Exhausted;
        }
        if states_explored >= cfg.limits.max_states {
            break Termination::StateLimit;
        }
        if !engine.budget_left() {
            break Termination::QueryLimit;
        }
        let idx = select_next_state(&frontier, cfg.search, df.as_deref(), &mut rng);
        let state = frontier.remove(idx);
        states_explored += 1;
        match engine.run(state) {
            Step::Forked(succ) => frontier.extend(succ),
            Step::Finished => {}
            Step::Stop(t) => break t,
        }
    };

    let stats = engine.solver.stats().since(&start_stats);
    Ok(SymResult {
        test_cases: engine.test_cases,
        coverage: engine.coverage,
        stats,
        states_explored,
        first_entry_queries: engine.first_entry,
        termination,
        faults: engine.faults,
    })
}
