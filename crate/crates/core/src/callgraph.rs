//! Static call graph, call-graph depths, and interprocedural shortest-path
//! distances to a target function.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::ir::{BlockId, FunctionName, Instruction, Program, ENTRY_FUNCTION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CallGraphError {
    #[error("unknown target function `{0}`")]
    UnknownTarget(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallGraph {
    nodes: BTreeSet<FunctionName>,
    edges: BTreeMap<FunctionName, BTreeSet<FunctionName>>,
    callers: BTreeMap<FunctionName, BTreeSet<FunctionName>>,
    /// `None` marks functions unreachable from `main`.
    depths: BTreeMap<FunctionName, Option<u32>>,
}

impl CallGraph {
    pub fn nodes(&self) -> &BTreeSet<FunctionName> {
        &self.nodes
    }

    pub fn callees(&self, f: &str) -> impl Iterator<Item = &str> {
        self.edges.get(f).into_iter().flatten().map(String::as_str)
    }

    pub fn callers(&self, f: &str) -> impl Iterator<Item = &str> {
        self.callers.get(f).into_iter().flatten().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(move |to| (from.as_str(), to.as_str())))
    }

    pub fn depth(&self, f: &str) -> Option<u32> {
        self.depths.get(f).copied().flatten()
    }

    pub fn depths(&self) -> &BTreeMap<FunctionName, Option<u32>> {
        &self.depths
    }

    pub fn is_reachable(&self, f: &str) -> bool {
        self.depth(f).is_some()
    }

    pub fn reachable(&self) -> impl Iterator<Item = &str> {
        self.depths.iter().filter(|(_, d)| d.is_some()).map(|(f, _)| f.as_str())
    }

    pub fn num_reachable(&self) -> usize {
        self.reachable().count()
    }

    pub fn max_depth(&self) -> Option<u32> {
        self.depths.values().flatten().copied().max()
    }

    /// Reachable function count per depth.
    pub fn depth_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for d in self.depths.values().flatten() {
            *hist.entry(*d).or_insert(0) += 1;
        }
        hist
    }

    /// Graphviz rendering, one node per function labelled with its depth.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        for n in &self.nodes {
            let depth = self
                .depth(n)
                .map_or_else(|| "unreachable".to_string(), |d| d.to_string());
            let _ = writeln!(out, "  \"{n}\" [label=\"{n}\\ndepth {depth}\"];");
        }
        for (from, to) in self.edges() {
            let _ = writeln!(out, "  \"{from}\" -> \"{to}\";");
        }
        out.push_str("}\n");
        out
    }

    /// `function<TAB>depth` lines in name order; unreachable functions show `-`.
    pub fn depths_tsv(&self) -> String {
        self.depths
            .iter()
            .map(|(f, d)| match d {
                Some(d) => format!("{f}\t{d}\n"),
                None => format!("{f}\t-\n"),
            })
            .collect()
    }
}

pub fn build_callgraph(p: &Program) -> CallGraph {
    let nodes: BTreeSet<FunctionName> = p.function_names().map(str::to_string).collect();
    let mut edges: BTreeMap<FunctionName, BTreeSet<FunctionName>> = BTreeMap::new();
    let mut callers: BTreeMap<FunctionName, BTreeSet<FunctionName>> = BTreeMap::new();
    for f in p.functions() {
        for block in f.blocks.values() {
            for inst in &block.instructions {
                if let Instruction::Call { callee, .. } = inst {
                    edges.entry(f.name.clone()).or_default().insert(callee.clone());
                    callers.entry(callee.clone()).or_default().insert(f.name.clone());
                }
            }
        }
    }

    let mut depths: BTreeMap<FunctionName, Option<u32>> = nodes.iter().map(|n| (n.clone(), None)).collect();
    let mut queue = VecDeque::from([(ENTRY_FUNCTION.to_string(), 0u32)]);
    depths.insert(ENTRY_FUNCTION.to_string(), Some(0));
    while let Some((f, d)) = queue.pop_front() {
        for callee in edges.get(&f).into_iter().flatten() {
            let slot = depths.get_mut(callee).expect("callee is a node");
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back((callee.clone(), d + 1));
            }
        }
    }

    CallGraph {
        nodes,
        edges,
        callers,
        depths,
    }
}

/// A location in the interprocedural block graph.
pub type BlockLoc = (FunctionName, BlockId);

/// Interprocedural block graph: CFG edges, call-site → callee entry, and
/// callee exit → call-site.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    locs: Vec<BlockLoc>,
    index: HashMap<BlockLoc, usize>,
    succs: Vec<Vec<usize>>,
}

impl BlockGraph {
    pub fn build(p: &Program) -> Self {
        let mut locs = Vec::new();
        let mut index = HashMap::new();
        for f in p.functions() {
            for id in f.blocks.keys() {
                index.insert((f.name.clone(), id.clone()), locs.len());
                locs.push((f.name.clone(), id.clone()));
            }
        }
        let idx = |f: &str, b: &BlockId| index[&(f.to_string(), b.clone())];
        let mut succs = vec![Vec::new(); locs.len()];
        for f in p.functions() {
            for block in f.blocks.values() {
                let from = idx(&f.name, &block.id);
                for s in block.terminator.successors() {
                    succs[from].push(idx(&f.name, s));
                }
                for inst in &block.instructions {
                    if let Instruction::Call { callee, .. } = inst {
                        let target = p.function(callee).expect("validated callee");
                        succs[from].push(idx(callee, &target.entry_block));
                        for exit in target.exit_blocks() {
                            succs[idx(callee, &exit.id)].push(from);
                        }
                    }
                }
            }
        }
        for s in &mut succs {
            s.sort_unstable();
            s.dedup();
        }
        Self { locs, index, succs }
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    pub fn loc(&self, i: usize) -> &BlockLoc {
        &self.locs[i]
    }

    pub fn index_of(&self, f: &str, b: &BlockId) -> Option<usize> {
        self.index.get(&(f.to_string(), b.clone())).copied()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }
}

/// Hop counts from every block to the entry block of `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceField {
    target: FunctionName,
    dist: BTreeMap<BlockLoc, u32>,
}

impl DistanceField {
    pub fn target(&self) -> &str {
        &self.target
    }

    /// `None` means the target entry cannot be reached from this block.
    pub fn get(&self, f: &str, b: &BlockId) -> Option<u32> {
        self.dist.get(&(f.to_string(), b.clone())).copied()
    }

    pub fn finite(&self) -> impl Iterator<Item = (&BlockLoc, u32)> {
        self.dist.iter().map(|(k, v)| (k, *v))
    }
}

/// Backward BFS from the target's entry block over [`BlockGraph`].
pub fn sonar_distances(p: &Program, target: &str) -> Result<DistanceField, CallGraphError> {
    let graph = BlockGraph::build(p);
    sonar_distances_in(p, &graph, target)
}

pub fn sonar_distances_in(p: &Program, graph: &BlockGraph, target: &str) -> Result<DistanceField, CallGraphError> {
    let f = p
        .function(target)
        .ok_or_else(|| CallGraphError::UnknownTarget(target.to_string()))?;
    let mut preds = vec![Vec::new(); graph.len()];
    for u in 0..graph.len() {
        for &v in graph.successors(u) {
            preds[v].push(u);
        }
    }
    let start = graph
        .index_of(&f.name, &f.entry_block)
        .expect("entry block is a graph node");
    let mut dist: Vec<Option<u32>> = vec![None; graph.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have distances");
        for &u in &preds[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    Ok(DistanceField {
        target: target.to_string(),
        dist: dist
            .into_iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| (graph.loc(i).clone(), d)))
            .collect(),
    })
}

/// Per-program cache of distance fields, shared across threads.
pub struct DistanceCache<'p> {
    program: &'p Program,
    graph: BlockGraph,
    fields: RwLock<HashMap<FunctionName, Arc<DistanceField>>>,
}

impl<'p> DistanceCache<'p> {
    pub fn new(program: &'p Program) -> Self {
        Self {
            program,
            graph: BlockGraph::build(program),
            fields: RwLock::new(HashMap::new()),
        }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn get(&self, target: &str) -> Result<Arc<DistanceField>, CallGraphError> {
        if let Some(df) = self.fields.read().expect("distance cache poisoned").get(target) {
            return Ok(Arc::clone(df));
        }
        let df = Arc::new(sonar_distances_in(self.program, &self.graph, target)?);
        let mut fields = self.fields.write().expect("distance cache poisoned");
        Ok(Arc::clone(fields.entry(target.to_string()).or_insert(df)))
    }

    pub fn len(&self) -> usize {
        self.fields.read().expect("distance cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uncovered functions, frontier first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierOrder {
    pub functions: Vec<FunctionName>,
    /// The first `frontier_len` entries have at least one covered caller.
    pub frontier_len: usize,
}

impl FrontierOrder {
    pub fn frontier(&self) -> &[FunctionName] {
        &self.functions[..self.frontier_len]
    }

    pub fn is_frontier(&self, f: &str) -> bool {
        self.frontier().iter().any(|x| x == f)
    }
}

/// Orders the uncovered functions: those with a covered caller first, then
/// the rest; each group by ascending depth (unreachable last), then name.
pub fn frontier_set(cg: &CallGraph, covered: &BTreeSet<FunctionName>) -> FrontierOrder {
    let key = |f: &String| (cg.depth(f).unwrap_or(u32::MAX), f.clone());
    let (mut frontier, mut rest): (Vec<_>, Vec<_>) = cg
        .nodes()
        .iter()
        .filter(|f| !covered.contains(*f))
        .cloned()
        .partition(|f| cg.callers(f).any(|c| covered.contains(c)));
    frontier.sort_by_key(key);
    rest.sort_by_key(key);
    let frontier_len = frontier.len();
    frontier.extend(rest);
    FrontierOrder {
        functions: frontier,
        frontier_len,
    }
}
