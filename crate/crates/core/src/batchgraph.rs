//! Batch signing as task graphs. Every message contributes three nodes,
//! `FORS(i)`, `TREE(i)` and `WOTS(i)`, with `WOTS(i)` waiting on the other
//! two. Messages are spread round-robin over `T` graphs of at most `m`.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::parallel::{ForsPart, KeyContext, TreePart, WotsPart};
use crate::sigcore::{Prepared, Signature, Signer};
use crate::vexec::AllocCounter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeKind {
    Fors,
    Tree,
    Wots,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub message: usize,
    pub kind: NodeKind,
}

impl NodeId {
    pub fn new(message: usize, kind: NodeKind) -> Self {
        NodeId { message, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigTaskGraph {
    pub index: usize,
    pub messages: Vec<usize>,
    pub nodes: Vec<NodeId>,
    /// `(from, to)`: `to` may start once `from` has finished.
    pub edges: Vec<(NodeId, NodeId)>,
}

impl SigTaskGraph {
    fn new(index: usize, messages: Vec<usize>) -> Self {
        let mut nodes = Vec::with_capacity(3 * messages.len());
        let mut edges = Vec::with_capacity(2 * messages.len());
        for &i in &messages {
            let [f, t, w] = [NodeKind::Fors, NodeKind::Tree, NodeKind::Wots].map(|k| NodeId::new(i, k));
            nodes.extend([f, t, w]);
            edges.extend([(f, w), (t, w)]);
        }
        SigTaskGraph { index, messages, nodes, edges }
    }

    /// Nodes with no incoming edge.
    pub fn sources(&self) -> Vec<NodeId> {
        self.nodes.iter().copied().filter(|n| !self.edges.iter().any(|(_, to)| to == n)).collect()
    }

    /// Kahn's algorithm over the node and edge lists.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for (_, to) in &self.edges {
            *indegree.entry(*to).or_default() += 1;
        }
        let mut queue: VecDeque<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut seen = 0;
        while let Some(n) = queue.pop_front() {
            seen += 1;
            for (_, to) in self.edges.iter().filter(|(from, _)| *from == n) {
                let d = indegree.get_mut(to).expect("edge target is a node");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(*to);
                }
            }
        }
        seen == indegree.len()
    }
}

/// Partitions `count` messages round-robin into at most `t` graphs of at
/// most `m` messages. Graphs that receive no message are omitted.
pub fn build_graphs(count: usize, m: usize, t: usize) -> Result<Vec<SigTaskGraph>> {
    if m == 0 || t == 0 {
        return Err(Error::Usage("batch size m and graph count T must be at least 1".into()));
    }
    if m.saturating_mul(t) < count {
        return Err(Error::Usage(format!("{count} messages exceed m·T = {m}·{t}")));
    }
    let mut groups = vec![Vec::new(); t.min(count)];
    for i in 0..count {
        groups[i % t].push(i);
    }
    Ok(groups.into_iter().enumerate().map(|(g, msgs)| SigTaskGraph::new(g, msgs)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub node: NodeId,
    pub start: u64,
    pub end: u64,
    pub worker: usize,
    pub elapsed_ns: u64,
}

/// Node executions in completion order, stamped with a logical clock.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub events: Vec<Event>,
}

impl ExecutionLog {
    pub fn event(&self, node: NodeId) -> Option<&Event> {
        self.events.iter().find(|e| e.node == node)
    }

    /// True if `first` started before `second`.
    pub fn started_before(&self, first: NodeId, second: NodeId) -> Option<bool> {
        Some(self.event(first)?.start < self.event(second)?.start)
    }
}

/// Every node of `graphs` ran exactly once, nothing else ran, and every
/// edge `u → v` has `end(u) ≤ start(v)`.
pub fn replay_check(log: &ExecutionLog, graphs: &[SigTaskGraph]) -> bool {
    let mut by_node = BTreeMap::new();
    for e in &log.events {
        if e.start >= e.end || by_node.insert(e.node, e).is_some() {
            return false;
        }
    }
    let expected: usize = graphs.iter().map(|g| g.nodes.len()).sum();
    if by_node.len() != expected || !graphs.iter().flat_map(|g| &g.nodes).all(|n| by_node.contains_key(n)) {
        return false;
    }
    graphs.iter().flat_map(|g| &g.edges).all(|(u, v)| by_node[u].end <= by_node[v].start)
}

/// Called before each node body; an error fails the node.
pub type NodeHook<'h> = &'h (dyn Fn(NodeId) -> Result<()> + Sync);

#[derive(Clone, Copy, Default)]
pub struct LaunchOptions<'h> {
    pub workers: usize,
    /// Picks ready nodes at random from this seed instead of FIFO.
    pub shuffle_seed: Option<u64>,
    pub hook: Option<NodeHook<'h>>,
}

impl LaunchOptions<'_> {
    pub fn workers(workers: usize) -> Self {
        LaunchOptions { workers, shuffle_seed: None, hook: None }
    }
}

struct MessageSlot {
    prep: Prepared,
    graph: usize,
    fors: Mutex<ForsPart>,
    tree: Mutex<TreePart>,
    wots: Mutex<WotsPart>,
    out: Mutex<Vec<u8>>,
}

fn lock<T>(m: &Mutex<T>) -> Result<MutexGuard<'_, T>> {
    m.lock().map_err(|_| Error::Internal("a worker panicked while holding a buffer".into()))
}

/// Graphs with every block, buffer and message digest allocated up front.
/// Launching performs no further buffer allocation.
pub struct BatchInstance<'a> {
    signer: &'a Signer,
    key: &'a KeyContext,
    graphs: Vec<SigTaskGraph>,
    slots: Vec<MessageSlot>,
    allocs: AllocCounter,
    instantiated: u64,
}

struct SchedState {
    ready: VecDeque<NodeId>,
    waiting: Vec<u8>,
    finished: usize,
    clock: u64,
    rng: Option<ChaCha8Rng>,
    failed: BTreeMap<usize, Error>,
    events: Vec<Event>,
}

impl<'a> BatchInstance<'a> {
    pub fn new(
        signer: &'a Signer,
        key: &'a KeyContext,
        graphs: Vec<SigTaskGraph>,
        messages: &[impl AsRef<[u8]>],
        opt_rand: Option<&[u8]>,
    ) -> Result<Self> {
        let mut graph_of = vec![None; messages.len()];
        for g in &graphs {
            for &i in &g.messages {
                match graph_of.get_mut(i) {
                    Some(slot @ None) => *slot = Some(g.index),
                    _ => return Err(Error::Usage(format!("message {i} is missing or assigned twice"))),
                }
            }
        }
        let allocs = AllocCounter::new();
        let mut slots = Vec::with_capacity(messages.len());
        for (i, (msg, graph)) in messages.iter().zip(graph_of).enumerate() {
            let graph = graph.ok_or_else(|| Error::Usage(format!("message {i} belongs to no graph")))?;
            let ws = signer.workspace(&allocs)?;
            slots.push(MessageSlot {
                prep: signer.prepare(key, msg.as_ref(), opt_rand)?,
                graph,
                fors: Mutex::new(ws.fors),
                tree: Mutex::new(ws.tree),
                wots: Mutex::new(ws.wots),
                out: Mutex::new(ws.out),
            });
        }
        let instantiated = allocs.get();
        Ok(BatchInstance { signer, key, graphs, slots, allocs, instantiated })
    }

    pub fn graphs(&self) -> &[SigTaskGraph] {
        &self.graphs
    }

    pub fn instantiation_allocations(&self) -> u64 {
        self.instantiated
    }

    /// Buffer allocations since instantiation finished.
    pub fn allocations_since_instantiation(&self) -> u64 {
        self.allocs.get() - self.instantiated
    }

    fn run_node(&self, node: NodeId) -> Result<()> {
        let slot = &self.slots[node.message];
        let (s, k) = (self.signer, self.key);
        match node.kind {
            NodeKind::Fors => s.fors_stage(k, &slot.prep, &mut *lock(&slot.fors)?).map(drop),
            NodeKind::Tree => s.tree_stage(k, &slot.prep, &mut *lock(&slot.tree)?).map(drop),
            NodeKind::Wots => {
                let fors = lock(&slot.fors)?;
                let tree = lock(&slot.tree)?;
                let mut wots = lock(&slot.wots)?;
                s.wots_stage(k, &slot.prep, &fors, &tree, &mut wots)?;
                s.assemble(&slot.prep, &fors, &tree, &wots, &mut lock(&slot.out)?);
                Ok(())
            }
        }
    }

    /// Runs every graph on `opts.workers` threads. A failing node aborts
    /// the rest of its graph; the first failure by message index is
    /// returned.
    pub fn launch(&self, opts: &LaunchOptions<'_>) -> Result<ExecutionLog> {
        if opts.workers == 0 {
            return Err(Error::Usage("worker count must be at least 1".into()));
        }
        let total: usize = self.graphs.iter().map(|g| g.nodes.len()).sum();
        let ready = self
            .graphs
            .iter()
            .flat_map(|g| g.messages.iter().flat_map(|&i| [NodeId::new(i, NodeKind::Fors), NodeId::new(i, NodeKind::Tree)]))
            .collect();
        let state = Mutex::new(SchedState {
            ready,
            waiting: vec![2; self.slots.len()],
            finished: 0,
            clock: 0,
            rng: opts.shuffle_seed.map(ChaCha8Rng::seed_from_u64),
            failed: BTreeMap::new(),
            events: Vec::with_capacity(total),
        });
        let wake = Condvar::new();
        std::thread::scope(|scope| {
            for worker in 0..opts.workers {
                let (state, wake) = (&state, &wake);
                scope.spawn(move || self.worker(worker, total, state, wake, opts.hook));
            }
        });
        let state = state.into_inner().map_err(|_| Error::Internal("scheduler state poisoned".into()))?;
        if let Some((_, e)) = state.failed.into_iter().next() {
            return Err(e);
        }
        Ok(ExecutionLog { events: state.events })
    }

    fn worker(&self, worker: usize, total: usize, state: &Mutex<SchedState>, wake: &Condvar, hook: Option<NodeHook<'_>>) {
        loop {
            let (node, start) = {
                let mut st = state.lock().expect("scheduler lock");
                let node = loop {
                    if st.finished == total {
                        return;
                    }
                    let SchedState { ready, rng, .. } = &mut *st;
                    let picked = match rng {
                        Some(rng) if !ready.is_empty() => {
                            let i = rng.gen_range(0..ready.len());
                            ready.swap_remove_back(i)
                        }
                        _ => ready.pop_front(),
                    };
                    match picked {
                        Some(n) if st.failed.keys().any(|&m| self.slots[m].graph == self.slots[n.message].graph) => {
                            st.finished += 1;
                            self.release(&mut st, n);
                            wake.notify_all();
                        }
                        Some(n) => break n,
                        None => st = wake.wait(st).expect("scheduler lock"),
                    }
                };
                st.clock += 1;
                (node, st.clock)
            };

            let t0 = Instant::now();
            let result = hook.map_or(Ok(()), |h| h(node)).and_then(|()| self.run_node(node));
            let elapsed_ns = t0.elapsed().as_nanos() as u64;

            let mut st = state.lock().expect("scheduler lock");
            st.clock += 1;
            let end = st.clock;
            st.events.push(Event { node, start, end, worker, elapsed_ns });
            st.finished += 1;
            if let Err(e) = result {
                let reason = e.to_string();
                st.failed.entry(node.message).or_insert(Error::Graph { message: node.message, reason });
            }
            self.release(&mut st, node);
            wake.notify_all();
        }
    }

    fn release(&self, st: &mut SchedState, node: NodeId) {
        if node.kind != NodeKind::Wots {
            st.waiting[node.message] -= 1;
            if st.waiting[node.message] == 0 {
                st.ready.push_back(NodeId::new(node.message, NodeKind::Wots));
            }
        }
    }

    /// Copies out every signature in message order.
    pub fn signatures(&self) -> Result<Vec<Signature>> {
        let id = self.signer.config().id;
        self.slots.iter().map(|s| Signature::from_bytes(id, lock(&s.out)?.clone())).collect()
    }
}

/// Result of [`execute_graphs`].
#[derive(Debug)]
pub struct BatchOutput {
    pub signatures: Vec<Signature>,
    pub log: ExecutionLog,
    pub allocations_at_instantiation: u64,
    pub allocations_after_instantiation: u64,
}

/// Instantiates and launches `graphs` over `messages` once. The signer
/// should use a single worker so parallelism comes from the graph workers.
pub fn execute_graphs(
    signer: &Signer,
    key: &KeyContext,
    graphs: Vec<SigTaskGraph>,
    messages: &[impl AsRef<[u8]>],
    opt_rand: Option<&[u8]>,
    opts: &LaunchOptions<'_>,
) -> Result<BatchOutput> {
    let inst = BatchInstance::new(signer, key, graphs, messages, opt_rand)?;
    let log = inst.launch(opts)?;
    Ok(BatchOutput {
        signatures: inst.signatures()?,
        log,
        allocations_at_instantiation: inst.instantiation_allocations(),
        allocations_after_instantiation: inst.allocations_since_instantiation(),
    })
}
