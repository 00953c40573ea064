//! s-t minimum cut on sparse capacitated graphs.
//!
//! The solver is the augmenting-path algorithm with two persistent search
//! trees (one grown from the source, one from the sink) that are repaired
//! after each augmentation instead of being rebuilt. It is the usual choice
//! for the low-degree graphs that come out of tetrahedral and triangle
//! adjacency.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxflowError {
    #[error("capacity must be non-negative and not NaN, got {0}")]
    BadCapacity(f64),
    #[error("node {0} does not exist (graph has {1} nodes)")]
    InvalidNode(usize, usize),
    #[error("malformed graph dump at line {0}: {1}")]
    Parse(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Source,
    Sink,
}

/// Index of the forward arc of an arc pair; the reverse arc is `id ^ 1`.
pub type ArcId = usize;

#[derive(Debug, Clone, Default)]
pub struct FlowGraph {
    first: Vec<u32>,
    next: Vec<u32>,
    head: Vec<u32>,
    cap: Vec<f64>,
    source_cap: Vec<f64>,
    sink_cap: Vec<f64>,
}

const NIL: u32 = u32::MAX;

fn check_cap(c: f64) -> Result<(), MaxflowError> {
    if c >= 0.0 {
        Ok(())
    } else {
        Err(MaxflowError::BadCapacity(c))
    }
}

#[derive(Debug, Clone)]
pub struct MaxFlowResult {
    pub flow: f64,
    pub labels: Vec<Label>,
    /// The value that stood in for infinite terminal capacities.
    pub sentinel: f64,
}

impl FlowGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(n: usize) -> Self {
        let mut g = FlowGraph::new();
        g.add_nodes(n);
        g
    }

    pub fn node_count(&self) -> usize {
        self.first.len()
    }

    /// Number of arc pairs.
    pub fn arc_count(&self) -> usize {
        self.head.len() / 2
    }

    pub fn add_node(&mut self) -> usize {
        self.first.push(NIL);
        self.source_cap.push(0.0);
        self.sink_cap.push(0.0);
        self.first.len() - 1
    }

    pub fn add_nodes(&mut self, n: usize) -> usize {
        let start = self.node_count();
        for _ in 0..n {
            self.add_node();
        }
        start
    }

    fn check_node(&self, u: usize) -> Result<(), MaxflowError> {
        if u < self.node_count() {
            Ok(())
        } else {
            Err(MaxflowError::InvalidNode(u, self.node_count()))
        }
    }

    /// Adds the arc pair `u -> v` (capacity `cap_uv`) and `v -> u`
    /// (capacity `cap_vu`).
    pub fn add_arc(&mut self, u: usize, v: usize, cap_uv: f64, cap_vu: f64) -> Result<ArcId, MaxflowError> {
        self.check_node(u)?;
        self.check_node(v)?;
        check_cap(cap_uv)?;
        check_cap(cap_vu)?;
        if !cap_uv.is_finite() || !cap_vu.is_finite() {
            return Err(MaxflowError::BadCapacity(f64::INFINITY));
        }
        let id = self.head.len();
        self.head.push(v as u32);
        self.next.push(self.first[u]);
        self.cap.push(cap_uv);
        self.first[u] = id as u32;
        self.head.push(u as u32);
        self.next.push(self.first[v]);
        self.cap.push(cap_vu);
        self.first[v] = id as u32 + 1;
        Ok(id)
    }

    /// Adds to the capacity of one directed arc (`arc` or `arc ^ 1`).
    pub fn add_arc_capacity(&mut self, arc: usize, delta: f64) -> Result<(), MaxflowError> {
        check_cap(delta)?;
        if arc >= self.cap.len() {
            return Err(MaxflowError::InvalidNode(arc, self.cap.len()));
        }
        self.cap[arc] += delta;
        Ok(())
    }

    pub fn arc_capacity(&self, arc: usize) -> f64 {
        self.cap[arc]
    }

    /// `(tail, head)` of a directed arc.
    pub fn arc_ends(&self, arc: usize) -> (usize, usize) {
        (self.head[arc ^ 1] as usize, self.head[arc] as usize)
    }

    /// Accumulates terminal capacities. `f64::INFINITY` marks an uncuttable
    /// link.
    pub fn set_terminal(&mut self, u: usize, cap_source: f64, cap_sink: f64) -> Result<(), MaxflowError> {
        self.check_node(u)?;
        check_cap(cap_source)?;
        check_cap(cap_sink)?;
        self.source_cap[u] += cap_source;
        self.sink_cap[u] += cap_sink;
        Ok(())
    }

    pub fn terminal(&self, u: usize) -> (f64, f64) {
        (self.source_cap[u], self.sink_cap[u])
    }

    /// Sum of all finite capacities plus one.
    pub fn sentinel(&self) -> f64 {
        let fin = |c: &f64| if c.is_finite() { *c } else { 0.0 };
        self.cap.iter().map(fin).sum::<f64>()
            + self.source_cap.iter().map(fin).sum::<f64>()
            + self.sink_cap.iter().map(fin).sum::<f64>()
            + 1.0
    }

    /// Cost of the cut induced by `labels`, with infinite links valued at
    /// the sentinel.
    pub fn cut_cost(&self, labels: &[Label]) -> f64 {
        let inf = self.sentinel();
        let val = |c: f64| if c.is_finite() { c } else { inf };
        let mut cost = 0.0;
        for u in 0..self.node_count() {
            match labels[u] {
                Label::Source => cost += val(self.sink_cap[u]),
                Label::Sink => cost += val(self.source_cap[u]),
            }
        }
        for a in 0..self.head.len() {
            let (u, v) = self.arc_ends(a);
            if labels[u] == Label::Source && labels[v] == Label::Sink {
                cost += self.cap[a];
            }
        }
        cost
    }

    pub fn solve(&self) -> MaxFlowResult {
        let sentinel = self.sentinel();
        let mut s = Solver::new(self, sentinel);
        s.run();
        let labels = s.source_reachable();
        let res = MaxFlowResult {
            flow: s.flow,
            labels,
            sentinel,
        };
        #[cfg(debug_assertions)]
        {
            let c = self.cut_cost(&res.labels);
            debug_assert!(
                (c - res.flow).abs() <= 1e-9 * res.flow.abs().max(1.0),
                "cut cost {c} differs from flow {}",
                res.flow
            );
        }
        res
    }

    /// Writes the graph in the line-oriented dump format:
    ///
    /// ```text
    /// # meshfuse flow graph
    /// nodes <n>
    /// arcs <m>
    /// n <id> <source_cap> <sink_cap>
    /// a <from> <to> <cap> <reverse_cap>
    /// ```
    ///
    /// Infinite capacities are written as `inf`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# meshfuse flow graph")?;
        writeln!(w, "nodes {}", self.node_count())?;
        writeln!(w, "arcs {}", self.arc_count())?;
        for u in 0..self.node_count() {
            writeln!(w, "n {} {} {}", u, self.source_cap[u], self.sink_cap[u])?;
        }
        for p in 0..self.arc_count() {
            let a = 2 * p;
            let (u, v) = self.arc_ends(a);
            writeln!(w, "a {} {} {} {}", u, v, self.cap[a], self.cap[a + 1])?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<FlowGraph, MaxflowError> {
        let mut g = FlowGraph::new();
        for (ln, line) in r.lines().enumerate() {
            let ln = ln + 1;
            let line = line.map_err(|e| MaxflowError::Parse(ln, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, MaxflowError> {
                f.get(i)
                    .ok_or_else(|| MaxflowError::Parse(ln, "missing field".into()))?
                    .parse::<f64>()
                    .map_err(|e| MaxflowError::Parse(ln, e.to_string()))
            };
            let idx = |i: usize| -> Result<usize, MaxflowError> {
                f.get(i)
                    .ok_or_else(|| MaxflowError::Parse(ln, "missing field".into()))?
                    .parse::<usize>()
                    .map_err(|e| MaxflowError::Parse(ln, e.to_string()))
            };
            match f[0] {
                "nodes" => {
                    g.add_nodes(idx(1)?);
                }
                "arcs" => {}
                "n" => g.set_terminal(idx(1)?, num(2)?, num(3)?)?,
                "a" => {
                    g.add_arc(idx(1)?, idx(2)?, num(3)?, num(4)?)?;
                }
                other => return Err(MaxflowError::Parse(ln, format!("unknown record `{other}`"))),
            }
        }
        Ok(g)
    }
}

const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const NONE: u32 = u32::MAX;

struct Solver<'a> {
    g: &'a FlowGraph,
    rcap: Vec<f64>,
    tr: Vec<f64>,
    /// Arc from the node towards its parent in the search tree.
    parent: Vec<u32>,
    in_sink: Vec<bool>,
    ts: Vec<u32>,
    dist: Vec<u32>,
    active: VecDeque<u32>,
    is_active: Vec<bool>,
    orphans: VecDeque<u32>,
    time: u32,
    flow: f64,
}

impl<'a> Solver<'a> {
    fn new(g: &'a FlowGraph, inf: f64) -> Self {
        let n = g.node_count();
        let mut s = Solver {
            g,
            rcap: g.cap.clone(),
            tr: vec![0.0; n],
            parent: vec![NONE; n],
            in_sink: vec![false; n],
            ts: vec![0; n],
            dist: vec![0; n],
            active: VecDeque::new(),
            is_active: vec![false; n],
            orphans: VecDeque::new(),
            time: 0,
            flow: 0.0,
        };
        for u in 0..n {
            let cs = if g.source_cap[u].is_finite() { g.source_cap[u] } else { inf };
            let ct = if g.sink_cap[u].is_finite() { g.sink_cap[u] } else { inf };
            s.flow += cs.min(ct);
            let t = cs - ct;
            s.tr[u] = t;
            if t != 0.0 {
                s.in_sink[u] = t < 0.0;
                s.parent[u] = TERMINAL;
                s.dist[u] = 1;
                s.activate(u as u32);
            }
        }
        s
    }

    #[inline]
    fn activate(&mut self, u: u32) {
        if !self.is_active[u as usize] {
            self.is_active[u as usize] = true;
            self.active.push_back(u);
        }
    }

    fn next_active(&mut self) -> Option<u32> {
        while let Some(u) = self.active.pop_front() {
            self.is_active[u as usize] = false;
            if self.parent[u as usize] != NONE {
                return Some(u);
            }
        }
        None
    }

    fn arcs(&self, u: u32) -> ArcIter<'a> {
        ArcIter {
            g: self.g,
            cur: self.g.first[u as usize],
        }
    }

    fn run(&mut self) {
        let mut current: Option<u32> = None;
        loop {
            let i = match current {
                Some(i) if self.parent[i as usize] != NONE => i,
                _ => {
                    match self.next_active() {
                        Some(i) => i,
                        None => break,
                    }
                }
            };
            let mut bridge = None;
            if !self.in_sink[i as usize] {
                for a in self.arcs(i) {
                    if self.rcap[a] > 0.0 {
                        let j = self.g.head[a] as usize;
                        if self.parent[j] == NONE {
                            self.in_sink[j] = false;
                            self.parent[j] = (a ^ 1) as u32;
                            self.ts[j] = self.ts[i as usize];
                            self.dist[j] = self.dist[i as usize] + 1;
                            self.activate(j as u32);
                        } else if self.in_sink[j] {
                            bridge = Some(a);
                            break;
                        } else if self.ts[j] <= self.ts[i as usize] && self.dist[j] > self.dist[i as usize] {
                            self.parent[j] = (a ^ 1) as u32;
                            self.ts[j] = self.ts[i as usize];
                            self.dist[j] = self.dist[i as usize] + 1;
                        }
                    }
                }
            } else {
                for a in self.arcs(i) {
                    if self.rcap[a ^ 1] > 0.0 {
                        let j = self.g.head[a] as usize;
                        if self.parent[j] == NONE {
                            self.in_sink[j] = true;
                            self.parent[j] = (a ^ 1) as u32;
                            self.ts[j] = self.ts[i as usize];
                            self.dist[j] = self.dist[i as usize] + 1;
                            self.activate(j as u32);
                        } else if !self.in_sink[j] {
                            bridge = Some(a ^ 1);
                            break;
                        } else if self.ts[j] <= self.ts[i as usize] && self.dist[j] > self.dist[i as usize] {
                            self.parent[j] = (a ^ 1) as u32;
                            self.ts[j] = self.ts[i as usize];
                            self.dist[j] = self.dist[i as usize] + 1;
                        }
                    }
                }
            }
            self.time += 1;
            if let Some(a) = bridge {
                // keep growing from i once the trees are repaired
                current = Some(i);
                self.augment(a);
                while let Some(o) = self.orphans.pop_front() {
                    if self.in_sink[o as usize] {
                        self.adopt_sink(o);
                    } else {
                        self.adopt_source(o);
                    }
                }
            } else {
                current = None;
            }
        }
    }

    fn augment(&mut self, middle: usize) {
        let g = self.g;
        let mut b = self.rcap[middle];
        // source side
        let mut i = g.head[middle ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            b = b.min(self.rcap[a as usize ^ 1]);
            i = g.head[a as usize] as usize;
        }
        b = b.min(self.tr[i]);
        // sink side
        let mut i = g.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            b = b.min(self.rcap[a as usize]);
            i = g.head[a as usize] as usize;
        }
        b = b.min(-self.tr[i]);

        self.rcap[middle ^ 1] += b;
        self.rcap[middle] -= b;

        let mut i = g.head[middle ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let a = a as usize;
            self.rcap[a] += b;
            self.rcap[a ^ 1] -= b;
            if self.rcap[a ^ 1] == 0.0 {
                self.parent[i] = ORPHAN;
                self.orphans.push_front(i as u32);
            }
            i = g.head[a] as usize;
        }
        self.tr[i] -= b;
        if self.tr[i] == 0.0 {
            self.parent[i] = ORPHAN;
            self.orphans.push_front(i as u32);
        }

        let mut i = g.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let a = a as usize;
            self.rcap[a ^ 1] += b;
            self.rcap[a] -= b;
            if self.rcap[a] == 0.0 {
                self.parent[i] = ORPHAN;
                self.orphans.push_front(i as u32);
            }
            i = g.head[a] as usize;
        }
        self.tr[i] += b;
        if self.tr[i] == 0.0 {
            self.parent[i] = ORPHAN;
            self.orphans.push_front(i as u32);
        }
        self.flow += b;
    }

    /// Distance to the terminal through valid parents, or `None` if the
    /// path ends in an orphan.
    fn origin_distance(&mut self, start: usize) -> Option<u32> {
        let mut j = start;
        let mut d = 0u32;
        loop {
            if self.ts[j] == self.time {
                d += self.dist[j];
                break;
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.ts[j] = self.time;
                self.dist[j] = 1;
                break;
            }
            if a == ORPHAN || a == NONE {
                return None;
            }
            j = self.g.head[a as usize] as usize;
        }
        // cache distances along the path
        let mut j = start;
        let mut dd = d;
        while self.ts[j] != self.time {
            self.ts[j] = self.time;
            self.dist[j] = dd;
            dd -= 1;
            j = self.g.head[self.parent[j] as usize] as usize;
        }
        Some(d)
    }

    fn adopt_source(&mut self, i: u32) {
        let mut best: Option<(usize, u32)> = None;
        for a in self.arcs(i) {
            if self.rcap[a ^ 1] > 0.0 {
                let j = self.g.head[a] as usize;
                if !self.in_sink[j] && self.parent[j] != NONE {
                    if let Some(d) = self.origin_distance(j) {
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((a, d));
                        }
                    }
                }
            }
        }
        let iu = i as usize;
        if let Some((a, d)) = best {
            self.parent[iu] = a as u32;
            self.ts[iu] = self.time;
            self.dist[iu] = d + 1;
            return;
        }
        self.ts[iu] = 0;
        for a in self.arcs(i) {
            let j = self.g.head[a] as usize;
            if !self.in_sink[j] && self.parent[j] != NONE {
                if self.rcap[a ^ 1] > 0.0 {
                    self.activate(j as u32);
                }
                let pj = self.parent[j];
                if pj != TERMINAL && pj != ORPHAN && self.g.head[pj as usize] == i {
                    self.parent[j] = ORPHAN;
                    self.orphans.push_back(j as u32);
                }
            }
        }
        self.parent[iu] = NONE;
    }

    fn adopt_sink(&mut self, i: u32) {
        let mut best: Option<(usize, u32)> = None;
        for a in self.arcs(i) {
            if self.rcap[a] > 0.0 {
                let j = self.g.head[a] as usize;
                if self.in_sink[j] && self.parent[j] != NONE {
                    if let Some(d) = self.origin_distance(j) {
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((a, d));
                        }
                    }
                }
            }
        }
        let iu = i as usize;
        if let Some((a, d)) = best {
            self.parent[iu] = a as u32;
            self.ts[iu] = self.time;
            self.dist[iu] = d + 1;
            return;
        }
        self.ts[iu] = 0;
        for a in self.arcs(i) {
            let j = self.g.head[a] as usize;
            if self.in_sink[j] && self.parent[j] != NONE {
                if self.rcap[a] > 0.0 {
                    self.activate(j as u32);
                }
                let pj = self.parent[j];
                if pj != TERMINAL && pj != ORPHAN && self.g.head[pj as usize] == i {
                    self.parent[j] = ORPHAN;
                    self.orphans.push_back(j as u32);
                }
            }
        }
        self.parent[iu] = NONE;
    }

    /// Canonical labelling: nodes reachable from the source in the residual
    /// graph are `Source`, all others `Sink`.
    fn source_reachable(&self) -> Vec<Label> {
        let n = self.g.node_count();
        let mut lab = vec![Label::Sink; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&u| self.tr[u] > 0.0).collect();
        for &u in &queue {
            lab[u] = Label::Source;
        }
        while let Some(u) = queue.pop_front() {
            for a in self.arcs(u as u32) {
                let v = self.g.head[a] as usize;
                if self.rcap[a] > 0.0 && lab[v] == Label::Sink {
                    lab[v] = Label::Source;
                    queue.push_back(v);
                }
            }
        }
        lab
    }
}

struct ArcIter<'a> {
    g: &'a FlowGraph,
    cur: u32,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;
    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.cur == NIL {
            return None;
        }
        let a = self.cur as usize;
        self.cur = self.g.next[a];
        Some(a)
    }
}
