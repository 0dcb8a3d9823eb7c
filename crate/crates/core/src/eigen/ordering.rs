//! Fill-reducing ordering for sparse LDLᵀ: nested dissection with
//! separators taken from breadth-first level structures.

use std::collections::VecDeque;

use crate::operator::SparseSymmetric;

/// Subgraphs at or below this size are ordered as they come.
const LEAF_SIZE: usize = 48;

/// Symmetric adjacency (both directions, no self loops).
pub(crate) struct Adjacency {
    ptr: Vec<usize>,
    idx: Vec<usize>,
}

impl Adjacency {
    pub(crate) fn of(a: &SparseSymmetric) -> Self {
        let n = a.order();
        let mut deg = vec![0usize; n];
        for i in 0..n {
            for (j, _) in a.lower_row(i) {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + deg[i];
        }
        let mut fill = ptr[..n].to_vec();
        let mut idx = vec![0usize; ptr[n]];
        for i in 0..n {
            for (j, _) in a.lower_row(i) {
                idx[fill[i]] = j;
                fill[i] += 1;
                idx[fill[j]] = i;
                fill[j] += 1;
            }
        }
        Adjacency { ptr, idx }
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.idx[self.ptr[v]..self.ptr[v + 1]]
    }

    fn len(&self) -> usize {
        self.ptr.len() - 1
    }
}

struct Dissector<'g> {
    graph: &'g Adjacency,
    // vertex belongs to the active subgraph iff member[v] == stamp
    member: Vec<u32>,
    seen: Vec<u32>,
    level: Vec<u32>,
    stamp: u32,
    order: Vec<usize>,
}

impl<'g> Dissector<'g> {
    fn fresh(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    /// Breadth-first traversal inside the subgraph tagged `tag`, recording
    /// levels. Returns visit order and the number of levels.
    fn bfs(&mut self, root: usize, tag: u32) -> (Vec<usize>, u32) {
        let mark = self.fresh();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        self.seen[root] = mark;
        self.level[root] = 0;
        queue.push_back(root);
        let mut depth = 0;
        while let Some(v) = queue.pop_front() {
            out.push(v);
            depth = depth.max(self.level[v]);
            for &w in self.graph.neighbors(v) {
                if self.member[w] == tag && self.seen[w] != mark {
                    self.seen[w] = mark;
                    self.level[w] = self.level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (out, depth + 1)
    }

    fn tag(&mut self, nodes: &[usize]) -> u32 {
        let tag = self.fresh();
        for &v in nodes {
            self.member[v] = tag;
        }
        tag
    }

    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend(nodes);
            return;
        }
        let tag = self.tag(&nodes);
        let (first, _) = self.bfs(nodes[0], tag);
        if first.len() < nodes.len() {
            for part in self.components(&nodes, tag) {
                self.dissect(part);
            }
            return;
        }
        // pseudo-peripheral root
        let (mut visit, mut depth) = self.bfs(*first.last().unwrap(), tag);
        for _ in 0..4 {
            let cand = *visit.last().unwrap();
            let (v2, d2) = self.bfs(cand, tag);
            if d2 <= depth {
                break;
            }
            visit = v2;
            depth = d2;
        }
        if depth < 3 {
            self.order.extend(nodes);
            return;
        }
        let half = nodes.len() / 2;
        let mut cut = 0;
        let mut seen = 0;
        let mut counts = vec![0usize; depth as usize];
        for &v in &visit {
            counts[self.level[v] as usize] += 1;
        }
        for (lvl, &c) in counts.iter().enumerate() {
            seen += c;
            if seen >= half {
                cut = lvl as u32;
                break;
            }
        }
        cut = cut.clamp(1, depth - 2);
        // keep only level-`cut` nodes that touch the next level
        let mut separator = Vec::new();
        let mut rest = Vec::with_capacity(nodes.len());
        for &v in &visit {
            let lv = self.level[v];
            if lv == cut
                && self
                    .graph
                    .neighbors(v)
                    .iter()
                    .any(|&w| self.member[w] == tag && self.level[w] == cut + 1)
            {
                separator.push(v);
            } else {
                rest.push(v);
            }
        }
        let rest_tag = self.tag(&rest);
        for part in self.components(&rest, rest_tag) {
            self.dissect(part);
        }
        self.order.extend(separator);
    }

    fn components(&mut self, nodes: &[usize], tag: u32) -> Vec<Vec<usize>> {
        let mark = self.fresh();
        let mut parts = Vec::new();
        for &start in nodes {
            if self.seen[start] == mark {
                continue;
            }
            let mut part = Vec::new();
            let mut queue = VecDeque::from([start]);
            self.seen[start] = mark;
            while let Some(v) = queue.pop_front() {
                part.push(v);
                for &w in self.graph.neighbors(v) {
                    if self.member[w] == tag && self.seen[w] != mark {
                        self.seen[w] = mark;
                        queue.push_back(w);
                    }
                }
            }
            parts.push(part);
        }
        parts
    }
}

/// Elimination order `perm[new] = old`.
pub(crate) fn nested_dissection(graph: &Adjacency) -> Vec<usize> {
    let n = graph.len();
    let mut d = Dissector {
        graph,
        member: vec![0; n],
        seen: vec![0; n],
        level: vec![0; n],
        stamp: 0,
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect());
    d.order
}
