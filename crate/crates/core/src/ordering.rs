//! Sparsity graphs, nested dissection and the path-lemma fill oracle.

use std::collections::VecDeque;

use crate::compress::SparsityPattern;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::wavelet::WaveletBasis;

/// Undirected graph of a structurally symmetric pattern.
#[derive(Clone, Debug)]
pub struct SparsityGraph {
    pub n: usize,
    /// Sorted neighbour lists without self-loops.
    pub adj: Vec<Vec<usize>>,
    /// Vertex coordinates; vertex indices unless set from a basis.
    pub coords: Vec<[f64; 2]>,
    pub levels: Vec<u32>,
    pub dim: usize,
}

impl SparsityGraph {
    /// Graph from an edge list; duplicate edges and loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        SparsityGraph {
            n,
            adj,
            coords: (0..n).map(|i| [i as f64, 0.0]).collect(),
            levels: vec![0; n],
            dim: 1,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>, dim: usize) -> Self {
        assert_eq!(coords.len(), self.n);
        self.coords = coords;
        self.dim = dim;
        self
    }

    /// Uses support centres (in units of the root side) and levels of the basis.
    pub fn with_basis(mut self, basis: &WaveletBasis) -> Self {
        let tree = basis.tree();
        let unit = (1u64 << tree.max_level()) as f64;
        self.coords = basis
            .indices()
            .iter()
            .map(|idx| {
                let b = tree.grid_box(idx.support);
                [
                    0.5 * (b.lo[0] + b.hi[0]) as f64 / unit,
                    0.5 * (b.lo[1] + b.hi[1]) as f64 / unit,
                ]
            })
            .collect();
        self.levels = basis.indices().iter().map(|i| i.level).collect();
        self.dim = basis.dim();
        self
    }
}

/// Graph of a pattern; the pattern is symmetrized first if needed.
pub fn sparsity_graph(pattern: &SparsityPattern) -> SparsityGraph {
    let sym;
    let p = if pattern.symmetric {
        pattern
    } else {
        sym = pattern.symmetrized();
        &sym
    };
    let adj = p
        .cols
        .iter()
        .enumerate()
        .map(|(j, rows)| rows.iter().cloned().filter(|&i| i != j).collect())
        .collect();
    SparsityGraph {
        n: p.n,
        adj,
        coords: (0..p.n).map(|i| [i as f64, 0.0]).collect(),
        levels: vec![0; p.n],
        dim: 1,
    }
}

/// Bijection `π: old → new` with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            forward: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    /// From `π` with `forward[old] = new`.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in forward.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::Invalid(format!("not a permutation: {new} at {old}")));
            }
            inverse[new] = old;
        }
        Ok(Permutation { forward, inverse })
    }

    /// From an elimination order listing old indices by new position.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let p = Self::from_forward(order)?;
        Ok(Permutation {
            forward: p.inverse,
            inverse: p.forward,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// `(P x)[π(i)] = x[i]`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, &v) in x.iter().enumerate() {
            y[self.forward[i]] = v;
        }
        y
    }

    /// `(Pᵀ y)[i] = y[π(i)]`.
    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&p| y[p]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    /// Coordinate bisection with a vertex separator.
    Bisection,
    /// Disconnected vertex set split between components; the separator is empty.
    Components,
}

#[derive(Clone, Debug)]
pub enum DissectionTree {
    Leaf {
        vertices: Vec<usize>,
    },
    Node {
        kind: SplitKind,
        v1: Box<DissectionTree>,
        v2: Box<DissectionTree>,
        separator: Vec<usize>,
    },
}

impl DissectionTree {
    pub fn vertices(&self) -> Vec<usize> {
        match self {
            DissectionTree::Leaf { vertices } => vertices.clone(),
            DissectionTree::Node {
                v1, v2, separator, ..
            } => {
                let mut v = v1.vertices();
                v.extend(v2.vertices());
                v.extend(separator);
                v
            }
        }
    }

    /// Separator sizes of bisection nodes, grouped by depth.
    pub fn separator_sizes(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        fn walk(t: &DissectionTree, depth: usize, out: &mut Vec<Vec<usize>>) {
            if let DissectionTree::Node {
                kind,
                v1,
                v2,
                separator,
            } = t
            {
                let next = if *kind == SplitKind::Bisection {
                    if out.len() <= depth {
                        out.resize(depth + 1, Vec::new());
                    }
                    out[depth].push(separator.len());
                    depth + 1
                } else {
                    depth
                };
                walk(v1, next, out);
                walk(v2, next, out);
            }
        }
        walk(self, 0, &mut out);
        out
    }

    /// Checks every node: no edge between `V₁` and `V₂`, the parts partition
    /// the node, and bisection nodes are balanced.
    pub fn check(&self, graph: &SparsityGraph) -> std::result::Result<(), String> {
        match self {
            DissectionTree::Leaf { .. } => Ok(()),
            DissectionTree::Node {
                kind,
                v1,
                v2,
                separator,
            } => {
                let a = v1.vertices();
                let b = v2.vertices();
                let mut side = vec![0u8; graph.n];
                for &v in &a {
                    side[v] = 1;
                }
                for &v in &b {
                    if side[v] != 0 {
                        return Err(format!("vertex {v} in both parts"));
                    }
                    side[v] = 2;
                }
                for &v in separator {
                    if side[v] != 0 {
                        return Err(format!("separator vertex {v} repeated"));
                    }
                }
                for &v in &a {
                    if let Some(&w) = graph.adj[v].iter().find(|&&w| side[w] == 2) {
                        return Err(format!("edge {v}-{w} crosses the separator"));
                    }
                }
                let total = a.len() + b.len() + separator.len();
                if *kind == SplitKind::Bisection && 4 * a.len().max(b.len()) > 3 * total {
                    return Err(format!("unbalanced split {} / {} of {total}", a.len(), b.len()));
                }
                v1.check(graph)?;
                v2.check(graph)
            }
        }
    }
}

/// Nested dissection by coordinate bisection; blocks of at most `leaf_size`
/// vertices are ordered by minimum degree.
pub fn nested_dissection(graph: &SparsityGraph, leaf_size: usize) -> Result<(Permutation, DissectionTree)> {
    if leaf_size == 0 {
        return Err(Error::Parameter {
            name: "ordering.leaf_size",
            value: 0.0,
            constraint: "leaf_size >= 1".into(),
        });
    }
    let mut nd = Dissector {
        graph,
        leaf_size,
        mark: vec![u32::MAX; graph.n],
        stamp: 0,
        order: Vec::with_capacity(graph.n),
    };
    let tree = nd.dissect((0..graph.n).collect());
    let perm = Permutation::from_order(nd.order)?;
    Ok((perm, tree))
}

struct Dissector<'g> {
    graph: &'g SparsityGraph,
    leaf_size: usize,
    mark: Vec<u32>,
    stamp: u32,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn next_stamp(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    fn dissect(&mut self, vertices: Vec<usize>) -> DissectionTree {
        if vertices.len() <= self.leaf_size {
            let ordered = minimum_degree(self.graph, &vertices);
            self.order.extend(&ordered);
            return DissectionTree::Leaf { vertices: ordered };
        }
        let comps = self.components(&vertices);
        if comps.len() > 1 {
            // split the components into two halves of similar size
            let half = vertices.len() / 2;
            let mut first = Vec::new();
            let mut second = Vec::new();
            let mut acc = 0;
            for c in comps {
                if acc < half && (first.is_empty() || acc + c.len() <= half + c.len() / 2) {
                    acc += c.len();
                    first.extend(c);
                } else {
                    second.extend(c);
                }
            }
            if second.is_empty() {
                let ordered = minimum_degree(self.graph, &first);
                self.order.extend(&ordered);
                return DissectionTree::Leaf { vertices: ordered };
            }
            first.sort_unstable();
            second.sort_unstable();
            let v1 = self.dissect(first);
            let v2 = self.dissect(second);
            return DissectionTree::Node {
                kind: SplitKind::Components,
                v1: Box::new(v1),
                v2: Box::new(v2),
                separator: Vec::new(),
            };
        }
        let (v1, v2, sep) = self.bisect(&vertices);
        let t1 = self.dissect(v1);
        let t2 = self.dissect(v2);
        self.order.extend(&sep);
        DissectionTree::Node {
            kind: SplitKind::Bisection,
            v1: Box::new(t1),
            v2: Box::new(t2),
            separator: sep,
        }
    }

    /// Connected components of the induced subgraph, ordered by smallest vertex.
    fn components(&mut self, vertices: &[usize]) -> Vec<Vec<usize>> {
        let inside = self.next_stamp();
        for &v in vertices {
            self.mark[v] = inside;
        }
        let seen = self.next_stamp();
        let mut comps = Vec::new();
        let mut queue = VecDeque::new();
        for &s in vertices {
            if self.mark[s] != inside {
                continue;
            }
            self.mark[s] = seen;
            let mut comp = vec![s];
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.graph.adj[u] {
                    if self.mark[w] == inside {
                        self.mark[w] = seen;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    fn bisect(&mut self, vertices: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let g = self.graph;
        let mut axis = 0;
        if g.dim == 2 {
            let spread = |d: usize| {
                let (lo, hi) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(g.coords[v][d]), h.max(g.coords[v][d]))
                });
                hi - lo
            };
            if spread(1) > spread(0) {
                axis = 1;
            }
        }
        let mut sorted = vertices.to_vec();
        sorted.sort_by(|&a, &b| {
            g.coords[a][axis]
                .partial_cmp(&g.coords[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let split = vertices.len().div_ceil(2);
        let side1 = self.next_stamp();
        for &v in &sorted[..split] {
            self.mark[v] = side1;
        }
        let side2 = self.next_stamp();
        for &v in &sorted[split..] {
            self.mark[v] = side2;
        }
        let induced_degree = |v: usize, mark: &[u32]| {
            g.adj[v]
                .iter()
                .filter(|&&w| mark[w] == side1 || mark[w] == side2)
                .count()
        };
        let mut sep = Vec::new();
        for &u in &sorted[..split] {
            for &w in &g.adj[u] {
                if self.mark[w] != side2 {
                    continue;
                }
                let (du, dw) = (induced_degree(u, &self.mark), induced_degree(w, &self.mark));
                let pick = if du > dw || (du == dw && u < w) { u } else { w };
                sep.push(pick);
            }
        }
        sep.sort_unstable();
        sep.dedup();
        let in_sep = self.next_stamp();
        for &v in &sep {
            self.mark[v] = in_sep;
        }
        let mark = &self.mark;
        let mut v1: Vec<usize> = sorted[..split].iter().cloned().filter(|&v| mark[v] != in_sep).collect();
        let mut v2: Vec<usize> = sorted[split..].iter().cloned().filter(|&v| mark[v] != in_sep).collect();
        v1.sort_unstable();
        v2.sort_unstable();
        (v1, v2, sep)
    }
}

/// Greedy minimum-degree order of the subgraph induced by `vertices`
/// (ties broken by smallest vertex index).
pub fn minimum_degree(graph: &SparsityGraph, vertices: &[usize]) -> Vec<usize> {
    let b = vertices.len();
    let mut local: Vec<usize> = vertices.to_vec();
    local.sort_unstable();
    let pos = |v: usize| local.binary_search(&v).ok();
    let mut adj = vec![vec![false; b]; b];
    for (i, &v) in local.iter().enumerate() {
        for &w in &graph.adj[v] {
            if let Some(j) = pos(w) {
                adj[i][j] = true;
            }
        }
    }
    let mut alive = vec![true; b];
    let mut out = Vec::with_capacity(b);
    for _ in 0..b {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for i in 0..b {
            if alive[i] {
                let d = (0..b).filter(|&j| alive[j] && adj[i][j]).count();
                if d < best_deg {
                    best = i;
                    best_deg = d;
                }
            }
        }
        alive[best] = false;
        out.push(local[best]);
        let nbrs: Vec<usize> = (0..b).filter(|&j| alive[j] && adj[best][j]).collect();
        for &x in &nbrs {
            for &y in &nbrs {
                if x != y {
                    adj[x][y] = true;
                }
            }
        }
    }
    out
}

/// Lower-triangular factor pattern in permuted numbering, diagonal included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorPattern {
    pub n: usize,
    pub cols: Vec<Vec<usize>>,
}

impl FactorPattern {
    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }
}

pub const FILL_ORACLE_CUTOFF: usize = 512;

/// Factor pattern from the path lemma: `ℓ_{ij} ≠ 0` for `i > j` iff a path
/// joins the two vertices through vertices eliminated before both.
pub fn fill_in_oracle(graph: &SparsityGraph, perm: &Permutation) -> Result<FactorPattern> {
    fill_in_oracle_with_cutoff(graph, perm, FILL_ORACLE_CUTOFF)
}

pub fn fill_in_oracle_with_cutoff(graph: &SparsityGraph, perm: &Permutation, cutoff: usize) -> Result<FactorPattern> {
    let n = graph.n;
    if n > cutoff {
        return Err(Error::OracleTooLarge { vertices: n, cutoff });
    }
    let pi = perm.forward();
    let mut cols = vec![Vec::new(); n];
    let mut seen = vec![usize::MAX; n];
    for j in 0..n {
        let pj = pi[j];
        let mut rows = vec![pj];
        let mut queue = VecDeque::from([j]);
        seen[j] = j;
        while let Some(u) = queue.pop_front() {
            for &w in &graph.adj[u] {
                if seen[w] == j {
                    continue;
                }
                seen[w] = j;
                if pi[w] > pj {
                    rows.push(pi[w]);
                } else {
                    queue.push_back(w);
                }
            }
        }
        rows.sort_unstable();
        cols[pj] = rows;
    }
    Ok(FactorPattern { n, cols })
}

/// Average number of nonzeros per row.
pub fn anz(matrix: &SparseMatrix) -> f64 {
    matrix.anz()
}
