use alloc::vec;
use alloc::vec::Vec;

use super::{CyclicGraph, Rational};

const UNSEEN: u32 = u32::MAX;

struct Unrolled<'g> {
    graph: &'g CyclicGraph,
    out_edges: Vec<Vec<usize>>,
}

impl<'g> Unrolled<'g> {
    fn new(graph: &'g CyclicGraph) -> Self {
        let mut out_edges = vec![Vec::new(); graph.num_nodes()];
        for (k, e) in graph.edges.iter().enumerate() {
            out_edges[e.from].push(k);
        }
        Unrolled { graph, out_edges }
    }

    /// Breadth-first search from the input node at absolute time `start`
    /// over times `start..=start + horizon`. Returns the edge count to the
    /// output node at each offset `0..=horizon`.
    fn paths_from(&self, start: usize, horizon: usize) -> Vec<Option<usize>> {
        let n = self.graph.num_nodes();
        let mut dist = vec![UNSEEN; n * (horizon + 1)];
        let mut frontier = vec![(self.graph.input, 0usize)];
        dist[self.graph.input] = 0;
        let mut level = 0;
        while !frontier.is_empty() {
            level += 1;
            let mut next = Vec::new();
            for &(u, dt) in &frontier {
                for &k in &self.out_edges[u] {
                    let e = &self.graph.edges[k];
                    let to_dt = dt + e.sigma;
                    if to_dt > horizon || !e.active_at(start + to_dt) {
                        continue;
                    }
                    let slot = to_dt * n + e.to;
                    if dist[slot] == UNSEEN {
                        dist[slot] = level;
                        next.push((e.to, to_dt));
                    }
                }
            }
            frontier = next;
        }
        (0..=horizon)
            .map(|dt| match dist[dt * n + self.graph.output] {
                UNSEEN => None,
                v => Some(v as usize),
            })
            .collect()
    }
}

/// `d_i(n)` for starts `i` and spans `n = 1..=horizon`; `None` marks an
/// unreachable output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTable {
    pub starts: Vec<usize>,
    pub horizon: usize,
    rows: Vec<Vec<Option<usize>>>,
}

impl PathTable {
    /// Every start `i` in `0..period`. With offsets `σ ≥ 0` a path never
    /// leaves `[i, i + n]`, so unrolling `horizon` steps is exact.
    pub fn compute(graph: &CyclicGraph, horizon: usize) -> Self {
        Self::for_starts(graph, horizon, (0..graph.period).collect())
    }

    pub fn for_starts(graph: &CyclicGraph, horizon: usize, starts: Vec<usize>) -> Self {
        let unrolled = Unrolled::new(graph);
        let rows = starts
            .iter()
            .map(|&i| unrolled.paths_from(i, horizon))
            .collect();
        PathTable { starts, horizon, rows }
    }

    /// `d_i(n)` for the `k`-th start, `0 <= n <= horizon`.
    pub fn get(&self, k: usize, n: usize) -> Option<usize> {
        self.rows[k][n]
    }

    /// Spans `1..=horizon` of the `k`-th start.
    pub fn row(&self, k: usize) -> &[Option<usize>] {
        &self.rows[k][1..]
    }

    /// True when every start gives the same row.
    pub fn is_start_independent(&self) -> bool {
        self.rows.windows(2).all(|w| w[0][1..] == w[1][1..])
    }
}

/// Shortest input-to-output path from time `i` to time `i + n`.
pub fn shortest_path_oracle(graph: &CyclicGraph, i: usize, n: usize) -> Option<usize> {
    assert!(n >= 1, "spans start at 1");
    Unrolled::new(graph).paths_from(i, n)[n]
}

/// `max_i d_i(n)` for each `n`; unreachable from any start makes it `None`.
pub fn max_path_lengths(table: &PathTable) -> Vec<Option<usize>> {
    (1..=table.horizon)
        .map(|n| {
            let mut worst = Some(0);
            for k in 0..table.starts.len() {
                worst = match (worst, table.get(k, n)) {
                    (Some(w), Some(v)) => Some(w.max(v)),
                    _ => None,
                };
            }
            worst
        })
        .collect()
}

/// Exact mean of the maxima; `None` (infinite) if any span is unreachable.
pub fn mean_of_maxima(maxima: &[Option<usize>]) -> Option<Rational> {
    let mut sum: i64 = 0;
    for m in maxima {
        sum += *m.as_ref()? as i64;
    }
    Some(Rational::new(sum, maxima.len() as i64))
}

/// Mean recurrent length `(1/m) Σ_{n=1..m} max_i d_i(n)` from the oracle.
pub fn mean_recurrent_length_oracle(graph: &CyclicGraph) -> Option<Rational> {
    let table = PathTable::compute(graph, graph.period);
    mean_of_maxima(&max_path_lengths(&table))
}

/// Number of past inputs visible to the output, or `None` when recurrence
/// makes it unbounded.
pub fn receptive_field(graph: &CyclicGraph) -> Option<usize> {
    if graph.has_cycle() {
        return None;
    }
    // Without cycles a path uses each edge at most once.
    let bound: usize = graph.edges.iter().map(|e| e.sigma).sum();
    let reach = Unrolled::new(graph).paths_from(0, bound);
    let last = reach.iter().rposition(|d| d.is_some())?;
    Some(last + 1)
}
