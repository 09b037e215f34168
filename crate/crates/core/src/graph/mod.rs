//! Cyclic-graph models of recurrent architectures and their memory measures.
//!
//! A graph has one input node, one node per hidden layer (or clockwork
//! group) and an output node, which is the top hidden node unless the
//! architecture needs a separate readout (fusion or clockwork output). An
//! edge `u → v` with offset `σ` feeds `v` at time `t` from `u` at time
//! `t − σ`. Edges may be gated: active only when `t ≡ residue (mod modulus)`.
//! Path lengths count every edge as one.

mod oracle;
mod theory;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use oracle::{
    max_path_lengths, mean_of_maxima, mean_recurrent_length_oracle, receptive_field, shortest_path_oracle,
    PathTable,
};
pub use theory::{
    clockwork_capacity_report, digit_path_length, enumerate_schedules, eq6_value, eq7_value,
    mean_recurrent_length_closed_form, ratio_sum_statistic, recurrent_edges_per_node, to_f64, verify_optimality,
    ClockworkReport, ClosedForm, EdgeCounts, OptimalityReport, RankedSchedule,
};

use crate::error::{Error, Result};

pub type Rational = num_rational::Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchKind {
    DilatedRnn,
    RegularSkipRnn,
    DilatedCnn,
    ClockworkRnn,
    CustomSchedule,
}

impl ArchKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchKind::DilatedRnn => "dilated_rnn",
            ArchKind::RegularSkipRnn => "regular_skip_rnn",
            ArchKind::DilatedCnn => "dilated_cnn",
            ArchKind::ClockworkRnn => "clockwork_rnn",
            ArchKind::CustomSchedule => "custom_schedule",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dilated_rnn" => ArchKind::DilatedRnn,
            "regular_skip_rnn" => ArchKind::RegularSkipRnn,
            "dilated_cnn" => ArchKind::DilatedCnn,
            "clockwork_rnn" => ArchKind::ClockworkRnn,
            "custom_schedule" => ArchKind::CustomSchedule,
            other => return Err(Error::config(format!("unknown architecture kind `{other}`"))),
        })
    }
}

/// Architecture description for the graph analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchSpec {
    pub kind: ArchKind,
    pub layers: usize,
    pub base: usize,
    pub start_exponent: u32,
    /// Skip length of the regular-skip RNN; defaults to `base^(layers−1)`.
    pub period: Option<usize>,
    /// Explicit schedule for `CustomSchedule`.
    pub dilations: Option<Vec<usize>>,
}

impl ArchSpec {
    fn with_kind(kind: ArchKind, layers: usize) -> Self {
        ArchSpec {
            kind,
            layers,
            base: 2,
            start_exponent: 0,
            period: None,
            dilations: None,
        }
    }

    pub fn dilated(layers: usize, base: usize) -> Self {
        ArchSpec {
            base,
            ..Self::with_kind(ArchKind::DilatedRnn, layers)
        }
    }

    pub fn regular_skip(layers: usize, skip: usize) -> Self {
        ArchSpec {
            period: Some(skip),
            ..Self::with_kind(ArchKind::RegularSkipRnn, layers)
        }
    }

    pub fn dilated_cnn(layers: usize) -> Self {
        Self::with_kind(ArchKind::DilatedCnn, layers)
    }

    pub fn clockwork(groups: usize) -> Self {
        Self::with_kind(ArchKind::ClockworkRnn, groups)
    }

    pub fn custom(dilations: &[usize]) -> Self {
        ArchSpec {
            dilations: Some(dilations.to_vec()),
            ..Self::with_kind(ArchKind::CustomSchedule, dilations.len())
        }
    }

    fn exponential(&self) -> Result<Vec<usize>> {
        if self.base < 2 {
            return Err(Error::config(format!("base must be >= 2, got {}", self.base)));
        }
        (0..self.layers)
            .map(|l| {
                u32::try_from(l)
                    .ok()
                    .and_then(|l| l.checked_add(self.start_exponent))
                    .and_then(|e| self.base.checked_pow(e))
                    .ok_or_else(|| Error::config("dilation overflows"))
            })
            .collect()
    }

    /// Per-layer time offsets (dilations, skip lengths or clock periods).
    pub fn dilations(&self) -> Result<Vec<usize>> {
        if self.layers == 0 {
            return Err(Error::config("an architecture needs at least one layer"));
        }
        match self.kind {
            ArchKind::DilatedRnn | ArchKind::DilatedCnn | ArchKind::ClockworkRnn => {
                if self.kind != ArchKind::DilatedRnn && self.start_exponent != 0 {
                    return Err(Error::config(format!("{} has no start_exponent", self.kind.name())));
                }
                let base = if self.kind == ArchKind::ClockworkRnn { 2 } else { self.base };
                ArchSpec { base, ..self.clone() }.exponential()
            }
            ArchKind::RegularSkipRnn => {
                let s = match self.period {
                    Some(s) => s,
                    None => *self.exponential()?.last().unwrap(),
                };
                if s == 0 {
                    return Err(Error::config("skip length must be >= 1"));
                }
                Ok(vec![s; self.layers])
            }
            ArchKind::CustomSchedule => {
                let d = self
                    .dilations
                    .clone()
                    .ok_or_else(|| Error::config("custom_schedule needs explicit dilations"))?;
                if d.len() != self.layers {
                    return Err(Error::config(format!(
                        "{} dilations given for {} layers",
                        d.len(),
                        self.layers
                    )));
                }
                if d[0] != 1 {
                    return Err(Error::config("a custom schedule must start at dilation 1"));
                }
                if let Some(w) = d.windows(2).find(|w| w[0] == 0 || w[1] % w[0] != 0) {
                    return Err(Error::config(format!("dilation {} does not divide {}", w[0], w[1])));
                }
                Ok(d)
            }
        }
    }

    /// Period `m`: the largest dilation.
    pub fn period(&self) -> Result<usize> {
        Ok(*self.dilations()?.last().unwrap())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Input,
    Hidden(usize),
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub sigma: usize,
    /// Active at target times `t` with `t % modulus == residue`.
    pub modulus: usize,
    pub residue: usize,
}

impl Edge {
    fn always(from: usize, to: usize, sigma: usize) -> Self {
        Edge {
            from,
            to,
            sigma,
            modulus: 1,
            residue: 0,
        }
    }

    fn every(from: usize, to: usize, sigma: usize, modulus: usize) -> Self {
        Edge {
            from,
            to,
            sigma,
            modulus,
            residue: 0,
        }
    }

    pub fn active_at(&self, t: usize) -> bool {
        t % self.modulus == self.residue
    }

    pub fn is_recurrent(&self) -> bool {
        self.sigma != 0
    }
}

/// One period of an unrolled network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicGraph {
    pub period: usize,
    pub roles: Vec<NodeRole>,
    pub edges: Vec<Edge>,
    pub input: usize,
    pub output: usize,
    pub kind: ArchKind,
    pub dilations: Vec<usize>,
}

impl CyclicGraph {
    pub fn num_nodes(&self) -> usize {
        self.roles.len()
    }

    pub fn hidden_nodes(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, NodeRole::Hidden(_))).count()
    }

    /// True when no edge is gated, so every start time behaves alike.
    pub fn is_time_invariant(&self) -> bool {
        self.edges.iter().all(|e| e.modulus == 1)
    }

    /// A directed cycle exists (through recurrent edges).
    pub fn has_cycle(&self) -> bool {
        self.cycle_search(|_| true)
    }

    fn cycle_search(&self, keep: impl Fn(&Edge) -> bool) -> bool {
        // Kahn's algorithm: leftover nodes lie on or behind a cycle.
        let n = self.num_nodes();
        let mut indeg = vec![0usize; n];
        let kept: Vec<&Edge> = self.edges.iter().filter(|e| keep(e)).collect();
        for e in &kept {
            indeg[e.to] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for e in kept.iter().filter(|e| e.from == v) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    queue.push(e.to);
                }
            }
        }
        seen < n
    }

    /// Causality and the nonzero-cycle-sum condition. With offsets `σ ≥ 0`
    /// the latter holds exactly when the `σ = 0` edges form no cycle.
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || self.input >= self.num_nodes() || self.output >= self.num_nodes() {
            return Err(Error::Consistency(String::from("malformed graph")));
        }
        for e in &self.edges {
            if e.from >= self.num_nodes() || e.to >= self.num_nodes() || e.modulus == 0 || e.residue >= e.modulus {
                return Err(Error::Consistency(format!("malformed edge {e:?}")));
            }
        }
        if self.cycle_search(|e| e.sigma == 0) {
            return Err(Error::Consistency(String::from("a cycle with zero total offset")));
        }
        Ok(())
    }
}

/// Builds the cyclic graph of `spec`.
///
/// Node order: input, hidden layers bottom-up, then the separate output node
/// if there is one. Architectures that read the top layer directly use it as
/// the output node, so an input-to-output path crosses exactly `d` layer
/// edges.
pub fn build_cyclic_graph(spec: &ArchSpec) -> Result<CyclicGraph> {
    let dil = spec.dilations()?;
    let d = dil.len();
    let period = *dil.last().unwrap();
    let mut roles = vec![NodeRole::Input];
    roles.extend((0..d).map(NodeRole::Hidden));
    let hidden = |l: usize| l + 1;
    let mut edges = Vec::new();
    let mut output = hidden(d - 1);

    match spec.kind {
        ArchKind::DilatedRnn | ArchKind::CustomSchedule => {
            for (l, &s) in dil.iter().enumerate() {
                edges.push(Edge::always(l, hidden(l), 0));
                edges.push(Edge::always(hidden(l), hidden(l), s));
            }
            let window = dil[0];
            if window > 1 {
                // Fusion head over the last `window` top-layer outputs.
                roles.push(NodeRole::Output);
                output = d + 1;
                for k in 0..window {
                    edges.push(Edge::always(hidden(d - 1), output, k));
                }
            }
        }
        ArchKind::RegularSkipRnn => {
            for (l, &s) in dil.iter().enumerate() {
                edges.push(Edge::always(l, hidden(l), 0));
                edges.push(Edge::always(hidden(l), hidden(l), 1));
                edges.push(Edge::always(hidden(l), hidden(l), s));
            }
        }
        ArchKind::DilatedCnn => {
            for (l, &s) in dil.iter().enumerate() {
                edges.push(Edge::always(l, hidden(l), 0));
                edges.push(Edge::always(l, hidden(l), s));
            }
        }
        ArchKind::ClockworkRnn => {
            // Group g updates at t ≡ 0 (mod P_g); slower groups feed faster
            // ones when the slower one updates; every group drives the output
            // when it updates.
            roles.push(NodeRole::Output);
            output = d + 1;
            for (g, &p) in dil.iter().enumerate() {
                edges.push(Edge::every(0, hidden(g), 0, p));
                edges.push(Edge::every(hidden(g), hidden(g), p, p));
                for (h, &ph) in dil.iter().enumerate().skip(g + 1) {
                    edges.push(Edge::every(hidden(h), hidden(g), 0, ph));
                }
                edges.push(Edge::every(hidden(g), output, 0, p));
            }
        }
    }

    let graph = CyclicGraph {
        period,
        roles,
        edges,
        input: 0,
        output,
        kind: spec.kind,
        dilations: dil,
    };
    graph.validate()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_counts_per_kind() {
        let g = build_cyclic_graph(&ArchSpec::dilated(3, 2)).unwrap();
        assert_eq!(g.edges.iter().filter(|e| e.is_recurrent()).count(), 3);
        assert_eq!(g.period, 4);
        let g = build_cyclic_graph(&ArchSpec::regular_skip(3, 4)).unwrap();
        assert_eq!(g.edges.iter().filter(|e| e.is_recurrent()).count(), 6);
        let g = build_cyclic_graph(&ArchSpec::dilated_cnn(3)).unwrap();
        assert!(!g.has_cycle());
        assert!(g.edges.iter().all(|e| e.from != e.to));
    }

    #[test]
    fn recurrent_graphs_have_cycles() {
        for spec in [
            ArchSpec::dilated(4, 3),
            ArchSpec::regular_skip(2, 8),
            ArchSpec::clockwork(3),
            ArchSpec::custom(&[1, 3, 6]),
        ] {
            let g = build_cyclic_graph(&spec).unwrap();
            assert!(g.has_cycle());
            g.validate().unwrap();
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(ArchSpec::custom(&[1, 3, 4]).dilations().is_err());
        assert!(ArchSpec::custom(&[2, 4]).dilations().is_err());
        assert!(ArchSpec::dilated(0, 2).dilations().is_err());
        assert!(ArchSpec::dilated(3, 1).dilations().is_err());
        assert!(ArchSpec::regular_skip(3, 0).dilations().is_err());
        let mut cnn = ArchSpec::dilated_cnn(3);
        cnn.start_exponent = 1;
        assert!(cnn.dilations().is_err());
        assert!(ArchKind::parse("lstm").is_err());
    }

    #[test]
    fn skip_period_defaults_to_top_dilation() {
        let mut s = ArchSpec::regular_skip(4, 1);
        s.period = None;
        assert_eq!(s.dilations().unwrap(), vec![8; 4]);
    }

    #[test]
    fn zero_offset_cycles_are_rejected() {
        let mut g = build_cyclic_graph(&ArchSpec::dilated(2, 2)).unwrap();
        g.edges.push(Edge::always(2, 1, 0));
        assert!(g.validate().is_err());
    }
}
