use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::oracle::{max_path_lengths, mean_of_maxima, mean_recurrent_length_oracle, PathTable};
use super::{build_cyclic_graph, ArchKind, ArchSpec, CyclicGraph, Rational};
use crate::error::{Error, Result};

fn exact_log2(m: usize) -> Option<i64> {
    m.is_power_of_two().then(|| i64::from(m.trailing_zeros()))
}

/// A closed-form value; `exact` is set when `log₂ m` is an integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    pub exact: Option<Rational>,
}

fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Regular skip RNN with `s = m`: `(m−1)/2 + log₂m + 1/m + 1`.
pub fn eq6_value(m: usize) -> ClosedForm {
    let mf = m as f64;
    let value = (mf - 1.0) / 2.0 + libm::log2(mf) + 1.0 / mf + 1.0;
    let exact = exact_log2(m).map(|k| {
        let m = m as i64;
        Rational::new(m - 1, 2) + Rational::from_integer(k) + Rational::new(1, m) + Rational::from_integer(1)
    });
    ClosedForm { value, exact }
}

/// Dilated RNN with base 2: `(3m−1)/(2m)·log₂m + 1/m + 1`.
pub fn eq7_value(m: usize) -> ClosedForm {
    let mf = m as f64;
    let value = (3.0 * mf - 1.0) / (2.0 * mf) * libm::log2(mf) + 1.0 / mf + 1.0;
    let exact = exact_log2(m).map(|k| {
        let m = m as i64;
        Rational::new(3 * m - 1, 2 * m) * k + Rational::new(1, m) + Rational::from_integer(1)
    });
    ClosedForm { value, exact }
}

/// The published closed form for `spec`, where one exists.
pub fn mean_recurrent_length_closed_form(spec: &ArchSpec) -> Result<ClosedForm> {
    let m = spec.period()?;
    match spec.kind {
        ArchKind::RegularSkipRnn => Ok(eq6_value(m)),
        ArchKind::DilatedRnn if spec.base == 2 && spec.start_exponent == 0 => Ok(eq7_value(m)),
        _ => Err(Error::config(format!(
            "no closed form for {} (base {}, start exponent {})",
            spec.kind.name(),
            spec.base,
            spec.start_exponent
        ))),
    }
}

/// Greedy change-making count of `n` in the given dilations plus one edge
/// per layer. `None` if `n` cannot be paid exactly.
pub fn digit_path_length(n: usize, dilations: &[usize]) -> Result<Option<usize>> {
    if dilations.is_empty() || dilations[0] == 0 {
        return Err(Error::config("dilations must be positive"));
    }
    if let Some(w) = dilations.windows(2).find(|w| w[1] % w[0] != 0) {
        return Err(Error::config(format!("dilation {} does not divide {}", w[0], w[1])));
    }
    let mut rest = n;
    let mut coins = 0;
    for &s in dilations.iter().rev() {
        coins += rest / s;
        rest %= s;
    }
    Ok((rest == 0).then_some(coins + dilations.len()))
}

/// Recurrent-edge counts under both normalisations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeCounts {
    pub recurrent_edges: usize,
    /// Recurrent edges that start and end at the same node.
    pub within_layer: usize,
    pub nodes: usize,
    pub hidden_nodes: usize,
    /// Recurrent edges over all nodes.
    pub literal: Rational,
    /// Recurrent edges over hidden nodes.
    pub per_hidden_layer: Rational,
}

pub fn recurrent_edges_per_node(graph: &CyclicGraph) -> EdgeCounts {
    let rec: Vec<_> = graph.edges.iter().filter(|e| e.is_recurrent()).collect();
    let nodes = graph.num_nodes();
    let hidden = graph.hidden_nodes();
    EdgeCounts {
        recurrent_edges: rec.len(),
        within_layer: rec.iter().filter(|e| e.from == e.to).count(),
        nodes,
        hidden_nodes: hidden,
        literal: Rational::new(rec.len() as i64, nodes as i64),
        per_hidden_layer: Rational::new(rec.len() as i64, hidden.max(1) as i64),
    }
}

/// Every schedule `1 = s_1 ≤ … ≤ s_d = m` where each dilation divides the
/// next, in lexicographic order.
pub fn enumerate_schedules(d: usize, m: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, d: usize, m: usize, out: &mut Vec<Vec<usize>>) {
        let last = *prefix.last().unwrap();
        if prefix.len() == d {
            if last == m {
                out.push(prefix.clone());
            }
            return;
        }
        if prefix.len() == d - 1 {
            if m.is_multiple_of(last) {
                prefix.push(m);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for next in (last..=m).filter(|s| s.is_multiple_of(last) && m.is_multiple_of(*s)) {
            prefix.push(next);
            extend(prefix, d, m, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 || m == 0 {
        return out;
    }
    extend(&mut vec![1], d, m, &mut out);
    out
}

/// `½ (Σ s_{i+1}/s_i − d + 1)`.
pub fn ratio_sum_statistic(dilations: &[usize]) -> Rational {
    let d = dilations.len() as i64;
    let sum: i64 = dilations.windows(2).map(|w| (w[1] / w[0]) as i64).sum();
    Rational::new(sum - d + 1, 2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedSchedule {
    pub dilations: Vec<usize>,
    pub mean: Rational,
    pub ratio_statistic: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityReport {
    pub layers: usize,
    pub base: usize,
    pub period: usize,
    pub geometric: Vec<usize>,
    /// Sorted by mean recurrent length, ties lexicographic.
    pub ranking: Vec<RankedSchedule>,
    pub geometric_is_strict_minimum: bool,
    /// `(d−1)·m^(1/(d−1))`, the lower bound on `Σ s_{i+1}/s_i`.
    pub am_gm_bound: f64,
    /// `m^(1/(d−1))`, the bound as printed in the derivation.
    pub printed_bound: f64,
    /// Description of the first schedule that beats or ties the geometric one.
    pub counterexample: Option<String>,
}

fn time_invariant_mean(graph: &CyclicGraph) -> Option<Rational> {
    // Ungated graphs look the same from every start, one start suffices.
    let starts = if graph.is_time_invariant() {
        vec![0]
    } else {
        (0..graph.period).collect()
    };
    let table = PathTable::for_starts(graph, graph.period, starts);
    mean_of_maxima(&max_path_lengths(&table))
}

/// Ranks every admissible schedule with `d` layers and period `M^(d−1)` by
/// oracle mean recurrent length and checks that the geometric schedule is
/// the unique minimiser.
pub fn verify_optimality(d: usize, base: usize) -> Result<OptimalityReport> {
    if d == 0 || base < 2 {
        return Err(Error::config("need d >= 1 and M >= 2"));
    }
    let m = u32::try_from(d - 1)
        .ok()
        .and_then(|e| base.checked_pow(e))
        .ok_or_else(|| Error::config("period overflows"))?;
    let geometric: Vec<usize> = (0..d as u32).map(|e| base.pow(e)).collect();
    let mut ranking = Vec::new();
    for dil in enumerate_schedules(d, m) {
        let g = build_cyclic_graph(&ArchSpec::custom(&dil))?;
        let mean = time_invariant_mean(&g)
            .ok_or_else(|| Error::Consistency(format!("schedule {dil:?} leaves a span unreachable")))?;
        ranking.push(RankedSchedule {
            ratio_statistic: ratio_sum_statistic(&dil),
            dilations: dil,
            mean,
        });
    }
    ranking.sort_by(|a, b| a.mean.cmp(&b.mean).then_with(|| a.dilations.cmp(&b.dilations)));
    let geo_mean = ranking
        .iter()
        .find(|r| r.dilations == geometric)
        .map(|r| r.mean)
        .ok_or_else(|| Error::Consistency(String::from("geometric schedule missing from enumeration")))?;
    let counterexample = ranking
        .iter()
        .find(|r| r.dilations != geometric && r.mean <= geo_mean)
        .map(|r| {
            format!(
                "schedule {:?} has mean {} <= geometric {:?} mean {}",
                r.dilations, r.mean, geometric, geo_mean
            )
        });
    let k = (d as f64 - 1.0).max(1.0);
    Ok(OptimalityReport {
        layers: d,
        base,
        period: m,
        geometric,
        geometric_is_strict_minimum: counterexample.is_none(),
        ranking,
        am_gm_bound: (d as f64 - 1.0) * libm::pow(m as f64, 1.0 / k),
        printed_bound: libm::pow(m as f64, 1.0 / k),
        counterexample,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockworkReport {
    pub groups: usize,
    pub period: usize,
    /// `d_i(n)` of the clockwork graph for every start (rows) and span.
    pub clockwork: PathTable,
    pub clockwork_max: Vec<Option<usize>>,
    pub dilated_max: Vec<Option<usize>>,
    pub clockwork_mean: Rational,
    pub dilated_mean: Rational,
    pub clockwork_varies_with_start: bool,
    pub dilated_varies_with_start: bool,
    /// `(n, clockwork d_0(n), dilated d_0(n))` for powers of two `n ≤ m`.
    pub aligned: Vec<(usize, usize, usize)>,
}

impl ClockworkReport {
    pub fn clockwork_not_better(&self) -> bool {
        self.clockwork_mean >= self.dilated_mean
    }
}

/// Compares a `d`-group clockwork RNN with a `d`-layer base-2 dilated RNN.
pub fn clockwork_capacity_report(d: usize) -> Result<ClockworkReport> {
    if d == 0 || d > 10 {
        return Err(Error::config("clockwork comparison supports 1..=10 groups"));
    }
    let cw = build_cyclic_graph(&ArchSpec::clockwork(d))?;
    let dil = build_cyclic_graph(&ArchSpec::dilated(d, 2))?;
    let m = cw.period;
    let cw_table = PathTable::compute(&cw, m);
    let dil_table = PathTable::compute(&dil, m);
    let clockwork_max = max_path_lengths(&cw_table);
    let dilated_max = max_path_lengths(&dil_table);
    let unreachable = || Error::Consistency(String::from("a span is unreachable"));
    let clockwork_mean = mean_of_maxima(&clockwork_max).ok_or_else(unreachable)?;
    let dilated_mean = mean_recurrent_length_oracle(&dil).ok_or_else(unreachable)?;
    let mut aligned = Vec::new();
    let mut n = 1;
    while n <= m {
        aligned.push((n, cw_table.get(0, n).ok_or_else(unreachable)?, dil_table.get(0, n).ok_or_else(unreachable)?));
        n *= 2;
    }
    Ok(ClockworkReport {
        groups: d,
        period: m,
        clockwork_varies_with_start: !cw_table.is_start_independent(),
        dilated_varies_with_start: !dil_table.is_start_independent(),
        clockwork: cw_table,
        clockwork_max,
        dilated_max,
        clockwork_mean,
        dilated_mean,
        aligned,
    })
}

/// Floating display of an exact rational.
pub fn to_f64(r: Rational) -> f64 {
    ratio_to_f64(r)
}
