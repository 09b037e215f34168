//! Architecture analysis and the theory verification suite.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use dilrnn_core::graph::{
    build_cyclic_graph, clockwork_capacity_report, digit_path_length, eq6_value, eq7_value,
    max_path_lengths, mean_of_maxima, mean_recurrent_length_closed_form, mean_recurrent_length_oracle,
    receptive_field, recurrent_edges_per_node, to_f64, verify_optimality, ArchKind, ArchSpec, PathTable,
    Rational,
};

use crate::error::{AppError, AppResult};
use crate::train::write_toml;

/// Largest period the exhaustive suites will handle.
pub const MAX_PERIOD: usize = 512;

fn show(r: Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub kind: String,
    pub layers: usize,
    pub dilations: Vec<usize>,
    pub period: usize,
    /// Exact value, or "inf" when some span is unreachable.
    pub mean_recurrent_length: String,
    pub mean_recurrent_length_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_minus_closed_form: Option<String>,
    pub recurrent_edges: usize,
    pub within_layer_recurrent_edges: usize,
    pub nodes: usize,
    pub hidden_nodes: usize,
    pub recurrent_edges_per_node: String,
    pub recurrent_edges_per_hidden_layer: String,
    /// A number, or "unbounded" for recurrent architectures.
    pub receptive_field: String,
    pub same_for_every_start: bool,
    /// Dilated CNN only: oracle mean of the dilated RNN with as many layers,
    /// minus this one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dilated_rnn_minus_this: Option<String>,
    /// Clockwork only: oracle mean of the matched dilated RNN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_dilated_rnn: Option<String>,
}

pub struct Analysis {
    pub summary: AnalysisSummary,
    /// `(n, max_i d_i(n))`.
    pub maxima: Vec<(usize, Option<usize>)>,
}

pub fn analyze(spec: &ArchSpec) -> AppResult<Analysis> {
    let graph = build_cyclic_graph(spec)?;
    let m = graph.period;
    if m > MAX_PERIOD * 4 {
        return Err(AppError::Usage(format!("period {m} is too large to tabulate")));
    }
    let table = PathTable::compute(&graph, m);
    let maxima = max_path_lengths(&table);
    let mean = mean_of_maxima(&maxima);
    let closed = mean_recurrent_length_closed_form(spec).ok();
    let counts = recurrent_edges_per_node(&graph);
    let gap = match spec.kind {
        ArchKind::DilatedCnn => {
            let rnn = build_cyclic_graph(&ArchSpec::dilated(spec.layers, spec.base))?;
            match (mean_recurrent_length_oracle(&rnn), mean) {
                (Some(a), Some(b)) => Some(show(a - b)),
                _ => None,
            }
        }
        _ => None,
    };
    let matched = match spec.kind {
        ArchKind::ClockworkRnn => {
            mean_recurrent_length_oracle(&build_cyclic_graph(&ArchSpec::dilated(spec.layers, 2))?).map(show)
        }
        _ => None,
    };
    let summary = AnalysisSummary {
        kind: spec.kind.name().into(),
        layers: graph.dilations.len(),
        dilations: graph.dilations.clone(),
        period: m,
        mean_recurrent_length: mean.map_or_else(|| "inf".into(), show),
        mean_recurrent_length_value: mean.map_or(f64::INFINITY, to_f64),
        closed_form: closed.map(|c| c.value),
        oracle_minus_closed_form: match (mean, closed.and_then(|c| c.exact)) {
            (Some(a), Some(b)) => Some(show(a - b)),
            _ => None,
        },
        recurrent_edges: counts.recurrent_edges,
        within_layer_recurrent_edges: counts.within_layer,
        nodes: counts.nodes,
        hidden_nodes: counts.hidden_nodes,
        recurrent_edges_per_node: show(counts.literal),
        recurrent_edges_per_hidden_layer: show(counts.per_hidden_layer),
        receptive_field: receptive_field(&graph).map_or_else(|| "unbounded".into(), |r| r.to_string()),
        same_for_every_start: table.is_start_independent(),
        dilated_rnn_minus_this: gap,
        matched_dilated_rnn: matched,
    };
    Ok(Analysis {
        summary,
        maxima: (1..=m).zip(maxima).collect(),
    })
}

pub fn write_analysis(dir: &Path, analysis: &Analysis) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let path = dir.join("analysis.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["n", "max_d"])?;
    for (n, d) in &analysis.maxima {
        w.write_record([n.to_string(), d.map_or_else(|| "unreachable".into(), |v| v.to_string())])?;
    }
    w.flush().map_err(|e| AppError::io(&path, e))?;
    write_toml(&dir.join("summary.toml"), &analysis.summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Informational tables.
    pub notes: String,
}

impl VerifyReport {
    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s.push_str(&self.notes);
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub max_d: usize,
    pub bases: Vec<usize>,
    /// Negative self-test: claims the worst schedule is optimal.
    pub inject_wrong_ranking: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_d: 8,
            bases: vec![2, 3],
            inject_wrong_ranking: false,
        }
    }
}

fn period(base: usize, d: usize) -> Option<usize> {
    base.checked_pow(u32::try_from(d.checked_sub(1)?).ok()?).filter(|&m| m <= MAX_PERIOD)
}

/// Runs every graph-analysis property for `d ≤ max_d` and the given bases.
pub fn verify_theory(opts: &VerifyOptions) -> AppResult<VerifyReport> {
    if opts.max_d < 2 || opts.bases.iter().any(|&b| b < 2) {
        return Err(AppError::Usage("verify-theory needs max_d >= 2 and bases >= 2".into()));
    }
    let mut r = VerifyReport::default();
    let ds = 2..=opts.max_d;

    for base in opts.bases.iter().copied() {
        for d in ds.clone() {
            let Some(m) = period(base, d) else {
                let _ = writeln!(r.notes, "skipped d={d} M={base}: period above {MAX_PERIOD}");
                continue;
            };
            let spec = ArchSpec::dilated(d, base);
            let g = build_cyclic_graph(&spec)?;
            let table = PathTable::compute(&g, m);
            let dil = g.dilations.clone();
            let mut bad = None;
            'outer: for k in 0..table.starts.len() {
                for n in 1..=m {
                    let want = digit_path_length(n, &dil)?;
                    if table.get(k, n) != want {
                        bad = Some(format!("i={} n={n}: oracle {:?}, digits {want:?}", table.starts[k], table.get(k, n)));
                        break 'outer;
                    }
                }
            }
            let popcount_ok = base != 2 || (1..=m).all(|n| table.get(0, n) == Some(n.count_ones() as usize + d));
            r.check(
                format!("digit formula d={d} M={base}"),
                bad.is_none() && popcount_ok,
                bad.unwrap_or_else(|| format!("all i < {m}, n <= {m}")),
            );
            r.check(
                format!("start independence dilated d={d} M={base}"),
                table.is_start_independent(),
                "",
            );

            let report = verify_optimality(d, base)?;
            let (claimed, ok) = if opts.inject_wrong_ranking {
                let worst = report.ranking.last().unwrap();
                let others_worse = report
                    .ranking
                    .iter()
                    .all(|s| s.dilations == worst.dilations || s.mean > worst.mean);
                (worst.dilations.clone(), others_worse && report.ranking.len() > 1)
            } else {
                (report.geometric.clone(), report.geometric_is_strict_minimum)
            };
            let detail = match (&report.counterexample, opts.inject_wrong_ranking) {
                (Some(c), false) => c.clone(),
                _ => format!("{claimed:?} over {} schedules", report.ranking.len()),
            };
            r.check(format!("optimality d={d} M={base}"), ok, detail);
            let sums_ok = report.ranking.iter().all(|s| {
                let sum: usize = s.dilations.windows(2).map(|w| w[1] / w[0]).sum();
                sum as f64 + 1e-9 >= report.am_gm_bound
            });
            r.check(
                format!("ratio sum bound d={d} M={base}"),
                sums_ok,
                format!("(d-1)*m^(1/(d-1)) = {:.6}, printed m^(1/(d-1)) = {:.6}", report.am_gm_bound, report.printed_bound),
            );
        }
    }

    let _ = writeln!(r.notes, "d,m,oracle,eq7,discrepancy,(d-1)/(2m)");
    for d in ds.clone() {
        let Some(m) = period(2, d) else { continue };
        let skip = build_cyclic_graph(&ArchSpec::regular_skip(d, m))?;
        let oracle6 = mean_recurrent_length_oracle(&skip);
        let eq6 = eq6_value(m).exact;
        r.check(
            format!("skip closed form d={d}"),
            oracle6.is_some() && oracle6 == eq6,
            format!("oracle {:?}, formula {:?}", oracle6.map(show), eq6.map(show)),
        );
        r.check(
            format!("start independence skip d={d}"),
            PathTable::compute(&skip, m).is_start_independent(),
            "",
        );

        let dil = build_cyclic_graph(&ArchSpec::dilated(d, 2))?;
        let oracle7 = mean_recurrent_length_oracle(&dil).unwrap();
        let eq7 = eq7_value(m).exact.unwrap();
        let expected = Rational::new(d as i64 - 1, 2 * m as i64);
        r.check(
            format!("dilated closed-form discrepancy d={d}"),
            oracle7 - eq7 == expected,
            format!("{} - {} = {}", show(oracle7), show(eq7), show(oracle7 - eq7)),
        );
        let _ = writeln!(
            r.notes,
            "{d},{m},{:?},{:?},{:?},{}",
            to_f64(oracle7),
            to_f64(eq7),
            to_f64(oracle7 - eq7),
            show(expected)
        );
    }

    for d in 1..=opts.max_d {
        let dil = recurrent_edges_per_node(&build_cyclic_graph(&ArchSpec::dilated(d, 2))?);
        let skip = recurrent_edges_per_node(&build_cyclic_graph(&ArchSpec::regular_skip(d, 1 << (d - 1)))?);
        r.check(
            format!("edges per hidden layer d={d}"),
            dil.per_hidden_layer == Rational::from_integer(1) && skip.per_hidden_layer == Rational::from_integer(2),
            format!(
                "dilated {} (literal {}), skip {} (literal {})",
                show(dil.per_hidden_layer),
                show(dil.literal),
                show(skip.per_hidden_layer),
                show(skip.literal)
            ),
        );

        let cnn = build_cyclic_graph(&ArchSpec::dilated_cnn(d))?;
        let field = 1usize << d;
        let t = PathTable::for_starts(&cnn, field + 2, vec![0, 1]);
        let finite = (0..2).all(|k| {
            (1..field).all(|n| t.get(k, n) == Some(d)) && (field..=field + 2).all(|n| t.get(k, n).is_none())
        });
        r.check(
            format!("cnn horizon d={d}"),
            finite && receptive_field(&cnn) == Some(field),
            format!("receptive field {:?}", receptive_field(&cnn)),
        );
    }

    let _ = writeln!(r.notes, "d,cnn_mean,rnn_mean,difference,half_log2_m");
    for d in 1..=opts.max_d.min(10) {
        let Some(m) = period(2, d) else { continue };
        let cnn = build_cyclic_graph(&ArchSpec::dilated_cnn(d))?;
        let rnn = build_cyclic_graph(&ArchSpec::dilated(d, 2))?;
        if let (Some(a), Some(b)) = (mean_recurrent_length_oracle(&cnn), mean_recurrent_length_oracle(&rnn)) {
            let _ = writeln!(
                r.notes,
                "{d},{},{},{},{}",
                to_f64(a),
                to_f64(b),
                to_f64(b - a),
                (m as f64).log2() / 2.0
            );
        }
    }

    for d in 1..opts.max_d {
        if period(2, d + 1).is_none() {
            continue;
        }
        let m = 1usize << (d - 1);
        let small = max_path_lengths(&PathTable::compute(&build_cyclic_graph(&ArchSpec::dilated(d, 2))?, m));
        let big_graph = build_cyclic_graph(&ArchSpec::dilated(d + 1, 2))?;
        let big = max_path_lengths(&PathTable::for_starts(&big_graph, m, (0..m).collect()));
        let ok = small
            .iter()
            .zip(&big)
            .all(|(a, b)| matches!((a, b), (Some(a), Some(b)) if *b <= *a + 1));
        r.check(format!("monotone capacity d={d}->{}", d + 1), ok, "");
    }

    for d in 1..=opts.max_d.min(10) {
        if period(2, d).is_none() {
            continue;
        }
        let cw = clockwork_capacity_report(d)?;
        let ok = cw.clockwork_not_better() && !cw.dilated_varies_with_start && (d == 1 || cw.clockwork_varies_with_start);
        r.check(
            format!("clockwork vs dilated d={d}"),
            ok,
            format!("clockwork {} >= dilated {}", show(cw.clockwork_mean), show(cw.dilated_mean)),
        );
    }
    Ok(r)
}
