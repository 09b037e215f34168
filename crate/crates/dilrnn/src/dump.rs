//! Plain-text dump of a generated batch, used for fixtures.
//!
//! ```text
//! T <len> batch <b> input_dim <k> num_classes <c> seed <s>
//! mask <0/1 per step>
//! step <t> target <labels...>
//! <b rows of k values>
//! ```

use std::fmt::Write as _;

use dilrnn_core::numeric::DenseMatrix;
use dilrnn_core::tasks::TaskBatch;

use crate::error::{AppError, AppResult};

pub fn write_batch_dump(batch: &TaskBatch) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "T {} batch {} input_dim {} num_classes {} seed {}",
        batch.len(),
        batch.batch(),
        batch.input_dim(),
        batch.num_classes,
        batch.seed
    );
    let mask: Vec<&str> = batch.mask.iter().map(|&m| if m { "1" } else { "0" }).collect();
    let _ = writeln!(s, "mask {}", mask.join(" "));
    for (t, x) in batch.inputs.iter().enumerate() {
        let labels: Vec<String> = batch.targets[t].iter().map(usize::to_string).collect();
        let _ = writeln!(s, "step {t} target {}", labels.join(" "));
        for r in 0..x.rows() {
            let row: Vec<String> = x.row(r).iter().map(f64::to_string).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

fn bad(line: usize, msg: &str) -> AppError {
    AppError::Usage(format!("batch dump line {line}: {msg}"))
}

pub fn read_batch_dump(text: &str) -> AppResult<TaskBatch> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, header) = lines.next().ok_or_else(|| bad(1, "empty"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 10 || f[0] != "T" || f[2] != "batch" || f[4] != "input_dim" || f[6] != "num_classes" || f[8] != "seed" {
        return Err(bad(n, "malformed header"));
    }
    let num = |s: &str| s.parse::<u64>().map_err(|_| bad(n, "bad number"));
    let (len, b, k, c, seed) = (num(f[1])? as usize, num(f[3])? as usize, num(f[5])? as usize, num(f[7])? as usize, num(f[9])?);
    let (n, mask_line) = lines.next().ok_or_else(|| bad(2, "missing mask"))?;
    let mask: Vec<bool> = mask_line
        .strip_prefix("mask")
        .ok_or_else(|| bad(n, "expected mask"))?
        .split_whitespace()
        .map(|v| match v {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(bad(n, "mask entries are 0 or 1")),
        })
        .collect::<AppResult<_>>()?;
    if mask.len() != len {
        return Err(bad(n, "mask length differs from T"));
    }
    let mut inputs = Vec::with_capacity(len);
    let mut targets = Vec::with_capacity(len);
    for t in 0..len {
        let (n, step) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
        let rest = step
            .strip_prefix(&format!("step {t} target"))
            .ok_or_else(|| bad(n, "expected step header"))?;
        let labels: Vec<usize> = rest
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad(n, "bad label")))
            .collect::<AppResult<_>>()?;
        if labels.len() != b {
            return Err(bad(n, "wrong number of labels"));
        }
        targets.push(labels);
        let mut data = Vec::with_capacity(b * k);
        for _ in 0..b {
            let (n, row) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(n, "bad value")))
                .collect::<AppResult<_>>()?;
            if vals.len() != k {
                return Err(bad(n, "wrong row width"));
            }
            data.extend(vals);
        }
        inputs.push(DenseMatrix::from_vec(b, k, data)?);
    }
    Ok(TaskBatch {
        inputs,
        targets,
        mask,
        num_classes: c,
        seed,
    })
}
