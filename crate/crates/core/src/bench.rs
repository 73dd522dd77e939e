//! Wall-clock scaling of [`combine`](crate::optimizer::combine) on
//! synthetic panels.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::optimizer::{combine_with_report, CombineOptions};
use crate::panel::{gen_synthetic, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    /// Best of the repeats.
    pub seconds: f64,
    /// `seconds` over the previous row's.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    /// Set when a point could not be generated, e.g. for lack of memory.
    /// Rows before it are complete.
    pub aborted: Option<String>,
}

/// Times `combine` at each `(N, M)` point; the panel for a point is
/// dropped before the next one is generated.
pub fn run_bench(points: &[(usize, usize)], repeats: usize, seed: u64) -> Result<BenchOutcome> {
    let mut rows: Vec<BenchRow> = Vec::new();
    for &(n, m) in points {
        let spec = SynthSpec { n_alphas: n, n_obs: m + 1, true_k: 3.min(m), seed, ..Default::default() };
        let synth = match gen_synthetic(&spec) {
            Ok(s) => s,
            Err(e @ Error::Allocation { .. }) => {
                return Ok(BenchOutcome { rows, aborted: Some(format!("N = {n}, M = {m}: {e}")) });
            }
            Err(e) => return Err(e),
        };
        let opts = CombineOptions::default();
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let t = Instant::now();
            combine_with_report(&synth.panel, &synth.expected, &opts)?;
            best = best.min(t.elapsed().as_secs_f64());
        }
        let ratio = rows.last().map(|p| best / p.seconds);
        rows.push(BenchRow { n, m, seconds: best, ratio });
    }
    Ok(BenchOutcome { rows, aborted: None })
}

impl BenchOutcome {
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "n,m,seconds,ratio")?;
        for r in &self.rows {
            let ratio = r.ratio.map(|x| format!("{x:.4}")).unwrap_or_default();
            writeln!(out, "{},{},{:.6},{}", r.n, r.m, r.seconds, ratio)?;
        }
        Ok(())
    }
}
