//! Alpha return panels, expected returns, position histories and weights.

mod io;
mod synth;

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::reduce::pairwise_sum_by;

pub use io::{
    align_to, load_expected_csv, load_positions, load_returns_csv, load_value_csv, save_expected_csv,
    save_returns_csv, save_value_csv, save_weights_csv, PositionLoad,
};
pub use synth::{gen_synthetic, SynthSpec, Synthetic};

/// N x (M+1) panel of realized alpha returns, one row per alpha, column 0
/// being the most recent observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    alpha_ids: Vec<String>,
    time_labels: Vec<String>,
    returns: Array2<f64>,
}

impl ReturnsPanel {
    pub fn new(alpha_ids: Vec<String>, time_labels: Vec<String>, returns: Array2<f64>) -> Result<Self> {
        let (n, cols) = returns.dim();
        if n < 2 {
            return Err(Error::validation(format!("need at least 2 alphas, got {n}")));
        }
        if cols < 3 {
            return Err(Error::validation(format!("need at least 3 observations per alpha, got {cols}")));
        }
        if alpha_ids.len() != n {
            return Err(Error::DimensionMismatch { context: "alpha ids", expected: n, actual: alpha_ids.len() });
        }
        if time_labels.len() != cols {
            return Err(Error::DimensionMismatch { context: "time labels", expected: cols, actual: time_labels.len() });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &alpha_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate alpha_id {id:?}")));
            }
        }
        let mut seen = HashSet::with_capacity(cols);
        for t in &time_labels {
            if !seen.insert(t.as_str()) {
                return Err(Error::validation(format!("duplicate time label {t:?}")));
            }
        }
        let returns = if returns.is_standard_layout() { returns } else { returns.as_standard_layout().into_owned() };
        for (i, row) in returns.outer_iter().enumerate() {
            let row = row.as_slice().expect("standard layout");
            if let Some(s) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::validation(format!(
                    "non-finite return for alpha {:?} at observation {}",
                    alpha_ids[i],
                    s + 1
                )));
            }
            if row.iter().all(|&x| x == row[0]) {
                return Err(Error::validation(format!(
                    "alpha {:?} has zero variance (constant returns)",
                    alpha_ids[i]
                )));
            }
        }
        Ok(Self { alpha_ids, time_labels, returns })
    }

    /// Panel with generated labels `a1..aN` and `t1..t{M+1}`.
    pub fn from_matrix(returns: Array2<f64>) -> Result<Self> {
        let (n, cols) = returns.dim();
        let ids = (1..=n).map(|i| format!("a{i}")).collect();
        let labels = (1..=cols).map(|s| format!("t{s}")).collect();
        Self::new(ids, labels, returns)
    }

    pub fn n_alphas(&self) -> usize {
        self.returns.nrows()
    }

    /// Number of observations, M + 1.
    pub fn n_obs(&self) -> usize {
        self.returns.ncols()
    }

    /// M, the number of linearly independent demeaned columns.
    pub fn m(&self) -> usize {
        self.returns.ncols() - 1
    }

    pub fn returns(&self) -> &Array2<f64> {
        &self.returns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.n_obs();
        &self.returns.as_slice().expect("standard layout")[i * cols..(i + 1) * cols]
    }

    pub fn alpha_ids(&self) -> &[String] {
        &self.alpha_ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<String>, Array2<f64>) {
        (self.alpha_ids, self.time_labels, self.returns)
    }
}

/// Expected returns E_i, aligned with a panel's alpha order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedReturns {
    values: Vec<f64>,
}

impl ExpectedReturns {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(format!("non-finite expected return at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.values.len() != n {
            return Err(Error::DimensionMismatch { context: "expected returns", expected: n, actual: self.values.len() });
        }
        Ok(())
    }
}

/// Normalized alpha weights, sum of |w_i| equal to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    eta: f64,
}

impl WeightVector {
    /// Normalizes `raw` so that the absolute weights sum to one. `eta` is the
    /// applied factor. A zero (or non-finite) raw vector cannot be normalized.
    pub fn from_raw(mut raw: Vec<f64>) -> Result<Self> {
        let abs_sum = pairwise_sum_by(&raw, f64::abs);
        if !(abs_sum > 0.0) || !abs_sum.is_finite() {
            return Err(Error::DegenerateWeights { abs_sum });
        }
        let eta = 1.0 / abs_sum;
        for w in &mut raw {
            *w *= eta;
        }
        Ok(Self { weights: raw, eta })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn abs_sum(&self) -> f64 {
        pairwise_sum_by(&self.weights, f64::abs)
    }

    pub fn negative_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w < 0.0).count()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }
}

/// One stored position P_iAs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEntry {
    pub alpha: usize,
    pub instrument: usize,
    pub time: usize,
    pub value: f64,
}

/// Sparse per-alpha, per-instrument, per-time positions, normalized so that
/// each (alpha, time) slice has unit absolute sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionHistory {
    alpha_ids: Vec<String>,
    instrument_ids: Vec<String>,
    time_labels: Vec<String>,
    entries: Vec<PositionEntry>,
}

/// Slices whose absolute sum falls below this are treated as flat.
pub const MIN_SLICE_ABS_SUM: f64 = 1e-6;
const SLICE_TOL: f64 = 1e-9;

impl PositionHistory {
    /// Builds a history whose slices must already be normalized.
    pub fn new(
        alpha_ids: Vec<String>,
        instrument_ids: Vec<String>,
        time_labels: Vec<String>,
        entries: Vec<PositionEntry>,
    ) -> Result<Self> {
        let sums = slice_sums(alpha_ids.len(), instrument_ids.len(), time_labels.len(), &entries)?;
        for (k, &b) in sums.iter().enumerate() {
            if (b - 1.0).abs() > SLICE_TOL {
                let (i, s) = (k / time_labels.len(), k % time_labels.len());
                return Err(Error::validation(format!(
                    "positions of alpha {:?} at time {:?} have absolute sum {b}, expected 1",
                    alpha_ids[i], time_labels[s]
                )));
            }
        }
        Ok(Self { alpha_ids, instrument_ids, time_labels, entries })
    }

    /// Builds a history, rescaling every slice to unit absolute sum. Returns
    /// the number of slices that had to be rescaled.
    pub fn normalized(
        alpha_ids: Vec<String>,
        instrument_ids: Vec<String>,
        time_labels: Vec<String>,
        mut entries: Vec<PositionEntry>,
    ) -> Result<(Self, usize)> {
        let n_times = time_labels.len();
        let sums = slice_sums(alpha_ids.len(), instrument_ids.len(), n_times, &entries)?;
        for (k, &b) in sums.iter().enumerate() {
            if b < MIN_SLICE_ABS_SUM {
                let (i, s) = (k / n_times, k % n_times);
                return Err(Error::validation(format!(
                    "alpha {:?} is flat at time {:?} (absolute position sum {b:e})",
                    alpha_ids[i], time_labels[s]
                )));
            }
        }
        let mut rescaled = 0;
        let needs: Vec<bool> = sums.iter().map(|b| (b - 1.0).abs() > SLICE_TOL).collect();
        rescaled += needs.iter().filter(|&&x| x).count();
        for e in &mut entries {
            let k = e.alpha * n_times + e.time;
            if needs[k] {
                e.value /= sums[k];
            }
        }
        Ok((Self { alpha_ids, instrument_ids, time_labels, entries }, rescaled))
    }

    pub fn n_alphas(&self) -> usize {
        self.alpha_ids.len()
    }

    pub fn n_instruments(&self) -> usize {
        self.instrument_ids.len()
    }

    pub fn n_obs(&self) -> usize {
        self.time_labels.len()
    }

    pub fn entries(&self) -> &[PositionEntry] {
        &self.entries
    }

    pub fn alpha_ids(&self) -> &[String] {
        &self.alpha_ids
    }

    pub fn instrument_ids(&self) -> &[String] {
        &self.instrument_ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }
}

/// Absolute sums per (alpha, time) slice, flattened alpha-major. Also
/// checks indices, finiteness and duplicates.
fn slice_sums(n_alphas: usize, n_instruments: usize, n_times: usize, entries: &[PositionEntry]) -> Result<Vec<f64>> {
    if n_alphas == 0 || n_times == 0 {
        return Err(Error::validation("empty position history"));
    }
    let mut sums = vec![0.0; n_alphas * n_times];
    let mut seen = HashMap::with_capacity(entries.len());
    for e in entries {
        if e.alpha >= n_alphas || e.instrument >= n_instruments || e.time >= n_times {
            return Err(Error::validation(format!("position entry index out of range: {e:?}")));
        }
        if !e.value.is_finite() {
            return Err(Error::validation(format!("non-finite position: {e:?}")));
        }
        if seen.insert((e.alpha, e.instrument, e.time), ()).is_some() {
            return Err(Error::validation(format!(
                "duplicate position for alpha #{}, instrument #{}, time #{}",
                e.alpha, e.instrument, e.time
            )));
        }
        sums[e.alpha * n_times + e.time] += e.value.abs();
    }
    Ok(sums)
}
