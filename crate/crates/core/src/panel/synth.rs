//! Synthetic alpha panels drawn from a known factor model.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ExpectedReturns, ReturnsPanel};
use crate::error::{Error, Result};
use crate::riskmodel::FactorModel;

/// Parameters of a synthetic panel.
///
/// Factor 1 loads positively on every alpha (an overall mode); further
/// factors have standard normal loadings. With specific volatility `v_i`
/// and factor strength `rho_A`, the loading is `v_i * sqrt(rho_A / (1 -
/// rho_A)) * g_iA` and the factor covariance is the identity, so a single
/// factor yields uniform pairwise correlation exactly `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_alphas: usize,
    /// M + 1.
    pub n_obs: usize,
    pub true_k: usize,
    pub rho_range: (f64, f64),
    /// Range of specific volatilities.
    pub vol_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n_alphas: 1000, n_obs: 61, true_k: 3, rho_range: (0.05, 0.3), vol_range: (0.5, 2.0), seed: 1 }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_alphas < 2 || self.n_obs < 3 {
            return Err(Error::param(format!(
                "synthetic panel needs N >= 2 and M+1 >= 3, got N = {}, M+1 = {}",
                self.n_alphas, self.n_obs
            )));
        }
        if self.true_k > self.n_obs - 1 {
            return Err(Error::param(format!("true_k = {} exceeds M = {}", self.true_k, self.n_obs - 1)));
        }
        let (rl, rh) = self.rho_range;
        if self.true_k > 0 && !(rl > 0.0 && rl <= rh && rh < 1.0) {
            return Err(Error::param(format!("rho_range must satisfy 0 < lo <= hi < 1, got {:?}", self.rho_range)));
        }
        let (vl, vh) = self.vol_range;
        if !(vl > 0.0 && vl <= vh && vh.is_finite()) {
            return Err(Error::param(format!("vol_range must satisfy 0 < lo <= hi, got {:?}", self.vol_range)));
        }
        Ok(())
    }
}

/// Output of [`gen_synthetic`]: the panel, positive expected returns, and
/// the generating factor model as ground truth.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub panel: ReturnsPanel,
    pub expected: ExpectedReturns,
    pub model: FactorModel,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi { lo } else { rng.random_range(lo..hi) }
}

/// Draws a panel from the exact factor covariance. Each alpha owns a
/// ChaCha stream keyed by its index, so output is independent of thread
/// count.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let (n, cols, k) = (spec.n_alphas, spec.n_obs, spec.true_k);

    let mut frng = ChaCha8Rng::seed_from_u64(spec.seed);
    frng.set_stream(0);
    let strengths: Vec<f64> = (0..k).map(|_| uniform(&mut frng, spec.rho_range)).collect();
    let factor_returns: Vec<f64> = (0..k * cols).map(|_| frng.sample(StandardNormal)).collect();
    let amplitude: Vec<f64> = strengths.iter().map(|r| (r / (1.0 - r)).sqrt()).collect();

    let cells = n.checked_mul(cols).ok_or(Error::Allocation { bytes: usize::MAX })?;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(cells).map_err(|_| Error::Allocation { bytes: cells * 8 })?;
    data.resize(cells, 0.0);
    let mut meta: Vec<(f64, f64, Vec<f64>)> = vec![(0.0, 0.0, Vec::new()); n];

    data.par_chunks_mut(cols).zip(meta.par_iter_mut()).enumerate().for_each(|(i, (row, meta))| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let vol = uniform(&mut rng, spec.vol_range);
        let load: Vec<f64> = (0..k)
            .map(|a| {
                let g = if a == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) };
                vol * amplitude[a] * g
            })
            .collect();
        for (s, r) in row.iter_mut().enumerate() {
            let mut v = vol * rng.sample::<f64, _>(StandardNormal);
            for (a, l) in load.iter().enumerate() {
                v += l * factor_returns[a * cols + s];
            }
            *r = v;
        }
        let e = 0.05 * vol * rng.random_range(0.5..1.5);
        *meta = (vol, e, load);
    });

    let xi: Vec<f64> = meta.iter().map(|m| m.0).collect();
    let expected: Vec<f64> = meta.iter().map(|m| m.1).collect();
    let omega: Vec<f64> = meta.into_iter().flat_map(|m| m.2).collect();

    let returns = Array2::from_shape_vec((n, cols), data).map_err(|e| Error::validation(e.to_string()))?;
    let panel = ReturnsPanel::from_matrix(returns)?;
    let model = FactorModel::new(
        xi,
        Array2::from_shape_vec((n, k), omega).map_err(|e| Error::validation(e.to_string()))?,
        Array2::eye(k),
    )?;
    Ok(Synthetic { panel, expected: ExpectedReturns::new(expected)?, model })
}
