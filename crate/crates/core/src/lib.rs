//! Optimal weights for combining a very large number of alpha return
//! streams.
//!
//! Maximizing the Sharpe ratio of a portfolio of N alphas needs the inverse
//! of an N x N covariance matrix. With only M + 1 observations per alpha
//! (M much smaller than N) the sample covariance is singular, and any
//! factor-model or shrinkage regularization of it reduces, for large N, to
//! a cross-sectional regression of normalized expected returns over the
//! normalized demeaned returns themselves. [`optimizer::combine`] runs that
//! regression in O(M^2 N) time and O(M^2) extra memory.
//!
//! The remaining modules hold the pieces of that argument and dense
//! oracles for checking them at small N:
//!
//! * [`stats`]: demeaning, variances, normalization, Gram matrices.
//! * [`riskmodel`]: factor models, shrinkage as a factor model, projected
//!   factor covariances, position and style loadings.
//! * [`regress`]: weighted regression residuals, the exact factor-model
//!   weights and their regression limit.
//! * [`pca`]: principal components of the sample correlation matrix via
//!   the M x M Gram matrix.
//! * [`style`]: regression of pairwise correlations on style tensors.
//!
//! All row reductions use a fixed summation tree, so results do not
//! depend on the size of the rayon thread pool.

pub mod bench;
pub mod design;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod panel;
pub mod pca;
pub mod reduce;
pub mod regress;
pub mod riskmodel;
pub mod stats;
pub mod style;

pub use error::{Error, Result};
pub use optimizer::{combine, combine_with_report, AugmentMode, CombineOptions, CombineReport, WeightSource};
pub use panel::{ExpectedReturns, PositionHistory, ReturnsPanel, WeightVector};
pub use riskmodel::FactorModel;

/// Largest N for which O(N^2) oracle paths may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseCap(pub usize);

impl DenseCap {
    pub const DEFAULT: usize = 4000;

    pub fn check(self, what: &'static str, n: usize) -> Result<()> {
        if n > self.0 {
            Err(Error::DenseCapExceeded { what, n, cap: self.0 })
        } else {
            Ok(())
        }
    }
}

impl Default for DenseCap {
    fn default() -> Self {
        DenseCap(Self::DEFAULT)
    }
}
