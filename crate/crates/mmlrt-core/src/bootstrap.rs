//! Parametric bootstrap calibration for the homogeneity LRT.
//!
//! The statistic's null distribution is not any fixed chi-square (the
//! mixing weight sits on the boundary and the component parameter is only
//! identified under the alternative), so p-values come from resampling:
//! simulate B datasets from the fitted one-component chain, recompute the
//! statistic on each, and count exceedances with the add-one rule
//!
//! ```text
//! p_boot = (1 + #{λ_b >= λ_obs}) / (B + 1)
//! ```
//!
//! Ties count as exceedances, so the p-value is never optimistically small.
//! Classical chi-square reference p-values (for both the raw-λ and 2λ
//! scalings) are reported alongside for comparison, not calibration.
//!
//! Determinism: replicate b builds path i from the pure RNG stream
//! (master_seed, [b, 0, i]) and fits with EM seed (master_seed, [b, 1]).
//! No state is shared across replicates and the reduction is in replicate
//! order, so reports are byte-identical for every worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{CtmcParams, SuffStats};
use crate::error::{Error, Result};
use crate::mixture::{lrt_statistic, FitOptions, LrtMode};
use crate::rng::{derive_seed, stream_rng};
use crate::special::chi2_sf;

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates.
    pub b: usize,
    /// Paths per replicate (normally the observed sample size).
    pub n: usize,
    pub master_seed: u64,
    pub fit_opts: FitOptions,
    pub workers: usize,
    /// Degrees of freedom for the chi-square reference columns.
    pub chi2_df: usize,
    /// Selects which scaling feeds the headline `p_chi2`: 2λ when true
    /// (classical), λ itself when false.  Both columns are always reported.
    pub double_lambda_for_chi2: bool,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::validation("need at least 1 bootstrap replicate"));
        }
        if self.n < 2 {
            return Err(Error::validation("need at least 2 paths per replicate"));
        }
        if self.workers < 1 {
            return Err(Error::validation("workers must be at least 1"));
        }
        if self.chi2_df < 1 {
            return Err(Error::validation("chi2_df must be at least 1"));
        }
        self.fit_opts.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bins + 1 edges, starting at 0.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapQuantiles {
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub lambda_observed: f64,
    /// Replicate statistics in replicate order.  A replicate whose EM run
    /// hit the iteration cap still contributes its best achieved value (and
    /// is counted in `em_failures`); only replicates with no usable fit at
    /// all are omitted.
    pub lambdas: Vec<f64>,
    /// Add-one exceedance p-value; ties count.
    pub p_boot: f64,
    /// Plain exceedance fraction without the add-one correction.
    pub p_boot_raw: f64,
    /// The chi-square reference selected by `double_lambda_for_chi2`.
    pub p_chi2: f64,
    pub p_chi2_lambda: f64,
    pub p_chi2_two_lambda: f64,
    pub histogram: Histogram,
    pub quantiles: BootstrapQuantiles,
    /// Replicates whose EM fit did not converge (best value kept) or failed
    /// outright (omitted — cannot happen when resampling a valid null).
    pub em_failures: usize,
}

/// Chi-square upper-tail reference for the statistic, on either scaling.
pub fn chi2_reference_pvalue(lambda: f64, df: usize, doubled: bool) -> Result<f64> {
    let x = if doubled { 2.0 * lambda } else { lambda };
    chi2_sf(x, df)
}

/// (lambda, fit trouble) for one replicate; `None` only when EM produced no
/// value at all.
fn one_replicate(
    null_fit: &CtmcParams,
    cfg: &BootstrapConfig,
    b: usize,
) -> Result<Option<(f64, bool)>> {
    let w = null_fit.w();
    let mut stats = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut rng = stream_rng(cfg.master_seed, &[b as u64, 0, i as u64]);
        let path = null_fit.sample_path(&mut rng);
        stats.push(SuffStats::from_path(&path, w)?);
    }
    let opts = FitOptions {
        seed: derive_seed(cfg.master_seed, &[b as u64, 1]),
        ..cfg.fit_opts.clone()
    };
    match lrt_statistic(&stats, null_fit.horizon_t, &LrtMode::Composite, &opts) {
        Ok(r) => Ok(Some((r.lambda, !r.fit_two.converged))),
        Err(Error::Fit(msg)) => {
            debug_assert!(false, "bootstrap replicate {b} failed to fit: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Resample from the fitted null and calibrate `lambda_observed`.
/// `null_fit` may be a boundary fit (states the data never left keep rate 0
/// and act as traps when simulating).
pub fn parametric_bootstrap(
    null_fit: &CtmcParams,
    lambda_observed: f64,
    cfg: &BootstrapConfig,
) -> Result<BootstrapReport> {
    cfg.validate()?;
    null_fit.validate_boundary()?;
    if !(lambda_observed.is_finite() && lambda_observed >= 0.0) {
        return Err(Error::validation(format!(
            "observed lambda must be finite and nonnegative, got {lambda_observed}"
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    let raw: Result<Vec<Option<(f64, bool)>>> = pool.install(|| {
        (0..cfg.b)
            .into_par_iter()
            .map(|b| one_replicate(null_fit, cfg, b))
            .collect()
    });

    let mut lambdas = Vec::with_capacity(cfg.b);
    let mut em_failures = 0usize;
    for r in raw? {
        match r {
            Some((l, trouble)) => {
                lambdas.push(l);
                em_failures += trouble as usize;
            }
            None => em_failures += 1,
        }
    }
    if lambdas.is_empty() {
        return Err(Error::Fit("every bootstrap replicate failed to fit".into()));
    }

    let b_eff = lambdas.len();
    let exceed = lambdas.iter().filter(|&&l| l >= lambda_observed).count();
    let p_boot = (1 + exceed) as f64 / (b_eff + 1) as f64;
    let p_boot_raw = exceed as f64 / b_eff as f64;

    let p_chi2_lambda = chi2_reference_pvalue(lambda_observed, cfg.chi2_df, false)?;
    let p_chi2_two_lambda = chi2_reference_pvalue(lambda_observed, cfg.chi2_df, true)?;
    let p_chi2 = if cfg.double_lambda_for_chi2 {
        p_chi2_two_lambda
    } else {
        p_chi2_lambda
    };

    let mut sorted = lambdas.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = BootstrapQuantiles {
        q50: quantile_sorted(&sorted, 0.50),
        q90: quantile_sorted(&sorted, 0.90),
        q95: quantile_sorted(&sorted, 0.95),
        q99: quantile_sorted(&sorted, 0.99),
    };
    let histogram = histogram(&lambdas, HISTOGRAM_BINS);

    Ok(BootstrapReport {
        lambda_observed,
        lambdas,
        p_boot,
        p_boot_raw,
        p_chi2,
        p_chi2_lambda,
        p_chi2_two_lambda,
        histogram,
        quantiles,
        em_failures,
    })
}

/// Linear-interpolation quantile on presorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-width bins on [0, max] (the statistic is nonnegative).
fn histogram(values: &[f64], bins: usize) -> Histogram {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let hi = if max > 0.0 { max } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let ix = ((v / hi) * bins as f64).floor() as usize;
        counts[ix.min(bins - 1)] += 1;
    }
    Histogram { edges, counts }
}
