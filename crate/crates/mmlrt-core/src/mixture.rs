//! One- and two-component mixture fitting and the homogeneity LRT.
//!
//! The two-component model mixes chains that share a jump matrix but differ
//! in initial distribution and exit rates:
//!
//! ```text
//! g = (1 - p) f(.; alpha0, beta0, gamma) + p f(.; alpha1, beta1, gamma)
//! ```
//!
//! The one-component MLE is closed-form (start frequencies, empirical jump
//! fractions, exits over occupation time).  The mixture MLE comes from EM
//! with closed-form M-steps; because the components share gamma, the pooled
//! transition fractions maximize the gamma block regardless of the weights,
//! so gamma decouples and equals the one-component estimate exactly.
//!
//! `lambda` is the raw log-likelihood difference (not doubled); `2 lambda`
//! is also reported for callers who want the familiar scale, but the usual
//! chi-square calibration is unreliable here — that is the point of the
//! bootstrap module.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ctmc::{log_density_parts, CtmcParams, SuffStats, OCCUPATION_TOL};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::special::log_add_exp;

/// Mixing weights within `WEIGHT_DEGENERASY_TOL` of 0 or 1 mark a collapsed
/// component: the empty side stops updating and the fit is flagged.
pub const WEIGHT_DEGENERACY_TOL: f64 = 1e-12;

/// lambda below this magnitude is numerical zero; the LRT clamps to 0.
pub const LAMBDA_NUMERIC_EPS: f64 = 1e-8;

/// Initial-distribution and exit-rate block of one mixture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Two-component mixture sharing a jump matrix and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Weight of component 1 (the "second" component).
    pub p: f64,
    pub comp0: ComponentParams,
    pub comp1: ComponentParams,
    pub gamma: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl MixtureParams {
    pub fn w(&self) -> usize {
        self.comp0.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::validation(format!(
                "mixing weight must lie in [0,1], got {}",
                self.p
            )));
        }
        for (name, comp) in [("comp0", &self.comp0), ("comp1", &self.comp1)] {
            CtmcParams::new_boundary(
                comp.alpha.clone(),
                comp.beta.clone(),
                self.gamma.clone(),
                self.horizon_t,
            )
            .map_err(|e| Error::validation(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Assemble one component as a standalone chain (boundary rates allowed).
    pub fn component(&self, which: usize) -> Result<CtmcParams> {
        let comp = if which == 0 { &self.comp0 } else { &self.comp1 };
        CtmcParams::new_boundary(
            comp.alpha.clone(),
            comp.beta.clone(),
            self.gamma.clone(),
            self.horizon_t,
        )
    }
}

/// Mixture log-density of one path's statistics: log-sum-exp of the two
/// component log-densities with weights (1-p, p).
pub fn mixture_log_density(stats: &SuffStats, params: &MixtureParams) -> f64 {
    let l0 = log_density_parts(
        &params.comp0.alpha,
        &params.comp0.beta,
        &params.gamma,
        stats,
        params.horizon_t,
    );
    let l1 = log_density_parts(
        &params.comp1.alpha,
        &params.comp1.beta,
        &params.gamma,
        stats,
        params.horizon_t,
    );
    mix_two(params.p, l0, l1)
}

/// log[(1-p) e^{l0} + p e^{l1}], honoring p = 0 / p = 1 exactly.
fn mix_two(p: f64, l0: f64, l1: f64) -> f64 {
    if p == 0.0 {
        return l0;
    }
    if p == 1.0 {
        return l1;
    }
    log_add_exp((1.0 - p).ln() + l0, p.ln() + l1)
}

/// Knobs for the EM search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop when one EM sweep gains less than this in log-likelihood.
    pub loglik_tol: f64,
    /// Number of starts; index 0 is the symmetric start at the one-component
    /// solution (or the null), the rest are jittered.
    pub n_restarts: usize,
    /// Rates are multiplied by exp(U(-init_jitter, init_jitter)) at restart.
    pub init_jitter: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iters: 500,
            loglik_tol: 1e-8,
            n_restarts: 10,
            init_jitter: 0.5,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.loglik_tol > 0.0) {
            return Err(Error::validation(format!(
                "loglik_tol must be positive, got {}",
                self.loglik_tol
            )));
        }
        if self.n_restarts < 1 {
            return Err(Error::validation("n_restarts must be at least 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::validation("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// A fit plus everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    pub params: P,
    pub loglik: f64,
    /// Log-likelihood after each sweep, first entry = initial value.
    /// Nondecreasing up to ~1e-9 numerical slack (EM ascent).
    pub trace: Vec<f64>,
    pub converged: bool,
    /// True when the mixing weight collapsed to 0/1 during fitting.
    pub degenerate_weight: bool,
    /// States never visited and never started in: estimates undefined there
    /// (reported as zeros, but carry no information).
    pub undefined_states: Vec<usize>,
    /// States visited but never exited: rate estimate is the boundary 0
    /// ("empirically absorbing").
    pub no_exit_states: Vec<usize>,
    /// Which restart produced the returned parameters.
    pub restart_index: usize,
}

/// Pooled counts shared by the closed-form fit and the EM loop.
struct Pooled {
    n: usize,
    w: usize,
    starts: Vec<u64>,
    tau: Vec<f64>,
    njk: Vec<Vec<u64>>,
    exits: Vec<u64>,
}

/// Per-sample statistics in flat, cache-friendly form.
struct SampleCache {
    n: usize,
    w: usize,
    z0: Vec<usize>,
    /// n * w occupation times.
    tau: Vec<f64>,
    /// (from, to, count) per sample, concatenated.
    trans: Vec<(u32, u32, u32)>,
    offsets: Vec<usize>,
    /// Per-sample exit counts per state, n * w (u32 fits any sane path).
    exits: Vec<u32>,
}

fn validate_samples(samples: &[SuffStats], horizon_t: f64) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::validation("no samples"));
    }
    if !(horizon_t.is_finite() && horizon_t > 0.0) {
        return Err(Error::validation(format!(
            "horizon T must be positive, got {horizon_t}"
        )));
    }
    let w = samples[0].w();
    if w < 2 {
        return Err(Error::validation("need at least 2 states"));
    }
    for (ix, s) in samples.iter().enumerate() {
        if s.w() != w || s.njk.len() != w || s.njk.iter().any(|r| r.len() != w) {
            return Err(Error::validation(format!(
                "sample {ix}: inconsistent state count (expected {w})"
            )));
        }
        if s.z0 >= w {
            return Err(Error::validation(format!(
                "sample {ix}: start state {} out of range",
                s.z0
            )));
        }
        let total: f64 = s.tau.iter().sum();
        if (total - horizon_t).abs() > OCCUPATION_TOL {
            return Err(Error::validation(format!(
                "sample {ix}: occupation times sum to {total}, horizon is {horizon_t}"
            )));
        }
        let m: u64 = s.njk.iter().flatten().sum();
        if m != s.m as u64 {
            return Err(Error::validation(format!(
                "sample {ix}: m = {} disagrees with transition counts {m}",
                s.m
            )));
        }
    }
    Ok(w)
}

fn pool(samples: &[SuffStats], w: usize) -> Pooled {
    let mut starts = vec![0u64; w];
    let mut tau = vec![0.0; w];
    let mut njk = vec![vec![0u64; w]; w];
    for s in samples {
        starts[s.z0] += 1;
        for j in 0..w {
            tau[j] += s.tau[j];
            for k in 0..w {
                njk[j][k] += s.njk[j][k];
            }
        }
    }
    let exits = (0..w).map(|j| njk[j].iter().sum()).collect();
    Pooled {
        n: samples.len(),
        w,
        starts,
        tau,
        njk,
        exits,
    }
}

fn build_cache(samples: &[SuffStats], w: usize) -> SampleCache {
    let n = samples.len();
    let mut z0 = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n * w);
    let mut trans = Vec::new();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut exits = vec![0u32; n * w];
    offsets.push(0);
    for (i, s) in samples.iter().enumerate() {
        z0.push(s.z0);
        tau.extend_from_slice(&s.tau);
        for j in 0..w {
            for k in 0..w {
                let c = s.njk[j][k];
                if c > 0 {
                    trans.push((j as u32, k as u32, c as u32));
                    exits[i * w + j] += c as u32;
                }
            }
        }
        offsets.push(trans.len());
    }
    SampleCache {
        n,
        w,
        z0,
        tau,
        trans,
        offsets,
        exits,
    }
}

/// Closed-form maximum likelihood for a single chain:
/// start frequencies, pooled jump fractions, exits over occupation time.
pub fn fit_one_component(samples: &[SuffStats], horizon_t: f64) -> Result<FitResult<CtmcParams>> {
    let w = validate_samples(samples, horizon_t)?;
    let pooled = pool(samples, w);
    let (params, undefined_states, no_exit_states) = one_component_from_pooled(&pooled, horizon_t);
    let loglik: f64 = samples.iter().map(|s| params.log_density(s)).sum();
    Ok(FitResult {
        params,
        loglik,
        trace: vec![loglik],
        converged: true,
        degenerate_weight: false,
        undefined_states,
        no_exit_states,
        restart_index: 0,
    })
}

fn one_component_from_pooled(
    pooled: &Pooled,
    horizon_t: f64,
) -> (CtmcParams, Vec<usize>, Vec<usize>) {
    let w = pooled.w;
    let n = pooled.n as f64;
    let alpha: Vec<f64> = pooled.starts.iter().map(|&c| c as f64 / n).collect();
    let mut beta = vec![0.0; w];
    let mut gamma = vec![vec![0.0; w]; w];
    let mut undefined = Vec::new();
    let mut no_exit = Vec::new();
    for j in 0..w {
        if pooled.exits[j] > 0 {
            beta[j] = pooled.exits[j] as f64 / pooled.tau[j];
            for k in 0..w {
                gamma[j][k] = pooled.njk[j][k] as f64 / pooled.exits[j] as f64;
            }
        } else if pooled.tau[j] > 0.0 {
            // Visited, never exited: boundary rate, empirically absorbing.
            no_exit.push(j);
        } else {
            // Never seen at all: nothing to estimate.
            undefined.push(j);
        }
    }
    let params = CtmcParams::new_boundary(alpha, beta, gamma, horizon_t)
        .expect("closed-form estimates are structurally valid");
    (params, undefined, no_exit)
}

/// How the two-component alternative is constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LrtMode {
    /// Composite null: the one-component model is itself fitted.
    Composite,
    /// Simple null: component 0 and gamma are pinned at known values.
    /// `free_alpha` frees the second component's initial distribution
    /// (default true); otherwise it is pinned at the null's alpha too.
    Simple {
        null: CtmcParams,
        free_alpha: bool,
    },
}

/// Two-component EM under the composite alternative: everything free,
/// shared gamma.  Restart 0 starts at the symmetric point (both components
/// equal to the one-component MLE, p = 1/2), which reproduces the
/// one-component likelihood exactly — so the best restart can never fall
/// below it.
pub fn em_fit_two_component(
    samples: &[SuffStats],
    horizon_t: f64,
    opts: &FitOptions,
) -> Result<FitResult<MixtureParams>> {
    em_fit(samples, horizon_t, opts, None)
}

/// Two-component EM with component 0 and gamma pinned at a known null.
pub fn em_fit_two_component_simple(
    samples: &[SuffStats],
    null: &CtmcParams,
    free_alpha: bool,
    opts: &FitOptions,
) -> Result<FitResult<MixtureParams>> {
    null.validate()?;
    em_fit(
        samples,
        null.horizon_t,
        opts,
        Some((null, free_alpha)),
    )
}

struct EmOutcome {
    p: f64,
    comp0: ComponentParams,
    comp1: ComponentParams,
    loglik: f64,
    trace: Vec<f64>,
    converged: bool,
    degenerate: bool,
}

fn em_fit(
    samples: &[SuffStats],
    horizon_t: f64,
    opts: &FitOptions,
    simple: Option<(&CtmcParams, bool)>,
) -> Result<FitResult<MixtureParams>> {
    opts.validate()?;
    let w = validate_samples(samples, horizon_t)?;
    if let Some((null, _)) = simple {
        if null.w() != w {
            return Err(Error::validation(format!(
                "null has {} states, samples have {w}",
                null.w()
            )));
        }
        if (null.horizon_t - horizon_t).abs() > OCCUPATION_TOL {
            return Err(Error::validation(format!(
                "null horizon {} does not match sample horizon {horizon_t}",
                null.horizon_t
            )));
        }
    }
    let pooled = pool(samples, w);
    let cache = build_cache(samples, w);

    // gamma decouples: pooled fractions in the composite case, the null's
    // own matrix in the simple case.
    let (base, undefined_states, no_exit_states) = one_component_from_pooled(&pooled, horizon_t);
    let (gamma, anchor): (Vec<Vec<f64>>, ComponentParams) = match simple {
        None => (
            base.gamma.clone(),
            ComponentParams {
                alpha: base.alpha.clone(),
                beta: base.beta.clone(),
            },
        ),
        Some((null, _)) => (
            null.gamma.clone(),
            ComponentParams {
                alpha: null.alpha.clone(),
                beta: null.beta.clone(),
            },
        ),
    };
    let free_alpha = match simple {
        Some((_, fa)) => fa,
        None => true,
    };
    let comp0_fixed = simple.is_some();

    let mut best: Option<(EmOutcome, usize)> = None;
    for restart in 0..opts.n_restarts {
        let mut rng = stream_rng(opts.seed, &[restart as u64]);
        let (p_init, c0, c1) = if restart == 0 {
            // Symmetric start: mixture likelihood equals the base likelihood
            // exactly, guaranteeing the search never loses to the null.
            (0.5, anchor.clone(), anchor.clone())
        } else {
            let p = [0.3f64, 0.5, 0.7][(restart - 1) % 3].clamp(0.05, 0.95);
            let c0 = if comp0_fixed {
                anchor.clone()
            } else {
                jitter(&anchor, opts.init_jitter, &mut rng)
            };
            let c1 = jitter(&anchor, opts.init_jitter, &mut rng);
            (p, c0, c1)
        };
        let outcome = em_core(
            &cache, &gamma, p_init, c0, c1, comp0_fixed, free_alpha, opts,
        )?;
        match &best {
            Some((b, _)) if b.loglik >= outcome.loglik => {}
            _ => best = Some((outcome, restart)),
        }
    }
    let (out, restart_index) = best.expect("n_restarts >= 1");
    let params = MixtureParams {
        p: out.p,
        comp0: out.comp0,
        comp1: out.comp1,
        gamma,
        horizon_t,
    };
    debug_assert!(params.validate().is_ok());
    Ok(FitResult {
        params,
        loglik: out.loglik,
        trace: out.trace,
        converged: out.converged,
        degenerate_weight: out.degenerate,
        undefined_states,
        no_exit_states,
        restart_index,
    })
}

fn jitter<R: Rng>(comp: &ComponentParams, amount: f64, rng: &mut R) -> ComponentParams {
    let beta = comp
        .beta
        .iter()
        .map(|&b| {
            if b > 0.0 && amount > 0.0 {
                b * rng.random_range(-amount..amount).exp()
            } else {
                b
            }
        })
        .collect();
    ComponentParams {
        alpha: comp.alpha.clone(),
        beta,
    }
}

/// Component log-densities for every sample, given shared gamma.
/// `out` must have length n.
fn comp_loglik_all(cache: &SampleCache, comp: &ComponentParams, gamma: &[Vec<f64>], out: &mut [f64]) {
    let w = cache.w;
    let ln_alpha: Vec<f64> = comp
        .alpha
        .iter()
        .map(|&a| if a > 0.0 { a.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut ln_rate = vec![f64::NEG_INFINITY; w * w];
    for j in 0..w {
        for k in 0..w {
            let r = comp.beta[j] * gamma[j][k];
            if r > 0.0 {
                ln_rate[j * w + k] = r.ln();
            }
        }
    }
    for i in 0..cache.n {
        let tau = &cache.tau[i * w..(i + 1) * w];
        let mut ll = ln_alpha[cache.z0[i]];
        for j in 0..w {
            ll -= comp.beta[j] * tau[j];
        }
        for &(j, k, c) in &cache.trans[cache.offsets[i]..cache.offsets[i + 1]] {
            ll += c as f64 * ln_rate[j as usize * w + k as usize];
        }
        out[i] = ll;
    }
}

#[allow(clippy::too_many_arguments)]
fn em_core(
    cache: &SampleCache,
    gamma: &[Vec<f64>],
    p_init: f64,
    comp0: ComponentParams,
    comp1: ComponentParams,
    comp0_fixed: bool,
    free_alpha: bool,
    opts: &FitOptions,
) -> Result<EmOutcome> {
    let n = cache.n;
    let w = cache.w;
    let mut p = p_init;
    let mut c0 = comp0;
    let mut c1 = comp1;
    let mut l0 = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut resp = vec![0.0; n];

    let loglik = |c0: &ComponentParams,
                      c1: &ComponentParams,
                      p: f64,
                      l0: &mut [f64],
                      l1: &mut [f64]|
     -> Result<f64> {
        comp_loglik_all(cache, c0, gamma, l0);
        comp_loglik_all(cache, c1, gamma, l1);
        let mut total = 0.0;
        for i in 0..n {
            let li = mix_two(p, l0[i], l1[i]);
            if li == f64::NEG_INFINITY {
                return Err(Error::Fit(format!(
                    "sample {i} has zero likelihood under both components; \
                     data lie outside the model support"
                )));
            }
            total += li;
        }
        Ok(total)
    };

    let mut ll = loglik(&c0, &c1, p, &mut l0, &mut l1)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut degenerate = false;

    for _ in 0..opts.max_iters {
        // E-step: responsibilities for component 1 from the cached
        // component log-densities.
        if p == 0.0 || p == 1.0 {
            // Exact endpoint: a fixed point of EM; nothing will move.
            degenerate = true;
            converged = true;
            break;
        }
        let (lw0, lw1) = ((1.0 - p).ln(), p.ln());
        for i in 0..n {
            let li = log_add_exp(lw0 + l0[i], lw1 + l1[i]);
            resp[i] = (lw1 + l1[i] - li).exp();
        }

        // M-step: closed form.  Weighted start frequencies and
        // exits-over-occupation per component; gamma stays pooled/fixed.
        let wsum: f64 = resp.iter().sum();
        p = (wsum / n as f64).clamp(0.0, 1.0);
        if !comp0_fixed {
            c0 = m_step_component(cache, &resp, true, free_alpha, &c0, w);
        }
        c1 = m_step_component(cache, &resp, false, free_alpha, &c1, w);

        let ll_new = loglik(&c0, &c1, p, &mut l0, &mut l1)?;
        trace.push(ll_new);
        let gain = ll_new - ll;
        ll = ll_new;
        if p <= WEIGHT_DEGENERACY_TOL || p >= 1.0 - WEIGHT_DEGENERACY_TOL {
            degenerate = true;
            converged = true;
            break;
        }
        if gain < opts.loglik_tol {
            converged = true;
            break;
        }
    }

    Ok(EmOutcome {
        p,
        comp0: c0,
        comp1: c1,
        loglik: ll,
        trace,
        converged,
        degenerate,
    })
}

/// Weighted M-step for one component.  `complement` selects 1-w (component
/// 0) versus w (component 1).  States with zero weighted exits keep the
/// boundary rate 0; a fully empty component keeps its previous parameters.
fn m_step_component(
    cache: &SampleCache,
    resp: &[f64],
    complement: bool,
    free_alpha: bool,
    prev: &ComponentParams,
    w: usize,
) -> ComponentParams {
    let n = cache.n;
    let mut wsum = 0.0;
    let mut starts = vec![0.0; w];
    let mut tau = vec![0.0; w];
    let mut exits = vec![0.0; w];
    for i in 0..n {
        let wi = if complement { 1.0 - resp[i] } else { resp[i] };
        wsum += wi;
        starts[cache.z0[i]] += wi;
        let ti = &cache.tau[i * w..(i + 1) * w];
        let ei = &cache.exits[i * w..(i + 1) * w];
        for j in 0..w {
            tau[j] += wi * ti[j];
            exits[j] += wi * ei[j] as f64;
        }
    }
    if wsum <= 0.0 {
        // Component has no mass: freeze it (degeneracy is flagged upstream).
        return prev.clone();
    }
    let alpha = if free_alpha {
        starts.iter().map(|&s| s / wsum).collect()
    } else {
        prev.alpha.clone()
    };
    let beta = (0..w)
        .map(|j| {
            if exits[j] > 0.0 && tau[j] > 0.0 {
                exits[j] / tau[j]
            } else {
                0.0
            }
        })
        .collect();
    ComponentParams { alpha, beta }
}

/// The homogeneity likelihood-ratio statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    /// max(0, fitted mixture loglik − null loglik): the raw log scale.
    pub lambda: f64,
    /// The unclamped difference (diagnostic; tiny negatives are numerical).
    pub lambda_raw: f64,
    /// 2 * lambda, for chi-square-style comparisons.
    pub two_lambda: f64,
    /// Null log-likelihood (fitted one-component, or the supplied null).
    pub null_loglik: f64,
    pub fit_two: FitResult<MixtureParams>,
    /// Present in composite mode.
    pub fit_one: Option<FitResult<CtmcParams>>,
}

/// Compute the LRT for either null type.
pub fn lrt_statistic(
    samples: &[SuffStats],
    horizon_t: f64,
    mode: &LrtMode,
    opts: &FitOptions,
) -> Result<LrtResult> {
    match mode {
        LrtMode::Composite => {
            let fit_one = fit_one_component(samples, horizon_t)?;
            let fit_two = em_fit_two_component(samples, horizon_t, opts)?;
            let raw = fit_two.loglik - fit_one.loglik;
            debug_assert!(raw >= -LAMBDA_NUMERIC_EPS, "EM fell below the null: {raw}");
            let lambda = raw.max(0.0);
            Ok(LrtResult {
                lambda,
                lambda_raw: raw,
                two_lambda: 2.0 * lambda,
                null_loglik: fit_one.loglik,
                fit_two,
                fit_one: Some(fit_one),
            })
        }
        LrtMode::Simple { null, free_alpha } => {
            validate_samples(samples, horizon_t)?;
            let null_loglik: f64 = samples.iter().map(|s| null.log_density(s)).sum();
            if null_loglik == f64::NEG_INFINITY {
                return Err(Error::Fit(
                    "data have zero likelihood under the supplied null".into(),
                ));
            }
            let fit_two = em_fit_two_component_simple(samples, null, *free_alpha, opts)?;
            let raw = fit_two.loglik - null_loglik;
            debug_assert!(raw >= -LAMBDA_NUMERIC_EPS, "EM fell below the null: {raw}");
            let lambda = raw.max(0.0);
            Ok(LrtResult {
                lambda,
                lambda_raw: raw,
                two_lambda: 2.0 * lambda,
                null_loglik,
                fit_two,
                fit_one: None,
            })
        }
    }
}

/// One row of the penalty comparison: how lambda stacks up against
/// information-criterion penalties for `d` extra parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub d: usize,
    /// AIC penalty on the doubled scale: 2d.
    pub aic_penalty: f64,
    /// BIC penalty on the doubled scale: d ln n.
    pub bic_penalty: f64,
    pub lambda_minus_aic: f64,
    pub lambda_minus_bic: f64,
    pub two_lambda_minus_aic: f64,
    pub two_lambda_minus_bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub lambda: f64,
    pub n: usize,
    pub rows: Vec<PenaltyRow>,
    /// Reminder that classical asymptotics do not license these penalties
    /// here; they are descriptive only.
    pub caution: String,
}

/// Compare lambda against AIC/BIC penalties for a range of candidate
/// extra-parameter counts.  Mixture nulls sit on the parameter-space
/// boundary, so none of these penalties is backed by chi-square theory —
/// the report says so.
pub fn penalty_report(lambda: f64, n: usize, d_values: &[usize]) -> Result<PenaltyReport> {
    if n < 2 {
        return Err(Error::validation("penalty report needs n >= 2"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let ln_n = (n as f64).ln();
    let rows = d_values
        .iter()
        .map(|&d| {
            let aic = 2.0 * d as f64;
            let bic = d as f64 * ln_n;
            PenaltyRow {
                d,
                aic_penalty: aic,
                bic_penalty: bic,
                lambda_minus_aic: lambda - aic / 2.0,
                lambda_minus_bic: lambda - bic / 2.0,
                two_lambda_minus_aic: 2.0 * lambda - aic,
                two_lambda_minus_bic: 2.0 * lambda - bic,
            }
        })
        .collect();
    Ok(PenaltyReport {
        lambda,
        n,
        rows,
        caution: "mixture nulls violate the regularity behind chi-square/AIC/BIC \
                  calibration; these comparisons are descriptive, not tests — \
                  use the parametric bootstrap for p-values"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::SamplePath;

    fn two_state(beta1: f64) -> CtmcParams {
        CtmcParams::new(
            vec![1.0, 0.0],
            vec![beta1, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            1.0,
        )
        .unwrap()
    }

    fn stats_of(segs: Vec<(usize, f64)>, t: f64, w: usize) -> SuffStats {
        let z0 = segs[0].0;
        SuffStats::from_path(&SamplePath::new(z0, segs, t).unwrap(), w).unwrap()
    }

    #[test]
    fn one_component_closed_form() {
        // Two paths: jump at 0.4 then absorbed; no jump at all.
        // tau_0 total = 1.4, one exit: beta_0 = 1/1.4.
        let samples = vec![
            stats_of(vec![(0, 0.4), (1, 0.6)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
        ];
        let fit = fit_one_component(&samples, 1.0).unwrap();
        assert!((fit.params.beta[0] - 1.0 / 1.4).abs() < 1e-15);
        assert_eq!(fit.params.alpha, vec![1.0, 0.0]);
        assert_eq!(fit.params.gamma[0], vec![0.0, 1.0]);
        assert!(fit.undefined_states.is_empty());
        // State 1 is occupied (0.6 time units) but never left: boundary
        // rate 0, reported as a no-exit state.
        assert_eq!(fit.no_exit_states, vec![1]);
        assert_eq!(fit.params.beta[1], 0.0);
        assert_eq!(fit.trace, vec![fit.loglik]);
    }

    #[test]
    fn all_stayers_hit_boundary() {
        // Identical no-jump paths: beta_0 = 0 (boundary MLE), loglik = 0.
        let samples = vec![
            stats_of(vec![(0, 1.0)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
        ];
        let fit = fit_one_component(&samples, 1.0).unwrap();
        assert_eq!(fit.params.beta[0], 0.0);
        assert_eq!(fit.params.alpha[0], 1.0);
        assert_eq!(fit.loglik, 0.0);
        assert_eq!(fit.no_exit_states, vec![0]);
        assert_eq!(fit.undefined_states, vec![1]);
    }

    #[test]
    fn single_path_round_trip_rates() {
        // 0 -> 1 -> 0 with sojourns 0.2, 0.3, 0.5: tau = (0.7, 0.3),
        // one exit each: beta = (1/0.7, 1/0.3).
        let samples = vec![stats_of(vec![(0, 0.2), (1, 0.3), (0, 0.5)], 1.0, 2)];
        let fit = fit_one_component(&samples, 1.0).unwrap();
        assert!((fit.params.beta[0] - 1.0 / 0.7).abs() < 1e-14);
        assert!((fit.params.beta[1] - 1.0 / 0.3).abs() < 1e-14);
        assert_eq!(fit.params.gamma[0][1], 1.0);
        assert_eq!(fit.params.gamma[1][0], 1.0);
    }

    #[test]
    fn mixture_log_density_example() {
        // Jump at 0.4 under comp0 ~ beta 2 and comp1 ~ beta 4, p = 0.3:
        // log(0.7 * 2e^{-0.8} + 0.3 * 4e^{-1.6}).
        let stats = stats_of(vec![(0, 0.4), (1, 0.6)], 1.0, 2);
        let params = MixtureParams {
            p: 0.3,
            comp0: ComponentParams {
                alpha: vec![1.0, 0.0],
                beta: vec![2.0, 0.0],
            },
            comp1: ComponentParams {
                alpha: vec![1.0, 0.0],
                beta: vec![4.0, 0.0],
            },
            gamma: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            horizon_t: 1.0,
        };
        params.validate().unwrap();
        let expect = -0.13772718683363823; // exact evaluation of the expression
        assert!((mixture_log_density(&stats, &params) - expect).abs() < 1e-15);
    }

    #[test]
    fn mixture_endpoints_are_exact() {
        let stats = stats_of(vec![(0, 0.4), (1, 0.6)], 1.0, 2);
        let comp = |b: f64| ComponentParams {
            alpha: vec![1.0, 0.0],
            beta: vec![b, 0.0],
        };
        let mk = |p: f64| MixtureParams {
            p,
            comp0: comp(2.0),
            comp1: comp(4.0),
            gamma: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            horizon_t: 1.0,
        };
        let l0 = two_state(2.0).log_density(&stats);
        let l1 = two_state(4.0).log_density(&stats);
        assert_eq!(mixture_log_density(&stats, &mk(0.0)), l0);
        assert_eq!(mixture_log_density(&stats, &mk(1.0)), l1);
    }

    #[test]
    fn symmetric_mixture_equals_single_component_exactly() {
        // Both components equal, p = 1/2: log(1/2 f + 1/2 f) = log f,
        // bit-exact because ln(1/2) + ln 2 cancels in log-sum-exp.
        let stats = stats_of(vec![(0, 0.4), (1, 0.6)], 1.0, 2);
        let comp = ComponentParams {
            alpha: vec![1.0, 0.0],
            beta: vec![2.0, 0.0],
        };
        let params = MixtureParams {
            p: 0.5,
            comp0: comp.clone(),
            comp1: comp,
            gamma: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            horizon_t: 1.0,
        };
        assert_eq!(
            mixture_log_density(&stats, &params),
            two_state(2.0).log_density(&stats)
        );
    }

    #[test]
    fn em_never_loses_to_one_component() {
        // Mildly heterogeneous toy data; the mixture must match or beat the
        // single chain, and lambda must be >= 0 after clamping.
        let samples = vec![
            stats_of(vec![(0, 0.1), (1, 0.9)], 1.0, 2),
            stats_of(vec![(0, 0.95), (1, 0.05)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
            stats_of(vec![(0, 0.2), (1, 0.8)], 1.0, 2),
        ];
        let opts = FitOptions::default();
        let res = lrt_statistic(&samples, 1.0, &LrtMode::Composite, &opts).unwrap();
        assert!(res.lambda >= 0.0);
        assert!(res.lambda_raw >= -LAMBDA_NUMERIC_EPS);
        assert!(res.fit_two.loglik >= res.null_loglik - LAMBDA_NUMERIC_EPS);
        assert_eq!(res.two_lambda, 2.0 * res.lambda);
    }

    #[test]
    fn gamma_decouples_from_weights() {
        // The fitted mixture's gamma equals the one-component gamma exactly.
        let samples = vec![
            stats_of(vec![(0, 0.2), (1, 0.3), (0, 0.5)], 1.0, 2),
            stats_of(vec![(0, 0.6), (1, 0.4)], 1.0, 2),
            stats_of(vec![(1, 0.5), (0, 0.5)], 1.0, 2),
        ];
        let one = fit_one_component(&samples, 1.0).unwrap();
        let two = em_fit_two_component(&samples, 1.0, &FitOptions::default()).unwrap();
        assert_eq!(one.params.gamma, two.params.gamma);
    }

    #[test]
    fn em_trace_is_monotone() {
        let samples = vec![
            stats_of(vec![(0, 0.1), (1, 0.9)], 1.0, 2),
            stats_of(vec![(0, 0.8), (1, 0.2)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
        ];
        let fit = em_fit_two_component(&samples, 1.0, &FitOptions::default()).unwrap();
        for pair in fit.trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "trace decreased: {pair:?}");
        }
        assert!(fit.converged);
    }

    #[test]
    fn simple_mode_rejects_unsupported_data() {
        // Null forbids the return jump 1 -> 0; data contain it.
        let null = two_state(2.0);
        let samples = vec![stats_of(vec![(0, 0.3), (1, 0.3), (0, 0.4)], 1.0, 2)];
        let err = lrt_statistic(
            &samples,
            1.0,
            &LrtMode::Simple {
                null,
                free_alpha: true,
            },
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Fit(_)));
    }

    #[test]
    fn simple_mode_lambda_nonnegative() {
        let null = two_state(2.0);
        let samples = vec![
            stats_of(vec![(0, 0.4), (1, 0.6)], 1.0, 2),
            stats_of(vec![(0, 1.0)], 1.0, 2),
            stats_of(vec![(0, 0.05), (1, 0.95)], 1.0, 2),
        ];
        for free_alpha in [true, false] {
            let res = lrt_statistic(
                &samples,
                1.0,
                &LrtMode::Simple {
                    null: null.clone(),
                    free_alpha,
                },
                &FitOptions::default(),
            )
            .unwrap();
            assert!(res.lambda >= 0.0, "free_alpha={free_alpha}");
            if !free_alpha {
                assert_eq!(res.fit_two.params.comp1.alpha, null.alpha);
            }
        }
    }

    #[test]
    fn fit_options_validation() {
        let mut opts = FitOptions::default();
        opts.loglik_tol = 0.0;
        assert!(opts.validate().is_err());
        let mut opts = FitOptions::default();
        opts.n_restarts = 0;
        assert!(opts.validate().is_err());
    }

    #[test]
    fn penalty_report_rows() {
        let rep = penalty_report(276.96, 848, &[3, 5, 8]).unwrap();
        assert_eq!(rep.rows.len(), 3);
        let r = &rep.rows[2];
        assert_eq!(r.d, 8);
        assert_eq!(r.aic_penalty, 16.0);
        assert!((r.bic_penalty - 8.0 * (848.0_f64).ln()).abs() < 1e-12);
        assert!((r.two_lambda_minus_aic - (553.92 - 16.0)).abs() < 1e-10);
        assert!(!rep.caution.is_empty());
        assert!(penalty_report(-1.0, 100, &[1]).is_err());
    }
}
