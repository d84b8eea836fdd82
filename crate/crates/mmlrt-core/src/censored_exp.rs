//! The censored exponential testbed: the one exponential-family case where
//! the mixture LRT's extreme-value behavior is fully computable.
//!
//! Observations live on (0, T]: density θe^{-θx} inside the window and an
//! atom e^{-θT} at x = T.  Censoring is encoded by exact equality x == T.
//! The null rate is 1.  Everything downstream is built from the likelihood
//! ratio r(x; θ) = f(x; θ)/f(x; 1) and the moments of r − 1 under the null:
//!
//! ```text
//! phi(a)            = (1 - e^{-aT}) / a            (= T at a = 0)
//! v_theta(θ)        = (θ-1)^2 phi(2θ-1)            = Var_0[r]
//! cov(θ1,θ2)        = (θ1-1)(θ2-1) phi(θ1+θ2-1)    = Cov_0[r(θ1), r(θ2)]
//! ```
//!
//! On the scale θ = e^s + 1/2 the score correlation is, in closed form,
//! sech((s-t)/2) times a censoring correction, carrying the sign of
//! (θ(s)-1)(θ(t)-1): scores on opposite sides of the null rate are
//! anticorrelated because the score direction flips at θ = 1.  With the sign
//! included the closed form equals cov/sqrt(v v) identically and converges
//! pointwise to the uncensored sech((s-t)/2) form as T grows.
//!
//! The profile statistic fixes θ and maximizes Σ log(1 + p(r_i - 1)) over
//! p ∈ [0, 1] (concave; bisection on the derivative with bracket [0,1] and
//! tolerance 1e-12, boundary optima honored).  `lambda_sup` maximizes over a
//! geometric θ-grid and refines each local maximum by golden section in
//! log θ.  Centered by log log n − log 4π, the sup statistic has a standard
//! Gumbel limit; `gumbel_mc` runs that experiment.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Number of power-series moments kept by the fast bisection path; with
/// p·max|r-1| <= 1/8 the truncation error is below full-pass roundoff.
const MOMENTS: usize = 14;
const SERIES_THRESHOLD: f64 = 0.125;
const BISECT_ITERS: usize = 40; // bracket [0,1] down to < 1e-12

pub const LOG_4PI: f64 = 2.5310242469692907;

/// (1 - e^{-aT})/a, the building block of every second moment here.
/// Tiny |a| goes through the 4-term Taylor expansion to dodge cancellation.
pub fn phi(a: f64, horizon_t: f64) -> f64 {
    let t = horizon_t;
    if a.abs() < 1e-4 {
        // T - aT^2/2 + a^2 T^3/6 - a^3 T^4/24
        t * (1.0 + a * t * (-0.5 + a * t * (1.0 / 6.0 - a * t / 24.0)))
    } else {
        -(-a * t).exp_m1() / a
    }
}

/// Null variance of the likelihood ratio at rate θ.
pub fn v_theta(theta: f64, horizon_t: f64) -> f64 {
    let d = theta - 1.0;
    d * d * phi(2.0 * theta - 1.0, horizon_t)
}

/// Null covariance of the likelihood ratios at two rates.
pub fn cov_scores(theta1: f64, theta2: f64, horizon_t: f64) -> f64 {
    (theta1 - 1.0) * (theta2 - 1.0) * phi(theta1 + theta2 - 1.0, horizon_t)
}

/// Density of the censored exponential; 0 off the support.
pub fn density(x: f64, theta: f64, horizon_t: f64) -> f64 {
    assert!(theta > 0.0 && horizon_t > 0.0, "need positive rate/horizon");
    if x == horizon_t {
        (-theta * horizon_t).exp()
    } else if x > 0.0 && x < horizon_t {
        theta * (-theta * x).exp()
    } else {
        0.0
    }
}

/// Likelihood ratio r(x; θ) against the unit-rate null.
pub fn ratio(x: f64, theta: f64, horizon_t: f64) -> f64 {
    assert!(theta > 0.0 && horizon_t > 0.0, "need positive rate/horizon");
    assert!(
        x > 0.0 && x <= horizon_t,
        "x = {x} outside (0, T = {horizon_t}]"
    );
    if x == horizon_t {
        (-(theta - 1.0) * horizon_t).exp()
    } else {
        theta * (-(theta - 1.0) * x).exp()
    }
}

/// Score-scale correlation on the θ = e^s + 1/2 parameterization.
/// `horizon` = None gives the uncensored closed form.  The sign factor makes
/// this equal to cov/sqrt(v·v) on both sides of the null; the classical
/// positive display is the same-side case.  Undefined (NaN) if either rate
/// hits the null exactly (zero variance).
pub fn rho(s: f64, t: f64, horizon: Option<f64>) -> f64 {
    let es = s.exp();
    let et = t.exp();
    if es == 0.5 || et == 0.5 {
        return f64::NAN;
    }
    if s == t {
        return 1.0;
    }
    let sign = if (es - 0.5) * (et - 0.5) > 0.0 {
        1.0
    } else {
        -1.0
    };
    let sech = 2.0 / (((s - t) / 2.0).exp() + ((t - s) / 2.0).exp());
    match horizon {
        None => sign * sech,
        Some(h) => {
            assert!(h > 0.0, "horizon must be positive");
            let num = -(-h * (es + et)).exp_m1();
            let den_s = -(-h * (es + es)).exp_m1();
            let den_t = -(-h * (et + et)).exp_m1();
            sign * sech * num / (den_s.sqrt() * den_t.sqrt())
        }
    }
}

/// A sample of censored observations; x == T marks censoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensExpSample {
    pub x: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl CensExpSample {
    pub fn new(x: Vec<f64>, horizon_t: f64) -> Result<Self> {
        let s = CensExpSample { x, horizon_t };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn n_censored(&self) -> usize {
        self.x.iter().filter(|&&x| x == self.horizon_t).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::validation("empty sample"));
        }
        if !(self.horizon_t.is_finite() && self.horizon_t > 0.0) {
            return Err(Error::validation(format!(
                "horizon T must be positive, got {}",
                self.horizon_t
            )));
        }
        for (i, &x) in self.x.iter().enumerate() {
            if !(x.is_finite() && x > 0.0 && x <= self.horizon_t) {
                return Err(Error::validation(format!(
                    "x[{i}] = {x} outside (0, T = {}]",
                    self.horizon_t
                )));
            }
        }
        Ok(())
    }
}

/// Draw n observations at rate θ, censored at T.
pub fn sample_censored<R: Rng + ?Sized>(
    theta: f64,
    horizon_t: f64,
    n: usize,
    rng: &mut R,
) -> Result<CensExpSample> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::validation(format!("rate must be positive: {theta}")));
    }
    if !(horizon_t > 0.0 && horizon_t.is_finite()) {
        return Err(Error::validation(format!(
            "horizon must be positive: {horizon_t}"
        )));
    }
    if n == 0 {
        return Err(Error::validation("n must be at least 1"));
    }
    let exp = Exp::new(theta).expect("validated rate");
    let x = (0..n)
        .map(|_| {
            let y = loop {
                let y = exp.sample(rng);
                if y > 0.0 {
                    break y;
                }
            };
            if y < horizon_t {
                y
            } else {
                horizon_t
            }
        })
        .collect();
    Ok(CensExpSample { x, horizon_t })
}

/// Standardized score Sₙ(θ) = Σ(r_i - 1) / sqrt(n v_θ).  Undefined at the
/// null rate (v vanishes).
pub fn score_statistic(sample: &CensExpSample, theta: f64) -> Result<f64> {
    sample.validate()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("rate must be positive: {theta}")));
    }
    if theta == 1.0 {
        return Err(Error::domain(
            "score statistic undefined at the null rate (zero variance)",
        ));
    }
    let v = v_theta(theta, sample.horizon_t);
    let sum: f64 = sample
        .x
        .iter()
        .map(|&x| ratio(x, theta, sample.horizon_t) - 1.0)
        .sum();
    Ok(sum / (sample.n() as f64 * v).sqrt())
}

/// Profile LRT at fixed θ: λ(θ) and the maximizing mixture weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lambda: f64,
    pub p_hat: f64,
}

/// Censored observations collapse to one multiplicity-weighted term, so the
/// inner loops run over the uncensored values only.
struct SplitSample {
    xs: Vec<f64>,
    sum_x: f64,
    n_c: usize,
    horizon_t: f64,
}

impl SplitSample {
    fn build(sample: &CensExpSample) -> Self {
        let t = sample.horizon_t;
        let mut xs = Vec::with_capacity(sample.x.len());
        let mut n_c = 0usize;
        let mut sum_x = 0.0;
        for &x in &sample.x {
            if x == t {
                n_c += 1;
            } else {
                xs.push(x);
                sum_x += x;
            }
        }
        SplitSample {
            xs,
            sum_x,
            n_c,
            horizon_t: t,
        }
    }
}

/// Scratch buffers reused across θ evaluations.
struct ProfileWorkspace {
    ds: Vec<f64>,
}

impl ProfileWorkspace {
    fn new(n: usize) -> Self {
        ProfileWorkspace {
            ds: Vec::with_capacity(n),
        }
    }
}

/// λ(θ), p̂(θ) for one θ.  One pass computes r_i - 1, g'(0) and max|r-1|;
/// boundary optima exit early, otherwise bisection on the concave score
/// derivative g'(p) = Σ d_i/(1 + p d_i).
fn profile_at(split: &SplitSample, theta: f64, ws: &mut ProfileWorkspace) -> ProfilePoint {
    let a = theta - 1.0;
    let t = split.horizon_t;
    let n_c = split.n_c as f64;
    let r_c = (-a * t).exp();
    let d_c = r_c - 1.0;

    let ds = &mut ws.ds;
    ds.clear();
    let mut s0 = n_c * d_c;
    let mut maxabs = d_c.abs();
    for &x in &split.xs {
        let d = theta * (-a * x).exp() - 1.0;
        ds.push(d);
        s0 += d;
        maxabs = maxabs.max(d.abs());
    }

    // g'(0) <= 0: the null weight is already optimal.
    if !(s0 > 0.0) {
        return ProfilePoint {
            lambda: 0.0,
            p_hat: 0.0,
        };
    }

    // g'(1) >= 0: all mass on the alternative.  λ = Σ log r_i has the exact
    // closed form n_c·(-aT) + n_u·log θ - a·Σx (no exp/log round trip).
    let mut g1 = if r_c > 0.0 {
        n_c * d_c / r_c
    } else if n_c > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    for &d in ds.iter() {
        let r = 1.0 + d;
        if r > 0.0 {
            g1 += d / r;
        } else {
            g1 = f64::NEG_INFINITY;
            break;
        }
    }
    if g1 >= 0.0 {
        let n_u = split.xs.len() as f64;
        let lambda = -n_c * a * t + n_u * theta.ln() - a * split.sum_x;
        return ProfilePoint {
            lambda: lambda.max(0.0),
            p_hat: 1.0,
        };
    }

    // Interior optimum: bisect g'.  Once p·max|d| <= 1/8 the derivative is
    // evaluated through the truncated geometric series
    //   Σ d/(1+pd) = M1 - p M2 + p^2 M3 - ...,  M_k = Σ d^k,
    // whose truncation error is below the full pass's own roundoff.
    let mut moments = [0.0f64; MOMENTS];
    for &d in ds.iter() {
        let mut pw = d;
        for m in moments.iter_mut() {
            *m += pw;
            pw *= d;
        }
    }
    let gp = |p: f64| -> f64 {
        let cens = n_c * d_c / (1.0 + p * d_c);
        if p * maxabs <= SERIES_THRESHOLD {
            let mut acc = moments[MOMENTS - 1];
            for k in (0..MOMENTS - 1).rev() {
                acc = moments[k] - p * acc;
            }
            cens + acc
        } else {
            let mut acc = 0.0;
            for &d in ds.iter() {
                acc += d / (1.0 + p * d);
            }
            cens + acc
        }
    };

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if gp(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_hat = 0.5 * (lo + hi);

    let mut lambda = n_c * (p_hat * d_c).ln_1p();
    for &d in ds.iter() {
        lambda += (p_hat * d).ln_1p();
    }
    ProfilePoint {
        lambda: lambda.max(0.0),
        p_hat,
    }
}

/// Profile LRT at fixed θ (θ = 1 is allowed: the ratio is constant and
/// λ = 0 exactly).
pub fn profile_lambda(sample: &CensExpSample, theta: f64) -> Result<ProfilePoint> {
    sample.validate()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("rate must be positive: {theta}")));
    }
    let split = SplitSample::build(sample);
    let mut ws = ProfileWorkspace::new(split.xs.len());
    Ok(profile_at(&split, theta, &mut ws))
}

/// Search domain for the sup statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSearch {
    pub theta_min: f64,
    pub theta_max: f64,
    pub grid_points: usize,
    /// Golden-section bracket width in log θ at which refinement stops.
    pub refine_tol: f64,
}

impl ThetaSearch {
    /// Default recipe: geometric grid on [1/(T n), n / (log n)^4],
    /// 512 points.
    pub fn default_for(n: usize, horizon_t: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("search domain needs n >= 2"));
        }
        let ln_n = (n as f64).ln();
        let s = ThetaSearch {
            theta_min: 1.0 / (horizon_t * n as f64),
            theta_max: n as f64 / ln_n.powi(4),
            grid_points: 512,
            refine_tol: 1e-6,
        };
        s.validate()?;
        Ok(s)
    }

    /// The classical one-sided interval (log n, n (log n)^{-4}) from the
    /// uncensored theory.  Empty below n ≈ 1.1e6 — that slow approach to the
    /// asymptotic regime is exactly why the default search is wider.
    pub fn liu_interval(n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::domain("interval needs n >= 16"));
        }
        let ln_n = (n as f64).ln();
        let s = ThetaSearch {
            theta_min: ln_n,
            theta_max: n as f64 / ln_n.powi(4),
            grid_points: 512,
            refine_tol: 1e-6,
        };
        s.validate().map_err(|_| {
            Error::domain(format!(
                "interval (log n, n/(log n)^4) is empty at n = {n}; \
                 it requires n (log n)^-4 > log n (n above ~1.1e6)"
            ))
        })?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min.is_finite() && self.theta_min > 0.0) {
            return Err(Error::validation(format!(
                "theta_min must be positive, got {}",
                self.theta_min
            )));
        }
        if !(self.theta_max.is_finite() && self.theta_max > self.theta_min) {
            return Err(Error::validation(format!(
                "need theta_min < theta_max, got [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        if self.grid_points < 16 {
            return Err(Error::validation(format!(
                "grid_points must be at least 16, got {}",
                self.grid_points
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::validation("refine_tol must be positive"));
        }
        Ok(())
    }
}

/// The sup statistic and its maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSup {
    pub lambda: f64,
    pub theta_hat: f64,
    pub p_hat: f64,
}

fn geometric_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let (ul, uh) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..k)
        .map(|i| (ul + (uh - ul) * i as f64 / (k - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[k - 1] = hi;
    g
}

/// Maximize λ(θ) over the search domain: evaluate the geometric grid, then
/// refine every positive local maximum by golden section in log θ.  A flat
/// profile (λ = 0 everywhere) reports the convention (0, θ̂ = 1, p̂ = 0).
/// Grid ties break toward the smallest θ.
pub fn lambda_sup(sample: &CensExpSample, search: &ThetaSearch) -> Result<LambdaSup> {
    sample.validate()?;
    search.validate()?;
    let split = SplitSample::build(sample);
    let mut ws = ProfileWorkspace::new(split.xs.len());
    let grid = geometric_grid(search.theta_min, search.theta_max, search.grid_points);
    let points: Vec<ProfilePoint> = grid
        .iter()
        .map(|&th| profile_at(&split, th, &mut ws))
        .collect();

    let k = grid.len();
    let mut best: Option<LambdaSup> = None;
    let consider = |cand: LambdaSup, best: &mut Option<LambdaSup>| {
        match best {
            Some(b) if cand.lambda <= b.lambda => {}
            _ => *best = Some(cand),
        }
    };

    for i in 0..k {
        let here = points[i].lambda;
        if here <= 0.0 {
            continue;
        }
        let left_ok = i == 0 || points[i - 1].lambda <= here;
        let right_ok = i == k - 1 || points[i + 1].lambda <= here;
        if !(left_ok && right_ok) {
            continue;
        }
        // Local maximum: polish inside the neighboring cells.
        let lo = grid[if i == 0 { 0 } else { i - 1 }].ln();
        let hi = grid[if i == k - 1 { k - 1 } else { i + 1 }].ln();
        let seed = LambdaSup {
            lambda: here,
            theta_hat: grid[i],
            p_hat: points[i].p_hat,
        };
        let refined = golden_refine(&split, &mut ws, lo, hi, search.refine_tol, seed);
        consider(refined, &mut best);
    }

    Ok(best.unwrap_or(LambdaSup {
        lambda: 0.0,
        theta_hat: 1.0,
        p_hat: 0.0,
    }))
}

/// Golden-section maximization of λ(e^u) on [lo, hi]; keeps the best point
/// ever evaluated (never worse than the seeding grid point).
fn golden_refine(
    split: &SplitSample,
    ws: &mut ProfileWorkspace,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    seed: LambdaSup,
) -> LambdaSup {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut best = seed;
    let mut track = |u: f64, ws: &mut ProfileWorkspace| -> f64 {
        let theta = u.exp();
        let pt = profile_at(split, theta, ws);
        if pt.lambda > best.lambda {
            best = LambdaSup {
                lambda: pt.lambda,
                theta_hat: theta,
                p_hat: pt.p_hat,
            };
        }
        pt.lambda
    };
    let mut h = hi - lo;
    let mut c = lo + INVPHI2 * h;
    let mut d = lo + INVPHI * h;
    let mut fc = track(c, ws);
    let mut fd = track(d, ws);
    while h > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            h = hi - lo;
            c = lo + INVPHI2 * h;
            fc = track(c, ws);
        } else {
            lo = c;
            c = d;
            fc = fd;
            h = hi - lo;
            d = lo + INVPHI * h;
            fd = track(d, ws);
        }
    }
    best
}

/// Gₙ = λ − log log n + log 4π, the Gumbel-centered sup statistic.
pub fn gumbel_center(lambda: f64, n: usize) -> Result<f64> {
    if n < 16 {
        return Err(Error::domain(format!(
            "centering needs n >= 16 (log log n must be safely positive), got {n}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(lambda - (n as f64).ln().ln() + LOG_4PI)
}

/// Standard Gumbel CDF exp(-e^{-x}).
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// (1 - rho(t, t + Δ)) / Δ² for a ladder of Δ's, extrapolated to Δ → 0 by
/// Neville's polynomial scheme.  The limit is the local-variance function
/// V(t); uncensored it is 1/8 for every t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStationarity {
    pub t: f64,
    pub horizon: Option<f64>,
    pub deltas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub limit: f64,
}

pub fn local_stationarity_estimate(
    t: f64,
    horizon: Option<f64>,
    deltas: &[f64],
) -> Result<LocalStationarity> {
    if deltas.is_empty() {
        return Err(Error::validation("need at least one delta"));
    }
    for (i, &d) in deltas.iter().enumerate() {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::validation(format!(
                "deltas[{i}] must be positive, got {d}"
            )));
        }
        if deltas[..i].contains(&d) {
            return Err(Error::validation("deltas must be distinct"));
        }
    }
    if let Some(h) = horizon {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::validation(format!(
                "horizon must be positive, got {h}"
            )));
        }
    }
    let ratios: Vec<f64> = deltas
        .iter()
        .map(|&d| (1.0 - rho(t, t + d, horizon)) / (d * d))
        .collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain(
            "correlation undefined on a delta (rate crossing the null?)",
        ));
    }
    let limit = neville_at_zero(deltas, &ratios);
    Ok(LocalStationarity {
        t,
        horizon,
        deltas: deltas.to_vec(),
        ratios,
        limit,
    })
}

/// Polynomial extrapolation of (x_i, y_i) to x = 0.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut q = ys.to_vec();
    for j in 1..n {
        for i in 0..n - j {
            q[i] = (-xs[i + j] * q[i] + xs[i] * q[i + 1]) / (xs[i] - xs[i + j]);
        }
    }
    q[0]
}

/// Monte Carlo study of the Gumbel limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelMcConfig {
    pub theta_true: f64,
    #[serde(rename = "T")]
    pub horizon_t: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Defaults to `ThetaSearch::default_for(n, T)`.
    pub search: Option<ThetaSearch>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelMcRow {
    pub lambda: f64,
    /// Gₙ.
    pub centered: f64,
    pub theta_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelMcResult {
    pub n: usize,
    pub reps: usize,
    pub rows: Vec<GumbelMcRow>,
    pub mean_lambda: f64,
    pub median_centered: f64,
    /// Kolmogorov–Smirnov distance of the centered values to the Gumbel CDF.
    pub ks_to_gumbel: f64,
}

/// Replicate b draws its sample from stream (seed, [b]); the reduction is in
/// replicate order, so reports are identical for any worker count.
pub fn gumbel_mc(cfg: &GumbelMcConfig) -> Result<GumbelMcResult> {
    if cfg.n < 16 {
        return Err(Error::validation("Gumbel study needs n >= 16"));
    }
    if cfg.reps < 1 {
        return Err(Error::validation("need at least one replicate"));
    }
    if cfg.workers < 1 {
        return Err(Error::validation("workers must be at least 1"));
    }
    let search = match &cfg.search {
        Some(s) => {
            s.validate()?;
            s.clone()
        }
        None => ThetaSearch::default_for(cfg.n, cfg.horizon_t)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    let rows: Result<Vec<GumbelMcRow>> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(cfg.seed, &[b as u64]);
                let sample = sample_censored(cfg.theta_true, cfg.horizon_t, cfg.n, &mut rng)?;
                let sup = lambda_sup(&sample, &search)?;
                Ok(GumbelMcRow {
                    lambda: sup.lambda,
                    centered: gumbel_center(sup.lambda, cfg.n)?,
                    theta_hat: sup.theta_hat,
                    p_hat: sup.p_hat,
                })
            })
            .collect()
    });
    let rows = rows?;
    let mean_lambda = rows.iter().map(|r| r.lambda).sum::<f64>() / rows.len() as f64;
    let mut centered: Vec<f64> = rows.iter().map(|r| r.centered).collect();
    centered.sort_by(f64::total_cmp);
    let median_centered = median_sorted(&centered);
    let ks_to_gumbel = ks_distance_sorted(&centered, gumbel_cdf);
    Ok(GumbelMcResult {
        n: cfg.n,
        reps: cfg.reps,
        rows,
        mean_lambda,
        median_centered,
        ks_to_gumbel,
    })
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn ks_distance_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}
