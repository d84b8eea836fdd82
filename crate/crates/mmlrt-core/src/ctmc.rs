//! Finite-state continuous-time Markov chains observed on a fixed window.
//!
//! A chain is parameterized by an initial distribution `alpha`, per-state
//! exit rates `beta`, and a jump matrix `gamma` (rows are distributions over
//! the next state; an all-zero row marks an absorbing state).  Every path is
//! observed continuously on `[0, T]`, so the data for one path are the start
//! state, the jump sequence, and the sojourn times — summarized without loss
//! by the occupation times `tau[j]` and transition counts `njk[j][k]`.
//!
//! The path log-density factorizes over those statistics:
//!
//! ```text
//! log f = log alpha(z0) - Σ_j beta[j] tau[j] + Σ_{j,k} njk[j][k] log(beta[j] gamma[j][k])
//! ```
//!
//! with the convention that a path whose statistics fall outside the support
//! (a transition the model forbids, a start the model forbids, occupation
//! times that do not fill the window) has log-density −inf rather than an
//! error.  States are 0-based everywhere, including on the wire.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for simplex sums and for the occupation-time support check.
pub const SIMPLEX_TOL: f64 = 1e-12;
pub const OCCUPATION_TOL: f64 = 1e-10;

/// State space bookkeeping derived from a jump matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub w: usize,
    /// `absorbing[j]` iff row j of gamma is identically zero.
    pub absorbing: Vec<bool>,
}

impl StateSpace {
    pub fn from_gamma(gamma: &[Vec<f64>]) -> Result<Self> {
        let w = gamma.len();
        if w < 2 {
            return Err(Error::validation(format!(
                "state space needs at least 2 states, got {w}"
            )));
        }
        let absorbing = gamma
            .iter()
            .map(|row| row.iter().all(|&g| g == 0.0))
            .collect();
        Ok(StateSpace { w, absorbing })
    }
}

/// Parameters of one chain together with the observation horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl CtmcParams {
    /// Strictly validated constructor: beta must be positive exactly on the
    /// non-absorbing states.  Use for user-supplied parameters.
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<Vec<f64>>,
        horizon_t: f64,
    ) -> Result<Self> {
        let p = CtmcParams {
            alpha,
            beta,
            gamma,
            horizon_t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Constructor for fitted parameters, where a state with no observed
    /// exits legitimately gets the boundary estimate beta = 0 even though its
    /// gamma row is nonzero.  Such states behave as traps when simulating.
    pub fn new_boundary(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<Vec<f64>>,
        horizon_t: f64,
    ) -> Result<Self> {
        let p = CtmcParams {
            alpha,
            beta,
            gamma,
            horizon_t,
        };
        p.validate_common()?;
        Ok(p)
    }

    pub fn w(&self) -> usize {
        self.alpha.len()
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::from_gamma(&self.gamma)
    }

    /// Full validation including the strict beta/absorbing correspondence.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        let space = self.state_space()?;
        for j in 0..self.w() {
            if !space.absorbing[j] && self.beta[j] == 0.0 {
                return Err(Error::validation(format!(
                    "state {j} has a nonzero jump row but beta = 0; \
                     zero rates are only valid on absorbing states"
                )));
            }
        }
        Ok(())
    }

    /// Validation that admits boundary fits: beta = 0 is allowed on a
    /// non-absorbing state (a state the data never left).  `sample_path`
    /// treats such states as traps, so these parameters can still generate.
    pub fn validate_boundary(&self) -> Result<()> {
        self.validate_common()
    }

    fn validate_common(&self) -> Result<()> {
        let w = self.w();
        if w < 2 {
            return Err(Error::validation(format!(
                "need at least 2 states, got {w}"
            )));
        }
        if self.beta.len() != w {
            return Err(Error::validation(format!(
                "beta has length {}, expected {w}",
                self.beta.len()
            )));
        }
        if self.gamma.len() != w {
            return Err(Error::validation(format!(
                "gamma has {} rows, expected {w}",
                self.gamma.len()
            )));
        }
        check_simplex("alpha", &self.alpha)?;
        for (j, row) in self.gamma.iter().enumerate() {
            if row.len() != w {
                return Err(Error::validation(format!(
                    "gamma row {j} has length {}, expected {w}",
                    row.len()
                )));
            }
            if row[j] != 0.0 {
                return Err(Error::validation(format!(
                    "gamma[{j}][{j}] must be 0 (no self-jumps), got {}",
                    row[j]
                )));
            }
            let all_zero = row.iter().all(|&g| g == 0.0);
            if !all_zero {
                check_simplex(&format!("gamma row {j}"), row)?;
            }
        }
        for (j, &b) in self.beta.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::validation(format!(
                    "beta[{j}] must be finite and nonnegative, got {b}"
                )));
            }
            let absorbing = self.gamma[j].iter().all(|&g| g == 0.0);
            if absorbing && b != 0.0 {
                return Err(Error::validation(format!(
                    "state {j} is absorbing (zero jump row) but beta = {b}; must be 0"
                )));
            }
        }
        if !self.horizon_t.is_finite() || self.horizon_t <= 0.0 {
            return Err(Error::validation(format!(
                "horizon T must be positive and finite, got {}",
                self.horizon_t
            )));
        }
        Ok(())
    }

    /// Simulate one path on `[0, T]`.  Deterministic given the generator
    /// state.  A state with beta = 0 (absorbing, or an empirically-absorbing
    /// boundary fit) holds the chain for the rest of the window.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let z0 = sample_index(&self.alpha, rng);
        let mut segments: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut state = z0;
        let mut elapsed = 0.0_f64;
        loop {
            let rate = self.beta[state];
            if rate == 0.0 {
                segments.push((state, self.horizon_t - elapsed));
                break;
            }
            let exp = Exp::new(rate).expect("validated rate > 0");
            // Redraw the (measure-zero) exact-zero sojourn so segment
            // durations are strictly positive.
            let dt = loop {
                let dt = exp.sample(rng);
                if dt > 0.0 {
                    break dt;
                }
            };
            if elapsed + dt < self.horizon_t {
                segments.push((state, dt));
                elapsed += dt;
                state = sample_index(&self.gamma[state], rng);
            } else {
                segments.push((state, self.horizon_t - elapsed));
                break;
            }
        }
        SamplePath {
            z0,
            segments,
            horizon_t: self.horizon_t,
        }
    }

    /// Path log-density evaluated on sufficient statistics.  Support
    /// violations return −inf; mismatched dimensions are a caller bug and
    /// panic.
    pub fn log_density(&self, stats: &SuffStats) -> f64 {
        log_density_parts(
            &self.alpha,
            &self.beta,
            &self.gamma,
            stats,
            self.horizon_t,
        )
    }
}

/// The log-density shared by one-component and mixture evaluation; `gamma`
/// may come from a different structure than `alpha`/`beta`.
pub(crate) fn log_density_parts(
    alpha: &[f64],
    beta: &[f64],
    gamma: &[Vec<f64>],
    stats: &SuffStats,
    horizon_t: f64,
) -> f64 {
    let w = alpha.len();
    assert_eq!(stats.tau.len(), w, "stats/params state-count mismatch");
    assert_eq!(stats.njk.len(), w, "stats/params state-count mismatch");
    assert!(stats.z0 < w, "start state {} out of range", stats.z0);

    // Only support condition on the occupation times: they fill the window.
    let total: f64 = stats.tau.iter().sum();
    if (total - horizon_t).abs() > OCCUPATION_TOL {
        return f64::NEG_INFINITY;
    }

    let a0 = alpha[stats.z0];
    if a0 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut ll = a0.ln();
    for j in 0..w {
        ll -= beta[j] * stats.tau[j];
    }
    for (j, row) in stats.njk.iter().enumerate() {
        for (k, &n) in row.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let rate = beta[j] * gamma[j][k];
            if rate <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += n as f64 * rate.ln();
        }
    }
    ll
}

/// One observed path: start state and `(state, sojourn)` segments covering
/// `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub z0: usize,
    pub segments: Vec<(usize, f64)>,
    #[serde(rename = "T")]
    pub horizon_t: f64,
}

impl SamplePath {
    pub fn new(z0: usize, segments: Vec<(usize, f64)>, horizon_t: f64) -> Result<Self> {
        let p = SamplePath {
            z0,
            segments,
            horizon_t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Number of jumps.
    pub fn m(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::validation("path has no segments"));
        }
        if self.segments[0].0 != self.z0 {
            return Err(Error::validation(format!(
                "first segment state {} does not match z0 = {}",
                self.segments[0].0, self.z0
            )));
        }
        let mut total = 0.0;
        for (ix, &(state, dt)) in self.segments.iter().enumerate() {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::validation(format!(
                    "segment {ix} has non-positive sojourn {dt}"
                )));
            }
            if ix > 0 && self.segments[ix - 1].0 == state {
                return Err(Error::validation(format!(
                    "segments {} and {ix} repeat state {state}; jumps must change state",
                    ix - 1
                )));
            }
            total += dt;
        }
        if (total - self.horizon_t).abs() > OCCUPATION_TOL {
            return Err(Error::validation(format!(
                "sojourns sum to {total}, horizon is {}",
                self.horizon_t
            )));
        }
        Ok(())
    }
}

/// Sufficient statistics of one path for a `w`-state chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffStats {
    pub z0: usize,
    /// Number of jumps.
    pub m: usize,
    /// Occupation time per state; sums to the horizon.
    pub tau: Vec<f64>,
    /// Transition counts; `njk[j][k]` jumps from j to k.
    pub njk: Vec<Vec<u64>>,
}

impl SuffStats {
    pub fn from_path(path: &SamplePath, w: usize) -> Result<Self> {
        path.validate()?;
        let mut tau = vec![0.0; w];
        let mut njk = vec![vec![0u64; w]; w];
        for (ix, &(state, dt)) in path.segments.iter().enumerate() {
            if state >= w {
                return Err(Error::validation(format!(
                    "segment {ix} visits state {state}, but w = {w}"
                )));
            }
            tau[state] += dt;
            if ix > 0 {
                njk[path.segments[ix - 1].0][state] += 1;
            }
        }
        Ok(SuffStats {
            z0: path.z0,
            m: path.m(),
            tau,
            njk,
        })
    }

    pub fn w(&self) -> usize {
        self.tau.len()
    }

    /// Exits from state j = row sum of njk.
    pub fn exits(&self, j: usize) -> u64 {
        self.njk[j].iter().sum()
    }
}

/// Sample an index from a probability vector (guarded against the simplex
/// tolerance: if rounding leaves u above the final cumulative sum, the last
/// positive-mass index wins).
fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (ix, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = ix;
            if u < acc {
                return ix;
            }
        }
    }
    last_positive
}

fn check_simplex(name: &str, v: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (ix, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::validation(format!(
                "{name}[{ix}] must be a finite nonnegative probability, got {p}"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::validation(format!(
            "{name} sums to {sum}, expected 1 within {SIMPLEX_TOL:e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    /// Two states, second absorbing, unit horizon.
    pub(crate) fn two_state(beta1: f64) -> CtmcParams {
        CtmcParams::new(
            vec![1.0, 0.0],
            vec![beta1, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_bad_params() {
        // alpha not a simplex
        assert!(CtmcParams::new(
            vec![0.5, 0.6],
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            1.0
        )
        .is_err());
        // self-jump
        assert!(CtmcParams::new(
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            1.0
        )
        .is_err());
        // absorbing state with positive rate
        assert!(CtmcParams::new(
            vec![1.0, 0.0],
            vec![1.0, 2.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            1.0
        )
        .is_err());
        // non-absorbing state with zero rate is rejected strictly...
        assert!(CtmcParams::new(
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            1.0
        )
        .is_err());
        // ...but allowed through the boundary constructor (fitted models).
        assert!(CtmcParams::new_boundary(
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            1.0
        )
        .is_ok());
        // bad horizon
        assert!(CtmcParams::new(
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            0.0
        )
        .is_err());
    }

    #[test]
    fn no_jump_log_density() {
        // alpha = (1,0), beta = (2,0), T = 1, path never leaves state 0:
        // log f = log 1 - 2*1 = -2.
        let p = two_state(2.0);
        let path = SamplePath::new(0, vec![(0, 1.0)], 1.0).unwrap();
        let stats = SuffStats::from_path(&path, 2).unwrap();
        assert_eq!(stats.m, 0);
        assert_eq!(p.log_density(&stats), -2.0);
    }

    #[test]
    fn one_jump_log_density() {
        // Jump at 0.4: f = alpha(0) * e^{-2*0.4} * (2*1) * e^{-0*0.6}
        //            = 2 e^{-0.8}; log f = ln 2 - 0.8.
        let p = two_state(2.0);
        let path = SamplePath::new(0, vec![(0, 0.4), (1, 0.6)], 1.0).unwrap();
        let stats = SuffStats::from_path(&path, 2).unwrap();
        let expect = -0.10685281944005469; // ln 2 - 0.8
        assert!((p.log_density(&stats) - expect).abs() < 1e-15);
    }

    #[test]
    fn absorbing_start() {
        let p = CtmcParams::new(
            vec![0.0, 1.0],
            vec![2.0, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            3.0,
        )
        .unwrap();
        let mut rng = stream_rng(11, &[0]);
        let path = p.sample_path(&mut rng);
        assert_eq!(path.z0, 1);
        assert_eq!(path.segments, vec![(1, 3.0)]);
        let stats = SuffStats::from_path(&path, 2).unwrap();
        assert_eq!(stats.m, 0);
        assert_eq!(stats.tau, vec![0.0, 3.0]);
        // log f = log alpha(1) - beta_1 * T = 0.
        assert_eq!(p.log_density(&stats), 0.0);
    }

    #[test]
    fn forbidden_transition_is_minus_inf() {
        // Model forbids 1 -> 0 (state 1 absorbing); a path that jumps back
        // has log-density -inf, not an error.
        let p = two_state(2.0);
        let path = SamplePath::new(0, vec![(0, 0.3), (1, 0.3), (0, 0.4)], 1.0).unwrap();
        let stats = SuffStats::from_path(&path, 2).unwrap();
        assert_eq!(p.log_density(&stats), f64::NEG_INFINITY);
        // Start the model forbids:
        let path2 = SamplePath::new(1, vec![(1, 1.0)], 1.0).unwrap();
        let stats2 = SuffStats::from_path(&path2, 2).unwrap();
        assert_eq!(p.log_density(&stats2), f64::NEG_INFINITY);
    }

    #[test]
    fn occupation_must_fill_window() {
        let p = two_state(2.0);
        let mut stats = SuffStats {
            z0: 0,
            m: 0,
            tau: vec![0.5, 0.0],
            njk: vec![vec![0, 0], vec![0, 0]],
        };
        assert_eq!(p.log_density(&stats), f64::NEG_INFINITY);
        stats.tau = vec![1.0, 0.0];
        assert!(p.log_density(&stats).is_finite());
    }

    #[test]
    fn path_construction_rejects_malformed() {
        assert!(SamplePath::new(0, vec![], 1.0).is_err());
        assert!(SamplePath::new(0, vec![(1, 1.0)], 1.0).is_err()); // z0 mismatch
        assert!(SamplePath::new(0, vec![(0, 0.0)], 1.0).is_err()); // zero sojourn
        assert!(SamplePath::new(0, vec![(0, 0.5), (0, 0.5)], 1.0).is_err()); // repeat
        assert!(SamplePath::new(0, vec![(0, 0.5)], 1.0).is_err()); // horizon gap
    }

    #[test]
    fn sampled_paths_are_valid_and_fill_horizon() {
        let p = CtmcParams::new(
            vec![0.3, 0.3, 0.4],
            vec![1.5, 2.5, 0.0],
            vec![
                vec![0.0, 0.7, 0.3],
                vec![0.4, 0.0, 0.6],
                vec![0.0, 0.0, 0.0],
            ],
            2.0,
        )
        .unwrap();
        for i in 0..200 {
            let mut rng = stream_rng(5, &[i]);
            let path = p.sample_path(&mut rng);
            path.validate().unwrap();
            let stats = SuffStats::from_path(&path, 3).unwrap();
            let total: f64 = stats.tau.iter().sum();
            assert!((total - 2.0).abs() <= OCCUPATION_TOL);
            assert!(p.log_density(&stats).is_finite());
        }
    }

    #[test]
    fn jump_frequency_matches_exponential_law() {
        // P(no jump before T) = e^{-beta T}; check within 3 binomial SE.
        let p = two_state(2.0);
        let n = 40_000;
        let mut no_jump = 0usize;
        for i in 0..n {
            let mut rng = stream_rng(77, &[i as u64]);
            if p.sample_path(&mut rng).m() == 0 {
                no_jump += 1;
            }
        }
        let expect = (-2.0_f64).exp();
        let freq = no_jump as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(
            (freq - expect).abs() < 3.0 * se,
            "freq {freq} vs {expect} (se {se})"
        );
    }

    #[test]
    fn density_ratio_has_unit_mean_under_null() {
        // E_0[ f(X; alt)/f(X; null) ] = 1 when supports match: the ratio is a
        // likelihood ratio.  Three-state chain, 3 SE band.
        let null = CtmcParams::new(
            vec![0.5, 0.5, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![
                vec![0.0, 0.6, 0.4],
                vec![0.5, 0.0, 0.5],
                vec![0.0, 0.0, 0.0],
            ],
            1.0,
        )
        .unwrap();
        let alt = CtmcParams::new(
            vec![0.4, 0.6, 0.0],
            vec![1.7, 1.2, 0.0],
            vec![
                vec![0.0, 0.3, 0.7],
                vec![0.8, 0.0, 0.2],
                vec![0.0, 0.0, 0.0],
            ],
            1.0,
        )
        .unwrap();
        let n = 60_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = stream_rng(123, &[i as u64]);
            let stats = SuffStats::from_path(&null.sample_path(&mut rng), 3).unwrap();
            let r = (alt.log_density(&stats) - null.log_density(&stats)).exp();
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let var = (sumsq - n as f64 * mean * mean) / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 3.0 * se,
            "mean {mean}, se {se}"
        );
    }
}
