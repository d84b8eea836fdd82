//! Homogeneity testing for mixtures of continuous-time Markov chains.
//!
//! A population is *homogeneous* if every observed path comes from one chain
//! with parameters (α, β, γ); the alternative mixes two chains sharing the
//! jump matrix γ.  This crate provides:
//!
//! * path simulation and exact path log-densities ([`ctmc`]);
//! * one- and two-component maximum likelihood (closed form and EM) and the
//!   likelihood-ratio statistics for simple and composite nulls
//!   ([`mixture`]);
//! * parametric-bootstrap calibration of those statistics, with chi-square
//!   references for comparison ([`bootstrap`]);
//! * the censored-exponential special case, where the sup-statistic's
//!   Gumbel-type extreme-value behavior is explicit and checkable
//!   ([`censored_exp`]);
//! * diagnostics showing why naive normal-theory calibration fails here —
//!   the likelihood ratio's second moment diverges along rate-scaling
//!   alternatives ([`score_asymptotics`]).
//!
//! Conventions used throughout: states are 0-based; an absorbing state is a
//! row of zeros in γ with rate 0; a path is a sequence of (state, sojourn)
//! segments whose sojourns sum to the horizon T; reported statistics are on
//! the raw log scale λ with 2λ carried alongside; all randomness flows
//! through explicit seeds via [`rng::stream_rng`].

pub mod bootstrap;
pub mod censored_exp;
pub mod ctmc;
pub mod error;
pub mod io;
pub mod mixture;
pub mod rng;
pub mod score_asymptotics;
pub mod special;

pub use error::{Error, Result};
