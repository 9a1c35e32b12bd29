//! Simulator and analysis library for optimal spoofing attacks against
//! multi-satellite navigation signals and their detection.
//!
//! The library models a constellation of `m` satellites broadcasting
//! length-`n` baseband words through pure delay channels to a victim
//! receiver and to an attacker. The attacker forges a signal as a linear
//! transformation of its own observation plus shaped Gaussian noise, tuned
//! to minimize the Kullback-Leibler divergence between the legitimate and
//! spoofed joint observation statistics. The library provides:
//!
//! * construction of the block delay-channel matrices ([`channel`]),
//! * synthesis of the divergence-minimizing attack and its feasibility
//!   test ([`attack`]),
//! * exact divergence analytics, the `(mn/2)·k·Λ₀` decomposition, the
//!   error-region bound `h(β,α) ≤ D`, and a Monte-Carlo divergence
//!   estimator used as an independent cross-check ([`divergence`]),
//! * LRT and GLRT detection statistics with Monte-Carlo DET estimation
//!   ([`detect`]),
//! * scenario configuration with Gaussian or BPSK signaling
//!   ([`scenario`], [`signaling`]).
//!
//! All randomness is derived from a scenario seed through counter-based
//! substreams ([`rng`]), so every experiment is reproducible and trials
//! can run in parallel without changing results.

pub mod attack;
pub mod channel;
pub mod detect;
pub mod divergence;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod signaling;

pub use attack::{AttackPolicy, FeasibilityReport, LimitingScenario};
pub use channel::{ChannelSet, DelayChannel};
pub use detect::{DetCurve, DetPoint, Detector};
pub use divergence::{DivergenceReport, GaussianJointModel, McEstimate, ScenarioAnalysis};
pub use error::{Error, Result};
pub use scenario::{PositionSpec, Scenario, Signaling};
pub use signaling::Word;
