//! Linear beamforming with artificial-noise jamming for multiuser MIMO
//! wiretap channels.
//!
//! A transmitter with `N_t` antennas serves `K < N_t` multi-antenna users
//! while a passive eavesdropper listens. Information is sent with just enough
//! power to meet each user's SINR target; everything left over is radiated as
//! Gaussian noise confined to the nullspace of the users' effective channels,
//! so only the eavesdropper is hurt by it.
//!
//! The crate provides:
//!
//! - [`model`]: scenario/channel types, channel generation, SINR and MSE arithmetic
//! - [`artificial_noise`]: effective downlink channel, nullspace jamming covariance
//! - [`zf`]: coordinated zero-forcing broadcast beamforming
//! - [`joint`]: minimum-power joint transmit/receive design via uplink-downlink duality
//! - [`socp`]: a dense primal-dual interior-point solver for second-order cone programs
//! - [`multicast`]: minimum-power multicast beamforming under per-user MSE constraints
//! - [`eavesdropper`]: max-SINR linear wiretap receiver and exhaustive ML detection
//! - [`harness`]: Monte Carlo experiments, result tables, spec files

pub mod artificial_noise;
pub mod eavesdropper;
pub mod error;
pub mod harness;
pub mod joint;
pub mod linalg;
pub mod model;
pub mod multicast;
pub mod socp;
pub mod zf;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use model::{BeamformerSolution, ChannelSet, ScenarioConfig, Scheme, TrialRecord};
