//! Mediumband wireless link modelling: raised-cosine pulse statistics,
//! multipath channels, the bimodal fading distribution, analytic BER
//! expressions and a Monte Carlo link simulator.

pub mod ber;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod fading_stats;
pub mod link;
pub mod optim;
pub mod pulse;
pub mod quadrature;
pub mod rng;
pub mod scenario;

pub use ber::{ModulationParams, SeriesCoefficients};
pub use channel::{ChannelRealization, FadingPoint, MultipathProfile, ProfileKind, SyncRule, Synchronizer};
pub use error::{Error, Result};
pub use fading_stats::{BimodalParams, FitReport};
pub use link::{BerPoint, Calibration, Detector, FrameConfig, StopRule};
pub use pulse::PulseSpec;
pub use scenario::LinkScenario;
