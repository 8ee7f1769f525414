//! Modeling and parameter extraction for micro-ring photon-pair sources
//! with tunable bus-ring coupling.
//!
//! The crate simulates resonance spectra and photon-count statistics of a
//! spontaneous four-wave-mixing ring source, fits measured traces and
//! power sweeps to the count-rate models, and predicts the trade-off
//! between source brightness and heralding efficiency across coupling
//! regimes.
//!
//! Module map:
//! - [`config`]: device and bench constants, `key = value` config files
//! - [`ring`]: coupling, transmission spectrum, quality factors, decay rates
//! - [`sfwm`]: singles/coincidence count models and the loss-budget
//!   inversion to intrinsic heralding efficiency
//! - [`theory`]: escape efficiency and brightness versus coupling strength
//! - [`fit`]: damped least squares plus resonance and count-sweep fitters
//! - [`synth`]: seeded synthetic data generation for validation
//! - [`io`]: CSV interchange schemas

pub mod config;
pub mod error;
pub mod fit;
pub mod io;
pub mod ring;
pub mod search;
pub mod sfwm;
pub mod synth;
pub mod theory;

pub use config::{Arm, DeviceConfig};
pub use error::{Error, ErrorClass, Result};
pub use ring::{CouplingBranch, Resonance};
pub use sfwm::{CountRow, CountSweep, SfwmParams};
pub use theory::{BrightnessVariant, TheoryCurve};
