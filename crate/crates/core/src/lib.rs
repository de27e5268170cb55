//! Numerical simulator and evaluation toolkit for a reconfigurable
//! memristive-cell PUF.
//!
//! The crate models threshold-gated bipolar memristive devices, simulates the
//! two-device series cell through its extraction, readout and reconfiguration
//! procedures under Monte-Carlo process and cycle-to-cycle variation, and
//! computes standard PUF quality metrics over seeded, reproducible campaigns.
//!
//! Typical use:
//!
//! ```
//! use r3puf::campaign::{run_campaign, CampaignConfig};
//!
//! let config = CampaignConfig {
//!     cells_per_chip: 32,
//!     readout_repetitions: 3,
//!     ..CampaignConfig::default()
//! };
//! let result = run_campaign(&config).unwrap();
//! assert!(result.report.uniformity >= 0.0 && result.report.uniformity <= 1.0);
//! ```

pub mod campaign;
pub mod cell;
pub mod device;
pub mod drive;
mod error;
pub mod metrics;
pub mod oracle;
pub mod population;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
