//! Behavioral model of a single bipolar memristive device.
//!
//! The device carries a dimensionless state variable `omega` in `[0, 1]` that
//! interpolates its resistance between a high-resistance state (`omega = 0`)
//! and a low-resistance state (`omega = 1`). State motion is threshold-gated:
//! the device only moves when the voltage across it exceeds `v_set` (drives
//! toward LRS) or falls below `v_reset` (drives toward HRS). Programming is a
//! discrete operation that pins `omega` to a rail and resamples the effective
//! per-cycle resistance, modeling cycle-to-cycle variation.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default programming-cycle budget before the read margin is considered degraded.
pub const DEFAULT_ENDURANCE: u64 = 100_000;

/// Sign convention mapping a circuit-node voltage drop to the device's own frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Device frame equals circuit frame.
    Forward,
    /// Device frame is the negated circuit drop (top electrode toward ground).
    Reversed,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Forward => 1.0,
            Polarity::Reversed => -1.0,
        }
    }
}

/// Programming direction for [`DeviceState::program`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgramTarget {
    /// Drive to the low-resistance state (`omega = 1`).
    Set,
    /// Drive to the high-resistance state (`omega = 0`).
    Reset,
}

/// Sampled, per-device parameters. Fixed for the lifetime of the device.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Device-to-device mean of the low-resistance state (ohm).
    pub r_on_mean: f64,
    /// Device-to-device mean of the high-resistance state (ohm).
    pub r_off_mean: f64,
    /// SET threshold voltage (V, positive).
    pub v_set: f64,
    /// RESET threshold voltage (V, negative).
    pub v_reset: f64,
    /// Switching rate above threshold (V^-1 s^-1).
    pub alpha: f64,
    /// Sub-threshold rate (V^-1 s^-1); zero disables sub-threshold drift.
    pub beta: f64,
    /// Relative std of the lognormal cycle-to-cycle resample factor.
    pub c2c_rel_std: f64,
    /// Maps the circuit voltage drop into the device frame.
    pub orientation: Polarity,
    /// Programming-cycle budget.
    pub endurance: u64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_on_mean > 0.0 && self.r_off_mean > self.r_on_mean) {
            return Err(Error::InvalidDeviceParams(format!(
                "need r_off_mean > r_on_mean > 0, got r_on_mean={} r_off_mean={}",
                self.r_on_mean, self.r_off_mean
            )));
        }
        if !(self.v_set > 0.0) || !(self.v_reset < 0.0) {
            return Err(Error::InvalidDeviceParams(format!(
                "need v_set > 0 and v_reset < 0, got v_set={} v_reset={}",
                self.v_set, self.v_reset
            )));
        }
        if !(self.alpha > 0.0) || self.beta < 0.0 {
            return Err(Error::InvalidDeviceParams(format!(
                "need alpha > 0 and beta >= 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.c2c_rel_std < 0.0 {
            return Err(Error::InvalidDeviceParams(format!(
                "c2c_rel_std must be >= 0, got {}",
                self.c2c_rel_std
            )));
        }
        if self.endurance == 0 {
            return Err(Error::InvalidDeviceParams(
                "endurance must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Time derivative of the state variable for a device-frame voltage `v_device`.
    ///
    /// Zero inside the open threshold window when `beta` is zero, and continuous
    /// at both thresholds since each branch vanishes there.
    #[inline]
    pub fn state_rate(&self, v_device: f64) -> f64 {
        if v_device >= self.v_set {
            self.alpha * (v_device - self.v_set)
        } else if v_device <= self.v_reset {
            self.alpha * (v_device - self.v_reset)
        } else {
            self.beta * v_device
        }
    }
}

/// Live state of one device: the state variable plus this cycle's effective resistances.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeviceState {
    /// State variable in `[0, 1]`; 0 = HRS, 1 = LRS.
    pub omega: f64,
    /// Effective low-resistance value for the current programming cycle (ohm).
    pub r_on_cycle: f64,
    /// Effective high-resistance value for the current programming cycle (ohm).
    pub r_off_cycle: f64,
    /// Number of programming operations applied so far.
    pub program_cycle_count: u64,
}

impl DeviceState {
    /// Fresh device in the low-resistance state with cycle resistances at the given values.
    pub fn new_lrs(r_on_cycle: f64, r_off_cycle: f64) -> Self {
        DeviceState {
            omega: 1.0,
            r_on_cycle,
            r_off_cycle,
            program_cycle_count: 0,
        }
    }

    /// Fresh device in LRS with cycle resistances at the device means.
    pub fn fresh(params: &DeviceParams) -> Self {
        Self::new_lrs(params.r_on_mean, params.r_off_mean)
    }

    /// Instantaneous resistance `r_off * (r_on / r_off)^omega`.
    ///
    /// Equals `r_off_cycle` at `omega = 0` and `r_on_cycle` at `omega = 1`.
    #[inline]
    pub fn resistance(&self) -> f64 {
        resistance_at(self.omega, self.r_on_cycle, self.r_off_cycle)
    }

    /// One forward-Euler step of the state variable under a fixed device-frame
    /// voltage, with the result clamped into `[0, 1]`.
    pub fn integrate_step(&self, params: &DeviceParams, v_device: f64, dt: f64) -> Result<Self> {
        if !v_device.is_finite() {
            return Err(Error::NonFinite {
                what: "device voltage",
                value: v_device,
            });
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::NonFinite {
                what: "timestep",
                value: dt,
            });
        }
        let mut next = *self;
        next.omega = (self.omega + params.state_rate(v_device) * dt).clamp(0.0, 1.0);
        Ok(next)
    }

    /// Discrete programming operation: pins `omega` to the target rail and
    /// resamples that rail's per-cycle resistance around the device mean,
    /// modeling cycle-to-cycle variation. Counts against the endurance budget.
    pub fn program<R: Rng>(
        &self,
        params: &DeviceParams,
        target: ProgramTarget,
        rng: &mut R,
    ) -> Result<Self> {
        if self.program_cycle_count >= params.endurance {
            return Err(Error::EnduranceExceeded {
                cycles: self.program_cycle_count,
                limit: params.endurance,
            });
        }
        let mut next = *self;
        match target {
            ProgramTarget::Set => {
                next.omega = 1.0;
                next.r_on_cycle = params.r_on_mean * c2c_factor(params.c2c_rel_std, rng);
            }
            ProgramTarget::Reset => {
                next.omega = 0.0;
                next.r_off_cycle = params.r_off_mean * c2c_factor(params.c2c_rel_std, rng);
            }
        }
        next.program_cycle_count += 1;
        Ok(next)
    }
}

#[inline]
pub(crate) fn resistance_at(omega: f64, r_on: f64, r_off: f64) -> f64 {
    r_off * (r_on / r_off).powf(omega)
}

/// Multiplicative cycle-to-cycle factor: lognormal with unit mean and the given
/// relative standard deviation.
fn c2c_factor<R: Rng>(rel_std: f64, rng: &mut R) -> f64 {
    if rel_std == 0.0 {
        return 1.0;
    }
    let sigma2 = (1.0 + rel_std * rel_std).ln();
    let dist = LogNormal::new(-0.5 * sigma2, sigma2.sqrt())
        .expect("lognormal parameters are finite by construction");
    dist.sample(rng)
}
