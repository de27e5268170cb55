//! Piecewise-linear applied-voltage waveforms with fixed-step time discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A piecewise-linear `V_in(t)` defined by `(time, voltage)` breakpoints plus the
/// integration timestep used when simulating against it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriveProfile {
    breakpoints: Vec<(f64, f64)>,
    dt: f64,
}

impl DriveProfile {
    /// Builds a profile, validating that times start at 0 and strictly increase
    /// and that `dt` resolves the shortest segment at least tenfold.
    pub fn new(breakpoints: Vec<(f64, f64)>, dt: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidProfile("no breakpoints".into()));
        }
        if breakpoints[0].0 != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "first breakpoint must be at t=0, got t={}",
                breakpoints[0].0
            )));
        }
        for pair in breakpoints.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::InvalidProfile(format!(
                    "breakpoint times must strictly increase, got {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(t, v) in &breakpoints {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "non-finite breakpoint ({t}, {v})"
                )));
            }
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidProfile(format!("dt must be positive, got {dt}")));
        }
        let shortest = breakpoints
            .windows(2)
            .map(|p| p[1].0 - p[0].0)
            .fold(f64::INFINITY, f64::min);
        if shortest.is_finite() && dt > shortest / 10.0 {
            return Err(Error::InvalidProfile(format!(
                "dt={dt} too coarse for shortest segment {shortest} (need dt <= segment/10)"
            )));
        }
        Ok(DriveProfile { breakpoints, dt })
    }

    /// Linear ramp 0 -> `peak` over `ramp_s`, then hold at `peak` for `hold_s`.
    pub fn ramp_hold(peak: f64, ramp_s: f64, hold_s: f64, dt: f64) -> Result<Self> {
        let mut pts = vec![(0.0, 0.0), (ramp_s, peak)];
        if hold_s > 0.0 {
            pts.push((ramp_s + hold_s, peak));
        }
        Self::new(pts, dt)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Returns a copy with a different timestep (revalidated).
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.breakpoints.clone(), dt)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// End time of the waveform.
    pub fn duration(&self) -> f64 {
        self.breakpoints.last().map(|&(t, _)| t).unwrap_or(0.0)
    }

    /// Largest absolute voltage over the waveform.
    pub fn peak_magnitude(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Number of fixed steps covering the duration.
    pub fn step_count(&self) -> usize {
        (self.duration() / self.dt).round() as usize
    }

    /// Interpolated voltage at time `t`, clamped to the waveform's time span.
    pub fn voltage_at(&self, t: f64) -> f64 {
        let pts = &self.breakpoints;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= self.duration() {
            return pts[pts.len() - 1].1;
        }
        // segment count is small; linear scan beats binary search here
        for pair in pts.windows(2) {
            let (t0, v0) = pair[0];
            let (t1, v1) = pair[1];
            if t <= t1 {
                let f = (t - t0) / (t1 - t0);
                return v0 + f * (v1 - v0);
            }
        }
        pts[pts.len() - 1].1
    }
}
