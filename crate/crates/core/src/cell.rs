//! Transient simulation of one PUF cell: two memristive devices in series with
//! an inverter acting as a comparator at the midpoint.
//!
//! The cell's life cycle is: program both devices to LRS, ramp the drive until
//! the voltage-divider feedback flips exactly one device to HRS (extraction),
//! then read the midpoint at a small voltage and digitize it (readout).
//! Reconfiguration programs both devices back to LRS with fresh cycle-to-cycle
//! resistances, after which extraction yields a fresh, unpredictable bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DeviceState, ProgramTarget};
use crate::drive::DriveProfile;
use crate::error::{Error, Result};

/// A device is counted as switched to HRS once omega falls below this.
pub const OMEGA_OFF_TOL: f64 = 0.01;
/// A device is counted as still in LRS while omega stays above this.
pub const OMEGA_ON_TOL: f64 = 0.99;
/// Omega departure marking the onset of switching in a trace.
const ONSET_OMEGA: f64 = 0.999;
/// A losing device dragged below OMEGA_ON_TOL in a near-tie race still counts
/// as in LRS down to this floor; the cell is then flagged as a partial switch.
pub const PARTIAL_LOSER_FLOOR: f64 = 0.5;

/// Which of the two series devices is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceSlot {
    /// Device between the drive node and the midpoint.
    M1,
    /// Device between the midpoint and ground.
    M2,
}

impl std::fmt::Display for DeviceSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviceSlot::M1 => write!(f, "M1"),
            DeviceSlot::M2 => write!(f, "M2"),
        }
    }
}

/// Integration scheme for the coupled two-device transient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// Static configuration of one cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellConfig {
    pub m1: DeviceParams,
    pub m2: DeviceParams,
    /// Comparator switching threshold of the inverter (V).
    pub inverter_vth: f64,
    /// Logic-high level of the digitized response (V).
    pub v_supply: f64,
    pub extract_profile: DriveProfile,
    /// Drive applied during readout (V).
    pub readout_voltage: f64,
    pub reconfig_profile: DriveProfile,
    /// Half-width of the band around `inverter_vth` that marks a readout as marginal (V).
    pub ambiguity_band: f64,
    /// Micro-step used while a device is actively switching (s).
    pub switching_dt: f64,
}

impl CellConfig {
    /// Validates the configuration, including the non-disturbing-readout check:
    /// with both devices in LRS (the worst reachable divider for a device whose
    /// state is not clamp-protected), neither device's share of the readout
    /// drive may reach its threshold window.
    pub fn validate(&self) -> Result<()> {
        self.m1.validate()?;
        self.m2.validate()?;
        if !(self.inverter_vth > 0.0 && self.inverter_vth < self.v_supply) {
            return Err(Error::InvalidCellConfig(format!(
                "need 0 < inverter_vth < v_supply, got vth={} v_supply={}",
                self.inverter_vth, self.v_supply
            )));
        }
        if !(self.readout_voltage > 0.0) || !self.readout_voltage.is_finite() {
            return Err(Error::InvalidCellConfig(format!(
                "readout_voltage must be positive and finite, got {}",
                self.readout_voltage
            )));
        }
        if self.ambiguity_band < 0.0 {
            return Err(Error::InvalidCellConfig(format!(
                "ambiguity_band must be >= 0, got {}",
                self.ambiguity_band
            )));
        }
        let min_dt = self.extract_profile.dt().min(self.reconfig_profile.dt());
        if !(self.switching_dt > 0.0) || self.switching_dt > min_dt {
            return Err(Error::InvalidCellConfig(format!(
                "switching_dt must be in (0, dt], got {} with dt {}",
                self.switching_dt, min_dt
            )));
        }
        let total_on = self.m1.r_on_mean + self.m2.r_on_mean;
        for (name, dev, share) in [
            ("M1", &self.m1, self.m1.r_on_mean / total_on),
            ("M2", &self.m2, self.m2.r_on_mean / total_on),
        ] {
            let window = dev.v_set.min(dev.v_reset.abs());
            if share * self.readout_voltage >= window {
                return Err(Error::InvalidCellConfig(format!(
                    "readout of {} V puts {share:.3} of the drive across {name}, \
                     reaching its threshold window ({window} V)",
                    self.readout_voltage
                )));
            }
        }
        Ok(())
    }
}

/// Live state of the two devices.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CellState {
    pub m1: DeviceState,
    pub m2: DeviceState,
}

impl CellState {
    /// Both devices in LRS with cycle resistances at their device means.
    pub fn fresh(config: &CellConfig) -> Self {
        CellState {
            m1: DeviceState::fresh(&config.m1),
            m2: DeviceState::fresh(&config.m2),
        }
    }
}

/// Midpoint voltage of the series divider: `v_in * r2 / (r1 + r2)`.
#[inline]
pub fn divider_vout(state: &CellState, v_in: f64) -> f64 {
    let r1 = state.m1.resistance();
    let r2 = state.m2.resistance();
    v_in * r2 / (r1 + r2)
}

/// One sample of a transient simulation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Recorded time series of a transient simulation.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Result of a digitized readout.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Readout {
    /// 1 when the midpoint sits below the inverter threshold, else 0.
    pub bit: u8,
    /// Midpoint voltage at the readout drive (V).
    pub v_out: f64,
    /// True when `v_out` fell inside the ambiguity band around the threshold.
    pub ambiguous: bool,
}

/// Outcome of a completed extraction.
#[derive(Clone, Debug)]
pub struct ExtractionOutcome {
    pub state: CellState,
    /// Device that ended in HRS.
    pub switched: DeviceSlot,
    /// Drive voltage at which the switched device's omega first departed from 1.
    pub onset_v_in: f64,
    /// Time of that departure (s).
    pub onset_t: f64,
    /// Set when the losing device was dragged below the LRS tolerance during a
    /// near-tie race. The winner is still unambiguous and the loser's
    /// resistance stays within a factor sqrt(r_off/r_on) of LRS.
    pub partial: bool,
    pub trace: Trace,
}

/// Output of one full program -> extract -> readout cycle.
#[derive(Clone, Debug)]
pub struct CycleOutput {
    pub state: CellState,
    /// Cell state right after programming, before the extraction ramp.
    pub programmed: CellState,
    pub switched: DeviceSlot,
    pub onset_v_in: f64,
    /// See [`ExtractionOutcome::partial`].
    pub partial: bool,
    pub readout: Readout,
    pub trace: Trace,
}

/// Memoizes the resistance of one device across repeated evaluations at the
/// same omega; the transient spends most steps with both devices quiescent.
struct ResistanceCache {
    r_on: f64,
    r_off: f64,
    ln_ratio: f64,
    cached_omega: f64,
    cached_r: f64,
}

impl ResistanceCache {
    fn new(dev: &DeviceState) -> Self {
        let ln_ratio = (dev.r_on_cycle / dev.r_off_cycle).ln();
        ResistanceCache {
            r_on: dev.r_on_cycle,
            r_off: dev.r_off_cycle,
            ln_ratio,
            cached_omega: dev.omega,
            cached_r: dev.r_off_cycle * (ln_ratio * dev.omega).exp(),
        }
    }

    #[inline]
    fn at(&mut self, omega: f64) -> f64 {
        if omega != self.cached_omega {
            self.cached_omega = omega;
            self.cached_r = if omega == 1.0 {
                self.r_on
            } else if omega == 0.0 {
                self.r_off
            } else {
                self.r_off * (self.ln_ratio * omega).exp()
            };
        }
        self.cached_r
    }
}

/// Which side of the threshold window a device voltage sits on.
#[inline]
fn rate_branch(p: &DeviceParams, v: f64) -> i8 {
    if v >= p.v_set {
        1
    } else if v <= p.v_reset {
        -1
    } else {
        0
    }
}

/// Exact integral of the state rate over one step during which the device
/// voltage moves linearly from `v0` to `v1` (shares frozen, as in any explicit
/// step). The rate is piecewise linear in `v`, so splitting the step at the
/// threshold crossings and applying the trapezoid rule per branch is exact.
///
/// This is what makes switching onsets independent of the step size: a device
/// crossing its threshold mid-step accumulates the exact triangle area instead
/// of a full- or zero-step rectangle, so near-tie races between the two
/// devices resolve by true crossing order at any dt and under either scheme.
fn gated_rate_integral(p: &DeviceParams, v0: f64, v1: f64, dt: f64) -> f64 {
    let mut cuts = [0.0f64, 1.0, 1.0, 1.0];
    let mut n = 1;
    if v0 != v1 {
        for thr in [p.v_reset, p.v_set] {
            if (v0 < thr) != (v1 < thr) {
                let theta = (thr - v0) / (v1 - v0);
                if theta > 0.0 && theta < 1.0 {
                    cuts[n] = theta;
                    n += 1;
                }
            }
        }
    }
    cuts[n] = 1.0;
    n += 1;
    cuts[..n].sort_by(f64::total_cmp);

    let v_at = |theta: f64| v0 + theta * (v1 - v0);
    let mut total = 0.0;
    for i in 1..n {
        let (a, b) = (cuts[i - 1], cuts[i]);
        if b <= a {
            continue;
        }
        // the midpoint picks the branch; endpoints evaluate that branch's
        // linear rate so boundary samples stay on the correct side
        let vm = v_at(0.5 * (a + b));
        let branch_rate = |v: f64| -> f64 {
            match rate_branch(p, vm) {
                1 => p.alpha * (v - p.v_set),
                -1 => p.alpha * (v - p.v_reset),
                _ => p.beta * v,
            }
        };
        total += 0.5 * (branch_rate(v_at(a)) + branch_rate(v_at(b))) * (b - a);
    }
    total * dt
}

struct SimResult {
    omega1: f64,
    omega2: f64,
    onset: [Option<(f64, f64)>; 2],
    trace: Trace,
}

struct StepEngine<'a> {
    config: &'a CellConfig,
    profile: &'a DriveProfile,
    integrator: Integrator,
    c1: ResistanceCache,
    c2: ResistanceCache,
    w1: f64,
    w2: f64,
    onset: [Option<(f64, f64)>; 2],
    any_crossed: bool,
}

impl StepEngine<'_> {
    /// Frozen-share device voltages at both ends of `[t, t + h]`, in circuit
    /// drops: (drop1_start, drop2_start, drop1_end, drop2_end).
    fn endpoint_drops(&mut self, t: f64, h: f64) -> (f64, f64, f64, f64) {
        let v_in = self.profile.voltage_at(t);
        let v_in_next = self.profile.voltage_at(t + h);
        let r1 = self.c1.at(self.w1);
        let r2 = self.c2.at(self.w2);
        let denom = r1 + r2;
        (
            v_in * r1 / denom,
            v_in * r2 / denom,
            v_in_next * r1 / denom,
            v_in_next * r2 / denom,
        )
    }

    /// True when the frozen-share step over `[t, t + h]` would move either
    /// state variable, accounting for rail clamping.
    fn wants_motion(&mut self, t: f64, h: f64) -> bool {
        let s1 = self.config.m1.orientation.sign();
        let s2 = self.config.m2.orientation.sign();
        let (d1_0, d2_0, d1_1, d2_1) = self.endpoint_drops(t, h);
        let dw1 = gated_rate_integral(&self.config.m1, s1 * d1_0, s1 * d1_1, h);
        let dw2 = gated_rate_integral(&self.config.m2, s2 * d2_0, s2 * d2_1, h);
        (self.w1 + dw1).clamp(0.0, 1.0) != self.w1 || (self.w2 + dw2).clamp(0.0, 1.0) != self.w2
    }

    /// Advances the state over `[t, t + h]`. Errors on an exact tie.
    fn advance(&mut self, t: f64, h: f64) -> Result<()> {
        let s1 = self.config.m1.orientation.sign();
        let s2 = self.config.m2.orientation.sign();
        let (d1_0, d2_0, d1_1, d2_1) = self.endpoint_drops(t, h);
        let (vd1_0, vd1_1) = (s1 * d1_0, s1 * d1_1);
        let (vd2_0, vd2_1) = (s2 * d2_0, s2 * d2_1);

        let dw1 = gated_rate_integral(&self.config.m1, vd1_0, vd1_1, h);
        let dw2 = gated_rate_integral(&self.config.m2, vd2_0, vd2_1, h);

        if !self.any_crossed && (dw1 != 0.0 || dw2 != 0.0) {
            if dw1 != 0.0 && dw2 != 0.0 && d1_0 == d2_0 && d1_1 == d2_1 {
                return Err(Error::ExactTie);
            }
            self.any_crossed = true;
        }

        let transition = rate_branch(&self.config.m1, vd1_0) != rate_branch(&self.config.m1, vd1_1)
            || rate_branch(&self.config.m2, vd2_0) != rate_branch(&self.config.m2, vd2_1);

        match self.integrator {
            Integrator::Euler => {
                self.w1 = (self.w1 + dw1).clamp(0.0, 1.0);
                self.w2 = (self.w2 + dw2).clamp(0.0, 1.0);
            }
            Integrator::Rk4 => {
                if transition {
                    // a threshold kink sits inside this sub-step; the exact
                    // gated quadrature seeds the crossing under either scheme
                    self.w1 = (self.w1 + dw1).clamp(0.0, 1.0);
                    self.w2 = (self.w2 + dw2).clamp(0.0, 1.0);
                } else {
                    let (p1, p2) = (&self.config.m1, &self.config.m2);
                    let (c1, c2) = (&mut self.c1, &mut self.c2);
                    let profile = &self.profile;
                    let mut rates = |tau: f64, a: f64, b: f64| -> (f64, f64) {
                        let v = profile.voltage_at(tau);
                        let ra = c1.at(a.clamp(0.0, 1.0));
                        let rb = c2.at(b.clamp(0.0, 1.0));
                        let vo = v * rb / (ra + rb);
                        (p1.state_rate(s1 * (v - vo)), p2.state_rate(s2 * vo))
                    };
                    let (w1, w2) = (self.w1, self.w2);
                    let (k1a, k1b) = rates(t, w1, w2);
                    let (k2a, k2b) = rates(t + 0.5 * h, w1 + 0.5 * h * k1a, w2 + 0.5 * h * k1b);
                    let (k3a, k3b) = rates(t + 0.5 * h, w1 + 0.5 * h * k2a, w2 + 0.5 * h * k2b);
                    let (k4a, k4b) = rates(t + h, w1 + h * k3a, w2 + h * k3b);
                    self.w1 = (w1 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)).clamp(0.0, 1.0);
                    self.w2 = (w2 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)).clamp(0.0, 1.0);
                }
            }
        }

        if self.onset[0].is_none() && self.w1 < ONSET_OMEGA {
            self.onset[0] = Some((t + h, self.profile.voltage_at(t + h)));
        }
        if self.onset[1].is_none() && self.w2 < ONSET_OMEGA {
            self.onset[1] = Some((t + h, self.profile.voltage_at(t + h)));
        }
        Ok(())
    }
}

/// Fixed-step transient of the coupled cell over a drive profile, with the
/// divider recomputed every step. Outer steps in which a device is actively
/// switching are refined onto the `switching_dt` micro grid; that grid is
/// aligned in absolute time, so the race that decides the response bit is
/// integrated identically for any outer step size. Records a trace at the
/// outer steps when `record` is set.
fn simulate_profile(
    state: &CellState,
    config: &CellConfig,
    profile: &DriveProfile,
    integrator: Integrator,
    record: bool,
) -> Result<SimResult> {
    let dt = profile.dt();
    let n = profile.step_count();
    let micro_steps = (dt / config.switching_dt).round().max(1.0) as usize;
    let mut engine = StepEngine {
        config,
        profile,
        integrator,
        c1: ResistanceCache::new(&state.m1),
        c2: ResistanceCache::new(&state.m2),
        w1: state.m1.omega,
        w2: state.m2.omega,
        onset: [None, None],
        any_crossed: false,
    };
    let mut rows = Vec::with_capacity(if record { n + 1 } else { 0 });

    for k in 0..=n {
        let t = k as f64 * dt;
        if record {
            let v_in = profile.voltage_at(t);
            let r1 = engine.c1.at(engine.w1);
            let r2 = engine.c2.at(engine.w2);
            rows.push(TraceRow {
                t,
                v_in,
                v_out: v_in * r2 / (r1 + r2),
                omega1: engine.w1,
                omega2: engine.w2,
                r1,
                r2,
            });
        }
        if k == n {
            break;
        }
        // quiescent steps leave the state provably unchanged and are skipped
        if engine.wants_motion(t, dt) {
            let h = dt / micro_steps as f64;
            for j in 0..micro_steps {
                engine.advance(t + j as f64 * h, h)?;
            }
        }
    }

    Ok(SimResult {
        omega1: engine.w1,
        omega2: engine.w2,
        onset: engine.onset,
        trace: Trace { rows },
    })
}

/// Runs the extraction ramp: both devices start in LRS, the drive rises until
/// the divider feedback flips exactly one device to HRS.
pub fn extract(
    state: &CellState,
    config: &CellConfig,
    integrator: Integrator,
    record: bool,
) -> Result<ExtractionOutcome> {
    if state.m1.omega < OMEGA_ON_TOL || state.m2.omega < OMEGA_ON_TOL {
        return Err(Error::NotInLrs {
            omega1: state.m1.omega,
            omega2: state.m2.omega,
        });
    }
    let sim = simulate_profile(state, config, &config.extract_profile, integrator, record)?;
    let (w1, w2) = (sim.omega1, sim.omega2);

    let (switched, partial) = if w1 < OMEGA_OFF_TOL && w2 > OMEGA_ON_TOL {
        (DeviceSlot::M1, false)
    } else if w2 < OMEGA_OFF_TOL && w1 > OMEGA_ON_TOL {
        (DeviceSlot::M2, false)
    } else if w1 > OMEGA_ON_TOL && w2 > OMEGA_ON_TOL {
        return Err(Error::NoSwitch {
            omega1: w1,
            omega2: w2,
        });
    } else if w1 < OMEGA_OFF_TOL && w2 < OMEGA_OFF_TOL {
        return Err(Error::DoubleSwitch {
            omega1: w1,
            omega2: w2,
        });
    } else if w1 < OMEGA_OFF_TOL && w2 >= PARTIAL_LOSER_FLOOR {
        (DeviceSlot::M1, true)
    } else if w2 < OMEGA_OFF_TOL && w1 >= PARTIAL_LOSER_FLOOR {
        (DeviceSlot::M2, true)
    } else {
        return Err(Error::IncompleteSwitch {
            omega1: w1,
            omega2: w2,
        });
    };

    let (onset_t, onset_v_in) = match switched {
        DeviceSlot::M1 => sim.onset[0],
        DeviceSlot::M2 => sim.onset[1],
    }
    .unwrap_or((0.0, 0.0));

    let mut next = *state;
    next.m1.omega = w1;
    next.m2.omega = w2;
    Ok(ExtractionOutcome {
        state: next,
        switched,
        onset_v_in,
        onset_t,
        partial,
        trace: sim.trace,
    })
}

/// Digitizes a midpoint voltage through the inverting comparator.
#[inline]
pub fn digitize(v_out: f64, inverter_vth: f64) -> u8 {
    if v_out < inverter_vth {
        1
    } else {
        0
    }
}

/// Reads the cell at the readout drive. Pure: the state is untouched, so
/// repeated readouts of the same state return identical results.
pub fn readout(state: &CellState, config: &CellConfig) -> Readout {
    let v_out = divider_vout(state, config.readout_voltage);
    Readout {
        bit: digitize(v_out, config.inverter_vth),
        v_out,
        ambiguous: (v_out - config.inverter_vth).abs() < config.ambiguity_band,
    }
}

/// Programs both devices back to LRS with fresh cycle-to-cycle resistances,
/// making the cell ready for a new extraction.
pub fn reconfigure<R: Rng>(
    state: &CellState,
    config: &CellConfig,
    rng: &mut R,
) -> Result<CellState> {
    Ok(CellState {
        m1: state.m1.program(&config.m1, ProgramTarget::Set, rng)?,
        m2: state.m2.program(&config.m2, ProgramTarget::Set, rng)?,
    })
}

/// Reconfiguration with transient validation: simulates the negative SET ramp,
/// checks that both devices actually land in LRS, then applies the discrete
/// programming semantics (resample and cycle count). Returns the ramp trace.
pub fn reconfigure_transient<R: Rng>(
    state: &CellState,
    config: &CellConfig,
    integrator: Integrator,
    rng: &mut R,
    record: bool,
) -> Result<(CellState, Trace)> {
    let sim = simulate_profile(state, config, &config.reconfig_profile, integrator, record)?;
    if sim.omega1 < OMEGA_ON_TOL || sim.omega2 < OMEGA_ON_TOL {
        return Err(Error::ReconfigIncomplete {
            omega1: sim.omega1,
            omega2: sim.omega2,
        });
    }
    let mut landed = *state;
    landed.m1.omega = sim.omega1;
    landed.m2.omega = sim.omega2;
    Ok((reconfigure(&landed, config, rng)?, sim.trace))
}

/// Length of the synthetic readout hold appended to recorded cycle traces (s).
const READOUT_TRACE_HOLD: f64 = 1e-4;

/// One full cycle: program both devices to LRS, extract, read out.
pub fn run_cycle<R: Rng>(
    state: &CellState,
    config: &CellConfig,
    integrator: Integrator,
    rng: &mut R,
    record: bool,
) -> Result<CycleOutput> {
    let programmed = reconfigure(state, config, rng)?;
    let extraction = extract(&programmed, config, integrator, record)?;
    let ro = readout(&extraction.state, config);

    let mut trace = extraction.trace;
    if record {
        let dt = config.extract_profile.dt();
        let t0 = trace.rows.last().map(|r| r.t).unwrap_or(0.0);
        let r1 = extraction.state.m1.resistance();
        let r2 = extraction.state.m2.resistance();
        let steps = (READOUT_TRACE_HOLD / dt).round() as usize;
        for k in 1..=steps {
            trace.rows.push(TraceRow {
                t: t0 + k as f64 * dt,
                v_in: config.readout_voltage,
                v_out: ro.v_out,
                omega1: extraction.state.m1.omega,
                omega2: extraction.state.m2.omega,
                r1,
                r2,
            });
        }
    }

    Ok(CycleOutput {
        state: extraction.state,
        programmed,
        switched: extraction.switched,
        onset_v_in: extraction.onset_v_in,
        partial: extraction.partial,
        readout: ro,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{Polarity, DEFAULT_ENDURANCE};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_device() -> DeviceParams {
        DeviceParams {
            r_on_mean: 5e5,
            r_off_mean: 5e8,
            v_set: 1.0,
            v_reset: -1.0,
            alpha: 1e5,
            beta: 0.0,
            c2c_rel_std: 0.0,
            orientation: Polarity::Reversed,
            endurance: DEFAULT_ENDURANCE,
        }
    }

    fn test_config() -> CellConfig {
        CellConfig {
            m1: table_device(),
            m2: table_device(),
            inverter_vth: 0.5,
            v_supply: 1.0,
            extract_profile: DriveProfile::ramp_hold(2.5, 1e-3, 1e-4, 1e-7).unwrap(),
            readout_voltage: 1.0,
            reconfig_profile: DriveProfile::ramp_hold(-2.5, 1e-3, 0.0, 1e-7).unwrap(),
            ambiguity_band: 0.05,
            switching_dt: 1e-8,
        }
    }

    /// The worked cell: M1's LRS at 5e5 ohm, M2's 0.2% lower.
    fn worked_config() -> CellConfig {
        let mut c = test_config();
        c.m2.r_on_mean = 4.99e5;
        c
    }

    #[test]
    fn divider_examples() {
        let config = test_config();
        let s = CellState::fresh(&config);
        assert_relative_eq!(divider_vout(&s, 1.0), 0.5, max_relative = 1e-12);
        assert_eq!(divider_vout(&s, 0.0), 0.0);

        let mut split = s;
        split.m1.omega = 0.0; // HRS: 5e8
        split.m2.omega = 1.0; // LRS: 5e5
        assert_relative_eq!(divider_vout(&split, 1.0), 9.99000999000999e-4, max_relative = 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut c = test_config();
        assert!(c.validate().is_ok());

        c.inverter_vth = 1.5;
        assert!(c.validate().is_err());
        c.inverter_vth = 0.5;

        // readout large enough to push a both-LRS share past the threshold window
        c.readout_voltage = 2.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn extraction_worked_cell() {
        let config = worked_config();
        let state = CellState::fresh(&config);
        let out = extract(&state, &config, Integrator::Euler, true).unwrap();
        assert_eq!(out.switched, DeviceSlot::M1);
        assert!(out.state.m1.omega < OMEGA_OFF_TOL);
        assert!(out.state.m2.omega > OMEGA_ON_TOL);
        // collapse onset where the divider math predicts the first crossing
        assert!(
            (out.onset_v_in - 2.0).abs() < 0.1,
            "onset at {} V",
            out.onset_v_in
        );
        assert!(!out.trace.is_empty());
    }

    #[test]
    fn extraction_mirrored_cell() {
        let mut config = test_config();
        config.m1.r_on_mean = 4.99e5;
        let s = CellState::fresh(&config);
        let out = extract(&s, &config, Integrator::Euler, false).unwrap();
        assert_eq!(out.switched, DeviceSlot::M2);
    }

    #[test]
    fn extraction_trace_invariants() {
        // omegas non-increasing, v_out bounded by the drive, and the winner's
        // voltage share strictly grows while it is switching
        let config = worked_config();
        let state = CellState::fresh(&config);
        let out = extract(&state, &config, Integrator::Euler, true).unwrap();
        let rows = &out.trace.rows;
        for pair in rows.windows(2) {
            assert!(pair[1].omega1 <= pair[0].omega1 + 1e-15);
            assert!(pair[1].omega2 <= pair[0].omega2 + 1e-15);
        }
        for r in rows {
            assert!(r.v_out >= 0.0 && r.v_out <= r.v_in + 1e-12);
        }
        let mut prev_share: Option<(f64, f64)> = None;
        for pair in rows.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let moving = b.omega1 < a.omega1 && a.omega1 > 0.0 && a.omega1 < 1.0;
            if moving && a.v_in > 0.0 && b.v_in > 0.0 {
                let share1 = |r: &TraceRow| (r.v_in - r.v_out) / r.v_in;
                let share2 = |r: &TraceRow| r.v_out / r.v_in;
                if let Some((p1, p2)) = prev_share {
                    assert!(share1(&b) > p1, "winner share must grow at t={}", b.t);
                    assert!(share2(&b) < p2, "loser share must shrink at t={}", b.t);
                }
                prev_share = Some((share1(&b), share2(&b)));
            }
        }
        assert!(prev_share.is_some(), "switching window never observed");
    }

    #[test]
    fn extraction_requires_lrs_start() {
        let config = test_config();
        let mut s = CellState::fresh(&config);
        s.m1.omega = 0.0;
        assert!(matches!(
            extract(&s, &config, Integrator::Euler, false),
            Err(Error::NotInLrs { .. })
        ));
    }

    #[test]
    fn extraction_no_switch_on_weak_ramp() {
        let mut config = worked_config();
        config.extract_profile = DriveProfile::ramp_hold(1.0, 1e-3, 1e-4, 1e-7).unwrap();
        let state = CellState::fresh(&config);
        let err = extract(&state, &config, Integrator::Euler, false).unwrap_err();
        assert!(matches!(err, Error::NoSwitch { .. }));
    }

    #[test]
    fn perfectly_matched_cell_is_degenerate() {
        let config = test_config();
        let s = CellState::fresh(&config); // identical resistances and thresholds
        let err = extract(&s, &config, Integrator::Euler, false).unwrap_err();
        assert!(matches!(err, Error::ExactTie));
    }

    #[test]
    fn readout_examples() {
        let config = test_config();
        let mut s = CellState::fresh(&config);
        s.m1.omega = 0.0; // M1 HRS / M2 LRS
        let ro = readout(&s, &config);
        assert_eq!(ro.bit, 1);
        assert!(ro.v_out < 0.01);
        assert!(!ro.ambiguous);

        s.m1.omega = 1.0;
        s.m2.omega = 0.0; // roles swapped
        let ro = readout(&s, &config);
        assert_eq!(ro.bit, 0);
        assert!(ro.v_out > 0.99);

        // repeatability and state invariance
        let before = s;
        let a = readout(&s, &config);
        let b = readout(&s, &config);
        assert_eq!(a.bit, b.bit);
        assert_eq!(a.v_out, b.v_out);
        assert_eq!(s.m1.omega, before.m1.omega);
        assert_eq!(s.m2.omega, before.m2.omega);
    }

    #[test]
    fn run_cycle_worked_cell_gives_one() {
        let config = worked_config();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // zero c2c keeps the worked resistances through the programming step
        let state = CellState::fresh(&config);
        let out = run_cycle(&state, &config, Integrator::Euler, &mut rng, false).unwrap();
        assert_eq!(out.readout.bit, 1);
        assert_eq!(out.switched, DeviceSlot::M1);
    }

    #[test]
    fn reconfigure_zero_c2c_repeats_the_bit() {
        let config = worked_config();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s0 = CellState::fresh(&config);
        let first = run_cycle(&s0, &config, Integrator::Euler, &mut rng, false).unwrap();
        let second =
            run_cycle(&first.state, &config, Integrator::Euler, &mut rng, false).unwrap();
        assert_eq!(first.readout.bit, second.readout.bit);
        assert_eq!(first.readout.v_out, second.readout.v_out);
    }

    #[test]
    fn reconfigure_transient_lands_both_in_lrs() {
        let config = worked_config();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s0 = CellState::fresh(&config);
        let extracted = extract(&s0, &config, Integrator::Euler, false).unwrap();
        let (reset, trace) =
            reconfigure_transient(&extracted.state, &config, Integrator::Euler, &mut rng, true)
                .unwrap();
        assert_eq!(reset.m1.omega, 1.0);
        assert_eq!(reset.m2.omega, 1.0);
        assert_eq!(reset.m1.program_cycle_count, 1);
        assert!(!trace.is_empty());
    }

    #[test]
    fn endurance_propagates_through_reconfigure() {
        let mut config = worked_config();
        config.m1.endurance = 2;
        config.m2.endurance = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = CellState::fresh(&config);
        for _ in 0..2 {
            s = reconfigure(&s, &config, &mut rng).unwrap();
        }
        assert!(matches!(
            reconfigure(&s, &config, &mut rng),
            Err(Error::EnduranceExceeded { .. })
        ));
    }

    #[test]
    fn bit_invariant_under_dt_halving_and_scheme_swap() {
        let mut config = worked_config();
        let state = CellState::fresh(&config);
        let base =
            run_cycle(&state, &config, Integrator::Euler, &mut ChaCha8Rng::seed_from_u64(5), false)
                .unwrap();
        config.extract_profile = config.extract_profile.with_dt(5e-8).unwrap();
        let halved =
            run_cycle(&state, &config, Integrator::Euler, &mut ChaCha8Rng::seed_from_u64(5), false)
                .unwrap();
        let config = worked_config();
        let rk4 =
            run_cycle(&state, &config, Integrator::Rk4, &mut ChaCha8Rng::seed_from_u64(5), false)
                .unwrap();
        assert_eq!(base.readout.bit, halved.readout.bit);
        assert_eq!(base.readout.bit, rk4.readout.bit);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn divider_output_stays_within_drive(
            w1 in 0.0f64..1.0,
            w2 in 0.0f64..1.0,
            v_in in 0.0f64..3.0,
        ) {
            let config = test_config();
            let mut s = CellState::fresh(&config);
            s.m1.omega = w1;
            s.m2.omega = w2;
            let v = divider_vout(&s, v_in);
            prop_assert!(v >= 0.0 && v <= v_in);
        }
    }
}
