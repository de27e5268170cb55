//! Closed-form predictors used to cross-check the transient simulation and the
//! noise model. These never touch the integrator: they are derived directly
//! from the divider algebra and the sampling distributions, so they stay an
//! independent route to the same answers.

use crate::cell::{CellConfig, CellState, DeviceSlot};

/// Relative score gap below which a cell is flagged as a near-tie; such cells
/// may legitimately resolve either way in the transient.
pub const NEAR_TIE_REL_GAP: f64 = 1e-4;

/// Prediction of which device switches first during extraction.
#[derive(Clone, Copy, Debug)]
pub struct SwitchPrediction {
    pub winner: DeviceSlot,
    /// Relative gap between the two devices' first-crossing scores.
    pub rel_gap: f64,
    pub near_tie: bool,
}

/// First-to-threshold predictor. With both devices in LRS the divider shares
/// are proportional to the resistances, so device `i` reaches its RESET
/// threshold at drive `|v_reset_i| * (r1 + r2) / r_i`; the device with the
/// larger `r_i / |v_reset_i|` crosses first and ends in HRS.
pub fn predict_first_switch(state: &CellState, config: &CellConfig) -> SwitchPrediction {
    let score1 = state.m1.r_on_cycle / config.m1.v_reset.abs();
    let score2 = state.m2.r_on_cycle / config.m2.v_reset.abs();
    let winner = if score1 >= score2 {
        DeviceSlot::M1
    } else {
        DeviceSlot::M2
    };
    let rel_gap = (score1 - score2).abs() / score1.max(score2);
    SwitchPrediction {
        winner,
        rel_gap,
        near_tie: rel_gap < NEAR_TIE_REL_GAP,
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that M1 wins a fresh extraction after both devices are
/// reprogrammed with lognormal cycle-to-cycle factors of relative std
/// `c2c_rel_std` around their device means.
///
/// The log of the score ratio is normal with the fixed device-to-device offset
/// as mean and twice the c2c log-variance, hence a probit form.
pub fn m1_win_probability(config: &CellConfig, c2c_rel_std: f64) -> f64 {
    let offset = (config.m1.r_on_mean / config.m1.v_reset.abs()).ln()
        - (config.m2.r_on_mean / config.m2.v_reset.abs()).ln();
    if c2c_rel_std == 0.0 {
        return if offset > 0.0 {
            1.0
        } else if offset < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let sigma_ln = (1.0 + c2c_rel_std * c2c_rel_std).ln().sqrt();
    normal_cdf(offset / (sigma_ln * std::f64::consts::SQRT_2))
}

/// Probability that a cell's bit differs between two consecutive epochs: the
/// winner is redrawn independently each epoch, so a flip happens with
/// probability `2 q (1 - q)` where `q` is the per-epoch M1 win probability.
pub fn epoch_flip_probability(config: &CellConfig, c2c_rel_std: f64) -> f64 {
    let q = m1_win_probability(config, c2c_rel_std);
    2.0 * q * (1.0 - q)
}

/// Expected mean inter-epoch Hamming distance over a population of cells.
pub fn expected_reconfig_distance<'a, I>(cells: I, c2c_rel_std: f64) -> f64
where
    I: IntoIterator<Item = &'a CellConfig>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for config in cells {
        sum += epoch_flip_probability(config, c2c_rel_std);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Probability that gaussian readout noise of std `sigma` flips one digitized
/// readout relative to the noiseless bit.
pub fn readout_flip_probability(v_out: f64, inverter_vth: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    normal_cdf(-(v_out - inverter_vth).abs() / sigma)
}

/// Expected reliability under readout noise, with the repetition-0 reference
/// itself noisy: two independent readouts disagree with probability
/// `2 p (1 - p)` per cell.
pub fn expected_noisy_reliability<'a, I>(cells: I, sigma: f64) -> f64
where
    I: IntoIterator<Item = &'a (f64, f64)>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(v_out, vth) in cells {
        let p = readout_flip_probability(v_out, vth, sigma);
        sum += 2.0 * p * (1.0 - p);
        n += 1;
    }
    if n == 0 {
        1.0
    } else {
        1.0 - sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellConfig;
    use crate::device::{DeviceParams, Polarity, DEFAULT_ENDURANCE};
    use crate::drive::DriveProfile;
    use approx::assert_relative_eq;

    fn config(r_on1: f64, r_on2: f64, vr1: f64, vr2: f64) -> CellConfig {
        let dev = |r_on: f64, v_reset: f64| DeviceParams {
            r_on_mean: r_on,
            r_off_mean: 5e8,
            v_set: 1.0,
            v_reset,
            alpha: 1e5,
            beta: 0.0,
            c2c_rel_std: 0.05,
            orientation: Polarity::Reversed,
            endurance: DEFAULT_ENDURANCE,
        };
        CellConfig {
            m1: dev(r_on1, vr1),
            m2: dev(r_on2, vr2),
            inverter_vth: 0.5,
            v_supply: 1.0,
            extract_profile: DriveProfile::ramp_hold(2.5, 1e-3, 1e-4, 1e-7).unwrap(),
            readout_voltage: 1.0,
            reconfig_profile: DriveProfile::ramp_hold(-2.5, 1e-3, 0.0, 1e-7).unwrap(),
            ambiguity_band: 0.05,
            switching_dt: 1e-8,
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-12);
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, max_relative = 1e-9);
        assert_relative_eq!(normal_cdf(-2.5), 0.006209665325776132, max_relative = 1e-9);
    }

    #[test]
    fn predictor_follows_score_ratio() {
        let cfg = config(5e5, 4.99e5, -1.0, -1.0);
        let state = CellState::fresh(&cfg);
        let p = predict_first_switch(&state, &cfg);
        assert_eq!(p.winner, DeviceSlot::M1);
        assert!(!p.near_tie);

        // a lower reset threshold magnitude can out-rank a larger resistance
        let cfg = config(5e5, 4.99e5, -1.0, -0.9);
        let state = CellState::fresh(&cfg);
        let p = predict_first_switch(&state, &cfg);
        assert_eq!(p.winner, DeviceSlot::M2);
    }

    #[test]
    fn symmetric_cell_flips_half_the_time() {
        let cfg = config(5e5, 5e5, -1.0, -1.0);
        assert_relative_eq!(m1_win_probability(&cfg, 0.05), 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            epoch_flip_probability(&cfg, 0.05),
            0.5,
            max_relative = 1e-12
        );
        // no c2c: deterministic repeat
        assert_eq!(epoch_flip_probability(&config(5e5, 4.9e5, -1.0, -1.0), 0.0), 0.0);
    }

    #[test]
    fn noise_oracle_limits() {
        assert_eq!(readout_flip_probability(0.001, 0.5, 0.0), 0.0);
        let p = readout_flip_probability(0.001, 0.5, 0.2);
        assert_relative_eq!(p, normal_cdf(-0.499 / 0.2), max_relative = 1e-12);
        let rel = expected_noisy_reliability([(0.001, 0.5)].iter(), 0.2);
        assert_relative_eq!(rel, 1.0 - 2.0 * p * (1.0 - p), max_relative = 1e-12);
    }
}
