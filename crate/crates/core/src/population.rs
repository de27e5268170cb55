//! Monte-Carlo generation of device populations and chips.
//!
//! Device-to-device spread is drawn once per device from the configured
//! distributions; the inverter's comparator threshold is derived from the
//! transistor geometry spread through a documented sensitivity constant.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::cell::CellConfig;
use crate::device::{DeviceParams, Polarity};
use crate::drive::DriveProfile;
use crate::error::{Error, Result};
use crate::rng::{cell_stream, StreamLane};

/// Cap on rejection-resampling attempts before the sampler gives up.
const MAX_SAMPLE_ATTEMPTS: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Lognormal,
    Gaussian,
}

/// One sampled parameter: mean, relative standard deviation, distribution shape.
///
/// The relative std is that of the sampled value itself (for lognormal, the
/// underlying normal is parameterized so the value-space mean and relative std
/// match exactly).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ParamDist {
    pub mean: f64,
    pub rel_std: f64,
    pub dist: DistKind,
}

impl ParamDist {
    pub fn new(mean: f64, rel_std: f64, dist: DistKind) -> Self {
        ParamDist {
            mean,
            rel_std,
            dist,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.rel_std == 0.0 {
            return self.mean;
        }
        match self.dist {
            DistKind::Lognormal => {
                let sigma2 = (1.0 + self.rel_std * self.rel_std).ln();
                let mu = self.mean.abs().ln() - 0.5 * sigma2;
                let v = LogNormal::new(mu, sigma2.sqrt())
                    .expect("finite lognormal parameters")
                    .sample(rng);
                if self.mean < 0.0 {
                    -v
                } else {
                    v
                }
            }
            DistKind::Gaussian => Normal::new(self.mean, self.mean.abs() * self.rel_std)
                .expect("finite gaussian parameters")
                .sample(rng),
        }
    }
}

/// Distribution descriptors for the device population and the inverter proxy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationSpec {
    pub r_on: ParamDist,
    pub r_off: ParamDist,
    pub v_set: ParamDist,
    pub v_reset: ParamDist,
    pub transistor_length: ParamDist,
    pub transistor_width: ParamDist,
    /// Relative std of the per-programming-cycle resistance resample.
    pub c2c_rel_std: f64,
    /// Comparator threshold with no geometry mismatch (V).
    pub vth_nominal: f64,
    /// Sensitivity of the comparator threshold to the relative W/L deviation.
    pub vth_sensitivity: f64,
    /// Sampled threshold magnitudes are rejected below this floor (V).
    pub threshold_floor: f64,
}

impl Default for VariationSpec {
    fn default() -> Self {
        VariationSpec {
            r_on: ParamDist::new(5e5, 0.05, DistKind::Lognormal),
            r_off: ParamDist::new(5e8, 0.05, DistKind::Lognormal),
            v_set: ParamDist::new(1.0, 0.05, DistKind::Gaussian),
            v_reset: ParamDist::new(-1.0, 0.05, DistKind::Gaussian),
            transistor_length: ParamDist::new(120e-9, 0.05, DistKind::Gaussian),
            transistor_width: ParamDist::new(90e-9, 0.05, DistKind::Gaussian),
            c2c_rel_std: 0.05,
            vth_nominal: 0.5,
            vth_sensitivity: 0.4,
            threshold_floor: 0.2,
        }
    }
}

impl VariationSpec {
    /// All device-to-device relative stds set to zero: only cycle-to-cycle
    /// variation remains active. Isolates the reconfiguration entropy source.
    pub fn c2c_only(c2c_rel_std: f64) -> Self {
        let mut spec = VariationSpec::default();
        spec.r_on.rel_std = 0.0;
        spec.r_off.rel_std = 0.0;
        spec.v_set.rel_std = 0.0;
        spec.v_reset.rel_std = 0.0;
        spec.transistor_length.rel_std = 0.0;
        spec.transistor_width.rel_std = 0.0;
        spec.c2c_rel_std = c2c_rel_std;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("r_on", &self.r_on),
            ("r_off", &self.r_off),
            ("v_set", &self.v_set),
            ("v_reset", &self.v_reset),
            ("transistor_length", &self.transistor_length),
            ("transistor_width", &self.transistor_width),
        ] {
            if p.rel_std < 0.0 || !p.rel_std.is_finite() {
                return Err(Error::InvalidVariationSpec(format!(
                    "{name}.rel_std must be >= 0, got {}",
                    p.rel_std
                )));
            }
            if !p.mean.is_finite() {
                return Err(Error::InvalidVariationSpec(format!(
                    "{name}.mean must be finite"
                )));
            }
        }
        // resistances keep lognormal support, voltages and geometry gaussian
        for (name, p) in [("r_on", &self.r_on), ("r_off", &self.r_off)] {
            if p.dist != DistKind::Lognormal {
                return Err(Error::InvalidVariationSpec(format!(
                    "{name} must be lognormal"
                )));
            }
            if p.mean <= 0.0 {
                return Err(Error::InvalidVariationSpec(format!(
                    "{name}.mean must be positive"
                )));
            }
        }
        for (name, p) in [
            ("v_set", &self.v_set),
            ("v_reset", &self.v_reset),
            ("transistor_length", &self.transistor_length),
            ("transistor_width", &self.transistor_width),
        ] {
            if p.dist != DistKind::Gaussian {
                return Err(Error::InvalidVariationSpec(format!(
                    "{name} must be gaussian"
                )));
            }
        }
        if self.r_off.mean <= self.r_on.mean {
            return Err(Error::InvalidVariationSpec(format!(
                "r_off mean ({}) must exceed r_on mean ({})",
                self.r_off.mean, self.r_on.mean
            )));
        }
        if self.v_set.mean <= 0.0 || self.v_reset.mean >= 0.0 {
            return Err(Error::InvalidVariationSpec(
                "v_set mean must be positive and v_reset mean negative".into(),
            ));
        }
        if self.c2c_rel_std < 0.0 || !self.c2c_rel_std.is_finite() {
            return Err(Error::InvalidVariationSpec(format!(
                "c2c_rel_std must be >= 0, got {}",
                self.c2c_rel_std
            )));
        }
        if !(self.threshold_floor > 0.0) {
            return Err(Error::InvalidVariationSpec(
                "threshold_floor must be positive".into(),
            ));
        }
        if self.threshold_floor >= self.v_set.mean.min(self.v_reset.mean.abs()) {
            return Err(Error::InvalidVariationSpec(
                "threshold_floor must sit below the threshold means".into(),
            ));
        }
        if !(self.vth_nominal > 0.0) || self.vth_sensitivity < 0.0 {
            return Err(Error::InvalidVariationSpec(
                "need vth_nominal > 0 and vth_sensitivity >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Non-sampled per-cell simulation settings shared by every cell of a campaign.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CellSettings {
    /// Switching rate above threshold (V^-1 s^-1).
    pub alpha: f64,
    /// Sub-threshold rate (V^-1 s^-1).
    pub beta: f64,
    /// Programming-cycle budget per device.
    pub endurance: u64,
    /// Readout drive (V).
    pub readout_voltage: f64,
    /// Logic-high level; also the inverter supply (V).
    pub v_supply: f64,
    /// Half-width of the marginal-readout band (V).
    pub ambiguity_band: f64,
    /// Integration timestep (s).
    pub dt: f64,
    /// Micro-step used while a device is actively switching (s).
    pub switching_dt: f64,
    /// Extraction ramp target (V).
    pub extract_peak: f64,
    /// Extraction ramp duration (s).
    pub extract_ramp_s: f64,
    /// Extraction hold duration at the peak (s).
    pub extract_hold_s: f64,
    /// Reconfiguration ramp target (V); mirror of the extraction ramp.
    pub reconfig_peak: f64,
    /// Reconfiguration ramp duration (s).
    pub reconfig_ramp_s: f64,
    pub integrator: crate::cell::Integrator,
}

impl Default for CellSettings {
    fn default() -> Self {
        CellSettings {
            alpha: 1e5,
            beta: 0.0,
            endurance: crate::device::DEFAULT_ENDURANCE,
            readout_voltage: 1.0,
            v_supply: 1.0,
            ambiguity_band: 0.05,
            dt: 1e-7,
            switching_dt: 1e-8,
            extract_peak: 2.5,
            extract_ramp_s: 1e-3,
            extract_hold_s: 1e-4,
            reconfig_peak: -2.5,
            reconfig_ramp_s: 1e-3,
            integrator: crate::cell::Integrator::Euler,
        }
    }
}

impl CellSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.beta < 0.0 {
            return Err(Error::InvalidVariationSpec(format!(
                "need alpha > 0 and beta >= 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.endurance == 0 {
            return Err(Error::InvalidVariationSpec("endurance must be >= 1".into()));
        }
        self.extract_profile()?;
        self.reconfig_profile()?;
        if self.extract_peak <= 0.0 || self.reconfig_peak >= 0.0 {
            return Err(Error::InvalidVariationSpec(
                "extract_peak must be positive and reconfig_peak negative".into(),
            ));
        }
        if !(self.switching_dt > 0.0) || self.switching_dt > self.dt {
            return Err(Error::InvalidVariationSpec(format!(
                "switching_dt must be in (0, dt], got {}",
                self.switching_dt
            )));
        }
        Ok(())
    }

    pub fn extract_profile(&self) -> Result<DriveProfile> {
        DriveProfile::ramp_hold(
            self.extract_peak,
            self.extract_ramp_s,
            self.extract_hold_s,
            self.dt,
        )
    }

    pub fn reconfig_profile(&self) -> Result<DriveProfile> {
        DriveProfile::ramp_hold(self.reconfig_peak, self.reconfig_ramp_s, 0.0, self.dt)
    }
}

/// Identity of one chip within a campaign.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChipSpec {
    pub chip_id: u32,
    pub n_cells: u32,
    pub master_seed: u64,
}

/// Counters from rejection sampling and clamping during a build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    /// Device draws rejected for violating r_off > r_on.
    pub ordering_rejections: u64,
    /// Threshold draws rejected below the magnitude floor.
    pub floor_rejections: u64,
    /// Inverter thresholds clamped into the valid comparator range.
    pub vth_clamps: u64,
}

impl SampleStats {
    pub fn absorb(&mut self, other: SampleStats) {
        self.ordering_rejections += other.ordering_rejections;
        self.floor_rejections += other.floor_rejections;
        self.vth_clamps += other.vth_clamps;
    }
}

/// Draws one device's parameters. Resistance pairs violating r_off > r_on and
/// threshold magnitudes below the floor are rejected and redrawn.
pub fn sample_device<R: Rng>(
    var: &VariationSpec,
    settings: &CellSettings,
    rng: &mut R,
) -> Result<(DeviceParams, SampleStats)> {
    let mut stats = SampleStats::default();

    let (r_on_mean, r_off_mean) = {
        let mut attempts = 0;
        loop {
            let on = var.r_on.sample(rng);
            let off = var.r_off.sample(rng);
            if off > on {
                break (on, off);
            }
            stats.ordering_rejections += 1;
            attempts += 1;
            if attempts >= MAX_SAMPLE_ATTEMPTS {
                return Err(Error::SamplerStuck {
                    what: "resistance pair",
                    attempts,
                });
            }
        }
    };

    let mut draw_threshold = |p: &ParamDist, what: &'static str| -> Result<f64> {
        let mut attempts = 0;
        loop {
            let v = p.sample(rng);
            if v.abs() >= var.threshold_floor && v * p.mean > 0.0 {
                return Ok(v);
            }
            stats.floor_rejections += 1;
            attempts += 1;
            if attempts >= MAX_SAMPLE_ATTEMPTS {
                return Err(Error::SamplerStuck { what, attempts });
            }
        }
    };
    let v_set = draw_threshold(&var.v_set, "v_set")?;
    let v_reset = draw_threshold(&var.v_reset, "v_reset")?;

    let params = DeviceParams {
        r_on_mean,
        r_off_mean,
        v_set,
        v_reset,
        alpha: settings.alpha,
        beta: settings.beta,
        c2c_rel_std: var.c2c_rel_std,
        orientation: Polarity::Reversed,
        endurance: settings.endurance,
    };
    params.validate()?;
    Ok((params, stats))
}

/// Draws the comparator threshold from the transistor geometry spread:
/// `vth = vth_nominal * (1 + k * delta)` with `delta` the relative W/L-ratio
/// deviation. Clamped into (0.1, 0.9) of the supply, counting clamps.
pub fn sample_inverter_threshold<R: Rng>(
    var: &VariationSpec,
    v_supply: f64,
    rng: &mut R,
) -> (f64, bool) {
    let w = var.transistor_width.sample(rng);
    let l = var.transistor_length.sample(rng);
    let nominal_ratio = var.transistor_width.mean / var.transistor_length.mean;
    let delta = (w / l) / nominal_ratio - 1.0;
    let vth = var.vth_nominal * (1.0 + var.vth_sensitivity * delta);
    let (lo, hi) = (0.1 * v_supply, 0.9 * v_supply);
    if vth < lo || vth > hi {
        (vth.clamp(lo, hi), true)
    } else {
        (vth, false)
    }
}

/// Builds the full configuration of one cell from its dedicated substream.
pub fn build_cell(
    master_seed: u64,
    chip_id: u32,
    cell_index: u32,
    var: &VariationSpec,
    settings: &CellSettings,
) -> Result<(CellConfig, SampleStats)> {
    let mut rng = cell_stream(master_seed, chip_id, cell_index, StreamLane::Build);
    let mut stats = SampleStats::default();
    let (m1, s1) = sample_device(var, settings, &mut rng)?;
    stats.absorb(s1);
    let (m2, s2) = sample_device(var, settings, &mut rng)?;
    stats.absorb(s2);
    let (vth, clamped) = sample_inverter_threshold(var, settings.v_supply, &mut rng);
    if clamped {
        stats.vth_clamps += 1;
    }
    let config = CellConfig {
        m1,
        m2,
        inverter_vth: vth,
        v_supply: settings.v_supply,
        extract_profile: settings.extract_profile()?,
        readout_voltage: settings.readout_voltage,
        reconfig_profile: settings.reconfig_profile()?,
        ambiguity_band: settings.ambiguity_band,
        switching_dt: settings.switching_dt,
    };
    config.validate()?;
    Ok((config, stats))
}

/// A built chip: per-cell configurations plus aggregated sampler counters.
#[derive(Clone, Debug)]
pub struct BuiltChip {
    pub cells: Vec<CellConfig>,
    pub stats: SampleStats,
}

/// Samples every cell of a chip. Bit-for-bit reproducible from
/// `(master_seed, chip_id)` regardless of call order or parallelism.
pub fn build_chip(
    chip: &ChipSpec,
    var: &VariationSpec,
    settings: &CellSettings,
) -> Result<BuiltChip> {
    var.validate()?;
    settings.validate()?;
    let mut cells = Vec::with_capacity(chip.n_cells as usize);
    let mut stats = SampleStats::default();
    for cell_index in 0..chip.n_cells {
        let (config, s) = build_cell(chip.master_seed, chip.chip_id, cell_index, var, settings)?;
        stats.absorb(s);
        cells.push(config);
    }
    Ok(BuiltChip { cells, stats })
}
