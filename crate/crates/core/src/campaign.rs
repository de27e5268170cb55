//! Campaign driver: builds seeded populations, runs the
//! program -> extract -> readout pipeline over every cell and epoch, assembles
//! the response matrix, and computes the quality report.

use std::path::PathBuf;
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{digitize, run_cycle, CellState, DeviceSlot, Trace};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, ResponseMatrix};
use crate::oracle;
use crate::population::{build_cell, CellSettings, SampleStats, VariationSpec};
use crate::rng::{cell_stream, StreamLane};

/// Full description of one Monte-Carlo campaign.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub chips: u32,
    pub cells_per_chip: u32,
    pub readout_repetitions: u32,
    pub reconfig_epochs: u32,
    pub master_seed: u64,
    /// Std of the gaussian voltage added to the midpoint before digitization;
    /// zero disables readout noise.
    pub noise_sigma: f64,
    /// Histogram resolution for the midpoint-voltage distribution.
    pub histogram_bins: usize,
    /// When set, run_campaign persists the report and data files here.
    pub output_dir: Option<PathBuf>,
    /// Cells whose epoch-0 cycle is recorded as a full trace.
    pub trace_cells: Vec<(u32, u32)>,
    pub variation: VariationSpec,
    pub cell: CellSettings,
}

impl Default for CampaignConfig {
    /// The headline experiment: one chip of 15,000 cells at the default
    /// variation settings, 100 readout repetitions, a single epoch.
    fn default() -> Self {
        CampaignConfig {
            chips: 1,
            cells_per_chip: 15_000,
            readout_repetitions: 100,
            reconfig_epochs: 1,
            master_seed: 20_170_331,
            noise_sigma: 0.0,
            histogram_bins: 50,
            output_dir: None,
            trace_cells: Vec::new(),
            variation: VariationSpec::default(),
            cell: CellSettings::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: CampaignConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        Ok(config)
    }

    /// Canonical serialized form of the resolved config; hashed for audit.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("campaign config serializes")
    }

    /// Hex SHA-256 of the canonical config text.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_toml().as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("chips", self.chips),
            ("cells_per_chip", self.cells_per_chip),
            ("readout_repetitions", self.readout_repetitions),
            ("reconfig_epochs", self.reconfig_epochs),
        ] {
            if v == 0 {
                return Err(Error::InvalidCampaignConfig(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidCampaignConfig(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.histogram_bins < 2 {
            return Err(Error::InvalidCampaignConfig(
                "histogram_bins must be at least 2".into(),
            ));
        }
        for &(chip, cell) in &self.trace_cells {
            if chip >= self.chips || cell >= self.cells_per_chip {
                return Err(Error::InvalidCampaignConfig(format!(
                    "trace cell {chip}:{cell} outside campaign of {} chips x {} cells",
                    self.chips, self.cells_per_chip
                )));
            }
        }
        self.variation.validate()?;
        self.cell.validate()?;
        Ok(())
    }
}

/// Per-epoch diagnostics for one cell.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub switched: DeviceSlot,
    pub predicted: DeviceSlot,
    pub rel_gap: f64,
    pub near_tie: bool,
    /// Drive voltage at which the winner began switching.
    pub onset_v_in: f64,
    /// Losing device was dragged below the LRS tolerance in a near-tie race.
    pub partial: bool,
    pub final_omega1: f64,
    pub final_omega2: f64,
    /// Noiseless midpoint voltage at readout.
    pub v_out: f64,
    pub ambiguous: bool,
}

/// Diagnostics for one cell across every epoch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub chip: u32,
    pub cell: u32,
    pub inverter_vth: f64,
    pub epochs: Vec<EpochRecord>,
}

/// A recorded full trace for one cell.
#[derive(Clone, Debug)]
pub struct CellTrace {
    pub chip: u32,
    pub cell: u32,
    pub trace: Trace,
}

/// Aggregate counters over a campaign.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CampaignStats {
    pub sample: SampleStats,
    /// Cell-epochs whose noiseless readout fell inside the ambiguity band.
    pub ambiguous_readouts: u64,
    pub oracle_matches: u64,
    pub oracle_mismatches: u64,
    /// Mismatches that were flagged as near-ties by the predictor.
    pub oracle_mismatches_flagged: u64,
    /// Cell-epochs whose losing device dipped below the LRS tolerance.
    pub partial_switches: u64,
    /// Fraction of cell-epochs where the first-to-threshold predictor agreed
    /// with the transient.
    pub oracle_agreement: f64,
    /// Analytic mean inter-epoch Hamming distance for this population.
    pub expected_reconfig_distance: f64,
    /// Wall-clock runtime; excluded from serialized reports.
    #[serde(skip)]
    pub elapsed_s: f64,
}

/// Everything a campaign produces.
#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub config_hash: String,
    pub master_seed: u64,
    pub matrix: ResponseMatrix,
    pub report: MetricReport,
    pub records: Vec<CellRecord>,
    pub traces: Vec<CellTrace>,
    pub stats: CampaignStats,
}

struct CellOutput {
    bits: Vec<u8>,
    vouts: Vec<f64>,
    record: CellRecord,
    trace: Option<Trace>,
    sample_stats: SampleStats,
    flip_probability: f64,
}

fn simulate_cell(config: &CampaignConfig, chip: u32, cell: u32) -> Result<CellOutput> {
    let (cell_config, sample_stats) = build_cell(
        config.master_seed,
        chip,
        cell,
        &config.variation,
        &config.cell,
    )?;
    let mut cycle_rng = cell_stream(config.master_seed, chip, cell, StreamLane::Cycle);
    let mut noise_rng = cell_stream(config.master_seed, chip, cell, StreamLane::Noise);
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    let record_trace = config.trace_cells.contains(&(chip, cell));

    let epochs = config.reconfig_epochs as usize;
    let reps = config.readout_repetitions as usize;
    let mut bits = Vec::with_capacity(epochs * reps);
    let mut vouts = Vec::with_capacity(epochs * reps);
    let mut epoch_records = Vec::with_capacity(epochs);
    let mut trace = None;

    let mut state = CellState::fresh(&cell_config);
    for epoch in 0..epochs {
        let out = run_cycle(
            &state,
            &cell_config,
            config.cell.integrator,
            &mut cycle_rng,
            record_trace && epoch == 0,
        )?;
        let prediction = oracle::predict_first_switch(&out.programmed, &cell_config);
        for _ in 0..reps {
            let v = match &noise {
                Some(dist) => out.readout.v_out + dist.sample(&mut noise_rng),
                None => out.readout.v_out,
            };
            bits.push(digitize(v, cell_config.inverter_vth));
            vouts.push(v);
        }
        epoch_records.push(EpochRecord {
            switched: out.switched,
            predicted: prediction.winner,
            rel_gap: prediction.rel_gap,
            near_tie: prediction.near_tie,
            onset_v_in: out.onset_v_in,
            partial: out.partial,
            final_omega1: out.state.m1.omega,
            final_omega2: out.state.m2.omega,
            v_out: out.readout.v_out,
            ambiguous: out.readout.ambiguous,
        });
        if record_trace && epoch == 0 {
            trace = Some(out.trace);
        }
        state = out.state;
    }

    Ok(CellOutput {
        bits,
        vouts,
        record: CellRecord {
            chip,
            cell,
            inverter_vth: cell_config.inverter_vth,
            epochs: epoch_records,
        },
        trace,
        sample_stats,
        flip_probability: oracle::epoch_flip_probability(&cell_config, config.variation.c2c_rel_std),
    })
}

/// Runs the full pipeline. Cells are fanned out across the rayon pool; the
/// result is a pure function of the config regardless of worker count. When
/// `output_dir` is set, the report and data files are persisted there.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let started = Instant::now();

    let coords: Vec<(u32, u32)> = (0..config.chips)
        .flat_map(|chip| (0..config.cells_per_chip).map(move |cell| (chip, cell)))
        .collect();
    let outputs: Vec<CellOutput> = coords
        .par_iter()
        .map(|&(chip, cell)| {
            simulate_cell(config, chip, cell).map_err(|e| e.at_cell(chip, cell))
        })
        .collect::<Result<_>>()?;

    let chips = config.chips as usize;
    let cells = config.cells_per_chip as usize;
    let epochs = config.reconfig_epochs as usize;
    let reps = config.readout_repetitions as usize;
    let mut matrix = ResponseMatrix::new(chips, cells, epochs, reps, config.cell.readout_voltage);
    let mut stats = CampaignStats::default();
    let mut records = Vec::with_capacity(outputs.len());
    let mut traces = Vec::new();
    let mut flip_sum = 0.0;

    for (idx, out) in outputs.into_iter().enumerate() {
        let (chip, cell) = (idx / cells, idx % cells);
        let mut k = 0;
        for epoch in 0..epochs {
            for rep in 0..reps {
                matrix.set(chip, cell, epoch, rep, out.bits[k], out.vouts[k]);
                k += 1;
            }
        }
        stats.sample.absorb(out.sample_stats);
        for er in &out.record.epochs {
            if er.ambiguous {
                stats.ambiguous_readouts += 1;
            }
            if er.partial {
                stats.partial_switches += 1;
            }
            if er.switched == er.predicted {
                stats.oracle_matches += 1;
            } else {
                stats.oracle_mismatches += 1;
                if er.near_tie {
                    stats.oracle_mismatches_flagged += 1;
                }
            }
        }
        flip_sum += out.flip_probability;
        if let Some(trace) = out.trace {
            traces.push(CellTrace {
                chip: chip as u32,
                cell: cell as u32,
                trace,
            });
        }
        records.push(out.record);
    }

    let total_epoch_records = stats.oracle_matches + stats.oracle_mismatches;
    stats.oracle_agreement = if total_epoch_records == 0 {
        1.0
    } else {
        stats.oracle_matches as f64 / total_epoch_records as f64
    };
    stats.expected_reconfig_distance = flip_sum / coords.len() as f64;

    let report = MetricReport::compute(&matrix, config.histogram_bins)?;
    stats.elapsed_s = started.elapsed().as_secs_f64();

    let result = CampaignResult {
        config_hash: config.config_hash(),
        master_seed: config.master_seed,
        matrix,
        report,
        records,
        traces,
        stats,
    };

    if let Some(dir) = &config.output_dir {
        crate::report::write_outputs(&result, config, dir)?;
    }
    Ok(result)
}

/// One pass/fail line of the acceptance-threshold gate.
#[derive(Clone, Debug, Serialize)]
pub struct GateCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Evaluates the campaign against the pinned quality thresholds. Skips checks
/// whose inputs are structurally absent (single repetition, single epoch).
pub fn gate_checks(result: &CampaignResult, config: &CampaignConfig) -> Vec<GateCheck> {
    let mut checks = Vec::new();

    let u = result.report.uniformity;
    checks.push(GateCheck {
        name: "uniformity",
        passed: (0.485..=0.515).contains(&u),
        detail: format!("{u:.4} in [0.485, 0.515]"),
    });

    let mid = result.report.histogram.middle_band_count;
    checks.push(GateCheck {
        name: "vout_middle_band",
        passed: mid == 0,
        detail: format!("{mid} samples in (0.1, 0.9) of v_read"),
    });

    if let Some(rel) = result.report.reliability {
        if config.noise_sigma == 0.0 {
            checks.push(GateCheck {
                name: "reliability_noiseless",
                passed: rel == 1.0,
                detail: format!("{rel} == 1.0"),
            });
        } else {
            let pairs: Vec<(f64, f64)> = result
                .records
                .iter()
                .flat_map(|r| r.epochs.iter().map(|e| (e.v_out, r.inverter_vth)))
                .collect();
            let expected = oracle::expected_noisy_reliability(pairs.iter(), config.noise_sigma);
            checks.push(GateCheck {
                name: "reliability_vs_noise_oracle",
                passed: (rel - expected).abs() <= 0.005,
                detail: format!("measured {rel:.5} vs analytic {expected:.5} (tol 0.005)"),
            });
        }
    }

    let agreement = result.stats.oracle_agreement;
    let unflagged = result.stats.oracle_mismatches - result.stats.oracle_mismatches_flagged;
    checks.push(GateCheck {
        name: "first_switch_oracle",
        passed: agreement >= 0.999 && unflagged == 0,
        detail: format!(
            "agreement {agreement:.5}, {} mismatches ({} unflagged)",
            result.stats.oracle_mismatches, unflagged
        ),
    });

    if let Some(d) = result.report.reconfig_distance {
        let expected = result.stats.expected_reconfig_distance;
        let passed = if config.variation.c2c_rel_std == 0.0 {
            d == 0.0
        } else {
            (d - expected).abs() <= 0.02
        };
        checks.push(GateCheck {
            name: "reconfig_distance_vs_oracle",
            passed,
            detail: format!("measured {d:.4} vs analytic {expected:.4} (tol 0.02)"),
        });
    }

    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> CampaignConfig {
        CampaignConfig {
            chips: 1,
            cells_per_chip: 8,
            readout_repetitions: 3,
            reconfig_epochs: 2,
            master_seed: 7,
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn validation_rejects_zero_counts_and_bad_trace_coords() {
        let mut c = tiny_config();
        c.chips = 0;
        assert!(c.validate().is_err());

        let mut c = tiny_config();
        c.trace_cells = vec![(0, 99)];
        assert!(c.validate().is_err());

        let mut c = tiny_config();
        c.noise_sigma = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_variance_population_is_flagged_degenerate() {
        let mut c = tiny_config();
        c.cells_per_chip = 1;
        c.variation = VariationSpec::c2c_only(0.0);
        let err = run_campaign(&c).unwrap_err();
        assert!(err.is_degenerate_outcome(), "got {err}");
        assert!(matches!(err, Error::AtCell { chip: 0, cell: 0, .. }));
    }

    #[test]
    fn small_campaign_matrix_shape_and_records() {
        let c = tiny_config();
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.matrix.chips(), 1);
        assert_eq!(r.matrix.cells(), 8);
        assert_eq!(r.matrix.epochs(), 2);
        assert_eq!(r.matrix.repetitions(), 3);
        assert_eq!(r.records.len(), 8);
        assert!(r.records.iter().all(|rec| rec.epochs.len() == 2));
        assert_eq!(r.stats.ambiguous_readouts, 0);
        // noiseless readouts repeat exactly within an epoch
        assert_eq!(r.report.reliability, Some(1.0));
    }

    #[test]
    fn trace_cells_are_recorded() {
        let mut c = tiny_config();
        c.trace_cells = vec![(0, 3)];
        let r = run_campaign(&c).unwrap();
        assert_eq!(r.traces.len(), 1);
        assert_eq!((r.traces[0].chip, r.traces[0].cell), (0, 3));
        assert!(!r.traces[0].trace.is_empty());
    }

    #[test]
    fn toml_round_trip_and_hash_stability() {
        let c = tiny_config();
        let text = c.canonical_toml();
        let parsed = CampaignConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed.config_hash(), c.config_hash());

        let mut other = tiny_config();
        other.master_seed = 8;
        assert_ne!(other.config_hash(), c.config_hash());
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let c = CampaignConfig::from_toml_str("cells_per_chip = 4\n").unwrap();
        assert_eq!(c.cells_per_chip, 4);
        assert_eq!(c.chips, 1);
        assert_eq!(c.variation.vth_nominal, 0.5);
    }
}
