//! PUF quality statistics over campaign results, plus the median-split
//! enrollment baseline used for the cost comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response bits and midpoint voltages indexed by (chip, cell, epoch, repetition).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResponseMatrix {
    chips: usize,
    cells: usize,
    epochs: usize,
    repetitions: usize,
    /// Readout drive; the histogram range (V).
    v_read: f64,
    bits: Vec<u8>,
    vouts: Vec<f64>,
}

impl ResponseMatrix {
    pub fn new(chips: usize, cells: usize, epochs: usize, repetitions: usize, v_read: f64) -> Self {
        let n = chips * cells * epochs * repetitions;
        ResponseMatrix {
            chips,
            cells,
            epochs,
            repetitions,
            v_read,
            bits: vec![0; n],
            vouts: vec![0.0; n],
        }
    }

    #[inline]
    fn index(&self, chip: usize, cell: usize, epoch: usize, rep: usize) -> usize {
        ((chip * self.cells + cell) * self.epochs + epoch) * self.repetitions + rep
    }

    pub fn set(&mut self, chip: usize, cell: usize, epoch: usize, rep: usize, bit: u8, v_out: f64) {
        debug_assert!(bit <= 1);
        let i = self.index(chip, cell, epoch, rep);
        self.bits[i] = bit;
        self.vouts[i] = v_out;
    }

    pub fn bit(&self, chip: usize, cell: usize, epoch: usize, rep: usize) -> u8 {
        self.bits[self.index(chip, cell, epoch, rep)]
    }

    pub fn v_out(&self, chip: usize, cell: usize, epoch: usize, rep: usize) -> f64 {
        self.vouts[self.index(chip, cell, epoch, rep)]
    }

    pub fn chips(&self) -> usize {
        self.chips
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn v_read(&self) -> f64 {
        self.v_read
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// All raw bits in (chip, cell, epoch, repetition) order.
    pub fn raw_bits(&self) -> &[u8] {
        &self.bits
    }

    /// Response vector of one chip at a given epoch, repetition 0.
    fn chip_vector(&self, chip: usize, epoch: usize) -> Vec<u8> {
        (0..self.cells)
            .map(|cell| self.bit(chip, cell, epoch, 0))
            .collect()
    }
}

fn hamming_fraction(a: &[u8], b: &[u8]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mismatches = a.iter().zip(b).filter(|(x, y)| x != y).count();
    mismatches as f64 / a.len() as f64
}

/// Fraction of ones over all (chip, cell) at epoch 0, repetition 0.
pub fn uniformity(m: &ResponseMatrix) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::EmptyInput("uniformity"));
    }
    let mut ones = 0usize;
    for chip in 0..m.chips {
        for cell in 0..m.cells {
            ones += usize::from(m.bit(chip, cell, 0, 0));
        }
    }
    Ok(ones as f64 / (m.chips * m.cells) as f64)
}

/// One minus the mean (over chips, cells, and epochs) of the fraction of
/// repetitions disagreeing with that group's repetition-0 reference.
pub fn reliability(m: &ResponseMatrix) -> Result<f64> {
    if m.repetitions < 2 {
        return Err(Error::NotEnoughData {
            what: "reliability",
            required: 2,
            actual: m.repetitions,
            unit: "repetitions",
        });
    }
    let mut disagree_sum = 0.0;
    let groups = m.chips * m.cells * m.epochs;
    for chip in 0..m.chips {
        for cell in 0..m.cells {
            for epoch in 0..m.epochs {
                let reference = m.bit(chip, cell, epoch, 0);
                let mismatches = (1..m.repetitions)
                    .filter(|&rep| m.bit(chip, cell, epoch, rep) != reference)
                    .count();
                disagree_sum += mismatches as f64 / (m.repetitions - 1) as f64;
            }
        }
    }
    Ok(1.0 - disagree_sum / groups as f64)
}

/// Mean pairwise normalized Hamming distance between chips' epoch-0 responses.
pub fn uniqueness(m: &ResponseMatrix) -> Result<f64> {
    if m.chips < 2 {
        return Err(Error::NotEnoughData {
            what: "uniqueness",
            required: 2,
            actual: m.chips,
            unit: "chips",
        });
    }
    let vectors: Vec<Vec<u8>> = (0..m.chips).map(|chip| m.chip_vector(chip, 0)).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            total += hamming_fraction(&vectors[i], &vectors[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Mean normalized Hamming distance between consecutive reconfiguration epochs,
/// averaged over chips.
pub fn reconfig_distance(m: &ResponseMatrix) -> Result<f64> {
    if m.epochs < 2 {
        return Err(Error::NotEnoughData {
            what: "reconfig_distance",
            required: 2,
            actual: m.epochs,
            unit: "epochs",
        });
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for chip in 0..m.chips {
        for epoch in 1..m.epochs {
            let prev = m.chip_vector(chip, epoch - 1);
            let curr = m.chip_vector(chip, epoch);
            total += hamming_fraction(&prev, &curr);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Per-cell fraction of ones across chips at epoch 0, repetition 0.
pub fn bit_aliasing(m: &ResponseMatrix) -> Vec<f64> {
    (0..m.cells)
        .map(|cell| {
            let ones: usize = (0..m.chips)
                .map(|chip| usize::from(m.bit(chip, cell, 0, 0)))
                .sum();
            ones as f64 / m.chips as f64
        })
        .collect()
}

/// Binned midpoint-voltage counts over `[0, v_read]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VoutHistogram {
    pub v_max: f64,
    pub counts: Vec<u64>,
    /// Samples inside (0.1, 0.9) of the readout drive; zero for a healthy
    /// bimodal population.
    pub middle_band_count: u64,
    pub middle_band_fraction: f64,
    pub total: u64,
}

impl VoutHistogram {
    pub fn bin_edges(&self) -> Vec<(f64, f64)> {
        let n = self.counts.len();
        let width = self.v_max / n as f64;
        (0..n)
            .map(|i| (i as f64 * width, (i + 1) as f64 * width))
            .collect()
    }
}

/// Histogram of the epoch-0, repetition-0 midpoint voltages.
pub fn vout_histogram(m: &ResponseMatrix, n_bins: usize) -> Result<VoutHistogram> {
    if n_bins < 2 {
        return Err(Error::NotEnoughData {
            what: "vout_histogram",
            required: 2,
            actual: n_bins,
            unit: "bins",
        });
    }
    if m.is_empty() {
        return Err(Error::EmptyInput("vout_histogram"));
    }
    let v_max = m.v_read;
    let mut counts = vec![0u64; n_bins];
    let mut middle = 0u64;
    let mut total = 0u64;
    for chip in 0..m.chips {
        for cell in 0..m.cells {
            let v = m.v_out(chip, cell, 0, 0);
            let bin = ((v / v_max * n_bins as f64) as usize).min(n_bins - 1);
            counts[bin] += 1;
            if v > 0.1 * v_max && v < 0.9 * v_max {
                middle += 1;
            }
            total += 1;
        }
    }
    Ok(VoutHistogram {
        v_max,
        counts,
        middle_band_count: middle,
        middle_band_fraction: middle as f64 / total as f64,
        total,
    })
}

/// Baseline enrollment plan: keep below-median devices in LRS, write the rest
/// to HRS.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MedianSplitBaseline {
    /// Bit per device: 0 = stays LRS, 1 = written to HRS.
    pub bits: Vec<u8>,
    pub median: f64,
    /// One digitization per device during enrollment.
    pub digitize_ops: usize,
    /// One write-back per device after the median compare.
    pub write_back_ops: usize,
}

impl MedianSplitBaseline {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn zeros(&self) -> usize {
        self.bits.len() - self.ones()
    }
}

/// Median-split enrollment over digitized LRS resistances.
///
/// Devices are rank-ordered (ties broken by index, keeping median-equal
/// elements preferentially in LRS); the lower half stays LRS (bit 0) and the
/// upper half is written to HRS (bit 1), so the split is balanced to within
/// one element for any input.
pub fn median_split_baseline(r_on_samples: &[f64]) -> Result<MedianSplitBaseline> {
    if r_on_samples.len() < 2 {
        return Err(Error::NotEnoughData {
            what: "median_split_baseline",
            required: 2,
            actual: r_on_samples.len(),
            unit: "samples",
        });
    }
    let n = r_on_samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        r_on_samples[a]
            .partial_cmp(&r_on_samples[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let n_low = n.div_ceil(2);
    let mut bits = vec![0u8; n];
    for &idx in &order[n_low..] {
        bits[idx] = 1;
    }
    let median = if n % 2 == 1 {
        r_on_samples[order[n / 2]]
    } else {
        0.5 * (r_on_samples[order[n / 2 - 1]] + r_on_samples[order[n / 2]])
    };
    Ok(MedianSplitBaseline {
        bits,
        median,
        digitize_ops: n,
        write_back_ops: n,
    })
}

/// Aggregate quality report over one response matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub uniformity: f64,
    /// Absent with fewer than 2 repetitions.
    pub reliability: Option<f64>,
    /// Absent with fewer than 2 chips.
    pub uniqueness: Option<f64>,
    /// Absent with fewer than 2 reconfiguration epochs.
    pub reconfig_distance: Option<f64>,
    pub bit_aliasing: Vec<f64>,
    pub histogram: VoutHistogram,
}

impl MetricReport {
    pub fn compute(m: &ResponseMatrix, n_bins: usize) -> Result<Self> {
        Ok(MetricReport {
            uniformity: uniformity(m)?,
            reliability: reliability(m).ok(),
            uniqueness: uniqueness(m).ok(),
            reconfig_distance: reconfig_distance(m).ok(),
            bit_aliasing: bit_aliasing(m),
            histogram: vout_histogram(m, n_bins)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fill(m: &mut ResponseMatrix, f: impl Fn(usize, usize, usize, usize) -> (u8, f64)) {
        for chip in 0..m.chips() {
            for cell in 0..m.cells() {
                for epoch in 0..m.epochs() {
                    for rep in 0..m.repetitions() {
                        let (b, v) = f(chip, cell, epoch, rep);
                        m.set(chip, cell, epoch, rep, b, v);
                    }
                }
            }
        }
    }

    #[test]
    fn uniformity_examples() {
        let mut m = ResponseMatrix::new(1, 8, 1, 1, 1.0);
        fill(&mut m, |_, _, _, _| (1, 0.0));
        assert_eq!(uniformity(&m).unwrap(), 1.0);

        fill(&mut m, |_, cell, _, _| ((cell % 2) as u8, 0.0));
        assert_eq!(uniformity(&m).unwrap(), 0.5);

        let empty = ResponseMatrix::new(0, 0, 0, 0, 1.0);
        assert!(uniformity(&empty).is_err());
    }

    #[test]
    fn reliability_examples() {
        let mut m = ResponseMatrix::new(1, 4, 1, 100, 1.0);
        fill(&mut m, |_, _, _, _| (1, 0.001));
        assert_eq!(reliability(&m).unwrap(), 1.0);

        // one cell flipping on every odd repetition: repetition mismatch rate
        // 50/99 on that cell, zero on the other
        let mut m = ResponseMatrix::new(1, 2, 1, 100, 1.0);
        fill(&mut m, |_, cell, _, rep| {
            if cell == 0 {
                ((rep % 2) as u8, 0.0)
            } else {
                (1, 0.0)
            }
        });
        let r = reliability(&m).unwrap();
        assert_relative_eq!(r, 1.0 - 0.5 * (50.0 / 99.0), max_relative = 1e-12);

        let single = ResponseMatrix::new(1, 4, 1, 1, 1.0);
        assert!(reliability(&single).is_err());
    }

    #[test]
    fn uniqueness_examples() {
        let mut m = ResponseMatrix::new(2, 16, 1, 1, 1.0);
        fill(&mut m, |_, cell, _, _| ((cell % 2) as u8, 0.0));
        assert_eq!(uniqueness(&m).unwrap(), 0.0);

        fill(&mut m, |chip, cell, _, _| {
            (((cell + chip) % 2) as u8, 0.0)
        });
        assert_eq!(uniqueness(&m).unwrap(), 1.0);

        let one_chip = ResponseMatrix::new(1, 16, 1, 1, 1.0);
        assert!(uniqueness(&one_chip).is_err());
    }

    #[test]
    fn reconfig_distance_examples() {
        let mut m = ResponseMatrix::new(1, 16, 3, 1, 1.0);
        fill(&mut m, |_, cell, _, _| ((cell % 2) as u8, 0.0));
        assert_eq!(reconfig_distance(&m).unwrap(), 0.0);

        fill(&mut m, |_, cell, epoch, _| {
            (((cell + epoch) % 2) as u8, 0.0)
        });
        assert_eq!(reconfig_distance(&m).unwrap(), 1.0);

        let one_epoch = ResponseMatrix::new(1, 16, 1, 1, 1.0);
        assert!(reconfig_distance(&one_epoch).is_err());
    }

    #[test]
    fn reconfig_distance_on_fair_bits_is_near_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut m = ResponseMatrix::new(1, 4096, 4, 1, 1.0);
        for cell in 0..4096 {
            for epoch in 0..4 {
                m.set(0, cell, epoch, 0, rng.random_range(0..=1u8), 0.0);
            }
        }
        let d = reconfig_distance(&m).unwrap();
        assert!((d - 0.5).abs() < 0.02, "distance {d}");
    }

    #[test]
    fn histogram_examples() {
        let mut m = ResponseMatrix::new(1, 100, 1, 1, 1.0);
        fill(&mut m, |_, _, _, _| (1, 0.0));
        let h = vout_histogram(&m, 10).unwrap();
        assert_eq!(h.counts[0], 100);
        assert_eq!(h.counts.iter().sum::<u64>(), h.total);
        assert_eq!(h.middle_band_count, 0);

        // uniform synthetic voltages spread evenly over the bins
        let mut m = ResponseMatrix::new(1, 1000, 1, 1, 1.0);
        fill(&mut m, |_, cell, _, _| (0, (cell as f64 + 0.5) / 1000.0));
        let h = vout_histogram(&m, 10).unwrap();
        for &c in &h.counts {
            assert_eq!(c, 100);
        }
        assert_eq!(h.middle_band_count, 800);

        assert!(vout_histogram(&m, 1).is_err());
    }

    #[test]
    fn median_split_examples() {
        let b = median_split_baseline(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(b.bits, vec![0, 0, 1, 1]);
        assert_eq!(b.ones(), 2);
        assert_eq!(b.median, 2.5);
        assert_eq!(b.digitize_ops, 4);
        assert_eq!(b.write_back_ops, 4);

        // odd length: the median element itself stays in LRS
        let b = median_split_baseline(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(b.bits, vec![1, 0, 0]);
        assert_eq!(b.median, 2.0);

        assert!(median_split_baseline(&[1.0]).is_err());
        assert!(median_split_baseline(&[]).is_err());
    }

    #[test]
    fn median_split_of_lognormal_population_is_balanced() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let dist = rand_distr::LogNormal::new(5e5f64.ln(), 0.05).unwrap();
        let draws: Vec<f64> = (0..15_000).map(|_| dist.sample(&mut rng)).collect();
        let b = median_split_baseline(&draws).unwrap();
        assert!(b.ones().abs_diff(b.zeros()) <= 1);
    }

    #[test]
    fn complement_and_permutation_invariances() {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut m = ResponseMatrix::new(1, 64, 1, 1, 1.0);
        let bits: Vec<u8> = (0..64).map(|_| rng.random_range(0..=1u8)).collect();
        for (cell, &b) in bits.iter().enumerate() {
            m.set(0, cell, 0, 0, b, 0.0);
        }
        let u = uniformity(&m).unwrap();

        let mut complemented = ResponseMatrix::new(1, 64, 1, 1, 1.0);
        for (cell, &b) in bits.iter().enumerate() {
            complemented.set(0, cell, 0, 0, 1 - b, 0.0);
        }
        assert_relative_eq!(
            uniformity(&complemented).unwrap(),
            1.0 - u,
            max_relative = 1e-12
        );

        let mut shuffled_bits = bits.clone();
        shuffled_bits.shuffle(&mut rng);
        let mut shuffled = ResponseMatrix::new(1, 64, 1, 1, 1.0);
        for (cell, &b) in shuffled_bits.iter().enumerate() {
            shuffled.set(0, cell, 0, 0, b, 0.0);
        }
        assert_eq!(uniformity(&shuffled).unwrap(), u);
    }

    proptest! {
        #[test]
        fn median_split_is_balanced_for_any_input(
            samples in proptest::collection::vec(
                prop_oneof![0.1f64..1e9, Just(5.0), Just(7.0)], 2..200,
            )
        ) {
            let b = median_split_baseline(&samples).unwrap();
            prop_assert!(b.ones().abs_diff(b.zeros()) <= 1);
        }

        #[test]
        fn metric_outputs_stay_in_unit_interval(
            chips in 2usize..4,
            cells in 1usize..32,
            epochs in 2usize..4,
            reps in 2usize..4,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = ResponseMatrix::new(chips, cells, epochs, reps, 1.0);
            for chip in 0..chips {
                for cell in 0..cells {
                    for epoch in 0..epochs {
                        for rep in 0..reps {
                            m.set(chip, cell, epoch, rep,
                                  rng.random_range(0..=1u8), rng.random_range(0.0..1.0));
                        }
                    }
                }
            }
            for v in [
                uniformity(&m).unwrap(),
                reliability(&m).unwrap(),
                uniqueness(&m).unwrap(),
                reconfig_distance(&m).unwrap(),
            ] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            for a in bit_aliasing(&m) {
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
