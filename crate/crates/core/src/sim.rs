//! Synthetic benchmark: metric tables and fixation records with a known driver.
//!
//! Every draw comes from one SplitMix64 stream, consumed in a fixed order, so
//! a seed pins the whole dataset.

use serde::{Deserialize, Serialize};

use crate::geometry::PositionCategory;
use crate::relevance::{MetricRow, METRIC_NAMES};
use crate::tables::FixationRecord;

/// SplitMix64 with Box–Muller normals (one normal per two uniforms).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal from the cosine branch of Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Metric whose value drives the log responses.
    pub driver: String,
    pub participants: usize,
    /// Slope of log duration on the driver.
    pub driver_effect: f64,
    /// Residual standard deviation of log duration.
    pub noise_sd: f64,
    /// Share of (object, participant) pairs with no fixation at all.
    pub unfixated_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            driver: "sum_vissem_sim".into(),
            participants: 5,
            driver_effect: 0.25,
            noise_sd: 0.5,
            unfixated_rate: 0.03,
        }
    }
}

const VOCABULARY: [&str; 12] = [
    "cup", "table", "chair", "lamp", "book", "plant", "window", "dog", "person", "car", "bottle", "clock",
];

/// Generate `n_scenes` scenes of 1 to 4 objects each, with one fixation record
/// per object and participant.
///
/// Component metrics are independent uniforms; the composite metrics are
/// their sums, so the driver `sum_vissem_sim` is partially correlated with
/// `overall_semsim` and `obj_image_vissim`, while `concepts_semsim` is pure
/// noise. Log duration is `6 + effect·driver + 0.25·ln(proportion) −
/// 0.3·saliency + participant + position + noise`.
///
/// Panics if `config.driver` is not a metric name.
pub fn simulate_benchmark(seed: u64, n_scenes: usize, config: &SimConfig) -> (Vec<MetricRow>, Vec<FixationRecord>) {
    assert!(
        METRIC_NAMES.contains(&config.driver.as_str()),
        "unknown driver metric '{}'",
        config.driver
    );
    let mut rng = SplitMix64::seed_from_u64(seed);
    let participant_offsets: Vec<f64> = (0..config.participants).map(|_| 0.15 * rng.normal()).collect();
    let position_offsets: Vec<f64> = (0..PositionCategory::ALL.len()).map(|_| 0.1 * rng.normal()).collect();

    let mut rows = Vec::new();
    let mut fixations = Vec::new();
    for scene in 0..n_scenes {
        let image_id = format!("img_{scene:05}");
        let n_objects = 1 + rng.below(4) as usize;
        for k in 0..n_objects {
            let obj_image = rng.uniform(0.0, 0.6);
            let objs = rng.uniform(0.0, 3.0);
            let sent = rng.uniform(0.0, 0.6);
            let words = rng.uniform(0.0, 2.0);
            let concepts = rng.uniform(0.0, 2.0);
            let proportion = rng.uniform(0.002f64.ln(), 0.5f64.ln()).exp();
            let saliency = rng.next_f64();
            let pos_index = rng.below(9) as usize;
            let name = VOCABULARY[rng.below(VOCABULARY.len() as u64) as usize];
            let overall_semsim = sent + words;
            let row = MetricRow {
                image_id: image_id.clone(),
                object_id: format!("obj_{k}"),
                name: name.to_string(),
                obj_image_vissim: Some(obj_image),
                objs_vissim: Some(objs),
                overall_vissim: Some(obj_image + objs),
                sent_semsim: Some(sent),
                words_semsim: Some(words),
                concepts_semsim: Some(concepts),
                overall_semsim: Some(overall_semsim),
                sum_vissem_sim: Some(overall_semsim + obj_image),
                proportion,
                saliency: Some(saliency),
                position: PositionCategory::ALL[pos_index],
            };
            let driver = row
                .metric(&config.driver)
                .flatten()
                .expect("simulated metrics are complete");
            for (p, offset) in participant_offsets.iter().enumerate() {
                let eta = config.driver_effect * driver + 0.25 * proportion.ln() - 0.3 * saliency
                    + offset
                    + position_offsets[pos_index];
                let unfixated = rng.next_f64() < config.unfixated_rate;
                let duration_noise = rng.normal();
                let count_noise = rng.normal();
                let (duration, count) = if unfixated {
                    (0.0, 0)
                } else {
                    let d = (6.0 + eta + config.noise_sd * duration_noise).exp();
                    let c = (1.0 + 0.8 * eta + 0.35 * count_noise).exp().round() as u64;
                    (d, c)
                };
                fixations.push(FixationRecord {
                    image_id: image_id.clone(),
                    object_id: row.object_id.clone(),
                    participant: format!("p{}", p + 1),
                    total_duration_ms: duration,
                    fixation_count: count,
                });
            }
            rows.push(row);
        }
    }
    (rows, fixations)
}
