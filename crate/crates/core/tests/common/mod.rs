//! Shared synthetic-data helpers for integration tests.

use qubolearn::rng::stream_rng;
use qubolearn::seqdata::{encode_one_hot, EncodedDataset, NUCLEOTIDES};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// A planted additive position weight matrix whose per-position argmax
/// spells `consensus` over the central window.
pub struct PlantedPwm {
    /// 4L weights, w[4*pos + slot] with slot order A,C,G,T
    pub weights: Vec<f64>,
    /// slot index of the planted letter at each core position
    pub core_slots: Vec<usize>,
    pub core_start: usize,
}

pub fn slot_of(letter: char) -> usize {
    NUCLEOTIDES.iter().position(|&n| n == letter).unwrap()
}

/// Core letters get weight 2.0; every other letter draws from [0, 0.5).
pub fn planted_pwm(l: usize, consensus: &str, rng: &mut ChaCha8Rng) -> PlantedPwm {
    let core_start = (l - consensus.chars().count()) / 2;
    let mut weights: Vec<f64> = (0..4 * l).map(|_| rng.gen_range(0.0..0.5)).collect();
    let core_slots: Vec<usize> = consensus.chars().map(slot_of).collect();
    for (offset, &slot) in core_slots.iter().enumerate() {
        weights[4 * (core_start + offset) + slot] = 2.0;
    }
    PlantedPwm {
        weights,
        core_slots,
        core_start,
    }
}

/// `n` distinct uniform sequences of length `l`; targets are the planted
/// signal plus Gaussian noise with sigma = noise_frac * signal range.
pub fn synthetic_dataset(
    n: usize,
    l: usize,
    pwm: &PlantedPwm,
    noise_frac: f64,
    seed: u64,
) -> EncodedDataset {
    assert!(n <= 4usize.pow(l as u32), "not enough distinct sequences");
    let mut rng = stream_rng(seed, 900);
    let mut seen = HashSet::new();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    while features.len() < n {
        let seq: String = (0..l).map(|_| NUCLEOTIDES[rng.gen_range(0..4)]).collect();
        if !seen.insert(seq.clone()) {
            continue;
        }
        let phi = encode_one_hot(&seq).unwrap();
        let y: f64 = phi
            .iter()
            .zip(&pwm.weights)
            .map(|(&p, &w)| p as f64 * w)
            .sum();
        features.push(phi);
        clean.push(y);
        labels.push(seq);
    }
    let range = clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - clean.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma = noise_frac * range;
    let targets = clean
        .into_iter()
        .map(|y| y + sigma * gaussian(&mut rng))
        .collect();
    EncodedDataset {
        features,
        targets,
        seq_length: l,
        sequence_labels: labels,
    }
}

/// Box-Muller standard normal draw.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Write a dataset back out as a raw sequence/value TSV for config-driven
/// runs (targets must be positive if log2 is requested downstream).
pub fn write_raw_tsv(data: &EncodedDataset, path: &std::path::Path) {
    let mut text = String::from("sequence\tsignal\n");
    for (seq, y) in data.sequence_labels.iter().zip(&data.targets) {
        text.push_str(&format!("{seq}\t{y}\n"));
    }
    std::fs::write(path, text).unwrap();
}
