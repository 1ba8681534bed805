//! Sequence ingestion, preprocessing, one-hot encoding, splits and bags.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_BAG, STREAM_SPLIT};

pub const NUCLEOTIDES: [char; 4] = ['A', 'C', 'G', 'T'];

/// One experimental measurement: a DNA sequence and its binding score.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub sequence: String,
    pub value: f64,
}

impl RawRecord {
    pub fn new(sequence: impl Into<String>, value: f64) -> Self {
        RawRecord {
            sequence: sequence.into(),
            value,
        }
    }
}

/// One-hot encoded dataset: N feature rows of width 4L with real targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    /// N rows, each of length 4L with exactly one 1 per 4-column block.
    pub features: Vec<Vec<u8>>,
    pub targets: Vec<f64>,
    pub seq_length: usize,
    pub sequence_labels: Vec<String>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Feature dimension, 4L.
    pub fn dim(&self) -> usize {
        4 * self.seq_length
    }

    /// SHA-256 over sequences and targets; used for provenance and
    /// train/test disjointness checks.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (label, y) in self.sequence_labels.iter().zip(&self.targets) {
            hasher.update(label.as_bytes());
            hasher.update(b"\t");
            hasher.update(y.to_bits().to_le_bytes());
            hasher.update(b"\n");
        }
        hex_digest(&hasher.finalize())
    }

    pub fn sequence_set(&self) -> HashSet<&str> {
        self.sequence_labels.iter().map(|s| s.as_str()).collect()
    }

    fn select(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            seq_length: self.seq_length,
            sequence_labels: indices
                .iter()
                .map(|&i| self.sequence_labels[i].clone())
                .collect(),
        }
    }

    /// Serialize as TSV: `sequence<TAB>y<TAB>phi` with phi a 0/1 string.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.len() {
            let phi: String = self.features[i]
                .iter()
                .map(|&b| if b == 1 { '1' } else { '0' })
                .collect();
            writeln!(w, "{}\t{}\t{}", self.sequence_labels[i], self.targets[i], phi)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<EncodedDataset> {
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        let mut seq_length = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (seq, y, phi) = match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(y), Some(p)) => (s, y, p),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "expected sequence<TAB>value<TAB>phi".into(),
                    })
                }
            };
            let y: f64 = y.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad value field: {y}"),
            })?;
            let row: Vec<u8> = phi
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("bad phi character: {other}"),
                    }),
                })
                .collect::<Result<_>>()?;
            let l = seq.chars().count();
            if row.len() != 4 * l {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("phi width {} != 4 x sequence length {l}", row.len()),
                });
            }
            match seq_length {
                None => seq_length = Some(l),
                Some(expect) if expect != l => {
                    return Err(Error::InconsistentLength {
                        expected: expect,
                        found: l,
                        sequence: seq.into(),
                    })
                }
                _ => {}
            }
            labels.push(seq.to_string());
            targets.push(y);
            features.push(row);
        }
        let seq_length = seq_length.ok_or_else(|| Error::EmptyInput("encoded TSV".into()))?;
        Ok(EncodedDataset {
            features,
            targets,
            seq_length,
            sequence_labels: labels,
        })
    }
}

/// Split and bagging parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub bag_fraction: f64,
    pub bag_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction {} outside (0,1)",
                self.test_fraction
            )));
        }
        if !(self.bag_fraction > 0.0 && self.bag_fraction < 1.0) {
            return Err(Error::Config(format!(
                "bag_fraction {} outside (0,1)",
                self.bag_fraction
            )));
        }
        if self.bag_count == 0 {
            return Err(Error::Config("bag_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// One-hot encode a DNA string: block j holds nucleotide j in A,C,G,T order.
pub fn encode_one_hot(sequence: &str) -> Result<Vec<u8>> {
    if sequence.is_empty() {
        return Err(Error::EmptyInput("sequence".into()));
    }
    let mut out = vec![0u8; 4 * sequence.chars().count()];
    for (j, c) in sequence.chars().enumerate() {
        let slot = match c {
            'A' => 0,
            'C' => 1,
            'G' => 2,
            'T' => 3,
            other => {
                return Err(Error::InvalidNucleotide {
                    position: j,
                    character: other,
                })
            }
        };
        out[4 * j + slot] = 1;
    }
    Ok(out)
}

/// Truncate to the central window, merge duplicate sequences by mean value,
/// optionally log2-transform, and one-hot encode.
///
/// The merge averages raw values first; log2 is applied to the averaged
/// value. Even flank overhang is split equally; an odd overhang drops one
/// extra character from the right flank.
pub fn preprocess(
    records: &[RawRecord],
    keep_window: usize,
    log2_transform: bool,
) -> Result<EncodedDataset> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no input records".into()));
    }
    if keep_window == 0 {
        return Err(Error::Config("keep_window must be positive".into()));
    }
    let full_len = records[0].sequence.chars().count();
    if full_len < keep_window {
        return Err(Error::Config(format!(
            "keep_window {keep_window} exceeds sequence length {full_len}"
        )));
    }

    // Merge truncated duplicates, preserving first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut sums: std::collections::HashMap<String, (f64, usize)> =
        std::collections::HashMap::new();
    for rec in records {
        let len = rec.sequence.chars().count();
        if len != full_len {
            return Err(Error::InconsistentLength {
                expected: full_len,
                found: len,
                sequence: rec.sequence.clone(),
            });
        }
        let start = (full_len - keep_window) / 2;
        let core: String = rec.sequence.chars().skip(start).take(keep_window).collect();
        match sums.get_mut(&core) {
            Some((sum, count)) => {
                *sum += rec.value;
                *count += 1;
            }
            None => {
                sums.insert(core.clone(), (rec.value, 1));
                order.push(core);
            }
        }
    }

    let mut features = Vec::with_capacity(order.len());
    let mut targets = Vec::with_capacity(order.len());
    for seq in &order {
        let (sum, count) = sums[seq];
        let mean = sum / count as f64;
        let y = if log2_transform {
            if mean <= 0.0 {
                return Err(Error::NonpositiveValue {
                    sequence: seq.clone(),
                    value: mean,
                });
            }
            mean.log2()
        } else {
            mean
        };
        features.push(encode_one_hot(seq)?);
        targets.push(y);
    }
    Ok(EncodedDataset {
        features,
        targets,
        seq_length: keep_window,
        sequence_labels: order,
    })
}

fn round_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Deterministic shuffle split; |test| = round(test_fraction * N).
pub fn train_test_split(
    data: &EncodedDataset,
    spec: &SplitSpec,
) -> Result<(EncodedDataset, EncodedDataset)> {
    spec.validate()?;
    let n = data.len();
    let n_test = round_count(spec.test_fraction, n);
    if n_test == 0 || n_test == n {
        return Err(Error::DegenerateSplit(format!(
            "test_fraction {} of {n} rows yields an empty partition",
            spec.test_fraction
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut stream_rng(spec.seed, STREAM_SPLIT));
    let (test_idx, train_idx) = indices.split_at(n_test);
    let mut test_idx = test_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

/// Bootstrap bag: round(bag_fraction * |train|) rows with replacement,
/// reproducible per (seed, instance_index).
pub fn bag_sample(
    train: &EncodedDataset,
    spec: &SplitSpec,
    instance_index: usize,
) -> Result<EncodedDataset> {
    spec.validate()?;
    let n = train.len();
    let size = round_count(spec.bag_fraction, n);
    if size == 0 {
        return Err(Error::DegenerateSplit(format!(
            "bag_fraction {} of {n} rows yields an empty bag",
            spec.bag_fraction
        )));
    }
    let mut rng = stream_rng(spec.seed, STREAM_BAG + instance_index as u64);
    let indices: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n)).collect();
    Ok(train.select(&indices))
}

/// Read raw records from the two-column TSV (`sequence<TAB>value`).
///
/// `#` comment lines are ignored. A header is detected by a non-numeric
/// second field on the first data line.
pub fn read_raw_tsv<R: BufRead>(r: R) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    let mut first_data_line = true;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (seq, value) = match (parts.next(), parts.next()) {
            (Some(s), Some(v)) => (s, v),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected sequence<TAB>value".into(),
                })
            }
        };
        match value.parse::<f64>() {
            Ok(v) => {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("non-finite value: {value}"),
                    });
                }
                records.push(RawRecord::new(seq, v));
            }
            Err(_) if first_data_line => {} // header row
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("bad value field: {value}"),
                });
            }
        }
        first_data_line = false;
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("raw TSV".into()));
    }
    Ok(records)
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_hot_acgt() {
        let v = encode_one_hot("ACGT").unwrap();
        assert_eq!(
            v,
            vec![1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]
        );
    }

    #[test]
    fn one_hot_repeated() {
        assert_eq!(encode_one_hot("AA").unwrap(), vec![1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn one_hot_rejects_bad_character() {
        match encode_one_hot("ACGN") {
            Err(Error::InvalidNucleotide { position, character }) => {
                assert_eq!(position, 3);
                assert_eq!(character, 'N');
            }
            other => panic!("expected InvalidNucleotide, got {other:?}"),
        }
    }

    #[test]
    fn preprocess_merges_then_logs() {
        let recs = vec![
            RawRecord::new("AAACGTAA", 4.0),
            RawRecord::new("TTACGTTT", 8.0),
        ];
        let ds = preprocess(&recs, 4, true).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.sequence_labels[0], "ACGT");
        assert!((ds.targets[0] - 6.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn preprocess_identity_window() {
        let recs = vec![RawRecord::new("ACGT", 1.0)];
        let ds = preprocess(&recs, 4, false).unwrap();
        assert_eq!(ds.sequence_labels, vec!["ACGT"]);
        assert_eq!(ds.targets, vec![1.0]);
    }

    #[test]
    fn preprocess_rejects_nonpositive_under_log() {
        let recs = vec![RawRecord::new("ACGT", -1.0)];
        assert!(matches!(
            preprocess(&recs, 4, true),
            Err(Error::NonpositiveValue { .. })
        ));
    }

    #[test]
    fn preprocess_rejects_mixed_lengths() {
        let recs = vec![RawRecord::new("ACGT", 1.0), RawRecord::new("ACGTA", 1.0)];
        assert!(matches!(
            preprocess(&recs, 4, false),
            Err(Error::InconsistentLength { .. })
        ));
    }

    fn synthetic(n: usize, l: usize) -> EncodedDataset {
        let mut rng = stream_rng(7, 99);
        let mut recs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while recs.len() < n {
            let seq: String = (0..l)
                .map(|_| NUCLEOTIDES[rng.gen_range(0..4)])
                .collect();
            if seen.insert(seq.clone()) {
                let v = rng.gen_range(0.0..10.0);
                recs.push(RawRecord::new(seq, v));
            }
        }
        preprocess(&recs, l, false).unwrap()
    }

    #[test]
    fn split_sizes_match_rounding() {
        let ds = synthetic(1655, 6);
        let spec = SplitSpec {
            test_fraction: 0.10,
            bag_fraction: 0.02,
            bag_count: 50,
            seed: 11,
        };
        let (train, test) = train_test_split(&ds, &spec).unwrap();
        assert_eq!(test.len(), 166);
        assert_eq!(train.len(), 1489);
        // disjoint and exhaustive
        let train_set = train.sequence_set();
        let test_set = test.sequence_set();
        assert!(train_set.is_disjoint(&test_set));
        assert_eq!(train_set.len() + test_set.len(), 1655);
    }

    #[test]
    fn split_smallest() {
        let ds = synthetic(10, 5);
        let spec = SplitSpec {
            test_fraction: 0.10,
            bag_fraction: 0.5,
            bag_count: 1,
            seed: 3,
        };
        let (train, test) = train_test_split(&ds, &spec).unwrap();
        assert_eq!(test.len(), 1);
        assert_eq!(train.len(), 9);
    }

    #[test]
    fn split_deterministic() {
        let ds = synthetic(100, 5);
        let spec = SplitSpec {
            test_fraction: 0.2,
            bag_fraction: 0.1,
            bag_count: 1,
            seed: 42,
        };
        let a = train_test_split(&ds, &spec).unwrap();
        let b = train_test_split(&ds, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bag_sizes_round_fraction_of_n() {
        let ds = synthetic(1489, 6);
        let mut spec = SplitSpec {
            test_fraction: 0.1,
            bag_fraction: 0.02,
            bag_count: 50,
            seed: 5,
        };
        assert_eq!(bag_sample(&ds, &spec, 0).unwrap().len(), 30);
        spec.bag_fraction = 0.10;
        assert_eq!(bag_sample(&ds, &spec, 0).unwrap().len(), 149);
    }

    #[test]
    fn bag_reproducible_per_index() {
        let ds = synthetic(200, 5);
        let spec = SplitSpec {
            test_fraction: 0.1,
            bag_fraction: 0.1,
            bag_count: 3,
            seed: 21,
        };
        assert_eq!(
            bag_sample(&ds, &spec, 2).unwrap(),
            bag_sample(&ds, &spec, 2).unwrap()
        );
        assert_ne!(
            bag_sample(&ds, &spec, 0).unwrap(),
            bag_sample(&ds, &spec, 1).unwrap()
        );
    }

    #[test]
    fn raw_tsv_header_and_comments() {
        let text = "# comment\nsequence\tvalue\nACGT\t1.5\nTTTT\t2.0\n";
        let recs = read_raw_tsv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], RawRecord::new("ACGT", 1.5));
    }

    #[test]
    fn encoded_tsv_round_trip() {
        let ds = synthetic(50, 5);
        let mut buf = Vec::new();
        ds.write_tsv(&mut buf).unwrap();
        let back = EncodedDataset::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    proptest! {
        #[test]
        fn one_hot_rows_have_one_per_block(seq in "[ACGT]{1,20}") {
            let v = encode_one_hot(&seq).unwrap();
            let l = seq.len();
            prop_assert_eq!(v.iter().map(|&b| b as usize).sum::<usize>(), l);
            for block in v.chunks(4) {
                prop_assert_eq!(block.iter().map(|&b| b as usize).sum::<usize>(), 1);
            }
        }

        #[test]
        fn preprocess_group_means_conserve_sums(
            values in proptest::collection::vec(0.1f64..100.0, 1..40),
            picks in proptest::collection::vec(0usize..6, 1..40),
        ) {
            let pool = ["ACGT", "TTTT", "GGCC", "ATAT", "CGCG", "AAAA"];
            let n = values.len().min(picks.len());
            let recs: Vec<RawRecord> = (0..n)
                .map(|i| RawRecord::new(pool[picks[i]], values[i]))
                .collect();
            let ds = preprocess(&recs, 4, false).unwrap();
            // no duplicates
            let set: std::collections::HashSet<_> = ds.sequence_labels.iter().collect();
            prop_assert_eq!(set.len(), ds.len());
            // per-group sum conservation: mean * count == sum of raw values
            for (label, y) in ds.sequence_labels.iter().zip(&ds.targets) {
                let group: Vec<f64> = (0..n)
                    .filter(|&i| pool[picks[i]] == label)
                    .map(|i| values[i])
                    .collect();
                let sum: f64 = group.iter().sum();
                prop_assert!((y * group.len() as f64 - sum).abs() < 1e-12 * sum.abs().max(1.0));
            }
        }
    }
}
