//! Regression QUBO construction, Ising conversion, rescaling, prediction.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::seqdata::EncodedDataset;

/// QUBO problem min_w wᵀQw + wᵀk over binary w, with the dropped constant
/// Σ y² kept for reconstructing the original objective.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    pub dim: usize,
    /// Dense symmetric matrix, row-major dim x dim.
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub dropped_constant: f64,
    pub lambda: f64,
}

impl QuboInstance {
    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.dim + j]
    }
}

/// Ising instance: E(σ) = Σ hᵢσᵢ + Σ_{i<j} Jᵢⱼσᵢσⱼ over σ ∈ {−1,+1}.
///
/// `offset` carries the constant separating Ising from QUBO energies:
/// qubo_energy(w(σ)) = ising_energy(σ) + offset. `scale` is the cumulative
/// factor divided out by [`scale_ising`]; original energies are
/// `scale * (E + offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    pub dim: usize,
    pub h: Vec<f64>,
    /// Upper-triangular couplings, keys (i, j) with i < j.
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub scale: f64,
}

impl IsingInstance {
    pub fn new(dim: usize, h: Vec<f64>, j: BTreeMap<(usize, usize), f64>, offset: f64) -> Self {
        debug_assert!(j.keys().all(|&(a, b)| a < b && b < dim));
        IsingInstance {
            dim,
            h,
            j,
            offset,
            scale: 1.0,
        }
    }

    /// Energy of a spin configuration, offset excluded.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        debug_assert_eq!(spins.len(), self.dim);
        let mut e = 0.0;
        for (i, &hi) in self.h.iter().enumerate() {
            e += hi * spins[i] as f64;
        }
        for (&(a, b), &jab) in &self.j {
            e += jab * (spins[a] as f64) * (spins[b] as f64);
        }
        e
    }

    /// Canonical text serialization digest input.
    pub fn canonical_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = format!("n {} offset {:.17e} scale {:.17e}\n", self.dim, self.offset, self.scale);
        for (i, &hi) in self.h.iter().enumerate() {
            let _ = writeln!(s, "{i} {i} {hi:.17e}");
        }
        for (&(a, b), &jab) in &self.j {
            let _ = writeln!(s, "{a} {b} {jab:.17e}");
        }
        s
    }

    /// Write the instance in the sampler text format:
    /// header `n <dim> offset <value>`, then `i i <linear>` and
    /// `i j <quadratic>` triples with i < j.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n {} offset {:.17e}", self.dim, self.offset)?;
        for (i, &hi) in self.h.iter().enumerate() {
            if hi != 0.0 {
                writeln!(w, "{i} {i} {hi:.17e}")?;
            }
        }
        for (&(a, b), &jab) in &self.j {
            if jab != 0.0 {
                writeln!(w, "{a} {b} {jab:.17e}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<IsingInstance> {
        let mut lines = r.lines().enumerate();
        let (dim, offset) = loop {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::EmptyInput("ising text".into()))?;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "n" || parts[2] != "offset" {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected header `n <dim> offset <value>`".into(),
                });
            }
            let dim: usize = parts[1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad dim: {}", parts[1]),
            })?;
            let offset: f64 = parts[3].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad offset: {}", parts[3]),
            })?;
            break (dim, offset);
        };
        let mut h = vec![0.0; dim];
        let mut j = BTreeMap::new();
        for (lineno, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected `i j value`".into(),
                });
            }
            let a: usize = parts[0].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad index: {}", parts[0]),
            })?;
            let b: usize = parts[1].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad index: {}", parts[1]),
            })?;
            let v: f64 = parts[2].parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad value: {}", parts[2]),
            })?;
            if a >= dim || b >= dim {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("index out of range for dim {dim}"),
                });
            }
            if a == b {
                h[a] = v;
            } else if a < b {
                j.insert((a, b), v);
            } else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("quadratic indices must satisfy i < j, got {a} {b}"),
                });
            }
        }
        Ok(IsingInstance::new(dim, h, j, offset))
    }
}

/// Build the regression QUBO: Q = Σ φφᵀ, k = λ1 − 2Σ yφ, dropped = Σ y².
pub fn build_qubo(data: &EncodedDataset, lambda: f64) -> Result<QuboInstance> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset for QUBO build".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
    }
    let dim = data.dim();
    let mut q = vec![0.0; dim * dim];
    let mut k = vec![lambda; dim];
    let mut dropped = 0.0;
    for (row, &y) in data.features.iter().zip(&data.targets) {
        dropped += y * y;
        // one-hot rows: accumulate over the L set positions only
        let set: Vec<usize> = (0..dim).filter(|&i| row[i] == 1).collect();
        for &i in &set {
            k[i] -= 2.0 * y;
            for &j in &set {
                q[i * dim + j] += 1.0;
            }
        }
    }
    Ok(QuboInstance {
        dim,
        q,
        k,
        dropped_constant: dropped,
        lambda,
    })
}

/// wᵀQw + wᵀk for binary w.
pub fn qubo_energy(q: &QuboInstance, w: &[u8]) -> Result<f64> {
    if w.len() != q.dim {
        return Err(Error::DimensionMismatch {
            expected: q.dim,
            got: w.len(),
        });
    }
    if let Some(idx) = w.iter().position(|&b| b > 1) {
        return Err(Error::NonBinaryEntry {
            index: idx,
            value: w[idx] as f64,
        });
    }
    let set: Vec<usize> = (0..q.dim).filter(|&i| w[i] == 1).collect();
    let mut e = 0.0;
    for &i in &set {
        e += q.k[i];
        for &j in &set {
            e += q.q_at(i, j);
        }
    }
    Ok(e)
}

/// Convert QUBO to Ising via w = (σ+1)/2, folding diagonal Q into linear
/// terms (wᵢ² = wᵢ for binary w).
///
/// For every σ, `qubo_energy(w(σ)) == ising.energy(σ) + ising.offset`.
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let dim = q.dim;
    // a_i = Q_ii + k_i (linear in w), b_ij = 2 Q_ij for i<j (quadratic in w)
    let mut h = vec![0.0; dim];
    let mut j = BTreeMap::new();
    let mut offset = 0.0;
    for i in 0..dim {
        let a = q.q_at(i, i) + q.k[i];
        h[i] += a / 2.0;
        offset += a / 2.0;
    }
    for i in 0..dim {
        for jj in (i + 1)..dim {
            let b = 2.0 * q.q_at(i, jj);
            if b != 0.0 {
                j.insert((i, jj), b / 4.0);
                h[i] += b / 4.0;
                h[jj] += b / 4.0;
                offset += b / 4.0;
            }
        }
    }
    IsingInstance::new(dim, h, j, offset)
}

/// Divide all h and J by max(|h|∞, |J|∞) so they lie in [−1, 1].
///
/// The offset is divided too, and the divisor is accumulated in `scale`,
/// so original energies remain recoverable and the energy ordering of
/// states is unchanged.
pub fn scale_ising(m: &IsingInstance) -> Result<IsingInstance> {
    let h_max = m.h.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let j_max = m.j.values().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let s = h_max.max(j_max);
    if s == 0.0 {
        return Err(Error::AllZeroInstance);
    }
    Ok(IsingInstance {
        dim: m.dim,
        h: m.h.iter().map(|&v| v / s).collect(),
        j: m.j.iter().map(|(&key, &v)| (key, v / s)).collect(),
        offset: m.offset / s,
        scale: m.scale * s,
    })
}

/// Linear prediction wᵀφ.
pub fn predict(w: &[f64], phi: &[u8]) -> Result<f64> {
    if w.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: phi.len(),
        });
    }
    Ok(w.iter()
        .zip(phi)
        .map(|(&wi, &p)| wi * p as f64)
        .sum())
}

/// Affine target normalization to [0, L] and its inverse.
///
/// A binary-weight prediction Σ wⱼφ_{n,j} ranges over {0, …, L}, so targets
/// are mapped onto that interval before QUBO construction. The map is
/// recorded and inverted for reporting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetScaler {
    pub y_min: f64,
    pub y_max: f64,
    pub upper: f64,
}

impl TargetScaler {
    /// Fit the [0, upper] map to the observed target range.
    pub fn fit(targets: &[f64], upper: f64) -> Result<TargetScaler> {
        if targets.is_empty() {
            return Err(Error::EmptyInput("targets for normalization".into()));
        }
        let y_min = targets.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(TargetScaler { y_min, y_max, upper })
    }

    pub fn apply(&self, y: f64) -> f64 {
        if self.y_max == self.y_min {
            return 0.0;
        }
        (y - self.y_min) / (self.y_max - self.y_min) * self.upper
    }

    pub fn invert(&self, z: f64) -> f64 {
        if self.upper == 0.0 {
            return self.y_min;
        }
        z / self.upper * (self.y_max - self.y_min) + self.y_min
    }

    pub fn apply_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.apply(y)).collect()
    }
}
