//! Low-energy samplers for Ising instances: simulated annealing,
//! path-integral simulated quantum annealing, and exhaustive search.
//!
//! Pool energies are the bare Ising energies (instance offset excluded);
//! the offset only matters when mapping back to QUBO objective values.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::IsingInstance;
use crate::rng::{stream_rng, STREAM_READ};

pub const BRUTE_FORCE_LIMIT: usize = 24;
pub const MAX_ENSEMBLE_K: usize = 20;

/// Annealing run parameters. Gamma and trotter fields only apply to SQA.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub reads: usize,
    pub gamma_initial: f64,
    pub gamma_final: f64,
    pub trotter_slices: usize,
}

impl Default for AnnealSchedule {
    /// Desk-scale defaults: the annealing endpoints match the reference
    /// protocol (beta 0.1 -> 3) with reads lowered from 10000 to 500.
    fn default() -> Self {
        AnnealSchedule {
            sweeps: 1000,
            beta_initial: 0.1,
            beta_final: 3.0,
            reads: 500,
            gamma_initial: 3.0,
            gamma_final: 0.01,
            trotter_slices: 20,
        }
    }
}

impl AnnealSchedule {
    /// Full-fidelity protocol: 10000 sweeps, 10000 reads.
    pub fn full_fidelity() -> Self {
        AnnealSchedule {
            sweeps: 10000,
            reads: 10000,
            ..Default::default()
        }
    }

    pub fn validate(&self, sqa: bool) -> Result<()> {
        if self.sweeps < 1 {
            return Err(Error::InvalidSchedule("sweeps must be >= 1".into()));
        }
        if !(self.beta_initial > 0.0 && self.beta_initial <= self.beta_final) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < beta_initial <= beta_final, got {} and {}",
                self.beta_initial, self.beta_final
            )));
        }
        if self.reads < 1 {
            return Err(Error::InvalidSchedule("reads must be >= 1".into()));
        }
        if sqa {
            if !(self.gamma_initial > self.gamma_final && self.gamma_final > 0.0) {
                return Err(Error::InvalidSchedule(format!(
                    "need gamma_initial > gamma_final > 0, got {} and {}",
                    self.gamma_initial, self.gamma_final
                )));
            }
            if self.trotter_slices < 2 {
                return Err(Error::InvalidSchedule("trotter_slices must be >= 2".into()));
            }
        }
        Ok(())
    }

    fn beta_at(&self, sweep: usize) -> f64 {
        interp(self.beta_initial, self.beta_final, sweep, self.sweeps)
    }

    fn gamma_at(&self, sweep: usize) -> f64 {
        interp(self.gamma_initial, self.gamma_final, sweep, self.sweeps)
    }
}

fn interp(a: f64, b: f64, step: usize, steps: usize) -> f64 {
    if steps <= 1 {
        return b;
    }
    a + (b - a) * step as f64 / (steps - 1) as f64
}

/// One distinct sampled state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub spins: Vec<i8>,
    pub energy: f64,
    pub multiplicity: usize,
}

/// Energy-sorted distinct solutions from one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPool {
    pub records: Vec<SampleRecord>,
    pub instance_digest: String,
    pub reads: usize,
}

impl SolutionPool {
    pub fn lowest_energy(&self) -> Option<f64> {
        self.records.first().map(|r| r.energy)
    }

    /// TSV: `energy<TAB>multiplicity<TAB>spins` with spins as a +/- string.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# instance {}", self.instance_digest)?;
        writeln!(w, "# reads {}", self.reads)?;
        for rec in &self.records {
            let spins: String = rec
                .spins
                .iter()
                .map(|&s| if s > 0 { '+' } else { '-' })
                .collect();
            writeln!(w, "{:.12e}\t{}\t{}", rec.energy, rec.multiplicity, spins)?;
        }
        Ok(())
    }
}

fn instance_digest(m: &IsingInstance) -> String {
    let mut hasher = Sha256::new();
    hasher.update(m.canonical_text().as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Neighbor lists for O(1) local-field updates.
fn adjacency(m: &IsingInstance) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); m.dim];
    for (&(a, b), &j) in &m.j {
        adj[a].push((b, j));
        adj[b].push((a, j));
    }
    adj
}

fn local_field(m: &IsingInstance, adj: &[Vec<(usize, f64)>], spins: &[i8], i: usize) -> f64 {
    let mut f = m.h[i];
    for &(nbr, j) in &adj[i] {
        f += j * spins[nbr] as f64;
    }
    f
}

fn random_spins(rng: &mut impl Rng, dim: usize) -> Vec<i8> {
    (0..dim).map(|_| if rng.gen::<bool>() { 1i8 } else { -1 }).collect()
}

fn pool_from_states(
    m: &IsingInstance,
    states: Vec<Vec<i8>>,
    reads: usize,
) -> SolutionPool {
    let mut counts: BTreeMap<Vec<i8>, usize> = BTreeMap::new();
    for s in states {
        *counts.entry(s).or_insert(0) += 1;
    }
    let mut records: Vec<SampleRecord> = counts
        .into_iter()
        .map(|(spins, multiplicity)| SampleRecord {
            energy: m.energy(&spins),
            spins,
            multiplicity,
        })
        .collect();
    // ascending energy, lexicographic spins on ties
    records.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap()
            .then_with(|| a.spins.cmp(&b.spins))
    });
    SolutionPool {
        records,
        instance_digest: instance_digest(m),
        reads,
    }
}

/// Classical simulated annealing: per read, `sweeps` full Metropolis sweeps
/// with beta raised linearly, single-spin-flip acceptance min(1, exp(-b dE)).
pub fn simulated_anneal(
    m: &IsingInstance,
    s: &AnnealSchedule,
    seed: u64,
) -> Result<SolutionPool> {
    s.validate(false)?;
    let adj = adjacency(m);
    let states: Vec<Vec<i8>> = (0..s.reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = stream_rng(seed, STREAM_READ + read as u64);
            let mut spins = random_spins(&mut rng, m.dim);
            for sweep in 0..s.sweeps {
                let beta = s.beta_at(sweep);
                for i in 0..m.dim {
                    let delta = -2.0 * spins[i] as f64 * local_field(m, &adj, &spins, i);
                    if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                        spins[i] = -spins[i];
                    }
                }
            }
            spins
        })
        .collect();
    Ok(pool_from_states(m, states, s.reads))
}

/// Path-integral simulated quantum annealing with `trotter_slices` periodic
/// replicas. The transverse field is lowered while beta is raised; slices
/// couple ferromagnetically with strength -(P/(2b)) ln tanh(bG/P). The
/// returned state per read is the replica with the lowest classical energy.
pub fn simulated_quantum_anneal(
    m: &IsingInstance,
    s: &AnnealSchedule,
    seed: u64,
) -> Result<SolutionPool> {
    s.validate(true)?;
    let adj = adjacency(m);
    let p = s.trotter_slices;
    let states: Vec<Vec<i8>> = (0..s.reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = stream_rng(seed, STREAM_READ + read as u64);
            let mut slices: Vec<Vec<i8>> =
                (0..p).map(|_| random_spins(&mut rng, m.dim)).collect();
            for sweep in 0..s.sweeps {
                let beta = s.beta_at(sweep);
                let gamma = s.gamma_at(sweep);
                // clamp keeps ln tanh finite when beta*gamma/P underflows
                let arg = (beta * gamma / p as f64).max(1e-12);
                let j_perp = -(p as f64 / (2.0 * beta)) * arg.tanh().ln();
                for k in 0..p {
                    let up = (k + 1) % p;
                    let down = (k + p - 1) % p;
                    for i in 0..m.dim {
                        let spin = slices[k][i] as f64;
                        let classical = local_field(m, &adj, &slices[k], i) / p as f64;
                        let trotter =
                            j_perp * (slices[up][i] as f64 + slices[down][i] as f64);
                        let delta = -2.0 * spin * classical + 2.0 * spin * trotter;
                        if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                            slices[k][i] = -slices[k][i];
                        }
                    }
                }
            }
            slices
                .into_iter()
                .min_by(|a, b| {
                    m.energy(a)
                        .partial_cmp(&m.energy(b))
                        .unwrap()
                        .then_with(|| a.cmp(b))
                })
                .unwrap()
        })
        .collect();
    Ok(pool_from_states(m, states, s.reads))
}

/// Exhaustive enumeration of all 2^dim states, refused above
/// [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_solve(m: &IsingInstance) -> Result<SolutionPool> {
    if m.dim > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceTooLarge {
            dim: m.dim,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let adj = adjacency(m);
    let total = 1usize << m.dim;
    // Gray-code walk: consecutive states differ by one flipped spin.
    let mut spins = vec![-1i8; m.dim];
    let mut energy = m.energy(&spins);
    let mut records = Vec::with_capacity(total);
    records.push(SampleRecord {
        spins: spins.clone(),
        energy,
        multiplicity: 1,
    });
    for state in 1..total {
        let bit = state.trailing_zeros() as usize;
        energy += -2.0 * spins[bit] as f64 * local_field(m, &adj, &spins, bit);
        spins[bit] = -spins[bit];
        records.push(SampleRecord {
            spins: spins.clone(),
            energy,
            multiplicity: 1,
        });
    }
    records.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap()
            .then_with(|| a.spins.cmp(&b.spins))
    });
    Ok(SolutionPool {
        records,
        instance_digest: instance_digest(m),
        reads: total,
    })
}

/// Unweighted mean of the min(K, |pool|) lowest-energy distinct states,
/// converted to binary weights w = (sigma + 1)/2.
pub fn ensemble_average(pool: &SolutionPool, k: usize) -> Result<Vec<f64>> {
    if pool.records.is_empty() {
        return Err(Error::EmptyPool);
    }
    if k < 1 || k > MAX_ENSEMBLE_K {
        return Err(Error::Config(format!(
            "ensemble size {k} outside 1..={MAX_ENSEMBLE_K}"
        )));
    }
    let take = k.min(pool.records.len());
    let dim = pool.records[0].spins.len();
    let mut mean = vec![0.0; dim];
    for rec in &pool.records[..take] {
        for (acc, &s) in mean.iter_mut().zip(&rec.spins) {
            *acc += if s > 0 { 1.0 } else { 0.0 };
        }
    }
    for v in &mut mean {
        *v /= take as f64;
    }
    Ok(mean)
}
