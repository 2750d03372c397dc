//! Reproducible Brownian increments on uniform grids.
//!
//! Increment `k` of path `p` under seed `s` is a pure function of
//! `(s, p, k, dt)`: a ChaCha8 block cipher keyed by `s`, with `p` as the
//! stream id and `k` as the word position, feeds one uniform into the normal
//! quantile. Workers can therefore generate any subset of paths in any order.
//!
//! Increments are snapped to the dyadic lattice `2^-40`. Sums of lattice
//! values are exact in `f64` while partial sums stay below `2^13` in
//! magnitude, so regrouping increments (coarsening, prefix sums, the
//! terminal value) never depends on summation order.

use std::io::{self, Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

use crate::error::{invalid, Result};

/// Spacing of the increment lattice.
pub const LATTICE: f64 = 1.0 / (1u64 << 40) as f64;

/// Uniform partition of `[0, horizon]` into `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_steps: usize,
    horizon: f64,
}

impl GridSpec {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon must be positive and finite (got {horizon})"
            )));
        }
        Ok(Self { n_steps, horizon })
    }

    /// `n_steps` steps over `[0, 1]`.
    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(n_steps, 1.0)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// One Brownian path sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    spec: GridSpec,
    increments: Vec<f64>,
    seed: u64,
    path_index: u64,
}

impl BrownianGrid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dt(&self) -> f64 {
        self.spec.dt()
    }

    /// `ΔB_k = B(t_{k+1}) − B(t_k)`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// Node values `B(t_0) = 0, B(t_1), ..., B(T)`.
    pub fn node_values(&self) -> Vec<f64> {
        let mut nodes = Vec::with_capacity(self.increments.len() + 1);
        let mut b = 0.0;
        nodes.push(b);
        for &db in &self.increments {
            b += db;
            nodes.push(b);
        }
        nodes
    }

    /// `B(T)`.
    pub fn terminal_value(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Writes the debug dump: `N: u64, T: f64, seed: u64, path_index: u64`
    /// followed by the `N` increments, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.spec.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.spec.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.path_index.to_le_bytes())?;
        for db in &self.increments {
            w.write_all(&db.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump produced by [`BrownianGrid::write_binary`].
    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?);
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let path_index = u64::from_le_bytes(next(&mut r)?);
        let n_steps =
            usize::try_from(n).map_err(|_| bad_data("step count does not fit in usize"))?;
        let spec = GridSpec::new(n_steps, horizon).map_err(|e| bad_data(&e.to_string()))?;
        let increments = (0..n_steps)
            .map(|_| next(&mut r).map(f64::from_le_bytes))
            .collect::<io::Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            increments,
            seed,
            path_index,
        })
    }
}

fn bad_data(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn stream(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal quantile Φ⁻¹(p) for `p` in (0, 1).
#[inline]
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

#[inline]
fn snap(x: f64) -> f64 {
    (x / LATTICE).round() * LATTICE
}

#[inline]
fn increment_from_bits(bits: u64, sqrt_dt: f64) -> f64 {
    snap(sqrt_dt * normal_quantile(open_unit(bits)))
}

/// Samples the path `path_index` under `seed` on `spec`.
pub fn generate(spec: GridSpec, seed: u64, path_index: u64) -> BrownianGrid {
    let mut rng = stream(seed, path_index);
    let sqrt_dt = spec.dt().sqrt();
    let increments = (0..spec.n_steps)
        .map(|_| increment_from_bits(rng.next_u64(), sqrt_dt))
        .collect();
    BrownianGrid {
        spec,
        increments,
        seed,
        path_index,
    }
}

/// Random access to a single increment; agrees bit-for-bit with
/// `generate(spec, seed, path_index).increments()[step]`.
pub fn increment_at(spec: GridSpec, seed: u64, path_index: u64, step: usize) -> Result<f64> {
    if step >= spec.n_steps {
        return Err(invalid(format!(
            "step {step} outside a grid of {} steps",
            spec.n_steps
        )));
    }
    let mut rng = stream(seed, path_index);
    rng.set_word_pos(2 * step as u128);
    Ok(increment_from_bits(rng.next_u64(), spec.dt().sqrt()))
}

/// The same Brownian path on a grid `factor` times coarser.
pub fn coarsen(fine: &BrownianGrid, factor: usize) -> Result<BrownianGrid> {
    let n = fine.spec.n_steps;
    if factor == 0 || !n.is_multiple_of(factor) {
        return Err(invalid(format!(
            "coarsening factor {factor} does not divide {n} steps"
        )));
    }
    let increments = fine
        .increments
        .chunks_exact(factor)
        .map(|block| block.iter().sum())
        .collect();
    Ok(BrownianGrid {
        spec: GridSpec::new(n / factor, fine.spec.horizon)?,
        increments,
        seed: fine.seed,
        path_index: fine.path_index,
    })
}

/// Piecewise-linear interpolation of the node values at time `t`.
pub fn polygonal_value(g: &BrownianGrid, t: f64) -> Result<f64> {
    let horizon = g.spec.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(invalid(format!("time {t} outside [0, {horizon}]")));
    }
    let dt = g.dt();
    let k = ((t / dt).floor() as usize).min(g.spec.n_steps - 1);
    let left: f64 = g.increments[..k].iter().sum();
    let frac = (t - k as f64 * dt) / dt;
    Ok(left + frac * g.increments[k])
}
