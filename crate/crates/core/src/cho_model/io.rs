//! State snapshots: a flat little-endian binary file plus a JSON sidecar.
//!
//! Binary layout: `n: u64`, `N: u64`, `ℓ: f64`, `time: f64`, then the stored
//! coefficients of `u` followed by those of `∂_t u`, each as `re, im` pairs of `f64`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::{Grid, GridSpec};
use super::{PhysParams, State};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub grid: GridSpec,
    pub params: PhysParams,
    pub time: f64,
    pub n_modes: usize,
    pub wavevectors: Vec<[i32; 3]>,
}

pub fn encode_state(grid: &Grid, state: &State, time: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 32 * grid.n_modes());
    out.extend_from_slice(&(grid.spatial_dim() as u64).to_le_bytes());
    out.extend_from_slice(&(grid.modes_per_axis() as u64).to_le_bytes());
    out.extend_from_slice(&grid.spec().length_scale.to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for c in state.u.coeffs.iter().chain(&state.ut.coeffs) {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Decodes a snapshot; returns `(spatial_dim, modes_per_axis, length_scale, time, state)`.
pub fn decode_state(bytes: &[u8]) -> Result<(usize, usize, f64, f64, State)> {
    if bytes.len() < 32 || !(bytes.len() - 32).is_multiple_of(32) {
        return Err(Error::InvalidArgument(format!("snapshot of {} bytes has an invalid length", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("eight bytes") };
    let n = u64::from_le_bytes(word(0)) as usize;
    let big_n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let time = f64::from_le_bytes(word(3));
    let modes = (bytes.len() - 32) / 32;
    let coeff = |k: usize| Complex64::new(f64::from_le_bytes(word(4 + 2 * k)), f64::from_le_bytes(word(5 + 2 * k)));
    let u = (0..modes).map(coeff).collect();
    let ut = (modes..2 * modes).map(coeff).collect();
    Ok((n, big_n, l, time, State { u: SpectralField { coeffs: u }, ut: SpectralField { coeffs: ut } }))
}

pub fn write_snapshot(path: &Path, grid: &Grid, params: &PhysParams, state: &State, time: f64) -> Result<()> {
    fs::write(path, encode_state(grid, state, time))?;
    let sidecar = SnapshotSidecar {
        grid: grid.spec().clone(),
        params: params.clone(),
        time,
        n_modes: grid.n_modes(),
        wavevectors: grid.wavevectors().to_vec(),
    };
    fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a snapshot and checks it against `grid`.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<(f64, State)> {
    let (n, big_n, l, time, state) = decode_state(&fs::read(path)?)?;
    if n != grid.spatial_dim() || big_n != grid.modes_per_axis() || l != grid.spec().length_scale {
        return Err(Error::InvalidArgument(format!(
            "snapshot grid (n = {n}, N = {big_n}, l = {l}) does not match the configured grid"
        )));
    }
    if state.u.len() != grid.n_modes() {
        return Err(Error::DimensionMismatch { expected: grid.n_modes(), found: state.u.len() });
    }
    Ok((time, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cho_model::Nonlinearity;

    #[test]
    fn snapshot_round_trip() {
        let grid = Grid::new(GridSpec::new(2, 8, 1.25)).unwrap();
        let r = grid.n_modes();
        let s = State {
            u: SpectralField { coeffs: (0..r).map(|i| Complex64::new(i as f64 * 0.1, -1.0 / 3.0)).collect() },
            ut: SpectralField { coeffs: (0..r).map(|i| Complex64::new(1e-300, i as f64)).collect() },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        write_snapshot(&path, &grid, &PhysParams::new(1.0, Nonlinearity::Cubic), &s, 2.5).unwrap();
        let (t, back) = read_snapshot(&path, &grid).unwrap();
        assert_eq!(t, 2.5);
        assert_eq!(back, s);
        let side: SnapshotSidecar =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        assert_eq!(side.n_modes, r);
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        assert!(decode_state(&[0u8; 40]).is_err());
    }
}
