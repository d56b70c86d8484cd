//! Network state snapshots: a directory holding the weight matrices, gains,
//! and sample counter as CSV files.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::io::csv::{read_csv_matrix, write_csv_matrix};
use crate::network::NetworkState;

const FEEDFORWARD_FILE: &str = "feedforward.csv";
const LATERAL_FILE: &str = "lateral.csv";
const GAINS_FILE: &str = "gains.csv";
const META_FILE: &str = "meta.csv";

/// Writes a state snapshot into `dir` (created if missing).
pub fn save_state(state: &NetworkState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv_matrix(&state.feedforward, &dir.join(FEEDFORWARD_FILE))?;
    write_csv_matrix(&state.lateral, &dir.join(LATERAL_FILE))?;
    let gains = state
        .gains
        .view()
        .insert_axis(ndarray::Axis(0))
        .to_owned();
    write_csv_matrix(&gains, &dir.join(GAINS_FILE))?;
    std::fs::write(dir.join(META_FILE), format!("{}\n", state.t))?;
    Ok(())
}

/// Reads a snapshot written by [`save_state`].
pub fn load_state(dir: &Path) -> Result<NetworkState> {
    let feedforward = read_csv_matrix(&dir.join(FEEDFORWARD_FILE))?;
    let lateral = read_csv_matrix(&dir.join(LATERAL_FILE))?;
    let gains_matrix: Array2<f64> = read_csv_matrix(&dir.join(GAINS_FILE))?;
    if gains_matrix.nrows() != 1 {
        return Err(Error::Format(format!(
            "gain snapshot must be a single row, got {} rows",
            gains_matrix.nrows()
        )));
    }
    let gains: Array1<f64> = gains_matrix.row(0).to_owned();
    let meta = std::fs::read_to_string(dir.join(META_FILE))?;
    let t: u64 = meta.trim().parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("invalid sample counter: {:?}", meta.trim()),
    })?;
    NetworkState::from_parts(feedforward, lateral, gains, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig::default();
        let mut state = NetworkState::init(4, &cfg).unwrap();
        state.t = 123;
        state.gains[2] = 2.7;
        save_state(&state, dir.path()).unwrap();
        let back = load_state(dir.path()).unwrap();
        assert_eq!(back.feedforward, state.feedforward);
        assert_eq!(back.lateral, state.lateral);
        assert_eq!(back.gains, state.gains);
        assert_eq!(back.t, 123);
    }

    #[test]
    fn asymmetric_snapshot_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig::default();
        let mut state = NetworkState::init(2, &cfg).unwrap();
        state.lateral[[0, 1]] = 0.5; // breaks symmetry
        save_state(&state, dir.path()).unwrap();
        assert!(load_state(dir.path()).is_err());
    }
}
