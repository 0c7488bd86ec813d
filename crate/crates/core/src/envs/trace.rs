//! JSON-lines episode traces.
//!
//! One record per timestep `t = 0..=T`. Record `t` holds the state `s_t`
//! together with the action taken from it and the reward that action
//! earned; the final record of an episode has neither. A record with
//! `t == 0` starts a new episode, so several episodes can share a file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams, ObjectState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub gripper: [f64; 3],
    pub object_position: [f64; 3],
    pub object_quaternion: [f64; 4],
    pub action: Option<Vec<f64>>,
    pub reward: Option<f64>,
    pub achieved_goal: Vec<f64>,
    pub goal: Vec<f64>,
}

impl TraceRecord {
    pub fn object_state(&self) -> Result<ObjectState> {
        ObjectState::new(self.object_position, self.object_quaternion)
    }
}

pub fn write_trace(path: &Path, episodes: &[Vec<TraceRecord>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in episodes.iter().flatten() {
        let line = serde_json::to_string(record).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a trace file and splits it into episodes at every `t == 0`.
pub fn read_trace(path: &Path) -> Result<Vec<Vec<TraceRecord>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut episodes: Vec<Vec<TraceRecord>> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        match episodes.last_mut() {
            Some(current) if record.t != 0 => {
                let expected = current.last().map_or(0, |r| r.t + 1);
                if record.t != expected {
                    return Err(Error::Parse(format!(
                        "{}:{}: timestep {} follows {}",
                        path.display(),
                        lineno + 1,
                        record.t,
                        expected - 1
                    )));
                }
                current.push(record);
            }
            None if record.t != 0 => {
                return Err(Error::Parse(format!(
                    "{}:{}: trace must start at t = 0",
                    path.display(),
                    lineno + 1
                )));
            }
            _ => episodes.push(vec![record]),
        }
    }
    Ok(episodes)
}

/// Trajectory energy of each traced episode.
pub fn trace_energies(episodes: &[Vec<TraceRecord>], params: &EnergyParams) -> Result<Vec<f64>> {
    episodes
        .iter()
        .map(|records| {
            let states = records
                .iter()
                .map(TraceRecord::object_state)
                .collect::<Result<Vec<_>>>()?;
            energy::trajectory_energy(&states, params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize, z: f64) -> TraceRecord {
        TraceRecord {
            t,
            gripper: [0.0; 3],
            object_position: [0.0, 0.0, z],
            object_quaternion: [1.0, 0.0, 0.0, 0.0],
            action: None,
            reward: None,
            achieved_goal: vec![0.0, 0.0, z],
            goal: vec![0.0, 0.0, 0.1],
        }
    }

    #[test]
    fn episodes_split_on_t_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let episodes = vec![
            vec![record(0, 0.0), record(1, 0.01), record(2, 0.02)],
            vec![record(0, 0.0), record(1, 0.0)],
        ];
        write_trace(&path, &episodes).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back, episodes);
        let energies = trace_energies(&back, &EnergyParams::default()).unwrap();
        assert!(energies[0] > 0.0);
        assert_eq!(energies[1], 0.0);
    }

    #[test]
    fn gaps_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        write_trace(&path, &[vec![record(0, 0.0), record(2, 0.0)]]).unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Parse(_))));
        write_trace(&path, &[vec![record(1, 0.0)]]).unwrap();
        assert!(read_trace(&path).is_err());
    }
}
