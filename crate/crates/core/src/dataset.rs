use ndarray::Array2;

use crate::builders::RestMatrix;
use crate::error::{Error, Result};

/// Task observations of one subject (or one simulated run) plus the rest
/// signals and region coordinates used to build its graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `T×N`, observations × regions.
    pub signals: Array2<f64>,
    /// Binary condition code per observation.
    pub labels: Vec<u8>,
    /// Session id per observation.
    pub sessions: Vec<u32>,
    pub rest: RestMatrix,
    /// `N×3`, millimetres.
    pub coords: Array2<f64>,
    pub subject_id: String,
}

impl Dataset {
    pub fn new(
        signals: Array2<f64>,
        labels: Vec<u8>,
        sessions: Vec<u32>,
        rest: RestMatrix,
        coords: Array2<f64>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        let (t, n) = signals.dim();
        if labels.len() != t || sessions.len() != t {
            return Err(Error::Dimension(format!(
                "{t} observations but {} labels and {} session ids",
                labels.len(),
                sessions.len()
            )));
        }
        if rest.n_regions() != n {
            return Err(Error::Dimension(format!(
                "signals have {n} regions, rest matrix has {}",
                rest.n_regions()
            )));
        }
        if coords.nrows() != n || coords.ncols() != 3 {
            return Err(Error::Dimension(format!(
                "signals have {n} regions, coordinates are {}x{}",
                coords.nrows(),
                coords.ncols()
            )));
        }
        if let Some(((i, j), v)) = signals.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("signal value at observation {i}, region {j} is {v}")));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("label {} at observation {i} is not binary", labels[i])));
        }
        let ds = Dataset {
            signals,
            labels,
            sessions,
            rest,
            coords,
            subject_id: subject_id.into(),
        };
        for s in ds.session_ids() {
            let mut seen = [false; 2];
            for (&l, _) in ds.labels.iter().zip(&ds.sessions).filter(|(_, &x)| x == s) {
                seen[l as usize] = true;
            }
            if !(seen[0] && seen[1]) {
                return Err(Error::Data(format!("session {s} does not contain both conditions")));
            }
        }
        Ok(ds)
    }

    pub fn n_observations(&self) -> usize {
        self.signals.nrows()
    }

    pub fn n_regions(&self) -> usize {
        self.signals.ncols()
    }

    /// Distinct session ids, ascending.
    pub fn session_ids(&self) -> Vec<u32> {
        let mut s = self.sessions.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn condition_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Same dataset with labels `0 ↔ 1` swapped.
    pub fn with_swapped_labels(&self) -> Dataset {
        Dataset {
            labels: self.labels.iter().map(|l| 1 - l).collect(),
            ..self.clone()
        }
    }
}
