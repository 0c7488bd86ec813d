use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Running per-feature mean and variance (Welford), used to standardize
/// network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    clip: f64,
    min_std: f64,
}

impl Normalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim], clip, min_std: 1e-2 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|&m2| {
                let var = if self.count > 1 { m2 / self.count as f64 } else { 0.0 };
                var.sqrt().max(self.min_std)
            })
            .collect()
    }

    pub fn update(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!("row of {} values, normalizer has {}", row.len(), self.dim())));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(row) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    /// Standardizes and clips every row.
    pub fn normalize(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!("{} columns, normalizer has {}", x.ncols(), self.dim())));
        }
        let std = self.std();
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&std) {
                *v = ((*v - m) / s).clamp(-self.clip, self.clip);
            }
        }
        Ok(out)
    }

    pub(crate) fn state(&self) -> (u64, &[f64], &[f64], f64) {
        (self.count, &self.mean, &self.m2, self.clip)
    }

    pub(crate) fn from_state(count: u64, mean: Vec<f64>, m2: Vec<f64>, clip: f64) -> Result<Self> {
        if mean.len() != m2.len() {
            return Err(Error::Checkpoint("normalizer mean and variance lengths differ".into()));
        }
        Ok(Self { count, mean, m2, clip, min_std: 1e-2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matches_two_pass_statistics() {
        let rows = [[1.0, 10.0], [2.0, 10.0], [4.0, 10.0], [9.0, 10.0]];
        let mut norm = Normalizer::new(2, 5.0);
        for r in &rows {
            norm.update(r).unwrap();
        }
        let mean = rows.iter().map(|r| r[0]).sum::<f64>() / 4.0;
        let var = rows.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((norm.mean()[0] - mean).abs() < 1e-12);
        assert!((norm.std()[0] - var.sqrt()).abs() < 1e-12);
        // constant feature falls back to the minimum std
        assert_eq!(norm.std()[1], 1e-2);
        let z = norm.normalize(array![[mean + var.sqrt(), 1e6]].view()).unwrap();
        assert!((z[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(z[[0, 1]], 5.0);
    }
}
