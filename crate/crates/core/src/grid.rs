use crate::error::{Error, Result};

/// Strictly increasing sequence of time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::domain("a time grid needs at least two nodes"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("time grid contains non-finite values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        Ok(TimeGrid { times })
    }

    /// `steps` equal intervals on `[t_start, t_end]` (`steps + 1` nodes).
    pub fn uniform(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::domain("a uniform grid needs at least one step"));
        }
        if !(t_end > t_start) {
            return Err(Error::domain("t_end must exceed t_start"));
        }
        let h = (t_end - t_start) / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|k| t_start + k as f64 * h).collect();
        times[steps] = t_end;
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Smallest interval length.
    pub fn min_spacing(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index of the interval `[t_k, t_{k+1}]` containing `t`.
    pub fn segment(&self, t: f64) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::domain(format!(
                "t = {t} outside grid [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        let k = self.times.partition_point(|&x| x <= t);
        Ok(k.saturating_sub(1).min(self.times.len() - 2))
    }

    /// Index of the node closest to `t` (ties go to the earlier node).
    pub fn nearest(&self, t: f64) -> Result<usize> {
        let k = self.segment(t)?;
        let (a, b) = (self.times[k], self.times[k + 1]);
        Ok(if t - a <= b - t { k } else { k + 1 })
    }
}
