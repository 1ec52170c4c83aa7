use std::fmt;
use std::str::FromStr;

use crate::algebra::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Spin quantum number `s`, stored as `2s` so half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);

    /// Spin with `2s = twice`; `twice` must be positive.
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::domain("spin quantum number must be positive"));
        }
        Ok(Spin(twice))
    }

    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !(twice.is_finite() && twice >= 1.0 && (twice - twice.round()).abs() < 1e-12) {
            return Err(Error::domain(format!("{s} is not a positive half-integer")));
        }
        Spin::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Local dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    pub fn is_half(self) -> bool {
        self.0 == 1
    }

    /// `m` of local basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// `s(s+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad spin '{s}'")))?;
            return match den.trim() {
                "2" => Spin::from_twice(num),
                "1" => Spin::from_twice(2 * num),
                _ => Err(Error::domain(format!("bad spin '{s}'"))),
            };
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::domain(format!("bad spin '{s}'")))?;
        Spin::from_f64(v)
    }
}

/// Spin axis `α ∈ {1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            1 => Ok(Axis::X),
            2 => Ok(Axis::Y),
            3 => Ok(Axis::Z),
            _ => Err(Error::domain(format!("axis label {label} not in {{1,2,3}}"))),
        }
    }

    pub fn from_index(index: usize) -> Self {
        Axis::ALL[index]
    }

    /// External label, 1-based.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// `ε_{abc}` on 0-based indices.
pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Targets of `S^α |k⟩` in the local basis: at most two `(k', amplitude)` pairs.
pub(crate) fn site_action(spin: Spin, axis: Axis, k: usize) -> ([(usize, C64); 2], usize) {
    let s = spin.value();
    let m = spin.m(k);
    let zero = (0usize, C64::new(0.0, 0.0));
    match axis {
        Axis::Z => ([(k, C64::new(m, 0.0)), zero], 1),
        Axis::X | Axis::Y => {
            let mut out = [zero; 2];
            let mut n = 0;
            // S⁺|m⟩ lands on index k − 1, S⁻|m⟩ on k + 1.
            if k > 0 {
                let up = (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
                let amp = match axis {
                    Axis::X => C64::new(0.5 * up, 0.0),
                    _ => C64::new(0.0, -0.5 * up),
                };
                out[n] = (k - 1, amp);
                n += 1;
            }
            if k + 1 < spin.dim() {
                let down = (s * (s + 1.0) - m * (m - 1.0)).max(0.0).sqrt();
                let amp = match axis {
                    Axis::X => C64::new(0.5 * down, 0.0),
                    _ => C64::new(0.0, 0.5 * down),
                };
                out[n] = (k + 1, amp);
                n += 1;
            }
            (out, n)
        }
    }
}

/// Spin-`s` representation of `S^α`, a `(2s+1)×(2s+1)` Hermitian matrix.
pub fn single_spin_matrix(spin: Spin, axis: Axis) -> DenseOperator {
    let d = spin.dim();
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        let (targets, n) = site_action(spin, axis, k);
        for &(row, amp) in &targets[..n] {
            m[(row, k)] += amp;
        }
    }
    DenseOperator::new_hermitian_unchecked(m)
}

/// Sites with their spin quantum numbers; fixes the Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinSystem {
    spins: Vec<Spin>,
    strides: Vec<usize>,
    dim: usize,
}

impl SpinSystem {
    pub fn new(spins: Vec<Spin>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::domain("a spin system needs at least one site"));
        }
        let mut dim: usize = 1;
        for s in &spins {
            dim = dim
                .checked_mul(s.dim())
                .ok_or_else(|| Error::domain("Hilbert-space dimension overflows"))?;
        }
        let mut strides = vec![1; spins.len()];
        for i in (0..spins.len() - 1).rev() {
            strides[i] = strides[i + 1] * spins[i + 1].dim();
        }
        Ok(SpinSystem { spins, strides, dim })
    }

    pub fn uniform(sites: usize, spin: Spin) -> Result<Self> {
        SpinSystem::new(vec![spin; sites])
    }

    pub fn spin_half(sites: usize) -> Result<Self> {
        SpinSystem::uniform(sites, Spin::HALF)
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, site: usize) -> Spin {
        self.spins[site]
    }

    pub fn site_dim(&self, site: usize) -> usize {
        self.spins[site].dim()
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn all_spin_half(&self) -> bool {
        self.spins.iter().all(|s| s.is_half())
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::domain(format!(
                "site index {site} out of range for {} sites",
                self.n_sites()
            )));
        }
        Ok(())
    }

    /// Local index of `site` in the global basis index `index`.
    pub fn local_index(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.spins[site].dim()
    }

    /// `2m` of every site for a global basis index.
    pub fn twice_m(&self, index: usize) -> Vec<i32> {
        (0..self.n_sites())
            .map(|i| self.spins[i].twice() as i32 - 2 * self.local_index(index, i) as i32)
            .collect()
    }
}
