use std::collections::BTreeMap;

use crate::algebra::{Axis, SpinSystem};
use crate::error::{Error, Result};

/// Index of a coupling-tensor entry: sites `i₁…i_{2n}` and axes `α₁…α_{2n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorKey {
    pub sites: Vec<usize>,
    pub axes: Vec<Axis>,
}

/// Sparse real coupling tensor `Q_{i₁…i_{2n}}^{α₁…α_{2n}}`; absent entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensor {
    order: usize,
    entries: BTreeMap<TensorKey, f64>,
}

impl CouplingTensor {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "coupling tensor order must be even and positive, got {order}"
            )));
        }
        Ok(CouplingTensor {
            order,
            entries: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sets an entry (replacing any previous value).
    pub fn insert(&mut self, sites: Vec<usize>, axes: Vec<Axis>, value: f64) -> Result<()> {
        if sites.len() != self.order || axes.len() != self.order {
            return Err(Error::domain(format!(
                "entry has {} sites and {} axes, tensor order is {}",
                sites.len(),
                axes.len(),
                self.order
            )));
        }
        if !value.is_finite() {
            return Err(Error::domain("coupling constants must be finite reals"));
        }
        self.entries.insert(TensorKey { sites, axes }, value);
        Ok(())
    }

    /// Adds to an entry.
    pub fn accumulate(&mut self, sites: Vec<usize>, axes: Vec<Axis>, value: f64) -> Result<()> {
        let prev = self.get(&sites, &axes);
        self.insert(sites, axes, prev + value)
    }

    pub fn get(&self, sites: &[usize], axes: &[Axis]) -> f64 {
        // BTreeMap lookup needs an owned key.
        let key = TensorKey {
            sites: sites.to_vec(),
            axes: axes.to_vec(),
        };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Order-2 shortcut `Q_{ij}^{ab}`.
    pub fn get2(&self, i: usize, j: usize, a: Axis, b: Axis) -> f64 {
        self.get(&[i, j], &[a, b])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TensorKey, &f64)> {
        self.entries.iter()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.entries.keys().flat_map(|k| k.sites.iter().copied()).max()
    }

    pub fn check_sites(&self, sys: &SpinSystem) -> Result<()> {
        match self.max_site() {
            Some(s) => sys.check_site(s),
            None => Ok(()),
        }
    }

    /// Entry-wise sum; orders must agree.
    pub fn plus(&self, other: &CouplingTensor) -> Result<CouplingTensor> {
        if self.order != other.order {
            return Err(Error::domain("cannot add tensors of different order"));
        }
        let mut out = self.clone();
        for (k, &v) in &other.entries {
            out.accumulate(k.sites.clone(), k.axes.clone(), v)?;
        }
        Ok(out)
    }
}

/// Nearest-neighbour tensor `Q_{i₁i₂}^{α₁α₂} = δ_{α₁α₂}` for every adjacent
/// pair, emitted for both orderings (no ½ factor).
pub fn heisenberg_tensor(adjacency: &[(usize, usize)]) -> Result<CouplingTensor> {
    let mut q = CouplingTensor::new(2)?;
    for &(i, j) in adjacency {
        if i == j {
            return Err(Error::domain(format!("self-pair ({i}, {i}) in adjacency")));
        }
        for a in Axis::ALL {
            q.insert(vec![i, j], vec![a, a], 1.0)?;
            q.insert(vec![j, i], vec![a, a], 1.0)?;
        }
    }
    Ok(q)
}
