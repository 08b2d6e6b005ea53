//! Exact discrete distributions over rewards in `[0, c_max]`.
//!
//! [`DiscreteValueDistribution`] is the carrier for every reward-level
//! quantity in the crate: CDFs, capped expectations `E[max{c, r}]`, the
//! downward shift used when deploying policies from learned distributions,
//! and all distances in [`crate::metrics`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this are merged at construction.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Weight sums further than this from 1 are normalized with a warning.
pub const WEIGHT_WARN_TOL: f64 = 1e-9;

/// A real-valued distribution with finitely many atoms in `[0, c_max]`.
///
/// Atoms are strictly increasing and every weight is positive. The CDF is
/// right-continuous: `cdf(z) = Pr[r <= z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteValueDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    c_max: f64,
    /// `cumulative[i] = Pr[r <= atoms[i]]`, last entry pinned to exactly 1.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    c_max: f64,
}

impl TryFrom<RawDistribution> for DiscreteValueDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Self::new(raw.atoms, raw.weights, raw.c_max)
    }
}

impl From<DiscreteValueDistribution> for RawDistribution {
    fn from(d: DiscreteValueDistribution) -> Self {
        RawDistribution {
            atoms: d.atoms,
            weights: d.weights,
            c_max: d.c_max,
        }
    }
}

impl DiscreteValueDistribution {
    /// Builds a distribution from possibly unsorted, duplicated atoms.
    ///
    /// Duplicate atoms (within [`ATOM_MERGE_TOL`]) are merged by summing
    /// weights, zero weights are dropped, and weights are normalized to sum
    /// to one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>, c_max: f64) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "atoms vs weights",
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if !c_max.is_finite() || c_max < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "c_max must be finite and non-negative, got {c_max}"
            )));
        }
        let mut pairs = Vec::with_capacity(atoms.len());
        for (&a, &w) in atoms.iter().zip(&weights) {
            if !a.is_finite() || !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite atom or weight ({a}, {w})"
                )));
            }
            if w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "negative weight {w} at atom {a}"
                )));
            }
            if a < -ATOM_MERGE_TOL || a > c_max + ATOM_MERGE_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "atom {a} outside [0, {c_max}]"
                )));
            }
            if w > 0.0 {
                pairs.push((a.clamp(0.0, c_max), w));
            }
        }
        if pairs.is_empty() {
            return Err(Error::InvalidDistribution(
                "no atom with positive weight".into(),
            ));
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut merged_atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged_atoms.last() {
                Some(&prev) if a - prev <= ATOM_MERGE_TOL => {
                    *merged_weights.last_mut().unwrap() += w;
                }
                _ => {
                    merged_atoms.push(a);
                    merged_weights.push(w);
                }
            }
        }

        let total: f64 = merged_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_WARN_TOL {
            log::warn!("distribution weights sum to {total}; normalizing");
        }
        for w in &mut merged_weights {
            *w /= total;
        }
        Ok(Self::from_parts(merged_atoms, merged_weights, c_max))
    }

    /// Assumes atoms sorted, merged and weights normalized.
    fn from_parts(atoms: Vec<f64>, weights: Vec<f64>, c_max: f64) -> Self {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc.min(1.0));
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            atoms,
            weights,
            c_max,
            cumulative,
        }
    }

    /// Point mass at `a`.
    pub fn point(a: f64, c_max: f64) -> Result<Self> {
        Self::new(vec![a], vec![1.0], c_max)
    }

    /// Equal weight on every given atom (duplicates accumulate weight).
    pub fn uniform(atoms: Vec<f64>, c_max: f64) -> Result<Self> {
        let w = vec![1.0; atoms.len()];
        Self::new(atoms, w, c_max)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// `Pr[r <= z]`.
    pub fn cdf(&self, z: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a <= z);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `Pr[r < z]`, the left limit of the CDF at `z`.
    pub fn cdf_left(&self, z: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < z);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `Pr[r >= p]`.
    pub fn prob_at_least(&self, p: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < p);
        self.weights[idx..].iter().sum()
    }

    /// `Pr[r <= atoms[i]]` without re-searching.
    pub(crate) fn cumulative_at(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    /// `E[max{c, r}]`. Nondecreasing and 1-Lipschitz in `c`.
    pub fn capped_expectation(&self, c: f64) -> f64 {
        self.iter().map(|(a, w)| w * a.max(c)).sum()
    }

    /// The distribution with CDF `min{F(z + eps) + eps, 1}`.
    ///
    /// Mass that would land below zero is collapsed onto the atom 0, so the
    /// result stays inside `[0, c_max]` and is stochastically dominated by
    /// `self`.
    pub fn shift_plus_eps(&self, eps: f64) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 || !eps.is_finite() {
            return Err(Error::arg("eps", format!("must be finite and >= 0, got {eps}")));
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let mut atoms = Vec::with_capacity(self.len() + 1);
        let mut weights = Vec::with_capacity(self.len() + 1);

        // Everything the shifted CDF has accumulated by z = 0, including
        // atoms that land within the merge tolerance of zero.
        let mut at_zero = (self.cdf(eps) + eps).min(1.0);
        for (i, &a) in self.atoms.iter().enumerate() {
            if a - eps <= ATOM_MERGE_TOL {
                at_zero = at_zero.max((self.cumulative[i] + eps).min(1.0));
            }
        }
        atoms.push(0.0);
        weights.push(at_zero);
        let mut prev = at_zero;
        for (i, &a) in self.atoms.iter().enumerate() {
            let z = a - eps;
            if z <= ATOM_MERGE_TOL {
                continue;
            }
            let level = (self.cumulative[i] + eps).min(1.0);
            let jump = level - prev;
            if jump > 0.0 {
                atoms.push(z);
                weights.push(jump);
                prev = level;
            }
        }
        Self::new(atoms, weights, self.c_max)
    }

    /// Draws one atom with probability equal to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.atoms[idx.min(self.atoms.len() - 1)]
    }

    /// Returns a point where `self` fails to dominate `other`, i.e. where
    /// `F_self(z) > F_other(z) + tol`, or `None` if `self` dominates.
    pub fn dominance_violation(&self, other: &Self, tol: f64) -> Option<f64> {
        self.atoms
            .iter()
            .chain(other.atoms.iter())
            .copied()
            .find(|&z| self.cdf(z) > other.cdf(z) + tol)
    }

    /// Atom-wise and weight-wise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((a, w), (b, v))| (a - b).abs() <= tol && (w - v).abs() <= tol)
    }
}
