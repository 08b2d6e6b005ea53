//! Ground-truth contextual value distributions.
//!
//! A contextual value distribution is a triple `(V*, X, f)`: a hidden
//! weight distribution `V*` over `[0,1]^d`, a context distribution `X` over
//! `[0,1]^d`, and a known reward map `f(v, x)`. A labeled sample is
//! `(x, f(v, x))` with `x ~ X` and `v ~ V*` drawn independently; `v` is never
//! revealed. Fixing a context `x` pushes `V*` forward to a real-valued
//! distribution, see [`induced_value_distribution`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value_dist::{DiscreteValueDistribution, WEIGHT_WARN_TOL};

/// A finite distribution over vectors in `[0,1]^d`.
///
/// Used both for weight distributions (`V*`, and the learner's uniform
/// hypotheses) and as the support of finite context distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightDistribution {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightDistribution {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        Self::new(raw.atoms, raw.weights)
    }
}

impl From<WeightDistribution> for RawWeights {
    fn from(w: WeightDistribution) -> Self {
        RawWeights {
            atoms: w.atoms,
            weights: w.weights,
        }
    }
}

impl WeightDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "atoms vs weights",
                left: atoms.len(),
                right: weights.len(),
            });
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::InvalidDistribution("zero-dimensional atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if let Some(c) = a.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i} has coordinate {c} outside [0, 1]"
                )));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weights must be positive, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_WARN_TOL {
            log::warn!("weight distribution sums to {total}; normalizing");
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            atoms,
            weights,
        })
    }

    /// Uniform weights `1/k` on the given `k` atoms: the learner's hypothesis
    /// class.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let k = atoms.len();
        Self::new(atoms, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn point(v: Vec<f64>) -> Result<Self> {
        Self::new(vec![v], vec![1.0])
    }

    /// `k` atoms drawn uniformly from `[0,1]^d`, uniform weights.
    pub fn random_uniform<R: Rng + ?Sized>(k: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let atoms = (0..k)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::uniform(atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every weight equals `1/k` up to `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let target = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - target).abs() <= 1e-12)
    }

    /// Index of a drawn atom.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        &self.atoms[self.sample_index(rng)]
    }

    /// Squared Euclidean norm of the stacked atom coordinates.
    pub fn coordinate_norm_sq(&self) -> f64 {
        self.atoms.iter().flatten().map(|c| c * c).sum()
    }
}

/// The distribution contexts are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextDistribution {
    /// Finitely many context vectors with weights.
    Finite(WeightDistribution),
    /// Each coordinate independently uniform on `{0, step, 2 step, ...} ∩ [0,1]`.
    ProductUniform { dim: usize, step: f64 },
}

impl ContextDistribution {
    pub fn product_uniform(dim: usize, step: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dim", "must be positive"));
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::arg("step", format!("must lie in (0, 1], got {step}")));
        }
        Ok(ContextDistribution::ProductUniform { dim, step })
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        Ok(ContextDistribution::Finite(WeightDistribution::point(x)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            ContextDistribution::Finite(w) => w.dim(),
            ContextDistribution::ProductUniform { dim, .. } => *dim,
        }
    }

    fn grid_levels(step: f64) -> usize {
        (1.0 / step + 1e-9).floor() as usize + 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ContextDistribution::Finite(w) => w.sample(rng).to_vec(),
            ContextDistribution::ProductUniform { dim, step } => {
                let levels = Self::grid_levels(*step);
                (0..*dim)
                    .map(|_| (rng.random_range(0..levels) as f64 * step).min(1.0))
                    .collect()
            }
        }
    }
}

/// One affine map `<slope, v> + offset + <context_slope, x>` of a
/// max-affine reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub context_slope: Vec<f64>,
}

impl AffinePiece {
    fn eval(&self, v: &[f64], x: &[f64]) -> f64 {
        let vx: f64 = self.slope.iter().zip(v).map(|(a, b)| a * b).sum();
        let cx: f64 = self.context_slope.iter().zip(x).map(|(a, b)| a * b).sum();
        vx + self.offset + cx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    /// `<v, x>`.
    Linear,
    /// Maximum over affine pieces; convex in `v`.
    MaxAffine { pieces: Vec<AffinePiece> },
    /// `(1 - x_1 v_1) v_2`. Not convex in `v`.
    Gate,
}

/// Counts evaluations that fell outside `[0, c_max]` and were clamped.
#[derive(Default)]
pub struct ClampCounter(AtomicU64);

impl ClampCounter {
    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

impl Clone for ClampCounter {
    fn clone(&self) -> Self {
        ClampCounter(AtomicU64::new(self.get()))
    }
}

impl fmt::Debug for ClampCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.get())
    }
}

/// The known reward map `f(v, x)` with its declared range and Lipschitz
/// constant in `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardFunction {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: RewardKind,
    pub c_max: f64,
    pub xi: f64,
    #[serde(skip)]
    clamp_events: ClampCounter,
}

impl PartialEq for RewardFunction {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.kind == other.kind
            && self.c_max == other.c_max
            && self.xi == other.xi
    }
}

impl RewardFunction {
    /// `<v, x>` on `[0,1]^d`: range `[0, d]`, Lipschitz constant `sqrt(d)`.
    pub fn linear(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dim", "must be positive"));
        }
        Ok(Self::from_parts(
            dim,
            RewardKind::Linear,
            dim as f64,
            (dim as f64).sqrt(),
        ))
    }

    /// `(1 - x_1 v_1) v_2`, range `[0, 1]`.
    pub fn gate(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::arg("dim", "gate reward needs at least 2 dimensions"));
        }
        Ok(Self::from_parts(dim, RewardKind::Gate, 1.0, 2f64.sqrt()))
    }

    /// Max-affine reward with `xi` set to the largest slope norm.
    pub fn max_affine(dim: usize, pieces: Vec<AffinePiece>, c_max: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::arg("pieces", "at least one affine piece required"));
        }
        for p in &pieces {
            if p.slope.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.slope.len(),
                });
            }
            if !p.context_slope.is_empty() && p.context_slope.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.context_slope.len(),
                });
            }
        }
        if c_max.is_nan() || c_max <= 0.0 {
            return Err(Error::arg("c_max", "must be positive"));
        }
        let xi = pieces
            .iter()
            .map(|p| p.slope.iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self::from_parts(
            dim,
            RewardKind::MaxAffine { pieces },
            c_max,
            xi,
        ))
    }

    fn from_parts(dim: usize, kind: RewardKind, c_max: f64, xi: f64) -> Self {
        Self {
            dim,
            kind,
            c_max,
            xi,
            clamp_events: ClampCounter::default(),
        }
    }

    pub fn is_convex_in_v(&self) -> bool {
        !matches!(self.kind, RewardKind::Gate)
    }

    /// Number of evaluations clamped into `[0, c_max]` so far.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events.get()
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    fn raw(&self, v: &[f64], x: &[f64]) -> f64 {
        match &self.kind {
            RewardKind::Linear => v.iter().zip(x).map(|(a, b)| a * b).sum(),
            RewardKind::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| p.eval(v, x))
                .fold(f64::NEG_INFINITY, f64::max),
            RewardKind::Gate => (1.0 - x[0] * v[0]) * v[1],
        }
    }

    /// `f(v, x)` clamped to `[0, c_max]`, without dimension checks.
    pub(crate) fn eval_unchecked(&self, v: &[f64], x: &[f64]) -> f64 {
        let r = self.raw(v, x);
        if r < 0.0 || r > self.c_max {
            self.clamp_events.bump();
            r.clamp(0.0, self.c_max)
        } else {
            r
        }
    }

    /// `f(v, x)` clamped to `[0, c_max]`.
    pub fn eval(&self, v: &[f64], x: &[f64]) -> Result<f64> {
        self.check_dim(v.len())?;
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(v, x))
    }

    /// Writes a (sub)gradient of the clamped reward with respect to `v` into
    /// `out`. Zero where the clamp is active; ties between max-affine pieces
    /// go to the lowest index.
    pub(crate) fn grad_v(&self, v: &[f64], x: &[f64], out: &mut [f64]) {
        let r = self.raw(v, x);
        if r < 0.0 || r > self.c_max {
            out.iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        match &self.kind {
            RewardKind::Linear => out.copy_from_slice(x),
            RewardKind::MaxAffine { pieces } => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (j, p) in pieces.iter().enumerate() {
                    let val = p.eval(v, x);
                    if val > best_val {
                        best = j;
                        best_val = val;
                    }
                }
                out.copy_from_slice(&pieces[best].slope);
            }
            RewardKind::Gate => {
                out.iter_mut().for_each(|g| *g = 0.0);
                out[0] = -x[0] * v[1];
                out[1] = 1.0 - x[0] * v[0];
            }
        }
    }
}

/// A context together with the observed reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub context: Vec<f64>,
    pub label: f64,
}

/// `n` contextual value distributions sharing a context distribution and a
/// reward function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub context: ContextDistribution,
    pub reward: RewardFunction,
    pub weights: Vec<WeightDistribution>,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(
        context: ContextDistribution,
        reward: RewardFunction,
        weights: Vec<WeightDistribution>,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            n: weights.len(),
            context,
            reward,
            weights,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != self.weights.len() {
            return Err(Error::Config(format!(
                "n = {} but {} weight distributions given",
                self.n,
                self.weights.len()
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("instance has no distributions".into()));
        }
        let d = self.reward.dim;
        if self.context.dim() != d {
            return Err(Error::Config(format!(
                "context dim {} does not match reward dim {d}",
                self.context.dim()
            )));
        }
        if let Some((i, w)) = self.weights.iter().enumerate().find(|(_, w)| w.dim() != d) {
            return Err(Error::Config(format!(
                "weights[{i}] has dim {} but reward dim is {d}",
                w.dim()
            )));
        }
        Ok(())
    }
}

/// `f(v, x)` clamped to `[0, c_max]`.
pub fn eval_reward(f: &RewardFunction, v: &[f64], x: &[f64]) -> Result<f64> {
    f.eval(v, x)
}

/// Draws `m` labeled samples `(x_j, f(v_j, x_j))`; for each sample the
/// context is drawn before the hidden weight vector.
pub fn draw_samples<R: Rng + ?Sized>(
    weights: &WeightDistribution,
    contexts: &ContextDistribution,
    f: &RewardFunction,
    m: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    f.check_dim(weights.dim())?;
    f.check_dim(contexts.dim())?;
    Ok((0..m)
        .map(|_| {
            let context = contexts.sample(rng);
            let v = weights.sample(rng);
            let label = f.eval_unchecked(v, &context);
            LabeledSample { context, label }
        })
        .collect())
}

/// The exact reward distribution of `f(v, x)` for `v ~ weights` at a fixed
/// context.
pub fn induced_value_distribution(
    weights: &WeightDistribution,
    f: &RewardFunction,
    x: &[f64],
) -> Result<DiscreteValueDistribution> {
    f.check_dim(weights.dim())?;
    f.check_dim(x.len())?;
    let images = weights
        .atoms()
        .iter()
        .map(|v| f.eval_unchecked(v, x))
        .collect();
    DiscreteValueDistribution::new(images, weights.weights().to_vec(), f.c_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_ratio_v: f64,
    pub max_ratio_x: f64,
    pub declared_xi: f64,
    /// `sqrt(d)`, the context-Lipschitz constant the model assumes.
    pub declared_context_lipschitz: f64,
    pub exceeds_xi: bool,
    pub exceeds_context: bool,
    /// Set for reward kinds that are not convex in `v`; learning guarantees
    /// do not apply to them.
    pub nonconvex_caveat: bool,
}

/// Empirical Lipschitz ratios of `f` in `v` and in `x` over random pairs.
///
/// Half of the trials use independent pairs, half use small perturbations
/// so local slopes are probed as well.
pub fn certify_lipschitz<R: Rng + ?Sized>(
    f: &RewardFunction,
    trials: usize,
    rng: &mut R,
) -> Result<LipschitzReport> {
    if trials == 0 {
        return Err(Error::arg("trials", "must be at least 1"));
    }
    let d = f.dim;
    let point = |rng: &mut R| -> Vec<f64> { (0..d).map(|_| rng.random::<f64>()).collect() };
    let mut max_v: f64 = 0.0;
    let mut max_x: f64 = 0.0;
    for t in 0..trials {
        let local = t % 2 == 1;
        let v = point(rng);
        let x = point(rng);
        let nearby = |base: &[f64], rng: &mut R| -> Vec<f64> {
            base.iter()
                .map(|c| (c + (rng.random::<f64>() - 0.5) * 1e-3).clamp(0.0, 1.0))
                .collect()
        };
        let v2 = if local { nearby(&v, rng) } else { point(rng) };
        let x2 = if local { nearby(&x, rng) } else { point(rng) };

        let dv = dist(&v, &v2);
        if dv > 1e-12 {
            max_v = max_v.max((f.eval_unchecked(&v, &x) - f.eval_unchecked(&v2, &x)).abs() / dv);
        }
        let dx = dist(&x, &x2);
        if dx > 1e-12 {
            max_x = max_x.max((f.eval_unchecked(&v, &x) - f.eval_unchecked(&v, &x2)).abs() / dx);
        }
    }
    let context_bound = (d as f64).sqrt();
    Ok(LipschitzReport {
        max_ratio_v: max_v,
        max_ratio_x: max_x,
        declared_xi: f.xi,
        declared_context_lipschitz: context_bound,
        exceeds_xi: max_v > f.xi + 1e-9,
        exceeds_context: max_x > context_bound + 1e-9,
        nonconvex_caveat: !f.is_convex_in_v(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
