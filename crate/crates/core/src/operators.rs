//! Operators `F: H → H` on grid functions, with an attached bound on `σ_R⁻¹`.
//!
//! An operator is locally σ-inverse monotone on the ball `B(0, R)` when
//!
//! ```text
//! ⟨F(u) - F(v), u - v⟩ ≥ σ_R ‖F(u) - F(v)‖²   for all u, v in B(0, R).
//! ```
//!
//! Bounds are carried as `σ⁻¹` since that is the quantity entering the step-size rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{GridFunction, NormMode, Space};
use crate::{Error, Result};

/// Radius of the ball on which a σ-inverse bound is certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallRadius {
    Finite(f64),
    Unbounded,
}

impl BallRadius {
    pub fn contains_norm(self, norm: f64) -> bool {
        match self {
            BallRadius::Finite(r) => norm <= r,
            BallRadius::Unbounded => true,
        }
    }
}

/// A deterministic map on grid functions of a fixed dimension.
///
/// Implementations must be safe to evaluate concurrently.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;

    /// Action `F'(u) h` of the Fréchet derivative, when available.
    fn derivative_apply(&self, _u: &GridFunction, _h: &GridFunction) -> Result<GridFunction> {
        Err(Error::Unsupported("operator has no derivative"))
    }

    fn has_derivative(&self) -> bool {
        false
    }

    /// Upper bound on `σ_R⁻¹` valid on [`Operator::ball_radius`].
    fn sigma_inverse_bound(&self) -> f64;

    fn ball_radius(&self) -> BallRadius {
        BallRadius::Unbounded
    }
}

/// Diagonal operator `(Au)_i = λ_i u_i` with `λ_1 ≥ λ_2 ≥ … ≥ 0`.
#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    eigenvalues: Vec<f64>,
    reordered: bool,
}

impl DiagonalOperator {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// True when the input eigenvalues were not in nonincreasing order and got sorted.
    pub fn reordered(&self) -> bool {
        self.reordered
    }
}

/// Builds the diagonal selfadjoint operator with the given eigenvalues.
///
/// Its σ-inverse bound is `λ_1`, valid on the whole space.
pub fn make_linear_spd(eigenvalues: &[f64]) -> Result<DiagonalOperator> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidOperator("no eigenvalues".into()));
    }
    if let Some(bad) = eigenvalues.iter().find(|l| !l.is_finite() || **l < 0.0) {
        return Err(Error::InvalidOperator(format!(
            "eigenvalue {bad} is negative or non-finite"
        )));
    }
    let mut sorted = eigenvalues.to_vec();
    let reordered = sorted.windows(2).any(|w| w[0] < w[1]);
    if reordered {
        sorted.sort_by(|a, b| b.total_cmp(a));
    }
    if sorted[0] <= 0.0 {
        return Err(Error::InvalidOperator(
            "largest eigenvalue must be positive".into(),
        ));
    }
    Ok(DiagonalOperator {
        eigenvalues: sorted,
        reordered,
    })
}

impl Operator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_len(self.dim())?;
        GridFunction::new(
            u.as_slice()
                .iter()
                .zip(&self.eigenvalues)
                .map(|(x, l)| l * x)
                .collect(),
        )
    }

    fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        u.check_len(self.dim())?;
        self.apply(h)
    }

    fn has_derivative(&self) -> bool {
        true
    }

    fn sigma_inverse_bound(&self) -> f64 {
        self.eigenvalues[0]
    }
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type DerivFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Operator assembled from closures on raw slices.
pub struct FnOperator {
    dim: usize,
    sigma_inverse: f64,
    radius: BallRadius,
    map: Box<MapFn>,
    derivative: Option<Box<DerivFn>>,
}

impl FnOperator {
    pub fn new(
        dim: usize,
        sigma_inverse: f64,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            sigma_inverse,
            radius: BallRadius::Unbounded,
            map: Box::new(map),
            derivative: None,
        }
    }

    pub fn with_derivative(
        mut self,
        derivative: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Box::new(derivative));
        self
    }

    pub fn with_radius(mut self, radius: BallRadius) -> Self {
        self.radius = radius;
        self
    }

    /// Pointwise operator `F(u)_i = g(u_i)` with derivative `g'(u_i) h_i`.
    pub fn pointwise(
        dim: usize,
        sigma_inverse: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    ) -> Self {
        Self::new(dim, sigma_inverse, move |u| {
            u.iter().map(|&x| g(x)).collect()
        })
        .with_derivative(move |u, h| u.iter().zip(h).map(|(&x, &y)| dg(x) * y).collect())
    }

    /// `F ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 1.0, move |u| vec![0.0; u.len()]).with_derivative(|_, h| vec![0.0; h.len()])
    }

    /// `F(u) = u`.
    pub fn identity(dim: usize) -> Self {
        Self::pointwise(dim, 1.0, |x| x, |_| 1.0)
    }
}

impl std::fmt::Debug for FnOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnOperator")
            .field("dim", &self.dim)
            .field("sigma_inverse", &self.sigma_inverse)
            .field("radius", &self.radius)
            .field("derivative", &self.derivative.is_some())
            .finish()
    }
}

impl Operator for FnOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_len(self.dim)?;
        GridFunction::new((self.map)(u.as_slice()))
    }

    fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        let d = self
            .derivative
            .as_ref()
            .ok_or(Error::Unsupported("operator has no derivative"))?;
        u.check_len(self.dim)?;
        h.check_len(self.dim)?;
        GridFunction::new(d(u.as_slice(), h.as_slice()))
    }

    fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    fn sigma_inverse_bound(&self) -> f64 {
        self.sigma_inverse
    }

    fn ball_radius(&self) -> BallRadius {
        self.radius
    }
}

/// Draws a point uniformly from the ball of the given radius in `space`'s norm.
///
/// Direction is a normalized Gaussian vector, magnitude `radius · U^(1/N)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, space: &Space, radius: f64) -> GridFunction {
    let n = space.dim();
    loop {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = space.norm_of(&dir);
        if len == 0.0 || !len.is_finite() {
            continue;
        }
        let u: f64 = rng.random();
        let scale = radius * u.powf(1.0 / n as f64) / len;
        let values = dir.into_iter().map(|x| x * scale).collect();
        return GridFunction::new(values).expect("finite sample");
    }
}

/// Outcome of sampling the σ-inverse inequality on a ball.
#[derive(Debug, Clone)]
pub struct SigmaCheckReport {
    pub samples_tested: usize,
    pub violations: usize,
    /// Minimum over samples of `(⟨ΔF, Δu⟩ - σ‖ΔF‖²) / (1 + ‖ΔF‖²)`.
    pub worst_margin: f64,
    pub violating_pairs: Vec<(GridFunction, GridFunction)>,
}

impl SigmaCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `sample_count` pairs uniformly in `B(0, radius)` and counts pairs where
/// `⟨F(u)-F(v), u-v⟩ - σ‖F(u)-F(v)‖² < -tolerance · (1 + ‖F(u)-F(v)‖²)`.
pub fn check_sigma_inverse(
    op: &dyn Operator,
    sigma: f64,
    radius: f64,
    sample_count: usize,
    seed: u64,
    tolerance: f64,
    mode: NormMode,
) -> Result<SigmaCheckReport> {
    if !(sigma > 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidOperator(
            "sigma and radius must be positive".into(),
        ));
    }
    if sample_count == 0 {
        return Err(Error::InvalidOperator("sample_count must be ≥ 1".into()));
    }
    let space = Space::new(op.dim(), mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SigmaCheckReport {
        samples_tested: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        violating_pairs: Vec::new(),
    };
    for sample in 0..sample_count {
        let u = sample_ball(&mut rng, &space, radius);
        let v = sample_ball(&mut rng, &space, radius);
        let eval = |w: &GridFunction| {
            op.apply(w).map_err(|e| Error::Evaluation {
                sample,
                source: Box::new(e),
            })
        };
        let fu = eval(&u)?;
        let fv = eval(&v)?;
        let df: Vec<f64> = fu
            .as_slice()
            .iter()
            .zip(fv.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let du: Vec<f64> = u
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let df_sq = space.dot(&df, &df);
        let margin = (space.dot(&df, &du) - sigma * df_sq) / (1.0 + df_sq);
        report.samples_tested += 1;
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -tolerance {
            report.violations += 1;
            report.violating_pairs.push((u, v));
        }
    }
    Ok(report)
}

/// Relative forward-difference errors
/// `‖(F(u+εh) - F(u))/ε - F'(u)h‖ / max(1, ‖F'(u)h‖)` for each `ε`.
pub fn derivative_finite_difference_check(
    op: &dyn Operator,
    u: &GridFunction,
    h: &GridFunction,
    eps_list: &[f64],
    mode: NormMode,
) -> Result<Vec<f64>> {
    if !op.has_derivative() {
        return Err(Error::Unsupported("operator has no derivative"));
    }
    if let Some(bad) = eps_list.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidOperator(format!(
            "step {bad} is not positive"
        )));
    }
    let space = Space::new(op.dim(), mode)?;
    let fu = op.apply(u)?;
    let jh = op.derivative_apply(u, h)?;
    let scale = space.norm(&jh)?.max(1.0);
    eps_list
        .iter()
        .map(|&eps| {
            let shifted = u.add_scaled(eps, h)?;
            let fs = op.apply(&shifted)?;
            let diff: Vec<f64> = fs
                .as_slice()
                .iter()
                .zip(fu.as_slice())
                .zip(jh.as_slice())
                .map(|((a, b), d)| (a - b) / eps - d)
                .collect();
            Ok(space.norm_of(&diff) / scale)
        })
        .collect()
}
