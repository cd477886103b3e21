//! Nonlinear integral equation testbed
//!
//! ```text
//! F(u)(x) = ∫₀¹ e^{-|x-y|} u(y) dy + arctan³(u(x)),    x ∈ [0, 1],
//! ```
//!
//! discretized by the trapezoid rule on the uniform grid (Nyström form
//! `K_ij = w_j e^{-|x_i - x_j|}`), with a discontinuous step as exact solution.
//! The derivative is `F'(u)h = K h + 3 arctan²(u) / (1 + u²) · h`, selfadjoint in
//! `L²` with `‖F'(u)‖ < 1 + sqrt(2/π)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{grid_points, trapezoid_weights, GridFunction, NormMode, Space};
use crate::operators::{BallRadius, Operator};
use crate::{Error, Result};

/// `1 + sqrt(2/π)`, the uniform bound on `‖F'(u)‖` and hence on `σ⁻¹`.
pub fn integral_sigma_inverse() -> f64 {
    1.0 + (2.0 / std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone)]
pub struct IntegralProblem {
    n: usize,
    x: Vec<f64>,
    weights: Vec<f64>,
    /// Row-major `N × N`.
    kernel: Vec<f64>,
    u_exact: GridFunction,
    f_exact: GridFunction,
}

/// Builds the problem on an `n`-point grid with the step exact solution.
pub fn build_integral_problem(n: usize) -> Result<IntegralProblem> {
    IntegralProblem::with_exact_solution(exact_solution(n)?)
}

impl IntegralProblem {
    /// Builds the problem around an arbitrary exact solution; `f_exact = F(u_exact)`.
    pub fn with_exact_solution(u_exact: GridFunction) -> Result<Self> {
        let n = u_exact.len();
        let x = grid_points(n)?;
        let weights = trapezoid_weights(n)?;
        let mut kernel = Vec::with_capacity(n * n);
        for xi in &x {
            for (xj, wj) in x.iter().zip(&weights) {
                kernel.push(wj * (-(xi - xj).abs()).exp());
            }
        }
        let mut problem = Self {
            n,
            x,
            weights,
            kernel,
            f_exact: GridFunction::zeros(n),
            u_exact,
        };
        problem.f_exact = problem.apply(&problem.u_exact)?;
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.n + j]
    }

    pub fn u_exact(&self) -> &GridFunction {
        &self.u_exact
    }

    pub fn f_exact(&self) -> &GridFunction {
        &self.f_exact
    }

    /// `K u`, the trapezoid approximation of `∫₀¹ e^{-|x_i - y|} u(y) dy`.
    pub fn kernel_apply(&self, u: &[f64]) -> Vec<f64> {
        self.kernel
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(u).map(|(k, v)| k * v).sum())
            .collect()
    }
}

impl Operator for IntegralProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_len(self.n)?;
        let mut out = self.kernel_apply(u.as_slice());
        for (o, v) in out.iter_mut().zip(u.as_slice()) {
            *o += v.atan().powi(3);
        }
        GridFunction::new(out)
    }

    fn derivative_apply(&self, u: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
        u.check_len(self.n)?;
        h.check_len(self.n)?;
        let mut out = self.kernel_apply(h.as_slice());
        for ((o, v), hv) in out.iter_mut().zip(u.as_slice()).zip(h.as_slice()) {
            *o += 3.0 * v.atan().powi(2) / (1.0 + v * v) * hv;
        }
        GridFunction::new(out)
    }

    fn has_derivative(&self) -> bool {
        true
    }

    fn sigma_inverse_bound(&self) -> f64 {
        integral_sigma_inverse()
    }

    fn ball_radius(&self) -> BallRadius {
        BallRadius::Unbounded
    }
}

/// Step function: 0 for `x < 0.5`, 1 for `x > 0.5`, and 1 at `x = 0.5`.
pub fn exact_solution(n: usize) -> Result<GridFunction> {
    exact_solution_with(n, 1.0)
}

/// Step function with a chosen value at a grid point that lands exactly on `0.5`.
pub fn exact_solution_with(n: usize, value_at_half: f64) -> Result<GridFunction> {
    let x = grid_points(n)?;
    // x_i = 0.5 exactly iff 2i = n - 1
    GridFunction::new(
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                if 2 * i + 1 == n {
                    value_at_half
                } else if xi < 0.5 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Standard normal entries drawn from ChaCha8 seeded with `seed`
    /// (`rand_distr::StandardNormal`, ziggurat method).
    Gaussian { seed: u64 },
    /// `sin(3πx)` on the grid.
    Sinusoid,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Sinusoid => "sinusoid",
        }
    }
}

/// Calibration of the additive noise `f_δ = f + κ f_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub delta_rel: f64,
    /// `δ = κ ‖f_noise‖ = δ_rel ‖f‖`.
    pub delta: f64,
    pub kappa: f64,
    /// Number of Gaussian draws discarded for having zero norm; each bumps the seed.
    pub redraws: u32,
}

fn noise_vector(model: NoiseModel, n: usize, redraw: u32) -> Result<Vec<f64>> {
    match model {
        NoiseModel::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(u64::from(redraw)));
            Ok((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        }
        NoiseModel::Sinusoid => Ok(grid_points(n)?
            .into_iter()
            .map(|x| (3.0 * std::f64::consts::PI * x).sin())
            .collect()),
    }
}

/// Adds noise scaled so that `‖f_δ - f‖ / ‖f‖ = delta_rel`.
pub fn make_noise(
    f: &GridFunction,
    model: NoiseModel,
    delta_rel: f64,
    mode: NormMode,
) -> Result<(GridFunction, NoiseSpec)> {
    if !(delta_rel > 0.0 && delta_rel.is_finite()) {
        return Err(Error::Config(format!(
            "relative noise level {delta_rel} must be positive"
        )));
    }
    let space = Space::new(f.len(), mode)?;
    let f_norm = space.norm(f)?;
    if f_norm == 0.0 {
        return Err(Error::Config("cannot calibrate noise for f = 0".into()));
    }
    let mut redraws = 0u32;
    let noise = loop {
        let v = noise_vector(model, f.len(), redraws)?;
        if space.norm_of(&v) > 0.0 {
            break v;
        }
        if matches!(model, NoiseModel::Sinusoid) {
            return Err(Error::Config("sinusoid noise vanishes on this grid".into()));
        }
        redraws += 1;
    };
    let delta = delta_rel * f_norm;
    let kappa = delta / space.norm_of(&noise);
    let f_delta = GridFunction::new(
        f.as_slice()
            .iter()
            .zip(&noise)
            .map(|(fi, ni)| fi + kappa * ni)
            .collect(),
    )?;
    Ok((
        f_delta,
        NoiseSpec {
            model,
            delta_rel,
            delta,
            kappa,
            redraws,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm;

    #[test]
    fn zero_maps_to_zero() {
        let p = build_integral_problem(30).unwrap();
        assert!(p.apply(&GridFunction::zeros(30)).unwrap().is_zero());
        assert!(build_integral_problem(1).is_err());
    }

    #[test]
    fn default_grid_size() {
        let p = build_integral_problem(100).unwrap();
        assert_eq!(p.n(), 100);
        assert_eq!(p.f_exact(), &p.apply(p.u_exact()).unwrap());
    }

    #[test]
    fn kernel_structure() {
        let p = build_integral_problem(17).unwrap();
        for i in 0..17 {
            for j in 0..17 {
                let kij = p.kernel_entry(i, j);
                assert!(kij > 0.0);
                let sym_i = kij / p.weights()[j];
                let sym_j = p.kernel_entry(j, i) / p.weights()[i];
                assert!((sym_i - sym_j).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_one_matches_closed_form_integral() {
        // ∫₀¹ e^{-|x-y|} dy = 2 - e^{-x} - e^{-(1-x)}
        let mut prev = f64::INFINITY;
        for n in [25, 50, 100, 200] {
            let p = build_integral_problem(n).unwrap();
            let ku = p.kernel_apply(&vec![1.0; n]);
            let err = p
                .grid()
                .iter()
                .zip(&ku)
                .map(|(x, k)| (k - (2.0 - (-x).exp() - (-(1.0 - x)).exp())).abs())
                .fold(0.0, f64::max);
            let dx = 1.0 / (n - 1) as f64;
            // trapezoid error for a kink at y = x_i is at most dx²/12 · max|g''| · 1 per half interval
            assert!(err < dx * dx, "n = {n}: {err}");
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn exact_solution_cases() {
        assert_eq!(exact_solution(2).unwrap().as_slice(), &[0.0, 1.0]);
        let u = exact_solution(100).unwrap();
        let zeros = u.as_slice().iter().filter(|v| **v == 0.0).count();
        let below = grid_points(100)
            .unwrap()
            .iter()
            .filter(|x| **x < 0.5)
            .count();
        assert_eq!(zeros, below);
        assert_eq!(zeros, 50);
        let u = exact_solution(101).unwrap();
        assert_eq!(u[50], 1.0);
        assert_eq!(u[49], 0.0);
        assert_eq!(exact_solution_with(101, 0.5).unwrap()[50], 0.5);
    }

    #[test]
    fn noise_hits_requested_level() {
        let p = build_integral_problem(100).unwrap();
        for model in [NoiseModel::Gaussian { seed: 3 }, NoiseModel::Sinusoid] {
            for mode in [NormMode::Euclidean, NormMode::TrapezoidWeighted] {
                for rel in [0.05, 0.01, 0.001] {
                    let (fd, spec) = make_noise(p.f_exact(), model, rel, mode).unwrap();
                    let diff = norm(&fd.sub(p.f_exact()).unwrap(), mode).unwrap();
                    let fnorm = norm(p.f_exact(), mode).unwrap();
                    assert!((diff / fnorm / rel - 1.0).abs() < 1e-12);
                    assert!((spec.delta - diff).abs() <= 1e-12 * spec.delta);
                    assert_eq!(spec.redraws, 0);
                }
            }
        }
    }

    #[test]
    fn sinusoid_noise_is_sin_three_pi_x() {
        let v = noise_vector(NoiseModel::Sinusoid, 100, 0).unwrap();
        for (i, vi) in v.iter().enumerate() {
            assert_eq!(*vi, (3.0 * std::f64::consts::PI * (i as f64 / 99.0)).sin());
        }
    }

    #[test]
    fn gaussian_noise_is_seeded() {
        let p = build_integral_problem(50).unwrap();
        let m = NoiseModel::Gaussian { seed: 99 };
        let (a, _) = make_noise(p.f_exact(), m, 0.01, NormMode::Euclidean).unwrap();
        let (b, _) = make_noise(p.f_exact(), m, 0.01, NormMode::Euclidean).unwrap();
        assert_eq!(a, b);
        let (c, _) = make_noise(
            p.f_exact(),
            NoiseModel::Gaussian { seed: 100 },
            0.01,
            NormMode::Euclidean,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_rejects_zero_data() {
        let zero = GridFunction::zeros(10);
        assert!(make_noise(&zero, NoiseModel::Sinusoid, 0.01, NormMode::Euclidean).is_err());
        let p = build_integral_problem(10).unwrap();
        assert!(make_noise(p.f_exact(), NoiseModel::Sinusoid, 0.0, NormMode::Euclidean).is_err());
    }
}
