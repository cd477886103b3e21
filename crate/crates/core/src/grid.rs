//! Grid functions on the uniform grid `x_i = i / (N - 1)` over `[0, 1]`.

use std::fmt;
use std::ops::Index;

use crate::{Error, Result};

/// Inner-product convention used for every norm in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// `‖u‖² = Σ u_i²`.
    #[default]
    Euclidean,
    /// `‖u‖² = Σ w_i u_i²` with trapezoid weights, approximating the `L²[0,1]` norm.
    TrapezoidWeighted,
}

impl NormMode {
    pub fn name(self) -> &'static str {
        match self {
            NormMode::Euclidean => "euclidean",
            NormMode::TrapezoidWeighted => "trapezoid",
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(NormMode::Euclidean),
            "trapezoid" | "trapezoid_weighted" => Ok(NormMode::TrapezoidWeighted),
            other => Err(Error::Config(format!("unknown norm mode '{other}'"))),
        }
    }
}

/// Samples of a real function on the grid. Every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps `values`, rejecting empty input and non-finite entries.
    ///
    /// Length one is allowed so scalar problems can share the machinery; grid
    /// coordinates and trapezoid weights need at least two points.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewPoints { min: 1, found: 0 });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "grid function needs at least one point");
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Samples `f` at the grid points of an `n`-point grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid_points(n)?.into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: self.len(),
            });
        }
        Ok(())
    }

    /// `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        other.check_len(self.len())?;
        GridFunction::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction> {
        other.check_len(self.len())?;
        GridFunction::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> Result<GridFunction> {
        GridFunction::new(self.values.iter().map(|v| alpha * v).collect())
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl TryFrom<Vec<f64>> for GridFunction {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        GridFunction::new(values)
    }
}

/// Grid coordinates `x_i = i / (n - 1)`, endpoints included.
pub fn grid_points(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewPoints { min: 2, found: n });
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| i as f64 / last).collect())
}

/// Composite trapezoid weights on the `n`-point grid; they sum to 1.
pub fn trapezoid_weights(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewPoints { min: 2, found: n });
    }
    let dx = 1.0 / (n - 1) as f64;
    let mut w = vec![dx; n];
    w[0] = 0.5 * dx;
    w[n - 1] = 0.5 * dx;
    Ok(w)
}

/// Inner product on a fixed grid size and norm mode, with the weights computed once.
#[derive(Debug, Clone)]
pub struct Space {
    n: usize,
    mode: NormMode,
    weights: Option<Vec<f64>>,
}

impl Space {
    pub fn new(n: usize, mode: NormMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::TooFewPoints { min: 1, found: 0 });
        }
        let weights = match mode {
            NormMode::Euclidean => None,
            NormMode::TrapezoidWeighted => Some(trapezoid_weights(n)?),
        };
        Ok(Self { n, mode, weights })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    /// Inner product of raw slices; lengths must equal `dim()`.
    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.n);
        debug_assert_eq!(v.len(), self.n);
        match &self.weights {
            None => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            Some(w) => u
                .iter()
                .zip(v)
                .zip(w)
                .map(|((a, b), wi)| wi * (a * b))
                .sum(),
        }
    }

    pub fn norm_of(&self, u: &[f64]) -> f64 {
        self.dot(u, u).sqrt()
    }

    /// `‖u - v‖` without allocating.
    pub fn dist(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        let sq: f64 = match &self.weights {
            None => u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum(),
            Some(w) => u
                .iter()
                .zip(v)
                .zip(w)
                .map(|((a, b), wi)| wi * (a - b) * (a - b))
                .sum(),
        };
        sq.sqrt()
    }

    pub fn inner(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        u.check_len(self.n)?;
        v.check_len(self.n)?;
        Ok(self.dot(u.as_slice(), v.as_slice()))
    }

    pub fn norm(&self, u: &GridFunction) -> Result<f64> {
        u.check_len(self.n)?;
        Ok(self.norm_of(u.as_slice()))
    }
}

/// `⟨u, v⟩` in the given mode.
pub fn inner(u: &GridFunction, v: &GridFunction, mode: NormMode) -> Result<f64> {
    v.check_len(u.len())?;
    Space::new(u.len(), mode)?.inner(u, v)
}

/// `‖u‖` in the given mode.
pub fn norm(u: &GridFunction, mode: NormMode) -> Result<f64> {
    Space::new(u.len(), mode)?.norm(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(v: &[f64]) -> GridFunction {
        GridFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inner_of_ones_is_count() {
        let u = gf(&[1.0, 1.0, 1.0]);
        assert_eq!(inner(&u, &u, NormMode::Euclidean).unwrap(), 3.0);
    }

    #[test]
    fn orthogonal_in_both_modes() {
        let u = gf(&[1.0, 0.0]);
        let v = gf(&[0.0, 1.0]);
        assert_eq!(inner(&u, &v, NormMode::Euclidean).unwrap(), 0.0);
        assert_eq!(inner(&u, &v, NormMode::TrapezoidWeighted).unwrap(), 0.0);
    }

    #[test]
    fn trapezoid_ones_has_unit_inner_and_norm() {
        // independent route: weights summed directly
        let n = 101;
        let dx = 1.0 / 100.0;
        let weight_sum: f64 = (0..n)
            .map(|i| if i == 0 || i == n - 1 { dx / 2.0 } else { dx })
            .sum();
        assert!((weight_sum - 1.0).abs() < 1e-14);

        let ones = GridFunction::constant(n, 1.0).unwrap();
        let ip = inner(&ones, &ones, NormMode::TrapezoidWeighted).unwrap();
        assert!((ip - weight_sum).abs() < 1e-14);
        let nrm = norm(&ones, NormMode::TrapezoidWeighted).unwrap();
        assert!((nrm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            norm(&GridFunction::zeros(4), NormMode::Euclidean).unwrap(),
            0.0
        );
        assert_eq!(norm(&gf(&[3.0, 4.0]), NormMode::Euclidean).unwrap(), 5.0);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let err = inner(&gf(&[1.0, 2.0]), &gf(&[1.0]), NormMode::Euclidean).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            GridFunction::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(GridFunction::new(vec![]).is_err());
        assert!(GridFunction::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn trapezoid_needs_two_points() {
        let u = gf(&[1.0]);
        assert!(norm(&u, NormMode::TrapezoidWeighted).is_err());
        assert_eq!(norm(&u, NormMode::Euclidean).unwrap(), 1.0);
    }

    #[test]
    fn grid_includes_endpoints() {
        let x = grid_points(5).unwrap();
        assert_eq!(x, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(grid_points(1).is_err());
    }

    fn pair(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2..max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3..1e3f64, n),
                prop::collection::vec(-1e3..1e3f64, n),
            )
        })
    }

    fn modes() -> impl Strategy<Value = NormMode> {
        prop_oneof![Just(NormMode::Euclidean), Just(NormMode::TrapezoidWeighted)]
    }

    proptest! {
        #[test]
        fn cauchy_schwarz((u, v) in pair(40), mode in modes()) {
            let (u, v) = (gf(&u), gf(&v));
            let lhs = inner(&u, &v, mode).unwrap().abs();
            let rhs = norm(&u, mode).unwrap() * norm(&v, mode).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn triangle_inequality((u, v) in pair(40), mode in modes()) {
            let (u, v) = (gf(&u), gf(&v));
            let sum = u.add_scaled(1.0, &v).unwrap();
            let lhs = norm(&sum, mode).unwrap();
            let rhs = norm(&u, mode).unwrap() + norm(&v, mode).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn inner_is_symmetric((u, v) in pair(40), mode in modes()) {
            let (u, v) = (gf(&u), gf(&v));
            prop_assert_eq!(inner(&u, &v, mode).unwrap(), inner(&v, &u, mode).unwrap());
        }

        #[test]
        fn trapezoid_constant_one_has_unit_norm(n in 2usize..2000) {
            let ones = GridFunction::constant(n, 1.0).unwrap();
            let nrm = norm(&ones, NormMode::TrapezoidWeighted).unwrap();
            prop_assert!((nrm - 1.0).abs() < 1e-12);
        }
    }
}
