//! The regularized iteration with discrepancy-principle stopping.
//!
//! Starting from `u_0`, iterate
//!
//! ```text
//! u_{n+1} = u_n - γ_n [F(u_n) + a_n (u_n - ū) - f_δ]
//! ```
//!
//! and stop at the first `n` with `‖F(u_n) - f_δ‖ ≤ C δ^ζ`. The discrepancy is
//! evaluated before each step, so `n_δ = 0` is possible. `F(u_n)` is computed once
//! per iteration and shared between the discrepancy and the step.

use crate::grid::{GridFunction, NormMode, Space};
use crate::operators::Operator;
use crate::schedule::{gamma_max, Schedule, ScheduleCertificate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::MaxIter => "max_iter",
        }
    }
}

/// How `γ_n` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// `γ_n = γ` for all `n`.
    Constant(f64),
    /// `γ_n = min(cap, 2 / (σ⁻¹ + 2 a_n))`.
    Adaptive { cap: Option<f64> },
}

impl GammaRule {
    pub fn gamma(&self, sigma_inverse: f64, a_n: f64) -> f64 {
        match *self {
            GammaRule::Constant(g) => g,
            GammaRule::Adaptive { cap } => {
                let g = gamma_max(sigma_inverse, a_n);
                cap.map_or(g, |c| c.min(g))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    Given(GridFunction),
    /// Approximate the regularized solution at `a_0` by contraction iterations
    /// until `ψ_0 ≤ θ δ^ζ`.
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stopping constant `C > 1`.
    pub c: f64,
    /// Stopping exponent `ζ ∈ (0, 1]`.
    pub zeta: f64,
    /// Start-condition constant `θ ∈ (0, C)`.
    pub theta: f64,
    /// `None` means `γ_n = h`.
    pub gamma: Option<GammaRule>,
    pub max_iter: usize,
    pub u0: InitialGuess,
    pub shift: Option<GridFunction>,
    pub norm_mode: NormMode,
    /// `‖V_0‖` when known, enabling the second start condition.
    pub v0_norm: Option<f64>,
    pub init_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 1.01,
            zeta: 0.99,
            theta: 1.0,
            gamma: None,
            max_iter: 100_000,
            u0: InitialGuess::Zero,
            shift: None,
            norm_mode: NormMode::Euclidean,
            v0_norm: None,
            init_max_iter: 1_000_000,
        }
    }
}

impl SolverConfig {
    pub fn threshold(&self, delta: f64) -> f64 {
        self.c * delta.powf(self.zeta)
    }

    fn validate(&self, delta: f64) -> Result<()> {
        if !(self.c > 1.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C = {} must exceed 1", self.c)));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::Config(format!(
                "zeta = {} must lie in (0, 1]",
                self.zeta
            )));
        }
        if !(self.theta > 0.0 && self.theta < self.c) {
            return Err(Error::Config(format!(
                "theta = {} must lie in (0, C = {})",
                self.theta, self.c
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("noise level {delta} is invalid")));
        }
        let thr = self.threshold(delta);
        if !(thr > delta) {
            return Err(Error::Config(format!(
                "C·δ^ζ = {thr} must exceed δ = {delta}"
            )));
        }
        Ok(())
    }
}

/// Whether the stopped iterate is expected to approach the minimal-norm solution
/// or only some solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceClaim {
    MinimalNormSolution,
    Solution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub a_n: f64,
    pub gamma_n: f64,
    /// `‖F(u_n) - f_δ‖`.
    pub discrepancy: f64,
    /// `ψ_n = ‖F(u_n) + a_n (u_n - ū) - f_δ‖`.
    pub psi: f64,
    pub u_norm: f64,
    /// `‖u_n - ū‖`, equal to `u_norm` without a shift.
    pub shifted_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub n_delta: Option<usize>,
    pub stop_reason: StopReason,
    pub trace: Vec<TraceRow>,
    pub initial_iterate: GridFunction,
    pub final_iterate: GridFunction,
    pub rel_error: Option<f64>,
    pub certificate_echo: ScheduleCertificate,
    pub theorem3_start_ok: bool,
    pub claim: ConvergenceClaim,
    pub delta: f64,
    pub threshold: f64,
    pub max_iterate_norm: f64,
    /// True when some iterate left the ball on which the σ bound was certified.
    pub left_ball: bool,
    pub initializer_iterations: Option<usize>,
}

impl RunReport {
    pub fn discrepancy_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.discrepancy).collect()
    }

    pub fn residual_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.psi).collect()
    }

    /// Checks the stopping bracket exactly: every discrepancy before `n_δ` is above
    /// the threshold and the one at `n_δ` is not.
    pub fn dp_bracketing_holds(&self) -> bool {
        match (self.stop_reason, self.n_delta) {
            (StopReason::Discrepancy, Some(nd)) => {
                nd + 1 == self.trace.len()
                    && self.trace[..nd]
                        .iter()
                        .all(|r| r.discrepancy > self.threshold)
                    && self.trace[nd].discrepancy <= self.threshold
            }
            (StopReason::MaxIter, None) => {
                self.trace.iter().all(|r| r.discrepancy > self.threshold)
            }
            _ => false,
        }
    }
}

fn shifted_residual(
    fu: &[f64],
    u: &[f64],
    a: f64,
    f_delta: &[f64],
    shift: Option<&[f64]>,
) -> Vec<f64> {
    match shift {
        None => fu
            .iter()
            .zip(u)
            .zip(f_delta)
            .map(|((fi, ui), yi)| fi + a * ui - yi)
            .collect(),
        Some(s) => fu
            .iter()
            .zip(u)
            .zip(f_delta)
            .zip(s)
            .map(|(((fi, ui), yi), si)| fi + a * (ui - si) - yi)
            .collect(),
    }
}

fn take_step(u: &[f64], gamma: f64, residual: &[f64]) -> Vec<f64> {
    u.iter().zip(residual).map(|(x, r)| x - gamma * r).collect()
}

fn check_dims(
    op: &dyn Operator,
    f_delta: &GridFunction,
    shift: Option<&GridFunction>,
) -> Result<()> {
    f_delta.check_len(op.dim())?;
    if let Some(s) = shift {
        s.check_len(op.dim())?;
    }
    Ok(())
}

/// One iteration `u - γ [F(u) + a (u - ū) - f_δ]`, with a single operator evaluation.
pub fn step(
    u: &GridFunction,
    a: f64,
    gamma: f64,
    f_delta: &GridFunction,
    op: &dyn Operator,
    shift: Option<&GridFunction>,
) -> Result<GridFunction> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("step size {gamma} must be positive")));
    }
    check_dims(op, f_delta, shift)?;
    u.check_len(op.dim())?;
    let diverged = || Error::Diverged {
        iteration: None,
        norm: u.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt(),
        partial: None,
    };
    let fu = op.apply(u).map_err(|e| match e {
        Error::NonFinite { .. } => diverged(),
        other => other,
    })?;
    let r = shifted_residual(
        fu.as_slice(),
        u.as_slice(),
        a,
        f_delta.as_slice(),
        shift.map(GridFunction::as_slice),
    );
    GridFunction::new(take_step(u.as_slice(), gamma, &r)).map_err(|_| diverged())
}

/// Result of the fixed-point initializer.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub v: GridFunction,
    pub iterations: usize,
    pub residual: f64,
}

/// Contraction iterations `v ← v - γ (F(v) + a_0 (v - ū) - f_δ)` until the residual
/// drops to `tol`.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_initializer(
    op: &dyn Operator,
    a0: f64,
    f_delta: &GridFunction,
    v0: &GridFunction,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    shift: Option<&GridFunction>,
    mode: NormMode,
) -> Result<FixedPoint> {
    let bound = gamma_max(op.sigma_inverse_bound(), a0);
    if !(gamma > 0.0 && gamma < bound) {
        return Err(Error::Config(format!(
            "initializer step γ = {gamma} must lie in (0, 2/(σ⁻¹ + 2a_0) = {bound})"
        )));
    }
    check_dims(op, f_delta, shift)?;
    v0.check_len(op.dim())?;
    let space = Space::new(op.dim(), mode)?;
    let shift = shift.map(GridFunction::as_slice);
    let mut v = v0.clone();
    for iterations in 0..=max_iter {
        let fv = op.apply(&v)?;
        let r = shifted_residual(fv.as_slice(), v.as_slice(), a0, f_delta.as_slice(), shift);
        let residual = space.norm_of(&r);
        if residual <= tol {
            return Ok(FixedPoint {
                v,
                iterations,
                residual,
            });
        }
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                a: a0,
                iterations,
                residual,
            });
        }
        v = GridFunction::new(take_step(v.as_slice(), gamma, &r)).map_err(|_| Error::Diverged {
            iteration: Some(iterations),
            norm: space.norm_of(v.as_slice()),
            partial: None,
        })?;
    }
    unreachable!("loop returns on its last iteration")
}

/// `ψ_0 ≤ θ δ^ζ`, or `ψ_0 ≤ a_0 ‖V_0‖ / 8` when `v0_norm` is known.
#[allow(clippy::too_many_arguments)]
pub fn check_theorem3_start(
    u0: &GridFunction,
    op: &dyn Operator,
    a0: f64,
    f_delta: &GridFunction,
    delta: f64,
    cfg: &SolverConfig,
    v0_norm: Option<f64>,
) -> Result<bool> {
    check_dims(op, f_delta, cfg.shift.as_ref())?;
    let space = Space::new(op.dim(), cfg.norm_mode)?;
    let fu = op.apply(u0)?;
    let r = shifted_residual(
        fu.as_slice(),
        u0.as_slice(),
        a0,
        f_delta.as_slice(),
        cfg.shift.as_ref().map(GridFunction::as_slice),
    );
    let psi0 = space.norm_of(&r);
    let near_data = psi0 <= cfg.theta * delta.powf(cfg.zeta);
    let near_v0 = v0_norm.is_some_and(|v| psi0 <= 0.125 * a0 * v);
    Ok(near_data || near_v0)
}

/// Runs the iteration to the discrepancy stop or `max_iter`.
pub fn run(
    op: &dyn Operator,
    f_delta: &GridFunction,
    delta: f64,
    schedule: &dyn Schedule,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    run_with_reference(op, f_delta, delta, schedule, cfg, None)
}

/// [`run`] with a reference solution for the relative error of the final iterate.
pub fn run_with_reference(
    op: &dyn Operator,
    f_delta: &GridFunction,
    delta: f64,
    schedule: &dyn Schedule,
    cfg: &SolverConfig,
    reference: Option<&GridFunction>,
) -> Result<RunReport> {
    cfg.validate(delta)?;
    check_dims(op, f_delta, cfg.shift.as_ref())?;
    if let Some(r) = reference {
        r.check_len(op.dim())?;
    }
    let space = Space::new(op.dim(), cfg.norm_mode)?;
    let sigma_inverse = op.sigma_inverse_bound();
    if !(sigma_inverse > 0.0 && sigma_inverse.is_finite()) {
        return Err(Error::InvalidOperator(format!(
            "σ⁻¹ bound {sigma_inverse} must be positive"
        )));
    }
    let h = schedule.h();
    let rule = cfg.gamma.unwrap_or(GammaRule::Constant(h));

    // a_n decreases, so the upper step bound is tightest at n = 0 and γ_n is smallest there.
    let a0 = schedule.a_at(0);
    let g0 = rule.gamma(sigma_inverse, a0);
    let bound0 = gamma_max(sigma_inverse, a0);
    if g0 > bound0 {
        return Err(Error::Config(format!(
            "step γ_0 = {g0} violates h ≤ γ_n ≤ 2/(σ⁻¹ + 2a_n) = {bound0}"
        )));
    }
    if g0 < h {
        return Err(Error::Config(format!(
            "step γ_0 = {g0} is below h = {h}; need h ≤ γ_n ≤ 2/(σ⁻¹ + 2a_n)"
        )));
    }

    let threshold = cfg.threshold(delta);
    let shift = cfg.shift.as_ref();
    let mut initializer_iterations = None;
    let u0 = match &cfg.u0 {
        InitialGuess::Zero => GridFunction::zeros(op.dim()),
        InitialGuess::Given(u) => {
            u.check_len(op.dim())?;
            u.clone()
        }
        InitialGuess::FixedPoint => {
            let fp = fixed_point_initializer(
                op,
                a0,
                f_delta,
                &GridFunction::zeros(op.dim()),
                1.0 / (sigma_inverse + 2.0 * a0),
                cfg.theta * delta.powf(cfg.zeta),
                cfg.init_max_iter,
                shift,
                cfg.norm_mode,
            )?;
            initializer_iterations = Some(fp.iterations);
            fp.v
        }
    };
    let theorem3_start_ok = check_theorem3_start(&u0, op, a0, f_delta, delta, cfg, cfg.v0_norm)?;
    let certificate = schedule.certificate();
    let claim = if certificate.theorem3_ok && theorem3_start_ok && cfg.zeta < 1.0 {
        ConvergenceClaim::MinimalNormSolution
    } else {
        ConvergenceClaim::Solution
    };

    let radius = op.ball_radius();
    let mut report = RunReport {
        n_delta: None,
        stop_reason: StopReason::MaxIter,
        trace: Vec::new(),
        initial_iterate: u0.clone(),
        final_iterate: u0.clone(),
        rel_error: None,
        certificate_echo: certificate,
        theorem3_start_ok,
        claim,
        delta,
        threshold,
        max_iterate_norm: 0.0,
        left_ball: false,
        initializer_iterations,
    };
    let max_steps = match schedule.horizon() {
        Some(len) => cfg.max_iter.min(len.saturating_sub(1)),
        None => cfg.max_iter,
    };
    let shift_slice = shift.map(GridFunction::as_slice);

    let mut u = u0;
    for n in 0..=max_steps {
        let a_n = schedule.a_at(n);
        let gamma_n = rule.gamma(sigma_inverse, a_n);
        let u_norm = space.norm_of(u.as_slice());
        let shifted_norm = match shift_slice {
            Some(s) => space.dist(u.as_slice(), s),
            None => u_norm,
        };
        report.max_iterate_norm = report.max_iterate_norm.max(u_norm);
        report.left_ball |= !radius.contains_norm(u_norm);

        let fu = match op.apply(&u) {
            Ok(fu) => fu,
            Err(Error::NonFinite { .. }) => {
                report.final_iterate = u;
                return Err(diverged(n, u_norm, report));
            }
            Err(e) => return Err(e),
        };
        let discrepancy = space.dist(fu.as_slice(), f_delta.as_slice());
        let r = shifted_residual(
            fu.as_slice(),
            u.as_slice(),
            a_n,
            f_delta.as_slice(),
            shift_slice,
        );
        let psi = space.norm_of(&r);
        report.trace.push(TraceRow {
            n,
            a_n,
            gamma_n,
            discrepancy,
            psi,
            u_norm,
            shifted_norm,
        });
        // finite components can still overflow the norm
        if !(u_norm.is_finite() && discrepancy.is_finite() && psi.is_finite()) {
            report.final_iterate = u;
            return Err(diverged(n, u_norm, report));
        }
        if discrepancy <= threshold {
            report.n_delta = Some(n);
            report.stop_reason = StopReason::Discrepancy;
            break;
        }
        if n == max_steps {
            break;
        }
        match GridFunction::new(take_step(u.as_slice(), gamma_n, &r)) {
            Ok(next) => u = next,
            Err(_) => {
                report.final_iterate = u;
                return Err(diverged(n + 1, u_norm, report));
            }
        }
    }
    report.rel_error = match reference {
        Some(r) => {
            let rn = space.norm_of(r.as_slice());
            Some(space.dist(u.as_slice(), r.as_slice()) / rn)
        }
        None => None,
    };
    report.final_iterate = u;
    Ok(report)
}

fn diverged(n: usize, norm: f64, report: RunReport) -> Error {
    Error::Diverged {
        iteration: Some(n),
        norm,
        partial: Some(Box::new(report)),
    }
}
