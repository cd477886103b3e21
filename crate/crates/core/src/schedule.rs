//! Regularization schedules `a_n = a(nh)` and step-size bounds.

use std::fmt;

use crate::{Error, Result};

/// A positive, decreasing regularization sequence `a_n` with step `h`.
pub trait Schedule: Send + Sync {
    fn a_at(&self, n: usize) -> f64;

    fn h(&self) -> f64;

    /// Number of defined terms, `None` for an infinite sequence.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn certificate(&self) -> ScheduleCertificate;
}

/// Admissibility flags for a schedule.
///
/// - `eqsxa_ok`: `a(t) ↘ 0` and `ν(t) = |ȧ(t)| / a²(t) ↘ 0`.
/// - `theorem3_ok`: additionally `a(0) h ≤ 2` and `ν(0) ≤ 1/10`, the conditions under
///   which the stopped iterate tends to the minimal-norm solution.
/// - `remark36_ok`: the closed-form power-law sufficient condition
///   `b ∈ (0,1)`, `c ≥ 5`, `10b / c^(1-b) ≤ d ≤ 2c^b` (together with `a(0) h ≤ 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleCertificate {
    pub eqsxa_ok: bool,
    pub theorem3_ok: bool,
    pub remark36_ok: bool,
    pub messages: Vec<String>,
}

impl fmt::Display for ScheduleCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eqsxa_ok = {}", self.eqsxa_ok)?;
        writeln!(f, "theorem3_ok = {}", self.theorem3_ok)?;
        writeln!(f, "remark36_ok = {}", self.remark36_ok)?;
        for m in &self.messages {
            writeln!(f, "# {m}")?;
        }
        Ok(())
    }
}

/// Power-law schedule `a(t) = d / (c + t)^b`, sampled at `t = nh`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub d: f64,
    pub c: f64,
    pub b: f64,
    pub h: f64,
}

impl ScheduleParams {
    pub fn new(d: f64, c: f64, b: f64, h: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidSchedule(format!("d = {d} must be positive")));
        }
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::InvalidSchedule(format!("c = {c} must be ≥ 1")));
        }
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "b = {b} must lie in (0, 1); ν(t) is not strictly decreasing otherwise"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSchedule(format!("h = {h} must be positive")));
        }
        Ok(Self { d, c, b, h })
    }

    /// Schedule with prescribed `a(0)`, i.e. `d = a0 · c^b`.
    pub fn from_initial(a0: f64, c: f64, b: f64, h: f64) -> Result<Self> {
        Self::new(a0 * c.powf(b), c, b, h)
    }

    pub fn a(&self, t: f64) -> f64 {
        self.d / (self.c + t).powf(self.b)
    }

    /// `ν(t) = |ȧ(t)| / a²(t) = b (c + t)^(b-1) / d`.
    pub fn nu(&self, t: f64) -> f64 {
        self.b * (self.c + t).powf(self.b - 1.0) / self.d
    }

    pub fn a_at(&self, n: usize) -> f64 {
        self.a(n as f64 * self.h)
    }

    fn evaluate_certificate(&self) -> ScheduleCertificate {
        let ScheduleParams { d, c, b, h } = *self;
        let a0 = self.a(0.0);
        let nu0 = self.nu(0.0);
        let mut messages = Vec::new();

        // Valid parameters make a and ν strictly decreasing in closed form.
        let eqsxa_ok = true;

        let step_ok = a0 * h <= 2.0;
        let nu_ok = nu0 <= 0.1;
        if !step_ok {
            messages.push(format!("a(0)·h = {} exceeds 2", a0 * h));
        }
        if !nu_ok {
            messages.push(format!("ν(0) = {nu0} exceeds 1/10"));
        }
        let theorem3_ok = step_ok && nu_ok;

        let lower = 10.0 * b / c.powf(1.0 - b);
        let upper = 2.0 * c.powf(b);
        let c_ok = c >= 5.0;
        let d_ok = lower <= d && d <= upper;
        if !c_ok {
            messages.push(format!("c = {c} is below 5"));
        }
        if !d_ok {
            messages.push(format!("d = {d} lies outside [{lower}, {upper}]"));
        }
        let remark36_ok = c_ok && d_ok && step_ok;
        if !theorem3_ok {
            messages.push(
                "stopped iterate is only guaranteed to approach a solution, not the minimal-norm one"
                    .into(),
            );
        }

        ScheduleCertificate {
            eqsxa_ok,
            theorem3_ok,
            remark36_ok,
            messages,
        }
    }
}

impl Schedule for ScheduleParams {
    fn a_at(&self, n: usize) -> f64 {
        ScheduleParams::a_at(self, n)
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn certificate(&self) -> ScheduleCertificate {
        self.evaluate_certificate()
    }
}

/// Validates a power-law schedule and certifies it in closed form.
pub fn make_power_schedule(
    d: f64,
    c: f64,
    b: f64,
    h: f64,
) -> Result<(ScheduleParams, ScheduleCertificate)> {
    let s = ScheduleParams::new(d, c, b, h)?;
    let cert = s.evaluate_certificate();
    Ok((s, cert))
}

/// User-supplied finite table `a_0, a_1, …, a_{m-1}` with step `h`.
///
/// Certification is sampled over the table, using the discrete analog
/// `ν_n = (1/a_{n+1} - 1/a_n) / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSchedule {
    values: Vec<f64>,
    h: f64,
}

impl TabulatedSchedule {
    pub fn new(values: Vec<f64>, h: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSchedule(
                "table needs at least two entries".into(),
            ));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSchedule(format!("h = {h} must be positive")));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidSchedule(format!("entry {v} is not positive")));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSchedule(
                "table is not strictly decreasing".into(),
            ));
        }
        Ok(Self { values, h })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn discrete_nu(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| (1.0 / w[1] - 1.0 / w[0]) / self.h)
            .collect()
    }
}

impl Schedule for TabulatedSchedule {
    fn a_at(&self, n: usize) -> f64 {
        self.values[n]
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.values.len())
    }

    fn certificate(&self) -> ScheduleCertificate {
        let nu = self.discrete_nu();
        let mut messages = vec![format!(
            "sampled certification over {} tabulated terms",
            self.values.len()
        )];
        let nu_decreasing = nu.windows(2).all(|w| w[1] < w[0]);
        if !nu_decreasing {
            messages.push("discrete ν_n is not strictly decreasing".into());
        }
        let a0h = self.values[0] * self.h;
        let theorem3_ok = nu_decreasing && a0h <= 2.0 && nu[0] <= 0.1;
        if !theorem3_ok {
            messages.push(format!("a_0·h = {a0h}, ν_0 = {}", nu[0]));
        }
        ScheduleCertificate {
            eqsxa_ok: nu_decreasing,
            theorem3_ok,
            remark36_ok: false,
            messages,
        }
    }
}

/// Largest admissible step `2 / (σ⁻¹ + 2 a_n)`.
pub fn gamma_max(sigma_inverse: f64, a_n: f64) -> f64 {
    2.0 / (sigma_inverse + 2.0 * a_n)
}

/// `φ_n = h Σ_{i=0}^{n} a_i`.
pub fn phi(s: &dyn Schedule, n: usize) -> f64 {
    s.h() * (0..=n).map(|i| s.a_at(i)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_start_schedule() -> ScheduleParams {
        ScheduleParams::new(0.1 * 5f64.powf(0.99), 5.0, 0.99, 1.0).unwrap()
    }

    #[test]
    fn certified_power_law() {
        // 10·0.5/√5 ≈ 2.236 ≤ 3 ≤ 2√5 ≈ 4.472
        let lower = 10.0 * 0.5 / 5f64.sqrt();
        let upper = 2.0 * 5f64.sqrt();
        assert!(lower <= 3.0 && 3.0 <= upper);
        let a0 = 3.0 / 5f64.sqrt();
        for h in [0.1, 1.0, 2.0 / a0] {
            let (_, cert) = make_power_schedule(3.0, 5.0, 0.5, h).unwrap();
            assert!(
                cert.eqsxa_ok && cert.theorem3_ok && cert.remark36_ok,
                "{cert:?}"
            );
        }
    }

    #[test]
    fn b_equal_one_rejected() {
        assert!(matches!(
            make_power_schedule(1.0, 5.0, 1.0, 1.0),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(make_power_schedule(1.0, 0.5, 0.5, 1.0).is_err());
        assert!(make_power_schedule(0.0, 5.0, 0.5, 1.0).is_err());
        assert!(make_power_schedule(1.0, 5.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn experiment_schedule_fails_sufficient_condition() {
        let s = unit_start_schedule();
        let cert = s.certificate();
        assert!(cert.eqsxa_ok);
        assert!(!cert.remark36_ok);
        assert!(!cert.theorem3_ok);
    }

    #[test]
    fn a_at_examples() {
        let s = ScheduleParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(s.a_at(0), 1.0);
        assert!((s.a_at(3) - 0.5).abs() < 1e-15);
        assert!((unit_start_schedule().a_at(0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gamma_max_examples() {
        assert_eq!(gamma_max(2.0, 0.0), 1.0);
        assert!((gamma_max(10.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        let sig_inv = 1.0 + (2.0 / std::f64::consts::PI).sqrt();
        let g = gamma_max(sig_inv, 0.1);
        assert!(g >= 1.0 && (g - 1.001).abs() < 1e-3, "{g}");
    }

    #[test]
    fn phi_examples() {
        let s = ScheduleParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(phi(&s, 0), s.h * s.a_at(0));
        assert!((phi(&s, 1) - (1.0 + 1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn decreasing_to_zero_over_long_range() {
        let s = unit_start_schedule();
        let mut prev = s.a_at(0);
        for n in (1..=1_000_000).step_by(997) {
            let a = s.a_at(n);
            assert!(a > 0.0 && a < prev);
            prev = a;
        }
        assert!(s.a_at(1_000_000) < 1e-6);
    }

    #[test]
    fn tabulated_schedule_sampled_certificate() {
        let s = ScheduleParams::new(3.0, 5.0, 0.5, 1.0).unwrap();
        let table = TabulatedSchedule::new((0..50).map(|n| s.a_at(n)).collect(), 1.0).unwrap();
        let cert = table.certificate();
        assert!(cert.eqsxa_ok && cert.theorem3_ok && !cert.remark36_ok);
        assert_eq!(table.horizon(), Some(50));
        assert!(TabulatedSchedule::new(vec![1.0, 1.0], 1.0).is_err());
        assert!(TabulatedSchedule::new(vec![1.0, -1.0], 1.0).is_err());
    }

    fn admissible() -> impl Strategy<Value = ScheduleParams> {
        (0.01..10.0f64, 1.0..20.0f64, 0.01..0.99f64, 0.05..2.0f64)
            .prop_map(|(d, c, b, h)| ScheduleParams::new(d, c, b, h).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ratio_and_gap_bounds(s in admissible()) {
            let nu0 = s.nu(0.0);
            let mut prev_nu = f64::INFINITY;
            let mut prev_q = f64::INFINITY;
            for n in 0..100_000usize {
                let (an, an1) = (s.a_at(n), s.a_at(n + 1));
                let ratio = an / an1;
                prop_assert!(ratio > 1.0);
                prop_assert!(ratio <= (1.0 + an * s.h * nu0) * (1.0 + 1e-14));
                let gap = 1.0 / an1 - 1.0 / an;
                let t = n as f64 * s.h;
                prop_assert!(gap > 0.0);
                prop_assert!(gap <= s.h * s.nu(t) * (1.0 + 1e-12) + 1e-14 / an1);
                prop_assert!(gap <= s.h * nu0 * (1.0 + 1e-12) + 1e-14 / an1);
                let nu = s.nu(t);
                prop_assert!(nu < prev_nu);
                prev_nu = nu;
                if n % 1000 == 0 {
                    let q = (an - an1) / (an * an1);
                    prop_assert!(q < prev_q);
                    prev_q = q;
                }
            }
        }

        #[test]
        fn power_law_certificate_implies_general_one(s in admissible()) {
            let cert = s.certificate();
            prop_assert!(!cert.remark36_ok || cert.theorem3_ok);
            prop_assert!(cert.eqsxa_ok);
        }

        #[test]
        fn phi_telescopes(s in admissible(), n in 1usize..500) {
            let diff = phi(&s, n) - phi(&s, n - 1);
            prop_assert!((diff - s.h * s.a_at(n)).abs() <= 1e-12 * phi(&s, n));
            prop_assert!(diff > 0.0);
        }
    }
}
