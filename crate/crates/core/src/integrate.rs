//! Flow map integration: classical fixed-step RK4 and an adaptive
//! Dormand-Prince 5(4) pair, both producing a [`Trajectory`] with a cubic
//! Hermite interpolant on every accepted step.

use std::io::{self, Write};

use serde::Serialize;

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::systems::{StateVec, VectorField};

/// States with a norm above this are treated as a blow-up.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub mode: Mode,
    /// Step size in fixed mode.
    pub h: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Adaptive,
            h: 1e-2,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            h_min: 1e-12,
            h_max: 1.0,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn fixed(h: f64) -> Self {
        Self { mode: Mode::Fixed, h, ..Self::default() }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_h_bounds(mut self, h_min: f64, h_max: f64) -> Self {
        self.h_min = h_min;
        self.h_max = h_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("integrator {name} must be finite and > 0, got {v}")))
            }
        };
        match self.mode {
            Mode::Fixed => positive("h", self.h)?,
            Mode::Adaptive => {
                positive("rel_tol", self.rel_tol)?;
                positive("abs_tol", self.abs_tol)?;
            }
        }
        positive("h_min", self.h_min)?;
        positive("h_max", self.h_max)?;
        if self.h_min > self.h_max {
            return Err(Error::InvalidParameter(format!(
                "integrator h_min ({}) exceeds h_max ({})",
                self.h_min, self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("integrator max_steps must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub h_min_used: f64,
    pub h_max_used: f64,
}

impl Default for StepStats {
    fn default() -> Self {
        Self { accepted: 0, rejected: 0, h_min_used: f64::INFINITY, h_max_used: 0.0 }
    }
}

impl StepStats {
    fn record(&mut self, h: f64) {
        self.accepted += 1;
        self.h_min_used = self.h_min_used.min(h);
        self.h_max_used = self.h_max_used.max(h);
    }
}

/// One accepted step: both endpoints with their derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t0: f64,
    pub y0: StateVec,
    pub f0: StateVec,
    pub t1: f64,
    pub y1: StateVec,
    pub f1: StateVec,
}

impl Step {
    pub fn hermite(&self) -> HermiteSegment {
        HermiteSegment { t0: self.t0, t1: self.t1, y0: self.y0, y1: self.y1, f0: self.f0, f1: self.f1 }
    }
}

/// Cubic Hermite interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct HermiteSegment {
    pub t0: f64,
    pub t1: f64,
    pub y0: StateVec,
    pub y1: StateVec,
    pub f0: StateVec,
    pub f1: StateVec,
}

impl HermiteSegment {
    pub fn eval(&self, t: f64) -> StateVec {
        if t == self.t0 {
            return self.y0;
        }
        if t == self.t1 {
            return self.y1;
        }
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (self.y0 * h00).axpy(h10 * h, &self.f0).axpy(h01, &self.y1).axpy(h11 * h, &self.f1)
    }

    /// Time derivative of the interpolant.
    pub fn eval_derivative(&self, t: f64) -> StateVec {
        if t == self.t0 {
            return self.f0;
        }
        if t == self.t1 {
            return self.f1;
        }
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        (self.y0 * d00).axpy(d10, &self.f0).axpy(d01, &self.y1).axpy(d11, &self.f1)
    }

    /// Single coordinate of the interpolant, used by root finders.
    #[inline]
    pub fn eval_coord(&self, t: f64, axis: usize) -> f64 {
        self.eval(t)[axis]
    }
}

/// Time-ordered solution samples plus the derivative at each sample, which
/// together define a piecewise cubic Hermite dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVec>,
    derivs: Vec<StateVec>,
    stats: StepStats,
}

impl Trajectory {
    fn start(t0: f64, y0: StateVec, f0: StateVec) -> Self {
        Self { times: vec![t0], states: vec![y0], derivs: vec![f0], stats: StepStats::default() }
    }

    fn push(&mut self, step: &Step) {
        self.times.push(step.t1);
        self.states.push(step.y1);
        self.derivs.push(step.f1);
        self.stats.record(step.t1 - step.t0);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn derivatives(&self) -> &[StateVec] {
        &self.derivs
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &StateVec)> + '_ {
        self.times.iter().copied().zip(self.states.iter())
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn final_state(&self) -> StateVec {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn segment_count(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// Dense-output segment between samples `i` and `i + 1`.
    pub fn segment(&self, i: usize) -> HermiteSegment {
        HermiteSegment {
            t0: self.times[i],
            t1: self.times[i + 1],
            y0: self.states[i],
            y1: self.states[i + 1],
            f0: self.derivs[i],
            f1: self.derivs[i + 1],
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = HermiteSegment> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    /// Interpolated state at `t`; sample times return the stored state exactly.
    pub fn sample_dense(&self, t: f64) -> Result<StateVec> {
        let (start, end) = (self.t_start(), self.t_end());
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let idx = self.times.partition_point(|&s| s < t);
        if idx < self.times.len() && self.times[idx] == t {
            return Ok(self.states[idx]);
        }
        Ok(self.segment(idx - 1).eval(t))
    }

    /// Interpolate at a non-decreasing sequence of times in one pass.
    pub fn resample(&self, times: &[f64]) -> Result<Vec<StateVec>> {
        let mut out = Vec::with_capacity(times.len());
        let mut seg = 0usize;
        let (start, end) = (self.t_start(), self.t_end());
        let mut last = f64::NEG_INFINITY;
        for &t in times {
            if !(t >= start && t <= end) {
                return Err(Error::OutOfRange { t, start, end });
            }
            if t < last {
                return Err(Error::RejectedInput("resample times must be non-decreasing".into()));
            }
            last = t;
            while seg + 1 < self.segment_count() && self.times[seg + 1] < t {
                seg += 1;
            }
            if self.segment_count() == 0 {
                out.push(self.states[0]);
            } else {
                out.push(self.segment(seg).eval(t));
            }
        }
        Ok(out)
    }

    /// CSV with header `t,x1[,x2[,x3]]`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.dimension();
        let mut header = String::from("t");
        for i in 1..=dim {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, s) in self.samples() {
            write!(w, "{}", fmt_f64(t))?;
            for c in s.as_slice() {
                write!(w, ",{}", fmt_f64(*c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_state(y: &StateVec, t: f64) -> Result<()> {
    if !y.is_finite() || y.norm() > DIVERGENCE_NORM {
        return Err(Error::Divergence { last_good_t: t });
    }
    Ok(())
}

fn check_inputs<F: VectorField + ?Sized>(field: &F, y0: &StateVec, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if y0.dim() != field.dimension() {
        return Err(Error::RejectedInput(format!(
            "initial state has dimension {}, field expects {}",
            y0.dim(),
            field.dimension()
        )));
    }
    if !y0.is_finite() {
        return Err(Error::RejectedInput(format!("non-finite initial state {y0:?}")));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::RejectedInput(format!("integration interval requires t1 > t0, got [{t0}, {t1}]")));
    }
    Ok(())
}

/// Integrate from `(t0, y0)` to `t1`, handing every accepted step to
/// `on_step`. Returns the step statistics.
pub fn integrate_steps<F, S>(
    field: &F,
    y0: StateVec,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut on_step: S,
) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    S: FnMut(&Step),
{
    check_inputs(field, &y0, t0, t1, cfg)?;
    match cfg.mode {
        Mode::Fixed => rk4_fixed(field, y0, t0, t1, cfg, &mut on_step),
        Mode::Adaptive => dopri5(field, y0, t0, t1, cfg, &mut on_step),
    }
}

/// Integrate and keep every accepted step.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    y0: StateVec,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_inputs(field, &y0, t0, t1, cfg)?;
    let mut traj = Trajectory::start(t0, y0, field.rhs(&y0));
    let stats = integrate_steps(field, y0, t0, t1, cfg, |step| traj.push(step))?;
    traj.stats.rejected = stats.rejected;
    Ok(traj)
}

/// `Phi(t, y0)`; `t == 0` returns `y0` without integrating.
pub fn flow_map<F: VectorField + ?Sized>(field: &F, y0: StateVec, t: f64, cfg: &IntegratorConfig) -> Result<StateVec> {
    if t == 0.0 {
        check_inputs(field, &y0, 0.0, 1.0, cfg)?;
        return Ok(y0);
    }
    let mut last = y0;
    integrate_steps(field, y0, 0.0, t, cfg, |step| last = step.y1)?;
    Ok(last)
}

/// Semigroup self-test: `|Phi(t + tau, y0) - Phi(t, Phi(tau, y0))|`.
pub fn flow_property_check<F: VectorField + ?Sized>(
    field: &F,
    y0: StateVec,
    t: f64,
    tau: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(t >= 0.0 && tau >= 0.0 && t.is_finite() && tau.is_finite()) {
        return Err(Error::RejectedInput(format!("flow check needs t, tau >= 0, got t={t}, tau={tau}")));
    }
    let direct = flow_map(field, y0, t + tau, cfg)?;
    let split = flow_map(field, flow_map(field, y0, tau, cfg)?, t, cfg)?;
    Ok(direct.distance(&split))
}

fn rk4_fixed<F, S>(field: &F, y0: StateVec, t0: f64, t1: f64, cfg: &IntegratorConfig, on_step: &mut S) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    S: FnMut(&Step),
{
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut f = field.rhs(&y);
    let span = t1 - t0;
    while t < t1 {
        if stats.accepted >= cfg.max_steps {
            return Err(Error::StepBudget { max_steps: cfg.max_steps, t });
        }
        let remaining = t1 - t;
        // absorb a sliver left by rounding into the last step
        let h = if remaining <= cfg.h * (1.0 + 1e-9) || remaining < 1e-12 * span { remaining } else { cfg.h };
        let k1 = f;
        let k2 = field.rhs(&y.axpy(0.5 * h, &k1));
        let k3 = field.rhs(&y.axpy(0.5 * h, &k2));
        let k4 = field.rhs(&y.axpy(h, &k3));
        let y_new = y.axpy(h / 6.0, &k1).axpy(h / 3.0, &k2).axpy(h / 3.0, &k3).axpy(h / 6.0, &k4);
        check_state(&y_new, t)?;
        let t_new = if h == remaining { t1 } else { t + h };
        let f_new = field.rhs(&y_new);
        on_step(&Step { t0: t, y0: y, f0: f, t1: t_new, y1: y_new, f1: f_new });
        stats.record(h);
        t = t_new;
        y = y_new;
        f = f_new;
    }
    Ok(stats)
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn rms_scaled(v: &StateVec, scale: &StateVec) -> f64 {
    let n = v.dim() as f64;
    (v.as_slice().iter().zip(scale.as_slice()).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt()
}

fn initial_step<F: VectorField + ?Sized>(field: &F, y0: &StateVec, f0: &StateVec, cfg: &IntegratorConfig, span: f64) -> f64 {
    let scale = y0.map(|c| cfg.abs_tol + cfg.rel_tol * c.abs());
    let d0 = rms_scaled(y0, &scale);
    let d1 = rms_scaled(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.h_max).min(span);
    let y1 = y0.axpy(h0, f0);
    let f1 = field.rhs(&y1);
    let d2 = rms_scaled(&(f1 - *f0), &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(1.0 / 5.0) };
    (100.0 * h0).min(h1).min(cfg.h_max).min(span).max(cfg.h_min)
}

fn dopri5<F, S>(field: &F, y0: StateVec, t0: f64, t1: f64, cfg: &IntegratorConfig, on_step: &mut S) -> Result<StepStats>
where
    F: VectorField + ?Sized,
    S: FnMut(&Step),
{
    let mut stats = StepStats::default();
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = field.rhs(&y);
    let mut h = initial_step(field, &y, &k1, cfg, span);
    let mut last_rejected = false;

    while t < t1 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::StepBudget { max_steps: cfg.max_steps, t });
        }
        let remaining = t1 - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        } else if h < cfg.h_min {
            return Err(Error::StepUnderflow { h, h_min: cfg.h_min, t });
        }

        let k2 = field.rhs(&y.axpy(h * A21, &k1));
        let k3 = field.rhs(&y.axpy(h * A31, &k1).axpy(h * A32, &k2));
        let k4 = field.rhs(&y.axpy(h * A41, &k1).axpy(h * A42, &k2).axpy(h * A43, &k3));
        let k5 = field.rhs(&y.axpy(h * A51, &k1).axpy(h * A52, &k2).axpy(h * A53, &k3).axpy(h * A54, &k4));
        let k6 = field.rhs(
            &y.axpy(h * A61, &k1).axpy(h * A62, &k2).axpy(h * A63, &k3).axpy(h * A64, &k4).axpy(h * A65, &k5),
        );
        let y_new = y.axpy(h * B1, &k1).axpy(h * B3, &k3).axpy(h * B4, &k4).axpy(h * B5, &k5).axpy(h * B6, &k6);
        let k7 = field.rhs(&y_new);
        let err = (k1 * E1).axpy(E3, &k3).axpy(E4, &k4).axpy(E5, &k5).axpy(E6, &k6).axpy(E7, &k7) * h;

        // componentwise max norm against atol + rtol * |state|
        let mut err_norm = 0.0_f64;
        for i in 0..y.dim() {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err_norm = err_norm.max(err[i].abs() / sc);
        }
        if !err_norm.is_finite() || !y_new.is_finite() {
            stats.rejected += 1;
            last_rejected = true;
            h *= MIN_FACTOR;
            continue;
        }

        if err_norm <= 1.0 {
            check_state(&y_new, t)?;
            let t_new = if last { t1 } else { t + h };
            on_step(&Step { t0: t, y0: y, f0: k1, t1: t_new, y1: y_new, f1: k7 });
            stats.record(h);
            t = t_new;
            y = y_new;
            k1 = k7;
            let mut factor = if err_norm == 0.0 { MAX_FACTOR } else { SAFETY * err_norm.powf(-0.2) };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(cfg.h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            let factor = (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h *= factor;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{LorenzParams, Matrix, SystemSpec};

    struct Decay;
    impl VectorField for Decay {
        fn dimension(&self) -> usize {
            1
        }
        fn rhs(&self, s: &StateVec) -> StateVec {
            StateVec::scalar(-s[0])
        }
        fn jacobian_at(&self, _s: &StateVec) -> Matrix {
            Matrix::from_rows(&[&[-1.0]])
        }
    }

    struct BlowUp;
    impl VectorField for BlowUp {
        fn dimension(&self) -> usize {
            1
        }
        fn rhs(&self, s: &StateVec) -> StateVec {
            StateVec::scalar(s[0] * s[0])
        }
    }

    #[test]
    fn decay_adaptive_matches_exact() {
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-10);
        let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 1.0, &cfg).unwrap();
        assert_eq!(traj.t_end(), 1.0);
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() <= 1e-9);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rk4_order_ratio() {
        let err = |h: f64| {
            let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 1.0, &IntegratorConfig::fixed(h)).unwrap();
            (traj.final_state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fixed_step_count_and_endpoint() {
        let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 1.0, &IntegratorConfig::fixed(0.1)).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj.t_end(), 1.0);
        let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 1.0, &IntegratorConfig::fixed(0.3)).unwrap();
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.t_end(), 1.0);
    }

    #[test]
    fn dense_output_endpoints_and_accuracy() {
        let cfg = IntegratorConfig::adaptive(1e-8, 1e-8);
        let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 3.0, &cfg).unwrap();
        for (t, s) in traj.samples() {
            assert_eq!(traj.sample_dense(t).unwrap(), *s);
        }
        for seg in traj.segments() {
            let mid = 0.5 * (seg.t0 + seg.t1);
            assert!((seg.eval(mid)[0] - (-mid).exp()).abs() <= 1e-6);
            // decreasing data with matching slopes stays decreasing
            let mut prev = seg.eval(seg.t0)[0];
            for k in 1..=20 {
                let v = seg.eval(seg.t0 + (seg.t1 - seg.t0) * k as f64 / 20.0)[0];
                assert!(v <= prev);
                prev = v;
            }
        }
        assert!(matches!(traj.sample_dense(3.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(traj.sample_dense(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn errors_are_reported() {
        let y0 = StateVec::scalar(1.0);
        let cfg = IntegratorConfig::adaptive(1e-8, 1e-8).with_max_steps(3);
        assert!(matches!(integrate(&Decay, y0, 0.0, 10.0, &cfg), Err(Error::StepBudget { .. })));
        let cfg = IntegratorConfig::adaptive(1e-8, 1e-8);
        match integrate(&BlowUp, y0, 0.0, 2.0, &cfg) {
            Err(Error::Divergence { last_good_t }) => assert!(last_good_t < 1.0 && last_good_t > 0.9),
            Err(Error::StepUnderflow { t, .. }) => assert!(t < 1.0),
            other => panic!("expected blow-up error, got {other:?}"),
        }
        assert!(integrate(&Decay, y0, 1.0, 1.0, &cfg).is_err());
        assert!(integrate(&Decay, StateVec::xy(1.0, 1.0), 0.0, 1.0, &cfg).is_err());
        let bad = IntegratorConfig { h_min: 1.0, h_max: 0.1, ..IntegratorConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn lorenz_subcritical_decays_to_origin() {
        let sys = SystemSpec::lorenz(LorenzParams::with_r(0.5).unwrap()).unwrap();
        let end = flow_map(&sys, StateVec::xyz(1.0, 1.0, 1.0), 100.0, &IntegratorConfig::default()).unwrap();
        assert!(end.norm() <= 1e-6, "{end:?}");
    }

    #[test]
    fn semigroup_identity_case() {
        let sys = SystemSpec::lorenz(LorenzParams::default()).unwrap();
        let d = flow_property_check(&sys, StateVec::xyz(5.0, 5.0, 5.0), 0.7, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(d, 0.0);
        let d = flow_property_check(&Decay, StateVec::scalar(1.0), 1.0, 1.0, &IntegratorConfig::adaptive(1e-10, 1e-10)).unwrap();
        assert!(d <= 1e-9);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = integrate(&Decay, StateVec::scalar(1.0), 0.0, 0.2, &IntegratorConfig::fixed(0.1)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), 4);
        let last: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], 0.2);
        assert_eq!(last[1], traj.final_state()[0]);
    }
}
