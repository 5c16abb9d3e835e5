//! Equilibrium location, linear stability classification, and the Lorenz
//! pitchfork / Hopf threshold scans.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::csv::fmt_f64;
pub use crate::eigen::{eigen3, eigenvalues};
use crate::error::{Error, Result};
use crate::systems::{LorenzParams, StateVec, SystemSpec, VectorField};

/// Real parts within this distance of zero make an equilibrium marginal.
pub const MARGINAL_TOL: f64 = 1e-8;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 20;
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    StableNode,
    /// Stable, with a complex pair (node-focus in three dimensions).
    StableFocus,
    Unstable,
    Saddle,
    SaddleFocus,
    Marginal,
}

impl Stability {
    pub fn is_stable(self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableFocus)
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::StableNode => "stable node",
            Stability::StableFocus => "stable focus/node-focus",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::SaddleFocus => "saddle-focus",
            Stability::Marginal => "marginal",
        }
    }
}

fn is_complex(l: &Complex64) -> bool {
    l.im.abs() > MARGINAL_TOL * (1.0 + l.re.abs())
}

/// Linearized-stability class of a set of eigenvalues.
pub fn classify(eigenvalues: &[Complex64]) -> Stability {
    assert!(!eigenvalues.is_empty(), "classify needs at least one eigenvalue");
    if eigenvalues.iter().any(|l| l.re.abs() <= MARGINAL_TOL) {
        return Stability::Marginal;
    }
    let any_complex = eigenvalues.iter().any(is_complex);
    let all_neg = eigenvalues.iter().all(|l| l.re < 0.0);
    let all_pos = eigenvalues.iter().all(|l| l.re > 0.0);
    match (all_neg, all_pos, any_complex) {
        (true, _, false) => Stability::StableNode,
        (true, _, true) => Stability::StableFocus,
        (_, true, _) => Stability::Unstable,
        (_, _, false) => Stability::Saddle,
        (_, _, true) => Stability::SaddleFocus,
    }
}

/// Serializable complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub location: StateVec,
    /// Euclidean norm of the field at `location`.
    pub residual: f64,
    #[serde(serialize_with = "serialize_eigs")]
    pub eigenvalues: Vec<Complex64>,
    pub classification: Stability,
    /// Number of eigenvalues with negative real part.
    pub stable_dimension: usize,
    pub unstable_dimension: usize,
}

fn serialize_eigs<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let e: Vec<Eigenvalue> = v.iter().copied().map(Eigenvalue::from).collect();
    e.serialize(s)
}

impl EquilibriumReport {
    /// Build a report for a point already known to be an equilibrium.
    pub fn at<F: VectorField + ?Sized>(field: &F, location: StateVec) -> Self {
        let residual = field.rhs(&location).norm();
        let eigenvalues = eigenvalues(&field.jacobian_at(&location));
        let classification = classify(&eigenvalues);
        let stable_dimension = eigenvalues.iter().filter(|l| l.re < -MARGINAL_TOL).count();
        let unstable_dimension = eigenvalues.iter().filter(|l| l.re > MARGINAL_TOL).count();
        Self { location, residual, eigenvalues, classification, stable_dimension, unstable_dimension }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Newton iteration on `f(y) = 0` from `guess`, with step halving when the
/// residual fails to decrease.
pub fn find_equilibrium<F: VectorField + ?Sized>(field: &F, guess: StateVec, tol: f64) -> Result<EquilibriumReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::RejectedInput(format!("tolerance must be > 0, got {tol}")));
    }
    if guess.dim() != field.dimension() || !guess.is_finite() {
        return Err(Error::RejectedInput(format!("invalid initial guess {guess:?}")));
    }
    let mut y = guess;
    let mut f = field.rhs(&y);
    let mut res = f.norm();
    for iteration in 0..NEWTON_MAX_ITER {
        if res <= tol {
            return Ok(EquilibriumReport::at(field, y));
        }
        let jac = field.jacobian_at(&y);
        let step = match jac.solve(&(-f), PIVOT_TOL) {
            Some(s) => s,
            None => {
                // Levenberg-regularized normal equations as a fallback
                let jt = jac.transpose();
                let mut normal = jt.matmul(&jac);
                let lambda = 1e-10 * normal.norm().max(1e-300);
                for i in 0..normal.dim() {
                    normal.set(i, i, normal.get(i, i) + lambda);
                }
                normal
                    .solve(&(-jt.mul_vec(&f)), 1e-300)
                    .filter(|s| s.is_finite())
                    .ok_or(Error::SingularJacobian { iteration })?
            }
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial = y.axpy(scale, &step);
            let f_trial = field.rhs(&trial);
            let r_trial = f_trial.norm();
            if r_trial.is_finite() && r_trial < res {
                y = trial;
                f = f_trial;
                res = r_trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: iteration + 1, residual: res });
        }
    }
    if res <= tol {
        Ok(EquilibriumReport::at(field, y))
    } else {
        Err(Error::NoConvergence { iterations: NEWTON_MAX_ITER, residual: res })
    }
}

/// Closed-form location of the symmetric pair for r > 1: `(+-s, +-s, r - 1)`
/// with `s = sqrt(b (r - 1))`.
pub fn lorenz_pair_analytic(params: &LorenzParams) -> Option<(StateVec, StateVec)> {
    if params.r <= 1.0 {
        return None;
    }
    let s = (params.b * (params.r - 1.0)).sqrt();
    let z = params.r - 1.0;
    Some((StateVec::xyz(-s, -s, z), StateVec::xyz(s, s, z)))
}

/// `[O]` for r <= 1, `[O, A, B]` otherwise, each refined by Newton from the
/// closed-form location.
pub fn lorenz_equilibria(params: &LorenzParams) -> Result<Vec<EquilibriumReport>> {
    let sys = SystemSpec::lorenz(*params)?;
    let mut out = vec![EquilibriumReport::at(&sys, StateVec::xyz(0.0, 0.0, 0.0))];
    if let Some((a, b)) = lorenz_pair_analytic(params) {
        out.push(find_equilibrium(&sys, a, 1e-12)?);
        out.push(find_equilibrium(&sys, b, 1e-12)?);
    }
    Ok(out)
}

/// Largest real part of the eigenvalues at B(r), the equilibrium with x > 0.
pub fn max_re_at_b(sigma: f64, b: f64, r: f64) -> Result<f64> {
    let params = LorenzParams::new(sigma, b, r)?;
    let (_, eq_b) = lorenz_pair_analytic(&params)
        .ok_or_else(|| Error::InvalidParameter(format!("B exists only for r > 1, got r = {r}")))?;
    let sys = SystemSpec::lorenz(params)?;
    Ok(EquilibriumReport::at(&sys, eq_b).max_real_part())
}

/// Bisection on `max Re(eig(J(B(r))))` for the classical sigma and b.
pub fn hopf_threshold(r_lo: f64, r_hi: f64, tol: f64) -> Result<f64> {
    let d = LorenzParams::default();
    hopf_threshold_with(d.sigma, d.b, r_lo, r_hi, tol)
}

pub fn hopf_threshold_with(sigma: f64, b: f64, r_lo: f64, r_hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && r_lo > 1.0 && r_hi > r_lo) {
        return Err(Error::RejectedInput(format!(
            "hopf bracket needs 1 < r_lo < r_hi and tol > 0, got [{r_lo}, {r_hi}], tol {tol}"
        )));
    }
    let mut lo = r_lo;
    let mut hi = r_hi;
    let g_lo = max_re_at_b(sigma, b, lo)?;
    let g_hi = max_re_at_b(sigma, b, hi)?;
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let g = max_re_at_b(sigma, b, mid)?;
        if g.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form Hopf value `sigma (sigma + b + 3) / (sigma - b - 1)`, the
/// independent cross-check for [`hopf_threshold`].
pub fn hopf_threshold_analytic(sigma: f64, b: f64) -> f64 {
    sigma * (sigma + b + 3.0) / (sigma - b - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub n_equilibria: usize,
    pub max_re_origin: f64,
    /// `None` when B does not exist (r <= 1).
    pub max_re_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub quantity: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl Threshold {
    pub fn contains(&self, r: f64) -> bool {
        self.lo <= r && r <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationScan {
    pub parameter: &'static str,
    pub rows: Vec<ScanRow>,
    pub thresholds: Vec<Threshold>,
}

impl BifurcationScan {
    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    /// CSV `r,n_equilibria,max_re_origin,max_re_B`; `NaN` where B is absent.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,n_equilibria,max_re_origin,max_re_B")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(row.r),
                row.n_equilibria,
                fmt_f64(row.max_re_origin),
                row.max_re_b.map(fmt_f64).unwrap_or_else(|| "NaN".to_string())
            )?;
        }
        Ok(())
    }
}

/// Brackets `[r_i, r_j]` where `values` changes sign, skipping entries within
/// [`MARGINAL_TOL`] of zero.
fn sign_changes(quantity: &'static str, rs: &[f64], values: &[Option<f64>]) -> Vec<Threshold> {
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (r, v) in rs.iter().zip(values) {
        let Some(v) = *v else { continue };
        if v.abs() <= MARGINAL_TOL {
            continue;
        }
        if let Some((r_prev, v_prev)) = last {
            if v_prev.signum() != v.signum() {
                out.push(Threshold { quantity, lo: r_prev, hi: *r });
            }
        }
        last = Some((*r, v));
    }
    out
}

/// Scan over `r` (classical sigma and b): equilibrium count, stability of O and
/// of B at each grid value, plus the sign-change brackets of both.
pub fn pitchfork_scan(r_values: &[f64]) -> Result<BifurcationScan> {
    let d = LorenzParams::default();
    bifurcation_scan(d.sigma, d.b, r_values)
}

pub fn bifurcation_scan(sigma: f64, b: f64, r_values: &[f64]) -> Result<BifurcationScan> {
    if r_values.is_empty() {
        return Err(Error::RejectedInput("empty parameter grid".into()));
    }
    if r_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::RejectedInput("parameter grid must be strictly increasing".into()));
    }
    let rows: Vec<ScanRow> = r_values
        .par_iter()
        .map(|&r| {
            let params = LorenzParams::new(sigma, b, r)?;
            let eqs = lorenz_equilibria(&params)?;
            Ok(ScanRow {
                r,
                n_equilibria: eqs.len(),
                max_re_origin: eqs[0].max_real_part(),
                max_re_b: eqs.get(2).map(|e| e.max_real_part()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let origin: Vec<Option<f64>> = rows.iter().map(|r| Some(r.max_re_origin)).collect();
    let at_b: Vec<Option<f64>> = rows.iter().map(|r| r.max_re_b).collect();
    let mut thresholds = sign_changes("max_re_origin", r_values, &origin);
    thresholds.extend(sign_changes("max_re_B", r_values, &at_b));
    Ok(BifurcationScan { parameter: "r", rows, thresholds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let c = |v: &[(f64, f64)]| classify(&v.iter().map(|&(re, im)| Complex64::new(re, im)).collect::<Vec<_>>());
        assert_eq!(c(&[(-1.0, 0.0), (-2.0, 0.0), (-3.0, 0.0)]), Stability::StableNode);
        let s = 1201f64.sqrt();
        assert_eq!(c(&[(-8.0 / 3.0, 0.0), ((-11.0 - s) / 2.0, 0.0), ((-11.0 + s) / 2.0, 0.0)]), Stability::Saddle);
        assert_eq!(c(&[(-1e-12, 0.0), (-1.0, 0.0)]), Stability::Marginal);
        assert_eq!(c(&[(-1.0, 2.0), (-1.0, -2.0), (-3.0, 0.0)]), Stability::StableFocus);
        assert_eq!(c(&[(0.1, 2.0), (0.1, -2.0), (-3.0, 0.0)]), Stability::SaddleFocus);
        assert_eq!(c(&[(0.1, 0.0), (2.0, 0.0)]), Stability::Unstable);
    }

    #[test]
    fn newton_finds_b_at_r28() {
        let sys = SystemSpec::lorenz(LorenzParams::default()).unwrap();
        let rep = find_equilibrium(&sys, StateVec::xyz(8.0, 8.0, 27.0), 1e-12).unwrap();
        let s = 72f64.sqrt();
        assert!((rep.location[0] - s).abs() <= 1e-9);
        assert!((rep.location[1] - s).abs() <= 1e-9);
        assert!((rep.location[2] - 27.0).abs() <= 1e-9);
        assert!(rep.residual <= 1e-10);
        assert_eq!(rep.classification, Stability::SaddleFocus);
    }

    #[test]
    fn newton_subcritical_origin() {
        let sys = SystemSpec::lorenz(LorenzParams::with_r(0.5).unwrap()).unwrap();
        let rep = find_equilibrium(&sys, StateVec::xyz(0.1, 0.1, 0.1), 1e-12).unwrap();
        assert!(rep.location.norm() < 1e-10);
        assert_eq!(rep.classification, Stability::StableNode);
    }

    #[test]
    fn newton_quintic() {
        let rep = find_equilibrium(&SystemSpec::quintic1d(), StateVec::scalar(2.9), 1e-12).unwrap();
        assert!((rep.location[0] - 3.0).abs() < 1e-12);
        assert!((rep.eigenvalues[0].re + 4.0).abs() < 1e-9);
        assert!(rep.classification.is_stable());
    }

    #[test]
    fn newton_rejects_bad_input() {
        let sys = SystemSpec::quintic1d();
        assert!(find_equilibrium(&sys, StateVec::scalar(1.0), 0.0).is_err());
        assert!(find_equilibrium(&sys, StateVec::xy(1.0, 1.0), 1e-9).is_err());
    }

    #[test]
    fn lorenz_equilibria_counts() {
        assert_eq!(lorenz_equilibria(&LorenzParams::with_r(0.5).unwrap()).unwrap().len(), 1);
        assert_eq!(lorenz_equilibria(&LorenzParams::with_r(1.0).unwrap()).unwrap().len(), 1);
        let eqs = lorenz_equilibria(&LorenzParams::default()).unwrap();
        assert_eq!(eqs.len(), 3);
        let s = 72f64.sqrt();
        assert!((eqs[1].location - StateVec::xyz(-s, -s, 27.0)).norm() <= 1e-9);
        assert!((eqs[2].location - StateVec::xyz(s, s, 27.0)).norm() <= 1e-9);
        assert_eq!(eqs[0].classification, Stability::Saddle);
        assert_eq!(eqs[0].stable_dimension, 2);
    }

    #[test]
    fn hopf_bracket_error() {
        assert!(matches!(hopf_threshold(2.0, 10.0, 1e-6), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn scan_rejects_unsorted_grid() {
        assert!(pitchfork_scan(&[1.0, 0.5]).is_err());
        assert!(pitchfork_scan(&[]).is_err());
    }

    #[test]
    fn scan_csv_layout() {
        let scan = pitchfork_scan(&[0.5, 1.5]).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,n_equilibria,max_re_origin,max_re_B");
        assert!(lines[1].ends_with(",NaN"));
        assert!(lines[2].split(',').nth(1) == Some("3"));
    }
}
