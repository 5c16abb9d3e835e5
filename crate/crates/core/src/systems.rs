//! Built-in vector fields and the small fixed-size state/matrix types they
//! operate on.
//!
//! Every system carries an analytic Jacobian. Parameters are validated once
//! when the [`SystemSpec`] is built; the unchecked [`VectorField::rhs`] path is
//! what the integrators call in their inner loop.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported phase-space dimension.
pub const MAX_DIM: usize = 3;

/// A point in phase space with one to three coordinates.
#[derive(Clone, Copy, PartialEq)]
pub struct StateVec {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl StateVec {
    /// Checked constructor: length must be 1..=3 and every entry finite.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::RejectedInput(format!(
                "state must have 1 to {MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::RejectedInput(format!(
                "state contains a non-finite coordinate ({bad})"
            )));
        }
        Ok(Self::from_slice_unchecked(coords))
    }

    pub(crate) fn from_slice_unchecked(coords: &[f64]) -> Self {
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self { coords: c, dim: coords.len() }
    }

    pub fn scalar(y: f64) -> Self {
        Self { coords: [y, 0.0, 0.0], dim: 1 }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self { coords: [x, y, z], dim: 3 }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { coords: [0.0; MAX_DIM], dim }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.as_slice().iter().map(|c| c * c).sum()
    }

    pub fn distance(&self, other: &StateVec) -> f64 {
        (*self - *other).norm()
    }

    /// `self + k * other`, the workhorse of the Runge-Kutta stages.
    #[inline]
    pub fn axpy(&self, k: f64, other: &StateVec) -> StateVec {
        let mut out = *self;
        for i in 0..self.dim {
            out.coords[i] += k * other.coords[i];
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StateVec {
        let mut out = *self;
        for c in &mut out.coords[..self.dim] {
            *c = f(*c);
        }
        out
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for StateVec {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for StateVec {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.coords[..self.dim][i]
    }
}

impl Add for StateVec {
    type Output = StateVec;
    #[inline]
    fn add(self, rhs: StateVec) -> StateVec {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for StateVec {
    type Output = StateVec;
    #[inline]
    fn sub(self, rhs: StateVec) -> StateVec {
        self.axpy(-1.0, &rhs)
    }
}

impl Mul<f64> for StateVec {
    type Output = StateVec;
    #[inline]
    fn mul(self, k: f64) -> StateVec {
        self.map(|c| c * k)
    }
}

impl Neg for StateVec {
    type Output = StateVec;
    fn neg(self) -> StateVec {
        self.map(|c| -c)
    }
}

impl Serialize for StateVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for c in self.as_slice() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

/// Square matrix of size `dim` (at most 3), row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    rows: [[f64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { rows: [[0.0; MAX_DIM]; MAX_DIM], dim }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.rows[i][i] = 1.0;
        }
        m
    }

    /// Build from nested rows; panics on ragged or oversized input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix must be square");
            m.rows[i][..row.len()].copy_from_slice(row);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.rows[i][i] = *v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.rows[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.rows[i][j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.rows[i][..self.dim].to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| self.rows[i][..self.dim].iter().all(|v| v.is_finite()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (0..self.dim)
            .flat_map(|i| self.rows[i][..self.dim].iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.rows[i][i]).sum()
    }

    pub fn mul_vec(&self, v: &StateVec) -> StateVec {
        let mut out = StateVec::zeros(self.dim);
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.rows[i][j] * v[j]).sum();
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.rows[j][i] = self.rows[i][j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.rows[i][j] = (0..self.dim).map(|k| self.rows[i][k] * other.rows[k][j]).sum();
            }
        }
        out
    }

    /// Solve `self * x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot falls below `pivot_tol * max|entry|`.
    pub fn solve(&self, b: &StateVec, pivot_tol: f64) -> Option<StateVec> {
        let n = self.dim;
        let mut a = self.rows;
        let mut rhs = *b;
        let scale = (0..n)
            .flat_map(|i| a[i][..n].iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .expect("non-empty pivot range");
            if a[pivot][col].abs() <= pivot_tol * scale {
                return None;
            }
            a.swap(col, pivot);
            let tmp = rhs[col];
            rhs[col] = rhs[pivot];
            rhs[pivot] = tmp;
            let pivot_row = a[col];
            for row in col + 1..n {
                let factor = a[row][col] / pivot_row[col];
                for (dst, src) in a[row][col..n].iter_mut().zip(&pivot_row[col..n]) {
                    *dst -= factor * src;
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut x = StateVec::zeros(n);
        for row in (0..n).rev() {
            let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (rhs[row] - tail) / a[row][row];
        }
        Some(x)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.dim).map(|i| &self.rows[i][..self.dim]))
            .finish()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// An autonomous vector field `dy/dt = f(y)`.
///
/// `rhs` is the unchecked fast path: callers guarantee the state has the
/// field's dimension.
pub trait VectorField: Sync {
    fn dimension(&self) -> usize;

    fn rhs(&self, state: &StateVec) -> StateVec;

    /// Defaults to central differences; built-in systems override this with
    /// the exact derivative.
    fn jacobian_at(&self, state: &StateVec) -> Matrix {
        finite_difference_jacobian(self, state, 1e-6)
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn rhs(&self, state: &StateVec) -> StateVec {
        (**self).rhs(state)
    }
    fn jacobian_at(&self, state: &StateVec) -> Matrix {
        (**self).jacobian_at(state)
    }
}

/// Central-difference Jacobian with absolute step `step`.
pub fn finite_difference_jacobian<F: VectorField + ?Sized>(
    field: &F,
    state: &StateVec,
    step: f64,
) -> Matrix {
    let n = state.dim();
    let mut jac = Matrix::zeros(n);
    for j in 0..n {
        let mut plus = *state;
        let mut minus = *state;
        plus[j] += step;
        minus[j] -= step;
        let fp = field.rhs(&plus);
        let fm = field.rhs(&minus);
        for i in 0..n {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * step));
        }
    }
    jac
}

/// The time-reversed field `-f`, for integrating backwards with a forward
/// integrator.
#[derive(Debug, Clone)]
pub struct Reversed<F>(pub F);

impl<F: VectorField> VectorField for Reversed<F> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }
    fn rhs(&self, state: &StateVec) -> StateVec {
        -self.0.rhs(state)
    }
    fn jacobian_at(&self, state: &StateVec) -> Matrix {
        let j = self.0.jacobian_at(state);
        let mut out = Matrix::zeros(j.dim());
        for r in 0..j.dim() {
            for c in 0..j.dim() {
                out.set(r, c, -j.get(r, c));
            }
        }
        out
    }
}

/// Lorenz parameters. Defaults reproduce the classical sigma = 10, b = 8/3,
/// r = 28 system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub b: f64,
    pub r: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self { sigma: 10.0, b: 8.0 / 3.0, r: 28.0 }
    }
}

impl LorenzParams {
    pub fn new(sigma: f64, b: f64, r: f64) -> Result<Self> {
        let p = Self { sigma, b, r };
        p.validate()?;
        Ok(p)
    }

    /// Classical sigma and b with the given r.
    pub fn with_r(r: f64) -> Result<Self> {
        Self::new(10.0, 8.0 / 3.0, r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("b", self.b), ("r", self.r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lorenz parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parameter record of a built-in system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "system", rename_all = "lowercase")]
pub enum SystemParams {
    Quintic1d,
    VanDerPol { mu: f64 },
    Brusselator { a: f64, b: f64 },
    Lorenz(LorenzParams),
}

/// A named, validated, immutable vector field with an analytic Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemSpec {
    params: SystemParams,
}

/// Roots of the quintic example; the field is the product of `(k - y)`.
const QUINTIC_ROOTS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

impl SystemSpec {
    pub fn quintic1d() -> Self {
        Self { params: SystemParams::Quintic1d }
    }

    pub fn van_der_pol(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "vanderpol parameter mu must be finite and > 0, got {mu}"
            )));
        }
        Ok(Self { params: SystemParams::VanDerPol { mu } })
    }

    pub fn brusselator(a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "brusselator parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { params: SystemParams::Brusselator { a, b } })
    }

    pub fn lorenz(params: LorenzParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params: SystemParams::Lorenz(params) })
    }

    pub fn name(&self) -> &'static str {
        match self.params {
            SystemParams::Quintic1d => "quintic1d",
            SystemParams::VanDerPol { .. } => "vanderpol",
            SystemParams::Brusselator { .. } => "brusselator",
            SystemParams::Lorenz(_) => "lorenz",
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn lorenz_params(&self) -> Option<LorenzParams> {
        match self.params {
            SystemParams::Lorenz(p) => Some(p),
            _ => None,
        }
    }

    fn check_state(&self, state: &StateVec) -> Result<()> {
        if state.dim() != self.dimension() {
            return Err(Error::RejectedInput(format!(
                "{} expects a {}-dimensional state, got {}",
                self.name(),
                self.dimension(),
                state.dim()
            )));
        }
        if !state.is_finite() {
            return Err(Error::RejectedInput(format!("non-finite state {state:?}")));
        }
        Ok(())
    }

    /// Time derivative at `state`, with dimension and finiteness checks.
    pub fn eval_field(&self, state: &StateVec) -> Result<StateVec> {
        self.check_state(state)?;
        Ok(self.rhs(state))
    }

    /// Exact Jacobian at `state`, with dimension and finiteness checks.
    pub fn eval_jacobian(&self, state: &StateVec) -> Result<Matrix> {
        self.check_state(state)?;
        Ok(self.jacobian_at(state))
    }
}

/// Look up a built-in system by name, overriding default parameters from
/// `params`. Unknown parameter names are rejected.
///
/// Defaults: vanderpol mu = 1; brusselator a = 1, b = 3; lorenz sigma = 10,
/// b = 8/3, r = 28.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemSpec> {
    let allowed: &[&str] = match name {
        "quintic1d" => &[],
        "vanderpol" => &["mu"],
        "brusselator" => &["a", "b"],
        "lorenz" => &["sigma", "b", "r"],
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!(
            "system {name} has no parameter `{bad}` (accepted: {})",
            if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
        )));
    }
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    match name {
        "quintic1d" => Ok(SystemSpec::quintic1d()),
        "vanderpol" => SystemSpec::van_der_pol(get("mu", 1.0)),
        "brusselator" => SystemSpec::brusselator(get("a", 1.0), get("b", 3.0)),
        _ => {
            let d = LorenzParams::default();
            SystemSpec::lorenz(LorenzParams {
                sigma: get("sigma", d.sigma),
                b: get("b", d.b),
                r: get("r", d.r),
            })
        }
    }
}

impl VectorField for SystemSpec {
    fn dimension(&self) -> usize {
        match self.params {
            SystemParams::Quintic1d => 1,
            SystemParams::VanDerPol { .. } | SystemParams::Brusselator { .. } => 2,
            SystemParams::Lorenz(_) => 3,
        }
    }

    #[inline]
    fn rhs(&self, s: &StateVec) -> StateVec {
        match self.params {
            SystemParams::Quintic1d => {
                let y = s[0];
                StateVec::scalar(QUINTIC_ROOTS.iter().map(|k| k - y).product())
            }
            SystemParams::VanDerPol { mu } => {
                let (x, y) = (s[0], s[1]);
                StateVec::xy(y, mu * (1.0 - x * x) * y - x)
            }
            SystemParams::Brusselator { a, b } => {
                let (x, y) = (s[0], s[1]);
                let x2y = x * x * y;
                StateVec::xy(a - (b + 1.0) * x + x2y, b * x - x2y)
            }
            SystemParams::Lorenz(LorenzParams { sigma, b, r }) => {
                let (x, y, z) = (s[0], s[1], s[2]);
                StateVec::xyz(sigma * (y - x), r * x - y - x * z, x * y - b * z)
            }
        }
    }

    fn jacobian_at(&self, s: &StateVec) -> Matrix {
        match self.params {
            SystemParams::Quintic1d => {
                let y = s[0];
                // d/dy prod (k - y) = -sum_i prod_{j != i} (k_j - y)
                let d: f64 = (0..QUINTIC_ROOTS.len())
                    .map(|i| {
                        -QUINTIC_ROOTS
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, k)| k - y)
                            .product::<f64>()
                    })
                    .sum();
                Matrix::from_rows(&[&[d]])
            }
            SystemParams::VanDerPol { mu } => {
                let (x, y) = (s[0], s[1]);
                Matrix::from_rows(&[&[0.0, 1.0], &[-2.0 * mu * x * y - 1.0, mu * (1.0 - x * x)]])
            }
            SystemParams::Brusselator { a: _, b } => {
                let (x, y) = (s[0], s[1]);
                Matrix::from_rows(&[
                    &[-(b + 1.0) + 2.0 * x * y, x * x],
                    &[b - 2.0 * x * y, -x * x],
                ])
            }
            SystemParams::Lorenz(LorenzParams { sigma, b, r }) => {
                let (x, y, z) = (s[0], s[1], s[2]);
                Matrix::from_rows(&[&[-sigma, sigma, 0.0], &[r - z, -1.0, -x], &[y, x, -b]])
            }
        }
    }
}
