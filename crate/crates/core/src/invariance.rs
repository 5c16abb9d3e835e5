//! The Lorenz trapping sphere.
//!
//! With `c^2 = x^2 + y^2 + (z - (sigma + r))^2`, the cross terms of
//! `d(c^2)/dt` cancel and leave
//!
//! ```text
//! d(c^2)/dt = -2 sigma x^2 - 2 y^2 - 2 b z^2 + 2 b (sigma + r) z
//! ```
//!
//! which is positive strictly inside an axis-aligned ellipsoid and negative
//! outside it. Any sphere that strictly encloses that ellipsoid is positively
//! invariant. The check here is a sampled certificate (Fibonacci lattice plus
//! local ascent), not an interval-arithmetic proof.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::csv::write_rows;
use crate::error::{Error, Result};
use crate::systems::{LorenzParams, StateVec, SystemSpec, VectorField};

/// Relative agreement required between the two derivative routes.
pub const DERIVATIVE_REL_TOL: f64 = 1e-9;
/// Negativity margin on the sphere, as a fraction of `c^2`.
pub const MARGIN_FRACTION: f64 = 1e-6;
/// Number of worst lattice samples refined by local ascent.
const REFINE_STARTS: usize = 50;
/// Lattice resolution used for the enclosing radius inside `verify_trapping`.
const ENCLOSING_RESOLUTION: usize = 256;

fn sphere_center_z(p: &LorenzParams) -> f64 {
    p.sigma + p.r
}

fn check3(state: &StateVec) {
    assert_eq!(state.dim(), 3, "Lorenz trapping functions take 3-D states");
}

/// `x^2 + y^2 + (z - (sigma + r))^2`.
pub fn lyap_value(state: &StateVec, params: &LorenzParams) -> f64 {
    check3(state);
    let dz = state[2] - sphere_center_z(params);
    state[0] * state[0] + state[1] * state[1] + dz * dz
}

/// `2x x' + 2y y' + 2(z - sigma - r) z'` using the vector field itself.
pub fn lyap_derivative_chain_rule(state: &StateVec, params: &LorenzParams) -> f64 {
    check3(state);
    let sys = SystemSpec::lorenz(*params).expect("validated parameters");
    let f = sys.rhs(state);
    2.0 * state[0] * f[0] + 2.0 * state[1] * f[1] + 2.0 * (state[2] - sphere_center_z(params)) * f[2]
}

/// `-2 sigma x^2 - 2 y^2 - 2 b z^2 + 2 b (sigma + r) z`.
pub fn lyap_derivative_closed_form(state: &StateVec, params: &LorenzParams) -> f64 {
    check3(state);
    let (x, y, z) = (state[0], state[1], state[2]);
    let LorenzParams { sigma, b, .. } = *params;
    -2.0 * sigma * x * x - 2.0 * y * y - 2.0 * b * z * z + 2.0 * b * sphere_center_z(params) * z
}

/// `d(c^2)/dt` along the flow. Both routes are evaluated and must agree to
/// [`DERIVATIVE_REL_TOL`] relative to `max(|a|, |b|, 1)`.
pub fn lyap_derivative(state: &StateVec, params: &LorenzParams) -> Result<f64> {
    let chain = lyap_derivative_chain_rule(state, params);
    let closed = lyap_derivative_closed_form(state, params);
    let scale = chain.abs().max(closed.abs()).max(1.0);
    if (chain - closed).abs() > DERIVATIVE_REL_TOL * scale {
        return Err(Error::Consistency(format!(
            "d(c^2)/dt routes disagree at {state:?}: chain rule {chain}, closed form {closed}"
        )));
    }
    Ok(closed)
}

/// Axis-aligned ellipsoid `sum ((p_i - center_i) / semiaxis_i)^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipsoidSpec {
    pub center: StateVec,
    pub semiaxes: [f64; 3],
}

impl EllipsoidSpec {
    /// Normalized level; `< 1` strictly inside, `1` on the surface.
    pub fn level(&self, p: &StateVec) -> f64 {
        (0..3).map(|i| ((p[i] - self.center[i]) / self.semiaxes[i]).powi(2)).sum()
    }

    pub fn contains_strictly(&self, p: &StateVec) -> bool {
        self.level(p) < 1.0
    }

    /// Surface point at polar angle `theta` (from +z) and azimuth `phi`.
    pub fn surface_point(&self, theta: f64, phi: f64) -> StateVec {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        StateVec::xyz(
            self.center[0] + self.semiaxes[0] * st * cp,
            self.center[1] + self.semiaxes[1] * st * sp,
            self.center[2] + self.semiaxes[2] * ct,
        )
    }

    /// Latitude-longitude mesh with `n_theta` rings and `n_phi` meridians.
    pub fn mesh(&self, n_theta: usize, n_phi: usize) -> Vec<StateVec> {
        let mut out = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = PI * i as f64 / (n_theta.max(2) - 1) as f64;
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                out.push(self.surface_point(theta, phi));
            }
        }
        out
    }

    pub fn write_mesh_csv<W: Write>(&self, w: W, n_theta: usize, n_phi: usize) -> io::Result<()> {
        write_rows(w, &["x", "y", "z"], self.mesh(n_theta, n_phi).iter().map(|p| p.to_vec()))
    }
}

/// The surface where `d(c^2)/dt = 0`: center `(0, 0, (sigma + r)/2)`,
/// semiaxes `(sqrt(b (sigma+r)^2 / (4 sigma)), sqrt(b (sigma+r)^2 / 4), (sigma+r)/2)`.
pub fn zero_set_ellipsoid(params: &LorenzParams) -> EllipsoidSpec {
    let s = sphere_center_z(params);
    let rhs = params.b * s * s / 4.0;
    EllipsoidSpec {
        center: StateVec::xyz(0.0, 0.0, s / 2.0),
        semiaxes: [(rhs / params.sigma).sqrt(), rhs.sqrt(), s / 2.0],
    }
}

/// Maximize `objective` locally by a compass search on the unit sphere,
/// starting from unit vector `u`. Returns the improved unit vector and value.
fn ascend_on_sphere(u: [f64; 3], initial_step: f64, objective: &impl Fn(&[f64; 3]) -> f64) -> ([f64; 3], f64) {
    let normalize = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let mut best = u;
    let mut best_val = objective(&best);
    let mut step = initial_step;
    while step > 1e-12 {
        // tangent basis at the current point
        let helper = if best[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let dot = helper[0] * best[0] + helper[1] * best[1] + helper[2] * best[2];
        let e1 = normalize([helper[0] - dot * best[0], helper[1] - dot * best[1], helper[2] - dot * best[2]]);
        let e2 = [
            best[1] * e1[2] - best[2] * e1[1],
            best[2] * e1[0] - best[0] * e1[2],
            best[0] * e1[1] - best[1] * e1[0],
        ];
        let mut improved = false;
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let cand = normalize([
                best[0] + step * (a * e1[0] + b * e2[0]),
                best[1] + step * (a * e1[1] + b * e2[1]),
                best[2] + step * (a * e1[2] + b * e2[2]),
            ]);
            let v = objective(&cand);
            if v > best_val {
                best = cand;
                best_val = v;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_val)
}

/// Largest distance from the sphere center `(0, 0, sigma + r)` to the zero-set
/// ellipsoid: every sphere with a larger radius strictly encloses it.
pub fn min_enclosing_c(params: &LorenzParams, resolution: usize) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::RejectedInput(format!("resolution must be >= 64, got {resolution}")));
    }
    let ell = zero_set_ellipsoid(params);
    let cz = sphere_center_z(params);
    let dist_sq = |p: &StateVec| p[0] * p[0] + p[1] * p[1] + (p[2] - cz) * (p[2] - cz);

    let n_theta = resolution;
    let n_phi = 2 * resolution;
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = PI * i as f64 / (n_theta - 1) as f64;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            samples.push((dist_sq(&ell.surface_point(theta, phi)), theta, phi));
        }
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));

    // refine in direction space of the ellipsoid parametrization
    let objective = |u: &[f64; 3]| {
        let p = StateVec::xyz(
            ell.center[0] + ell.semiaxes[0] * u[0],
            ell.center[1] + ell.semiaxes[1] * u[1],
            ell.center[2] + ell.semiaxes[2] * u[2],
        );
        dist_sq(&p)
    };
    let step = PI / n_theta as f64;
    let best = samples
        .iter()
        .take(8)
        .map(|&(_, theta, phi)| {
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            ascend_on_sphere([st * cp, st * sp, ct], step, &objective).1
        })
        .fold(samples[0].0, f64::max);
    Ok(best.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Invariant,
    Violated,
    Inconclusive,
}

/// Serialized with exactly the fields `c, samples, max_derivative,
/// worst_point, c_min_enclosing, verdict`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingReport {
    pub c: f64,
    #[serde(rename = "samples")]
    pub sample_count: usize,
    pub max_derivative: f64,
    pub worst_point: StateVec,
    pub c_min_enclosing: f64,
    pub verdict: Verdict,
}

/// Quasi-uniform Fibonacci lattice on the sphere of radius `c` around
/// `(0, 0, sigma + r)`, rotated about the z axis by a seed-derived angle.
pub fn sphere_samples(c: f64, params: &LorenzParams, n: usize, seed: u64) -> Vec<StateVec> {
    let offset = lattice_offset(seed);
    (0..n).map(|i| sphere_point(c, params, lattice_unit(i, n, offset))).collect()
}

fn lattice_offset(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(0.0..2.0 * PI)
}

fn lattice_unit(i: usize, n: usize, offset: f64) -> [f64; 3] {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = offset + golden * i as f64;
    [rho * phi.cos(), rho * phi.sin(), z]
}

fn sphere_point(c: f64, params: &LorenzParams, u: [f64; 3]) -> StateVec {
    StateVec::xyz(c * u[0], c * u[1], sphere_center_z(params) + c * u[2])
}

/// Evaluate `d(c^2)/dt` on `n_samples` lattice points of the sphere of radius
/// `c`, refine the worst ones by local ascent, and issue a verdict.
///
/// The reduction is deterministic (max by value, ties to the lower index), so
/// the report does not depend on the number of worker threads.
pub fn verify_trapping(c: f64, params: &LorenzParams, n_samples: usize, seed: u64) -> Result<TrappingReport> {
    params.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::RejectedInput(format!("sphere radius must be > 0, got {c}")));
    }
    if n_samples < 1000 {
        return Err(Error::RejectedInput(format!("need at least 1000 sphere samples, got {n_samples}")));
    }
    let offset = lattice_offset(seed);
    let deriv = |u: &[f64; 3]| lyap_derivative_closed_form(&sphere_point(c, params, *u), params);

    let mut values: Vec<(f64, usize)> =
        (0..n_samples).into_par_iter().map(|i| (deriv(&lattice_unit(i, n_samples, offset)), i)).collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let top = REFINE_STARTS.min(n_samples);
    values.select_nth_unstable_by(top - 1, order);
    values.truncate(top);
    values.sort_by(order);

    let step = (4.0 * PI / n_samples as f64).sqrt();
    let (mut best_u, mut best_val) = (lattice_unit(values[0].1, n_samples, offset), values[0].0);
    let refined: Vec<([f64; 3], f64)> = values
        .par_iter()
        .map(|&(_, i)| ascend_on_sphere(lattice_unit(i, n_samples, offset), step, &deriv))
        .collect();
    for (u, v) in refined {
        if v > best_val {
            best_u = u;
            best_val = v;
        }
    }

    let worst_point = sphere_point(c, params, best_u);
    // cross-check the winning value through the chain-rule route
    let max_derivative = lyap_derivative(&worst_point, params)?;
    let c_min_enclosing = min_enclosing_c(params, ENCLOSING_RESOLUTION)?;
    let margin = MARGIN_FRACTION * c * c;
    let verdict = if max_derivative > 0.0 {
        Verdict::Violated
    } else if max_derivative <= -margin && c > c_min_enclosing {
        Verdict::Invariant
    } else {
        Verdict::Inconclusive
    };
    Ok(TrappingReport { c, sample_count: n_samples, max_derivative, worst_point, c_min_enclosing, verdict })
}
