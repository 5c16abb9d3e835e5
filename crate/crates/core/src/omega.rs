//! Finite-sample estimates of omega-limit sets.
//!
//! A trajectory is run through a transient, then sampled at a fixed interval;
//! the resulting point cloud stands in for the limit set. Clouds can be
//! compared with each other, checked against equilibria, and fed to the
//! Euler-characteristic consistency check in [`euler_advisor`].

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::write_rows;
use crate::equilibria::EquilibriumReport;
use crate::error::{Error, Result};
use crate::integrate::{flow_map, integrate_steps, IntegratorConfig};
use crate::spatial::GridIndex;
use crate::systems::{StateVec, VectorField};

/// Default distance below which an equilibrium counts as lying on the set.
pub const DEFAULT_ON_SET_EPS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<StateVec>,
    pub t_transient: f64,
    pub t_sample: f64,
    pub dt_sample: f64,
    pub source_ic: StateVec,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].dim()
    }

    /// Full-dimensional CSV: `y` (1-D), `x,y` (2-D) or `x,y,z` (3-D).
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let header: &[&str] = match self.dimension() {
            1 => &["y"],
            2 => &["x", "y"],
            _ => &["x", "y", "z"],
        };
        write_rows(w, header, self.points.iter().map(|p| p.to_vec()))
    }

    /// Two-coordinate projection, e.g. `(0, 2)` for the x-z plane.
    pub fn write_projection_csv<W: Write>(&self, w: W, axes: (usize, usize)) -> io::Result<()> {
        const NAMES: [&str; 3] = ["x", "y", "z"];
        write_rows(w, &[NAMES[axes.0], NAMES[axes.1]], self.points.iter().map(|p| [p[axes.0], p[axes.1]]))
    }
}

/// Integrate through `[0, t_transient]`, then record the state every
/// `dt_sample` over `[t_transient, t_transient + t_sample]` from the dense
/// output.
pub fn estimate_omega_set<F: VectorField + ?Sized>(
    field: &F,
    ic: StateVec,
    t_transient: f64,
    t_sample: f64,
    dt_sample: f64,
    cfg: &IntegratorConfig,
) -> Result<PointCloud> {
    if !(t_transient >= 0.0 && t_transient.is_finite()) {
        return Err(Error::RejectedInput(format!("t_transient must be >= 0, got {t_transient}")));
    }
    if !(t_sample > 0.0 && t_sample.is_finite() && dt_sample > 0.0 && dt_sample < t_sample) {
        return Err(Error::RejectedInput(format!(
            "need 0 < dt_sample < t_sample, got dt_sample={dt_sample}, t_sample={t_sample}"
        )));
    }
    let start = flow_map(field, ic, t_transient, cfg)?;
    let n = (t_sample / dt_sample + 1e-9).floor() as usize;
    let t_end = t_transient + t_sample;
    let mut points = Vec::with_capacity(n + 1);
    points.push(start);
    let mut k = 1usize;
    integrate_steps(field, start, t_transient, t_end, cfg, |step| {
        let seg = step.hermite();
        while k <= n {
            let t = (t_transient + k as f64 * dt_sample).min(t_end);
            if t > step.t1 {
                break;
            }
            points.push(seg.eval(t));
            k += 1;
        }
    })?;
    Ok(PointCloud { points, t_transient, t_sample, dt_sample, source_ic: ic })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudDistance {
    /// Mean of the two directed average nearest-neighbour distances.
    pub sym_avg: f64,
    /// Symmetric Hausdorff distance.
    pub sym_hausdorff: f64,
}

/// Directed nearest-neighbour distances from every point of `from` to `to`.
fn directed(from: &[StateVec], to: &GridIndex) -> Vec<f64> {
    from.par_iter().map(|p| to.nearest(p).1).collect()
}

pub fn cloud_distance(a: &PointCloud, b: &PointCloud) -> Result<CloudDistance> {
    point_set_distance(&a.points, &b.points)
}

/// [`cloud_distance`] on bare point lists.
pub fn point_set_distance(a: &[StateVec], b: &[StateVec]) -> Result<CloudDistance> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::RejectedInput("cloud distance needs non-empty clouds".into()));
    }
    if a[0].dim() != b[0].dim() {
        return Err(Error::RejectedInput("clouds have different dimensions".into()));
    }
    let ab = directed(a, &GridIndex::new(b));
    let ba = directed(b, &GridIndex::new(a));
    // sequential sums keep the result independent of the thread count
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(CloudDistance { sym_avg: 0.5 * (mean(&ab) + mean(&ba)), sym_hausdorff: max(&ab).max(max(&ba)) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumDistance {
    pub location: StateVec,
    pub distance: f64,
    pub on_set: bool,
}

/// Distance from each equilibrium to the nearest cloud point; `on_set` iff
/// that distance is at most `eps`.
pub fn equilibria_on_set(
    cloud: &PointCloud,
    reports: &[EquilibriumReport],
    eps: f64,
) -> Result<Vec<EquilibriumDistance>> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::RejectedInput(format!("eps must be > 0, got {eps}")));
    }
    if cloud.is_empty() {
        return Err(Error::RejectedInput("empty point cloud".into()));
    }
    let index = GridIndex::new(&cloud.points);
    Ok(reports
        .iter()
        .map(|rep| {
            let (_, distance) = index.nearest(&rep.location);
            EquilibriumDistance { location: rep.location, distance, on_set: distance <= eps }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Surface {
    pub name: &'static str,
    pub genus: u32,
    pub euler_number: i64,
}

impl Surface {
    pub fn of_genus(genus: u32) -> Self {
        let name = match genus {
            0 => "sphere",
            1 => "torus (including twisted embeddings)",
            2 => "double torus",
            3 => "triple torus",
            _ => "multiple torus",
        };
        Self { name, genus, euler_number: 2 - 2 * genus as i64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopologyAdvice {
    pub equilibria_on_set: usize,
    pub consistent_surfaces: Vec<Surface>,
    pub excluded_surfaces: Vec<Surface>,
    pub verdict: String,
}

/// Which closed orientable surfaces can carry the observed flow, given how
/// many equilibria lie on the estimated set. Considers genus 0 to 2.
pub fn euler_advisor(equilibria_on_set: usize) -> TopologyAdvice {
    euler_advisor_up_to(equilibria_on_set, 2)
}

/// By Poincare-Hopf, the indices of the equilibria of a tangent flow on a
/// closed surface sum to its Euler number. With no equilibria that sum is 0,
/// so only Euler number 0 (the torus) survives. With equilibria present no
/// genus is ruled out by this count alone.
pub fn euler_advisor_up_to(equilibria_on_set: usize, max_genus: u32) -> TopologyAdvice {
    let (consistent, excluded): (Vec<Surface>, Vec<Surface>) = (0..=max_genus)
        .map(Surface::of_genus)
        .partition(|s| equilibria_on_set > 0 || s.euler_number == 0);
    let verdict = if equilibria_on_set == 0 {
        "no equilibria on the set: by Poincare-Hopf the index sum, and hence the Euler number, of an \
         equilibrium-free invariant surface is 0, so only a torus (possibly twisted) is consistent; the \
         sphere (2) and the double torus (-2) would require equilibria"
            .to_string()
    } else {
        format!(
            "{equilibria_on_set} equilibria on the set: their index sum can match a nonzero Euler number, so \
             surfaces with Euler number != 0 are admissible"
        )
    };
    TopologyAdvice { equilibria_on_set, consistent_surfaces: consistent, excluded_surfaces: excluded, verdict }
}

/// Per-axis `(min, max)`.
pub fn bounding_box(cloud: &PointCloud) -> Result<Vec<(f64, f64)>> {
    if cloud.is_empty() {
        return Err(Error::RejectedInput("empty point cloud".into()));
    }
    let dim = cloud.dimension();
    Ok((0..dim)
        .map(|axis| {
            cloud
                .points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::SystemSpec;

    fn cloud_of(points: Vec<StateVec>) -> PointCloud {
        let ic = points[0];
        PointCloud { points, t_transient: 0.0, t_sample: 1.0, dt_sample: 0.1, source_ic: ic }
    }

    #[test]
    fn identical_and_shifted_clouds() {
        let pts: Vec<StateVec> =
            (0..500).map(|i| StateVec::xyz((i as f64 * 0.37).sin() * 10.0, (i as f64 * 0.11).cos() * 7.0, i as f64 * 0.05)).collect();
        let a = cloud_of(pts.clone());
        let d = cloud_distance(&a, &a).unwrap();
        assert_eq!((d.sym_avg, d.sym_hausdorff), (0.0, 0.0));
        let eps = 1e-3;
        let b = cloud_of(pts.iter().map(|p| *p + StateVec::xyz(eps, 0.0, 0.0)).collect());
        let d = cloud_distance(&a, &b).unwrap();
        assert!((d.sym_avg - eps).abs() < 1e-9 && (d.sym_hausdorff - eps).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn bounding_box_single_point() {
        let c = cloud_of(vec![StateVec::xyz(1.0, 2.0, 3.0)]);
        assert_eq!(bounding_box(&c).unwrap(), vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
    }

    #[test]
    fn quintic_cloud_collapses() {
        let cfg = IntegratorConfig::default();
        let cloud = estimate_omega_set(&SystemSpec::quintic1d(), StateVec::scalar(0.5), 50.0, 5.0, 0.01, &cfg).unwrap();
        assert!(cloud.points.iter().all(|p| (p[0] - 1.0).abs() <= 1e-6));
        let expected = (5.0f64 / 0.01).floor() as usize;
        assert!(cloud.len().abs_diff(expected) <= 1, "{}", cloud.len());
    }

    #[test]
    fn sample_count_and_spacing() {
        let cfg = IntegratorConfig::default();
        let sys = SystemSpec::van_der_pol(1.0).unwrap();
        let cloud = estimate_omega_set(&sys, StateVec::xy(0.5, 0.0), 0.0, 2.0, 0.3, &cfg).unwrap();
        assert_eq!(cloud.len(), 7);
        assert_eq!(cloud.points[0], StateVec::xy(0.5, 0.0));
        assert!(estimate_omega_set(&sys, StateVec::xy(0.5, 0.0), -1.0, 2.0, 0.3, &cfg).is_err());
        assert!(estimate_omega_set(&sys, StateVec::xy(0.5, 0.0), 0.0, 2.0, 3.0, &cfg).is_err());
    }

    #[test]
    fn equilibrium_on_cloud_point() {
        let sys = SystemSpec::quintic1d();
        let rep = EquilibriumReport::at(&sys, StateVec::scalar(3.0));
        let cloud = cloud_of(vec![StateVec::scalar(1.0), StateVec::scalar(3.0)]);
        let d = equilibria_on_set(&cloud, &[rep], 1e-3).unwrap();
        assert_eq!(d[0].distance, 0.0);
        assert!(d[0].on_set);
    }

    #[test]
    fn advisor_examples() {
        let none = euler_advisor(0);
        assert_eq!(none.consistent_surfaces.len(), 1);
        assert_eq!(none.consistent_surfaces[0].genus, 1);
        assert_eq!(none.consistent_surfaces[0].euler_number, 0);
        let excluded: Vec<i64> = none.excluded_surfaces.iter().map(|s| s.euler_number).collect();
        assert_eq!(excluded, vec![2, -2]);

        let two = euler_advisor(2);
        assert!(two.consistent_surfaces.iter().any(|s| s.genus == 0 && s.euler_number == 2));
        let chis: Vec<i64> = two.consistent_surfaces.iter().map(|s| s.euler_number).collect();
        assert_eq!(chis, vec![2, 0, -2]);
    }
}
