//! Poincare sections and return maps.
//!
//! Plane crossings are bracketed between consecutive trajectory samples and
//! refined on the Hermite dense output. [`regularity_score`] measures how well
//! a return map is described by a one-dimensional function: a leave-one-out
//! k-nearest-neighbour prediction of `v_{n+1}` from `v_n`, with the RMS
//! residual normalized by the observable's range.

use std::io::{self, Write};

use serde::Serialize;

use crate::csv::{fmt_f64, write_rows};
use crate::error::{Error, Result};
use crate::integrate::{HermiteSegment, Trajectory};
use crate::systems::StateVec;

/// Target residual for crossing and extremum refinement.
pub const REFINE_TOL: f64 = 1e-10;
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionFilter {
    /// Coordinate increasing through the plane.
    Up,
    /// Coordinate decreasing through the plane.
    Down,
    Both,
}

impl DirectionFilter {
    pub fn admits(self, direction: i8) -> bool {
        match self {
            DirectionFilter::Up => direction > 0,
            DirectionFilter::Down => direction < 0,
            DirectionFilter::Both => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub state: StateVec,
    /// +1 when the coordinate increases through the plane, -1 otherwise.
    pub direction: i8,
    pub refine_residual: f64,
}

/// Find a root of `g` on `[a, b]` given `g(a)` and `g(b)` of opposite sign.
/// Illinois-modified regula falsi with a bisection safeguard.
fn bracketed_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> (f64, f64) {
    let mut side = 0i8;
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    for iter in 0..200 {
        let width = b - a;
        if best.1.abs() <= 1e-3 * REFINE_TOL || width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        // fall back to bisection every few steps or when the secant leaves the bracket
        if !(t > a && t < b) || iter % 8 == 7 {
            t = 0.5 * (a + b);
        }
        let gt = g(t);
        if gt.abs() < best.1.abs() {
            best = (t, gt);
        }
        if gt == 0.0 {
            break;
        }
        if gt.signum() == gb.signum() {
            b = t;
            gb = gt;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            ga = gt;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    (best.0, best.1.abs())
}

fn refine_crossing(seg: &HermiteSegment, axis: usize, offset: f64, g0: f64, g1: f64) -> (f64, StateVec, f64) {
    let g = |t: f64| seg.eval_coord(t, axis) - offset;
    let (t, _) = bracketed_root(g, seg.t0, seg.t1, g0, g1);
    let state = seg.eval(t);
    (t, state, (state[axis] - offset).abs())
}

/// All strict sign changes of `state[axis] - offset`, refined on the dense
/// output. Tangential touches without a sign change are not reported.
pub fn find_crossings(
    trajectory: &Trajectory,
    axis: usize,
    offset: f64,
    filter: DirectionFilter,
) -> Result<Vec<CrossingEvent>> {
    if axis >= trajectory.dimension() {
        return Err(Error::RejectedInput(format!(
            "axis {axis} is out of range for a {}-dimensional trajectory",
            trajectory.dimension()
        )));
    }
    let states = trajectory.states();
    let times = trajectory.times();
    let g: Vec<f64> = states.iter().map(|s| s[axis] - offset).collect();
    let mut events = Vec::new();
    let mut last_sign = 0.0_f64;
    let mut i = 0usize;
    while i < g.len() {
        if g[i] == 0.0 {
            // a run of samples exactly on the plane: a crossing only if the
            // signs on either side differ
            let mut j = i;
            while j < g.len() && g[j] == 0.0 {
                j += 1;
            }
            if j < g.len() && last_sign != 0.0 && g[j].signum() != last_sign {
                let direction = g[j].signum() as i8;
                if filter.admits(direction) {
                    events.push(CrossingEvent { t: times[i], state: states[i], direction, refine_residual: 0.0 });
                }
            }
            i = j;
            continue;
        }
        if last_sign != 0.0 && i > 0 && g[i - 1] != 0.0 && g[i].signum() != g[i - 1].signum() {
            let direction = g[i].signum() as i8;
            if filter.admits(direction) {
                let seg = trajectory.segment(i - 1);
                let (t, state, refine_residual) = refine_crossing(&seg, axis, offset, g[i - 1], g[i]);
                events.push(CrossingEvent { t, state, direction, refine_residual });
            }
        }
        last_sign = g[i].signum();
        i += 1;
    }
    Ok(events)
}

/// CSV `t,x,y,z,direction` (fewer coordinate columns for lower dimensions).
pub fn write_crossings_csv<W: Write>(mut w: W, events: &[CrossingEvent]) -> io::Result<()> {
    const NAMES: [&str; 3] = ["x", "y", "z"];
    let dim = events.first().map(|e| e.state.dim()).unwrap_or(3);
    writeln!(w, "t,{},direction", NAMES[..dim].join(","))?;
    for e in events {
        write!(w, "{}", fmt_f64(e.t))?;
        for c in e.state.as_slice() {
            write!(w, ",{}", fmt_f64(*c))?;
        }
        writeln!(w, ",{}", e.direction)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// A state coordinate at the crossing.
    Coordinate(usize),
    /// Time between consecutive crossings.
    TInterval,
}

impl Observable {
    pub fn name(self) -> String {
        match self {
            Observable::Coordinate(i) if i < 3 => ["x", "y", "z"][i].to_string(),
            Observable::Coordinate(i) => format!("x{}", i + 1),
            Observable::TInterval => "t-interval".to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Observable::Coordinate(0)),
            "y" => Ok(Observable::Coordinate(1)),
            "z" => Ok(Observable::Coordinate(2)),
            "t-interval" => Ok(Observable::TInterval),
            other => Err(Error::RejectedInput(format!(
                "unknown observable `{other}` (expected x, y, z or t-interval)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnMapData {
    pub pairs: Vec<(f64, f64)>,
    pub observable: String,
    /// Leave-one-out 3-NN RMS residual, unnormalized; 0 with fewer than 5 pairs.
    pub fit_residual_rms: f64,
    pub observable_range: f64,
}

impl ReturnMapData {
    pub fn from_sequence(values: &[f64], observable: String) -> Self {
        let pairs: Vec<(f64, f64)> = values.windows(2).map(|w| (w[0], w[1])).collect();
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let observable_range = if values.is_empty() { 0.0 } else { hi - lo };
        let fit_residual_rms = if pairs.len() >= DEFAULT_K + 2 { loo_knn_rms(&pairs, DEFAULT_K) } else { 0.0 };
        Self { pairs, observable, fit_residual_rms, observable_range }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_rows(w, &["v_n", "v_next"], self.pairs.iter().map(|&(a, b)| [a, b]))
    }
}

/// Successive pairs of `observable` over the events admitted by `filter`.
pub fn return_map(events: &[CrossingEvent], observable: Observable, filter: DirectionFilter) -> Result<ReturnMapData> {
    let kept: Vec<&CrossingEvent> = events.iter().filter(|e| filter.admits(e.direction)).collect();
    if kept.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: kept.len() });
    }
    let values: Vec<f64> = match observable {
        Observable::Coordinate(axis) => {
            if axis >= kept[0].state.dim() {
                return Err(Error::RejectedInput(format!("observable axis {axis} out of range")));
            }
            kept.iter().map(|e| e.state[axis]).collect()
        }
        Observable::TInterval => kept.windows(2).map(|w| w[1].t - w[0].t).collect(),
    };
    Ok(ReturnMapData::from_sequence(&values, observable.name()))
}

/// Successive local maxima of coordinate `axis`, located where the dense
/// output's derivative changes sign from positive to non-positive.
pub fn maxima_map(trajectory: &Trajectory, axis: usize) -> Result<ReturnMapData> {
    if axis >= trajectory.dimension() {
        return Err(Error::RejectedInput(format!("axis {axis} out of range")));
    }
    let derivs = trajectory.derivatives();
    let mut maxima = Vec::new();
    for i in 0..trajectory.segment_count() {
        let (d0, d1) = (derivs[i][axis], derivs[i + 1][axis]);
        if d0 > 0.0 && d1 <= 0.0 {
            let seg = trajectory.segment(i);
            let t = if d1 == 0.0 {
                seg.t1
            } else {
                bracketed_root(|t| seg.eval_derivative(t)[axis], seg.t0, seg.t1, d0, d1).0
            };
            maxima.push(seg.eval(t)[axis]);
        }
    }
    if maxima.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: maxima.len() });
    }
    let name = format!("{}-max", Observable::Coordinate(axis).name());
    Ok(ReturnMapData::from_sequence(&maxima, name))
}

/// Successive maxima of z for a 3-D trajectory.
pub fn zmax_map(trajectory: &Trajectory) -> Result<ReturnMapData> {
    if trajectory.dimension() != 3 {
        return Err(Error::RejectedInput("zmax_map needs a 3-dimensional trajectory".into()));
    }
    maxima_map(trajectory, 2)
}

/// Leave-one-out k-NN RMS residual of predicting `v_next` from `v_n`.
fn loo_knn_rms(pairs: &[(f64, f64)], k: usize) -> f64 {
    let n = pairs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| pairs[i].0).collect();
    let mut sum_sq = 0.0;
    for (pos, &idx) in order.iter().enumerate() {
        let x = xs[pos];
        let (mut left, mut right) = (pos, pos + 1);
        let mut acc = 0.0;
        for _ in 0..k {
            let take_left = match (left > 0, right < n) {
                (true, true) => x - xs[left - 1] <= xs[right] - x,
                (true, false) => true,
                (false, true) => false,
                (false, false) => unreachable!("k < n checked by caller"),
            };
            if take_left {
                left -= 1;
                acc += pairs[order[left]].1;
            } else {
                acc += pairs[order[right]].1;
                right += 1;
            }
        }
        let resid = pairs[idx].1 - acc / k as f64;
        sum_sq += resid * resid;
    }
    (sum_sq / n as f64).sqrt()
}

/// Normalized leave-one-out k-NN residual: near 0 for data on the graph of a
/// function, about 1/3 for structureless uniform pairs with k = 3.
pub fn regularity_score(data: &ReturnMapData, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::RejectedInput("k must be >= 1".into()));
    }
    if data.pairs.len() < k + 2 {
        return Err(Error::InsufficientData { needed: k + 2, got: data.pairs.len() });
    }
    if data.observable_range == 0.0 {
        return Ok(0.0);
    }
    Ok(loo_knn_rms(&data.pairs, k) / data.observable_range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorConfig};
    use crate::systems::VectorField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    struct Rotation;
    impl VectorField for Rotation {
        fn dimension(&self) -> usize {
            2
        }
        fn rhs(&self, s: &StateVec) -> StateVec {
            StateVec::xy(-s[1], s[0])
        }
    }

    struct Damped;
    impl VectorField for Damped {
        fn dimension(&self) -> usize {
            2
        }
        fn rhs(&self, s: &StateVec) -> StateVec {
            StateVec::xy(s[1], -s[0] - 0.2 * s[1])
        }
    }

    fn rotation_run(t1: f64) -> Trajectory {
        integrate(&Rotation, StateVec::xy(1.0, 0.0), 0.0, t1, &IntegratorConfig::adaptive(1e-10, 1e-12)).unwrap()
    }

    #[test]
    fn rotation_crossings() {
        let traj = rotation_run(2.0 * PI);
        let ev = find_crossings(&traj, 0, 0.0, DirectionFilter::Both).unwrap();
        assert_eq!(ev.len(), 2);
        assert!((ev[0].t - PI / 2.0).abs() <= 1e-8);
        assert!((ev[1].t - 1.5 * PI).abs() <= 1e-8);
        assert_eq!((ev[0].direction, ev[1].direction), (-1, 1));
        assert!(ev.iter().all(|e| e.refine_residual <= REFINE_TOL && e.state[0].abs() <= REFINE_TOL));
        assert_eq!(find_crossings(&traj, 0, 0.0, DirectionFilter::Up).unwrap().len(), 1);
    }

    #[test]
    fn constant_sign_has_no_crossings() {
        let traj = rotation_run(1.0);
        assert!(find_crossings(&traj, 0, -2.0, DirectionFilter::Both).unwrap().is_empty());
        assert!(find_crossings(&traj, 5, 0.0, DirectionFilter::Both).is_err());
    }

    #[test]
    fn periodic_intervals() {
        let traj = rotation_run(20.0 * PI + 0.1);
        let ev = find_crossings(&traj, 1, 0.0, DirectionFilter::Up).unwrap();
        let map = return_map(&ev, Observable::TInterval, DirectionFilter::Up).unwrap();
        assert_eq!(map.pairs.len(), ev.len() - 2);
        for (a, b) in &map.pairs {
            assert!((a - 2.0 * PI).abs() < 1e-7 && (b - 2.0 * PI).abs() < 1e-7);
        }
        let both = find_crossings(&traj, 1, 0.0, DirectionFilter::Both).unwrap();
        let pos = return_map(&both, Observable::Coordinate(0), DirectionFilter::Both).unwrap();
        let up = return_map(&both, Observable::Coordinate(0), DirectionFilter::Up).unwrap();
        assert_eq!(pos.pairs.len(), both.len() - 1);
        assert_eq!(up.pairs.len(), both.iter().filter(|e| e.direction > 0).count() - 1);
        assert!(matches!(
            return_map(&both[..2], Observable::TInterval, DirectionFilter::Both),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn sine_maxima_on_diagonal() {
        let traj = rotation_run(30.0);
        let map = maxima_map(&traj, 0).unwrap();
        assert!(map.pairs.len() >= 3);
        for (a, b) in &map.pairs {
            assert!((a - 1.0).abs() < 1e-8 && (b - 1.0).abs() < 1e-8);
        }
        assert!(zmax_map(&traj).is_err());
    }

    #[test]
    fn damped_maxima_contract() {
        let traj = integrate(&Damped, StateVec::xy(1.0, 0.0), 0.0, 60.0, &IntegratorConfig::default()).unwrap();
        let map = maxima_map(&traj, 0).unwrap();
        for (a, b) in &map.pairs {
            assert!(b < a && *b > 0.0);
        }
        let first = map.pairs[0];
        let last = *map.pairs.last().unwrap();
        assert!((last.0 - last.1).abs() < (first.0 - first.1).abs());
    }

    #[test]
    fn logistic_map_is_regular() {
        let mut v = 0.1234_f64;
        let mut seq = Vec::new();
        for _ in 0..100 {
            v = 4.0 * v * (1.0 - v);
        }
        for _ in 0..2000 {
            seq.push(v);
            v = 4.0 * v * (1.0 - v);
        }
        let data = ReturnMapData::from_sequence(&seq, "v".into());
        let s = regularity_score(&data, 3).unwrap();
        assert!(s < 0.02, "{s}");
    }

    #[test]
    fn random_pairs_are_irregular() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seq: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let data = ReturnMapData::from_sequence(&seq, "v".into());
        let s = regularity_score(&data, 3).unwrap();
        assert!((0.3..=0.5).contains(&s), "{s}");
    }

    #[test]
    fn constant_sequence_scores_zero() {
        let data = ReturnMapData::from_sequence(&[2.0; 20], "v".into());
        assert_eq!(regularity_score(&data, 3).unwrap(), 0.0);
        assert!(regularity_score(&data, 0).is_err());
        let short = ReturnMapData::from_sequence(&[1.0, 2.0, 3.0], "v".into());
        assert!(matches!(regularity_score(&short, 3), Err(Error::InsufficientData { .. })));
    }
}
