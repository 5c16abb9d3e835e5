//! Uniform-grid nearest-neighbour index for point clouds of dimension 1 to 3.

use std::collections::HashMap;

use crate::systems::StateVec;

type Cell = [i64; 3];

/// Rings searched before falling back to a linear scan.
const MAX_RINGS: i64 = 24;

#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<StateVec>,
    cells: HashMap<Cell, Vec<usize>>,
    cell_size: f64,
    dim: usize,
}

impl GridIndex {
    /// Build with an explicit cell edge length.
    pub fn with_cell_size(points: &[StateVec], cell_size: f64) -> Self {
        assert!(!points.is_empty(), "grid index needs at least one point");
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let dim = points[0].dim();
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, cell_size)).or_default().push(i);
        }
        Self { points: points.to_vec(), cells, cell_size, dim }
    }

    /// Cell size picked so that an average occupied cell holds a handful of
    /// points.
    pub fn new(points: &[StateVec]) -> Self {
        assert!(!points.is_empty(), "grid index needs at least one point");
        let dim = points[0].dim();
        let mut extent = 0.0_f64;
        for axis in 0..dim {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[axis]), hi.max(p[axis]))
            });
            extent = extent.max(hi - lo);
        }
        // point clouds from trajectories are roughly two-dimensional sheets
        let n = points.len() as f64;
        let per_axis = match dim {
            1 => n,
            _ => n.sqrt(),
        };
        let cell = if extent > 0.0 { 2.0 * extent / per_axis.max(1.0) } else { 1.0 };
        Self::with_cell_size(points, cell)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[StateVec] {
        &self.points
    }

    /// Index of and distance to the nearest stored point. Ties go to the
    /// lowest index.
    pub fn nearest(&self, q: &StateVec) -> (usize, f64) {
        let center = cell_of(q, self.cell_size);
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=MAX_RINGS {
            self.visit_ring(center, ring, |idx| {
                let d = self.points[idx].distance(q);
                match best {
                    Some((bi, bd)) if d > bd || (d == bd && idx > bi) => {}
                    _ => best = Some((idx, d)),
                }
            });
            // everything outside this ring is at least ring * cell away
            if let Some((_, d)) = best {
                if d <= ring as f64 * self.cell_size {
                    return best.expect("checked above");
                }
            }
        }
        self.nearest_linear(q)
    }

    fn nearest_linear(&self, q: &StateVec) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(q)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
    }

    fn visit_ring(&self, center: Cell, ring: i64, mut f: impl FnMut(usize)) {
        let span = |axis: usize| if axis < self.dim { ring } else { 0 };
        let (sx, sy, sz) = (span(0), span(1), span(2));
        for dx in -sx..=sx {
            for dy in -sy..=sy {
                for dz in -sz..=sz {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                        continue;
                    }
                    let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                    if let Some(list) = self.cells.get(&key) {
                        list.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}

fn cell_of(p: &StateVec, size: f64) -> Cell {
    let mut c = [0i64; 3];
    for (i, slot) in c.iter_mut().enumerate().take(p.dim()) {
        *slot = (p[i] / size).floor() as i64;
    }
    c
}
