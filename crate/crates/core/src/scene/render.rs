use rand::Rng;

use super::Scene;
use crate::geometry::{RotatedRect, Vec2};

/// Top-down height grid. Row `r`, column `c` covers the cell whose center is
/// `((c + 0.5) * cell, (r + 0.5) * cell)` in workspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    pub resolution: usize,
    pub side: f64,
    pub cells: Vec<f64>,
}

impl Heightmap {
    pub fn zeros(resolution: usize, side: f64) -> Heightmap {
        Heightmap {
            resolution,
            side,
            cells: vec![0.0; resolution * resolution],
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.side / self.resolution as f64
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.resolution + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Vec2 {
        let cs = self.cell_size();
        Vec2::new((col as f64 + 0.5) * cs, (row as f64 + 0.5) * cs)
    }

    /// Height at a workspace point by nearest cell; zero off the table.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let cs = self.cell_size();
        let c = (x / cs).floor();
        let r = (y / cs).floor();
        if c < 0.0 || r < 0.0 || c >= self.resolution as f64 || r >= self.resolution as f64 {
            return 0.0;
        }
        self.get(r as usize, c as usize)
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }
}

/// Binary footprint mask on the same grid as [`Heightmap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub id: usize,
    pub resolution: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Centers of the set cells in workspace coordinates.
    pub fn points(&self, side: f64) -> Vec<Vec2> {
        let cs = side / self.resolution as f64;
        let mut out = Vec::new();
        for r in 0..self.resolution {
            for c in 0..self.resolution {
                if self.bits[r * self.resolution + c] {
                    out.push(Vec2::new((c as f64 + 0.5) * cs, (r as f64 + 0.5) * cs));
                }
            }
        }
        out
    }

    /// Corners of the set cells, the natural input for fitting a rectangle to the mask.
    pub fn cell_corners(&self, side: f64) -> Vec<Vec2> {
        let cs = side / self.resolution as f64;
        let half = 0.5 * cs;
        let mut out = Vec::new();
        for p in self.points(side) {
            for (dx, dy) in [(-half, -half), (half, -half), (half, half), (-half, half)] {
                out.push(Vec2::new(p.x + dx, p.y + dy));
            }
        }
        out
    }
}

/// Calls `f(row, col)` for every cell whose center lies inside `fp`.
fn for_cells_in(fp: &RotatedRect, resolution: usize, side: f64, mut f: impl FnMut(usize, usize)) {
    let cs = side / resolution as f64;
    let corners = fp.corners();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for c in &corners {
        x0 = x0.min(c.x);
        x1 = x1.max(c.x);
        y0 = y0.min(c.y);
        y1 = y1.max(c.y);
    }
    let clamp = |v: f64| v.max(0.0).min(resolution as f64 - 1.0) as usize;
    let (c0, c1) = (
        clamp((x0 / cs - 0.5).floor()),
        clamp((x1 / cs - 0.5).ceil()),
    );
    let (r0, r1) = (
        clamp((y0 / cs - 0.5).floor()),
        clamp((y1 / cs - 0.5).ceil()),
    );
    for r in r0..=r1 {
        for c in c0..=c1 {
            let p = Vec2::new((c as f64 + 0.5) * cs, (r as f64 + 0.5) * cs);
            if fp.contains(&p) {
                f(r, c);
            }
        }
    }
}

pub fn render_depth(scene: &Scene, resolution: usize) -> Heightmap {
    let mut hm = Heightmap::zeros(resolution, scene.workspace_side);
    for o in &scene.objects {
        for_cells_in(&o.footprint, resolution, scene.workspace_side, |r, c| {
            let cell = &mut hm.cells[r * resolution + c];
            *cell = cell.max(o.height);
        });
    }
    hm
}

/// Depth with zero-mean uniform noise of the given amplitude, clamped at zero.
pub fn render_depth_noisy<R: Rng>(
    scene: &Scene,
    resolution: usize,
    amplitude: f64,
    rng: &mut R,
) -> Heightmap {
    let mut hm = render_depth(scene, resolution);
    if amplitude > 0.0 {
        for v in hm.cells.iter_mut() {
            *v = (*v + rng.random_range(-amplitude..=amplitude)).max(0.0);
        }
    }
    hm
}

pub fn render_masks(scene: &Scene, resolution: usize) -> Vec<Mask> {
    scene
        .objects
        .iter()
        .map(|o| {
            let mut bits = vec![false; resolution * resolution];
            for_cells_in(&o.footprint, resolution, scene.workspace_side, |r, c| {
                bits[r * resolution + c] = true
            });
            Mask {
                id: o.id,
                resolution,
                bits,
            }
        })
        .collect()
}
