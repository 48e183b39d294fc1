//! Network inputs built from the depth heightmap.

use crate::scene::{render_depth, Heightmap, Scene};

/// Side length of the square feature grids.
pub const GRID: usize = 16;
pub const GRID_CELLS: usize = GRID * GRID;
/// Input length of every value network: local patch followed by global map.
pub const INPUT_LEN: usize = 2 * GRID_CELLS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    /// Heightmap resolution in cells per side.
    pub resolution: usize,
    /// Side of the square crop around each object (m).
    pub crop_side: f64,
    /// Rotate each crop into the frame of the object's bounding box.
    pub align_crops: bool,
    /// Heights are divided by this before entering the networks (m).
    pub height_scale: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            resolution: 224,
            crop_side: 0.096,
            align_crops: true,
            height_scale: 0.1,
        }
    }
}

/// Per-state inputs shared by all three networks.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeatures {
    pub ids: Vec<usize>,
    pub global: Vec<f64>,
    /// One `GRID x GRID` crop per object, same order as `ids`.
    pub locals: Vec<Vec<f64>>,
}

/// Mean-pools a heightmap onto the feature grid.
pub fn pool_global(hm: &Heightmap, scale: f64) -> Vec<f64> {
    let mut sum = vec![0.0; GRID_CELLS];
    let mut count = vec![0usize; GRID_CELLS];
    let n = hm.resolution;
    for r in 0..n {
        let br = r * GRID / n;
        for c in 0..n {
            let k = br * GRID + c * GRID / n;
            sum[k] += hm.get(r, c);
            count[k] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 / scale })
        .collect()
}

/// Nearest-cell samples of a square window centered at `(x, y)` whose columns
/// run along `angle_deg`.
pub fn crop(hm: &Heightmap, x: f64, y: f64, angle_deg: f64, side: f64, scale: f64) -> Vec<f64> {
    let step = side / GRID as f64;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = Vec::with_capacity(GRID_CELLS);
    for r in 0..GRID {
        let v = (r as f64 + 0.5) * step - 0.5 * side;
        for c in 0..GRID {
            let u = (c as f64 + 0.5) * step - 0.5 * side;
            out.push(hm.sample(x + u * cos - v * sin, y + u * sin + v * cos) / scale);
        }
    }
    out
}

impl StateFeatures {
    pub fn from_heightmap(scene: &Scene, hm: &Heightmap, params: &FeatureParams) -> StateFeatures {
        let global = pool_global(hm, params.height_scale);
        let locals = scene
            .objects
            .iter()
            .map(|o| {
                let c = o.center();
                let angle = if params.align_crops {
                    o.footprint.axis_angle
                } else {
                    0.0
                };
                crop(hm, c.x, c.y, angle, params.crop_side, params.height_scale)
            })
            .collect();
        StateFeatures {
            ids: scene.ids(),
            global,
            locals,
        }
    }

    pub fn new(scene: &Scene, params: &FeatureParams) -> StateFeatures {
        let hm = render_depth(scene, params.resolution);
        Self::from_heightmap(scene, &hm, params)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Input for the single-object networks.
    pub fn single_input(&self, i: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(INPUT_LEN);
        x.extend_from_slice(&self.locals[i]);
        x.extend_from_slice(&self.global);
        x
    }

    /// Input for the pair network: the enveloped object's crop and the sucked
    /// object's crop, each pooled over column pairs, then the global map.
    pub fn pair_input(&self, envelope: usize, suck: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(INPUT_LEN);
        for i in [envelope, suck] {
            let l = &self.locals[i];
            for r in 0..GRID {
                for c in (0..GRID).step_by(2) {
                    x.push(0.5 * (l[r * GRID + c] + l[r * GRID + c + 1]));
                }
            }
        }
        x.extend_from_slice(&self.global);
        x
    }
}
