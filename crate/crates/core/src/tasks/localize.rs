use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{TaskInstance, TaskKind, Truth};
use crate::error::{Error, Result};
use crate::numkit::{Array, Rng};

/// Occupancy grid, row-major, `true` meaning occupied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    height: usize,
    width: usize,
    occupied: Vec<bool>,
}

impl GridMap {
    /// A map whose border is occupied and interior free.
    pub fn bordered(height: usize, width: usize) -> Result<Self> {
        if height < 3 || width < 3 {
            return Err(Error::Argument("map needs at least 3x3 cells".into()));
        }
        let mut occupied = vec![false; height * width];
        for r in 0..height {
            for c in 0..width {
                occupied[r * width + c] = r == 0 || c == 0 || r == height - 1 || c == width - 1;
            }
        }
        Ok(Self { height, width, occupied })
    }

    pub fn from_cells(height: usize, width: usize, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != height * width {
            return Err(Error::Dimension {
                context: "grid cells",
                expected: height * width,
                got: occupied.len(),
            });
        }
        let map = Self { height, width, occupied };
        let border_ok = (0..height).all(|r| map.is_occupied(r, 0) && map.is_occupied(r, width - 1))
            && (0..width).all(|c| map.is_occupied(0, c) && map.is_occupied(height - 1, c));
        if !border_ok {
            return Err(Error::Argument("map border must be occupied".into()));
        }
        if map.free_cells().next().is_none() {
            return Err(Error::Generation("map has no free cell".into()));
        }
        Ok(map)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, occupied: bool) {
        self.occupied[row * self.width + col] = occupied;
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height * self.width)
            .filter(|i| !self.occupied[*i])
            .map(|i| (i / self.width, i % self.width))
    }

    /// The map turned a quarter turn; cell `(r, c)` moves to `(c, height - 1 - r)`.
    pub fn rotated(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut occupied = vec![false; h * w];
        for r in 0..h {
            for c in 0..w {
                occupied[c * h + (h - 1 - r)] = self.is_occupied(r, c);
            }
        }
        Self {
            height: w,
            width: h,
            occupied,
        }
    }
}

/// Robot pose: a cell plus a heading in radians. Heading 0 points along +col,
/// pi/2 along +row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub row: usize,
    pub col: usize,
    pub heading: f64,
}

const TIE: f64 = 1e-9;

/// Ranges of `beams` evenly spaced rays starting at `pose.heading`.
///
/// Each ray walks the grid from the pose's cell centre; a ray passing exactly
/// through a cell corner steps diagonally. The range is the distance between
/// the centres of the start cell and the first occupied cell.
pub fn raycast(map: &GridMap, pose: Pose, beams: usize) -> Result<Array> {
    if pose.row >= map.height || pose.col >= map.width || map.is_occupied(pose.row, pose.col) {
        return Err(Error::Argument(format!(
            "pose ({}, {}) is not a free cell",
            pose.row, pose.col
        )));
    }
    if beams == 0 {
        return Err(Error::Argument("raycast needs at least one beam".into()));
    }
    let mut out = Vec::with_capacity(beams);
    for j in 0..beams {
        let theta = pose.heading + core::f64::consts::TAU * j as f64 / beams as f64;
        let (dy, dx) = (libm::sin(theta), libm::cos(theta));
        let (mut col, mut row) = (pose.col as isize, pose.row as isize);
        let step_c: isize = if dx > 0.0 { 1 } else { -1 };
        let step_r: isize = if dy > 0.0 { 1 } else { -1 };
        let delta_c = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
        let delta_r = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };
        let mut next_c = 0.5 * delta_c;
        let mut next_r = 0.5 * delta_r;
        loop {
            if (next_c - next_r).abs() <= TIE {
                col += step_c;
                row += step_r;
                next_c += delta_c;
                next_r += delta_r;
            } else if next_c < next_r {
                col += step_c;
                next_c += delta_c;
            } else {
                row += step_r;
                next_r += delta_r;
            }
            if row < 0 || col < 0 || row as usize >= map.height || col as usize >= map.width {
                return Err(Error::Argument("ray left an unbordered map".into()));
            }
            if map.is_occupied(row as usize, col as usize) {
                let dr = (row - pose.row as isize) as f64;
                let dc = (col - pose.col as isize) as f64;
                out.push(libm::sqrt(dr * dr + dc * dc));
                break;
            }
        }
    }
    Ok(Array::vector(out))
}

/// Room-and-corridor maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeConfig {
    #[serde(default = "defaults::size")]
    pub height: usize,
    #[serde(default = "defaults::size")]
    pub width: usize,
    #[serde(default = "defaults::beams")]
    pub beams: usize,
    /// Standard deviation of additive range noise, in cells.
    #[serde(default)]
    pub range_noise: f64,
    /// Number of full-length interior walls, each with one door.
    #[serde(default = "defaults::walls")]
    pub walls: usize,
    #[serde(default = "defaults::door_width")]
    pub door_width: usize,
    /// Number of square obstacles.
    #[serde(default = "defaults::obstacles")]
    pub obstacles: usize,
    #[serde(default = "defaults::obstacle_size")]
    pub max_obstacle_size: usize,
}

mod defaults {
    pub fn size() -> usize {
        32
    }
    pub fn beams() -> usize {
        16
    }
    pub fn walls() -> usize {
        3
    }
    pub fn door_width() -> usize {
        3
    }
    pub fn obstacles() -> usize {
        4
    }
    pub fn obstacle_size() -> usize {
        3
    }
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            height: defaults::size(),
            width: defaults::size(),
            beams: defaults::beams(),
            range_noise: 0.0,
            walls: defaults::walls(),
            door_width: defaults::door_width(),
            obstacles: defaults::obstacles(),
            max_obstacle_size: defaults::obstacle_size(),
        }
    }
}

impl LocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::Argument("localization maps need H, W >= 8".into()));
        }
        if self.beams < 4 {
            return Err(Error::Argument("localization needs at least 4 beams".into()));
        }
        if !(self.range_noise >= 0.0 && self.range_noise.is_finite()) {
            return Err(Error::Argument("range noise must be finite and >= 0".into()));
        }
        if self.door_width == 0 || self.max_obstacle_size == 0 {
            return Err(Error::Argument("door and obstacle sizes must be positive".into()));
        }
        Ok(())
    }

    /// Scale dividing raw ranges in the observation vector.
    pub fn range_scale(&self) -> f64 {
        self.height.max(self.width) as f64
    }
}

pub fn gen_map(cfg: &LocalizeConfig, rng: &mut Rng) -> Result<GridMap> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut map = GridMap::bordered(h, w)?;
    for _ in 0..cfg.walls {
        let vertical = rng.below(2) == 0;
        let (across, along) = if vertical { (w, h) } else { (h, w) };
        let pos = 2 + rng.below(across - 4);
        let door_len = cfg.door_width.min(along - 2);
        let door = 1 + rng.below(along - 1 - door_len);
        for t in 1..along - 1 {
            if t >= door && t < door + door_len {
                continue;
            }
            if vertical {
                map.set(t, pos, true);
            } else {
                map.set(pos, t, true);
            }
        }
    }
    for _ in 0..cfg.obstacles {
        let size = 1 + rng.below(cfg.max_obstacle_size);
        if size + 2 > h || size + 2 > w {
            continue;
        }
        let r0 = 1 + rng.below(h - 1 - size);
        let c0 = 1 + rng.below(w - 1 - size);
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                map.set(r, c, true);
            }
        }
    }
    if map.free_cells().next().is_none() {
        return Err(Error::Generation("map generator left no free cell".into()));
    }
    Ok(map)
}

/// Observation layout: occupancy (row-major, 1.0 = occupied) followed by the
/// scan divided by `range_scale`.
pub fn gen_localization(cfg: &LocalizeConfig, rng: &mut Rng) -> Result<TaskInstance> {
    let map = gen_map(cfg, rng)?;
    let free: Vec<(usize, usize)> = map.free_cells().collect();
    let (row, col) = free[rng.below(free.len())];
    let scan = raycast(&map, Pose { row, col, heading: 0.0 }, cfg.beams)?;
    let scale = cfg.range_scale();
    let mut obs: Vec<f64> = map.cells().iter().map(|o| if *o { 1.0 } else { 0.0 }).collect();
    for r in scan.data() {
        let noisy = if cfg.range_noise > 0.0 {
            (r + cfg.range_noise * rng.normal()).max(0.0)
        } else {
            *r
        };
        obs.push(noisy / scale);
    }
    TaskInstance::new(
        TaskKind::Localize,
        Array::vector(obs),
        Truth::Cell {
            row,
            col,
            height: cfg.height,
            width: cfg.width,
        },
        cfg.height * cfg.width,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_room_ranges_reach_the_border() {
        let map = GridMap::bordered(10, 12).unwrap();
        let pose = Pose { row: 3, col: 4, heading: 0.0 };
        let r = raycast(&map, pose, 4).unwrap();
        // east, south, west, north
        assert_eq!(r.data(), &[7.0, 6.0, 4.0, 3.0]);
    }

    #[test]
    fn adjacent_wall_is_one_cell() {
        let map = GridMap::bordered(8, 8).unwrap();
        let r = raycast(&map, Pose { row: 1, col: 1, heading: core::f64::consts::PI }, 4).unwrap();
        assert_eq!(r.data()[0], 1.0);
    }

    #[test]
    fn diagonal_passes_through_corners() {
        let map = GridMap::bordered(8, 8).unwrap();
        let r = raycast(&map, Pose { row: 2, col: 2, heading: core::f64::consts::FRAC_PI_4 }, 4).unwrap();
        assert!((r.data()[0] - 5.0 * core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn occupied_pose_rejected() {
        let map = GridMap::bordered(8, 8).unwrap();
        assert!(matches!(raycast(&map, Pose { row: 0, col: 3, heading: 0.0 }, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn generated_truth_is_free_and_reproducible() {
        let cfg = LocalizeConfig::default();
        for seed in 0..50 {
            let a = gen_localization(&cfg, &mut Rng::new(seed)).unwrap();
            let b = gen_localization(&cfg, &mut Rng::new(seed)).unwrap();
            assert_eq!(a, b);
            let Truth::Cell { row, col, .. } = *a.truth() else { panic!() };
            assert_eq!(a.observation().data()[row * cfg.width + col], 0.0);
            assert_eq!(a.observation().len(), cfg.height * cfg.width + cfg.beams);
        }
    }

    #[test]
    fn rotation_moves_cells() {
        let mut map = GridMap::bordered(8, 10).unwrap();
        map.set(2, 3, true);
        let rot = map.rotated();
        assert_eq!((rot.height(), rot.width()), (10, 8));
        assert!(rot.is_occupied(3, 8 - 1 - 2));
    }

    #[test]
    fn config_bounds() {
        let cfg = LocalizeConfig {
            height: 6,
            ..Default::default()
        };
        assert!(gen_localization(&cfg, &mut Rng::new(0)).is_err());
    }
}
