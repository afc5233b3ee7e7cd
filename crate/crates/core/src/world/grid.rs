use std::collections::{BTreeSet, VecDeque};

use crate::error::WorldError;
use crate::geometry::{MetricScale, Point2};

use super::kinematics::Pose2;

/// Grid cell as `(column, row)`; row 0 is the bottom of the world.
pub type Cell = (usize, usize);

pub const MIN_RESOLUTION_M: f64 = 0.01;
pub const MAX_RESOLUTION_M: f64 = 0.25;

/// Occupancy grid with an under-clearance layer. Cell `(i, j)` covers
/// `[i*res, (i+1)*res) x [j*res, (j+1)*res)` in world meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    resolution_m: f64,
    width: usize,
    height: usize,
    occupancy: Vec<bool>,
    clearance_m: Vec<Option<f64>>,
    scale: MetricScale,
    image_width: f64,
    image_height: f64,
    start_pose: Pose2,
    scene_image_ref: Option<String>,
}

/// First contact found by a footprint sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHit {
    /// Travel distance until the footprint touches the obstacle.
    pub distance_m: f64,
    /// Offending cell; `None` when the scene boundary is hit first.
    pub cell: Option<Cell>,
    /// Offset of the obstacle from the heading line, positive to the left.
    pub lateral_m: f64,
}

impl SceneGrid {
    /// An empty (all free) grid.
    pub fn empty(
        resolution_m: f64,
        width: usize,
        height: usize,
        scale: MetricScale,
        image_width: f64,
        image_height: f64,
        start_pose: Pose2,
    ) -> Result<Self, WorldError> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| WorldError::BadDimensions("grid too large".into()))?;
        let grid = Self {
            resolution_m,
            width,
            height,
            occupancy: vec![false; n],
            clearance_m: vec![None; n],
            scale,
            image_width,
            image_height,
            start_pose,
            scene_image_ref: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Check the structural invariants: resolution range, non-empty grid,
    /// clearances only on occupied cells, start pose inside a free cell.
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(MIN_RESOLUTION_M..=MAX_RESOLUTION_M).contains(&self.resolution_m) {
            return Err(WorldError::BadResolution(self.resolution_m));
        }
        if self.width == 0 || self.height == 0 {
            return Err(WorldError::BadDimensions(format!(
                "{}x{} cells",
                self.width, self.height
            )));
        }
        if self.occupancy.len() != self.width * self.height
            || self.clearance_m.len() != self.occupancy.len()
        {
            return Err(WorldError::BadDimensions("layer size mismatch".into()));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(WorldError::BadDimensions(format!(
                "image {}x{}",
                self.image_width, self.image_height
            )));
        }
        for (k, c) in self.clearance_m.iter().enumerate() {
            if let Some(h) = c {
                if !self.occupancy[k] {
                    return Err(WorldError::ClearanceOnFreeCell {
                        x: k % self.width,
                        y: k / self.width,
                    });
                }
                if !(h.is_finite() && *h >= 0.0) {
                    return Err(WorldError::BadDimensions(format!("clearance {h} is invalid")));
                }
            }
        }
        match self.cell_at(self.start_pose.position()) {
            Some(c) if !self.is_occupied(c) => Ok(()),
            _ => Err(WorldError::BadDimensions("start pose is not in a free cell".into())),
        }
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scale(&self) -> &MetricScale {
        &self.scale
    }

    pub fn image_width(&self) -> f64 {
        self.image_width
    }

    pub fn image_height(&self) -> f64 {
        self.image_height
    }

    pub fn start_pose(&self) -> Pose2 {
        self.start_pose
    }

    pub fn set_start_pose(&mut self, pose: Pose2) {
        self.start_pose = pose;
    }

    pub fn scene_image_ref(&self) -> Option<&str> {
        self.scene_image_ref.as_deref()
    }

    pub fn set_scene_image_ref(&mut self, r: Option<String>) {
        self.scene_image_ref = r;
    }

    /// World extent in meters.
    pub fn extent_m(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution_m,
            self.height as f64 * self.resolution_m,
        )
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.width + c.0
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupancy[self.idx(c)]
    }

    pub fn clearance(&self, c: Cell) -> Option<f64> {
        self.clearance_m[self.idx(c)]
    }

    /// Mark a cell occupied, optionally with an under-clearance height.
    pub fn set_occupied(&mut self, c: Cell, clearance_m: Option<f64>) {
        let k = self.idx(c);
        self.occupancy[k] = true;
        self.clearance_m[k] = clearance_m;
    }

    pub fn clear_cell(&mut self, c: Cell) {
        let k = self.idx(c);
        self.occupancy[k] = false;
        self.clearance_m[k] = None;
    }

    /// Same scene with every obstacle removed.
    pub fn cleared(&self) -> Self {
        let mut g = self.clone();
        g.occupancy.iter_mut().for_each(|o| *o = false);
        g.clearance_m.iter_mut().for_each(|c| *c = None);
        g
    }

    /// Occupy every cell overlapping the axis-aligned rectangle `lo..hi`.
    /// Returns the cells touched.
    pub fn fill_rect(&mut self, lo: Point2, hi: Point2, clearance_m: Option<f64>) -> Vec<Cell> {
        let cells = self.cells_overlapping(lo, hi);
        for &c in &cells {
            self.set_occupied(c, clearance_m);
        }
        cells
    }

    /// Cells whose squares overlap the open rectangle `lo..hi`.
    pub fn cells_overlapping(&self, lo: Point2, hi: Point2) -> Vec<Cell> {
        let r = self.resolution_m;
        let i0 = ((lo.x / r).floor().max(0.0)) as usize;
        let j0 = ((lo.y / r).floor().max(0.0)) as usize;
        let i1 = ((hi.x / r).ceil().max(0.0) as usize).min(self.width);
        let j1 = ((hi.y / r).ceil().max(0.0) as usize).min(self.height);
        let mut out = Vec::new();
        for j in j0..j1 {
            for i in i0..i1 {
                out.push((i, j));
            }
        }
        out
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, o)| **o)
            .map(move |(k, _)| (k % self.width, k / self.width))
    }

    pub fn cell_at(&self, p: Point2) -> Option<Cell> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let i = (p.x / self.resolution_m).floor() as usize;
        let j = (p.y / self.resolution_m).floor() as usize;
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn cell_rect(&self, c: Cell) -> (Point2, Point2) {
        let r = self.resolution_m;
        (
            Point2::new(c.0 as f64 * r, c.1 as f64 * r),
            Point2::new((c.0 + 1) as f64 * r, (c.1 + 1) as f64 * r),
        )
    }

    pub fn cell_center(&self, c: Cell) -> Point2 {
        let r = self.resolution_m;
        Point2::new((c.0 as f64 + 0.5) * r, (c.1 as f64 + 0.5) * r)
    }

    /// Cells whose squares intersect the disk of radius `radius` around `p`.
    fn cells_near(&self, p: Point2, radius: f64) -> impl Iterator<Item = Cell> + '_ {
        let lo = Point2::new(p.x - radius, p.y - radius);
        let hi = Point2::new(p.x + radius, p.y + radius);
        self.cells_overlapping(lo, hi).into_iter()
    }

    /// Distance from `p` to the nearest occupied cell that `blocks` accepts,
    /// searching up to `radius`; `None` if there is none that close.
    pub fn nearest_occupied(
        &self,
        p: Point2,
        radius: f64,
        blocks: impl Fn(Cell) -> bool,
    ) -> Option<f64> {
        self.cells_near(p, radius)
            .filter(|&c| self.is_occupied(c) && blocks(c))
            .map(|c| {
                let (lo, hi) = self.cell_rect(c);
                rect_distance(p, lo, hi)
            })
            .filter(|d| *d <= radius)
            .min_by(f64::total_cmp)
    }

    /// True if a disk of radius `r` at `p` overlaps a blocking occupied cell
    /// or leaves the scene. Cells with clearance at least `passable_m` are
    /// not blocking.
    pub fn footprint_collides(&self, p: Point2, r: f64, passable_m: f64) -> bool {
        const EPS: f64 = 1e-9;
        let (w, h) = self.extent_m();
        if p.x - r < -EPS || p.y - r < -EPS || p.x + r > w + EPS || p.y + r > h + EPS {
            return true;
        }
        self.cells_near(p, r).any(|c| {
            if !self.is_occupied(c) || self.clearance(c).is_some_and(|h| h >= passable_m) {
                return false;
            }
            let (lo, hi) = self.cell_rect(c);
            rect_distance(p, lo, hi) < r - EPS
        })
    }

    /// Sweep a disk of radius `r` from `p` along `heading_deg` for up to
    /// `range` meters and report the first contact with an occupied cell not
    /// in `ignore`, or with the scene boundary.
    pub fn sweep(
        &self,
        p: Point2,
        heading_deg: f64,
        r: f64,
        range: f64,
        ignore: &BTreeSet<Cell>,
    ) -> Option<SweepHit> {
        let d = Point2::from_heading_deg(heading_deg);
        let mut best: Option<SweepHit> = None;
        let mut consider = |hit: SweepHit| {
            if hit.distance_m <= range && best.is_none_or(|b| hit.distance_m < b.distance_m) {
                best = Some(hit);
            }
        };
        let (w, h) = self.extent_m();
        for (pos, dir, limit, normal) in [
            (p.x, d.x, w, Point2::new(1.0, 0.0)),
            (p.y, d.y, h, Point2::new(0.0, 1.0)),
        ] {
            let t = if dir < 0.0 {
                Some(((pos - r) / -dir).max(0.0))
            } else if dir > 0.0 {
                Some(((limit - r - pos) / dir).max(0.0))
            } else if pos - r < 0.0 || pos + r > limit {
                Some(0.0)
            } else {
                None
            };
            if let Some(t) = t {
                let contact = p.add(d.scale(t)).add(normal.scale(dir.signum() * r));
                consider(SweepHit {
                    distance_m: t,
                    cell: None,
                    lateral_m: d.cross(contact.sub(p)),
                });
            }
        }
        let end = p.add(d.scale(range));
        let lo = Point2::new(p.x.min(end.x) - r, p.y.min(end.y) - r);
        let hi = Point2::new(p.x.max(end.x) + r, p.y.max(end.y) + r);
        for c in self.cells_overlapping(lo, hi) {
            if !self.is_occupied(c) || ignore.contains(&c) {
                continue;
            }
            let (clo, chi) = self.cell_rect(c);
            if let Some(t) = ray_rounded_rect(p, d, clo, chi, r) {
                consider(SweepHit {
                    distance_m: t,
                    cell: Some(c),
                    lateral_m: d.cross(self.cell_center(c).sub(p)),
                });
            }
        }
        best
    }

    /// 4-connected component of occupied cells containing `seed`, sorted.
    pub fn component(&self, seed: Cell) -> BTreeSet<Cell> {
        self.flood(seed, |_| true)
    }

    /// The object containing `seed`: its 4-connected component restricted to
    /// cells that agree with `seed` on carrying a clearance annotation. A
    /// table touching a wall is a separate object from the wall.
    pub fn object(&self, seed: Cell) -> BTreeSet<Cell> {
        let annotated = self.clearance(seed).is_some();
        self.flood(seed, |c| self.clearance(c).is_some() == annotated)
    }

    fn flood(&self, seed: Cell, admit: impl Fn(Cell) -> bool) -> BTreeSet<Cell> {
        let mut out = BTreeSet::new();
        if !self.is_occupied(seed) {
            return out;
        }
        let mut queue = VecDeque::from([seed]);
        out.insert(seed);
        while let Some((i, j)) = queue.pop_front() {
            let mut next = Vec::with_capacity(4);
            if i > 0 {
                next.push((i - 1, j));
            }
            if j > 0 {
                next.push((i, j - 1));
            }
            if i + 1 < self.width {
                next.push((i + 1, j));
            }
            if j + 1 < self.height {
                next.push((i, j + 1));
            }
            for c in next {
                if self.is_occupied(c) && admit(c) && out.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        out
    }
}

/// Euclidean distance from `p` to the closed rectangle `lo..hi`.
pub fn rect_distance(p: Point2, lo: Point2, hi: Point2) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}

/// Smallest `t >= 0` with `dist(o + t*d, rect) <= r`, for unit `d`.
pub fn ray_rounded_rect(o: Point2, d: Point2, lo: Point2, hi: Point2, r: f64) -> Option<f64> {
    if rect_distance(o, lo, hi) <= r {
        return Some(0.0);
    }
    let boxes = [
        (Point2::new(lo.x - r, lo.y), Point2::new(hi.x + r, hi.y)),
        (Point2::new(lo.x, lo.y - r), Point2::new(hi.x, hi.y + r)),
    ];
    let mut best: Option<f64> = None;
    let mut take = |t: Option<f64>| {
        if let Some(t) = t {
            if best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    };
    for (blo, bhi) in boxes {
        take(ray_aabb(o, d, blo, bhi));
    }
    for c in [lo, hi, Point2::new(lo.x, hi.y), Point2::new(hi.x, lo.y)] {
        take(ray_circle(o, d, c, r));
    }
    best
}

fn ray_aabb(o: Point2, d: Point2, lo: Point2, hi: Point2) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for (oo, dd, l, h) in [(o.x, d.x, lo.x, hi.x), (o.y, d.y, lo.y, hi.y)] {
        if dd == 0.0 {
            if oo < l || oo > h {
                return None;
            }
        } else {
            let a = (l - oo) / dd;
            let b = (h - oo) / dd;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 <= t1).then_some(t0)
}

fn ray_circle(o: Point2, d: Point2, c: Point2, r: f64) -> Option<f64> {
    let f = o.sub(c);
    let b = f.dot(d);
    let cc = f.dot(f) - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}
