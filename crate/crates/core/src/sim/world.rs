use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_map::{CellState, OccupancyGrid};

/// Map resolution of the built-in worlds.
pub const WORLD_RESOLUTION: f64 = 0.05;

/// A straight wall, in meters. Walls run through the centers of the cells
/// they occupy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    /// Distance along the ray `origin + t·dir` to this segment, if hit.
    fn intersect(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let denom = cross(dir, e);
        let w = [self.a[0] - origin[0], self.a[1] - origin[1]];
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = cross(w, e) / denom;
        let s = cross(w, dir) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
    }

    /// Euclidean distance from a point to the segment.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let w = [p[0] - self.a[0], p[1] - self.a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let s = if len2 > 0.0 {
            ((w[0] * e[0] + w[1] * e[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (w[0] - s * e[0]).hypot(w[1] - s * e[1])
    }
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Result of a raycast: `range` is the hit distance, or `max_range` on a miss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub range: f64,
    pub hit: bool,
}

/// A rectangular maze inside a world, in cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeRegion {
    pub name: String,
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

impl MazeRegion {
    pub fn contains(&self, col: usize, row: usize) -> bool {
        (self.col..self.col + self.width).contains(&col)
            && (self.row..self.row + self.height).contains(&row)
    }
}

/// Occupancy grid plus the wall segments it was rasterized from.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    name: String,
    grid: OccupancyGrid,
    segments: Vec<Segment>,
    mazes: Vec<MazeRegion>,
}

impl World {
    /// Checks that every wall lies on Occupied cells.
    pub fn new(
        name: impl Into<String>,
        grid: OccupancyGrid,
        segments: Vec<Segment>,
        mazes: Vec<MazeRegion>,
    ) -> Result<Self> {
        let step = grid.resolution() / 4.0;
        for s in &segments {
            let len = (s.b[0] - s.a[0]).hypot(s.b[1] - s.a[1]);
            let n = (len / step).ceil() as usize;
            for i in 0..=n {
                let f = if n == 0 { 0.0 } else { i as f64 / n as f64 };
                let p = [
                    s.a[0] + f * (s.b[0] - s.a[0]),
                    s.a[1] + f * (s.b[1] - s.a[1]),
                ];
                match grid.cell_at(p[0], p[1]) {
                    Some((c, r)) if grid.get(c, r) == CellState::Occupied => {}
                    _ => {
                        return Err(Error::InvalidMap(format!(
                            "wall point {p:?} is not on an occupied cell"
                        )))
                    }
                }
            }
        }
        for m in &mazes {
            if m.col + m.width > grid.width() || m.row + m.height > grid.height() {
                return Err(Error::InvalidMap(format!(
                    "maze {} exceeds the grid",
                    m.name
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            grid,
            segments,
            mazes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn mazes(&self) -> &[MazeRegion] {
        &self.mazes
    }

    pub fn maze(&self, name: &str) -> Option<&MazeRegion> {
        self.mazes.iter().find(|m| m.name == name)
    }

    /// Free plus occupied area of all mazes, m².
    pub fn structured_area(&self) -> f64 {
        let r2 = self.grid.resolution() * self.grid.resolution();
        self.mazes
            .iter()
            .map(|m| (m.width * m.height) as f64 * r2)
            .sum()
    }

    /// Exact distance along `azimuth` to the nearest wall, up to `max_range`.
    pub fn raycast(&self, origin: [f64; 2], azimuth: f64, max_range: f64) -> RayHit {
        let (s, c) = azimuth.sin_cos();
        let best = self
            .segments
            .iter()
            .filter_map(|seg| seg.intersect(origin, [c, s]))
            .fold(f64::INFINITY, f64::min);
        if best <= max_range {
            RayHit {
                range: best,
                hit: true,
            }
        } else {
            RayHit {
                range: max_range,
                hit: false,
            }
        }
    }

    /// Distance from a point to the nearest wall.
    pub fn wall_distance(&self, p: [f64; 2]) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if `p` lies in a Free cell at least `clearance` from every wall.
    pub fn is_clear(&self, p: [f64; 2], clearance: f64) -> bool {
        matches!(self.grid.cell_at(p[0], p[1]), Some((c, r)) if self.grid.get(c, r) == CellState::Free)
            && self.wall_distance(p) >= clearance
    }

    /// True if the straight path from `a` to `b` keeps `clearance` to all walls.
    pub fn path_clear(&self, a: [f64; 2], b: [f64; 2], clearance: f64) -> bool {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / (self.grid.resolution() / 2.0)).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let f = i as f64 / n as f64;
            self.is_clear(
                [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])],
                clearance,
            )
        })
    }
}

/// Draws axis-aligned walls in maze-local cell coordinates.
struct MazeBuilder<'a> {
    grid: &'a mut OccupancyGrid,
    segments: &'a mut Vec<Segment>,
    col: usize,
    row: usize,
}

impl<'a> MazeBuilder<'a> {
    fn new(
        grid: &'a mut OccupancyGrid,
        segments: &'a mut Vec<Segment>,
        region: &MazeRegion,
    ) -> Self {
        for r in region.row..region.row + region.height {
            for c in region.col..region.col + region.width {
                grid.set(c, r, CellState::Free);
            }
        }
        let mut b = Self {
            grid,
            segments,
            col: region.col,
            row: region.row,
        };
        let (w, h) = (region.width - 1, region.height - 1);
        b.wall(0, 0, w, 0);
        b.wall(w, 0, w, h);
        b.wall(0, h, w, h);
        b.wall(0, 0, 0, h);
        b
    }

    /// Wall from cell `(c0, r0)` to `(c1, r1)` inclusive; must be axis aligned.
    fn wall(&mut self, c0: usize, r0: usize, c1: usize, r1: usize) -> &mut Self {
        assert!(c0 == c1 || r0 == r1, "walls are axis aligned");
        for r in r0.min(r1)..=r0.max(r1) {
            for c in c0.min(c1)..=c0.max(c1) {
                self.grid
                    .set(self.col + c, self.row + r, CellState::Occupied);
            }
        }
        let a = self.grid.cell_center(self.col + c0, self.row + r0);
        let b = self.grid.cell_center(self.col + c1, self.row + r1);
        self.segments.push(Segment { a, b });
        self
    }

    /// Solid rectangular obstacle with corners `(c0, r0)` and `(c1, r1)`.
    fn block(&mut self, c0: usize, r0: usize, c1: usize, r1: usize) -> &mut Self {
        for r in r0..=r1 {
            for c in c0..=c1 {
                self.grid
                    .set(self.col + c, self.row + r, CellState::Occupied);
            }
        }
        self.wall(c0, r0, c1, r0)
            .wall(c1, r0, c1, r1)
            .wall(c1, r1, c0, r1)
            .wall(c0, r1, c0, r0)
    }
}

/// Width of a doorway, cells.
const DOOR: usize = 12;

/// Connection between two adjacent rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opening {
    /// Doorway starting `offset + 1` cells past the rooms' shared corner.
    Door(usize),
    /// No wall at all.
    Open,
}

/// Room index `(column, row)`.
pub type Room = (usize, usize);

/// A maze made of a grid of rooms bounded by the wall lines `cols` and
/// `rows`, which include the outer boundary. Walls between rooms are solid
/// unless listed in `openings`.
#[derive(Debug, Clone, Copy)]
pub struct RoomMaze {
    pub cols: &'static [usize],
    pub rows: &'static [usize],
    pub openings: &'static [(Room, Room, Opening)],
    /// Extra axis-aligned walls `(c0, r0, c1, r1)` in maze cells.
    pub walls: &'static [(usize, usize, usize, usize)],
    /// Solid boxes `(c0, r0, c1, r1)` in maze cells.
    pub blocks: &'static [(usize, usize, usize, usize)],
}

impl RoomMaze {
    /// Width in cells.
    pub fn width(&self) -> usize {
        self.cols[self.cols.len() - 1] + 1
    }

    /// Height in cells.
    pub fn height(&self) -> usize {
        self.rows[self.rows.len() - 1] + 1
    }

    fn opening(&self, a: Room, b: Room) -> Option<Opening> {
        self.openings
            .iter()
            .find(|(p, q, _)| (*p == a && *q == b) || (*p == b && *q == a))
            .map(|o| o.2)
    }

    /// Center of a room, maze cells.
    pub fn room_center(&self, room: Room) -> [f64; 2] {
        let (c0, c1) = (self.cols[room.0], self.cols[room.0 + 1]);
        let (r0, r1) = (self.rows[room.1], self.rows[room.1 + 1]);
        [(c0 + c1) as f64 / 2.0, (r0 + r1) as f64 / 2.0]
    }

    /// Waypoints in maze cells through room centers and doorways along
    /// `rooms`, each adjacent to the previous.
    pub fn route(&self, rooms: &[Room]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::new();
        for (k, &room) in rooms.iter().enumerate() {
            if k > 0 {
                let prev = rooms[k - 1];
                let mid = |off: usize| (off + 1) as f64 + (DOOR as f64 - 1.0) / 2.0;
                match self.opening(prev, room) {
                    Some(Opening::Door(off)) if prev.1 == room.1 => out.push([
                        self.cols[prev.0.max(room.0)] as f64,
                        self.rows[room.1] as f64 + mid(off),
                    ]),
                    Some(Opening::Door(off)) => out.push([
                        self.cols[room.0] as f64 + mid(off),
                        self.rows[prev.1.max(room.1)] as f64,
                    ]),
                    Some(Opening::Open) => {}
                    None => {
                        return Err(Error::InvalidSpec(format!(
                            "rooms {prev:?} and {room:?} are not connected"
                        )))
                    }
                }
            }
            out.push(self.room_center(room));
        }
        Ok(out)
    }

    fn draw(&self, b: &mut MazeBuilder<'_>) {
        let (nc, nr) = (self.cols.len() - 1, self.rows.len() - 1);
        for k in 1..nc {
            for j in 0..nr {
                let (c, r0, r1) = (self.cols[k], self.rows[j], self.rows[j + 1]);
                match self.opening((k - 1, j), (k, j)) {
                    None => {
                        b.wall(c, r0, c, r1);
                    }
                    Some(Opening::Door(off)) => {
                        b.wall(c, r0, c, r0 + off).wall(c, r0 + off + DOOR + 1, c, r1);
                    }
                    Some(Opening::Open) => {}
                }
            }
        }
        for m in 1..nr {
            for i in 0..nc {
                let (r, c0, c1) = (self.rows[m], self.cols[i], self.cols[i + 1]);
                match self.opening((i, m - 1), (i, m)) {
                    None => {
                        b.wall(c0, r, c1, r);
                    }
                    Some(Opening::Door(off)) => {
                        b.wall(c0, r, c0 + off, r).wall(c0 + off + DOOR + 1, r, c1, r);
                    }
                    Some(Opening::Open) => {}
                }
            }
        }
        for &(c0, r0, c1, r1) in self.walls {
            b.wall(c0, r0, c1, r1);
        }
        for &(c0, r0, c1, r1) in self.blocks {
            b.block(c0, r0, c1, r1);
        }
    }
}

/// 5 m × 3.2 m maze of rooms about 1 m across, each with a box against a
/// wall. The built-in sequences fly here.
pub const PRIMARY_LAYOUT: RoomMaze = RoomMaze {
    cols: &[0, 17, 41, 58, 80, 99],
    rows: &[0, 19, 43, 63],
    openings: &[
        ((0, 0), (1, 0), Opening::Door(3)),
        ((0, 2), (1, 2), Opening::Door(5)),
        ((1, 1), (2, 1), Opening::Door(8)),
        ((1, 2), (2, 2), Opening::Door(2)),
        ((2, 0), (3, 0), Opening::Door(5)),
        ((2, 2), (3, 2), Opening::Door(1)),
        ((3, 0), (4, 0), Opening::Door(4)),
        ((3, 1), (4, 1), Opening::Door(10)),
        ((1, 0), (1, 1), Opening::Door(9)),
        ((2, 0), (2, 1), Opening::Door(3)),
        ((3, 0), (3, 1), Opening::Door(7)),
        ((0, 1), (0, 2), Opening::Door(2)),
        ((2, 1), (2, 2), Opening::Door(1)),
        ((3, 1), (3, 2), Opening::Door(4)),
        ((4, 1), (4, 2), Opening::Door(5)),
    ],
    walls: &[],
    blocks: &[
        (5, 1, 8, 4),
        (36, 10, 40, 14),
        (43, 1, 46, 4),
        (73, 1, 76, 4),
        (91, 1, 94, 4),
        (7, 20, 12, 25),
        (18, 26, 21, 29),
        (42, 21, 45, 24),
        (59, 21, 62, 24),
        (87, 20, 90, 23),
        (3, 59, 6, 62),
        (31, 58, 35, 62),
        (44, 58, 48, 62),
        (74, 58, 78, 62),
        (89, 59, 92, 62),
    ],
};

/// 3.2 m × 2 m open hall.
const LAYOUT_B: RoomMaze = RoomMaze { cols: &[0, 63], rows: &[0, 39], openings: &[], walls: &[], blocks: &[] };

/// 2.4 m × 2 m open hall.
const LAYOUT_C: RoomMaze = RoomMaze { cols: &[0, 47], rows: &[0, 39], openings: &[], walls: &[], blocks: &[] };

/// 2 m × 2 m open room.
const LAYOUT_D: RoomMaze = RoomMaze { cols: &[0, 39], rows: &[0, 39], openings: &[], walls: &[], blocks: &[] };

fn build(
    name: &str,
    width: usize,
    height: usize,
    mazes: &[(&str, usize, usize, &RoomMaze)],
) -> World {
    let mut grid = OccupancyGrid::filled(
        width,
        height,
        WORLD_RESOLUTION,
        [0.0, 0.0],
        CellState::Unknown,
    )
    .expect("built-in grid dimensions are valid");
    let mut segments = Vec::new();
    let mut regions = Vec::new();
    for &(maze, col, row, layout) in mazes {
        let region = MazeRegion {
            name: maze.to_string(),
            col,
            row,
            width: layout.width(),
            height: layout.height(),
        };
        layout.draw(&mut MazeBuilder::new(&mut grid, &mut segments, &region));
        regions.push(region);
    }
    World::new(name, grid, segments, regions).expect("built-in world is consistent")
}

/// Name of the world holding only the primary maze.
pub const PRIMARY_WORLD: &str = "drone_maze";
/// Name of the world with the primary maze and three artificial ones.
pub const EXTENDED_WORLD: &str = "extended";
/// Name of the primary maze region in both worlds.
pub const PRIMARY_MAZE: &str = "primary";

/// The built-in worlds: the 16 m² primary maze alone, and extended with
/// three empty enclosures to 31.2 m² of structured area. The primary maze
/// sits at the same position in both.
pub fn builtin_worlds() -> Vec<World> {
    // 2 m between mazes and to the grid border
    const GAP: usize = 40;
    let (p, b, c, d) = (&PRIMARY_LAYOUT, &LAYOUT_B, &LAYOUT_C, &LAYOUT_D);
    let right = GAP + p.width() + GAP;
    vec![
        build(PRIMARY_WORLD, p.width() + 2 * GAP, p.height() + 2 * GAP, &[(PRIMARY_MAZE, GAP, GAP, p)]),
        build(
            EXTENDED_WORLD,
            right + b.width() + GAP + d.width() + GAP,
            GAP + b.height() + GAP + c.height() + GAP,
            &[
                (PRIMARY_MAZE, GAP, GAP, p),
                ("hall", right, GAP, b),
                ("annex", right, GAP + b.height() + GAP, c),
                ("room", right + b.width() + GAP, GAP, d),
            ],
        ),
    ]
}

pub fn builtin_world(name: &str) -> Result<World> {
    builtin_worlds()
        .into_iter()
        .find(|w| w.name() == name)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown world `{name}`")))
}
