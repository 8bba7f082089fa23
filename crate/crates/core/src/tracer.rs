//! Reading a tour off the halted blob.
//!
//! The occupancy snapshot is reduced to its largest 8-connected component,
//! the outer boundary is followed clockwise with Moore-neighbour tracing, and
//! cities are appended in the order the walk first passes within
//! `detect_radius` of them.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{City, Tour};
use crate::swarm::SimState;

/// A strand can retract past a city while leaving its 5x5 halting window
/// empty, so the walk may pass four cells away from a city it encloses.
pub const DEFAULT_DETECT_RADIUS: i32 = 4;
/// Bridges gaps of up to four cells so a strand tip that pinched off
/// around a city stays attached to the body.
pub const DEFAULT_CLOSING_RADIUS: i32 = 2;

/// Moore neighbourhood in clockwise order (image coordinates, `y` down),
/// starting from west.
const CLOCKWISE: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Immutable occupancy snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    /// Components discarded by [`extract_mask`].
    pub dropped_fragments: usize,
    pub dropped_cells: usize,
}

impl BlobMask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "mask shape mismatch");
        Self {
            width,
            height,
            cells,
            dropped_fragments: 0,
            dropped_cells: 0,
        }
    }

    /// Parses rows of `#` (set) and `.` (clear); handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let cells = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), width, "ragged mask rows");
                r.bytes().map(|b| b == b'#')
            })
            .collect();
        Self::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: i32, y: i32) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.cells[y as usize * self.width + x as usize]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Sizes of the 8-connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = label_components(self).1;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// 0 = clear, 255 = set.
    pub fn to_gray(&self) -> Vec<u8> {
        self.cells.iter().map(|&c| if c { 255 } else { 0 }).collect()
    }

    pub fn from_gray(width: usize, height: usize, pixels: &[u8]) -> Self {
        Self::new(width, height, pixels.iter().map(|&p| p >= 128).collect())
    }
}

/// Labels 8-connected components in row-major discovery order. Returns the
/// per-cell label (`usize::MAX` for clear cells) and the component sizes.
fn label_components(mask: &BlobMask) -> (Vec<usize>, Vec<usize>) {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let mut labels = vec![usize::MAX; mask.cells.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.cells.len() {
        if !mask.cells[start] || labels[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % mask.width) as i32, (i / mask.width) as i32);
            for (dx, dy) in CLOCKWISE {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = ny as usize * mask.width + nx as usize;
                if mask.cells[j] && labels[j] == usize::MAX {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest 8-connected component of an occupancy snapshot.
pub fn largest_component(mask: &BlobMask) -> Result<BlobMask> {
    let (labels, sizes) = label_components(mask);
    // first of the largest in discovery order
    let keep = sizes
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (label, &size)| match best {
            Some((_, s)) if s >= size => best,
            _ => Some((label, size)),
        })
        .map(|(label, _)| label)
        .ok_or(Error::EmptyBlob)?;
    let cells: Vec<bool> = labels.iter().map(|&l| l == keep).collect();
    let mut out = BlobMask::new(mask.width, mask.height, cells);
    out.dropped_fragments = sizes.len() - 1;
    out.dropped_cells = sizes.iter().sum::<usize>() - sizes[keep];
    Ok(out)
}

/// Snapshot of the halted blob, restricted to its largest component.
pub fn extract_mask(state: &SimState) -> Result<BlobMask> {
    let mask = largest_component(&occupancy_mask(state))?;
    if mask.dropped_fragments > 0 {
        log::warn!(
            "dropped {} blob fragment(s) totalling {} cells",
            mask.dropped_fragments,
            mask.dropped_cells
        );
    }
    Ok(mask)
}

/// Morphological closing with a `(2r+1)²` square: dilate, then erode. Joins
/// parts separated by gaps of up to `2r` cells; `r = 0` is the identity.
/// Off-lattice cells count as clear for both passes.
pub fn close_mask(mask: &BlobMask, radius: i32) -> BlobMask {
    if radius <= 0 {
        return mask.clone();
    }
    // padding keeps the dilation whole, so the erosion is exact at the edge
    let big = padded(mask, radius);
    let dilated = square_filter(&big, radius, true);
    let closed = square_filter(&dilated, radius, false);
    let mut out = cropped(&closed, radius, mask.width, mask.height);
    out.dropped_fragments = mask.dropped_fragments;
    out.dropped_cells = mask.dropped_cells;
    out
}

/// `any` = dilation, otherwise erosion; separable row then column pass.
/// Off-lattice cells read as clear.
fn square_filter(mask: &BlobMask, r: i32, any: bool) -> BlobMask {
    let (w, h) = (mask.width as i32, mask.height as i32);
    let pass = |src: &dyn Fn(i32, i32) -> bool, horizontal: bool| -> Vec<bool> {
        let mut out = vec![false; mask.cells.len()];
        for y in 0..h {
            for x in 0..w {
                let mut hit = !any;
                for d in -r..=r {
                    let v = if horizontal { src(x + d, y) } else { src(x, y + d) };
                    if any {
                        hit |= v;
                    } else {
                        hit &= v;
                    }
                }
                out[(y * w + x) as usize] = hit;
            }
        }
        out
    };
    let rows = BlobMask::new(mask.width, mask.height, pass(&|x, y| mask.get(x, y), true));
    BlobMask::new(mask.width, mask.height, pass(&|x, y| rows.get(x, y), false))
}

/// Copy of `mask` with `pad` clear cells added on every side.
fn padded(mask: &BlobMask, pad: i32) -> BlobMask {
    let p = pad as usize;
    let (w, h) = (mask.width + 2 * p, mask.height + 2 * p);
    let mut cells = vec![false; w * h];
    for y in 0..mask.height {
        cells[(y + p) * w + p..(y + p) * w + p + mask.width]
            .copy_from_slice(&mask.cells[y * mask.width..(y + 1) * mask.width]);
    }
    BlobMask::new(w, h, cells)
}

fn cropped(mask: &BlobMask, pad: i32, width: usize, height: usize) -> BlobMask {
    let p = pad as usize;
    let mut cells = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = (y + p) * mask.width + p;
        cells.extend_from_slice(&mask.cells[row..row + width]);
    }
    BlobMask::new(width, height, cells)
}

/// Settings for reading a tour off a halted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceConfig {
    pub detect_radius: i32,
    /// Closing radius applied before component extraction.
    pub closing_radius: i32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            detect_radius: DEFAULT_DETECT_RADIUS,
            closing_radius: DEFAULT_CLOSING_RADIUS,
        }
    }
}

/// Mask closing, largest component, boundary trace and tour reading in one
/// pass. Returns the tour and the traced mask.
pub fn read_blob_tour(mask: &BlobMask, cities: &[City], cfg: &TraceConfig) -> Result<(Tour, BlobMask)> {
    let blob = largest_component(&close_mask(mask, cfg.closing_radius))?;
    let path = trace_boundary(&blob)?;
    let tour = read_tour(&path, cities, cfg.detect_radius)?;
    Ok((tour, blob))
}

/// Occupancy snapshot of a state, all components kept.
pub fn occupancy_mask(state: &SimState) -> BlobMask {
    BlobMask::new(state.width(), state.height(), state.occupancy.to_mask())
}

/// Closed clockwise walk over the outer boundary cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPath {
    pub cells: Vec<(i32, i32)>,
}

impl BoundaryPath {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn direction_index(from: (i32, i32), to: (i32, i32)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    CLOCKWISE
        .iter()
        .position(|&c| c == d)
        .expect("backtrack cell must neighbour the current cell")
}

/// Moore-neighbour boundary following from the topmost-then-leftmost cell.
///
/// The walk keeps the blob on its right and stops when it is about to repeat
/// its first transition, so one-cell-wide parts are walked on both sides.
/// Only the first set cell's component is followed; callers pass a
/// single-component mask.
pub fn trace_boundary(mask: &BlobMask) -> Result<BoundaryPath> {
    let first = mask.cells.iter().position(|&c| c).ok_or(Error::EmptyBlob)?;
    let start = ((first % mask.width) as i32, (first / mask.width) as i32);

    // Returns the next boundary cell and the new backtrack cell.
    let advance = |current: (i32, i32), backtrack: (i32, i32)| -> Option<((i32, i32), (i32, i32))> {
        let from = direction_index(current, backtrack);
        let mut prev = backtrack;
        for k in 1..=8 {
            let (dx, dy) = CLOCKWISE[(from + k) % 8];
            let cand = (current.0 + dx, current.1 + dy);
            if mask.get(cand.0, cand.1) {
                return Some((cand, prev));
            }
            prev = cand;
        }
        None
    };

    let mut cells = vec![start];
    let Some((second, mut backtrack)) = advance(start, (start.0 - 1, start.1)) else {
        return Ok(BoundaryPath { cells });
    };
    let mut current = second;
    // a boundary has at most 4 visits per cell; anything beyond is a bug
    let limit = 4 * mask.cells.len() + 8;
    loop {
        let (next, bt) = advance(current, backtrack).expect("boundary cell has a neighbour");
        if current == start && next == second {
            break;
        }
        cells.push(current);
        assert!(cells.len() <= limit, "boundary trace failed to close");
        current = next;
        backtrack = bt;
    }
    Ok(BoundaryPath { cells })
}

/// Walks `path` and lists cities in the order they are first passed within
/// `detect_radius` (Chebyshev) of a path cell.
pub fn read_tour(path: &BoundaryPath, cities: &[City], detect_radius: i32) -> Result<Tour> {
    let mut seen = vec![false; cities.len()];
    let mut order = Vec::with_capacity(cities.len());
    let mut near: Vec<(i32, usize)> = Vec::new();
    for &(x, y) in &path.cells {
        near.clear();
        for (i, c) in cities.iter().enumerate() {
            let d = (c.x - x).abs().max((c.y - y).abs());
            if !seen[i] && d <= detect_radius {
                near.push((d, i));
            }
        }
        near.sort_unstable();
        for &(_, i) in &near {
            seen[i] = true;
            order.push(i);
        }
        if order.len() == cities.len() {
            break;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::CityOffPerimeter {
            label: cities[missing].label.clone(),
        });
    }
    Tour::new(order, cities)
}

/// Fraction of occupied cells in the largest 8-connected component, and the
/// number of components.
pub fn connectivity(state: &SimState) -> (f64, usize) {
    let sizes = occupancy_mask(state).component_sizes();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return (0.0, 0);
    }
    (sizes[0] as f64 / total as f64, sizes.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ring() {
        let mask = BlobMask::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]);
        let path = trace_boundary(&mask).unwrap();
        assert_eq!(
            path.cells,
            vec![(1, 1), (2, 1), (3, 1), (3, 2), (3, 3), (2, 3), (1, 3), (1, 2)]
        );
    }

    #[test]
    fn single_cell() {
        let mask = BlobMask::from_ascii(&["...", ".#.", "..."]);
        assert_eq!(trace_boundary(&mask).unwrap().cells, vec![(1, 1)]);
    }

    #[test]
    fn two_cells() {
        let mask = BlobMask::from_ascii(&["##"]);
        assert_eq!(trace_boundary(&mask).unwrap().cells, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn horizontal_bar() {
        let mask = BlobMask::from_ascii(&["#####"]);
        let path = trace_boundary(&mask).unwrap();
        assert_eq!(
            path.cells,
            vec![(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (3, 0), (2, 0), (1, 0)]
        );
    }

    #[test]
    fn diagonal_steps_skip_inner_corner() {
        let mask = BlobMask::from_ascii(&["###", "###", "##."]);
        let path = trace_boundary(&mask).unwrap();
        assert!(!path.cells.contains(&(1, 1)));
        assert_eq!(path.len(), 7);
    }

    #[test]
    fn empty_mask_errors() {
        let mask = BlobMask::from_ascii(&["...", "..."]);
        assert!(matches!(trace_boundary(&mask), Err(Error::EmptyBlob)));
        assert!(matches!(largest_component(&mask), Err(Error::EmptyBlob)));
    }

    #[test]
    fn fragments_dropped() {
        let mask = BlobMask::from_ascii(&[
            "####....#",
            "####.....",
            "####...##",
        ]);
        let kept = largest_component(&mask).unwrap();
        assert_eq!(kept.count(), 12);
        assert_eq!(kept.dropped_fragments, 2);
        assert_eq!(kept.dropped_cells, 3);

        let whole = BlobMask::from_ascii(&["##.", ".##"]);
        let kept = largest_component(&whole).unwrap();
        assert_eq!(kept.cells(), whole.cells());
        assert_eq!(kept.dropped_fragments, 0);
    }

    fn cities(points: &[(i32, i32)]) -> Vec<City> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| City::new(crate::geometry::city_label(i), x, y))
            .collect()
    }

    #[test]
    fn convex_cities_read_clockwise() {
        // 11×11 block; cities at four corners and one edge midpoint
        let rows: Vec<String> = (0..13)
            .map(|y| {
                (0..13)
                    .map(|x| if (1..=11).contains(&x) && (1..=11).contains(&y) { '#' } else { '.' })
                    .collect()
            })
            .collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let mask = BlobMask::from_ascii(&refs);
        let cs = cities(&[(11, 11), (1, 1), (11, 1), (1, 11), (11, 6)]);
        let path = trace_boundary(&mask).unwrap();
        let tour = read_tour(&path, &cs, 0).unwrap();
        assert_eq!(tour.order, vec![1, 2, 4, 0, 3]);
    }

    #[test]
    fn peninsula_city_taken_on_first_side() {
        // one-cell-wide peninsula sticking up from a block; the city sits on
        // the peninsula and is passed twice
        let mask = BlobMask::from_ascii(&[
            "....#....",
            "....#....",
            "....#....",
            "#########",
            "#########",
        ]);
        let cs = cities(&[(4, 1), (0, 4), (8, 4)]);
        let path = trace_boundary(&mask).unwrap();
        let visits = path.cells.iter().filter(|&&c| c == (4, 1)).count();
        assert_eq!(visits, 2);
        let tour = read_tour(&path, &cs, 0).unwrap();
        assert_eq!(tour.order, vec![0, 2, 1]);
    }

    #[test]
    fn off_perimeter_city_is_error() {
        let mask = BlobMask::from_ascii(&["#####", "#####", "#####", "#####", "#####"]);
        let path = trace_boundary(&mask).unwrap();
        let cs = cities(&[(0, 0), (2, 2), (4, 4)]);
        match read_tour(&path, &cs, 0) {
            Err(Error::CityOffPerimeter { label }) => assert_eq!(label, "B"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_tour(&path, &cs, 2).is_ok());
    }

    #[test]
    fn closing_bridges_small_gaps() {
        let mask = BlobMask::from_ascii(&[
            ".......",
            ".##.##.",
            ".##.##.",
            ".......",
        ]);
        assert_eq!(largest_component(&mask).unwrap().dropped_fragments, 1);
        let closed = close_mask(&mask, 1);
        assert_eq!(closed.component_sizes(), vec![10]);
        assert_eq!(close_mask(&mask, 0), mask);
    }

    #[test]
    fn closing_keeps_solid_blocks() {
        let mask = BlobMask::from_ascii(&["......", ".####.", ".####.", ".####.", "......"]);
        assert_eq!(close_mask(&mask, 1), mask);
        // off-lattice counts as clear, so blocks touching the edge survive
        let full = BlobMask::from_ascii(&["###", "###"]);
        assert_eq!(close_mask(&full, 1), full);
    }
}
