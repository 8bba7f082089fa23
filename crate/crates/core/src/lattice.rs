//! The diffusive chemoattractant lattice and the particle occupancy index.
//!
//! Both grids are stored row-major (`y * width + x`) with `y` growing
//! downward, matching the orientation of exported frames.

/// Concentration projected into the 3×3 window of an uncovered city, per step.
pub const PROJECTION_UNCOVERED: f64 = 1.275;
/// Concentration projected when the blob covers the city.
pub const PROJECTION_COVERED: f64 = 0.01275;
/// Damping applied to the mean-filtered value every diffusion step.
pub const DIFFUSION_DAMPING: f64 = 0.95;

/// Scalar chemoattractant concentration per cell, double-buffered.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemoField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    back: Vec<f64>,
    rows: Vec<f64>,
}

impl ChemoField {
    pub fn new(width: usize, height: usize) -> Self {
        let len = width * height;
        Self {
            width,
            height,
            values: vec![0.0; len],
            back: vec![0.0; len],
            rows: vec![0.0; len],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "field shape mismatch");
        assert!(
            values.iter().all(|v| *v >= 0.0),
            "concentrations must be nonnegative"
        );
        let len = values.len();
        Self {
            width,
            height,
            values,
            back: vec![0.0; len],
            rows: vec![0.0; len],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Reads a cell by signed coordinates; anything off the lattice reads 0.
    #[inline]
    pub fn sample(&self, x: i32, y: i32) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.values[y as usize * self.width + x as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Adds `amount` to one cell. Out-of-bounds coordinates are a caller bug.
    #[inline]
    pub fn deposit(&mut self, x: usize, y: usize, amount: f64) {
        debug_assert!(amount >= 0.0);
        assert!(x < self.width && y < self.height, "deposit out of bounds");
        self.values[y * self.width + x] += amount;
    }

    /// One damped 3×3 mean-filter step.
    ///
    /// Each new value is `0.95 * sum(3x3 of old) / 9`, with off-lattice cells
    /// contributing zero. The result is computed entirely from the previous
    /// buffer and then swapped in.
    pub fn diffuse(&mut self) {
        let (w, h) = (self.width, self.height);
        if w == 0 || h == 0 {
            return;
        }
        let src = &self.values;
        let rows = &mut self.rows;
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let out = &mut rows[y * w..(y + 1) * w];
            for x in 0..w {
                let mut s = row[x];
                if x > 0 {
                    s += row[x - 1];
                }
                if x + 1 < w {
                    s += row[x + 1];
                }
                out[x] = s;
            }
        }
        let scale = DIFFUSION_DAMPING / 9.0;
        let dst = &mut self.back;
        for y in 0..h {
            for x in 0..w {
                let mut s = rows[y * w + x];
                if y > 0 {
                    s += rows[(y - 1) * w + x];
                }
                if y + 1 < h {
                    s += rows[(y + 1) * w + x];
                }
                dst[y * w + x] = s * scale;
            }
        }
        std::mem::swap(&mut self.values, &mut self.back);
    }

    /// Adds city stimuli: a full-strength 3×3 projection for uncovered
    /// cities, a suppressed one where any particle sits in the city's 3×3
    /// window.
    pub fn project_cities(&mut self, cities: &[CityStimulus], occ: &OccupancyGrid) {
        for city in cities {
            let amount = if occ.count_window(city.x, city.y, 1) > 0 {
                PROJECTION_COVERED
            } else {
                PROJECTION_UNCOVERED
            };
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (city.x + dx, city.y + dy);
                    if self.in_bounds(x, y) {
                        self.deposit(x as usize, y as usize, amount);
                    }
                }
            }
        }
    }

    fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Min-max normalized 8-bit rendering of the field.
    pub fn to_gray(&self) -> Vec<u8> {
        let (min, max) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = max - min;
        if !(span > 0.0) {
            return vec![0; self.values.len()];
        }
        self.values
            .iter()
            .map(|&v| (255.0 * (v - min) / span).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// A city as seen by the lattice: a stimulus source with a coverage
/// indicator ("traffic light") maintained by the halting check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CityStimulus {
    pub index: usize,
    pub x: i32,
    pub y: i32,
    pub uncovered: bool,
}

impl CityStimulus {
    pub fn new(index: usize, x: i32, y: i32) -> Self {
        Self {
            index,
            x,
            y,
            uncovered: false,
        }
    }
}

/// Identifier of a particle: its index in the swarm's particle store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParticleId(pub u32);

/// Square-window occupancy counts backed by per-column sums over
/// `2 * half_width + 1` rows.
#[derive(Debug, Clone)]
pub struct WindowCounter {
    width: usize,
    height: usize,
    half_width: i32,
    colsum: Vec<u16>,
}

impl WindowCounter {
    /// Equal to [`OccupancyGrid::count_window`] with the same half-width, for
    /// in-bounds centres.
    #[inline]
    pub fn count(&self, cx: i32, cy: i32) -> usize {
        if cy < 0 || cy >= self.height as i32 {
            return 0;
        }
        let x0 = (cx - self.half_width).max(0);
        let x1 = (cx + self.half_width).min(self.width as i32 - 1);
        if x0 > x1 {
            return 0;
        }
        let row = &self.colsum[cy as usize * self.width..];
        row[x0 as usize..=x1 as usize]
            .iter()
            .map(|&c| usize::from(c))
            .sum()
    }

    pub fn add(&mut self, x: i32, y: i32) {
        self.update(x, y, true);
    }

    pub fn remove(&mut self, x: i32, y: i32) {
        self.update(x, y, false);
    }

    fn update(&mut self, x: i32, y: i32, add: bool) {
        let y0 = (y - self.half_width).max(0);
        let y1 = (y + self.half_width).min(self.height as i32 - 1);
        for yy in y0..=y1 {
            let c = &mut self.colsum[yy as usize * self.width + x as usize];
            if add {
                *c += 1;
            } else {
                *c -= 1;
            }
        }
    }
}

/// At most one particle per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<Option<ParticleId>>,
    /// 1 where `cells` is occupied; kept for fast window counts.
    occupied: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![None; width * height],
            occupied: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: i32, y: i32) -> Option<ParticleId> {
        if self.in_bounds(x, y) {
            self.cells[y as usize * self.width + x as usize]
        } else {
            None
        }
    }

    #[inline]
    pub fn is_occupied(&self, x: i32, y: i32) -> bool {
        self.get(x, y).is_some()
    }

    /// Places `id` at an empty in-bounds cell.
    #[inline]
    pub fn place(&mut self, x: i32, y: i32, id: ParticleId) {
        assert!(self.in_bounds(x, y), "place out of bounds");
        let i = y as usize * self.width + x as usize;
        assert!(self.cells[i].is_none(), "cell ({x}, {y}) already occupied");
        self.cells[i] = Some(id);
        self.occupied[i] = 1;
    }

    /// Overwrites the identifier stored at an occupied cell.
    #[inline]
    pub(crate) fn relabel(&mut self, x: i32, y: i32, id: ParticleId) {
        let cell = &mut self.cells[y as usize * self.width + x as usize];
        debug_assert!(cell.is_some());
        *cell = Some(id);
    }

    #[inline]
    pub fn clear(&mut self, x: i32, y: i32) -> Option<ParticleId> {
        if self.in_bounds(x, y) {
            let i = y as usize * self.width + x as usize;
            self.occupied[i] = 0;
            self.cells[i].take()
        } else {
            None
        }
    }

    /// Number of occupied cells in the `(2 * half_width + 1)²` window centred
    /// on `(cx, cy)`. The window clips at the lattice edge.
    pub fn count_window(&self, cx: i32, cy: i32, half_width: i32) -> usize {
        let x0 = (cx - half_width).max(0);
        let x1 = (cx + half_width).min(self.width as i32 - 1);
        let y0 = (cy - half_width).max(0);
        let y1 = (cy + half_width).min(self.height as i32 - 1);
        if x0 > x1 || y0 > y1 {
            return 0;
        }
        let mut count = 0usize;
        for y in y0..=y1 {
            let row = &self.occupied[y as usize * self.width..];
            count += row[x0 as usize..=x1 as usize]
                .iter()
                .map(|&b| usize::from(b))
                .sum::<usize>();
        }
        count
    }

    /// Snapshot of window counts that stays exact under [`WindowCounter::add`]
    /// and [`WindowCounter::remove`] as long as every grid change is mirrored.
    pub fn window_counter(&self, half_width: i32) -> WindowCounter {
        let (w, h) = (self.width, self.height);
        let mut colsum = vec![0u16; w * h];
        for y in 0..h as i32 {
            let y0 = (y - half_width).max(0) as usize;
            let y1 = (y + half_width).min(h as i32 - 1) as usize;
            let out = &mut colsum[y as usize * w..(y as usize + 1) * w];
            for yy in y0..=y1 {
                for (o, &b) in out.iter_mut().zip(&self.occupied[yy * w..(yy + 1) * w]) {
                    *o += u16::from(b);
                }
            }
        }
        WindowCounter {
            width: w,
            height: h,
            half_width,
            colsum,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Boolean snapshot, row-major.
    pub fn to_mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn city(index: usize, x: i32, y: i32) -> CityStimulus {
        CityStimulus::new(index, x, y)
    }

    #[test]
    fn uniform_field_interior_and_corner() {
        let mut f = ChemoField::from_values(20, 20, vec![10.0; 400]);
        f.diffuse();
        assert!((f.get(10, 10) - 9.5).abs() < 1e-9);
        assert!((f.get(0, 0) - 0.95 * 40.0 / 9.0).abs() < 1e-9);
        // edge (non-corner) cells see 6 in-bounds neighbours
        assert!((f.get(0, 10) - 0.95 * 60.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn zero_field_is_fixed_point() {
        let mut f = ChemoField::new(16, 12);
        f.diffuse();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_impulse_spreads_to_window() {
        let mut f = ChemoField::new(11, 11);
        f.deposit(5, 5, 9.0);
        f.diffuse();
        for y in 0..11 {
            for x in 0..11 {
                let expect = if (4..=6).contains(&x) && (4..=6).contains(&y) {
                    0.95
                } else {
                    0.0
                };
                assert!((f.get(x, y) - expect).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn deposits_accumulate() {
        let mut f = ChemoField::new(20, 20);
        f.deposit(10, 10, 5.0);
        assert_eq!(f.get(10, 10), 5.0);
        f.deposit(10, 10, 0.0);
        assert_eq!(f.get(10, 10), 5.0);
        f.deposit(10, 10, 5.0);
        assert_eq!(f.get(10, 10), 10.0);
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn deposit_out_of_bounds_panics() {
        let mut f = ChemoField::new(4, 4);
        f.deposit(4, 0, 1.0);
    }

    #[test]
    fn projection_depends_on_coverage() {
        let cities = vec![city(0, 5, 5), city(1, 14, 14)];
        let mut occ = OccupancyGrid::new(20, 20);
        for (i, (x, y)) in [(13, 13), (15, 13), (13, 15), (15, 15)].iter().enumerate() {
            occ.place(*x, *y, ParticleId(i as u32));
        }
        let mut f = ChemoField::new(20, 20);
        f.project_cities(&cities, &occ);
        for dy in -1..=1 {
            for dx in -1..=1 {
                assert_eq!(f.get((5 + dx) as usize, (5 + dy) as usize), 1.275);
                assert_eq!(f.get((14 + dx) as usize, (14 + dy) as usize), 0.01275);
            }
        }
        assert!((f.total() - 9.0 * (1.275 + 0.01275)).abs() < 1e-12);
    }

    #[test]
    fn projection_with_no_cities_is_noop() {
        let occ = OccupancyGrid::new(8, 8);
        let mut f = ChemoField::new(8, 8);
        f.project_cities(&[], &occ);
        assert_eq!(f.total(), 0.0);
    }

    #[test]
    fn window_counts() {
        let mut occ = OccupancyGrid::new(30, 30);
        assert_eq!(occ.count_window(15, 15, 4), 0);
        let mut id = 0;
        for y in 10..19 {
            for x in 10..19 {
                occ.place(x, y, ParticleId(id));
                id += 1;
            }
        }
        assert_eq!(occ.count_window(14, 14, 4), 81);
        // clipped window at the corner counts only in-bounds cells
        assert_eq!(occ.count_window(0, 0, 2), 0);
    }

    #[test]
    fn scattered_window_count() {
        // 14 particles laid out explicitly in the 5×5 window around (20, 20)
        let pts = [
            (18, 18), (19, 18), (21, 18), (22, 18),
            (18, 19), (20, 19), (22, 19),
            (19, 20), (21, 20),
            (18, 21), (20, 21), (22, 21),
            (19, 22), (22, 22),
        ];
        let mut occ = OccupancyGrid::new(40, 40);
        for (i, (x, y)) in pts.iter().enumerate() {
            occ.place(*x, *y, ParticleId(i as u32));
        }
        // decoys just outside the window
        occ.place(17, 20, ParticleId(100));
        occ.place(23, 23, ParticleId(101));
        assert_eq!(occ.count_window(20, 20, 2), 14);
    }

    #[test]
    fn gray_rendering_normalizes() {
        let f = ChemoField::from_values(2, 2, vec![0.0, 1.0, 2.0, 4.0]);
        assert_eq!(f.to_gray(), vec![0, 64, 128, 255]);
        assert_eq!(ChemoField::new(3, 3).to_gray(), vec![0; 9]);
    }

    #[test]
    fn window_counter_tracks_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut occ = OccupancyGrid::new(23, 17);
        for i in 0..150 {
            let (x, y) = (rng.gen_range(0..23), rng.gen_range(0..17));
            if !occ.is_occupied(x, y) {
                occ.place(x, y, ParticleId(i));
            }
        }
        let mut counter = occ.window_counter(4);
        for _ in 0..300 {
            let (x, y) = (rng.gen_range(0..23), rng.gen_range(0..17));
            if occ.is_occupied(x, y) {
                occ.clear(x, y);
                counter.remove(x, y);
            } else {
                occ.place(x, y, ParticleId(0));
                counter.add(x, y);
            }
            for cy in 0..17 {
                for cx in 0..23 {
                    assert_eq!(counter.count(cx, cy), occ.count_window(cx, cy, 4));
                }
            }
        }
    }
}
