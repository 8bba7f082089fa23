//! The particle population and the per-step scheduler.
//!
//! Every stochastic decision draws from one seeded ChaCha8 generator owned by
//! [`Simulation`]. The draw order is fixed:
//!
//! 1. initialization, row-major over the hull's bounding box: one uniform
//!    draw per in-hull cell, plus a heading draw for each seeded cell;
//! 2. per step, a Fisher-Yates shuffle of the particle order, then per
//!    particle a direction draw when sensing finds both flanks stronger than
//!    the front, and a heading draw when a move is blocked;
//! 3. on division steps, a shuffle of the particle snapshot, then for each
//!    dividing particle a spawn-cell draw and a heading draw;
//! 4. on deletion steps, a shuffle of the particle snapshot.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hull;
use crate::lattice::{ChemoField, CityStimulus, OccupancyGrid, ParticleId};

/// Half-width of the 9×9 neighbourhood used by the division and deletion tests.
pub const SHRINK_WINDOW_HALF_WIDTH: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    /// Degrees between the front sensor and each flank sensor.
    pub sensor_angle: f64,
    /// Degrees turned per sensory decision.
    pub rotation_angle: f64,
    /// Sensor distance in cells.
    pub sensor_offset: f64,
    pub deposit_amount: f64,
    pub step_length: f64,
    pub division_period: u64,
    pub deletion_period: u64,
    pub division_window_min: usize,
    pub division_window_max: usize,
    pub survival_max: usize,
    pub halting_half_width: i32,
    /// A city is uncovered when its halting window holds fewer particles.
    pub halting_threshold: usize,
    pub init_density: f64,
    /// Delete particles that move or spawn outside the initial hull.
    pub confine_to_hull: bool,
    /// Track sub-cell positions; the occupied cell is the floor of the
    /// continuous position. When false, positions are whole cells and
    /// offsets are rounded to the nearest cell.
    pub continuous_motion: bool,
    /// Test a move's target with the mover's own cell vacated, so a step that
    /// stays inside that cell succeeds. Only reachable with continuous motion.
    pub own_cell_free: bool,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            sensor_angle: 60.0,
            rotation_angle: 60.0,
            sensor_offset: 7.0,
            deposit_amount: 5.0,
            step_length: 1.0,
            division_period: 5,
            deletion_period: 10,
            division_window_min: 1,
            division_window_max: 10,
            survival_max: 80,
            halting_half_width: 2,
            halting_threshold: 15,
            init_density: 0.7,
            confine_to_hull: true,
            continuous_motion: true,
            own_cell_free: true,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let angle_ok = |a: f64| a > 0.0 && a <= 180.0;
        if !angle_ok(self.sensor_angle) || !angle_ok(self.rotation_angle) {
            return Err(Error::Config("sensor_angle and rotation_angle must lie in (0, 180]".into()));
        }
        if !(self.sensor_offset >= 3.0) {
            return Err(Error::Config("sensor_offset must be at least 3 cells".into()));
        }
        if !(self.init_density > 0.0 && self.init_density <= 1.0) {
            return Err(Error::Config("init_density must lie in (0, 1]".into()));
        }
        if !(self.deposit_amount >= 0.0) || !(self.step_length > 0.0) {
            return Err(Error::Config("deposit_amount must be ≥0 and step_length >0".into()));
        }
        if self.division_period == 0 || self.deletion_period == 0 {
            return Err(Error::Config("division and deletion periods must be positive".into()));
        }
        if self.halting_half_width < 0 {
            return Err(Error::Config("halting_half_width must be ≥0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: i32,
    pub y: i32,
    /// Sub-cell position, used only with continuous motion.
    pub fx: f64,
    pub fy: f64,
    /// Degrees in `[0, 360)`.
    heading: f64,
    /// Unit vector along `heading`.
    dir: (f64, f64),
    pub moved_since_division_test: bool,
}

impl Particle {
    pub fn new(x: i32, y: i32, heading: f64) -> Self {
        let mut p = Self {
            x,
            y,
            fx: f64::from(x) + 0.5,
            fy: f64::from(y) + 0.5,
            heading: 0.0,
            dir: (1.0, 0.0),
            moved_since_division_test: false,
        };
        p.set_heading(heading);
        p
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, degrees: f64) {
        self.heading = normalize_heading(degrees);
        let (s, c) = self.heading.to_radians().sin_cos();
        self.dir = (c, s);
    }

    /// Turns by a precomputed rotation; the cached direction is rotated
    /// rather than recomputed.
    fn turn(&mut self, rot: &Rotation, sign: f64) {
        let mut h = self.heading + sign * rot.degrees;
        if h < 0.0 {
            h += 360.0;
        } else if h >= 360.0 {
            h -= 360.0;
        }
        // rotations above 180 degrees never reach here; validate() caps them
        self.heading = if (0.0..360.0).contains(&h) { h } else { normalize_heading(h) };
        self.dir = rot.apply(self.dir, sign);
    }

    /// Cell reached from the particle's position by a displacement of
    /// `distance` along `(cos, sin)`.
    #[inline]
    fn offset_cell(&self, distance: f64, (cos, sin): (f64, f64), continuous: bool) -> (i32, i32) {
        if continuous {
            (
                floor_i32(self.fx + distance * cos),
                floor_i32(self.fy + distance * sin),
            )
        } else {
            (
                round_i32(f64::from(self.x) + distance * cos),
                round_i32(f64::from(self.y) + distance * sin),
            )
        }
    }
}

/// A fixed rotation, positive toward increasing heading.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    degrees: f64,
    cos: f64,
    sin: f64,
}

impl Rotation {
    pub fn new(degrees: f64) -> Self {
        let (sin, cos) = degrees.to_radians().sin_cos();
        Self { degrees, cos, sin }
    }

    #[inline]
    fn apply(&self, (c, s): (f64, f64), sign: f64) -> (f64, f64) {
        let sin = sign * self.sin;
        (c * self.cos - s * sin, s * self.cos + c * sin)
    }
}

/// Sensor and turn rotations derived from a config.
#[derive(Debug, Clone, Copy)]
pub struct Steering {
    pub sensor: Rotation,
    pub turn: Rotation,
}

impl Steering {
    pub fn new(cfg: &SwarmConfig) -> Self {
        Self {
            sensor: Rotation::new(cfg.sensor_angle),
            turn: Rotation::new(cfg.rotation_angle),
        }
    }
}

/// `v.floor() as i32` without the libm call baseline x86-64 emits.
#[inline]
fn floor_i32(v: f64) -> i32 {
    let t = v as i32;
    if f64::from(t) > v {
        t - 1
    } else {
        t
    }
}

/// Round half away from zero.
#[inline]
fn round_i32(v: f64) -> i32 {
    if v >= 0.0 {
        floor_i32(v + 0.5)
    } else {
        -floor_i32(-v + 0.5)
    }
}

pub fn normalize_heading(degrees: f64) -> f64 {
    if (0.0..360.0).contains(&degrees) {
        return degrees;
    }
    let h = degrees.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

#[inline]
fn random_heading(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.0..360.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UncoverEvent {
    pub step: u64,
    pub city: usize,
}

/// Everything that evolves during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub particles: Vec<Particle>,
    pub field: ChemoField,
    pub occupancy: OccupancyGrid,
    pub cities: Vec<CityStimulus>,
    pub halted: bool,
    pub initial_population: usize,
    /// Every covered→uncovered transition, in order.
    pub uncover_events: Vec<UncoverEvent>,
    /// Step since which each city has been continuously uncovered.
    uncovered_since: Vec<Option<u64>>,
    /// Cells particles may occupy, row-major; `None` leaves the lattice free.
    region: Option<Vec<bool>>,
}

impl SimState {
    /// An empty, unconfined lattice stimulated by `cities`.
    pub fn new(width: usize, height: usize, cities: &[(i32, i32)]) -> Self {
        Self {
            step: 0,
            particles: Vec::new(),
            field: ChemoField::new(width, height),
            occupancy: OccupancyGrid::new(width, height),
            cities: cities
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| CityStimulus::new(i, x, y))
                .collect(),
            halted: false,
            initial_population: 0,
            uncover_events: Vec::new(),
            uncovered_since: vec![None; cities.len()],
            region: None,
        }
    }

    pub fn population(&self) -> usize {
        self.particles.len()
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }

    /// Cities ordered by the step since which they have stayed uncovered;
    /// cities currently covered are omitted.
    pub fn insertion_trace(&self) -> Vec<UncoverEvent> {
        let mut trace: Vec<UncoverEvent> = self
            .uncovered_since
            .iter()
            .enumerate()
            .filter_map(|(city, since)| since.map(|step| UncoverEvent { step, city }))
            .collect();
        trace.sort_by_key(|e| (e.step, e.city));
        trace
    }

    /// Verifies the particle store and occupancy grid describe the same set.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for (i, p) in self.particles.iter().enumerate() {
            if !self.occupancy.in_bounds(p.x, p.y) {
                return Err(format!("particle {i} out of bounds at ({}, {})", p.x, p.y));
            }
            if self.occupancy.get(p.x, p.y) != Some(ParticleId(i as u32)) {
                return Err(format!("particle {i} not registered at ({}, {})", p.x, p.y));
            }
            if !(0.0..360.0).contains(&p.heading) {
                return Err(format!("particle {i} heading {} not normalized", p.heading));
            }
        }
        let occupied = self.occupancy.occupied_count();
        if occupied != self.particles.len() {
            return Err(format!(
                "{occupied} occupied cells for {} particles",
                self.particles.len()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn in_region(&self, x: i32, y: i32) -> bool {
        match &self.region {
            Some(mask) => self.occupancy.in_bounds(x, y) && mask[y as usize * self.width() + x as usize],
            None => true,
        }
    }

    /// Drops flagged particles (already cleared from the grid) and renumbers
    /// the survivors.
    fn compact(&mut self, dead: &[bool]) {
        let mut next = 0usize;
        for i in 0..self.particles.len() {
            if dead[i] {
                continue;
            }
            let p = self.particles[i];
            if next != i {
                self.occupancy.relabel(p.x, p.y, ParticleId(next as u32));
            }
            self.particles[next] = p;
            next += 1;
        }
        self.particles.truncate(next);
    }

    /// Adds a particle at an empty cell and returns its identifier.
    pub fn push_particle(&mut self, p: Particle) -> ParticleId {
        let id = ParticleId(self.particles.len() as u32);
        self.occupancy.place(p.x, p.y, id);
        self.particles.push(p);
        id
    }

    /// Removes every particle.
    pub fn clear_particles(&mut self) {
        for p in self.particles.drain(..) {
            self.occupancy.clear(p.x, p.y);
        }
    }
}

/// Seeds particles over every lattice cell inside or on `hull`.
pub fn init_blob(
    hull: &Hull,
    cities: &[(i32, i32)],
    cfg: &SwarmConfig,
    width: usize,
    height: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimState> {
    if hull.vertices().len() < 3 {
        return Err(Error::DegenerateHull);
    }
    if !(cfg.init_density > 0.0) {
        return Err(Error::EmptyInitialization);
    }
    let mut state = SimState::new(width, height, cities);
    let mut region = vec![false; width * height];
    let (x0, y0, x1, y1) = hull.bounds();
    for y in y0.max(0)..=y1.min(height as i32 - 1) {
        for x in x0.max(0)..=x1.min(width as i32 - 1) {
            if !hull.contains((x, y)) {
                continue;
            }
            region[y as usize * width + x as usize] = true;
            if rng.gen::<f64>() < cfg.init_density {
                let heading = random_heading(rng);
                state.push_particle(Particle::new(x, y, heading));
            }
        }
    }
    if state.particles.is_empty() {
        return Err(Error::EmptyInitialization);
    }
    state.initial_population = state.particles.len();
    if cfg.confine_to_hull {
        state.region = Some(region);
    }
    check_halting(&mut state, cfg);
    Ok(state)
}

/// Samples the three forward sensors and turns the particle.
pub fn sense(
    p: &mut Particle,
    field: &ChemoField,
    cfg: &SwarmConfig,
    steer: &Steering,
    rng: &mut ChaCha8Rng,
) {
    let read = |dir: (f64, f64)| {
        let (sx, sy) = p.offset_cell(cfg.sensor_offset, dir, cfg.continuous_motion);
        field.sample(sx, sy)
    };
    let front = read(p.dir);
    let left = read(steer.sensor.apply(p.dir, -1.0));
    let right = read(steer.sensor.apply(p.dir, 1.0));
    let sign = if front > left && front > right {
        0.0
    } else if front < left && front < right {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    } else if left < right {
        1.0
    } else if right < left {
        -1.0
    } else {
        0.0
    };
    if sign != 0.0 {
        p.turn(&steer.turn, sign);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveOutcome {
    Moved,
    Blocked,
    /// The particle stepped out of the permitted region and was removed from
    /// the grid; the caller drops it from the store.
    Exited,
}

impl MoveOutcome {
    pub fn moved(self) -> bool {
        self == MoveOutcome::Moved
    }
}

/// Motor stage: moves one step forward if the target cell is free.
///
/// A successful move deposits chemoattractant at the new cell. A blocked move
/// (occupied or off-lattice target) leaves the particle in place with a fresh
/// random heading. A displacement that stays inside the particle's own cell
/// succeeds when `own_cell_free` is set and is blocked otherwise. With a
/// confinement region, stepping outside it removes the particle.
pub fn attempt_move(
    id: ParticleId,
    state: &mut SimState,
    cfg: &SwarmConfig,
    rng: &mut ChaCha8Rng,
) -> MoveOutcome {
    let p = state.particles[id.0 as usize];
    let (c, s) = p.dir;
    let (tx, ty) = p.offset_cell(cfg.step_length, p.dir, cfg.continuous_motion);
    if (tx, ty) == (p.x, p.y) && cfg.own_cell_free {
        let p = &mut state.particles[id.0 as usize];
        p.fx += cfg.step_length * c;
        p.fy += cfg.step_length * s;
        p.moved_since_division_test = true;
        state.field.deposit(tx as usize, ty as usize, cfg.deposit_amount);
        return MoveOutcome::Moved;
    }
    if !state.occupancy.in_bounds(tx, ty) || state.occupancy.is_occupied(tx, ty) {
        state.particles[id.0 as usize].set_heading(random_heading(rng));
        return MoveOutcome::Blocked;
    }
    state.occupancy.clear(p.x, p.y);
    if !state.in_region(tx, ty) {
        return MoveOutcome::Exited;
    }
    state.occupancy.place(tx, ty, id);
    let p = &mut state.particles[id.0 as usize];
    p.x = tx;
    p.y = ty;
    if cfg.continuous_motion {
        p.fx += cfg.step_length * c;
        p.fy += cfg.step_length * s;
    } else {
        p.fx = f64::from(tx) + 0.5;
        p.fy = f64::from(ty) + 0.5;
    }
    p.moved_since_division_test = true;
    state.field.deposit(tx as usize, ty as usize, cfg.deposit_amount);
    MoveOutcome::Moved
}

/// Growth test: a sparsely surrounded particle that has moved since its last
/// test splits into a random free cell of its 3×3 neighbourhood.
pub fn division_test(
    p: &mut Particle,
    window_count: usize,
    occ: &OccupancyGrid,
    cfg: &SwarmConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Particle> {
    let moved = std::mem::replace(&mut p.moved_since_division_test, false);
    if !moved {
        return None;
    }
    if window_count < cfg.division_window_min || window_count > cfg.division_window_max {
        return None;
    }
    let mut free = [(0i32, 0i32); 8];
    let mut n = 0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (x, y) = (p.x + dx, p.y + dy);
            if (dx, dy) != (0, 0) && occ.in_bounds(x, y) && !occ.is_occupied(x, y) {
                free[n] = (x, y);
                n += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let (x, y) = free[rng.gen_range(0..n)];
    Some(Particle::new(x, y, random_heading(rng)))
}

/// Shrink test: a particle survives unless its 9×9 window (itself included)
/// holds more than `survival_max` particles.
pub fn deletion_test(window_count: usize, cfg: &SwarmConfig) -> bool {
    window_count <= cfg.survival_max
}

/// Updates every city's coverage indicator and returns true when all cities
/// are uncovered.
pub fn check_halting(state: &mut SimState, cfg: &SwarmConfig) -> bool {
    let mut all_uncovered = true;
    for city in &mut state.cities {
        let count = state
            .occupancy
            .count_window(city.x, city.y, cfg.halting_half_width);
        let uncovered = count < cfg.halting_threshold;
        let since = &mut state.uncovered_since[city.index];
        if uncovered && since.is_none() {
            *since = Some(state.step);
            state.uncover_events.push(UncoverEvent {
                step: state.step,
                city: city.index,
            });
        } else if !uncovered {
            *since = None;
        }
        city.uncovered = uncovered;
        all_uncovered &= uncovered;
    }
    all_uncovered
}

/// Running totals of particle events since the simulation started.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub moves: u64,
    pub blocked: u64,
    pub exits: u64,
    pub divisions: u64,
    pub deletions: u64,
}

/// A run in progress: state, parameters and the single random stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SimState,
    pub config: SwarmConfig,
    rng: ChaCha8Rng,
    steering: Steering,
    order: Vec<u32>,
    dead: Vec<bool>,
    pub counts: EventCounts,
}

impl Simulation {
    /// Seeds a blob over `hull`, stimulated by `cities`.
    pub fn new(
        hull: &Hull,
        cities: &[(i32, i32)],
        config: SwarmConfig,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = init_blob(hull, cities, &config, width, height, &mut rng)?;
        Ok(Self {
            state,
            steering: Steering::new(&config),
            config,
            rng,
            order: Vec::new(),
            dead: Vec::new(),
            counts: EventCounts::default(),
        })
    }

    /// Resumes from an explicit state.
    pub fn from_state(state: SimState, config: SwarmConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            state,
            steering: Steering::new(&config),
            config,
            rng,
            order: Vec::new(),
            dead: Vec::new(),
            counts: EventCounts::default(),
        }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One scheduler step: project stimuli, sense and move every particle in
    /// random order, diffuse, run the periodic division and deletion sweeps,
    /// then check halting.
    pub fn step(&mut self) {
        let cfg = &self.config;
        let state = &mut self.state;
        state.step += 1;

        state.field.project_cities(&state.cities, &state.occupancy);

        self.order.clear();
        self.order.extend(0..state.particles.len() as u32);
        self.order.shuffle(&mut self.rng);
        self.dead.clear();
        self.dead.resize(state.particles.len(), false);
        let mut exits = false;
        for &i in &self.order {
            sense(
                &mut state.particles[i as usize],
                &state.field,
                cfg,
                &self.steering,
                &mut self.rng,
            );
            match attempt_move(ParticleId(i), state, cfg, &mut self.rng) {
                MoveOutcome::Moved => self.counts.moves += 1,
                MoveOutcome::Blocked => self.counts.blocked += 1,
                MoveOutcome::Exited => {
                    self.counts.exits += 1;
                    self.dead[i as usize] = true;
                    exits = true;
                }
            }
        }
        if exits {
            state.compact(&self.dead);
        }

        state.field.diffuse();

        if state.step % cfg.division_period == 0 {
            self.division_sweep();
        }
        if self.state.step % self.config.deletion_period == 0 {
            self.deletion_sweep();
        }

        if check_halting(&mut self.state, &self.config) {
            self.state.halted = true;
        }
        debug_assert_eq!(self.state.check_consistency(), Ok(()));
    }

    fn division_sweep(&mut self) {
        let state = &mut self.state;
        self.order.clear();
        self.order.extend(0..state.particles.len() as u32);
        self.order.shuffle(&mut self.rng);
        let mut counter = state.occupancy.window_counter(SHRINK_WINDOW_HALF_WIDTH);
        for &i in &self.order {
            let mut p = state.particles[i as usize];
            let count = counter.count(p.x, p.y);
            let child = division_test(&mut p, count, &state.occupancy, &self.config, &mut self.rng);
            state.particles[i as usize] = p;
            if let Some(child) = child {
                if state.in_region(child.x, child.y) {
                    counter.add(child.x, child.y);
                    state.push_particle(child);
                    self.counts.divisions += 1;
                }
            }
        }
    }

    fn deletion_sweep(&mut self) {
        let state = &mut self.state;
        self.order.clear();
        self.order.extend(0..state.particles.len() as u32);
        self.order.shuffle(&mut self.rng);
        self.dead.clear();
        self.dead.resize(state.particles.len(), false);
        let mut any = false;
        let mut counter = state.occupancy.window_counter(SHRINK_WINDOW_HALF_WIDTH);
        for &i in &self.order {
            let p = &state.particles[i as usize];
            if !deletion_test(counter.count(p.x, p.y), &self.config) {
                counter.remove(p.x, p.y);
                state.occupancy.clear(p.x, p.y);
                self.dead[i as usize] = true;
                self.counts.deletions += 1;
                any = true;
            }
        }
        if any {
            state.compact(&self.dead);
        }
    }

    /// Steps until every city is uncovered. On exhaustion the error carries
    /// the step count and `self` keeps the final state for diagnosis.
    pub fn run_until_halt(&mut self, max_steps: u64) -> Result<()> {
        self.run_until_halt_with(max_steps, |_| Ok(()))
    }

    /// As [`Simulation::run_until_halt`], calling `observe` after every step.
    pub fn run_until_halt_with<F>(&mut self, max_steps: u64, mut observe: F) -> Result<()>
    where
        F: FnMut(&SimState) -> Result<()>,
    {
        let mut taken = 0;
        while !self.state.halted {
            if taken >= max_steps {
                return Err(Error::NoConvergence {
                    steps: self.state.step,
                });
            }
            self.step();
            taken += 1;
            observe(&self.state)?;
        }
        Ok(())
    }
}
