//! City datasets, convex hulls and tour lengths.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rejection-sampling budget for [`generate_dataset`].
pub const GENERATION_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct City {
    pub label: String,
    pub x: i32,
    pub y: i32,
}

impl City {
    pub fn new(label: impl Into<String>, x: i32, y: i32) -> Self {
        Self {
            label: label.into(),
            x,
            y,
        }
    }

    pub fn distance(&self, other: &City) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }
}

/// Circular region cities are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub center: (i32, i32),
    pub radius: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            center: (100, 100),
            radius: 90.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, x: i32, y: i32) -> bool {
        let dx = f64::from(x - self.center.0);
        let dy = f64::from(y - self.center.1);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityDataset {
    pub cities: Vec<City>,
    pub arena: Arena,
    pub min_separation: f64,
}

impl CityDataset {
    /// Wraps an explicit city list. The arena is taken as the smallest
    /// default-centred circle holding every city.
    pub fn from_cities(cities: Vec<City>) -> Self {
        let center = Arena::default().center;
        let radius = cities
            .iter()
            .map(|c| f64::from(c.x - center.0).hypot(f64::from(c.y - center.1)))
            .fold(0.0, f64::max);
        let min_separation = min_pairwise_distance(&cities);
        Self {
            cities,
            arena: Arena { center, radius },
            min_separation,
        }
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn points(&self) -> Vec<(i32, i32)> {
        self.cities.iter().map(|c| (c.x, c.y)).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.cities.iter().map(|c| c.label.as_str()).collect()
    }

    /// Plain text: a count line, then one `label x y` line per city.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.cities.len());
        for c in &self.cities {
            writeln!(out, "{} {} {}", c.label, c.x, c.y).unwrap();
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| err("missing city count".into()))?
            .parse()
            .map_err(|e| err(format!("bad city count: {e}")))?;
        let mut cities = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("line {}: expected `label x y`", i + 2)));
            }
            let coord = |s: &str| {
                s.parse::<i32>()
                    .map_err(|e| err(format!("line {}: {e}", i + 2)))
            };
            cities.push(City::new(fields[0], coord(fields[1])?, coord(fields[2])?));
        }
        if cities.len() != n {
            return Err(err(format!("expected {n} cities, found {}", cities.len())));
        }
        Ok(Self::from_cities(cities))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn min_pairwise_distance(cities: &[City]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in cities.iter().enumerate() {
        for b in &cities[i + 1..] {
            best = best.min(a.distance(b));
        }
    }
    best
}

/// Spreadsheet-style labels: A..Z, then AA, AB, ...
pub fn city_label(mut index: usize) -> String {
    let mut label = Vec::new();
    loop {
        label.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    label.reverse();
    String::from_utf8(label).unwrap()
}

/// Draws `n` integer cities uniformly from the arena disc, rejecting any
/// candidate closer than `min_separation` to an accepted city.
pub fn generate_dataset(n: usize, arena: Arena, min_separation: f64, seed: u64) -> Result<CityDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = arena.radius.floor() as i32;
    let mut cities: Vec<City> = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while cities.len() < n {
        if attempts >= GENERATION_ATTEMPTS {
            return Err(Error::InfeasiblePacking {
                n,
                min_separation,
                attempts,
            });
        }
        attempts += 1;
        let x = arena.center.0 + rng.gen_range(-r..=r);
        let y = arena.center.1 + rng.gen_range(-r..=r);
        if !arena.contains(x, y) {
            continue;
        }
        let candidate = City::new(city_label(cities.len()), x, y);
        if cities.iter().all(|c| c.distance(&candidate) >= min_separation) {
            cities.push(candidate);
        }
    }
    Ok(CityDataset {
        cities,
        arena,
        min_separation,
    })
}

#[inline]
fn cross(o: (i32, i32), a: (i32, i32), b: (i32, i32)) -> i64 {
    let (ox, oy) = (i64::from(o.0), i64::from(o.1));
    (i64::from(a.0) - ox) * (i64::from(b.1) - oy) - (i64::from(a.1) - oy) * (i64::from(b.0) - ox)
}

/// Convex polygon with counter-clockwise vertices (positive orientation in
/// the `x`-right, `y`-up convention).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hull {
    vertices: Vec<(i32, i32)>,
}

impl Hull {
    pub fn vertices(&self) -> &[(i32, i32)] {
        &self.vertices
    }

    /// Builds a hull from vertices already in counter-clockwise order.
    pub fn from_ccw(vertices: Vec<(i32, i32)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateHull);
        }
        let n = vertices.len();
        for i in 0..n {
            if cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) <= 0 {
                return Err(Error::DegenerateHull);
            }
        }
        Ok(Self { vertices })
    }

    /// True for points inside the polygon or on its boundary.
    pub fn contains(&self, p: (i32, i32)) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0)
    }

    /// Axis-aligned bounds `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        self.vertices.iter().fold(
            (i32::MAX, i32::MAX, i32::MIN, i32::MIN),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                f64::from(a.0 - b.0).hypot(f64::from(a.1 - b.1))
            })
            .sum()
    }
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
pub fn convex_hull(points: &[(i32, i32)]) -> Result<Hull> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let mut hull: Vec<(i32, i32)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    Ok(Hull { vertices: hull })
}

pub fn point_in_hull(p: (i32, i32), hull: &Hull) -> bool {
    hull.contains(p)
}

/// A closed tour over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    pub order: Vec<usize>,
    pub length: f64,
}

impl Tour {
    pub fn new(order: Vec<usize>, cities: &[City]) -> Result<Self> {
        let length = tour_length(&order, cities)?;
        Ok(Self { order, length })
    }

    /// Rotates to start at city 0 and orients so the second city has the
    /// lower index of city 0's two neighbours.
    pub fn canonical(&self) -> Vec<usize> {
        canonical_order(&self.order)
    }

    pub fn labels<'a>(&self, cities: &'a [City]) -> Vec<&'a str> {
        self.order.iter().map(|&i| cities[i].label.as_str()).collect()
    }
}

pub fn canonical_order(order: &[usize]) -> Vec<usize> {
    let n = order.len();
    if n < 3 {
        return order.to_vec();
    }
    let start = order.iter().position(|&c| c == 0).unwrap_or(0);
    let forward: Vec<usize> = (0..n).map(|k| order[(start + k) % n]).collect();
    if forward[1] <= forward[n - 1] {
        forward
    } else {
        std::iter::once(forward[0])
            .chain(forward[1..].iter().rev().copied())
            .collect()
    }
}

pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &c in order {
        if c >= n || seen[c] {
            return false;
        }
        seen[c] = true;
    }
    true
}

/// Closed-loop Euclidean length of `order`.
pub fn tour_length(order: &[usize], cities: &[City]) -> Result<f64> {
    if !is_permutation(order, cities.len()) {
        return Err(Error::NotAPermutation { n: cities.len() });
    }
    let n = order.len();
    Ok((0..n)
        .map(|i| cities[order[i]].distance(&cities[order[(i + 1) % n]]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_hull_edges(pts: &[(i32, i32)]) -> Vec<((i32, i32), (i32, i32))> {
        // directed edge a->b is on the CCW hull iff every other point is
        // strictly left of it or lies on the closed segment between a and b
        let mut edges = Vec::new();
        for &a in pts {
            for &b in pts {
                if a == b {
                    continue;
                }
                let ok = pts.iter().all(|&p| {
                    let c = cross(a, b, p);
                    c > 0
                        || (c == 0
                            && p.0 >= a.0.min(b.0)
                            && p.0 <= a.0.max(b.0)
                            && p.1 >= a.1.min(b.1)
                            && p.1 <= a.1.max(b.1))
                });
                if ok {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    #[test]
    fn hull_drops_interior_point() {
        let hull = convex_hull(&[(0, 0), (10, 0), (10, 10), (0, 10), (5, 5)]).unwrap();
        let mut v = hull.vertices().to_vec();
        v.sort();
        assert_eq!(v, vec![(0, 0), (0, 10), (10, 0), (10, 10)]);
    }

    #[test]
    fn hull_of_triangle() {
        let hull = convex_hull(&[(0, 0), (7, 1), (2, 9)]).unwrap();
        assert_eq!(hull.vertices().len(), 3);
    }

    #[test]
    fn hull_rejects_collinear() {
        assert!(matches!(
            convex_hull(&[(0, 0), (1, 1), (2, 2), (5, 5)]),
            Err(Error::DegenerateHull)
        ));
        assert!(convex_hull(&[(0, 0), (1, 1)]).is_err());
    }

    #[test]
    fn hull_excludes_collinear_edge_points() {
        let hull = convex_hull(&[(0, 0), (5, 0), (10, 0), (10, 10), (0, 10)]).unwrap();
        assert_eq!(hull.vertices().len(), 4);
    }

    #[test]
    fn hull_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<(i32, i32)> = (0..50)
                .map(|_| (rng.gen_range(0..200), rng.gen_range(0..200)))
                .collect();
            let mut pts = pts;
            pts.sort();
            pts.dedup();
            let hull = convex_hull(&pts).unwrap();
            let v = hull.vertices();
            let mut got: Vec<_> = (0..v.len()).map(|i| (v[i], v[(i + 1) % v.len()])).collect();
            let mut want = brute_hull_edges(&pts);
            // brute force keeps sub-edges through collinear points; retain
            // only maximal edges, whose endpoints are both hull corners
            want.retain(|(a, b)| v.contains(a) && v.contains(b));
            got.sort();
            want.sort();
            assert_eq!(got, want);
            assert!(pts.iter().all(|&p| hull.contains(p)));
        }
    }

    #[test]
    fn point_in_hull_cases() {
        let hull = convex_hull(&[(0, 0), (100, 0), (100, 100), (0, 100)]).unwrap();
        assert!(point_in_hull((50, 50), &hull));
        assert!(point_in_hull((100, 0), &hull));
        assert!(point_in_hull((100, 50), &hull));
        assert!(!point_in_hull((1100, 1100), &hull));
        assert!(!point_in_hull((101, 50), &hull));
    }

    #[test]
    fn square_tour_length() {
        let cities = vec![
            City::new("A", 0, 0),
            City::new("B", 100, 0),
            City::new("C", 100, 100),
            City::new("D", 0, 100),
        ];
        assert_eq!(tour_length(&[0, 1, 2, 3], &cities).unwrap(), 400.0);
        assert_eq!(tour_length(&[3, 2, 1, 0], &cities).unwrap(), 400.0);
        assert!(matches!(
            tour_length(&[0, 1, 1, 3], &cities),
            Err(Error::NotAPermutation { .. })
        ));
        assert!(tour_length(&[0, 1, 2], &cities).is_err());
    }

    #[test]
    fn two_city_loop() {
        let cities = vec![City::new("A", 0, 0), City::new("B", 3, 4)];
        assert_eq!(tour_length(&[0, 1], &cities).unwrap(), 10.0);
    }

    #[test]
    fn labels() {
        assert_eq!(city_label(0), "A");
        assert_eq!(city_label(25), "Z");
        assert_eq!(city_label(26), "AA");
        assert_eq!(city_label(27), "AB");
        assert_eq!(city_label(52), "BA");
    }

    #[test]
    fn dataset_respects_separation() {
        let ds = generate_dataset(20, Arena::default(), 25.0, 3).unwrap();
        assert_eq!(ds.len(), 20);
        for (i, a) in ds.cities.iter().enumerate() {
            assert!(ds.arena.contains(a.x, a.y));
            for b in &ds.cities[i + 1..] {
                assert!(a.distance(b) >= 25.0);
            }
        }
        assert_eq!(ds, generate_dataset(20, Arena::default(), 25.0, 3).unwrap());
        assert_eq!(ds.cities[0].label, "A");
    }

    #[test]
    fn tiny_dataset_without_separation() {
        let ds = generate_dataset(3, Arena::default(), 0.0, 11).unwrap();
        assert_eq!(ds.len(), 3);
    }

    #[test]
    fn infeasible_packing() {
        let arena = Arena {
            center: (100, 100),
            radius: 10.0,
        };
        assert!(matches!(
            generate_dataset(100, arena, 25.0, 1),
            Err(Error::InfeasiblePacking { .. })
        ));
    }

    #[test]
    fn dataset_text_round_trip() {
        let ds = generate_dataset(8, Arena::default(), 25.0, 5).unwrap();
        let back = CityDataset::parse(&ds.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back.cities, ds.cities);
    }

    #[test]
    fn canonical_orientation() {
        assert_eq!(canonical_order(&[2, 0, 3, 1]), vec![0, 2, 1, 3]);
        assert_eq!(canonical_order(&[2, 1, 0, 3]), vec![0, 1, 2, 3]);
    }
}
