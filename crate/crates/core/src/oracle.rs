//! Reference tours: exact Held-Karp, brute force for tiny inputs, and
//! restarted 2-opt for anything larger.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{City, Tour};

pub const HELD_KARP_MAX: usize = 24;
pub const BRUTE_FORCE_MAX: usize = 9;

/// Symmetric Euclidean distances, row-major.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(cities: &[City]) -> Self {
        let n = cities.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = cities[i].distance(&cities[j]);
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Closed-loop length, summed in tour order from `order[0]`.
    pub fn tour_length(&self, order: &[usize]) -> f64 {
        let n = order.len();
        (0..n).map(|i| self.get(order[i], order[(i + 1) % n])).sum()
    }
}

/// Exact optimum by dynamic programming over subsets, city 0 fixed.
///
/// Memory is `2^(n-1) · (n-1)` doubles, about 1.5 GiB at the upper bound.
pub fn held_karp(cities: &[City]) -> Result<Tour> {
    let n = cities.len();
    if !(3..=HELD_KARP_MAX).contains(&n) {
        return Err(Error::UseTwoOpt { n });
    }
    let dm = DistanceMatrix::new(cities);
    // city k (1..n) is bit k-1; dp[mask * m + k-1] = shortest path from 0
    // through exactly `mask`, ending at k
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * m];
    for k in 0..m {
        dp[(1 << k) * m + k] = dm.get(0, k + 1);
    }
    for mask in 1..=full {
        for last in 0..m {
            if mask & (1 << last) == 0 {
                continue;
            }
            let here = dp[mask * m + last];
            if !here.is_finite() {
                continue;
            }
            let mut rest = full & !mask;
            while rest != 0 {
                let next = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let slot = &mut dp[(mask | (1 << next)) * m + next];
                let cand = here + dm.get(last + 1, next + 1);
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }

    let closing = |k: usize| dp[full * m + k] + dm.get(k + 1, 0);
    let mut last = (0..m)
        .min_by(|&a, &b| closing(a).total_cmp(&closing(b)))
        .expect("n ≥ 3");

    // walk back: the predecessor is the lowest index whose value plus the
    // connecting edge reproduces the stored cost exactly
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        order.push(last + 1);
        let prev_mask = mask & !(1 << last);
        if prev_mask == 0 {
            break;
        }
        let target = dp[mask * m + last];
        let prev = (0..m)
            .filter(|&p| prev_mask & (1 << p) != 0)
            .find(|&p| dp[prev_mask * m + p] + dm.get(p + 1, last + 1) == target)
            .expect("predecessor reproduces its stored cost");
        mask = prev_mask;
        last = prev;
    }
    order.push(0);
    order.reverse();
    Tour::new(order, cities)
}

/// Exhaustive search with city 0 fixed; ties keep the lexicographically
/// first order.
pub fn brute_force(cities: &[City]) -> Result<Tour> {
    let n = cities.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooManyForBruteForce { n });
    }
    if n < 3 {
        return Tour::new((0..n).collect(), cities);
    }
    let dm = DistanceMatrix::new(cities);
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    permute(&mut rest, 0, &mut |perm| {
        let mut order = Vec::with_capacity(n);
        order.push(0);
        order.extend_from_slice(perm);
        let len = dm.tour_length(&order);
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, order));
        }
    });
    let (_, order) = best.expect("at least one permutation");
    Tour::new(order, cities)
}

/// Visits permutations of `items[k..]` in lexicographic order, given sorted
/// input.
fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items[k..=i].rotate_right(1);
        permute(items, k + 1, visit);
        items[k..=i].rotate_left(1);
    }
}

/// Greedy tour from `start`, ties to the lowest index.
pub fn nearest_neighbour(cities: &[City], start: usize) -> Result<Tour> {
    let n = cities.len();
    if n == 0 {
        return Tour::new(Vec::new(), cities);
    }
    let dm = DistanceMatrix::new(cities);
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut here = start;
    visited[here] = true;
    order.push(here);
    while order.len() < n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| dm.get(here, a).total_cmp(&dm.get(here, b)))
            .expect("unvisited city remains");
        visited[next] = true;
        order.push(next);
        here = next;
    }
    Tour::new(order, cities)
}

/// First-improvement 2-opt, in place. Returns the number of applied moves.
pub fn two_opt_local(order: &mut [usize], dm: &DistanceMatrix) -> usize {
    let n = order.len();
    let mut moves = 0;
    'restart: loop {
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, d) = (order[j], order[(j + 1) % n]);
                let delta = dm.get(a, c) + dm.get(b, d) - dm.get(a, b) - dm.get(c, d);
                if delta < -1e-10 {
                    order[i + 1..=j].reverse();
                    moves += 1;
                    continue 'restart;
                }
            }
        }
        return moves;
    }
}

/// Best of `restarts` 2-opt descents. The first descent starts from the
/// nearest-neighbour tour from city 0, so the result is never worse than it;
/// the rest start from random permutations.
pub fn two_opt(cities: &[City], restarts: usize, seed: u64) -> Result<Tour> {
    let n = cities.len();
    if restarts == 0 {
        return Err(Error::NoRestarts);
    }
    if n < 4 {
        return Err(Error::TooFewForTwoOpt { n });
    }
    let dm = DistanceMatrix::new(cities);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let mut order = if r == 0 {
            nearest_neighbour(cities, 0)?.order
        } else {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            o
        };
        two_opt_local(&mut order, &dm);
        let len = dm.tour_length(&order);
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, order));
        }
    }
    let (_, order) = best.expect("restarts ≥ 1");
    Tour::new(order, cities)
}

/// Optimal tour for small inputs, best-effort 2-opt beyond the exact range.
pub fn reference_tour(cities: &[City], restarts: usize, seed: u64) -> Result<(Tour, bool)> {
    if cities.len() <= HELD_KARP_MAX {
        Ok((held_karp(cities)?, true))
    } else {
        Ok((two_opt(cities, restarts, seed)?, false))
    }
}

/// Number of pairs of non-adjacent tour edges that properly cross.
pub fn crossing_count(order: &[usize], cities: &[City]) -> usize {
    let n = order.len();
    if n < 4 {
        return 0;
    }
    let p = |i: usize| {
        let c = &cities[order[i % n]];
        (c.x as i64, c.y as i64)
    };
    let mut count = 0;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(p(i), p(i + 1), p(j), p(j + 1)) {
                count += 1;
            }
        }
    }
    count
}

fn orient(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i64 {
    ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).signum()
}

/// Proper crossing: interiors intersect at a single point.
pub fn segments_cross(a: (i64, i64), b: (i64, i64), c: (i64, i64), d: (i64, i64)) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0 && o3 * o4 < 0
}
