mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shrinking_blob::geometry::{canonical_order, convex_hull, point_in_hull, tour_length, City};
use shrinking_blob::lattice::{ChemoField, OccupancyGrid, ParticleId};
use shrinking_blob::oracle::{brute_force, held_karp, two_opt};
use shrinking_blob::tracer::{close_mask, trace_boundary};

use common::{connected_mask, flood_fill_boundary};

#[test]
fn tracing_matches_flood_fill_oracle() {
    for seed in 0..1000 {
        let mask = connected_mask(seed);
        let path = trace_boundary(&mask).unwrap();
        let traced: BTreeSet<(i32, i32)> = path.cells.iter().copied().collect();
        assert_eq!(traced, flood_fill_boundary(&mask), "mask seed {seed}");
        for pair in path.cells.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            assert!((a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1, "path jumps at seed {seed}");
        }
    }
}

fn cities_strategy(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<City>> {
    prop::collection::btree_set((0i32..60, 0i32..60), n).prop_map(|pts| {
        pts.into_iter()
            .enumerate()
            .map(|(i, (x, y))| City::new(format!("c{i}"), x, y))
            .collect()
    })
}

#[test]
fn held_karp_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let n = 3 + case % 7;
        let mut points = BTreeSet::new();
        while points.len() < n {
            points.insert((rng.gen_range(0..100), rng.gen_range(0..100)));
        }
        let cities: Vec<City> = points
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| City::new(format!("c{i}"), x, y))
            .collect();
        let hk = held_karp(&cities).unwrap();
        let bf = brute_force(&cities).unwrap();
        assert!((hk.length - bf.length).abs() <= 1e-9 * bf.length, "case {case}: {} vs {}", hk.length, bf.length);
        assert_eq!(hk.canonical(), bf.canonical(), "case {case}");
    }
}

fn field_strategy() -> impl Strategy<Value = ChemoField> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..100.0f64], w * h)
            .prop_map(move |v| ChemoField::from_values(w, h, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn diffusion_mass_bound(mut field in field_strategy()) {
        let before = field.total();
        field.diffuse();
        prop_assert!(field.total() <= 0.95 * before * (1.0 + 1e-12) + 1e-12);
        prop_assert!(field.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn diffusion_conserves_damped_mass_away_from_edges(
        (w, h, cells) in (3usize..12, 3usize..12).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(0.0..50.0f64, (w - 2) * (h - 2)))
        })
    ) {
        let mut values = vec![0.0; w * h];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                values[y * w + x] = cells[(y - 1) * (w - 2) + x - 1];
            }
        }
        let mut field = ChemoField::from_values(w, h, values);
        let before = field.total();
        field.diffuse();
        prop_assert!((field.total() - 0.95 * before).abs() <= 1e-9 * before.max(1e-300));
    }

    #[test]
    fn window_count_matches_enumeration(
        (w, h, bits, cx, cy, r) in (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(any::<bool>(), w * h), -2i32..22, -2i32..22, 0i32..5)
        })
    ) {
        let mut occ = OccupancyGrid::new(w, h);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                occ.place((i % w) as i32, (i / w) as i32, ParticleId(i as u32));
            }
        }
        let mut expected = 0;
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && bits[y as usize * w + x as usize] {
                    expected += 1;
                }
            }
        }
        prop_assert_eq!(occ.count_window(cx, cy, r), expected);
    }
}

proptest! {
    #[test]
    fn hull_contains_every_point(cities in cities_strategy(3..=40)) {
        let points: Vec<(i32, i32)> = cities.iter().map(|c| (c.x, c.y)).collect();
        if let Ok(hull) = convex_hull(&points) {
            prop_assert!(points.iter().all(|&p| point_in_hull(p, &hull)));
        }
    }

    #[test]
    fn canonical_order_ignores_rotation_and_direction(n in 3usize..12, shift in 0usize..12, rev in any::<bool>()) {
        let order: Vec<usize> = (0..n).collect();
        let mut other: Vec<usize> = order.iter().cycle().skip(shift % n).take(n).copied().collect();
        if rev {
            other.reverse();
        }
        prop_assert_eq!(canonical_order(&other), canonical_order(&order));
    }

    #[test]
    fn two_opt_never_beats_the_optimum(cities in cities_strategy(4..=9), seed in any::<u64>()) {
        let opt = held_karp(&cities).unwrap();
        let heuristic = two_opt(&cities, 3, seed).unwrap();
        prop_assert!(heuristic.length >= opt.length * (1.0 - 1e-9));
        prop_assert!((tour_length(&heuristic.order, &cities).unwrap() - heuristic.length).abs() < 1e-9);
    }

    #[test]
    fn closing_contains_the_mask(seed in any::<u64>(), r in 0i32..3) {
        let mask = connected_mask(seed);
        let closed = close_mask(&mask, r);
        for y in 0..mask.height() as i32 {
            for x in 0..mask.width() as i32 {
                prop_assert!(!mask.get(x, y) || closed.get(x, y));
            }
        }
    }
}
