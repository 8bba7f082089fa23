//! Independent oracles shared by the integration targets.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shrinking_blob::tracer::BlobMask;

/// Random 8-connected mask: grows from a seed cell by repeatedly adding a
/// random empty 8-neighbour of a random member.
pub fn connected_mask(seed: u64) -> BlobMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.gen_range(1..16usize), rng.gen_range(1..16usize));
    let target = rng.gen_range(1..=w * h);
    let mut cells = vec![false; w * h];
    let mut members = vec![(rng.gen_range(0..w), rng.gen_range(0..h))];
    cells[members[0].1 * w + members[0].0] = true;
    let mut tries = 0;
    while members.len() < target && tries < 20 * target {
        tries += 1;
        let (x, y) = members[rng.gen_range(0..members.len())];
        let nx = x as i64 + rng.gen_range(-1..=1);
        let ny = y as i64 + rng.gen_range(-1..=1);
        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
            continue;
        }
        let i = ny as usize * w + nx as usize;
        if !cells[i] {
            cells[i] = true;
            members.push((nx as usize, ny as usize));
        }
    }
    BlobMask::new(w, h, cells)
}

/// Set cells with a 4-neighbour in the background region 4-connected to the
/// outside of the mask.
pub fn flood_fill_boundary(mask: &BlobMask) -> BTreeSet<(i32, i32)> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let inside = |x: i32, y: i32| (-1..=w).contains(&x) && (-1..=h).contains(&y);
    let idx = |x: i32, y: i32| ((y + 1) * (w + 2) + x + 1) as usize;
    let mut outside = vec![false; ((w + 2) * (h + 2)) as usize];
    let mut queue = VecDeque::from([(-1, -1)]);
    outside[idx(-1, -1)] = true;
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if inside(nx, ny) && !mask.get(nx, ny) && !outside[idx(nx, ny)] {
                outside[idx(nx, ny)] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    let mut out = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| outside[idx(x + dx, y + dy)])
            {
                out.insert((x, y));
            }
        }
    }
    out
}
