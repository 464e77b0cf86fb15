//! PatchMatch propagation and random search over a cached distance map.

use rand::Rng;

use super::nnf::{pixel_rng, NearestNeighborField};
use super::problem::LevelProblem;

/// Current patch distance of every target pixel under `nnf`.
pub(crate) fn distance_map(problem: &LevelProblem, nnf: &NearestNeighborField) -> Vec<f64> {
    let w = nnf.width();
    crate::par::map_indices(w * nnf.height(), |i| {
        let (sx, sy) = nnf.entries()[i];
        problem.full_distance((sx as usize, sy as usize), (i % w, i / w))
    })
}

/// One PatchMatch pass: a sequential propagation sweep (forward on even
/// `pass_index`, backward on odd) then an independent random search per
/// pixel. Entries change only on strict improvement.
pub(crate) fn search_pass(
    problem: &LevelProblem,
    nnf: &mut NearestNeighborField,
    dist: &mut [f64],
    pass_index: usize,
    key: &[u8; 32],
    radius_decay: f32,
) {
    propagate(problem, nnf, dist, pass_index % 2 == 1);
    random_search(problem, nnf, dist, key, radius_decay);
}

#[inline]
fn try_candidate(
    problem: &LevelProblem,
    q: (usize, usize),
    cand: (u32, u32),
    best: &mut (u32, u32),
    best_dist: &mut f64,
) {
    if cand == *best {
        return;
    }
    let d = problem.distance((cand.0 as usize, cand.1 as usize), q, *best_dist);
    if d < *best_dist {
        *best = cand;
        *best_dist = d;
    }
}

pub(crate) fn propagate(
    problem: &LevelProblem,
    nnf: &mut NearestNeighborField,
    dist: &mut [f64],
    reverse: bool,
) {
    let (w, h) = nnf.target_dims();
    let (sw, sh) = nnf.source_dims();
    let (max_x, max_y) = (sw as u32 - 1, sh as u32 - 1);
    let entries = nnf.entries_mut();

    let visit = |x: usize, y: usize, entries: &mut [(u32, u32)], dist: &mut [f64]| {
        let i = y * w + x;
        let mut best = entries[i];
        let mut best_dist = dist[i];
        if reverse {
            if x + 1 < w {
                let (sx, sy) = entries[i + 1];
                try_candidate(problem, (x, y), (sx.saturating_sub(1), sy), &mut best, &mut best_dist);
            }
            if y + 1 < h {
                let (sx, sy) = entries[i + w];
                try_candidate(problem, (x, y), (sx, sy.saturating_sub(1)), &mut best, &mut best_dist);
            }
        } else {
            if x > 0 {
                let (sx, sy) = entries[i - 1];
                try_candidate(problem, (x, y), ((sx + 1).min(max_x), sy), &mut best, &mut best_dist);
            }
            if y > 0 {
                let (sx, sy) = entries[i - w];
                try_candidate(problem, (x, y), (sx, (sy + 1).min(max_y)), &mut best, &mut best_dist);
            }
        }
        entries[i] = best;
        dist[i] = best_dist;
    };

    if reverse {
        for y in (0..h).rev() {
            for x in (0..w).rev() {
                visit(x, y, entries, dist);
            }
        }
    } else {
        for y in 0..h {
            for x in 0..w {
                visit(x, y, entries, dist);
            }
        }
    }
}

/// Random search around each pixel's current match with a window that
/// starts at the full source extent and shrinks by `radius_decay` until it
/// drops below one pixel. Pixels are independent, so the result does not
/// depend on how the work is split across threads.
pub(crate) fn random_search(
    problem: &LevelProblem,
    nnf: &mut NearestNeighborField,
    dist: &mut [f64],
    key: &[u8; 32],
    radius_decay: f32,
) {
    let w = nnf.width();
    let (sw, sh) = nnf.source_dims();
    let start = sw.max(sh) as f64;
    let decay = radius_decay as f64;
    let entries = nnf.entries();
    let updated = crate::par::map_indices(entries.len(), |i| {
        let q = (i % w, i / w);
        let mut rng = pixel_rng(key, i);
        let mut best = entries[i];
        let mut best_dist = dist[i];
        let mut radius = start;
        while radius >= 1.0 {
            let r = radius as i64;
            let ox = rng.random_range(-r..=r);
            let oy = rng.random_range(-r..=r);
            let cx = (best.0 as i64 + ox).clamp(0, sw as i64 - 1) as u32;
            let cy = (best.1 as i64 + oy).clamp(0, sh as i64 - 1) as u32;
            try_candidate(problem, q, (cx, cy), &mut best, &mut best_dist);
            radius *= decay;
        }
        (best, best_dist)
    });
    let entries = nnf.entries_mut();
    for (i, (e, d)) in updated.into_iter().enumerate() {
        entries[i] = e;
        dist[i] = d;
    }
}
