use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::capture::ScoreMap;
use crate::raster::{Mask, Raster};

use super::{SegmentationError, Threshold};

const NEIGHBORS_4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// The 4-connected component of `{score >= t}` containing `seed`.
pub fn select_component(
    score: &ScoreMap,
    seed: (i64, i64),
    t: Threshold,
) -> Result<Mask, SegmentationError> {
    let raster = score.raster();
    let (w, h) = raster.dims();
    let (sx, sy) = seed;
    if !raster.contains(sx, sy) {
        return Err(SegmentationError::SeedOutside {
            x: sx,
            y: sy,
            width: w,
            height: h,
        });
    }
    let above = |x: usize, y: usize| *raster.get(x, y) as f64 >= t.value();
    let (sx, sy) = (sx as usize, sy as usize);
    if !above(sx, sy) {
        return Err(SegmentationError::SeedBelowThreshold {
            score: *raster.get(sx, sy) as f64,
            threshold: t.value(),
        });
    }
    let mut mask = Raster::filled(w, h, false);
    let mut queue = VecDeque::from([(sx, sy)]);
    *mask.get_mut(sx, sy) = true;
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in NEIGHBORS_4 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !raster.contains(nx, ny) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !*mask.get(nx, ny) && above(nx, ny) {
                *mask.get_mut(nx, ny) = true;
                queue.push_back((nx, ny));
            }
        }
    }
    Ok(mask)
}

/// Sets every unselected pixel that is not 4-connected to the raster border.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    let mut outside = Raster::filled(w, h, false);
    let mut queue = VecDeque::new();
    let visit = |x: usize, y: usize, outside: &mut Mask, queue: &mut VecDeque<(usize, usize)>| {
        if !*mask.get(x, y) && !*outside.get(x, y) {
            *outside.get_mut(x, y) = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        visit(x, 0, &mut outside, &mut queue);
        visit(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        visit(0, y, &mut outside, &mut queue);
        visit(w - 1, y, &mut outside, &mut queue);
    }
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in NEIGHBORS_4 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if mask.contains(nx, ny) {
                visit(nx as usize, ny as usize, &mut outside, &mut queue);
            }
        }
    }
    outside.map(|&o| !o)
}

/// Run-length encoding of a mask: `[start, length]` runs of set pixels over
/// the row-major index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub width: usize,
    pub height: usize,
    pub runs: Vec<[usize; 2]>,
}

impl MaskRle {
    pub fn encode(mask: &Mask) -> Self {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for (i, &b) in mask.as_slice().iter().enumerate() {
            if !b {
                continue;
            }
            match runs.last_mut() {
                Some([start, len]) if *start + *len == i => *len += 1,
                _ => runs.push([i, 1]),
            }
        }
        Self {
            width: mask.width(),
            height: mask.height(),
            runs,
        }
    }

    pub fn decode(&self) -> Mask {
        let mut mask = Raster::filled(self.width, self.height, false);
        let data = mask.as_mut_slice();
        for &[start, len] in &self.runs {
            for v in &mut data[start..(start + len).min(self.width * self.height)] {
                *v = true;
            }
        }
        mask
    }

    pub fn pixel_count(&self) -> usize {
        self.runs.iter().map(|r| r[1]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn score_from(w: usize, h: usize, f: impl FnMut(usize, usize) -> f32) -> ScoreMap {
        ScoreMap::from_raster(Raster::from_fn(w, h, f)).unwrap()
    }

    fn t(v: f64) -> Threshold {
        Threshold::new(v).unwrap()
    }

    #[test]
    fn uniform_score_selects_everything() {
        let s = score_from(9, 7, |_, _| 0.9);
        let m = select_component(&s, (4, 2), t(0.5)).unwrap();
        assert_eq!(m.count(), 63);
    }

    #[test]
    fn seed_picks_its_own_blob() {
        // blob A: x in 1..4, blob B: x in 6..9, separated by a zero column band
        let s = score_from(10, 5, |x, _| if (1..4).contains(&x) || (6..9).contains(&x) { 0.8 } else { 0.1 });
        let m = select_component(&s, (2, 2), t(0.5)).unwrap();
        assert_eq!(m.count(), 15);
        assert!(m.set_pixels().all(|(x, _)| (1..4).contains(&x)));
    }

    #[test]
    fn diagonal_touch_is_not_connected() {
        let s = score_from(2, 2, |x, y| if x == y { 1.0 } else { 0.0 });
        assert_eq!(select_component(&s, (0, 0), t(0.5)).unwrap().count(), 1);
    }

    #[test]
    fn seed_errors() {
        let s = score_from(4, 4, |_, _| 0.3);
        assert!(matches!(
            select_component(&s, (1, 1), t(0.5)),
            Err(SegmentationError::SeedBelowThreshold { .. })
        ));
        assert!(matches!(
            select_component(&s, (4, 0), t(0.1)),
            Err(SegmentationError::SeedOutside { .. })
        ));
        assert!(select_component(&s, (-1, 0), t(0.1)).is_err());
    }

    #[test]
    fn holes_filled_but_border_background_kept() {
        // ring of ones with a hole in the middle; opening to the border at (0, 2)
        let m = Raster::from_fn(5, 5, |x, y| {
            let ring = (1..4).contains(&x) && (1..4).contains(&y) && !(x == 2 && y == 2);
            ring
        });
        let f = fill_holes(&m);
        assert!(*f.get(2, 2));
        assert_eq!(f.count(), 9);
        let open = Raster::from_fn(5, 5, |x, y| *m.get(x, y) && !(x == 1 && y == 2));
        let f = fill_holes(&open);
        assert!(!*f.get(2, 2));
    }

    #[test]
    fn rle_round_trip() {
        let m = Raster::from_fn(7, 3, |x, y| (x + y) % 3 != 0);
        let rle = MaskRle::encode(&m);
        assert_eq!(rle.decode(), m);
        assert_eq!(rle.pixel_count(), m.count());
    }

    fn smooth_random_score(seed: u64, w: usize, h: usize) -> ScoreMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.0..w as f64),
                    rng.random_range(0.0..h as f64),
                    rng.random_range(2.0..8.0),
                    rng.random_range(0.3..1.0),
                )
            })
            .collect();
        score_from(w, h, |x, y| {
            let v: f64 = bumps
                .iter()
                .map(|&(bx, by, r, a)| {
                    let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                    a * (-d2 / (2.0 * r * r)).exp()
                })
                .sum();
            v.min(1.0) as f32
        })
    }

    fn is_4_connected(m: &Mask) -> bool {
        let Some(start) = m.set_pixels().next() else {
            return true;
        };
        let mut seen = Raster::filled(m.width(), m.height(), false);
        let mut stack = vec![start];
        *seen.get_mut(start.0, start.1) = true;
        let mut n = 1;
        while let Some((x, y)) = stack.pop() {
            for (dx, dy) in NEIGHBORS_4 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if m.get_checked(nx, ny) == Some(&true) && !*seen.get(nx as usize, ny as usize) {
                    *seen.get_mut(nx as usize, ny as usize) = true;
                    n += 1;
                    stack.push((nx as usize, ny as usize));
                }
            }
        }
        n == m.count()
    }

    proptest! {
        #[test]
        fn component_contains_seed_and_is_connected(seed in any::<u64>(), t1 in 0.05f64..0.9) {
            let s = smooth_random_score(seed, 24, 20);
            let (sx, sy) = (seed as usize % 24, (seed >> 8) as usize % 20);
            if let Ok(m) = select_component(&s, (sx as i64, sy as i64), t(t1)) {
                prop_assert!(*m.get(sx, sy));
                prop_assert!(is_4_connected(&m));
            }
        }

        #[test]
        fn threshold_nesting(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = smooth_random_score(seed, 24, 20);
            let (lo, hi) = (a.min(b), a.max(b));
            let (sx, sy) = (seed as i64 % 24, (seed >> 8) as i64 % 20);
            if let (Ok(m_lo), Ok(m_hi)) = (
                select_component(&s, (sx, sy), t(lo)),
                select_component(&s, (sx, sy), t(hi)),
            ) {
                prop_assert!(m_hi.is_subset_of(&m_lo));
            }
        }
    }
}
