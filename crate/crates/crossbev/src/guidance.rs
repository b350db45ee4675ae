//! Satellite footprint guidance.
//!
//! A binary building-footprint mask aligned to the satellite tile is split
//! into a 3x3 block grid. Each block's building-pixel ratio rho yields an
//! offset-strength coefficient alpha: 0 when rho <= 0.1, else 5 + t * rho.
//!
//! Ground-plane coordinates are camera-relative (east, north) in meters; the
//! tile is north-up, so pixel = center + (east / gsd, -north / gsd) with the
//! row axis pointing south.

use crate::error::{Error, Result};

pub const DEFAULT_SLOPE_T: f64 = 20.0;

/// Ratio threshold below which a block contributes no offset.
pub const RHO_THRESHOLD: f64 = 0.1;

/// Binary building-footprint raster aligned to a satellite tile.
#[derive(Debug, Clone)]
pub struct FootprintMask {
    pub height: usize,
    pub width: usize,
    mask: Vec<u8>,
    /// Meters per pixel.
    pub gsd: f64,
    /// Camera position within the tile, (row, col) in pixel coordinates.
    pub center: (f64, f64),
}

impl FootprintMask {
    pub fn new(
        height: usize,
        width: usize,
        mask: Vec<u8>,
        gsd: f64,
        center: (f64, f64),
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("footprint mask must be nonempty".into()));
        }
        if mask.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} pixels, expected {}",
                mask.len(),
                height * width
            )));
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::InvalidValue("mask values must be 0 or 1".into()));
        }
        if !(gsd > 0.0) {
            return Err(Error::InvalidValue(format!("gsd must be positive, got {gsd}")));
        }
        if center.0 < 0.0 || center.0 >= height as f64 || center.1 < 0.0 || center.1 >= width as f64
        {
            return Err(Error::InvalidValue(format!(
                "center {center:?} outside {height}x{width} raster"
            )));
        }
        Ok(Self {
            height,
            width,
            mask,
            gsd,
            center,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.mask[row * self.width + col]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.mask
    }

    /// Ground-plane (east, north) to fractional pixel (row, col).
    pub fn ground_to_pixel(&self, east: f64, north: f64) -> (f64, f64) {
        (self.center.0 - north / self.gsd, self.center.1 + east / self.gsd)
    }

    /// True iff (east, north) snaps to an in-bounds pixel with mask value 1.
    /// Snapping rounds half away from zero; out of bounds is false.
    pub fn contains(&self, east: f64, north: f64) -> bool {
        let (rf, cf) = self.ground_to_pixel(east, north);
        let r = rf.round();
        let c = cf.round();
        if r < 0.0 || c < 0.0 || r >= self.height as f64 || c >= self.width as f64 {
            return false;
        }
        self.get(r as usize, c as usize) == 1
    }
}

/// Half-open pixel rectangle of one 3x3 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockBounds {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl BlockBounds {
    pub fn pixel_count(&self) -> usize {
        (self.row_end - self.row_start) * (self.col_end - self.col_start)
    }
}

/// 3x3 block ratios and their offset coefficients over one tile.
#[derive(Debug, Clone)]
pub struct AlphaGrid {
    pub rho: [[f64; 3]; 3],
    pub alpha: [[f64; 3]; 3],
    pub t: f64,
    pub block_bounds: [[BlockBounds; 3]; 3],
    gsd: f64,
    center: (f64, f64),
    height: usize,
    width: usize,
}

/// Splits a 1-D extent into 3 consecutive spans; when not divisible by 3 the
/// first (dim mod 3) spans get one extra pixel.
fn axis_splits(dim: usize) -> [(usize, usize); 3] {
    let base = dim / 3;
    let extra = dim % 3;
    let mut out = [(0, 0); 3];
    let mut start = 0;
    for (k, slot) in out.iter_mut().enumerate() {
        let len = base + usize::from(k < extra);
        *slot = (start, start + len);
        start += len;
    }
    out
}

/// Partitions the mask into 3x3 blocks and counts building pixels per block.
pub fn block_ratio_grid(mask: &FootprintMask) -> Result<([[f64; 3]; 3], [[BlockBounds; 3]; 3])> {
    let row_spans = axis_splits(mask.height);
    let col_spans = axis_splits(mask.width);
    let mut rho = [[0.0; 3]; 3];
    let mut bounds = [[BlockBounds {
        row_start: 0,
        row_end: 0,
        col_start: 0,
        col_end: 0,
    }; 3]; 3];
    for bi in 0..3 {
        for bj in 0..3 {
            let b = BlockBounds {
                row_start: row_spans[bi].0,
                row_end: row_spans[bi].1,
                col_start: col_spans[bj].0,
                col_end: col_spans[bj].1,
            };
            let mut count = 0usize;
            for r in b.row_start..b.row_end {
                for c in b.col_start..b.col_end {
                    count += mask.get(r, c) as usize;
                }
            }
            let total = b.pixel_count();
            rho[bi][bj] = if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            };
            bounds[bi][bj] = b;
        }
    }
    Ok((rho, bounds))
}

/// Offset coefficient: 0 when rho <= 0.1, else 5 + t * rho.
pub fn alpha_from_ratio(rho: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidValue(format!("rho must be in [0,1], got {rho}")));
    }
    if t < 0.0 {
        return Err(Error::InvalidValue(format!("t must be nonnegative, got {t}")));
    }
    Ok(if rho <= RHO_THRESHOLD { 0.0 } else { 5.0 + t * rho })
}

impl AlphaGrid {
    pub fn from_mask(mask: &FootprintMask, t: f64) -> Result<Self> {
        let (rho, block_bounds) = block_ratio_grid(mask)?;
        let mut alpha = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                alpha[i][j] = alpha_from_ratio(rho[i][j], t)?;
            }
        }
        Ok(Self {
            rho,
            alpha,
            t,
            block_bounds,
            gsd: mask.gsd,
            center: mask.center,
            height: mask.height,
            width: mask.width,
        })
    }

    /// All-zero guidance over the given tile geometry (every alpha = 0).
    pub fn zero(mask: &FootprintMask) -> Self {
        let (_, block_bounds) = block_ratio_grid(mask).expect("nonempty mask");
        Self {
            rho: [[0.0; 3]; 3],
            alpha: [[0.0; 3]; 3],
            t: DEFAULT_SLOPE_T,
            block_bounds,
            gsd: mask.gsd,
            center: mask.center,
            height: mask.height,
            width: mask.width,
        }
    }

    /// Alpha of the block containing the ground-plane point; points outside
    /// the tile clamp to the nearest edge block.
    pub fn lookup(&self, east: f64, north: f64) -> f64 {
        let rf = self.center.0 - north / self.gsd;
        let cf = self.center.1 + east / self.gsd;
        let r = rf.floor().clamp(0.0, self.height as f64 - 1.0) as usize;
        let c = cf.floor().clamp(0.0, self.width as f64 - 1.0) as usize;
        let bi = (0..3)
            .find(|&k| {
                r >= self.block_bounds[k][0].row_start && r < self.block_bounds[k][0].row_end
            })
            .unwrap_or(2);
        let bj = (0..3)
            .find(|&k| {
                c >= self.block_bounds[0][k].col_start && c < self.block_bounds[0][k].col_end
            })
            .unwrap_or(2);
        self.alpha[bi][bj]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square_mask(n: usize, fill: u8) -> FootprintMask {
        let c = n as f64 / 2.0;
        FootprintMask::new(n, n, vec![fill; n * n], 0.5, (c, c)).unwrap()
    }

    #[test]
    fn all_zero_and_all_one_ratios() {
        let (rho, _) = block_ratio_grid(&square_mask(9, 0)).unwrap();
        assert_eq!(rho, [[0.0; 3]; 3]);
        let (rho, _) = block_ratio_grid(&square_mask(9, 1)).unwrap();
        assert_eq!(rho, [[1.0; 3]; 3]);
    }

    /// Brute-force block counter used as the oracle for the partition rule.
    fn brute_force_rho(mask: &FootprintMask) -> [[f64; 3]; 3] {
        let splits = |dim: usize| -> Vec<usize> {
            // Block index per scalar coordinate, from the stated rule.
            let base = dim / 3;
            let extra = dim % 3;
            let mut idx = Vec::with_capacity(dim);
            for k in 0..3 {
                let len = base + usize::from(k < extra);
                idx.extend(std::iter::repeat(k).take(len));
            }
            idx
        };
        let rows = splits(mask.height);
        let cols = splits(mask.width);
        let mut count = [[0usize; 3]; 3];
        let mut total = [[0usize; 3]; 3];
        for r in 0..mask.height {
            for c in 0..mask.width {
                count[rows[r]][cols[c]] += mask.get(r, c) as usize;
                total[rows[r]][cols[c]] += 1;
            }
        }
        let mut rho = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if total[i][j] > 0 {
                    rho[i][j] = count[i][j] as f64 / total[i][j] as f64;
                }
            }
        }
        rho
    }

    #[test]
    fn half_filled_256_matches_brute_force() {
        let mut data = vec![0u8; 256 * 256];
        for r in 0..256 {
            for c in 0..128 {
                data[r * 256 + c] = 1;
            }
        }
        let mask = FootprintMask::new(256, 256, data, 0.27, (128.0, 128.0)).unwrap();
        let (rho, _) = block_ratio_grid(&mask).unwrap();
        let expect = brute_force_rho(&mask);
        assert_eq!(rho, expect);
        // Left column of blocks fully covered (256 = 86+85+85; 128 > 86).
        assert_eq!(rho[0][0], 1.0);
        assert_eq!(rho[1][0], 1.0);
        assert_eq!(rho[2][0], 1.0);
        assert_eq!(rho[0][2], 0.0);
    }

    #[test]
    fn alpha_branch_values() {
        assert_eq!(alpha_from_ratio(0.1, 20.0).unwrap(), 0.0);
        assert_eq!(alpha_from_ratio(0.5, 20.0).unwrap(), 15.0);
        assert_eq!(alpha_from_ratio(1.0, 20.0).unwrap(), 25.0);
        assert!(alpha_from_ratio(1.5, 20.0).is_err());
        assert!(alpha_from_ratio(-0.1, 20.0).is_err());
    }

    #[test]
    fn alpha_lookup_cases() {
        let zero = square_mask(16, 0);
        let grid = AlphaGrid::from_mask(&zero, 20.0).unwrap();
        assert_eq!(grid.lookup(0.0, 0.0), 0.0);

        let full = square_mask(16, 1);
        let grid = AlphaGrid::from_mask(&full, 20.0).unwrap();
        assert_eq!(grid.lookup(0.0, 0.0), 25.0);
        // Far outside the tile: clamps to an edge block.
        assert_eq!(grid.lookup(1e6, -1e6), 25.0);
    }

    #[test]
    fn contains_cases() {
        let full = square_mask(16, 1);
        assert!(full.contains(0.0, 0.0));
        let empty = square_mask(16, 0);
        assert!(!empty.contains(0.0, 0.0));
        assert!(!empty.contains(3.0, -2.0));
        // Way out of bounds.
        assert!(!full.contains(1e9, 0.0));
    }

    #[test]
    fn contains_matches_brute_force_on_random_mask() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let data: Vec<u8> = (0..256).map(|_| rng.gen_range(0..=1u8)).collect();
        let mask = FootprintMask::new(16, 16, data, 0.5, (8.0, 8.0)).unwrap();
        for _ in 0..2000 {
            let east: f64 = rng.gen_range(-6.0..6.0);
            let north: f64 = rng.gen_range(-6.0..6.0);
            // Independent check: enumerate pixels, find the one whose snapped
            // position matches.
            let rf = 8.0 - north / 0.5;
            let cf = 8.0 + east / 0.5;
            let r = rf.round();
            let c = cf.round();
            let expect = if (0.0..16.0).contains(&r) && (0.0..16.0).contains(&c) {
                mask.get(r as usize, c as usize) == 1
            } else {
                false
            };
            assert_eq!(mask.contains(east, north), expect);
        }
    }

    proptest! {
        #[test]
        fn partition_completeness(h in 1usize..40, w in 1usize..40) {
            let mask = FootprintMask::new(h, w, vec![0; h * w], 1.0, (0.0, 0.0)).unwrap();
            let (_, bounds) = block_ratio_grid(&mask).unwrap();
            let total: usize = bounds.iter().flatten().map(|b| b.pixel_count()).sum();
            prop_assert_eq!(total, h * w);
            // No overlap: spans are consecutive by construction; check edges.
            for k in 0..2 {
                prop_assert_eq!(bounds[k][0].row_end, bounds[k + 1][0].row_start);
                prop_assert_eq!(bounds[0][k].col_end, bounds[0][k + 1].col_start);
            }
        }

        #[test]
        fn alpha_monotone(rho1 in 0.0f64..1.0, rho2 in 0.0f64..1.0, t in 0.0f64..50.0) {
            let (lo, hi) = if rho1 <= rho2 { (rho1, rho2) } else { (rho2, rho1) };
            prop_assert!(alpha_from_ratio(lo, t).unwrap() <= alpha_from_ratio(hi, t).unwrap());
            if lo > RHO_THRESHOLD {
                prop_assert!(alpha_from_ratio(lo, t).unwrap() <= alpha_from_ratio(lo, t + 1.0).unwrap());
            }
        }
    }

    #[test]
    fn alpha_discontinuity_at_threshold() {
        let t = 20.0;
        let below = alpha_from_ratio(RHO_THRESHOLD, t).unwrap();
        let above = alpha_from_ratio(RHO_THRESHOLD + 1e-12, t).unwrap();
        assert_eq!(below, 0.0);
        assert!((above - (5.0 + RHO_THRESHOLD * t)).abs() < 1e-9);
    }
}
