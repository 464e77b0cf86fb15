use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-target-pixel source coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearestNeighborField {
    width: usize,
    height: usize,
    source_width: usize,
    source_height: usize,
    entries: Vec<(u32, u32)>,
}

impl NearestNeighborField {
    pub fn from_entries(
        target: (usize, usize),
        source: (usize, usize),
        entries: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if target.0 == 0 || target.1 == 0 || source.0 == 0 || source.1 == 0 {
            return Err(Error::InvalidParams("empty field dimensions".into()));
        }
        if entries.len() != target.0 * target.1 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}x{} field",
                entries.len(),
                target.0,
                target.1
            )));
        }
        if let Some(i) = entries
            .iter()
            .position(|&(sx, sy)| sx as usize >= source.0 || sy as usize >= source.1)
        {
            return Err(Error::InvalidParams(format!(
                "entry {:?} at index {i} outside {}x{} source",
                entries[i], source.0, source.1
            )));
        }
        Ok(Self {
            width: target.0,
            height: target.1,
            source_width: source.0,
            source_height: source.1,
            entries,
        })
    }

    /// Field mapping every target pixel to the same source coordinate.
    pub fn identity(dims: (usize, usize)) -> Self {
        let entries = (0..dims.1)
            .flat_map(|y| (0..dims.0).map(move |x| (x as u32, y as u32)))
            .collect();
        Self::from_entries(dims, dims, entries).expect("identity field is valid")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn target_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn source_dims(&self) -> (usize, usize) {
        (self.source_width, self.source_height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (u32, u32) {
        self.entries[y * self.width + x]
    }

    #[inline]
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [(u32, u32)] {
        &mut self.entries
    }

    pub fn is_valid(&self) -> bool {
        self.entries.len() == self.width * self.height
            && self.entries.iter().all(|&(sx, sy)| {
                (sx as usize) < self.source_width && (sy as usize) < self.source_height
            })
    }
}

/// Derives a 256-bit generator key from a seed and a purpose path.
pub(crate) fn derive_key(seed: u64, tag: &str, path: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"styletx/rng/v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for v in path {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

/// Counter-based generator for one pixel: the key selects the pass, the
/// stream selects the pixel.
#[inline]
pub(crate) fn pixel_rng(key: &[u8; 32], pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(pixel as u64);
    rng
}

pub(crate) fn init_with_key(
    target: (usize, usize),
    source: (usize, usize),
    key: &[u8; 32],
) -> NearestNeighborField {
    let entries = crate::par::map_indices(target.0 * target.1, |i| {
        let mut rng = pixel_rng(key, i);
        let sx = rng.random_range(0..source.0 as u32);
        let sy = rng.random_range(0..source.1 as u32);
        (sx, sy)
    });
    NearestNeighborField::from_entries(target, source, entries).expect("random field is valid")
}

/// Uniformly random field; each entry depends only on `(seed, pixel index)`.
pub fn init_nnf(target: (usize, usize), source: (usize, usize), seed: u64) -> NearestNeighborField {
    init_with_key(target, source, &derive_key(seed, "init", &[]))
}

/// Doubles a coarse field: fine `q` takes `2 * coarse(q / 2) + q % 2`,
/// clamped to the new source bounds.
pub fn upsample_nnf(
    nnf: &NearestNeighborField,
    target: (usize, usize),
    source: (usize, usize),
) -> NearestNeighborField {
    let mut entries = Vec::with_capacity(target.0 * target.1);
    for y in 0..target.1 {
        let cy = (y / 2).min(nnf.height - 1);
        for x in 0..target.0 {
            let cx = (x / 2).min(nnf.width - 1);
            let (sx, sy) = nnf.get(cx, cy);
            let fx = (2 * sx as usize + x % 2).min(source.0 - 1);
            let fy = (2 * sy as usize + y % 2).min(source.1 - 1);
            entries.push((fx as u32, fy as u32));
        }
    }
    NearestNeighborField::from_entries(target, source, entries).expect("upsampled field is valid")
}
