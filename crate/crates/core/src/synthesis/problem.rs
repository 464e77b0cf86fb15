//! Packed per-level feature images and the patch distance kernel.

use crate::guides::GuideSet;
use crate::raster::RasterImage;

/// Interleaved feature vectors, one per pixel.
#[derive(Debug, Clone)]
pub(crate) struct Features {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub data: Vec<f32>,
}

/// One guide image on each side plus its weight and optional target mask.
pub(crate) struct GuideLayer<'a> {
    pub exemplar: &'a RasterImage,
    pub target: &'a RasterImage,
    pub weight: f32,
    pub mask: Option<&'a RasterImage>,
}

/// Everything the search needs at one pyramid level.
///
/// Components with zero weight are dropped when packing, so an inert
/// channel leaves every distance bit-identical.
pub(crate) struct LevelProblem {
    pub a: Features,
    pub b: Features,
    weights: Vec<f64>,
    mask_of: Vec<Option<usize>>,
    masks: Vec<Vec<f32>>,
    style_len: usize,
    radius: isize,
}

#[inline]
fn clamp_coord(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

impl LevelProblem {
    pub fn new(
        a_style: &RasterImage,
        b_style: &RasterImage,
        style_weight: f32,
        guides: &[GuideLayer<'_>],
        patch_size: usize,
    ) -> Self {
        let mut weights = Vec::new();
        let mut mask_of = Vec::new();
        let mut masks: Vec<Vec<f32>> = Vec::new();
        let mut a_parts: Vec<&RasterImage> = Vec::new();
        let mut b_parts: Vec<&RasterImage> = Vec::new();

        let style_len = if style_weight > 0.0 { a_style.channels() } else { 0 };
        if style_len > 0 {
            weights.extend(std::iter::repeat_n(style_weight as f64, style_len));
            mask_of.extend(std::iter::repeat_n(None, style_len));
            a_parts.push(a_style);
            b_parts.push(b_style);
        }
        for g in guides.iter().filter(|g| g.weight > 0.0) {
            let mask_index = g.mask.map(|m| {
                masks.push(m.data().to_vec());
                masks.len() - 1
            });
            for _ in 0..g.exemplar.channels() {
                weights.push(g.weight as f64);
                mask_of.push(mask_index);
            }
            a_parts.push(g.exemplar);
            b_parts.push(g.target);
        }

        Self {
            a: pack(&a_parts, a_style.dims()),
            b: pack(&b_parts, b_style.dims()),
            weights,
            mask_of,
            masks,
            style_len,
            radius: (patch_size / 2) as isize,
        }
    }

    /// Builds a single-level problem straight from guide sets.
    pub fn from_sets(
        a_guides: &GuideSet,
        a_style: &RasterImage,
        b_guides: &GuideSet,
        b_style: &RasterImage,
        style_weight: f32,
        patch_size: usize,
    ) -> Self {
        let layers: Vec<GuideLayer<'_>> = a_guides
            .channels()
            .iter()
            .zip(b_guides.channels())
            .map(|(a, b)| GuideLayer {
                exemplar: &a.image,
                target: &b.image,
                weight: a.weight,
                mask: b.mask.as_deref(),
            })
            .collect();
        Self::new(a_style, b_style, style_weight, &layers, patch_size)
    }

    /// Replaces the style components of the target features.
    pub fn set_b_style(&mut self, style: &RasterImage) {
        if self.style_len == 0 {
            return;
        }
        debug_assert_eq!(style.channels(), self.style_len);
        let stride = self.b.stride;
        let n = self.style_len;
        for (dst, src) in self.b.data.chunks_exact_mut(stride).zip(style.data().chunks_exact(n)) {
            dst[..n].copy_from_slice(src);
        }
    }

    /// Weighted sum of squared differences between the patch around source
    /// `p` and the patch around target `q`. Exemplar samples outside the
    /// image are clamped to the edge; target offsets that fall outside the
    /// target are skipped. Evaluation stops early once the running sum
    /// reaches `bound`; the returned value is then only known to be
    /// `>= bound`.
    #[inline]
    pub fn distance(&self, p: (usize, usize), q: (usize, usize), bound: f64) -> f64 {
        let r = self.radius;
        let stride = self.a.stride;
        let (ad, bd) = (&self.a.data, &self.b.data);
        let (qx, qy) = (q.0 as isize, q.1 as isize);
        let (x0, x1) = ((-r).max(-qx), r.min(self.b.width as isize - 1 - qx));
        let (y0, y1) = ((-r).max(-qy), r.min(self.b.height as isize - 1 - qy));
        let mut sum = 0.0f64;
        for dy in y0..=y1 {
            let ay = clamp_coord(p.1 as isize + dy, self.a.height);
            let by = (qy + dy) as usize;
            for dx in x0..=x1 {
                let ax = clamp_coord(p.0 as isize + dx, self.a.width);
                let bpix = by * self.b.width + (qx + dx) as usize;
                let ai = (ay * self.a.width + ax) * stride;
                let bi = bpix * stride;
                let a = &ad[ai..ai + stride];
                let b = &bd[bi..bi + stride];
                for k in 0..stride {
                    let d = a[k] as f64 - b[k] as f64;
                    let w = match self.mask_of[k] {
                        None => self.weights[k],
                        Some(m) => self.weights[k] * self.masks[m][bpix] as f64,
                    };
                    sum += w * d * d;
                }
            }
            if sum >= bound {
                return sum;
            }
        }
        sum
    }

    #[inline]
    pub fn full_distance(&self, p: (usize, usize), q: (usize, usize)) -> f64 {
        self.distance(p, q, f64::INFINITY)
    }
}

fn pack(parts: &[&RasterImage], dims: (usize, usize)) -> Features {
    let stride: usize = parts.iter().map(|p| p.channels()).sum();
    let n = dims.0 * dims.1;
    let mut data = Vec::with_capacity(n * stride);
    for i in 0..n {
        for part in parts {
            let c = part.channels();
            data.extend_from_slice(&part.data()[i * c..(i + 1) * c]);
        }
    }
    Features {
        width: dims.0,
        height: dims.1,
        stride,
        data,
    }
}
