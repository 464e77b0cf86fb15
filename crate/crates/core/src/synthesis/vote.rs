use super::nnf::NearestNeighborField;
use crate::raster::{RasterImage, MAX_CHANNELS};

/// For every coordinate `x` along an axis of length `len`, the `(q, o)`
/// pairs of an in-bounds patch centre `q` and offset `o` with `q + o = x`.
fn axis_pairs(len: usize, radius: isize) -> Vec<Vec<(usize, isize)>> {
    (0..len as isize)
        .map(|x| {
            (x - radius..=x + radius)
                .filter(|&q| q >= 0 && q < len as isize)
                .map(|q| (q as usize, x - q))
                .collect()
        })
        .collect()
}

/// Rebuilds the target image from the exemplar patches the field assigns.
///
/// Each output pixel is the mean of every exemplar sample that a patch
/// window covering it contributes. Windows are truncated at the target
/// border and sampled with edge replication on the exemplar, exactly as in
/// the patch distance, so the result minimizes the summed squared style
/// term for a fixed field.
pub(crate) fn vote_field(
    nnf: &NearestNeighborField,
    a_style: &RasterImage,
    patch_size: usize,
) -> RasterImage {
    let (w, h) = nnf.target_dims();
    let ch = a_style.channels();
    let radius = (patch_size / 2) as isize;
    let xs = axis_pairs(w, radius);
    let ys = axis_pairs(h, radius);
    let mut data = vec![0.0f32; w * h * ch];
    crate::par::for_each_chunk_mut(&mut data, w * ch, |y, row| {
        for x in 0..w {
            let mut acc = [0.0f64; MAX_CHANNELS];
            let mut count = 0u32;
            for &(qy, oy) in &ys[y] {
                for &(qx, ox) in &xs[x] {
                    let (sx, sy) = nnf.get(qx, qy);
                    let s = a_style.pixel_clamped(sx as isize + ox, sy as isize + oy);
                    for (a, &v) in acc.iter_mut().zip(s) {
                        *a += v as f64;
                    }
                    count += 1;
                }
            }
            for c in 0..ch {
                row[x * ch + c] = (acc[c] / count as f64) as f32;
            }
        }
    });
    RasterImage::from_vec(w, h, ch, data).expect("voted image shape is valid")
}
