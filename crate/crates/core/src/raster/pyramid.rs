use super::RasterImage;

/// Image pyramid, finest level first.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<RasterImage>,
}

impl ImagePyramid {
    pub fn levels(&self) -> &[RasterImage] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &RasterImage {
        &self.levels[index]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn finest(&self) -> &RasterImage {
        &self.levels[0]
    }

    pub fn coarsest(&self) -> &RasterImage {
        self.levels.last().expect("pyramid has at least one level")
    }

    pub fn into_levels(self) -> Vec<RasterImage> {
        self.levels
    }
}

#[inline]
fn half(dim: usize) -> usize {
    dim.div_ceil(2)
}

/// Number of levels `build_pyramid` produces for a `width`x`height` image.
///
/// Level 0 is always present. Further levels are added while the shorter
/// side of the next level stays at or above `min_level_size` and the image
/// can still shrink.
pub fn pyramid_depth(width: usize, height: usize, max_levels: usize, min_level_size: usize) -> usize {
    let mut depth = 1;
    let (mut w, mut h) = (width, height);
    while depth < max_levels {
        let (nw, nh) = (half(w), half(h));
        if (nw, nh) == (w, h) || nw.min(nh) < min_level_size {
            break;
        }
        w = nw;
        h = nh;
        depth += 1;
    }
    depth
}

/// 2x box-filter downsample; each output pixel is the mean of its (up to
/// four) in-bounds source pixels.
pub fn downsample(img: &RasterImage) -> RasterImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let (nw, nh) = (half(w), half(h));
    let mut data = vec![0.0f32; nw * nh * ch];
    crate::par::for_each_chunk_mut(&mut data, nw * ch, |y, row| {
        let y0 = 2 * y;
        let y1 = (y0 + 1).min(h - 1);
        for x in 0..nw {
            let x0 = 2 * x;
            let x1 = (x0 + 1).min(w - 1);
            let mut count = 0u32;
            let mut acc = [0.0f64; super::MAX_CHANNELS];
            let ys: &[usize] = if y1 != y0 { &[y0, y1] } else { &[y0] };
            let xs: &[usize] = if x1 != x0 { &[x0, x1] } else { &[x0] };
            for &sy in ys {
                for &sx in xs {
                    for (a, &v) in acc.iter_mut().zip(img.pixel(sx, sy)) {
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
    RasterImage::from_vec(nw, nh, ch, data).expect("downsampled shape is valid")
}

/// Builds a box-filter pyramid of at most `max_levels` levels whose
/// coarsest level keeps its shorter side at or above `min_level_size`.
pub fn build_pyramid(img: &RasterImage, max_levels: usize, min_level_size: usize) -> ImagePyramid {
    let depth = pyramid_depth(img.width(), img.height(), max_levels.max(1), min_level_size);
    let mut levels = Vec::with_capacity(depth);
    levels.push(img.clone());
    while levels.len() < depth {
        let next = downsample(levels.last().unwrap());
        levels.push(next);
    }
    ImagePyramid { levels }
}
