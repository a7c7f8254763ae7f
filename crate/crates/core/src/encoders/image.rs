use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Mode, Tensor};
use crate::error::{Error, Result};

/// Geometry of the image preprocessing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageGeometry {
    /// Shortest side after resizing.
    pub resize_shortest: usize,
    /// Side of the square crop fed to the backbone.
    pub input_side: usize,
}

impl ImageGeometry {
    pub const PAPER: Self = Self {
        resize_shortest: 500,
        input_side: 299,
    };

    pub fn validate(&self) -> Result<()> {
        if self.input_side == 0 || self.input_side > self.resize_shortest {
            return Err(Error::Config(format!(
                "crop side {} must be in 1..={}",
                self.input_side, self.resize_shortest
            )));
        }
        Ok(())
    }
}

/// Resizes an `[h, w, c]` image with bilinear sampling at pixel centers.
pub fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w, c) = hwc(image)?;
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let src = image.data();
    let mut out = vec![0.0; out_h * out_w * c];
    let axis = |dst: usize, scale: f64, len: usize| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f64)
    };
    for oy in 0..out_h {
        let (y0, y1, fy) = axis(oy, sy, h);
        for ox in 0..out_w {
            let (x0, x1, fx) = axis(ox, sx, w);
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * w + x) * c + ch];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out[(oy * out_w + ox) * c + ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Crops the `side × side` window at `(top, left)`, optionally mirrored.
pub fn crop(image: &Tensor, top: usize, left: usize, side: usize, mirror: bool) -> Result<Tensor> {
    let (h, w, c) = hwc(image)?;
    if top + side > h || left + side > w {
        return Err(Error::shape(
            "crop",
            format!("window {side}x{side} at ({top},{left}) exceeds {h}x{w}"),
        ));
    }
    let src = image.data();
    let mut out = Vec::with_capacity(side * side * c);
    for y in 0..side {
        for x in 0..side {
            let sx = if mirror { left + side - 1 - x } else { left + x };
            let at = ((top + y) * w + sx) * c;
            out.extend_from_slice(&src[at..at + c]);
        }
    }
    Tensor::new(vec![side, side, c], out)
}

/// Resizes so the shortest side equals `resize_shortest`, then crops to
/// `input_side`.
///
/// Train mode takes a seeded random window and mirrors it with probability
/// one half; eval mode takes the centered window unmirrored.
pub fn preprocess_image(image: &Tensor, mode: Mode, geom: &ImageGeometry, seed: u64) -> Result<Tensor> {
    geom.validate()?;
    let (h, w, _) = hwc(image)?;
    let r = geom.resize_shortest;
    let long = |a: usize, b: usize| ((a * r) as f64 / b as f64).round().max(r as f64) as usize;
    let (rh, rw) = if h <= w { (r, long(w, h)) } else { (long(h, w), r) };
    let resized = if (rh, rw) == (h, w) {
        image.clone()
    } else {
        resize_bilinear(image, rh, rw)?
    };
    let side = geom.input_side;
    match mode {
        Mode::Eval => crop(&resized, (rh - side) / 2, (rw - side) / 2, side, false),
        Mode::Train => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let top = rng.random_range(0..=rh - side);
            let left = rng.random_range(0..=rw - side);
            let mirror = rng.random_bool(0.5);
            crop(&resized, top, left, side, mirror)
        }
    }
}

/// Decodes an image file to `[h, w, 3]` with values in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let decoded = ::image::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = decoded.dimensions();
    let data = decoded.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    Tensor::new(vec![h as usize, w as usize, 3], data)
}

/// Writes an `[h, w, 3]` image with values in `[0, 1]` as 8-bit PNG.
pub fn save_png(path: &Path, image: &Tensor) -> Result<()> {
    let (h, w, c) = hwc(image)?;
    if c != 3 {
        return Err(Error::shape("save_png", format!("expected 3 channels, got {c}")));
    }
    let bytes = image
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = ::image::RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions");
    buf.save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn hwc(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [h, w, c] if h > 0 && w > 0 && c > 0 => Ok((h, w, c)),
        _ => Err(Error::shape(
            "image",
            format!("expected non-empty [h, w, c], got {:?}", image.shape()),
        )),
    }
}
