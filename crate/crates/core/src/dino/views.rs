//! Multi-crop view construction: two global views covering more than half of
//! the source image and several smaller local views covering less than half,
//! all resized to their target resolutions with bilinear sampling.

use rand::Rng as _;

use crate::dino::DistillationConfig;
use crate::error::{Error, Result};
use crate::image::{CropRect, Frame};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRecord {
    pub kind: ViewKind,
    pub rect: CropRect,
    /// Crop area divided by source image area.
    pub area_ratio: f64,
}

/// The multi-crop decomposition of one image: exactly 2 global views plus m
/// local views, with the source rectangle of each.
#[derive(Debug, Clone)]
pub struct ViewSet {
    pub globals: Vec<Frame>,
    pub locals: Vec<Frame>,
    pub crop_records: Vec<CropRecord>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.globals.len() + self.locals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Views in canonical order: globals first, then locals.
    pub fn view(&self, idx: usize) -> &Frame {
        if idx < self.globals.len() {
            &self.globals[idx]
        } else {
            &self.locals[idx - self.globals.len()]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.globals.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "view set must hold exactly 2 global views, has {}",
                self.globals.len()
            )));
        }
        if self.crop_records.len() != self.len() {
            return Err(Error::InvalidInput("crop record count disagrees with view count".into()));
        }
        for (i, rec) in self.crop_records.iter().enumerate() {
            match rec.kind {
                ViewKind::Global if rec.area_ratio <= 0.5 => {
                    return Err(Error::InvalidInput(format!(
                        "global view {i} covers {:.3} of the image, need > 0.5",
                        rec.area_ratio
                    )));
                }
                ViewKind::Local if rec.area_ratio >= 0.5 => {
                    return Err(Error::InvalidInput(format!(
                        "local view {i} covers {:.3} of the image, need < 0.5",
                        rec.area_ratio
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Sample a crop whose area fraction is close to `frac`, preserving the
/// source aspect ratio, and adjust for rounding so that the realized ratio
/// stays on the required side of 0.5.
fn sample_crop(rng: &mut Rng, img_w: usize, img_h: usize, frac: f64, want_big: bool) -> CropRect {
    let s = frac.sqrt();
    let mut cw = ((img_w as f64) * s).round().max(4.0) as usize;
    let mut ch = ((img_h as f64) * s).round().max(4.0) as usize;
    cw = cw.min(img_w);
    ch = ch.min(img_h);
    let area = |cw: usize, ch: usize| (cw * ch) as f64 / (img_w * img_h) as f64;
    if want_big {
        while area(cw, ch) <= 0.5 && (cw < img_w || ch < img_h) {
            cw = (cw + 1).min(img_w);
            ch = (ch + 1).min(img_h);
        }
    } else {
        while area(cw, ch) >= 0.5 && cw > 4 && ch > 4 {
            cw -= 1;
            ch -= 1;
        }
    }
    let x0 = if cw == img_w { 0 } else { rng.gen_range(0..=img_w - cw) };
    let y0 = if ch == img_h { 0 } else { rng.gen_range(0..=img_h - ch) };
    CropRect { x0, y0, w: cw, h: ch }
}

/// Build the multi-crop view set for one image. All randomness is drawn from
/// `rng`, so a fixed seed replays the same crop rectangles.
pub fn make_views(image: &Frame, rng: &mut Rng, cfg: &DistillationConfig) -> Result<ViewSet> {
    cfg.validate()?;
    if image.w < cfg.global_res || image.h < cfg.global_res {
        return Err(Error::ImageTooSmall {
            width: image.w,
            height: image.h,
            min: cfg.global_res,
        });
    }
    let img_area = (image.w * image.h) as f64;
    let mut globals = Vec::with_capacity(2);
    let mut locals = Vec::with_capacity(cfg.num_local);
    let mut crop_records = Vec::with_capacity(2 + cfg.num_local);
    for _ in 0..2 {
        let frac = rng.gen_range(0.55..1.0);
        let rect = sample_crop(rng, image.w, image.h, frac, true);
        crop_records.push(CropRecord {
            kind: ViewKind::Global,
            rect,
            area_ratio: (rect.w * rect.h) as f64 / img_area,
        });
        globals.push(image.crop_resize_bilinear(rect, cfg.global_res, cfg.global_res));
    }
    for _ in 0..cfg.num_local {
        let frac = rng.gen_range(0.08..0.4);
        let rect = sample_crop(rng, image.w, image.h, frac, false);
        crop_records.push(CropRecord {
            kind: ViewKind::Local,
            rect,
            area_ratio: (rect.w * rect.h) as f64 / img_area,
        });
        locals.push(image.crop_resize_bilinear(rect, cfg.local_res, cfg.local_res));
    }
    let set = ViewSet {
        globals,
        locals,
        crop_records,
    };
    set.validate()?;
    Ok(set)
}
