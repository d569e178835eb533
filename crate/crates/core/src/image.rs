//! RGB frame buffer plus the crop/resize operations used for view generation.
//!
//! Frames are H x W x 3, channels-last, values in [0,1]. Network input wants
//! channels-first; `to_chw_tensor` does the rearrangement.

use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Frame {
    pub fn zeros(h: usize, w: usize) -> Frame {
        Frame {
            h,
            w,
            data: vec![0.0; h * w * 3],
        }
    }

    pub fn constant(h: usize, w: usize, rgb: [f32; 3]) -> Frame {
        let mut data = Vec::with_capacity(h * w * 3);
        for _ in 0..h * w {
            data.extend_from_slice(&rgb);
        }
        Frame { h, w, data }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.w + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let i = (y * self.w + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Crop `rect` and resize to (out_h, out_w) with bilinear sampling.
    /// Sample centers map as src = (dst + 0.5) * scale - 0.5, clamped to the
    /// crop, so constant regions stay constant.
    pub fn crop_resize_bilinear(&self, rect: CropRect, out_h: usize, out_w: usize) -> Frame {
        assert!(rect.x0 + rect.w <= self.w && rect.y0 + rect.h <= self.h, "crop out of bounds");
        assert!(rect.w > 0 && rect.h > 0 && out_h > 0 && out_w > 0);
        let mut out = Frame::zeros(out_h, out_w);
        let sy = rect.h as f32 / out_h as f32;
        let sx = rect.w as f32 / out_w as f32;
        for oy in 0..out_h {
            let fy = ((oy as f32 + 0.5) * sy - 0.5).clamp(0.0, rect.h as f32 - 1.0);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(rect.h - 1);
            let ty = fy - y0 as f32;
            for ox in 0..out_w {
                let fx = ((ox as f32 + 0.5) * sx - 0.5).clamp(0.0, rect.w as f32 - 1.0);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(rect.w - 1);
                let tx = fx - x0 as f32;
                let p00 = self.get(rect.y0 + y0, rect.x0 + x0);
                let p01 = self.get(rect.y0 + y0, rect.x0 + x1);
                let p10 = self.get(rect.y0 + y1, rect.x0 + x0);
                let p11 = self.get(rect.y0 + y1, rect.x0 + x1);
                let mut rgb = [0.0f32; 3];
                for c in 0..3 {
                    let top = p00[c] * (1.0 - tx) + p01[c] * tx;
                    let bot = p10[c] * (1.0 - tx) + p11[c] * tx;
                    rgb[c] = top * (1.0 - ty) + bot * ty;
                }
                out.set(oy, ox, rgb);
            }
        }
        out
    }

    /// Channels-first tensor [3, H, W].
    pub fn to_chw_tensor<T: Scalar>(&self) -> Tensor<T> {
        let hw = self.h * self.w;
        let mut data = vec![T::zero(); 3 * hw];
        for p in 0..hw {
            for c in 0..3 {
                data[c * hw + p] = T::c(self.data[p * 3 + c] as f64);
            }
        }
        Tensor::new(vec![3, self.h, self.w], data)
    }

    pub fn mean_abs_diff(&self, other: &Frame) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        sum / self.data.len() as f64
    }
}

/// Stack frames into a batch tensor [N, 3, H, W].
pub fn frames_to_batch<T: Scalar>(frames: &[&Frame]) -> Tensor<T> {
    assert!(!frames.is_empty());
    let (h, w) = (frames[0].h, frames[0].w);
    let hw = h * w;
    let mut data = vec![T::zero(); frames.len() * 3 * hw];
    for (n, f) in frames.iter().enumerate() {
        assert_eq!((f.h, f.w), (h, w), "mixed frame sizes in batch");
        let base = n * 3 * hw;
        for p in 0..hw {
            for c in 0..3 {
                data[base + c * hw + p] = T::c(f.data[p * 3 + c] as f64);
            }
        }
    }
    let mut shape = vec![frames.len()];
    shape.extend_from_slice(&[3, h, w]);
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_survives_crop_resize() {
        let f = Frame::constant(16, 16, [0.25, 0.5, 0.75]);
        let out = f.crop_resize_bilinear(CropRect { x0: 3, y0: 2, w: 9, h: 11 }, 8, 8);
        for y in 0..8 {
            for x in 0..8 {
                let p = out.get(y, x);
                assert!((p[0] - 0.25).abs() < 1e-6);
                assert!((p[1] - 0.5).abs() < 1e-6);
                assert!((p[2] - 0.75).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_resize_is_exact() {
        let mut f = Frame::zeros(4, 4);
        for y in 0..4 {
            for x in 0..4 {
                f.set(y, x, [(y * 4 + x) as f32 / 16.0, 0.0, 1.0]);
            }
        }
        let out = f.crop_resize_bilinear(CropRect { x0: 0, y0: 0, w: 4, h: 4 }, 4, 4);
        assert_eq!(out.data, f.data);
    }

    #[test]
    fn chw_tensor_rearranges_channels() {
        let mut f = Frame::zeros(1, 2);
        f.set(0, 0, [0.1, 0.2, 0.3]);
        f.set(0, 1, [0.4, 0.5, 0.6]);
        let t = f.to_chw_tensor::<f64>();
        assert_eq!(t.shape(), &[3, 1, 2]);
        let d = t.data();
        assert!((d[0] - 0.1).abs() < 1e-7 && (d[1] - 0.4).abs() < 1e-7);
        assert!((d[2] - 0.2).abs() < 1e-7 && (d[3] - 0.5).abs() < 1e-7);
    }
}
