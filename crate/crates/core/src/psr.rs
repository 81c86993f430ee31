//! Pixel super-resolution by shift-and-add fusion of sub-pixel shifted frames.
//!
//! Frame model: a low-resolution sample `(i, j)` of a frame shifted by `(sx, sy)`
//! high-resolution pixels is the mean of the HR pixels under its aperture,
//! rows `i·k + sy + o + a` and columns `j·k + sx + o + b` for `a, b < aperture`
//! (periodic, `o = (k − aperture) / 2`). Fusion assigns each HR pixel the mean of every
//! LR sample whose aperture covers it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealImage;

/// One low-resolution frame and its known lateral shift in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedFrame {
    pub image: RealImage,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedFrameSet {
    pub frames: Vec<ShiftedFrame>,
    pub lr_pitch: f64,
    pub factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsrOptions {
    /// Pixel aperture in HR pixels; `None` means the full LR pixel (`k`).
    pub aperture: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsrResult {
    pub image: RealImage,
    /// HR pixels that no aperture covered and were interpolated.
    pub filled: usize,
    pub warnings: Vec<String>,
}

/// All `k²` integer sub-pixel offsets, row-major.
pub fn full_grid(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|sy| (0..k).map(move |sx| (sx, sy))).collect()
}

fn aperture_of(k: usize, opts: &PsrOptions) -> Result<usize> {
    let ap = opts.aperture.unwrap_or(k);
    if ap == 0 || ap > k {
        return Err(Error::invalid(format!("aperture {ap} must lie in 1..={k}")));
    }
    Ok(ap)
}

/// Sample an HR image into shifted LR frames under the frame model.
/// `shifts` are in whole HR pixels.
pub fn simulate_frames(
    hr: &RealImage,
    factor: usize,
    shifts: &[(usize, usize)],
    opts: &PsrOptions,
) -> Result<ShiftedFrameSet> {
    let k = factor;
    if k == 0 {
        return Err(Error::invalid("factor must be at least 1"));
    }
    let ap = aperture_of(k, opts)?;
    let (w, h) = hr.dims();
    if w % k != 0 || h % k != 0 {
        return Err(Error::invalid(format!("HR grid {w}x{h} not divisible by factor {k}")));
    }
    let (lw, lh) = (w / k, h / k);
    let off = (k - ap) / 2;
    let hr_pitch = hr.pitch();
    let frames = shifts
        .iter()
        .map(|&(sx, sy)| {
            let data = (0..lh * lw)
                .map(|n| {
                    let (i, j) = (n / lw, n % lw);
                    let mut acc = 0.0;
                    for a in 0..ap {
                        for b in 0..ap {
                            let y = (i * k + sy + off + a) % h;
                            let x = (j * k + sx + off + b) % w;
                            acc += hr.get(x, y);
                        }
                    }
                    acc / (ap * ap) as f64
                })
                .collect();
            Ok(ShiftedFrame {
                image: RealImage::new(lw, lh, hr_pitch * k as f64, data)?,
                dx: sx as f64 * hr_pitch,
                dy: sy as f64 * hr_pitch,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ShiftedFrameSet {
        frames,
        lr_pitch: hr_pitch * k as f64,
        factor: k,
    })
}

fn to_hr_offset(shift: f64, hr_pitch: f64, k: usize, warnings: &mut Vec<String>) -> usize {
    let s = shift / hr_pitch;
    let r = s.round();
    if (s - r).abs() > 1e-6 {
        warnings.push(format!("shift {shift} µm is off the HR grid; rounded to {r} px"));
    }
    (r as i64).rem_euclid(k as i64) as usize
}

pub fn psr_fuse(set: &ShiftedFrameSet, opts: &PsrOptions) -> Result<PsrResult> {
    let k = set.factor;
    if k == 0 {
        return Err(Error::invalid("factor must be at least 1"));
    }
    if set.frames.is_empty() {
        return Err(Error::invalid("no frames to fuse"));
    }
    if !(set.lr_pitch > 0.0) {
        return Err(Error::invalid("LR pitch must be positive"));
    }
    let ap = aperture_of(k, opts)?;
    let (lw, lh) = set.frames[0].image.dims();
    let hr_pitch = set.lr_pitch / k as f64;
    let mut warnings = Vec::new();
    let mut offsets = Vec::with_capacity(set.frames.len());
    for f in &set.frames {
        if f.image.dims() != (lw, lh) {
            return Err(Error::DimensionMismatch {
                expected: (lw, lh),
                actual: f.image.dims(),
            });
        }
        if !f.image.is_finite() {
            return Err(Error::NonFinite("PSR frame"));
        }
        if f.dx.abs() >= set.lr_pitch || f.dy.abs() >= set.lr_pitch {
            return Err(Error::invalid(format!(
                "shift ({}, {}) µm exceeds one LR pixel ({} µm)",
                f.dx, f.dy, set.lr_pitch
            )));
        }
        offsets.push((
            to_hr_offset(f.dx, hr_pitch, k, &mut warnings),
            to_hr_offset(f.dy, hr_pitch, k, &mut warnings),
        ));
    }

    let (w, h) = (lw * k, lh * k);
    let off = (k - ap) / 2;
    // HR coordinate `p` is covered by LR index `(p − s − off − a) / k` for each `a`
    // that makes the numerator a multiple of k.
    let hits = |p: usize, s: usize, n: usize, len: usize| {
        (0..ap).filter_map(move |a| {
            let t = (p + len * 2 - s - off - a) % len;
            t.is_multiple_of(k).then_some((t / k) % n)
        })
    };
    let mut acc = vec![0.0; w * h];
    let mut cnt = vec![0u32; w * h];
    acc.par_chunks_mut(w)
        .zip(cnt.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, crow))| {
            for x in 0..w {
                for (f, &(sx, sy)) in set.frames.iter().zip(&offsets) {
                    for i in hits(y, sy, lh, h) {
                        for j in hits(x, sx, lw, w) {
                            row[x] += f.image.get(j, i);
                            crow[x] += 1;
                        }
                    }
                }
            }
        });

    let mut filled = 0;
    let mut data: Vec<Option<f64>> = acc
        .iter()
        .zip(&cnt)
        .map(|(&a, &c)| (c > 0).then(|| a / c as f64))
        .collect();
    if data.iter().any(Option::is_none) {
        filled = data.iter().filter(|v| v.is_none()).count();
        warnings.push(format!(
            "{filled} HR pixels not covered by any frame; filled by bilinear interpolation"
        ));
        fill_lines(&mut data, w, h, true);
        fill_lines(&mut data, w, h, false);
    }
    for w in &warnings {
        log::warn!("psr: {w}");
    }
    let data = data
        .into_iter()
        .map(|v| v.ok_or_else(|| Error::invalid("frames leave a whole HR row and column uncovered")))
        .collect::<Result<_>>()?;
    Ok(PsrResult {
        image: RealImage::new(w, h, hr_pitch, data)?,
        filled,
        warnings,
    })
}

/// Periodic linear interpolation of missing samples along rows (or columns). Running
/// rows then columns gives bilinear interpolation on lattice-shaped gaps.
fn fill_lines(data: &mut [Option<f64>], w: usize, h: usize, rows: bool) {
    let (lines, len) = if rows { (h, w) } else { (w, h) };
    let idx = |line: usize, p: usize| if rows { line * w + p } else { p * w + line };
    for line in 0..lines {
        let known: Vec<usize> = (0..len).filter(|&p| data[idx(line, p)].is_some()).collect();
        if known.is_empty() || known.len() == len {
            continue;
        }
        for p in 0..len {
            if data[idx(line, p)].is_some() {
                continue;
            }
            let next = known.iter().copied().find(|&q| q > p).unwrap_or(known[0] + len);
            let prev = known.iter().copied().rev().find(|&q| q < p).map_or(known[known.len() - 1] as isize - len as isize, |q| q as isize);
            let (vp, vn) = (
                data[idx(line, prev.rem_euclid(len as isize) as usize)].expect("known"),
                data[idx(line, next % len)].expect("known"),
            );
            let t = (p as isize - prev) as f64 / (next as isize - prev) as f64;
            data[idx(line, p)] = Some(vp + t * (vn - vp));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use std::f64::consts::PI;

    fn smooth(n: usize) -> RealImage {
        RealImage::from_fn(n, n, 0.37, |x, y| {
            let (u, v) = (x as f64 / n as f64, y as f64 / n as f64);
            1.0 + 0.2 * (2.0 * PI * u).cos() + 0.15 * (2.0 * PI * (2.0 * v + u)).sin()
        })
        .unwrap()
    }

    #[test]
    fn identity_for_unit_factor() {
        let img = smooth(24);
        let set = ShiftedFrameSet {
            frames: vec![ShiftedFrame { image: img.clone(), dx: 0.0, dy: 0.0 }],
            lr_pitch: img.pitch(),
            factor: 1,
        };
        let r = psr_fuse(&set, &PsrOptions::default()).unwrap();
        assert_eq!(r.image, img);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn constant_frames_give_constant_image() {
        let hr = RealImage::constant(48, 48, 0.37, 0.8).unwrap();
        let set = simulate_frames(&hr, 3, &full_grid(3), &PsrOptions::default()).unwrap();
        let r = psr_fuse(&set, &PsrOptions::default()).unwrap();
        assert!(r.image.data().iter().all(|&v| (v - 0.8).abs() < 1e-14));
    }

    #[test]
    fn mean_is_preserved() {
        let hr = RealImage::from_fn(48, 48, 0.37, |x, y| ((x * 31 + y * 17) % 13) as f64 / 13.0).unwrap();
        let set = simulate_frames(&hr, 3, &full_grid(3), &PsrOptions::default()).unwrap();
        let r = psr_fuse(&set, &PsrOptions::default()).unwrap();
        let frame_mean = set.frames.iter().map(|f| f.image.mean()).sum::<f64>() / set.frames.len() as f64;
        assert!((r.image.mean() - frame_mean).abs() < 1e-6);
    }

    /// Independent spatial-domain oracle: full 3×3 coverage with full apertures
    /// equals the truth convolved with the box autocorrelation, divided by k⁴.
    fn oracle(hr: &RealImage, k: usize) -> RealImage {
        let (w, h) = hr.dims();
        RealImage::from_fn(w, h, hr.pitch(), |x, y| {
            let mut acc = 0.0;
            for a in 0..k {
                for a2 in 0..k {
                    for b in 0..k {
                        for b2 in 0..k {
                            let yy = (y + h + a2 - a) % h;
                            let xx = (x + w + b2 - b) % w;
                            acc += hr.get(xx, yy);
                        }
                    }
                }
            }
            acc / (k * k * k * k) as f64
        })
        .unwrap()
    }

    #[test]
    fn exact_shift_round_trip() {
        let hr = smooth(96);
        let set = simulate_frames(&hr, 3, &full_grid(3), &PsrOptions::default()).unwrap();
        let fused = psr_fuse(&set, &PsrOptions::default()).unwrap().image;
        let expect = oracle(&hr, 3);
        for (a, b) in fused.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (lo, hi) = hr.min_max();
        let db = psnr(&fused, &hr, hi - lo).unwrap();
        assert!(db >= 40.0, "{db}");
    }

    #[test]
    fn partial_coverage_is_interpolated_with_warning() {
        let hr = smooth(48);
        let opts = PsrOptions { aperture: Some(1) };
        let set = simulate_frames(&hr, 3, &[(0, 0)], &opts).unwrap();
        let r = psr_fuse(&set, &opts).unwrap();
        assert_eq!(r.filled, 48 * 48 - 16 * 16);
        assert!(!r.warnings.is_empty());
        // covered samples pass through; a pixel midway between two samples is their mean
        assert_eq!(r.image.get(1, 1), hr.get(1, 1));
        let mid = r.image.get(2, 1);
        let expect = hr.get(1, 1) + (hr.get(4, 1) - hr.get(1, 1)) / 3.0;
        assert!((mid - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_sets() {
        let img = smooth(24);
        let frame = |dx| ShiftedFrame { image: img.clone(), dx, dy: 0.0 };
        let set = ShiftedFrameSet { frames: vec![frame(0.0), frame(5.0)], lr_pitch: 1.0, factor: 3 };
        assert!(psr_fuse(&set, &PsrOptions::default()).is_err());
        let set = ShiftedFrameSet { frames: vec![], lr_pitch: 1.0, factor: 3 };
        assert!(psr_fuse(&set, &PsrOptions::default()).is_err());
        let set = ShiftedFrameSet { frames: vec![frame(0.0)], lr_pitch: 1.0, factor: 3 };
        assert!(psr_fuse(&set, &PsrOptions { aperture: Some(4) }).is_err());
    }
}
