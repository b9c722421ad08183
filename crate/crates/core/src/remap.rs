//! Patch-vote remapping and blend accumulators.
//!
//! Remapping reconstructs a frame in the target's geometry by averaging,
//! for every target pixel, the `(2p+1)^2` source pixels voted for by the
//! field cells of its neighborhood. The kernel walks neighbor cells with
//! their clamped effective offsets, which makes an identity field reproduce
//! the source bit-exactly, borders included; together with f64 accumulation
//! that is what the oracle equalities in the test suite lean on.
//!
//! Accumulators hold running sums (not means) so that building sums of
//! remapped frames is pure addition; the single division happens when a
//! consumer asks for the mean.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, CHANNELS};
use crate::nnf::Nnf;

/// Shared kernel over f64 channel buffers.
fn remap_f64(src: &[f64], src_dims: (usize, usize), field: &Nnf, p: usize) -> Vec<f64> {
    let (sh, sw) = src_dims;
    let (h, w) = field.dims();
    let taps = ((2 * p + 1) * (2 * p + 1)) as f64;
    let pi = p as isize;
    let mut out = vec![0f64; h * w * CHANNELS];
    out.par_chunks_mut(w * CHANNELS).enumerate().for_each(|(x, row)| {
        for y in 0..w {
            let mut acc = [0f64; CHANNELS];
            for dx in -pi..=pi {
                let qx = (x as isize + dx).clamp(0, h as isize - 1) as usize;
                let ex = qx as isize - x as isize;
                for dy in -pi..=pi {
                    let qy = (y as isize + dy).clamp(0, w as isize - 1) as usize;
                    let ey = qy as isize - y as isize;
                    let (fx, fy) = field.get(qx, qy);
                    let sx = (fx as isize - ex).clamp(0, sh as isize - 1) as usize;
                    let sy = (fy as isize - ey).clamp(0, sw as isize - 1) as usize;
                    let at = (sx * sw + sy) * CHANNELS;
                    for c in 0..CHANNELS {
                        acc[c] += src[at + c];
                    }
                }
            }
            for c in 0..CHANNELS {
                row[y * CHANNELS + c] = acc[c] / taps;
            }
        }
    });
    out
}

/// Reconstructs the source in the field's target geometry.
pub fn remap(source: &Frame, field: &Nnf, patch_radius: usize) -> Result<Frame> {
    if field.source_dims() != source.dims() {
        return Err(Error::DimensionMismatch {
            context: "remap source vs field bounds",
            left_h: source.height(),
            left_w: source.width(),
            right_h: field.source_dims().0,
            right_w: field.source_dims().1,
        });
    }
    let src: Vec<f64> = source.data().iter().map(|v| *v as f64).collect();
    let out = remap_f64(&src, source.dims(), field, patch_radius);
    let (h, w) = field.dims();
    let data = out.iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    Ok(Frame::from_raw(h, w, data))
}

/// Running sum of frames sharing one geometry.
#[derive(Clone, Debug)]
pub struct BlendAccumulator {
    height: usize,
    width: usize,
    sum: Vec<f64>,
    count: u32,
}

impl BlendAccumulator {
    pub fn zero(dims: (usize, usize)) -> Self {
        Self {
            height: dims.0,
            width: dims.1,
            sum: vec![0f64; dims.0 * dims.1 * CHANNELS],
            count: 0,
        }
    }

    pub fn from_frame(frame: &Frame) -> Self {
        let (height, width) = frame.dims();
        Self {
            height,
            width,
            sum: frame.data().iter().map(|v| *v as f64).collect(),
            count: 1,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    #[cfg(test)]
    pub(crate) fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn add_frame(&mut self, frame: &Frame) -> Result<()> {
        self.check_dims(frame.dims())?;
        for (s, v) in self.sum.iter_mut().zip(frame.data()) {
            *s += *v as f64;
        }
        self.count += 1;
        Ok(())
    }

    pub fn add(&mut self, other: &BlendAccumulator) -> Result<()> {
        self.check_dims(other.dims())?;
        for (s, v) in self.sum.iter_mut().zip(&other.sum) {
            *s += *v;
        }
        self.count += other.count;
        Ok(())
    }

    /// Subtracts one frame from the sum, dropping the count by one. Used by
    /// the sliding-window decomposition where the center frame appears in
    /// both half-window sums.
    pub fn subtract_frame(&mut self, frame: &Frame) -> Result<()> {
        self.check_dims(frame.dims())?;
        if self.count == 0 {
            return Err(Error::InvalidConfig("subtract from empty accumulator".into()));
        }
        for (s, v) in self.sum.iter_mut().zip(frame.data()) {
            *s -= *v as f64;
        }
        self.count -= 1;
        Ok(())
    }

    /// `sum / count` as a frame. The accumulator must have seen at least one
    /// frame.
    pub fn mean(&self) -> Result<Frame> {
        if self.count == 0 {
            return Err(Error::InvalidConfig("mean of empty accumulator".into()));
        }
        let n = self.count as f64;
        let data = self.sum.iter().map(|s| (s / n).clamp(0.0, 1.0) as f32).collect();
        Ok(Frame::from_raw(self.height, self.width, data))
    }

    fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if dims == (self.height, self.width) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "accumulate",
                left_h: self.height,
                left_w: self.width,
                right_h: dims.0,
                right_w: dims.1,
            })
        }
    }
}

/// `a + b`, elementwise sums and summed counts.
pub fn accumulate(a: &BlendAccumulator, b: &BlendAccumulator) -> Result<BlendAccumulator> {
    let mut out = a.clone();
    out.add(b)?;
    Ok(out)
}

/// Remaps an accumulator into another geometry: the mean is remapped, then
/// scaled back by the count, so the result still behaves like a sum of
/// `count` frames in the new geometry.
pub fn remap_accumulator(acc: &BlendAccumulator, field: &Nnf, patch_radius: usize) -> Result<BlendAccumulator> {
    if field.source_dims() != acc.dims() {
        return Err(Error::DimensionMismatch {
            context: "remap accumulator vs field bounds",
            left_h: acc.dims().0,
            left_w: acc.dims().1,
            right_h: field.source_dims().0,
            right_w: field.source_dims().1,
        });
    }
    if acc.count == 0 {
        return Ok(BlendAccumulator::zero(field.dims()));
    }
    let n = acc.count as f64;
    let mean: Vec<f64> = acc.sum.iter().map(|s| s / n).collect();
    let mut remapped = remap_f64(&mean, acc.dims(), field, patch_radius);
    for v in &mut remapped {
        *v *= n;
    }
    let (h, w) = field.dims();
    Ok(BlendAccumulator {
        height: h,
        width: w,
        sum: remapped,
        count: acc.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnf::{init_random, Nnf};

    fn texture(h: usize, w: usize, seed: u64) -> Frame {
        Frame::from_fn(h, w, |x, y| {
            let v = crate::rng::draw(seed, 0, 0, x as u32, y as u32, 0);
            [
                (v & 0xff) as f32 / 255.0,
                ((v >> 8) & 0xff) as f32 / 255.0,
                ((v >> 16) & 0xff) as f32 / 255.0,
            ]
        })
        .unwrap()
    }

    #[test]
    fn identity_field_reproduces_source_exactly() {
        let f = texture(9, 7, 1);
        let id = Nnf::identity((9, 7), (9, 7));
        let out = remap(&f, &id, 2).unwrap();
        assert_eq!(out, f, "identity remap must be bit-exact, borders included");
    }

    #[test]
    fn constant_shift_moves_interior_pixels() {
        let f = texture(5, 5, 2);
        // field sending target (x, y) to source (x+1, y)
        let mut cells = Vec::new();
        for x in 0..5u32 {
            for y in 0..5u32 {
                cells.push(((x + 1).min(4), y));
            }
        }
        let field = Nnf::from_cells((5, 5), (5, 5), cells);
        let out = remap(&f, &field, 1).unwrap();
        let want = f.px(3, 2);
        let got = out.px(2, 2);
        for c in 0..3 {
            assert!(
                (want[c] - got[c]).abs() < 1e-6,
                "interior pixel should equal the shifted source"
            );
        }
    }

    #[test]
    fn output_range_stays_within_source_range() {
        let f = texture(12, 12, 3);
        let field = init_random((12, 12), (12, 12), 7);
        let out = remap(&f, &field, 2).unwrap();
        let lo = f.data().iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = f.data().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        for v in out.data() {
            assert!(*v >= lo - 1e-6 && *v <= hi + 1e-6);
        }
    }

    #[test]
    fn accumulator_mean_divides_once() {
        let a = texture(4, 4, 4);
        let b = texture(4, 4, 5);
        let mut acc = BlendAccumulator::from_frame(&a);
        acc.add_frame(&b).unwrap();
        assert_eq!(acc.count(), 2);
        let mean = acc.mean().unwrap();
        for i in 0..mean.data().len() {
            let want = ((a.data()[i] as f64 + b.data()[i] as f64) / 2.0) as f32;
            assert_eq!(mean.data()[i], want);
        }
    }

    #[test]
    fn adding_zero_accumulator_changes_nothing() {
        let a = BlendAccumulator::from_frame(&texture(3, 5, 6));
        let z = BlendAccumulator::zero((3, 5));
        let out = accumulate(&a, &z).unwrap();
        assert_eq!(out.count(), 1);
        assert_eq!(out.sum(), a.sum());
    }

    #[test]
    fn remap_accumulator_matches_remapping_each_frame() {
        let a = texture(8, 8, 7);
        let b = texture(8, 8, 8);
        let field = init_random((8, 8), (8, 8), 9);
        let mut acc = BlendAccumulator::from_frame(&a);
        acc.add_frame(&b).unwrap();
        let remapped = remap_accumulator(&acc, &field, 1).unwrap();
        // linearity: remapping the sum equals summing the remapped parts
        let ra = remap_accumulator(&BlendAccumulator::from_frame(&a), &field, 1).unwrap();
        let rb = remap_accumulator(&BlendAccumulator::from_frame(&b), &field, 1).unwrap();
        let direct = accumulate(&ra, &rb).unwrap();
        assert_eq!(remapped.count(), 2);
        for (x, y) in remapped.sum().iter().zip(direct.sum()) {
            assert!((x - y).abs() < 1e-9, "accumulator remap must be linear");
        }
    }

    #[test]
    fn remap_accumulator_identity_is_exact() {
        let a = texture(6, 6, 10);
        let b = texture(6, 6, 11);
        let mut acc = BlendAccumulator::from_frame(&a);
        acc.add_frame(&b).unwrap();
        let id = Nnf::identity((6, 6), (6, 6));
        let out = remap_accumulator(&acc, &id, 3).unwrap();
        for (x, y) in out.sum().iter().zip(acc.sum()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn subtract_frame_undoes_add_frame() {
        let a = texture(4, 4, 12);
        let b = texture(4, 4, 13);
        let mut acc = BlendAccumulator::from_frame(&a);
        acc.add_frame(&b).unwrap();
        acc.subtract_frame(&b).unwrap();
        assert_eq!(acc.count(), 1);
        for (x, y) in acc.sum().iter().zip(BlendAccumulator::from_frame(&a).sum()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let a = BlendAccumulator::from_frame(&texture(4, 4, 1));
        let b = BlendAccumulator::from_frame(&texture(4, 5, 1));
        assert!(accumulate(&a, &b).is_err());
        let field = Nnf::identity((4, 4), (5, 5));
        assert!(remap(&texture(4, 4, 1), &field, 1).is_err());
    }
}
