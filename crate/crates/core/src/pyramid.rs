//! Resolution pyramid helpers for coarse-to-fine matching.

use crate::frame::{Frame, CHANNELS};

/// Dimensions per pyramid level, coarsest first, finest (the input) last.
/// Levels are produced by repeated 2x reduction (ceiling division so odd
/// sizes keep every pixel covered) and stop before the short side would
/// drop below `min_side`.
pub(crate) fn level_dims(h: usize, w: usize, min_side: usize) -> Vec<(usize, usize)> {
    let mut levels = vec![(h, w)];
    let (mut ch, mut cw) = (h, w);
    loop {
        let nh = ch.div_ceil(2);
        let nw = cw.div_ceil(2);
        if nh.min(nw) < min_side {
            break;
        }
        levels.push((nh, nw));
        (ch, cw) = (nh, nw);
    }
    levels.reverse();
    levels
}

/// Box-filter resize: each output pixel averages the source region its
/// index span covers. Exact for integer reduction ratios and safe for the
/// odd sizes produced by ceiling division.
pub(crate) fn resize_area(frame: &Frame, nh: usize, nw: usize) -> Frame {
    let (h, w) = frame.dims();
    if (h, w) == (nh, nw) {
        return frame.clone();
    }
    let src = frame.data();
    let mut out = vec![0f32; nh * nw * CHANNELS];
    for ox in 0..nh {
        let x0 = ox * h / nh;
        let x1 = ((ox + 1) * h / nh).max(x0 + 1).min(h);
        for oy in 0..nw {
            let y0 = oy * w / nw;
            let y1 = ((oy + 1) * w / nw).max(y0 + 1).min(w);
            let mut acc = [0f64; CHANNELS];
            for x in x0..x1 {
                let row = &src[(x * w + y0) * CHANNELS..(x * w + y1) * CHANNELS];
                for px in row.chunks_exact(CHANNELS) {
                    for c in 0..CHANNELS {
                        acc[c] += px[c] as f64;
                    }
                }
            }
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let at = (ox * nw + oy) * CHANNELS;
            for c in 0..CHANNELS {
                out[at + c] = (acc[c] / n) as f32;
            }
        }
    }
    Frame::from_raw(nh, nw, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_stop_before_min_side() {
        // 64 -> 32, stop (16 < 32)
        assert_eq!(level_dims(64, 64, 32), vec![(32, 32), (64, 64)]);
        // 96 -> 48, stop (24 < 32)
        assert_eq!(level_dims(96, 96, 32), vec![(48, 48), (96, 96)]);
        // 128 -> 64 -> 32, stop
        assert_eq!(level_dims(128, 128, 32), vec![(32, 32), (64, 64), (128, 128)]);
        // already below the bound: single level
        assert_eq!(level_dims(24, 24, 32), vec![(24, 24)]);
        // rectangular: the short side controls
        assert_eq!(level_dims(128, 48, 32), vec![(128, 48)]);
    }

    #[test]
    fn odd_sizes_use_ceiling_division() {
        assert_eq!(level_dims(65, 65, 32), vec![(33, 33), (65, 65)]);
    }

    #[test]
    fn resize_halves_by_block_average() {
        // 2x2 blocks of known values
        let f = Frame::from_fn(4, 4, |x, y| {
            let v = (x * 4 + y) as f32 / 16.0;
            [v, v, v]
        })
        .unwrap();
        let r = resize_area(&f, 2, 2);
        // top-left block: values (0,1,4,5)/16, mean 10/64
        let want = (0.0 + 1.0 + 4.0 + 5.0) / 4.0 / 16.0;
        assert!((r.px(0, 0)[0] - want).abs() < 1e-7);
    }

    #[test]
    fn resize_to_same_dims_is_identity() {
        let f = Frame::from_fn(5, 7, |x, y| [(x as f32) / 5.0, (y as f32) / 7.0, 0.3]).unwrap();
        assert_eq!(resize_area(&f, 5, 7), f);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let f = Frame::filled(7, 5, [0.25, 0.5, 0.75]).unwrap();
        let r = resize_area(&f, 4, 3);
        for x in 0..4 {
            for y in 0..3 {
                let px = r.px(x, y);
                assert!((px[0] - 0.25).abs() < 1e-7);
                assert!((px[1] - 0.5).abs() < 1e-7);
                assert!((px[2] - 0.75).abs() < 1e-7);
            }
        }
    }
}
