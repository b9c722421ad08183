//! Fixture helpers shared by the integration suites.

use std::path::Path;
use std::process::{Command, Output};

use patchblend::io::save_sequence;
use patchblend::{Frame, Role, Video};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_patchblend")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should spawn")
}

/// Deterministic hash noise in [0, 1), decoupled across (seed, x, y, c).
pub fn hash_unit(seed: u64, x: usize, y: usize, c: usize) -> f64 {
    let mut h = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((x as u64) << 40)
        .wrapping_add((y as u64) << 20)
        .wrapping_add(c as u64);
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Random texture frame with all values on the 8-bit grid, so PNG
/// round-trips are bit-exact.
pub fn texture(h: usize, w: usize, seed: u64) -> Frame {
    Frame::from_fn(h, w, |x, y| {
        let v = |c: usize| ((hash_unit(seed, x, y, c) * 255.0).floor() / 255.0) as f32;
        [v(0), v(1), v(2)]
    })
    .unwrap()
}

pub fn texture_video(n: usize, h: usize, w: usize, seed: u64, role: Role) -> Video {
    let frames = (0..n).map(|i| texture(h, w, seed + i as u64)).collect();
    Video::new(frames, role).unwrap()
}

/// Writes a guide/style fixture pair; the style adds quantized per-frame
/// noise to the guide so matching has real work to do.
pub fn write_pair(dir: &Path, n: usize, h: usize, w: usize, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let guide_dir = dir.join("guide");
    let style_dir = dir.join("style");
    let guide = texture_video(n, h, w, seed, Role::Guide);
    let style_frames: Vec<Frame> = (0..n)
        .map(|i| {
            let g = guide.frame(i);
            Frame::from_fn(h, w, |x, y| {
                let px = g.px(x, y);
                let mut out = [0f32; 3];
                for c in 0..3 {
                    let noise = (hash_unit(seed + 999 + i as u64, x, y, c) - 0.5) * 0.12;
                    let q = ((px[c] as f64 + noise).clamp(0.0, 1.0) * 255.0).round() / 255.0;
                    out[c] = q as f32;
                }
                out
            })
            .unwrap()
        })
        .collect();
    let style = Video::new(style_frames, Role::Style).unwrap();
    save_sequence(&guide, &guide_dir).unwrap();
    save_sequence(&style, &style_dir).unwrap();
    (guide_dir, style_dir)
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

// each test target compiles its own copy; not every suite lists directories
#[allow(dead_code)]
pub fn png_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(".png"))
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}
