//! Built-in oracle checks: with the matcher stubbed to identity fields,
//! every blending path must reproduce exact truncated-window means, the
//! table build and query must consume the documented cell counts, and the
//! query-coverage checker must reject a corrupted walk. These validate the
//! index bookkeeping independently of match quality.

use patchblend::blend::{
    blend_accurate, blend_balanced, blend_fast, build_blending_table, build_remapping_table,
    query_blending_table_traced, verify_query_coverage, BlendConfig, BlendMode, Orientation, Window,
};
use patchblend::nnf::Matcher;
use patchblend::{Frame, Role, Video};

type Check = (&'static str, fn() -> Result<(), String>);

pub fn run() -> anyhow::Result<()> {
    let checks: &[Check] = &[
        ("stub blend modes equal the truncated window mean", stub_modes_match_mean),
        ("zero window returns the style video bit-exactly", zero_window_identity),
        ("table build makes 0/1/12 estimations at n=1/2/8", build_counts),
        ("query (0,6) consumes cells (6,0),(5,1),(3,2)", documented_trace),
        ("every query tiles its interval within the cell budget", query_tiling),
        ("coverage checker rejects a corrupted advance", corrupted_walk_rejected),
        ("fast-mode total at n=64 stays within 4 n log2 n", fast_total_bound),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("pass: {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL: {name} ({why})");
            }
        }
    }
    if failed > 0 {
        anyhow::bail!("{failed} of {} selftest properties failed", checks.len());
    }
    println!("all {} selftest properties passed", checks.len());
    Ok(())
}

/// Frames with exactly representable graded values, so stub-path arithmetic
/// has closed-form expected outputs.
fn graded_videos(n: usize) -> (Video, Video) {
    let frames: Vec<Frame> = (0..n)
        .map(|j| Frame::filled(12, 12, [j as f32 / 128.0; 3]).unwrap())
        .collect();
    (
        Video::new(frames.clone(), Role::Guide).unwrap(),
        Video::new(frames, Role::Style).unwrap(),
    )
}

fn cfg(mode: BlendMode, window: Window) -> BlendConfig {
    BlendConfig {
        mode,
        window,
        ..BlendConfig::default()
    }
}

fn mean_of(style: &Video, lo: usize, hi: usize) -> Vec<f32> {
    let len = style.frame(0).data().len();
    let mut sum = vec![0.0f64; len];
    for j in lo..=hi {
        for (s, v) in sum.iter_mut().zip(style.frame(j).data()) {
            *s += *v as f64;
        }
    }
    sum.iter().map(|s| (s / (hi - lo + 1) as f64) as f32).collect()
}

fn expect(ok: bool, why: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why)
    }
}

fn stub_modes_match_mean() -> Result<(), String> {
    let n = 8;
    let (guide, style) = graded_videos(n);
    let matcher = Matcher::identity_stub();
    for m in [1usize, 3, n] {
        let window = if m == n { Window::Full } else { Window::Frames(m) };
        let outs = [
            ("fast", blend_fast(&guide, &style, &cfg(BlendMode::Fast, window), &matcher)),
            ("balanced", blend_balanced(&guide, &style, &cfg(BlendMode::Balanced, window), &matcher)),
            ("accurate", blend_accurate(&guide, &style, &cfg(BlendMode::Accurate, window), &matcher)),
        ];
        for (mode, out) in outs {
            let out = out.map_err(|e| format!("{mode}: {e}"))?;
            for i in 0..n {
                let want = mean_of(&style, i.saturating_sub(m), (i + m).min(n - 1));
                let got = out.frame(i).data();
                let diff = got
                    .iter()
                    .zip(&want)
                    .map(|(g, w)| (g - w).abs())
                    .fold(0.0f32, f32::max);
                expect(
                    diff <= 1e-6,
                    format!("{mode} frame {i} off the window mean by {diff} at window {m}"),
                )?;
            }
        }
    }
    Ok(())
}

fn zero_window_identity() -> Result<(), String> {
    let (guide, style) = graded_videos(5);
    let matcher = Matcher::identity_stub();
    let modes = [
        ("fast", blend_fast(&guide, &style, &cfg(BlendMode::Fast, Window::Frames(0)), &matcher)),
        ("balanced", blend_balanced(&guide, &style, &cfg(BlendMode::Balanced, Window::Frames(0)), &matcher)),
        ("accurate", blend_accurate(&guide, &style, &cfg(BlendMode::Accurate, Window::Frames(0)), &matcher)),
    ];
    for (mode, out) in modes {
        let out = out.map_err(|e| format!("{mode}: {e}"))?;
        for i in 0..5 {
            expect(
                out.frame(i).data() == style.frame(i).data(),
                format!("{mode} frame {i} is not bit-equal at window 0"),
            )?;
        }
    }
    Ok(())
}

fn build_counts() -> Result<(), String> {
    for (n, want) in [(1u64, 0u64), (2, 1), (8, 12)] {
        let (guide, style) = graded_videos(n as usize);
        let matcher = Matcher::identity_stub();
        build_remapping_table(&guide, &style, &cfg(BlendMode::Fast, Window::Full), &matcher, Orientation::Forward)
            .map_err(|e| e.to_string())?;
        expect(
            matcher.nnf_count() == want,
            format!("n={n} build made {} estimations, expected {want}", matcher.nnf_count()),
        )?;
    }
    Ok(())
}

fn documented_trace() -> Result<(), String> {
    let (guide, style) = graded_videos(8);
    let matcher = Matcher::identity_stub();
    let c = cfg(BlendMode::Fast, Window::Full);
    let rem = build_remapping_table(&guide, &style, &c, &matcher, Orientation::Forward).map_err(|e| e.to_string())?;
    let table = build_blending_table(&rem).map_err(|e| e.to_string())?;
    let (acc, trace) =
        query_blending_table_traced(&table, &guide, 0, 6, &c, &matcher).map_err(|e| e.to_string())?;
    expect(
        trace == vec![(6, 0), (5, 1), (3, 2)],
        format!("walk consumed {trace:?}"),
    )?;
    expect(acc.count() == 7, format!("aggregated {} frames, expected 7", acc.count()))
}

fn query_tiling() -> Result<(), String> {
    let n = 16;
    let (guide, style) = graded_videos(n);
    let matcher = Matcher::identity_stub();
    let c = cfg(BlendMode::Fast, Window::Full);
    let rem = build_remapping_table(&guide, &style, &c, &matcher, Orientation::Forward).map_err(|e| e.to_string())?;
    let table = build_blending_table(&rem).map_err(|e| e.to_string())?;
    for l in 0..n {
        for r in l..n {
            let (acc, trace) =
                query_blending_table_traced(&table, &guide, l, r, &c, &matcher).map_err(|e| e.to_string())?;
            expect(
                verify_query_coverage(&trace, l, r),
                format!("trace {trace:?} does not tile [{l}, {r}]"),
            )?;
            expect(
                acc.count() as usize == r - l + 1,
                format!("[{l}, {r}] aggregated {} frames", acc.count()),
            )?;
            let len = r - l + 1;
            let log = usize::BITS as usize - 1 - len.next_power_of_two().leading_zeros() as usize;
            let budget = if l == 0 { log + 1 } else { 2 * log + 1 };
            expect(
                trace.len() <= budget,
                format!("[{l}, {r}] consumed {} cells, budget {budget}", trace.len()),
            )?;
        }
    }
    Ok(())
}

fn corrupted_walk_rejected() -> Result<(), String> {
    let good = vec![(6, 0), (5, 1), (3, 2)];
    expect(verify_query_coverage(&good, 0, 6), "valid walk rejected".into())?;
    // corrupt the advance: pretend the level-1 cell moved one frame too far
    let bad_advance = vec![(6, 0), (5, 1), (2, 2)];
    expect(
        !verify_query_coverage(&bad_advance, 0, 6),
        "corrupted advance accepted".into(),
    )?;
    let dropped_cell = vec![(6, 0), (3, 2)];
    expect(
        !verify_query_coverage(&dropped_cell, 0, 6),
        "dropped cell accepted".into(),
    )?;
    let truncated = vec![(6, 0), (5, 1)];
    expect(!verify_query_coverage(&truncated, 0, 6), "short walk accepted".into())
}

fn fast_total_bound() -> Result<(), String> {
    let n = 64;
    let (guide, style) = graded_videos(n);
    for m in [0usize, 5, 30, n] {
        let matcher = Matcher::identity_stub();
        let window = if m == n { Window::Full } else { Window::Frames(m) };
        blend_fast(&guide, &style, &cfg(BlendMode::Fast, window), &matcher).map_err(|e| e.to_string())?;
        let bound = 4 * n as u64 * 6;
        expect(
            matcher.nnf_count() <= bound,
            format!("window {m}: {} estimations exceed {bound}", matcher.nnf_count()),
        )?;
    }
    Ok(())
}
