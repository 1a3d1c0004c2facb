use std::fmt::Write as _;

use super::metrics::{fmt_sig, moving_average};
use crate::error::Result;

const W: f64 = 800.0;
const H: f64 = 400.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 45.0;

/// Loss trace as SVG: raw per-step loss in a light stroke, its trailing
/// moving average in a dark one.
pub fn loss_svg(losses: &[f64], window: usize, title: &str) -> Result<String> {
    let smooth = moving_average(losses, window)?;
    let finite = losses.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo.min(0.0), hi)
    } else {
        (0.0, 1.0)
    };
    let n = losses.len().max(2) - 1;
    let x = |i: usize| PAD_L + (W - PAD_L - PAD_R) * i as f64 / n as f64;
    let y = |v: f64| PAD_T + (H - PAD_T - PAD_B) * (1.0 - (v - lo) / (hi - lo));
    let path = |series: &[f64]| {
        let mut d = String::new();
        for (i, v) in series.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let _ = write!(d, "{}{:.1},{:.1} ", if d.is_empty() { "M" } else { "L" }, x(i), y(*v));
        }
        d
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let (x0, x1, y0, y1) = (PAD_L, W - PAD_R, PAD_T, H - PAD_B);
    let _ = writeln!(s, r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y(v) + 4.0,
            fmt_sig(v)
        );
    }
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">0</text>"#, y1 + 16.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{}</text>"#, y1 + 16.0, losses.len().saturating_sub(1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">optimizer step</text>"#, (x0 + x1) / 2.0, H - 8.0);
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#9ecae1" stroke-width="0.8"/>"##, path(losses));
    let _ = writeln!(s, r##"<path d="{}" fill="none" stroke="#08306b" stroke-width="1.8"/>"##, path(&smooth));
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="end" fill="#08306b">moving average, window {window}</text>"##,
        x1,
        y0 + 14.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}
