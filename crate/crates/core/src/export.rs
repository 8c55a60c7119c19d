//! File export: summary JSON, per-frame CSV, heatmap JSON, and the limb bar
//! chart SVG. All floating-point output goes through [`fmt_sig9`] so repeated
//! runs are byte-identical.

use std::fmt::Write as _;

use crate::aggregation::{DisplayConfig, GroupKey, LimbWorkFrame, SessionSummary, GROUP_KEYS};
use crate::muscle_model::MuscleGroup;

/// Formats a float with 9 significant digits, deterministically.
///
/// Plain decimal notation is used when the exponent is moderate, scientific
/// otherwise; integers shed their trailing fraction. `1.0 -> "1"`,
/// `374.195463 -> "374.195463"`, `1.2345e-7 -> "1.2345e-7"`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Not valid JSON numbers; callers avoid these, but stay total.
        return if x.is_nan() {
            "null".to_string()
        } else if x > 0.0 {
            "1e999".to_string()
        } else {
            "-1e999".to_string()
        };
    }
    let sci = format!("{:.8e}", x);
    // Rust renders e.g. "3.74195463e2"; split mantissa and exponent.
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..9).contains(&exp) {
        // Re-render in plain decimal with exactly 9 significant digits.
        let digits = 8 - exp.min(8);
        let prec = digits.max(0) as usize;
        let plain = format!("{:.*}", prec, x);
        trim_zeros(&plain)
    } else {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        let t = t.strip_suffix('.').unwrap_or(t);
        t.to_string()
    } else {
        s.to_string()
    }
}

/// Renders the session summary as a stable JSON document.
pub fn summary_json(s: &SessionSummary) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"duration_s\": {},", fmt_sig9(s.duration_s));
    let _ = writeln!(out, "  \"frame_count\": {},", s.frame_count);
    let _ = writeln!(out, "  \"infeasible_frames\": {},", s.infeasible_frames);
    let _ = writeln!(out, "  \"overall\": {},", fmt_sig9(s.overall));
    out.push_str("  \"limbs\": {\n");
    let _ = writeln!(out, "    \"left_upper\": {},", fmt_sig9(s.limbs.left_upper));
    let _ = writeln!(out, "    \"right_upper\": {},", fmt_sig9(s.limbs.right_upper));
    let _ = writeln!(out, "    \"left_lower\": {},", fmt_sig9(s.limbs.left_lower));
    let _ = writeln!(out, "    \"right_lower\": {}", fmt_sig9(s.limbs.right_lower));
    out.push_str("  },\n");
    out.push_str("  \"groups\": {\n");
    for (i, key) in GROUP_KEYS.iter().enumerate() {
        let comma = if i + 1 < GROUP_KEYS.len() { "," } else { "" };
        let _ = writeln!(out, "    \"{}\": {}{}", key.label(), fmt_sig9(s.groups[i]), comma);
    }
    out.push_str("  },\n");
    out.push_str("  \"peak_window\": {\n");
    for (i, key) in GROUP_KEYS.iter().enumerate() {
        let comma = if i + 1 < GROUP_KEYS.len() { "," } else { "" };
        let _ = writeln!(
            out,
            "    \"{}\": {}{}",
            key.label(),
            fmt_sig9(s.peak_window[i]),
            comma
        );
    }
    out.push_str("  },\n");
    out.push_str("  \"muscles\": {\n");
    for (i, (name, work)) in s.muscles.iter().enumerate() {
        let comma = if i + 1 < s.muscles.len() { "," } else { "" };
        let _ = writeln!(out, "    \"{}\": {}{}", name, fmt_sig9(*work), comma);
    }
    out.push_str("  }\n}\n");
    out
}

/// Per-frame CSV: `t_ms`, the 16 group work increments, then the 5 limb
/// values, all in newton-seconds.
pub fn groups_csv(
    t_ms: &[u64],
    groups: &[[f64; 16]],
    limbs: &[LimbWorkFrame],
) -> String {
    let mut out = String::new();
    out.push_str("t_ms");
    for key in GROUP_KEYS {
        let _ = write!(out, ",{}", key.label());
    }
    out.push_str(",left_upper,right_upper,left_lower,right_lower,overall\n");
    for i in 0..t_ms.len() {
        let _ = write!(out, "{}", t_ms[i]);
        for g in 0..16 {
            let _ = write!(out, ",{}", fmt_sig9(groups[i][g]));
        }
        let l = &limbs[i];
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            fmt_sig9(l.left_upper),
            fmt_sig9(l.right_upper),
            fmt_sig9(l.left_lower),
            fmt_sig9(l.right_lower),
            fmt_sig9(l.overall)
        );
    }
    out
}

/// Heatmap JSON: per group the session-accumulated work normalized by the
/// largest group total, with the display color on the turquoise-to-red
/// gradient. This is the end-of-session avatar coloring.
pub fn heatmap_json(summary: &SessionSummary, cfg: &DisplayConfig) -> String {
    let max = summary.groups.iter().cloned().fold(0.0f64, f64::max);
    let mut out = String::new();
    out.push_str("{\n");
    for (i, key) in GROUP_KEYS.iter().enumerate() {
        let normalized = if max > 0.0 { summary.groups[i] / max } else { 0.0 };
        let rgb = crate::aggregation::color_map_with(normalized, cfg);
        let comma = if i + 1 < GROUP_KEYS.len() { "," } else { "" };
        let _ = writeln!(
            out,
            "  \"{}\": {{\"work\": {}, \"normalized\": {}, \"rgb\": [{}, {}, {}]}}{}",
            key.label(),
            fmt_sig9(summary.groups[i]),
            fmt_sig9(normalized),
            rgb[0],
            rgb[1],
            rgb[2],
            comma
        );
    }
    out.push_str("}\n");
    out
}

/// Grouped bar chart of the four limb totals plus the overall value,
/// rendered directly as an 800x400 SVG (blue/green/yellow/red/white).
pub fn limbs_svg(summary: &SessionSummary) -> String {
    let limbs = &summary.limbs;
    let bars: [(&str, f64, &str); 5] = [
        ("left upper", limbs.left_upper, "#1f77d0"),
        ("right upper", limbs.right_upper, "#2ca02c"),
        ("left lower", limbs.left_lower, "#e6c700"),
        ("right lower", limbs.right_lower, "#d62728"),
        ("overall", summary.overall, "#ffffff"),
    ];
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max).max(1e-12);
    let (w, h) = (800.0, 400.0);
    let (margin, base_y, plot_h) = (40.0, 360.0, 300.0);
    let slot = (w - 2.0 * margin) / 5.0;
    let bar_w = slot * 0.6;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#f4f4f4\"/>"
    );
    let _ = writeln!(
        out,
        "  <line x1=\"{margin}\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" stroke=\"#333\"/>",
        w - margin
    );
    for (i, (label, value, color)) in bars.iter().enumerate() {
        let bh = plot_h * value / max;
        let x = margin + i as f64 * slot + (slot - bar_w) / 2.0;
        let y = base_y - bh;
        let _ = writeln!(
            out,
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" stroke=\"#333\"/>",
            fmt_sig9(x),
            fmt_sig9(y),
            fmt_sig9(bar_w),
            fmt_sig9(bh)
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{label}</text>",
            fmt_sig9(x + bar_w / 2.0),
            base_y + 20.0
        );
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            fmt_sig9(x + bar_w / 2.0),
            fmt_sig9(y - 6.0),
            fmt_sig9((value * 10.0).round() / 10.0)
        );
    }
    let _ = writeln!(
        out,
        "  <text x=\"{margin}\" y=\"24\" font-size=\"16\">muscle work per limb (N\u{b7}s)</text>"
    );
    out.push_str("</svg>\n");
    out
}

/// Stable label for a `(group, side)` pair, e.g. `deltoideus_l`.
impl GroupKey {
    pub fn label(&self) -> String {
        let side = match self.side {
            crate::muscle_model::Side::Left => "l",
            crate::muscle_model::Side::Right => "r",
        };
        format!("{}_{}", group_slug(self.group), side)
    }
}

pub(crate) fn group_slug(g: MuscleGroup) -> &'static str {
    match g {
        MuscleGroup::Deltoideus => "deltoideus",
        MuscleGroup::PectoralisMajor => "pectoralis_major",
        MuscleGroup::TricepsBrachii => "triceps_brachii",
        MuscleGroup::BicepsBrachiiBrachialis => "biceps_brachii_brachialis",
        MuscleGroup::LatissimusDorsi => "latissimus_dorsi",
        MuscleGroup::GluteusMaximus => "gluteus_maximus",
        MuscleGroup::Ischiocrurales => "ischiocrurales",
        MuscleGroup::QuadricepsFemoris => "quadriceps_femoris",
    }
}
