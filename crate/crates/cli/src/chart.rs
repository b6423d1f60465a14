//! SVG charts rendered from a `frb_report_v1` document alone.

use std::fmt::Write;

use frb_core::analysis::report::{sanitize, CampaignReport};
use frb_core::analysis::survival::format_hhmm;

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const TP_FILL: &str = "#3b6ea8";
const FP_FILL: &str = "#e8a33d";

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// One rendered chart.
pub struct Svg {
    pub file_name: String,
    pub body: String,
}

/// Survival plots (one per bug), the intersection chart and the consistency chart.
pub fn render_all(report: &CampaignReport) -> Vec<Svg> {
    let mut out = Vec::new();
    for (i, bug) in report.bugs.iter().enumerate() {
        out.push(Svg {
            file_name: format!("survival_{}.svg", sanitize(&bug.bug_id)),
            body: survival(report, i),
        });
    }
    out.push(Svg {
        file_name: "intersections.svg".into(),
        body: intersections(report),
    });
    out.push(Svg {
        file_name: "consistency.svg".into(),
        body: consistency(report),
    });
    out
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title)).unwrap();
    s
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn f(v: f64) -> String {
    format!("{v:.2}")
}

fn survival(report: &CampaignReport, bug_index: usize) -> String {
    let bug = &report.bugs[bug_index];
    let title = if bug.false_positive {
        format!("Survival of {} (false positive)", bug.bug_id)
    } else {
        format!("Survival of {}", bug.bug_id)
    };
    let mut s = header(&title);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let horizon = report.horizon_s.max(1.0);
    let x = |t: f64| LEFT + pw * (t / horizon).clamp(0.0, 1.0);
    let y = |p: f64| TOP + ph * (1.0 - p.clamp(0.0, 1.0));

    writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#).unwrap();
    writeln!(s, r#"<path d="M{} {}V{}H{}"/>"#, f(LEFT), f(TOP), f(TOP + ph), f(LEFT + pw)).unwrap();
    writeln!(s, "</g>").unwrap();
    for k in 0..=4 {
        let p = k as f64 / 4.0;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, f(LEFT - 6.0), f(y(p) + 4.0), f(p)).unwrap();
        let t = horizon * p;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, f(x(t)), f(TOP + ph + 18.0), format_hhmm(t)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">time (HH:MM)</text>"#, f(LEFT + pw / 2.0), f(H - 10.0)).unwrap();

    for (fi, fz) in report.fuzzers.iter().enumerate() {
        let Some(stats) = fz.bugs.iter().find(|b| b.bug_id == bug.bug_id) else {
            continue;
        };
        let color = PALETTE[fi % PALETTE.len()];
        let pts = &stats.survival.points;
        if pts.is_empty() {
            continue;
        }
        // CI band: upper edge forward, lower edge backward, both as steps.
        let mut band = format!("M{} {}", f(x(pts[0].time_s)), f(y(pts[0].ci_high)));
        for w in pts.windows(2) {
            write!(band, "H{}V{}", f(x(w[1].time_s)), f(y(w[1].ci_high))).unwrap();
        }
        let last = pts.last().unwrap();
        write!(band, "V{}", f(y(last.ci_low))).unwrap();
        for w in pts.windows(2).rev() {
            write!(band, "H{}V{}", f(x(w[0].time_s)), f(y(w[0].ci_low))).unwrap();
        }
        band.push('Z');
        writeln!(s, r#"<path class="ci" d="{band}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#).unwrap();

        let mut step = format!("M{} {}", f(x(pts[0].time_s)), f(y(pts[0].prob)));
        for w in pts.windows(2) {
            write!(step, "H{}V{}", f(x(w[1].time_s)), f(y(w[1].prob))).unwrap();
        }
        writeln!(s, r#"<path class="step" d="{step}" fill="none" stroke="{color}" stroke-width="2"/>"#).unwrap();

        let ly = TOP + 14.0 + 18.0 * fi as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}">{} ({}/{})</text>"#,
            f(W - RIGHT + 12.0),
            f(ly - 10.0),
            f(W - RIGHT + 30.0),
            f(ly),
            esc(&fz.fuzzer),
            stats.trials_triggered,
            fz.trials
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn intersections(report: &CampaignReport) -> String {
    let mut s = header("Bugs triggered per fuzzer subset");
    let groups = &report.intersections;
    let names: Vec<&str> = report.fuzzers.iter().map(|f| f.fuzzer.as_str()).collect();
    let matrix_h = 18.0 * names.len() as f64;
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM - matrix_h - 10.0);
    let max = groups.iter().map(|g| g.tp + g.fp).max().unwrap_or(0).max(1) as f64;
    let col = pw / groups.len().max(1) as f64;
    let bar_w = (col * 0.6).min(40.0);
    let base = TOP + ph;

    writeln!(s, r#"<path class="axis" d="M{} {}V{}H{}" stroke="black" fill="none"/>"#, f(LEFT), f(TOP), f(base), f(LEFT + pw)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, f(LEFT - 6.0), f(TOP + 4.0), max as u64).unwrap();
    for (gi, g) in groups.iter().enumerate() {
        let cx = LEFT + col * (gi as f64 + 0.5);
        let tp_h = ph * g.tp as f64 / max;
        let fp_h = ph * g.fp as f64 / max;
        if g.tp > 0 {
            writeln!(
                s,
                r#"<rect class="tp" x="{}" y="{}" width="{}" height="{}" fill="{TP_FILL}"/>"#,
                f(cx - bar_w / 2.0),
                f(base - tp_h),
                f(bar_w),
                f(tp_h)
            )
            .unwrap();
        }
        if g.fp > 0 {
            writeln!(
                s,
                r#"<rect class="fp" x="{}" y="{}" width="{}" height="{}" fill="{FP_FILL}" stroke="black" stroke-dasharray="3 2"/>"#,
                f(cx - bar_w / 2.0),
                f(base - tp_h - fp_h),
                f(bar_w),
                f(fp_h)
            )
            .unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, f(cx), f(base - tp_h - fp_h - 4.0), g.tp + g.fp).unwrap();
        for (ni, name) in names.iter().enumerate() {
            let member = g.fuzzers.iter().any(|x| x == name);
            let cy = base + 18.0 + 18.0 * ni as f64;
            let fill = if member { "black" } else { "#dddddd" };
            writeln!(s, r#"<circle cx="{}" cy="{}" r="5" fill="{fill}"/>"#, f(cx), f(cy)).unwrap();
        }
    }
    for (ni, name) in names.iter().enumerate() {
        let cy = base + 18.0 + 18.0 * ni as f64;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, f(LEFT - 6.0), f(cy + 4.0), esc(name)).unwrap();
    }
    let lx = W - RIGHT + 12.0;
    writeln!(s, r#"<rect x="{}" y="{}" width="12" height="12" fill="{TP_FILL}"/><text x="{}" y="{}">true positive</text>"#, f(lx), f(TOP), f(lx + 18.0), f(TOP + 10.0)).unwrap();
    writeln!(
        s,
        r#"<rect x="{}" y="{}" width="12" height="12" fill="{FP_FILL}" stroke="black" stroke-dasharray="3 2"/><text x="{}" y="{}">false positive</text>"#,
        f(lx),
        f(TOP + 20.0),
        f(lx + 18.0),
        f(TOP + 30.0)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn consistency(report: &CampaignReport) -> String {
    let mut s = header("Consistency");
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let base = TOP + ph;
    let col = pw / report.fuzzers.len().max(1) as f64;
    let bar_w = (col * 0.35).min(40.0);
    writeln!(s, r#"<path class="axis" d="M{} {}V{}H{}" stroke="black" fill="none"/>"#, f(LEFT), f(TOP), f(base), f(LEFT + pw)).unwrap();
    for k in 0..=4 {
        let p = k as f64 / 4.0;
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, f(LEFT - 6.0), f(base - ph * p + 4.0), f(p)).unwrap();
    }
    for (fi, fz) in report.fuzzers.iter().enumerate() {
        let cx = LEFT + col * (fi as f64 + 0.5);
        for (k, (v, fill, class)) in [(fz.consistency, TP_FILL, "triggered"), (fz.consistency_detected, "#8fb3d9", "detected")]
            .into_iter()
            .enumerate()
        {
            let h = ph * v.clamp(0.0, 1.0);
            let x0 = cx - bar_w + bar_w * k as f64;
            writeln!(s, r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#, f(x0), f(base - h), f(bar_w), f(h)).unwrap();
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, f(x0 + bar_w / 2.0), f(base - h - 4.0), f(v)).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, f(cx), f(base + 18.0), esc(&fz.fuzzer)).unwrap();
    }
    let lx = W - RIGHT + 12.0;
    writeln!(s, r#"<rect x="{}" y="{}" width="12" height="12" fill="{TP_FILL}"/><text x="{}" y="{}">triggered</text>"#, f(lx), f(TOP), f(lx + 18.0), f(TOP + 10.0)).unwrap();
    writeln!(s, r##"<rect x="{}" y="{}" width="12" height="12" fill="#8fb3d9"/><text x="{}" y="{}">detected</text>"##, f(lx), f(TOP + 20.0), f(lx + 18.0), f(TOP + 30.0)).unwrap();
    s.push_str("</svg>\n");
    s
}
