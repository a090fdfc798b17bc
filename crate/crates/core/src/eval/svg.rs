//! Top-down SVG plots of worlds and trajectories.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{Footprint, Layout, TrajectoryRecord};

/// Per-agent stroke colours; agent `i` uses entry `i % 8`.
pub const PALETTE: [&str; 8] = [
    "red",
    "green",
    "blue",
    "magenta",
    "cyan",
    "orange",
    "purple",
    "limegreen",
];

pub fn agent_color(agent: usize) -> &'static str {
    PALETTE[agent % PALETTE.len()]
}

const SCALE: f64 = 60.0;
const MARGIN: f64 = 10.0;

fn is_failure(event: &str) -> bool {
    matches!(event, "collided" | "timed_out")
}

/// Render obstacles, goals, and one polyline per agent. Agents whose last
/// record is a collision or timeout get a red marker, and the whole plot a
/// red frame.
pub fn render_svg(records: &[TrajectoryRecord], layout: &Layout) -> Result<String> {
    let n_agents = layout.agents.len();
    if let Some(bad) = records.iter().find(|r| r.agent >= n_agents) {
        return Err(Error::Contract(format!(
            "trajectory mentions agent {} but the world has {n_agents}",
            bad.agent
        )));
    }
    let [w, h] = layout.arena;
    let (pw, ph) = (w * SCALE + 2.0 * MARGIN, h * SCALE + 2.0 * MARGIN);
    let x = |v: f64| MARGIN + v * SCALE;
    let y = |v: f64| MARGIN + (h - v) * SCALE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw:.0}" height="{ph:.0}" viewBox="0 0 {pw:.1} {ph:.1}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{pw:.1}" height="{ph:.1}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black" stroke-width="2"/>"#,
        MARGIN,
        MARGIN,
        w * SCALE,
        h * SCALE
    );
    let _ = writeln!(s, r##"<g id="obstacles" fill="#8c8c8c" stroke="#505050">"##);
    for o in &layout.obstacles {
        match o.footprint() {
            Footprint::Circle { center, radius } => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
                    x(center[0]),
                    y(center[1]),
                    radius * SCALE
                );
            }
            f @ Footprint::Rect { .. } => {
                let pts: Vec<String> = f
                    .corners()
                    .iter()
                    .map(|p| format!("{:.2},{:.2}", x(p[0]), y(p[1])))
                    .collect();
                let _ = writeln!(s, r#"<polygon points="{}"/>"#, pts.join(" "));
            }
            Footprint::Stadium { a, b, radius } => {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#8c8c8c" stroke-width="{:.2}" stroke-linecap="round"/>"##,
                    x(a[0]),
                    y(a[1]),
                    x(b[0]),
                    y(b[1]),
                    2.0 * radius * SCALE
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");

    let mut paths: BTreeMap<usize, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        paths.entry(r.agent).or_default().push(r);
    }
    let mut failed_any = false;
    for (i, spawn) in layout.agents.iter().enumerate() {
        let c = agent_color(i);
        let (gx, gy) = (x(spawn.goal[0]), y(spawn.goal[1]));
        let _ = writeln!(
            s,
            r#"<g class="goal"><circle cx="{gx:.2}" cy="{gy:.2}" r="6" fill="none" stroke="{c}" stroke-width="2"/><circle cx="{gx:.2}" cy="{gy:.2}" r="2" fill="{c}"/></g>"#
        );
        if let Some(p) = paths.get(&i) {
            let pts: Vec<String> = p.iter().map(|r| format!("{:.2},{:.2}", x(r.x), y(r.y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="agent-{i}" points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                pts.join(" ")
            );
            let last = p[p.len() - 1];
            let radius = 0.105 * SCALE;
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius:.2}" fill="{c}" fill-opacity="0.4" stroke="{c}"/>"#,
                x(last.x),
                y(last.y)
            );
            if is_failure(&last.event) {
                failed_any = true;
                let _ = writeln!(
                    s,
                    r#"<rect class="failure" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="red" stroke-width="2"/>"#,
                    x(last.x) - 2.0 * radius,
                    y(last.y) - 2.0 * radius,
                    4.0 * radius,
                    4.0 * radius
                );
            }
        }
    }
    if failed_any {
        let _ = writeln!(
            s,
            r#"<rect class="failure-frame" x="2" y="2" width="{:.1}" height="{:.1}" fill="none" stroke="red" stroke-width="4"/>"#,
            pw - 4.0,
            ph - 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
