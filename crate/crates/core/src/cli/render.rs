//! SVG 1.1 rendering of decomposition maps.

use std::fmt::Write;

use crate::decomposition::{catalog_number, AspectMap, CellLabel, Space};
use crate::kinematics::MechanismGeometry;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStyle {
    /// Fill per label, indexed like [`CellLabel::ALL`].
    pub label_colors: [&'static str; 6],
    /// Fills cycled over aspect serials.
    pub aspect_palette: Vec<&'static str>,
    pub cell_stroke: &'static str,
    pub cell_stroke_width: f64,
    pub base_stroke_width: f64,
    /// Side of the map square in pixels.
    pub map_size: f64,
    pub margin: f64,
    pub legend_width: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            label_colors: ["#f7fcf5", "#d62728", "#1f77b4", "#ff7f0e", "#e6e6e6", "#7f7f7f"],
            aspect_palette: vec!["#2ca02c", "#9467bd", "#17becf", "#bcbd22", "#8c564b", "#e377c2"],
            cell_stroke: "none",
            cell_stroke_width: 0.0,
            base_stroke_width: 3.0,
            map_size: 640.0,
            margin: 48.0,
            legend_width: 220.0,
        }
    }
}

impl RenderStyle {
    pub fn label_color(&self, label: CellLabel) -> &'static str {
        let i = CellLabel::ALL.iter().position(|&l| l == label).expect("label listed");
        self.label_colors[i]
    }

    /// Colour of aspect `serial` (1-based).
    pub fn aspect_color(&self, serial: u32) -> &'static str {
        self.aspect_palette[(serial as usize - 1) % self.aspect_palette.len()]
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Deterministic SVG for one sheet; aspects are tinted over FREE cells.
pub fn render_svg(map: &AspectMap, geometry: &MechanismGeometry, style: &RenderStyle) -> String {
    let tree = map.tree();
    let (size, m) = (style.map_size, style.margin);
    let width = size + 2.0 * m + style.legend_width;
    let height = size + 2.0 * m;
    let scale = size / tree.bounds.side;
    let px = |x: f64| m + (x - tree.bounds.min[0]) * scale;
    let py = |y: f64| m + size - (y - tree.bounds.min[1]) * scale;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let number = catalog_number(tree.mode, tree.det_sign);
    let title = format!(
        "{} map, mode {number} {}, det A {}",
        match tree.space {
            Space::Workspace => "W",
            Space::JointSpace => "Q",
        },
        tree.mode,
        tree.det_sign
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&title));
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##);

    let _ = writeln!(
        out,
        r#"<g id="cells" stroke="{}" stroke-width="{:.2}">"#,
        style.cell_stroke, style.cell_stroke_width
    );
    for leaf in tree.leaves() {
        let [x0, y0] = tree.cell_min(leaf.cell);
        let side = tree.cell_side(leaf.cell);
        let fill = match map.locate(tree.cell_center(leaf.cell)) {
            Ok(id) => style.aspect_color(id.serial),
            Err(label) => style.label_color(label),
        };
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            px(x0),
            py(y0 + side),
            side * scale,
            side * scale
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(
        out,
        r##"<rect x="{m:.3}" y="{m:.3}" width="{size:.3}" height="{size:.3}" fill="none" stroke="#000000" stroke-width="1"/>"##
    );
    if tree.space == Space::Workspace {
        let (a1, a2) = (geometry.a1, geometry.a2);
        let _ = writeln!(
            out,
            r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#000000" stroke-width="{:.2}"/>"##,
            px(a1.x),
            py(a1.y),
            px(a2.x),
            py(a2.y),
            style.base_stroke_width
        );
        for a in [a1, a2] {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.3}" cy="{:.3}" r="4" fill="#000000"/>"##,
                px(a.x),
                py(a.y)
            );
        }
    }

    // axis extremes; joint space in degrees
    let (lo, hi, unit) = match tree.space {
        Space::Workspace => (
            [tree.bounds.min[0], tree.bounds.min[1]],
            [tree.bounds.min[0] + tree.bounds.side, tree.bounds.min[1] + tree.bounds.side],
            "",
        ),
        Space::JointSpace => ([0.0, 0.0], [360.0, 360.0], "°"),
    };
    let axis = match tree.space {
        Space::Workspace => ["x", "y"],
        Space::JointSpace => ["θ1", "θ2"],
    };
    let text = |out: &mut String, x: f64, y: f64, anchor: &str, s: String| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{}</text>"#,
            escape(&s)
        );
    };
    text(&mut out, m, m + size + 18.0, "start", format!("{:.2}{unit}", lo[0]));
    text(&mut out, m + size, m + size + 18.0, "end", format!("{:.2}{unit}", hi[0]));
    text(&mut out, m + size / 2.0, m + size + 34.0, "middle", axis[0].to_string());
    text(&mut out, m - 6.0, m + size, "end", format!("{:.2}{unit}", lo[1]));
    text(&mut out, m - 6.0, m + 12.0, "end", format!("{:.2}{unit}", hi[1]));
    text(&mut out, m - 6.0, m + size / 2.0, "end", axis[1].to_string());
    text(&mut out, m + size / 2.0, m - 16.0, "middle", title);

    let lx = m + size + 24.0;
    let mut ly = m;
    let mut entry = |out: &mut String, fill: &str, label: String| {
        let _ = writeln!(
            out,
            r##"<rect x="{lx:.3}" y="{ly:.3}" width="14" height="14" fill="{fill}" stroke="#000000" stroke-width="0.5"/>"##
        );
        text(out, lx + 22.0, ly + 12.0, "start", label);
        ly += 22.0;
    };
    for a in map.aspects() {
        entry(
            &mut out,
            style.aspect_color(a.id.serial),
            format!("aspect {} (area {:.3})", a.id.serial, a.area),
        );
    }
    for label in CellLabel::ALL {
        if label != CellLabel::Mixed {
            entry(&mut out, style.label_color(label), label.name().to_string());
        }
    }
    let _ = writeln!(out, "</svg>");
    out
}
