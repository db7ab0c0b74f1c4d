//! Static SVG renderings of the analysis tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::analytics::{CategoryFrequency, CategoryScc, CountryMatrix, IconReport};
use crate::error::{Error, Result};
use crate::report::Analysis;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";
const WEST: &str = "#3b6fb6";
const EAST: &str = "#d9732b";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Diverging blue-white-red color for a value in [-1, 1].
pub fn color(v: f64) -> String {
    let t = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let (from, to, s) = if t < 0.0 {
        ((255.0, 255.0, 255.0), (33.0, 102.0, 172.0), -t)
    } else {
        ((255.0, 255.0, 255.0), (178.0, 24.0, 43.0), t)
    };
    let mix = |a: f64, b: f64| (a + (b - a) * s).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(from.0, to.0),
        mix(from.1, to.1),
        mix(from.2, to.2)
    )
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"10\" y=\"20\" {FONT} font-weight=\"bold\">{}</text>",
        escape(title)
    );
    s
}

fn text(s: &mut String, x: f64, y: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        s,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" {FONT} text-anchor=\"{anchor}\">{}</text>",
        escape(body)
    );
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Horizontal bars of the 15 most frequent emoji per culture.
pub fn top15_chart(west: &[(String, f64)], east: &[(String, f64)]) -> Option<String> {
    if west.is_empty() && east.is_empty() {
        return None;
    }
    let rows = west.len().max(east.len()) as f64;
    let (bar_w, row_h, top) = (220.0, 22.0, 50.0);
    let height = top + rows * row_h + 20.0;
    let mut s = open(640.0, height, "Top 15 emoji by normalized frequency");
    for (panel, (name, list, fill)) in [("West", west, WEST), ("East", east, EAST)].into_iter().enumerate() {
        let x0 = 10.0 + panel as f64 * 320.0;
        text(&mut s, x0, 40.0, "start", name);
        let max = list.iter().map(|p| p.1).fold(0.0, f64::max);
        for (i, (emoji, f)) in list.iter().enumerate() {
            let y = top + i as f64 * row_h;
            let w = if max > 0.0 { f / max * bar_w } else { 0.0 };
            text(&mut s, x0 + 20.0, y + 14.0, "end", emoji);
            let _ = writeln!(
                s,
                "<rect class=\"bar {}\" x=\"{:.1}\" y=\"{y:.1}\" width=\"{w:.2}\" height=\"{:.1}\" fill=\"{fill}\"/>",
                name.to_lowercase(),
                x0 + 26.0,
                row_h - 4.0
            );
            text(&mut s, x0 + 30.0 + w, y + 14.0, "start", &format!("{f:.4}"));
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Grouped West/East bars per Unicode category, labelled with the SCC.
pub fn category_chart(categories: &[CategoryFrequency]) -> Option<String> {
    if categories.is_empty() {
        return None;
    }
    let (group_w, plot_h, base) = (90.0, 200.0, 250.0);
    let width = 40.0 + categories.len() as f64 * group_w;
    let mut s = open(width.max(300.0), 320.0, "Normalized frequency by Unicode category");
    let max = categories.iter().flat_map(|c| [c.west, c.east]).fold(0.0, f64::max);
    for (i, c) in categories.iter().enumerate() {
        let x = 30.0 + i as f64 * group_w;
        for (k, (v, fill, class)) in [(c.west, WEST, "west"), (c.east, EAST, "east")].into_iter().enumerate() {
            let h = if max > 0.0 { v / max * plot_h } else { 0.0 };
            let _ = writeln!(
                s,
                "<rect class=\"bar {class}\" x=\"{:.1}\" y=\"{:.2}\" width=\"30\" height=\"{h:.2}\" fill=\"{fill}\"/>",
                x + k as f64 * 32.0,
                base - h
            );
        }
        let label = c
            .scc
            .map(|r| format!("SCC {}", fmt3(r)))
            .unwrap_or_else(|| "SCC n/a".into());
        text(&mut s, x + 31.0, base + 16.0, "middle", &c.category);
        text(&mut s, x + 31.0, base + 32.0, "middle", &label);
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Corpus-by-corpus correlation heatmap.
pub fn heatmap(m: &CountryMatrix) -> Option<String> {
    let n = m.corpora.len();
    if n == 0 {
        return None;
    }
    let (cell, left, top) = (60.0, 80.0, 70.0);
    let size = left + n as f64 * cell + 20.0;
    let mut s = open(
        size,
        top + n as f64 * cell + 20.0,
        "Emoji similarity correlation between corpora",
    );
    for (j, id) in m.corpora.iter().enumerate() {
        text(&mut s, left + (j as f64 + 0.5) * cell, top - 8.0, "middle", id);
    }
    for (i, id) in m.corpora.iter().enumerate() {
        let y = top + i as f64 * cell;
        text(&mut s, left - 6.0, y + cell / 2.0 + 4.0, "end", id);
        for j in 0..n {
            let v = m.matrix[i][j];
            let x = left + j as f64 * cell;
            let _ = writeln!(
                s,
                "<rect class=\"cell\" data-row=\"{i}\" data-col=\"{j}\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\"/>",
                color(v)
            );
            text(
                &mut s,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0,
                "middle",
                &format!("{v:.2}"),
            );
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// One row per category: its SCC and the top five emoji in each culture.
pub fn category_top5_grid(rows: &[CategoryScc]) -> Option<String> {
    if rows.is_empty() {
        return None;
    }
    let row_h = 24.0;
    let mut s = open(560.0, 70.0 + rows.len() as f64 * row_h, "Top 5 emoji per category");
    text(&mut s, 10.0, 50.0, "start", "category");
    text(&mut s, 170.0, 50.0, "start", "rho");
    text(&mut s, 230.0, 50.0, "start", "West");
    text(&mut s, 400.0, 50.0, "start", "East");
    for (i, r) in rows.iter().enumerate() {
        let y = 70.0 + i as f64 * row_h;
        let _ = writeln!(
            s,
            "<rect class=\"row\" x=\"5\" y=\"{:.1}\" width=\"550\" height=\"{:.1}\" fill=\"{}\"/>",
            y - 16.0,
            row_h - 2.0,
            color(r.rho * 0.5)
        );
        text(&mut s, 10.0, y, "start", &r.category);
        text(&mut s, 170.0, y, "start", &fmt3(r.rho));
        let join = |l: &[(String, f64)]| l.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(" ");
        text(&mut s, 230.0, y, "start", &join(&r.top5_west));
        text(&mut s, 400.0, y, "start", &join(&r.top5_east));
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Most and least culturally consistent emoji plus per-category mean ± std.
pub fn icon_grid(icons: &IconReport) -> Option<String> {
    if icons.icons.is_empty() {
        return None;
    }
    let row_h = 22.0;
    let rows = icons.top5.len().max(icons.bottom5.len()) + 2 + icons.by_category.len();
    let mut s = open(520.0, 70.0 + rows as f64 * row_h, "Icon SCC: top and bottom emoji");
    text(&mut s, 10.0, 50.0, "start", "Top 5");
    text(&mut s, 260.0, 50.0, "start", "Bottom 5");
    for (col, list) in [(10.0, &icons.top5), (260.0, &icons.bottom5)] {
        for (i, icon) in list.iter().enumerate() {
            let y = 70.0 + i as f64 * row_h;
            let _ = writeln!(
                s,
                "<rect class=\"icon\" x=\"{:.1}\" y=\"{:.1}\" width=\"200\" height=\"{:.1}\" fill=\"{}\"/>",
                col - 4.0,
                y - 15.0,
                row_h - 2.0,
                color(icon.scc)
            );
            text(
                &mut s,
                col,
                y,
                "start",
                &format!("{} {} ({})", icon.emoji, fmt3(icon.scc), icon.unicode_category),
            );
        }
    }
    let y0 = 70.0 + (icons.top5.len().max(icons.bottom5.len()) + 1) as f64 * row_h;
    for (i, g) in icons.by_category.iter().enumerate() {
        let y = y0 + i as f64 * row_h;
        let w = (g.mean.clamp(-1.0, 1.0) + 1.0) * 100.0;
        let _ = writeln!(
            s,
            "<rect class=\"bar mean\" x=\"200\" y=\"{:.1}\" width=\"{w:.2}\" height=\"{:.1}\" fill=\"{WEST}\"/>",
            y - 14.0,
            row_h - 6.0
        );
        text(&mut s, 190.0, y, "end", &format!("{} (n={})", g.category, g.count));
        text(
            &mut s,
            410.0,
            y,
            "start",
            &format!("{} ± {}", fmt3(g.mean), fmt3(g.std)),
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChartOutcome {
    pub written: Vec<String>,
    pub omitted: Vec<String>,
}

/// Writes every chart whose section is present and non-empty into `dir`.
pub fn emit_charts(analysis: &Analysis, dir: &Path) -> Result<ChartOutcome> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let f = &analysis.frequency;
    let charts = [
        ("top15.svg", top15_chart(&f.top15_west, &f.top15_east)),
        ("categories.svg", category_chart(&f.categories)),
        ("country_heatmap.svg", analysis.country.as_ref().and_then(heatmap)),
        (
            "category_top5.svg",
            analysis.category_scc.as_deref().and_then(category_top5_grid),
        ),
        ("icons.svg", analysis.icons.as_ref().and_then(icon_grid)),
    ];
    let mut out = ChartOutcome::default();
    for (name, svg) in charts {
        let path = dir.join(name);
        match svg {
            Some(svg) => {
                std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
                out.written.push(name.to_string());
            }
            None => {
                if path.exists() {
                    std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                }
                out.omitted.push(name.to_string());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn color_scale_endpoints() {
        assert_eq!(color(0.0), "#ffffff");
        assert_eq!(color(1.0), "#b2182b");
        assert_eq!(color(-1.0), "#2166ac");
        assert_eq!(color(f64::NAN), "#ffffff");
    }

    #[test]
    fn empty_sections_are_omitted() {
        assert!(top15_chart(&[], &[]).is_none());
        assert!(category_chart(&[]).is_none());
        assert!(category_top5_grid(&[]).is_none());
    }
}
