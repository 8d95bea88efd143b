use std::fmt::Write;

use num_traits::ToPrimitive;

use super::{ChartTheme, ComicDocument, Panel, Theme};
use crate::layout::Frac;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Palette {
    pub background: &'static str,
    pub foreground: &'static str,
    pub panel: &'static str,
    pub border: &'static str,
    pub link: &'static str,
}

pub const LIGHT_PALETTE: Palette = Palette {
    background: "#ffffff",
    foreground: "#1f2328",
    panel: "#f6f8fa",
    border: "#d0d7de",
    link: "#0969da",
};

pub const DARK_PALETTE: Palette = Palette {
    background: "#161b22",
    foreground: "#e6edf3",
    panel: "#0d1117",
    border: "#30363d",
    link: "#4493f8",
};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn percent(f: Frac) -> String {
    let v = (f * Frac::from_integer(100)).to_f64().unwrap_or(0.0);
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Caption markup with the first occurrence of each linked term wrapped in
/// an anchor. Matching ignores ASCII case.
fn caption_html(panel: &Panel) -> String {
    let text = &panel.caption.text;
    let lower = text.to_ascii_lowercase();
    let mut spans: Vec<(usize, usize, &str)> = Vec::new();
    for link in &panel.caption.term_links {
        let term = link.term.to_ascii_lowercase();
        if term.is_empty() {
            continue;
        }
        let mut from = 0;
        while let Some(i) = lower[from..].find(&term).map(|i| i + from) {
            let end = i + term.len();
            if !spans.iter().any(|&(s, e, _)| i < e && s < end) {
                spans.push((i, end, &link.url));
                break;
            }
            from = end;
        }
    }
    spans.sort();
    let mut out = String::new();
    let mut at = 0;
    for (s, e, url) in spans {
        out.push_str(&escape(&text[at..s]));
        let _ = write!(out, "<a href=\"{}\">{}</a>", escape(url), escape(&text[s..e]));
        at = e;
    }
    out.push_str(&escape(&text[at..]));
    out
}

/// Self-contained page: one section per tier, panels absolutely positioned
/// from their cell fractions. Charts are embedded as JSON specs for a client
/// renderer.
pub fn export_html(doc: &ComicDocument) -> String {
    let pal = match doc.style.theme {
        Theme::Light => LIGHT_PALETTE,
        Theme::Dark => DARK_PALETTE,
    };
    let chart_theme = match doc.style.chart_theme {
        ChartTheme::Default => "default",
        ChartTheme::Spreadsheet => "spreadsheet",
        ChartTheme::GrammarOfGraphics => "grammar_of_graphics",
    };
    let ar = doc.style.aspect_ratio;
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Data comic</title>\n<style>\n");
    let _ = writeln!(
        h,
        ":root {{ --bg: {}; --fg: {}; --panel: {}; --border: {}; --link: {}; }}",
        pal.background, pal.foreground, pal.panel, pal.border, pal.link
    );
    let _ = writeln!(
        h,
        "body {{ margin: 0; padding: 16px; background: var(--bg); color: var(--fg); font-family: {}; font-size: {}pt; }}",
        escape(&doc.style.font_family),
        doc.style.font_size
    );
    let _ = writeln!(
        h,
        ".tier {{ position: relative; width: 100%; aspect-ratio: {} / {}; margin: 0 0 16px 0; }}",
        ar.width, ar.height
    );
    h.push_str(".panel { position: absolute; box-sizing: border-box; padding: 6px; border: 1px solid var(--border); background: var(--panel); overflow: hidden; display: flex; flex-direction: column; }\n");
    h.push_str(".chart { flex: 1 1 auto; min-height: 0; }\n.caption { margin: 4px 0 0 0; }\na { color: var(--link); }\n");
    h.push_str("</style>\n</head>\n");
    let _ = writeln!(h, "<body data-theme=\"{}\" data-chart-theme=\"{chart_theme}\">", match doc.style.theme {
        Theme::Light => "light",
        Theme::Dark => "dark",
    });
    for piece in &doc.pieces {
        let _ = writeln!(
            h,
            "<section class=\"tier\" data-piece=\"{}\" data-pattern=\"{}\">",
            piece.index,
            serde_json::to_value(piece.layout.pattern).unwrap().as_str().unwrap()
        );
        for id in &piece.layout.reading_order {
            let (Some(cell), Some(panel)) = (piece.layout.cell(id), piece.panels.get(id)) else {
                continue;
            };
            let r = &cell.rect;
            let _ = writeln!(
                h,
                "<div class=\"panel\" data-chart=\"{}\" style=\"left: {}%; top: {}%; width: {}%; height: {}%;\">",
                escape(id),
                percent(r.x),
                percent(r.y),
                percent(r.w),
                percent(r.h)
            );
            let spec = serde_json::to_string(&panel.chart).unwrap().replace("</", "<\\/");
            let _ = writeln!(h, "<div class=\"chart\"></div>\n<script type=\"application/json\" class=\"chart-spec\">{spec}</script>");
            let _ = writeln!(h, "<p class=\"caption\">{}</p>\n</div>", caption_html(panel));
        }
        h.push_str("</section>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}
