//! Hand-rolled SVG renderings of learned convolution filters: Hinton
//! diagrams (square area proportional to weight magnitude, fill encoding
//! sign) and candlestick translations of each filter column.
//!
//! Filters arrive as row-major 4 x width matrices with rows ordered
//! (open, close, low, high), the crate-wide candle layout.

const CELL: f64 = 28.0;
const PAD: f64 = 14.0;
const LABEL_H: f64 = 16.0;

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    )
}

/// Hinton mosaic: one 4 x width grid per filter on a gray field, white
/// squares for positive weights, black for negative, area scaled by
/// magnitude relative to the filter's own maximum.
pub fn hinton_svg(filters: &[Vec<f64>], width: usize) -> String {
    let rows = 4usize;
    let panel_w = width as f64 * CELL;
    let panel_h = rows as f64 * CELL;
    let total_w = PAD + filters.len() as f64 * (panel_w + PAD);
    let total_h = PAD + LABEL_H + panel_h + PAD;
    let mut s = svg_open(total_w, total_h);
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#f4f4f4\"/>\n");
    for (f, w) in filters.iter().enumerate() {
        let x0 = PAD + f as f64 * (panel_w + PAD);
        let y0 = PAD + LABEL_H;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\">filter {}</text>\n",
            x0,
            PAD + 10.0,
            f
        ));
        s.push_str(&format!(
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{panel_w:.1}\" height=\"{panel_h:.1}\" fill=\"#808080\"/>\n"
        ));
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..rows {
            for c in 0..width {
                let v = w[r * width + c];
                if max == 0.0 || v == 0.0 {
                    continue;
                }
                let side = (v.abs() / max).sqrt() * (CELL - 6.0);
                let cx = x0 + c as f64 * CELL + CELL / 2.0;
                let cy = y0 + r as f64 * CELL + CELL / 2.0;
                let fill = if v > 0.0 { "#ffffff" } else { "#000000" };
                s.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{side:.2}\" height=\"{side:.2}\" fill=\"{fill}\"/>\n",
                    cx - side / 2.0,
                    cy - side / 2.0
                ));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Candlestick translation: each filter column's (open, close, low, high)
/// becomes one candle glyph. Columns whose open or close falls outside
/// the low-high range cannot be drawn as a candle and are rendered as a
/// crossed patch instead.
pub fn candles_svg(filters: &[Vec<f64>], width: usize) -> String {
    let glyph_w = 22.0;
    let panel_w = width as f64 * glyph_w + 8.0;
    let panel_h = 110.0;
    let total_w = PAD + filters.len() as f64 * (panel_w + PAD);
    let total_h = PAD + LABEL_H + panel_h + PAD;
    let mut s = svg_open(total_w, total_h);
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    for (f, w) in filters.iter().enumerate() {
        let x0 = PAD + f as f64 * (panel_w + PAD);
        let y0 = PAD + LABEL_H;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\">filter {}</text>\n",
            x0,
            PAD + 10.0,
            f
        ));
        s.push_str(&format!(
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{panel_w:.1}\" height=\"{panel_h:.1}\" \
             fill=\"none\" stroke=\"#cccccc\"/>\n"
        ));
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        // map a weight value to a y pixel, larger values higher
        let y_of = |v: f64| y0 + 6.0 + (hi - v) / span * (panel_h - 12.0);
        for c in 0..width {
            let open = w[c];
            let close = w[width + c];
            let low = w[2 * width + c];
            let high = w[3 * width + c];
            let cx = x0 + 4.0 + c as f64 * glyph_w + glyph_w / 2.0;
            let compatible = low <= open.min(close) && high >= open.max(close);
            if compatible {
                s.push_str(&format!(
                    "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#000000\"/>\n",
                    y_of(high),
                    y_of(low)
                ));
                let body_top = y_of(open.max(close));
                let body_h = (y_of(open.min(close)) - body_top).max(1.0);
                let fill = if close >= open { "#ffffff" } else { "#000000" };
                s.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{body_top:.2}\" width=\"{:.2}\" height=\"{body_h:.2}\" \
                     fill=\"{fill}\" stroke=\"#000000\"/>\n",
                    cx - glyph_w * 0.3,
                    glyph_w * 0.6
                ));
            } else {
                // incompatible patch: the values span, crossed out
                let vals = [open, close, low, high];
                let top = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let bot = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let y_top = y_of(bot).min(y_of(top));
                let h = (y_of(top) - y_of(bot)).abs().max(6.0);
                let x = cx - glyph_w * 0.3;
                let wth = glyph_w * 0.6;
                s.push_str(&format!(
                    "<rect x=\"{x:.2}\" y=\"{y_top:.2}\" width=\"{wth:.2}\" height=\"{h:.2}\" \
                     fill=\"#eeeeee\" stroke=\"#cc0000\"/>\n\
                     <line x1=\"{x:.2}\" y1=\"{y_top:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#cc0000\"/>\n\
                     <line x1=\"{:.2}\" y1=\"{y_top:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#cc0000\"/>\n",
                    x + wth,
                    y_top + h,
                    x + wth,
                    y_top + h
                ));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Plain-text dump of the filters, one 4 x width block each.
pub fn filters_text(filters: &[Vec<f64>], width: usize) -> String {
    let mut s = String::new();
    for (f, w) in filters.iter().enumerate() {
        s.push_str(&format!("filter {f}\n"));
        for (r, label) in ["open", "close", "low", "high"].iter().enumerate() {
            let cells: Vec<String> = (0..width)
                .map(|c| format!("{:>9.4}", w[r * width + c]))
                .collect();
            s.push_str(&format!("  {label:<5} {}\n", cells.join(" ")));
        }
    }
    s
}
