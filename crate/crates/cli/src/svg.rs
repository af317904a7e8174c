//! Static prediction-vs-rotation chart: interval band, truth and mean.

use std::fmt::Write as _;

use itire::io::PredictionRecord;

const W: f64 = 960.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;

pub fn prediction_chart(records: &[PredictionRecord]) -> String {
    let n = records.len().max(2) as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        let p = &r.prediction;
        for v in [r.labels.fy_n, p.interval_95.0, p.interval_95.1] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(hi > lo) {
        (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
    }
    let px = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1.0);
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);

    let mut band = String::new();
    for (i, r) in records.iter().enumerate() {
        let _ = write!(band, "{:.2},{:.2} ", px(i), py(r.prediction.interval_95.1));
    }
    for (i, r) in records.iter().enumerate().rev() {
        let _ = write!(band, "{:.2},{:.2} ", px(i), py(r.prediction.interval_95.0));
    }
    let _ = writeln!(s, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.6"/>"##, band.trim_end());

    let line = |f: &dyn Fn(&PredictionRecord) -> f64| {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{:.2},{:.2}", px(i), py(f(r))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="black" stroke-width="1"/>"##,
        line(&|r| r.labels.fy_n)
    );
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1"/>"##,
        line(&|r| r.prediction.mean)
    );

    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="gray"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="gray"/>"#,
        b = H - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{t}" font-size="12" font-family="sans-serif">{hi:.0} N</text>"#,
        t = PAD - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{t}" font-size="12" font-family="sans-serif">{lo:.0} N</text>"#,
        t = H - PAD + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{t}" font-size="12" font-family="sans-serif" text-anchor="end">rotation index (n = {n}); black: measured Fy, red: mean, band: 95% interval</text>"#,
        x = W - PAD,
        t = H - PAD + 16.0,
        n = records.len()
    );
    s.push_str("</svg>\n");
    s
}
