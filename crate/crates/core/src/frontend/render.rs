//! Report files. Everything here is a pure function of the report, so
//! equal reports give byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::query::Format;
use super::Report;
use crate::ml::Measure;
use crate::protocol::ResultRow;

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 400;

const CSV_HEADER: [&str; 14] = [
    "query_id",
    "phase",
    "algorithm",
    "algorithm_id",
    "algorithm_name",
    "algorithm_params",
    "model_id",
    "dataset",
    "dataset_id",
    "dataset_params",
    "measure",
    "value",
    "elapsed",
    "error",
];

fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for r in rows {
        let phase = match r.phase {
            crate::protocol::Phase::Train => "train",
            crate::protocol::Phase::Test => "test",
        };
        w.write_record([
            r.query_id.as_str(),
            phase,
            &r.algorithm_label,
            &r.algorithm_id.to_string(),
            &r.algorithm_name,
            &r.algorithm_params.to_string(),
            &r.model_id.to_string(),
            &r.dataset,
            &r.dataset_id.to_string(),
            &r.dataset_params.to_string(),
            r.measure.map(Measure::id).unwrap_or(""),
            &num(r.value),
            &num(r.elapsed),
            r.error.as_deref().unwrap_or(""),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv of utf-8 fields")
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&report.outcome).expect("reports serialize");
    s.push('\n');
    s
}

pub fn warnings_text(warnings: &[String]) -> String {
    warnings.iter().map(|w| format!("{w}\n")).collect()
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Keeps file names portable.
pub fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

fn nice_max(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * mag >= x {
            return step * mag;
        }
    }
    10.0 * mag
}

fn tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" { "0".into() } else { s.to_string() }
}

/// Bar chart of one (dataset, measure) group, one bar per row with a
/// value. Time bars are added when rows carry elapsed seconds.
pub fn bar_chart(dataset: &str, measure: Measure, rows: &[&ResultRow]) -> String {
    let (left, right, top, bottom) = (64.0, 64.0, 40.0, 72.0);
    let plot_w = WIDTH as f64 - left - right;
    let plot_h = HEIGHT as f64 - top - bottom;
    let bounded = !matches!(measure, Measure::Mse);
    let vmax = if bounded { 1.0 } else { nice_max(rows.iter().filter_map(|r| r.value).fold(0.0, f64::max)) };
    let timed = rows.iter().any(|r| r.elapsed.is_some());
    let tmax = nice_max(rows.iter().filter_map(|r| r.elapsed).fold(0.0, f64::max));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}: {}</text>"#, WIDTH / 2, xml(dataset), measure.id());
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let y = top + plot_h * (1.0 - f);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, left + plot_w);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, tick(vmax * f));
        if timed {
            let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" fill="#1f4e9c">{}</text>"##, left + plot_w + 6.0, y + 4.0, tick(tmax * f));
        }
    }
    let _ = writeln!(s, r##"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="#333"/>"##, top + plot_h);
    let _ = writeln!(s, r##"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333"/>"##, top + plot_h, left + plot_w, top + plot_h);

    let n = rows.len().max(1) as f64;
    let slot = plot_w / n;
    let bar = slot * if timed { 0.45 } else { 0.7 };
    let rotate = rows.len() > 12;
    for (i, r) in rows.iter().enumerate() {
        let x0 = left + slot * i as f64 + slot * 0.15;
        let v = r.value.unwrap_or(0.0).max(0.0);
        let h = plot_h * (v / vmax).min(1.0);
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{x0:.1}" y="{:.1}" width="{bar:.1}" height="{h:.1}" fill="#c0392b"><title>{} {}</title></rect>"##,
            top + plot_h - h,
            xml(&r.algorithm_label),
            num(r.value)
        );
        if !rotate {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#, x0 + bar / 2.0, top + plot_h - h - 4.0, tick(v));
        }
        if let (true, Some(t)) = (timed, r.elapsed) {
            let th = plot_h * (t / tmax).min(1.0);
            let _ = writeln!(
                s,
                r##"<rect class="time" x="{:.1}" y="{:.1}" width="{:.1}" height="{th:.1}" fill="#1f4e9c"/>"##,
                x0 + bar,
                top + plot_h - th,
                slot * 0.25
            );
        }
        let lx = left + slot * i as f64 + slot / 2.0;
        let ly = top + plot_h + 16.0;
        if rotate {
            let _ = writeln!(s, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-45 {lx:.1} {ly:.1})">{}</text>"#, xml(&r.algorithm_label));
        } else {
            let _ = writeln!(s, r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle">{}</text>"#, xml(&r.algorithm_label));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Algorithms × datasets grid for one measure, as CSV. Cells holding
/// several values (several same-named test sets) join them with `;`.
pub fn matrix(rows: &[ResultRow], measure: Measure) -> String {
    let hits: Vec<&ResultRow> = rows.iter().filter(|r| r.measure == Some(measure) && r.value.is_some()).collect();
    let datasets: BTreeSet<&str> = hits.iter().map(|r| r.dataset.as_str()).collect();
    let mut labels: Vec<(String, &str)> = Vec::new();
    for r in &hits {
        let key = r.sort_key().1;
        if !labels.iter().any(|(_, l)| *l == r.algorithm_label) {
            labels.push((key, &r.algorithm_label));
        }
    }
    labels.sort();
    let mut cells: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
    for r in &hits {
        cells.entry((r.algorithm_label.as_str(), r.dataset.as_str())).or_default().push(num(r.value));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("algorithm").chain(datasets.iter().copied()).collect();
    w.write_record(&header).expect("writing to memory");
    for (_, label) in &labels {
        let mut rec = vec![label.to_string()];
        for d in &datasets {
            rec.push(cells.get(&(*label, *d)).map(|v| v.join(";")).unwrap_or_default());
        }
        w.write_record(&rec).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv of utf-8 fields")
}

/// Every file for `report`, keyed by path relative to the output root.
/// An empty result with warnings yields the warnings file alone.
pub fn render(report: &Report) -> BTreeMap<PathBuf, String> {
    let o = &report.outcome;
    let dir = PathBuf::from(file_stem(&o.query_id));
    let mut files = BTreeMap::new();
    if !o.warnings.is_empty() {
        files.insert(dir.join("warnings.txt"), warnings_text(&o.warnings));
    }
    if o.rows.is_empty() && !o.warnings.is_empty() {
        return files;
    }
    files.insert(dir.join("report.csv"), to_csv(&o.rows));
    files.insert(dir.join("report.json"), to_json(report));
    if report.output.format == Format::Plot {
        let mut groups: BTreeMap<(&str, Measure), Vec<&ResultRow>> = BTreeMap::new();
        for r in &o.rows {
            if let (Some(m), Some(_)) = (r.measure, r.value) {
                groups.entry((r.dataset.as_str(), m)).or_default().push(r);
            }
        }
        for ((d, m), rows) in groups {
            let name = format!("{}_{}.svg", file_stem(d), m.id());
            files.insert(dir.join("plots").join(name), bar_chart(d, m, &rows));
        }
    }
    if report.output.matrix {
        let present: BTreeSet<Measure> = o.rows.iter().filter(|r| r.value.is_some()).filter_map(|r| r.measure).collect();
        for m in present {
            files.insert(dir.join(format!("matrix_{}.csv", m.id())), matrix(&o.rows, m));
        }
    }
    files
}

/// Writes [`render`]'s files under `out`, returning the paths written.
pub fn write(report: &Report, out: &Path) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (rel, text) in render(report) {
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
