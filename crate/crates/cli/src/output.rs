//! Report rendering (JSON, CSV, SVG) and atomic file output.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use causality_lab_core::{Relation, ScanReport};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format `{other}` (expected json, csv or svg)")),
        }
    }
}

/// Floats with 17 significant digits.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON whose floats are written by [`number`].
struct FixedFloats(PrettyFormatter<'static>);

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(number(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("reports serialize into memory");
    out.push(b'\n');
    out
}

fn relation_name(r: Relation) -> &'static str {
    match r {
        Relation::Chronological => "chronological",
        Relation::Horismos => "horismos",
        Relation::Unrelated => "unrelated",
    }
}

/// Grid samples as `t,dbar,relation`.
pub fn csv(scan: &ScanReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "dbar", "relation"]).expect("in-memory write");
    for s in &scan.grid {
        w.write_record([number(s.t), number(s.dbar), relation_name(s.relation).to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Plot of `d̄(t)` with the τ bracket shaded.
pub fn svg(scan: &ScanReport, title: &str) -> Vec<u8> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let ymax = scan.grid.iter().map(|s| s.dbar).fold(0.0, f64::max).max(1e-12);
    let px = |t: f64| M + t * (W - 2.0 * M);
    let py = |d: f64| H - M - d / ymax * (H - 2.0 * M);
    let [lo, hi] = scan.tau_bracket;
    let band = (px(hi) - px(lo)).max(1.0);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<rect class="tau-bracket" x="{:.3}" y="{M}" width="{band:.3}" height="{:.3}" fill="#f4a261" fill-opacity="0.4"/>"##,
        px(lo) - if hi == lo { 0.5 } else { 0.0 },
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - M,
        W - M
    );
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    let points: Vec<String> = scan
        .grid
        .iter()
        .map(|g| format!("{:.3},{:.3}", px(g.t), py(g.dbar)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#264653" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">d̄(t)</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{M}" y="{}" text-anchor="middle">0</text>"#, H - M + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">1</text>"#, W - M, H - M + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, M - 4.0, M + 4.0, ymax);
    s.push_str("</svg>\n");
    s.into_bytes()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes every file through a temporary sibling and a rename, so readers
/// never see partial output.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
        }
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        let path = dir.join(name);
        tmp.persist(&path).map_err(|e| e.error)?;
        written.push(path);
    }
    Ok(written)
}
