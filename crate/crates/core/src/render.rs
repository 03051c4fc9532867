//! JSON and static HTML output for the event/keyframe presentation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSummary;

/// Tool version and configuration echoed into every output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            version: format!("vidsum {}", env!("CARGO_PKG_VERSION")),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkpDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(flatten)]
    pub summary: EventSummary,
}

/// Pretty JSON with a trailing newline; field order follows the structs, so
/// equal values always serialize to identical bytes.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize") + "\n"
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_json(summary: &EventSummary, provenance: Option<&Provenance>, path: &Path) -> Result<()> {
    write_json(
        &EkpDocument {
            provenance: provenance.cloned(),
            summary: summary.clone(),
        },
        path,
    )
}

pub fn read_ekp_json(path: &Path) -> Result<EkpDocument> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub output_dir: PathBuf,
    /// Directory holding `<frame_id>.jpg` (or `.jpeg` / `.png`) thumbnails.
    pub thumbnail_dir: Option<PathBuf>,
    pub include_scores: bool,
}

pub const HTML_FILE: &str = "ekp.html";

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn thumbnail(dir: &Path, frame_id: &str) -> Option<String> {
    for (ext, mime) in [("jpg", "image/jpeg"), ("jpeg", "image/jpeg"), ("png", "image/png")] {
        let path = dir.join(format!("{frame_id}.{ext}"));
        if let Ok(bytes) = fs::read(&path) {
            return Some(format!("data:{mime};base64,{}", STANDARD.encode(bytes)));
        }
    }
    None
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;background:#fafafa}\
h1{font-size:1.4em}\
section.event{margin-bottom:2em}\
section.event h2{font-size:1.1em;border-bottom:1px solid #ccc}\
.grid{display:flex;flex-wrap:wrap;gap:8px}\
.tile{width:160px;font-size:0.8em;text-align:center}\
.tile img{width:160px;height:90px;object-fit:cover}\
.placeholder{width:160px;height:90px;background:#ddd;display:flex;align-items:center;justify-content:center;overflow:hidden}";

/// Renders the page as a string. Thumbnails are read from `thumbnail_dir`.
pub fn render_html(summary: &EventSummary, config: &RenderConfig) -> String {
    let mut html = String::new();
    let title = escape(&summary.query);
    writeln!(html, "<!DOCTYPE html>").unwrap();
    writeln!(html, "<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">").unwrap();
    writeln!(html, "<title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>").unwrap();
    writeln!(html, "<h1>{title}</h1>").unwrap();
    for (position, event) in summary.events.iter().enumerate() {
        let heading = if event.label_words.is_empty() {
            format!("Event {}", position + 1)
        } else {
            escape(&event.label_words.join(" "))
        };
        writeln!(html, "<section class=\"event\" data-event-id=\"{}\">", event.event_id).unwrap();
        writeln!(html, "<h2>{heading}</h2>\n<div class=\"grid\">").unwrap();
        for kf in &event.keyframes {
            let id = escape(&kf.frame_id);
            writeln!(html, "<div class=\"tile\">").unwrap();
            match config.thumbnail_dir.as_deref().and_then(|d| thumbnail(d, &kf.frame_id)) {
                Some(uri) => writeln!(html, "<img src=\"{uri}\" alt=\"{id}\">").unwrap(),
                None => writeln!(html, "<div class=\"placeholder\">{id}</div>").unwrap(),
            }
            write!(html, "<div class=\"caption\">{id}").unwrap();
            if config.include_scores {
                write!(html, " <span class=\"score\">{:.3}</span>", kf.score).unwrap();
            }
            writeln!(html, "</div>\n</div>").unwrap();
        }
        writeln!(html, "</div>\n</section>").unwrap();
    }
    writeln!(html, "</body>\n</html>").unwrap();
    html
}

/// Writes `ekp.html` into the output directory and returns its path.
pub fn emit_html(summary: &EventSummary, config: &RenderConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let path = config.output_dir.join(HTML_FILE);
    fs::write(&path, render_html(summary, config)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
