//! Human-readable run reports: each merged sequence as an ordered gallery.

use std::fmt::Write as _;

use html_escape::{encode_double_quoted_attribute, encode_text};

use super::pipeline::SequenceResult;
use super::records::EntryRecord;
use crate::model::TaskKind;

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace(['\n', '\r'], " ")
}

fn score(v: Option<f64>) -> String {
    v.map_or_else(|| "–".into(), |v| format!("{v:.4}"))
}

fn tag(e: &EntryRecord) -> &'static str {
    if e.is_original() {
        "original"
    } else {
        "infilled"
    }
}

fn scores(e: &EntryRecord) -> (Option<f64>, Option<f64>) {
    e.selection
        .as_ref()
        .map_or((None, None), |s| (Some(s.text_score), Some(s.visual_score)))
}

fn downstream_heading(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Storytelling => "Story",
        TaskKind::Summarization => "Instructions",
        TaskKind::Generic => "Output",
    }
}

pub fn markdown(results: &[SequenceResult], failures: &[(String, String)]) -> String {
    let mut out = String::from("# Run report\n");
    for seq in results {
        write!(out, "\n## {} ({})\n\n", seq.id, seq.task).unwrap();
        if let Some(title) = &seq.title {
            writeln!(out, "Title: {}\n", cell(title)).unwrap();
        }
        if let Some(fov) = &seq.foveation {
            writeln!(out, "Focus: {}\n", cell(&fov.foveation.focus)).unwrap();
            writeln!(out, "Summary: {}\n", cell(&fov.foveation.summary)).unwrap();
        }
        for m in &seq.methods {
            write!(out, "### {} ({} entries)\n\n", m.method, m.entries.len()).unwrap();
            out.push_str("| # | tag | depth | image | text | text score | visual score |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            for e in &m.entries {
                let image = e
                    .visual
                    .as_ref()
                    .map_or_else(|| "–".into(), |v| format!("![{}](assets/{v}.png)", &v[..8]));
                let (ts, vs) = scores(e);
                writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    e.position,
                    tag(e),
                    e.depth,
                    image,
                    e.text.as_deref().map_or_else(|| "–".into(), cell),
                    score(ts),
                    score(vs)
                )
                .unwrap();
            }
            if let Some(d) = &m.downstream {
                write!(out, "\n#### {} ({})\n\n", downstream_heading(d.task), m.method).unwrap();
                for s in &d.steps {
                    writeln!(out, "{}. {}", s.index + 1, cell(&s.output)).unwrap();
                }
            }
            out.push('\n');
        }
    }
    if !failures.is_empty() {
        out.push_str("\n## Failed sequences\n\n");
        for (id, err) in failures {
            writeln!(out, "- {id}: {}", cell(err)).unwrap();
        }
    }
    out
}

pub fn html(results: &[SequenceResult], failures: &[(String, String)]) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Run report</title>\n<style>\n\
         body{font-family:sans-serif;max-width:72rem;margin:auto}\n\
         .gallery{display:flex;flex-wrap:wrap;gap:.5rem}\n\
         figure{width:10rem;margin:0;padding:.4rem;border:2px solid #999}\n\
         figure.infilled{border-color:#c60}\nfigure img{width:100%;image-rendering:pixelated}\n\
         figcaption{font-size:.8rem}\n</style></head><body>\n<h1>Run report</h1>\n",
    );
    for seq in results {
        writeln!(out, "<h2>{} ({})</h2>", encode_text(&seq.id), seq.task).unwrap();
        if let Some(title) = &seq.title {
            writeln!(out, "<p>Title: {}</p>", encode_text(title)).unwrap();
        }
        if let Some(fov) = &seq.foveation {
            writeln!(out, "<p>Focus: {}</p>", encode_text(&fov.foveation.focus)).unwrap();
            writeln!(out, "<p>Summary: {}</p>", encode_text(&fov.foveation.summary)).unwrap();
        }
        for m in &seq.methods {
            write!(
                out,
                "<h3>{} ({} entries)</h3>\n<div class=\"gallery\">\n",
                m.method,
                m.entries.len()
            )
            .unwrap();
            for e in &m.entries {
                write!(out, "<figure class=\"{}\">", tag(e)).unwrap();
                if let Some(v) = &e.visual {
                    write!(
                        out,
                        "<img src=\"assets/{}.png\" alt=\"\">",
                        encode_double_quoted_attribute(v)
                    )
                    .unwrap();
                }
                let (ts, vs) = scores(e);
                writeln!(
                    out,
                    "<figcaption>#{} {} · depth {}<br>{}<br>text {} · visual {}</figcaption></figure>",
                    e.position,
                    tag(e),
                    e.depth,
                    encode_text(e.text.as_deref().unwrap_or("–")),
                    score(ts),
                    score(vs)
                )
                .unwrap();
            }
            out.push_str("</div>\n");
            if let Some(d) = &m.downstream {
                write!(out, "<h4>{} ({})</h4>\n<ol>\n", downstream_heading(d.task), m.method).unwrap();
                for s in &d.steps {
                    writeln!(out, "<li>{}</li>", encode_text(&s.output)).unwrap();
                }
                out.push_str("</ol>\n");
            }
        }
    }
    if !failures.is_empty() {
        out.push_str("<h2>Failed sequences</h2>\n<ul>\n");
        for (id, err) in failures {
            writeln!(out, "<li>{}: {}</li>", encode_text(id), encode_text(err)).unwrap();
        }
        out.push_str("</ul>\n");
    }
    out.push_str("</body></html>\n");
    out
}
