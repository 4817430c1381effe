use std::fmt::Write as _;

use crate::corpus::{Abnormality, BinaryDementia, ClassLabel, Dementia, Severity};
use crate::error::{Error, Result};
use crate::report::{
    AlphaSource, BinaryPrediction, ClassPrediction, DiagnosticReport, EvidenceRow,
    PredictionSource, PredictionSources, Predictions, ReportMetadata, REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TextOptions {
    /// Truncate descriptions to this many characters. `None` keeps them whole.
    pub max_description: Option<usize>,
}

/// Nearest integer percent, halves rounding up.
fn percent(p: f64) -> i64 {
    (p * 100.0 + 0.5).floor() as i64
}

fn confidence_line<L: ClassLabel>(probs: &[f64]) -> String {
    L::ALL
        .iter()
        .zip(probs)
        .map(|(l, p)| format!("{}: {}%", l.short_name(), percent(*p)))
        .collect::<Vec<_>>()
        .join(", ")
}

const HEADER: [&str; 6] = ["#", "sim", "α", "Abnormality", "Dementia label", "Reference description"];
const WIDTHS: [usize; 5] = [3, 6, 6, 15, 16];

fn table_line(cells: [&str; 6]) -> String {
    let mut line = String::new();
    for (cell, w) in cells.iter().zip(WIDTHS) {
        let _ = write!(line, "{cell:<w$}");
    }
    line.push_str(cells[5]);
    line.trim_end().to_string()
}

pub fn render_text(report: &DiagnosticReport) -> String {
    render_text_with(report, TextOptions::default())
}

pub fn render_text_with(report: &DiagnosticReport, options: TextOptions) -> String {
    let p = &report.predictions;
    let m = &report.metadata;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("Abnormality Type: {}", p.abnormality.label.display_name()));
    line(format!(
        "Abnormality Confidence: {}",
        confidence_line::<Abnormality>(&p.abnormality.probabilities)
    ));
    line(String::new());
    line(format!("Dementia Diagnosis: {}", p.dementia_type.label.display_name()));
    line(format!(
        "Dementia Confidence: {}",
        confidence_line::<Dementia>(&p.dementia_type.probabilities)
    ));
    line(String::new());
    line(format!("Dementia Severity: {}", p.severity.label.display_name()));
    line(format!(
        "Severity Confidence: {}",
        confidence_line::<Severity>(&p.severity.probabilities)
    ));
    line(String::new());
    line(format!("Binary Dementia: {}", p.binary.label.display_name()));
    let note = match m.sources.binary {
        PredictionSource::ZeroShot => " (similarity-derived score)",
        PredictionSource::Evidence => "",
    };
    line(format!(
        "Dementia Probability: {}%{note}",
        percent(p.binary.p_dementia)
    ));
    line(String::new());
    line(format!(
        "Evidence Table: Top-{} Retrieved Reference Cases",
        report.evidence.len()
    ));
    line(table_line(HEADER));
    for row in &report.evidence {
        let desc: String = match options.max_description {
            Some(n) => row.description.chars().take(n).collect(),
            None => row.description.clone(),
        };
        let rank = row.rank.to_string();
        let sim = format!("{:.2}", row.sim);
        let alpha = format!("{:.2}", row.alpha);
        line(table_line([
            &rank,
            &sim,
            &alpha,
            row.abnormality.display_name(),
            row.dementia.short_name(),
            &desc,
        ]));
    }
    line(String::new());
    line(format!("Corpus: {}", m.corpus_id));
    line(format!("Encoder: {}", m.encoder_id));
    line(format!("k: {}", m.k));
    line(format!(
        "Sources: abnormality={}, binary={}, dementia_type={}, severity={}",
        m.sources.abnormality.key(),
        m.sources.binary.key(),
        m.sources.dementia_type.key(),
        m.sources.severity.key()
    ));
    line(format!("Evidence weights: {}", m.alpha_source.key()));
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Domain(format!("cannot parse report text: {}", msg.into()))
}

fn field<'a>(lines: &mut impl Iterator<Item = &'a str>, prefix: &str) -> Result<&'a str> {
    let l = lines.next().ok_or_else(|| bad(format!("missing `{prefix}` line")))?;
    l.strip_prefix(prefix)
        .ok_or_else(|| bad(format!("expected `{prefix}`, found `{l}`")))
}

fn blank<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<()> {
    match lines.next() {
        Some("") => Ok(()),
        other => Err(bad(format!("expected a blank line, found {other:?}"))),
    }
}

fn by_display<L: ClassLabel>(s: &str) -> Result<L> {
    L::ALL
        .iter()
        .copied()
        .find(|l| l.display_name() == s)
        .ok_or_else(|| bad(format!("unknown label `{s}`")))
}

fn by_short<L: ClassLabel>(s: &str) -> Result<L> {
    L::ALL
        .iter()
        .copied()
        .find(|l| l.short_name() == s)
        .ok_or_else(|| bad(format!("unknown label `{s}`")))
}

fn parse_percent(s: &str) -> Result<f64> {
    let n: i64 = s
        .trim()
        .strip_suffix('%')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(format!("bad percentage `{s}`")))?;
    Ok(n as f64 / 100.0)
}

fn parse_confidences<L: ClassLabel>(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(", ").collect();
    if parts.len() != L::ALL.len() {
        return Err(bad(format!("expected {} confidences in `{s}`", L::ALL.len())));
    }
    L::ALL
        .iter()
        .zip(parts)
        .map(|(l, part)| {
            let v = part
                .strip_prefix(l.short_name())
                .and_then(|r| r.strip_prefix(": "))
                .ok_or_else(|| bad(format!("expected `{}` in `{part}`", l.short_name())))?;
            parse_percent(v)
        })
        .collect()
}

fn parse_source(s: &str) -> Result<PredictionSource> {
    match s {
        "zero_shot" => Ok(PredictionSource::ZeroShot),
        "evidence" => Ok(PredictionSource::Evidence),
        _ => Err(bad(format!("unknown source `{s}`"))),
    }
}

fn parse_row(line: &str) -> Result<EvidenceRow> {
    let chars: Vec<char> = line.chars().collect();
    let mut cells = Vec::with_capacity(6);
    let mut pos = 0;
    for w in WIDTHS {
        let end = (pos + w).min(chars.len());
        cells.push(chars[pos..end].iter().collect::<String>().trim_end().to_string());
        pos = end;
    }
    cells.push(chars[pos..].iter().collect());
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
    Ok(EvidenceRow {
        rank: cells[0].parse().map_err(|_| bad(format!("bad rank `{}`", cells[0])))?,
        case_id: String::new(),
        sim: num(&cells[1])?,
        alpha: num(&cells[2])?,
        abnormality: by_display(&cells[3])?,
        dementia: by_short(&cells[4])?,
        description: cells[5].clone(),
    })
}

/// Reads back the text layout. Percentages and two-decimal values come
/// back at display precision; case ids are not part of the text and stay empty.
pub fn parse_text(text: &str) -> Result<DiagnosticReport> {
    let mut lines = text.lines();
    let it = &mut lines;
    let abn_label: Abnormality = by_display(field(it, "Abnormality Type: ")?)?;
    let abn_probs = parse_confidences::<Abnormality>(field(it, "Abnormality Confidence: ")?)?;
    blank(it)?;
    let dx_label: Dementia = by_display(field(it, "Dementia Diagnosis: ")?)?;
    let dx_probs = parse_confidences::<Dementia>(field(it, "Dementia Confidence: ")?)?;
    blank(it)?;
    let sev_label: Severity = by_display(field(it, "Dementia Severity: ")?)?;
    let sev_probs = parse_confidences::<Severity>(field(it, "Severity Confidence: ")?)?;
    blank(it)?;
    let bin_label: BinaryDementia = by_display(field(it, "Binary Dementia: ")?)?;
    let prob_line = field(it, "Dementia Probability: ")?;
    let p_dementia = parse_percent(prob_line.split(' ').next().unwrap_or(""))?;
    blank(it)?;
    let n_rows: usize = field(it, "Evidence Table: Top-")?
        .strip_suffix(" Retrieved Reference Cases")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("bad evidence table title"))?;
    if it.next() != Some(table_line(HEADER).as_str()) {
        return Err(bad("missing evidence table header"));
    }
    let evidence = (0..n_rows)
        .map(|_| parse_row(it.next().ok_or_else(|| bad("missing evidence row"))?))
        .collect::<Result<Vec<_>>>()?;
    blank(it)?;
    let corpus_id = field(it, "Corpus: ")?.to_string();
    let encoder_id = field(it, "Encoder: ")?.to_string();
    let k = field(it, "k: ")?
        .parse()
        .map_err(|_| bad("bad k"))?;
    let sources: Vec<PredictionSource> = field(it, "Sources: ")?
        .split(", ")
        .map(|kv| parse_source(kv.split_once('=').map(|(_, v)| v).unwrap_or("")))
        .collect::<Result<_>>()?;
    if sources.len() != 4 {
        return Err(bad("expected four prediction sources"));
    }
    let alpha_source = match field(it, "Evidence weights: ")? {
        "attention" => AlphaSource::Attention,
        "similarity_softmax" => AlphaSource::SimilaritySoftmax,
        other => return Err(bad(format!("unknown weight source `{other}`"))),
    };
    Ok(DiagnosticReport {
        predictions: Predictions {
            abnormality: ClassPrediction {
                label: abn_label,
                probabilities: abn_probs,
            },
            binary: BinaryPrediction {
                label: bin_label,
                p_dementia,
            },
            dementia_type: ClassPrediction {
                label: dx_label,
                probabilities: dx_probs,
            },
            severity: ClassPrediction {
                label: sev_label,
                probabilities: sev_probs,
            },
        },
        evidence,
        metadata: ReportMetadata {
            schema_version: REPORT_SCHEMA_VERSION,
            corpus_id,
            encoder_id,
            k,
            sources: PredictionSources {
                abnormality: sources[0],
                binary: sources[1],
                dementia_type: sources[2],
                severity: sources[3],
            },
            alpha_source,
            generated_at: None,
        },
    })
}
