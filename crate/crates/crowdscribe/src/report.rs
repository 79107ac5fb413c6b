//! Report rendering: a machine-readable TSV, a human-readable markdown view
//! of the same numbers, and a parser so the markdown can be regenerated from
//! a stored TSV.
//!
//! Values are formatted once, when a [`ReportRow`] is built, and carried as
//! strings from then on. Rendering is therefore trivially byte-stable and a
//! parse/render round trip reproduces the input exactly.

use crate::error::{Error, Result};
use crate::pipeline::{SimulationReport, SubsetOutcome};

/// Header metadata carried as `# key value` comment lines in the TSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    pub strategy: String,
    pub alpha: String,
    pub seed: String,
    pub target_reject_rate: String,
    pub threshold: String,
}

/// One subset's worth of report numbers, already formatted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub subset: String,
    pub utterances: String,
    pub responses: String,
    pub workers: String,
    pub hours: String,
    pub raw_twer: String,
    pub raw_del: String,
    pub raw_ins: String,
    pub raw_sub: String,
    pub reject_rate: String,
    pub post_cem_twer: String,
    pub final_twer: String,
    pub accepted_responses: String,
    pub accepted_words: String,
    pub accepted_twer: String,
    pub accepted_del: String,
    pub accepted_ins: String,
    pub accepted_sub: String,
    pub rejected_responses: String,
    pub rejected_words: String,
    pub rejected_twer: String,
    pub rejected_del: String,
    pub rejected_ins: String,
    pub rejected_sub: String,
}

/// TSV column order.
pub const COLUMNS: [&str; 24] = [
    "subset",
    "utterances",
    "responses",
    "workers",
    "hours",
    "raw_twer",
    "raw_del",
    "raw_ins",
    "raw_sub",
    "reject_rate",
    "post_cem_twer",
    "final_twer",
    "accepted_responses",
    "accepted_words",
    "accepted_twer",
    "accepted_del",
    "accepted_ins",
    "accepted_sub",
    "rejected_responses",
    "rejected_words",
    "rejected_twer",
    "rejected_del",
    "rejected_ins",
    "rejected_sub",
];

impl ReportRow {
    fn to_values(&self) -> [&str; 24] {
        [
            &self.subset,
            &self.utterances,
            &self.responses,
            &self.workers,
            &self.hours,
            &self.raw_twer,
            &self.raw_del,
            &self.raw_ins,
            &self.raw_sub,
            &self.reject_rate,
            &self.post_cem_twer,
            &self.final_twer,
            &self.accepted_responses,
            &self.accepted_words,
            &self.accepted_twer,
            &self.accepted_del,
            &self.accepted_ins,
            &self.accepted_sub,
            &self.rejected_responses,
            &self.rejected_words,
            &self.rejected_twer,
            &self.rejected_del,
            &self.rejected_ins,
            &self.rejected_sub,
        ]
    }

    fn from_values(v: &[&str]) -> ReportRow {
        ReportRow {
            subset: v[0].to_string(),
            utterances: v[1].to_string(),
            responses: v[2].to_string(),
            workers: v[3].to_string(),
            hours: v[4].to_string(),
            raw_twer: v[5].to_string(),
            raw_del: v[6].to_string(),
            raw_ins: v[7].to_string(),
            raw_sub: v[8].to_string(),
            reject_rate: v[9].to_string(),
            post_cem_twer: v[10].to_string(),
            final_twer: v[11].to_string(),
            accepted_responses: v[12].to_string(),
            accepted_words: v[13].to_string(),
            accepted_twer: v[14].to_string(),
            accepted_del: v[15].to_string(),
            accepted_ins: v[16].to_string(),
            accepted_sub: v[17].to_string(),
            rejected_responses: v[18].to_string(),
            rejected_words: v[19].to_string(),
            rejected_twer: v[20].to_string(),
            rejected_del: v[21].to_string(),
            rejected_ins: v[22].to_string(),
            rejected_sub: v[23].to_string(),
        }
    }
}

/// Rate as a fixed-precision percentage.
fn pct(x: f64) -> String {
    format!("{:.4}", 100.0 * x)
}

fn subset_row(name: &str, o: &SubsetOutcome) -> ReportRow {
    ReportRow {
        subset: name.to_string(),
        utterances: o.utterances.to_string(),
        responses: o.responses.to_string(),
        workers: o.workers.to_string(),
        hours: format!("{:.2}", o.hours),
        raw_twer: pct(o.raw.breakdown.twer()),
        raw_del: pct(o.raw.breakdown.del_rate()),
        raw_ins: pct(o.raw.breakdown.ins_rate()),
        raw_sub: pct(o.raw.breakdown.sub_rate()),
        reject_rate: pct(o.reject_rate()),
        post_cem_twer: pct(o.post_cem.breakdown.twer()),
        final_twer: pct(o.final_output.twer()),
        accepted_responses: o.accepted.responses.to_string(),
        accepted_words: format!("{:.1}", o.accepted.mean_words()),
        accepted_twer: pct(o.accepted.breakdown.twer()),
        accepted_del: pct(o.accepted.breakdown.del_rate()),
        accepted_ins: pct(o.accepted.breakdown.ins_rate()),
        accepted_sub: pct(o.accepted.breakdown.sub_rate()),
        rejected_responses: o.rejected.responses.to_string(),
        rejected_words: format!("{:.1}", o.rejected.mean_words()),
        rejected_twer: pct(o.rejected.breakdown.twer()),
        rejected_del: pct(o.rejected.breakdown.del_rate()),
        rejected_ins: pct(o.rejected.breakdown.ins_rate()),
        rejected_sub: pct(o.rejected.breakdown.sub_rate()),
    }
}

pub fn report_meta(report: &SimulationReport) -> ReportMeta {
    ReportMeta {
        strategy: report.strategy.name().to_string(),
        alpha: format!("{}", report.alpha),
        seed: report.seed.to_string(),
        target_reject_rate: format!("{}", report.target_reject_rate),
        threshold: format!("{:.6}", report.threshold),
    }
}

/// Per-subset rows in subset order, then an `all` row.
pub fn report_rows(report: &SimulationReport) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = report
        .per_subset
        .iter()
        .map(|(s, o)| subset_row(s.name(), o))
        .collect();
    rows.push(subset_row("all", &report.overall));
    rows
}

/// Renders meta lines, a header, and one line per row.
pub fn render_tsv(meta: &ReportMeta, rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# strategy {}\n", meta.strategy));
    out.push_str(&format!("# alpha {}\n", meta.alpha));
    out.push_str(&format!("# seed {}\n", meta.seed));
    out.push_str(&format!("# target_reject_rate {}\n", meta.target_reject_rate));
    out.push_str(&format!("# threshold {}\n", meta.threshold));
    out.push_str(&COLUMNS.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_values().join("\t"));
        out.push('\n');
    }
    out
}

/// Inverse of [`render_tsv`].
pub fn parse_tsv(text: &str) -> Result<(ReportMeta, Vec<ReportRow>)> {
    let mut meta: std::collections::BTreeMap<String, String> = std::collections::BTreeMap::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once(' ') {
                meta.insert(k.to_string(), v.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if fields != COLUMNS {
                return Err(Error::parse("report", i + 1, "unexpected report header"));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != COLUMNS.len() {
            return Err(Error::parse(
                "report",
                i + 1,
                format!("expected {} columns, got {}", COLUMNS.len(), fields.len()),
            ));
        }
        rows.push(ReportRow::from_values(&fields));
    }
    if !saw_header {
        return Err(Error::parse("report", 1, "missing report header"));
    }
    let take = |key: &str| -> Result<String> {
        meta.get(key)
            .cloned()
            .ok_or_else(|| Error::parse("report", 1, format!("missing meta line # {key}")))
    };
    let meta = ReportMeta {
        strategy: take("strategy")?,
        alpha: take("alpha")?,
        seed: take("seed")?,
        target_reject_rate: take("target_reject_rate")?,
        threshold: take("threshold")?,
    };
    Ok((meta, rows))
}

fn md_table(out: &mut String, header: &[&str], rows: &[Vec<&str>]) {
    out.push_str("| ");
    out.push_str(&header.join(" | "));
    out.push_str(" |\n|");
    for (i, _) in header.iter().enumerate() {
        out.push_str(if i == 0 { "---|" } else { "---:|" });
    }
    out.push('\n');
    for row in rows {
        out.push_str("| ");
        out.push_str(&row.join(" | "));
        out.push_str(" |\n");
    }
}

/// Human-readable view of the same numbers as the TSV.
pub fn render_markdown(meta: &ReportMeta, rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str("# Transcription quality report\n\n");
    out.push_str(&format!(
        "Strategy `{}`, alpha {}, seed {}. The gate rejects responses whose \
         predicted error count exceeds {} (threshold calibrated to a reject \
         rate of {}).\n\n",
        meta.strategy, meta.alpha, meta.seed, meta.threshold, meta.target_reject_rate
    ));

    out.push_str("## Corpus\n\n");
    let corpus_rows: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| {
            vec![
                r.subset.as_str(),
                r.utterances.as_str(),
                r.hours.as_str(),
                r.workers.as_str(),
                r.responses.as_str(),
                r.raw_twer.as_str(),
            ]
        })
        .collect();
    md_table(
        &mut out,
        &["Subset", "Utterances", "Hours", "Workers", "Responses", "Raw TWER (%)"],
        &corpus_rows,
    );

    out.push_str("\n## Gate and final selection\n\n");
    let gate_rows: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| {
            vec![
                r.subset.as_str(),
                r.raw_twer.as_str(),
                r.reject_rate.as_str(),
                r.post_cem_twer.as_str(),
                r.final_twer.as_str(),
            ]
        })
        .collect();
    md_table(
        &mut out,
        &[
            "Subset",
            "Raw TWER (%)",
            "Reject rate (%)",
            "Post-gate TWER (%)",
            "Final TWER (%)",
        ],
        &gate_rows,
    );

    out.push_str("\n## Error types by gate decision\n\n");
    if let Some(all) = rows.last() {
        let decision_rows: Vec<Vec<&str>> = vec![
            vec![
                "accepted",
                all.accepted_responses.as_str(),
                all.accepted_words.as_str(),
                all.accepted_del.as_str(),
                all.accepted_ins.as_str(),
                all.accepted_sub.as_str(),
                all.accepted_twer.as_str(),
            ],
            vec![
                "rejected",
                all.rejected_responses.as_str(),
                all.rejected_words.as_str(),
                all.rejected_del.as_str(),
                all.rejected_ins.as_str(),
                all.rejected_sub.as_str(),
                all.rejected_twer.as_str(),
            ],
        ];
        md_table(
            &mut out,
            &[
                "Pool",
                "Responses",
                "Mean words",
                "Del (%)",
                "Ins (%)",
                "Sub (%)",
                "TWER (%)",
            ],
            &decision_rows,
        );
    }
    out
}

/// TSV for a freshly simulated report.
pub fn tsv_for(report: &SimulationReport) -> String {
    render_tsv(&report_meta(report), &report_rows(report))
}

/// Markdown for a freshly simulated report.
pub fn markdown_for(report: &SimulationReport) -> String {
    render_markdown(&report_meta(report), &report_rows(report))
}
