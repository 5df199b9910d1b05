//! Line-oriented text formats for every report the pipeline emits.
//!
//! Layout shared by all formats: `# key=value` provenance headers, one
//! tab-separated column header, then one record per line. Floats are written
//! with Rust's shortest round-trip formatting, so emitted files are
//! byte-stable across runs and parse back to the exact same values.

use std::collections::BTreeMap;

use crate::advgen::AdversarialSample;
use crate::error::{Error, Result};
use crate::linalg::NormOrder;
use crate::metrics::{AttackCell, AttackReport, NIReport, NiEntry};
use crate::perturb::PerturbationKind;

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number {s:?}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad count {s:?}"),
    })
}

fn parse_u64(s: &str, line: usize) -> Result<u64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad integer {s:?}"),
    })
}

type Headers = BTreeMap<String, String>;
type NumberedLines<'a> = Vec<(usize, &'a str)>;

/// Splits a report into its `# key=value` headers and its data lines
/// (1-based line numbers attached for error messages).
fn split_headers(text: &str) -> Result<(Headers, NumberedLines<'_>)> {
    let mut headers = BTreeMap::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(rest) = raw.strip_prefix("# ") {
            let (key, value) = rest.split_once('=').ok_or(Error::Parse {
                line: line_no,
                message: "header must be `# key=value`".into(),
            })?;
            headers.insert(key.to_string(), value.to_string());
        } else if !raw.is_empty() {
            records.push((line_no, raw));
        }
    }
    Ok((headers, records))
}

fn header<'a>(headers: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    headers
        .get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::Format(format!("missing header {key}")))
}

// --- attack report ---------------------------------------------------------

pub fn attack_report_to_text(report: &AttackReport) -> String {
    let mut out = String::new();
    out.push_str("# report=attack v1\n");
    out.push_str(&format!("# config_hash={:016x}\n", report.config_hash));
    out.push_str(&format!("# seed={}\n", report.seed));
    out.push_str(&format!("# n_train={}\n", report.n_train));
    out.push_str(&format!("# n_eval={}\n", report.n_eval));
    out.push_str(&format!("# n_test={}\n", report.n_test));
    out.push_str(&format!("# clean_accuracy={}\n", report.clean_accuracy));
    out.push_str("method\teps\taccuracy\tn_test\tseed\n");
    for cell in &report.cells {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            cell.method, cell.eps, cell.accuracy, report.n_test, cell.seed
        ));
    }
    out
}

pub fn parse_attack_report(text: &str) -> Result<AttackReport> {
    let (headers, records) = split_headers(text)?;
    if header(&headers, "report")? != "attack v1" {
        return Err(Error::Format("not an attack report".into()));
    }
    let config_hash = u64::from_str_radix(header(&headers, "config_hash")?, 16)
        .map_err(|_| Error::Format("bad config_hash header".into()))?;
    let seed = header(&headers, "seed")?
        .parse()
        .map_err(|_| Error::Format("bad seed header".into()))?;
    let n_train = header(&headers, "n_train")?
        .parse()
        .map_err(|_| Error::Format("bad n_train header".into()))?;
    let n_eval = header(&headers, "n_eval")?
        .parse()
        .map_err(|_| Error::Format("bad n_eval header".into()))?;
    let n_test = header(&headers, "n_test")?
        .parse()
        .map_err(|_| Error::Format("bad n_test header".into()))?;
    let clean_accuracy: f64 = header(&headers, "clean_accuracy")?
        .parse()
        .map_err(|_| Error::Format("bad clean_accuracy header".into()))?;

    let mut cells = Vec::new();
    for (line_no, record) in records {
        let cols: Vec<&str> = record.split('\t').collect();
        if cols[0] == "method" {
            continue; // column header
        }
        if cols.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        cells.push(AttackCell {
            method: cols[0].to_string(),
            eps: parse_f64(cols[1], line_no)?,
            accuracy: parse_f64(cols[2], line_no)?,
            seed: parse_u64(cols[4], line_no)?,
        });
    }
    let report = AttackReport {
        config_hash,
        seed,
        n_train,
        n_eval,
        n_test,
        clean_accuracy,
        cells,
    };
    for cell in &report.cells {
        if !(0.0..=1.0).contains(&cell.accuracy) {
            return Err(Error::Format(format!(
                "accuracy {} outside [0, 1]",
                cell.accuracy
            )));
        }
    }
    Ok(report)
}

// --- NI report --------------------------------------------------------------

pub fn ni_report_to_text(report: &NIReport, config_hash: u64, seed: u64) -> String {
    let mut out = String::new();
    out.push_str("# report=ni v1\n");
    out.push_str(&format!("# config_hash={config_hash:016x}\n"));
    out.push_str(&format!("# seed={seed}\n"));
    out.push_str(&format!("# k={}\n", report.k));
    out.push_str(&format!("# similarity={}\n", report.similarity()));
    out.push_str(&format!("# eps={}\n", report.eps));
    out.push_str(&format!("# p={}\n", report.p));
    out.push_str(&format!("# kind={}\n", report.kind.label()));
    out.push_str("token\tid\tscore\n");
    for entry in &report.entries {
        out.push_str(&format!("{}\t{}\t{}\n", entry.token, entry.id, entry.score));
    }
    out.push_str(&format!("aggregate\t{}\n", report.aggregate));
    out
}

/// Parses an NI report; returns the report plus its provenance headers.
pub fn parse_ni_report(text: &str) -> Result<(NIReport, u64, u64)> {
    let (headers, records) = split_headers(text)?;
    if header(&headers, "report")? != "ni v1" {
        return Err(Error::Format("not an NI report".into()));
    }
    if header(&headers, "similarity")? != "cosine" {
        return Err(Error::Format("unsupported similarity".into()));
    }
    let config_hash = u64::from_str_radix(header(&headers, "config_hash")?, 16)
        .map_err(|_| Error::Format("bad config_hash header".into()))?;
    let seed = header(&headers, "seed")?
        .parse()
        .map_err(|_| Error::Format("bad seed header".into()))?;
    let k = header(&headers, "k")?
        .parse()
        .map_err(|_| Error::Format("bad k header".into()))?;
    let eps: f64 = header(&headers, "eps")?
        .parse()
        .map_err(|_| Error::Format("bad eps header".into()))?;
    let p = NormOrder::parse(header(&headers, "p")?)
        .ok_or_else(|| Error::Format("bad p header".into()))?;
    let kind = PerturbationKind::parse(header(&headers, "kind")?)
        .ok_or_else(|| Error::Format("bad kind header".into()))?;

    let mut entries = Vec::new();
    let mut aggregate: Option<f64> = None;
    for (line_no, record) in records {
        let cols: Vec<&str> = record.split('\t').collect();
        match cols[0] {
            "token" => continue,
            "aggregate" => {
                if cols.len() != 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "aggregate line needs one value".into(),
                    });
                }
                aggregate = Some(parse_f64(cols[1], line_no)?);
            }
            _ => {
                if cols.len() != 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected 3 columns, found {}", cols.len()),
                    });
                }
                entries.push(NiEntry {
                    token: cols[0].to_string(),
                    id: parse_usize(cols[1], line_no)?,
                    score: parse_f64(cols[2], line_no)?,
                });
            }
        }
    }
    let aggregate = aggregate.ok_or_else(|| Error::Format("missing aggregate line".into()))?;
    if entries.is_empty() {
        return Err(Error::Format("NI report has no token records".into()));
    }
    let mean: f64 = entries.iter().map(|e| e.score).sum::<f64>() / entries.len() as f64;
    if (mean - aggregate).abs() > 1e-12 {
        return Err(Error::Format(format!(
            "aggregate {aggregate} does not match the mean of the records {mean}"
        )));
    }
    Ok((
        NIReport {
            k,
            eps,
            p,
            kind,
            entries,
            aggregate,
        },
        config_hash,
        seed,
    ))
}

// --- adversarial samples -----------------------------------------------------

/// Renders token ids as space-joined text via a decode closure.
fn render(tokens: &[usize], decode: &dyn Fn(usize) -> String) -> String {
    tokens
        .iter()
        .map(|&t| decode(t))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn samples_to_text(
    samples: &[AdversarialSample],
    skipped: usize,
    config_hash: u64,
    seed: u64,
    decode: &dyn Fn(usize) -> String,
) -> String {
    let mut out = String::new();
    out.push_str("# report=samples v1\n");
    out.push_str(&format!("# config_hash={config_hash:016x}\n"));
    out.push_str(&format!("# seed={seed}\n"));
    out.push_str(&format!("# n_samples={}\n", samples.len()));
    out.push_str(&format!("# n_skipped={skipped}\n"));
    out.push_str(
        "original\tadversarial\tposition\toriginal_token\tnew_token\tlabel\tclean_pred\tadv_pred\tflipped\n",
    );
    for s in samples {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            render(&s.original, decode),
            render(&s.modified, decode),
            s.position,
            s.original_token,
            s.new_token,
            s.label,
            s.clean_prediction,
            s.adversarial_prediction,
            s.flipped()
        ));
    }
    out
}

// --- data-ratio report --------------------------------------------------------

/// One row of the training-data-ratio experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRatioRow {
    pub ratio: f64,
    pub n_train: usize,
    pub accuracy: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataRatioReport {
    pub config_hash: u64,
    pub seed: u64,
    pub eps: f64,
    pub clean_accuracy: f64,
    pub rows: Vec<DataRatioRow>,
}

pub fn data_ratio_report_to_text(report: &DataRatioReport) -> String {
    let mut out = String::new();
    out.push_str("# report=data-ratio v1\n");
    out.push_str(&format!("# config_hash={:016x}\n", report.config_hash));
    out.push_str(&format!("# seed={}\n", report.seed));
    out.push_str(&format!("# eps={}\n", report.eps));
    out.push_str(&format!("# clean_accuracy={}\n", report.clean_accuracy));
    out.push_str("ratio\tn_train\taccuracy\tseed\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.ratio, row.n_train, row.accuracy, row.seed
        ));
    }
    out
}

pub fn parse_data_ratio_report(text: &str) -> Result<DataRatioReport> {
    let (headers, records) = split_headers(text)?;
    if header(&headers, "report")? != "data-ratio v1" {
        return Err(Error::Format("not a data-ratio report".into()));
    }
    let config_hash = u64::from_str_radix(header(&headers, "config_hash")?, 16)
        .map_err(|_| Error::Format("bad config_hash header".into()))?;
    let seed = header(&headers, "seed")?
        .parse()
        .map_err(|_| Error::Format("bad seed header".into()))?;
    let eps: f64 = header(&headers, "eps")?
        .parse()
        .map_err(|_| Error::Format("bad eps header".into()))?;
    let clean_accuracy: f64 = header(&headers, "clean_accuracy")?
        .parse()
        .map_err(|_| Error::Format("bad clean_accuracy header".into()))?;
    let mut rows = Vec::new();
    for (line_no, record) in records {
        let cols: Vec<&str> = record.split('\t').collect();
        if cols[0] == "ratio" {
            continue;
        }
        if cols.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        rows.push(DataRatioRow {
            ratio: parse_f64(cols[0], line_no)?,
            n_train: parse_usize(cols[1], line_no)?,
            accuracy: parse_f64(cols[2], line_no)?,
            seed: parse_u64(cols[3], line_no)?,
        });
    }
    Ok(DataRatioReport {
        config_hash,
        seed,
        eps,
        clean_accuracy,
        rows,
    })
}
