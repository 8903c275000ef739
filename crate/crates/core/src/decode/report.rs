//! Human-readable alignments and the line-oriented evaluation record
//! format.
//!
//! Evaluation output is UTF-8, one tab-separated `key=value` record per
//! sentence followed by one summary record:
//!
//! ```text
//! id=17	ref=我/可以/去	hyp=我/去	ins=0	del=1	sub=0	wer=33.33
//! summary	sentences=1	ref_tokens=3	ins=0	del=1	sub=0	wer=33.33
//! ```

use std::fmt::Write;

use super::wer::{align, report_from_alignment, AlignedPair, EditKind, WerReport};
use super::DecodeError;

/// Alignment of two token sequences with a text rendering in which every
/// erroneous column is bracketed.
#[derive(Debug, Clone)]
pub struct AlignmentReport {
    pub pairs: Vec<AlignedPair<String>>,
    pub wer: Option<WerReport>,
    pub text: String,
}

impl AlignmentReport {
    /// Machine-readable `(op, ref_token, hyp_token)` triples, with `*`
    /// standing in for a missing token.
    pub fn triples(&self) -> Vec<(&'static str, String, String)> {
        self.pairs
            .iter()
            .map(|p| {
                (
                    op_code(p.kind),
                    p.reference.clone().unwrap_or_else(|| "*".into()),
                    p.hypothesis.clone().unwrap_or_else(|| "*".into()),
                )
            })
            .collect()
    }

    pub fn marked_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.kind != EditKind::Match).count()
    }
}

fn op_code(kind: EditKind) -> &'static str {
    match kind {
        EditKind::Match => "=",
        EditKind::Substitution => "S",
        EditKind::Insertion => "I",
        EditKind::Deletion => "D",
    }
}

pub fn alignment_report<T: AsRef<str>>(reference: &[T], hypothesis: &[T]) -> AlignmentReport {
    let r: Vec<String> = reference.iter().map(|t| t.as_ref().to_string()).collect();
    let h: Vec<String> = hypothesis.iter().map(|t| t.as_ref().to_string()).collect();
    let pairs = align(&r, &h);
    let wer = (!r.is_empty()).then(|| report_from_alignment(&pairs, r.len()));
    let mut ref_line = String::from("REF:");
    let mut hyp_line = String::from("HYP:");
    let mut op_line = String::from("OPS:");
    for p in &pairs {
        let rt = p.reference.as_deref().unwrap_or("*");
        let ht = p.hypothesis.as_deref().unwrap_or("*");
        if p.kind == EditKind::Match {
            write!(ref_line, " {rt}").unwrap();
            write!(hyp_line, " {ht}").unwrap();
        } else {
            write!(ref_line, " [{rt}]").unwrap();
            write!(hyp_line, " [{ht}]").unwrap();
        }
        write!(op_line, " {}", op_code(p.kind)).unwrap();
    }
    let text = format!("{ref_line}\n{hyp_line}\n{op_line}\n");
    AlignmentReport { pairs, wer, text }
}

/// Per-sentence evaluation record.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
    pub report: WerReport,
}

impl EvalRecord {
    pub fn new(id: impl Into<String>, reference: Vec<String>, hypothesis: Vec<String>) -> Result<Self, DecodeError> {
        let report = super::wer::wer(&reference, &hypothesis)?;
        Ok(Self {
            id: id.into(),
            reference,
            hypothesis,
            report,
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "id={}\tref={}\thyp={}\tins={}\tdel={}\tsub={}\twer={:.2}",
            self.id,
            self.reference.join("/"),
            self.hypothesis.join("/"),
            self.report.ins,
            self.report.del,
            self.report.sub,
            self.report.wer_percent
        )
    }

    pub fn parse(line: &str) -> Result<Self, DecodeError> {
        let fields = fields(line)?;
        let get = |k: &str| {
            fields
                .iter()
                .find(|(key, _)| *key == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| DecodeError::Record(format!("missing field {k:?} in {line:?}")))
        };
        let tokens = |v: &str| -> Vec<String> {
            if v.is_empty() {
                Vec::new()
            } else {
                v.split('/').map(str::to_string).collect()
            }
        };
        let num = |k: &str| -> Result<usize, DecodeError> {
            get(k)?
                .parse()
                .map_err(|_| DecodeError::Record(format!("field {k:?} is not a count")))
        };
        let reference = tokens(get("ref")?);
        let sum = reference.len();
        let (ins, del, sub) = (num("ins")?, num("del")?, num("sub")?);
        if sum == 0 {
            return Err(DecodeError::EmptyReference);
        }
        let printed: f64 = get("wer")?
            .parse()
            .map_err(|_| DecodeError::Record("field \"wer\" is not a number".into()))?;
        // The printed rate is rounded; recompute it from the counts.
        let wer_percent = 100.0 * (ins + del + sub) as f64 / sum as f64;
        if (printed - wer_percent).abs() > 0.005 + 1e-9 {
            return Err(DecodeError::Record(format!(
                "wer={printed} disagrees with counts ({wer_percent:.2})"
            )));
        }
        Ok(Self {
            id: get("id")?.to_string(),
            hypothesis: tokens(get("hyp")?),
            reference,
            report: WerReport {
                ins,
                del,
                sub,
                sum,
                wer_percent,
            },
        })
    }
}

fn fields(line: &str) -> Result<Vec<(&str, &str)>, DecodeError> {
    line.split('\t')
        .filter(|f| *f != "summary")
        .map(|f| {
            f.split_once('=')
                .ok_or_else(|| DecodeError::Record(format!("field {f:?} lacks '='")))
        })
        .collect()
}

/// Micro-averaged corpus WER: total errors over total reference tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorpusSummary {
    pub sentences: usize,
    pub ref_tokens: usize,
    pub ins: usize,
    pub del: usize,
    pub sub: usize,
}

impl CorpusSummary {
    pub fn add(&mut self, r: &WerReport) {
        self.sentences += 1;
        self.ref_tokens += r.sum;
        self.ins += r.ins;
        self.del += r.del;
        self.sub += r.sub;
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Self {
        let mut s = Self::default();
        for r in records {
            s.add(&r.report);
        }
        s
    }

    pub fn wer_percent(&self) -> f64 {
        if self.ref_tokens == 0 {
            return 0.0;
        }
        100.0 * (self.ins + self.del + self.sub) as f64 / self.ref_tokens as f64
    }

    pub fn to_line(&self) -> String {
        format!(
            "summary\tsentences={}\tref_tokens={}\tins={}\tdel={}\tsub={}\twer={:.2}",
            self.sentences,
            self.ref_tokens,
            self.ins,
            self.del,
            self.sub,
            self.wer_percent()
        )
    }

    pub fn parse(line: &str) -> Result<Self, DecodeError> {
        if !line.starts_with("summary\t") {
            return Err(DecodeError::Record(format!("not a summary line: {line:?}")));
        }
        let fields = fields(line)?;
        let num = |k: &str| -> Result<usize, DecodeError> {
            fields
                .iter()
                .find(|(key, _)| *key == k)
                .and_then(|(_, v)| v.parse().ok())
                .ok_or_else(|| DecodeError::Record(format!("bad or missing field {k:?}")))
        };
        Ok(Self {
            sentences: num("sentences")?,
            ref_tokens: num("ref_tokens")?,
            ins: num("ins")?,
            del: num("del")?,
            sub: num("sub")?,
        })
    }
}
