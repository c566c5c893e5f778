//! Dataset model and JSONL ingestion.
//!
//! One [`Example`] per line:
//!
//! ```text
//! {"id": str, "query": str|null, "dataset": str,
//!  "documents": [{"id": str, "text": str, "date": "YYYY-MM-DD"|null, "source": str|null}],
//!  "references": [str], "acus": [str]|null}
//! ```
//!
//! Document order in the file is the order every pipeline sees.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::word_tokenize;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate example id `{id}`")]
    DuplicateExampleId { line: usize, id: String },
    #[error("example `{example}`: duplicate document id `{id}`")]
    DuplicateDocumentId { example: String, id: String },
    #[error("example `{example}` has no documents")]
    EmptyDocuments { example: String },
    #[error("example `{example}` has no reference summaries")]
    EmptyReferences { example: String },
    #[error("example `{example}`: {what} must not be empty")]
    EmptyField { example: String, what: String },
    #[error("example `{example}`: document `{document}` has no date")]
    MissingTimestamp { example: String, document: String },
    #[error("max_per_day must be at least 1")]
    InvalidDayCap,
}

impl CorpusError {
    fn at_line(self, line: usize) -> Self {
        match self {
            CorpusError::Parse { message, .. } => CorpusError::Parse { line, message },
            other => CorpusError::Parse {
                line,
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "date", default)]
    pub timestamp: Option<NaiveDate>,
    #[serde(default)]
    pub source: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            timestamp: None,
            source: None,
        }
    }

    pub fn dated(mut self, date: NaiveDate) -> Self {
        self.timestamp = Some(date);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(rename = "dataset", default)]
    pub dataset_tag: String,
    pub documents: Vec<Document>,
    pub references: Vec<String>,
    #[serde(default)]
    pub acus: Option<Vec<String>>,
}

impl Example {
    /// Checks the per-example invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let example = || self.id.clone();
        if self.id.trim().is_empty() {
            return Err(CorpusError::EmptyField {
                example: example(),
                what: "example id".into(),
            });
        }
        if self.documents.is_empty() {
            return Err(CorpusError::EmptyDocuments { example: example() });
        }
        if self.references.is_empty() {
            return Err(CorpusError::EmptyReferences { example: example() });
        }
        let mut seen = HashSet::with_capacity(self.documents.len());
        for doc in &self.documents {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyField {
                    example: example(),
                    what: "document id".into(),
                });
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    example: example(),
                    what: format!("text of document `{}`", doc.id),
                });
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateDocumentId {
                    example: example(),
                    id: doc.id.clone(),
                });
            }
        }
        Ok(())
    }

    /// The question passed to the summarizer and the retriever.
    pub fn question(&self) -> &str {
        match self.query.as_deref() {
            Some(q) if !q.trim().is_empty() => q,
            _ => crate::backend::DEFAULT_QUESTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "validation" | "val" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub split: Split,
}

impl Dataset {
    pub fn get(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// One compact JSON object per line, LF terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&serde_json::to_string(ex).expect("examples always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = File::create(path).map_err(io)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}

/// Parses JSONL text; blank lines are skipped.
pub fn parse_dataset<R: BufRead>(reader: R, split: Split) -> Result<Dataset, CorpusError> {
    let mut examples = Vec::new();
    let mut ids = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        example.validate().map_err(|e| match e {
            e @ (CorpusError::DuplicateDocumentId { .. }
            | CorpusError::EmptyDocuments { .. }
            | CorpusError::EmptyReferences { .. }) => e,
            other => other.at_line(line_no),
        })?;
        if ids.insert(example.id.clone(), line_no).is_some() {
            return Err(CorpusError::DuplicateExampleId {
                line: line_no,
                id: example.id,
            });
        }
        examples.push(example);
    }
    Ok(Dataset { examples, split })
}

pub fn load_dataset(path: &Path, split: Split) -> Result<Dataset, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(BufReader::new(file), split)
}

/// Keeps at most `max_per_day` documents per calendar day, taking the
/// earliest in dataset order. Surviving documents keep their relative order.
pub fn cap_per_day(example: &Example, max_per_day: usize) -> Result<Example, CorpusError> {
    if max_per_day == 0 {
        return Err(CorpusError::InvalidDayCap);
    }
    let mut per_day: HashMap<NaiveDate, usize> = HashMap::new();
    let mut documents = Vec::with_capacity(example.documents.len());
    for doc in &example.documents {
        let day = doc.timestamp.ok_or_else(|| CorpusError::MissingTimestamp {
            example: example.id.clone(),
            document: doc.id.clone(),
        })?;
        let count = per_day.entry(day).or_insert(0);
        if *count < max_per_day {
            *count += 1;
            documents.push(doc.clone());
        }
    }
    Ok(Example {
        documents,
        ..example.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub examples: usize,
    pub docs_per_example: f64,
    pub avg_doc_words: f64,
    pub avg_summary_words: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "examples={} docs/example={:.1} avg_doc_words={:.1} avg_summary_words={:.1}",
            self.examples, self.docs_per_example, self.avg_doc_words, self.avg_summary_words
        )
    }
}

/// Corpus summary statistics. Word averages are pooled over all documents
/// and all reference summaries respectively.
pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let mut docs = 0usize;
    let mut doc_words = 0usize;
    let mut refs = 0usize;
    let mut ref_words = 0usize;
    for ex in &dataset.examples {
        docs += ex.documents.len();
        doc_words += ex
            .documents
            .iter()
            .map(|d| word_tokenize(&d.text).len())
            .sum::<usize>();
        refs += ex.references.len();
        ref_words += ex
            .references
            .iter()
            .map(|r| word_tokenize(r).len())
            .sum::<usize>();
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    DatasetStats {
        examples: dataset.examples.len(),
        docs_per_example: ratio(docs, dataset.examples.len()),
        avg_doc_words: ratio(doc_words, docs),
        avg_summary_words: ratio(ref_words, refs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, d).unwrap()
    }

    fn example(docs: Vec<Document>) -> Example {
        Example {
            id: "ex".into(),
            query: None,
            dataset_tag: "test".into(),
            documents: docs,
            references: vec!["ref".into()],
            acus: None,
        }
    }

    #[test]
    fn loads_documents_in_file_order() {
        let line = r#"{"id":"e1","query":null,"dataset":"wcep","documents":[{"id":"c","text":"x"},{"id":"a","text":"y","date":"2024-01-02"},{"id":"b","text":"z","source":"ap"}],"references":["r"],"acus":null}"#;
        let ds = parse_dataset(line.as_bytes(), Split::Test).unwrap();
        assert_eq!(ds.examples.len(), 1);
        let ids: Vec<_> = ds.examples[0].documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(
            ds.examples[0].documents[1].timestamp,
            NaiveDate::from_ymd_opt(2024, 1, 2)
        );
    }

    #[test]
    fn duplicate_document_id_is_named() {
        let line = r#"{"id":"e1","dataset":"d","documents":[{"id":"d1","text":"x"},{"id":"d1","text":"y"}],"references":["r"]}"#;
        let err = parse_dataset(line.as_bytes(), Split::Test).unwrap_err();
        assert!(matches!(&err, CorpusError::DuplicateDocumentId { id, .. } if id == "d1"));
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn structural_errors() {
        let empty = r#"{"id":"e1","dataset":"d","documents":[],"references":["r"]}"#;
        assert!(matches!(
            parse_dataset(empty.as_bytes(), Split::Test),
            Err(CorpusError::EmptyDocuments { .. })
        ));
        let no_refs = r#"{"id":"e1","dataset":"d","documents":[{"id":"a","text":"x"}],"references":[]}"#;
        assert!(matches!(
            parse_dataset(no_refs.as_bytes(), Split::Test),
            Err(CorpusError::EmptyReferences { .. })
        ));
        let blank = r#"{"id":"e1","dataset":"d","documents":[{"id":"a","text":"  "}],"references":["r"]}"#;
        assert!(matches!(
            parse_dataset(blank.as_bytes(), Split::Test),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        let two = format!("{no_refs}\n{{not json");
        let two = two.replacen("[]", "[\"r\"]", 1);
        assert!(matches!(
            parse_dataset(two.as_bytes(), Split::Test),
            Err(CorpusError::Parse { line: 2, .. })
        ));
        let ok = r#"{"id":"e1","dataset":"d","documents":[{"id":"a","text":"x"}],"references":["r"]}"#;
        let dup = format!("{ok}\n\n{ok}\n");
        assert!(matches!(
            parse_dataset(dup.as_bytes(), Split::Test),
            Err(CorpusError::DuplicateExampleId { line: 3, .. })
        ));
    }

    #[test]
    fn day_cap_keeps_first_per_day() {
        let docs: Vec<_> = (0..7)
            .map(|i| Document::new(format!("d{i}"), "t").dated(day(1)))
            .collect();
        let capped = cap_per_day(&example(docs), 5).unwrap();
        let ids: Vec<_> = capped.documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d0", "d1", "d2", "d3", "d4"]);
    }

    #[test]
    fn day_cap_distinct_days_is_identity() {
        let docs: Vec<_> = (1..=6)
            .map(|i| Document::new(format!("d{i}"), "t").dated(day(i)))
            .collect();
        let ex = example(docs);
        assert_eq!(cap_per_day(&ex, 1).unwrap(), ex);
    }

    #[test]
    fn day_cap_interleaved_days_matches_grouping() {
        // 3 days x 6 docs, interleaved in dataset order.
        let docs: Vec<_> = (0..18)
            .map(|i| Document::new(format!("d{i}"), "t").dated(day(1 + (i % 3) as u32)))
            .collect();
        let ex = example(docs);
        let capped = cap_per_day(&ex, 5).unwrap();
        assert_eq!(capped.documents.len(), 15);

        // Oracle: group by day, take the first five of each, then restore order.
        let mut keep = HashSet::new();
        for d in 1..=3 {
            for doc in ex.documents.iter().filter(|x| x.timestamp == Some(day(d))).take(5) {
                keep.insert(doc.id.clone());
            }
        }
        let expected: Vec<_> = ex
            .documents
            .iter()
            .filter(|d| keep.contains(&d.id))
            .cloned()
            .collect();
        assert_eq!(capped.documents, expected);
        assert_eq!(cap_per_day(&capped, 5).unwrap(), capped);
    }

    #[test]
    fn day_cap_errors() {
        let ex = example(vec![Document::new("a", "t")]);
        assert!(matches!(
            cap_per_day(&ex, 5),
            Err(CorpusError::MissingTimestamp { .. })
        ));
        assert!(matches!(cap_per_day(&ex, 0), Err(CorpusError::InvalidDayCap)));
    }

    #[test]
    fn stats() {
        let empty = Dataset {
            examples: vec![],
            split: Split::Test,
        };
        let s = dataset_stats(&empty);
        assert_eq!((s.examples, s.docs_per_example, s.avg_doc_words, s.avg_summary_words), (0, 0.0, 0.0, 0.0));

        let ten = ["w"; 10].join(" ");
        let twenty = vec!["w"; 20].join(" ");
        let mut ex = example(vec![Document::new("a", ten), Document::new("b", twenty)]);
        ex.references = vec!["one two three four five six".into()];
        let s = dataset_stats(&Dataset {
            examples: vec![ex],
            split: Split::Test,
        });
        assert_eq!(s.examples, 1);
        assert_eq!(s.docs_per_example, 2.0);
        assert_eq!(s.avg_doc_words, 15.0);
        assert_eq!(s.avg_summary_words, 6.0);
    }

    #[test]
    fn default_question() {
        let mut ex = example(vec![Document::new("a", "t")]);
        assert_eq!(ex.question(), "Generate a summary of the document");
        ex.query = Some("What happened?".into());
        assert_eq!(ex.question(), "What happened?");
    }
}
