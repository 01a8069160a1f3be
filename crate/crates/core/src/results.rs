//! Export rows, TSV serialization and capture frequency tables.
//!
//! TSV layout: a header row, then one row per match. The fixed columns are
//! `doc_id`, `sent_id` and `sentence`, followed by six columns per capture
//! in sorted name order: `<c>.name`, `<c>.text`, `<c>.token_start`,
//! `<c>.token_end`, `<c>.char_start`, `<c>.char_end`. A capture absent from
//! a match leaves all six cells empty. Token bounds are inclusive; character
//! offsets are half-open. In cells, backslash, tab, newline and carriage
//! return are written as `\\`, `\t`, `\n` and `\r`.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::index::Index;
use crate::matching::{Match, Span};

/// Anything that can return sentence text by ordinal.
pub trait SentenceSource {
    fn sentence_text(&self, ordinal: u32) -> &str;
}

impl SentenceSource for Index {
    fn sentence_text(&self, ordinal: u32) -> &str {
        &self.sentence(ordinal).text
    }
}

impl SentenceSource for Corpus {
    fn sentence_text(&self, ordinal: u32) -> &str {
        &self.sentences[ordinal as usize].text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRow {
    pub doc_id: String,
    pub sent_id: String,
    pub sentence: String,
    /// One entry per capture name, in header order.
    pub captures: Vec<(String, Option<Span>)>,
}

impl ExportRow {
    pub fn from_match(m: &Match, names: &[String], source: &dyn SentenceSource) -> Self {
        ExportRow {
            doc_id: m.sentence.doc_id.clone(),
            sent_id: m.sentence.sent_id.clone(),
            sentence: source.sentence_text(m.sentence.ordinal).to_string(),
            captures: names.iter().map(|n| (n.clone(), m.captures.get(n).cloned())).collect(),
        }
    }

    /// The row as one TSV line, newline included.
    pub fn to_tsv_line(&self) -> String {
        let mut cells = vec![escape(&self.doc_id), escape(&self.sent_id), escape(&self.sentence)];
        for (name, span) in &self.captures {
            match span {
                Some(s) => cells.extend([
                    escape(name),
                    escape(&s.text),
                    s.token_start.to_string(),
                    s.token_end.to_string(),
                    s.char_start.to_string(),
                    s.char_end.to_string(),
                ]),
                None => cells.extend(std::iter::repeat_n(String::new(), 6)),
            }
        }
        let mut line = cells.join("\t");
        line.push('\n');
        line
    }
}

const CAPTURE_COLUMNS: [&str; 6] = ["name", "text", "token_start", "token_end", "char_start", "char_end"];

/// Header line, newline included.
pub fn tsv_header(names: &[String]) -> String {
    let mut cols: Vec<String> = vec!["doc_id".into(), "sent_id".into(), "sentence".into()];
    for n in names {
        cols.extend(CAPTURE_COLUMNS.iter().map(|c| format!("{n}.{c}")));
    }
    let mut line = cols.join("\t");
    line.push('\n');
    line
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("TSV I/O: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// Writes a header and one row per match. Returns the number of rows.
pub fn write_tsv(
    mut out: impl Write,
    names: &[String],
    matches: impl IntoIterator<Item = Match>,
    source: &dyn SentenceSource,
) -> io::Result<usize> {
    out.write_all(tsv_header(names).as_bytes())?;
    let mut n = 0;
    for m in matches {
        out.write_all(ExportRow::from_match(&m, names, source).to_tsv_line().as_bytes())?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Reads a TSV export back into capture names and rows.
pub fn read_tsv(reader: impl BufRead) -> Result<(Vec<String>, Vec<ExportRow>), TsvError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(TsvError::Malformed { line: 1, message: "missing header".into() })??;
    let cols: Vec<&str> = header.split('\t').collect();
    let bad = |line: usize, message: String| TsvError::Malformed { line, message };
    if cols.len() < 3 || cols[..3] != ["doc_id", "sent_id", "sentence"] || !(cols.len() - 3).is_multiple_of(6) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut names = Vec::new();
    for group in cols[3..].chunks(6) {
        let name = group[0].strip_suffix(".name").ok_or_else(|| bad(1, format!("unexpected column `{}`", group[0])))?;
        for (col, suffix) in group.iter().zip(CAPTURE_COLUMNS) {
            if *col != format!("{name}.{suffix}") {
                return Err(bad(1, format!("unexpected column `{col}`")));
            }
        }
        names.push(name.to_string());
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != cols.len() {
            return Err(bad(line_no, format!("expected {} cells, found {}", cols.len(), cells.len())));
        }
        let text = |c: &str| unescape(c).map_err(|m| bad(line_no, m));
        let num = |c: &str| c.parse::<usize>().map_err(|e| bad(line_no, format!("bad number `{c}`: {e}")));
        let mut captures = Vec::with_capacity(names.len());
        for (name, group) in names.iter().zip(cells[3..].chunks(6)) {
            if group.iter().all(|c| c.is_empty()) {
                captures.push((name.clone(), None));
                continue;
            }
            if text(group[0])? != *name {
                return Err(bad(line_no, format!("capture column holds `{}`, expected `{name}`", group[0])));
            }
            captures.push((
                name.clone(),
                Some(Span {
                    text: text(group[1])?,
                    token_start: num(group[2])?,
                    token_end: num(group[3])?,
                    char_start: num(group[4])?,
                    char_end: num(group[5])?,
                }),
            ));
        }
        rows.push(ExportRow { doc_id: text(cells[0])?, sent_id: text(cells[1])?, sentence: text(cells[2])?, captures });
    }
    Ok((names, rows))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyRow {
    /// Case-folded capture text.
    pub key: String,
    /// Most frequent raw form; ties go to the smallest string.
    pub display: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub capture: String,
    pub rows: Vec<FrequencyRow>,
    /// Matches without this capture.
    pub excluded: usize,
    pub total: usize,
}

/// Groups matches by the case-folded text of one capture, most frequent
/// first, ties by key.
pub fn aggregate_by_capture<'m>(matches: impl IntoIterator<Item = &'m Match>, capture: &str) -> FrequencyTable {
    let mut groups: HashMap<String, HashMap<&'m str, usize>> = HashMap::new();
    let (mut total, mut excluded) = (0, 0);
    for m in matches {
        total += 1;
        match m.captures.get(capture) {
            Some(span) => *groups.entry(span.text.to_lowercase()).or_default().entry(span.text.as_str()).or_default() += 1,
            None => excluded += 1,
        }
    }
    let mut rows: Vec<FrequencyRow> = groups
        .into_iter()
        .map(|(key, forms)| {
            let count = forms.values().sum();
            let display = forms
                .into_iter()
                .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)))
                .map(|(f, _)| f.to_string())
                .unwrap_or_default();
            FrequencyRow { key, display, count }
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    FrequencyTable { capture: capture.to_string(), rows, excluded, total }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;
    use crate::matching::{Evaluator, Mode, Query, SentenceRef};
    use crate::query::parse_boolean;

    fn fixture() -> Index {
        Index::build(crate::corpus::load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl")).unwrap())
    }

    fn m(caps: &[(&str, &str)]) -> Match {
        Match {
            sentence: SentenceRef { ordinal: 0, doc_id: "d".into(), sent_id: "s".into() },
            mode: Mode::Boolean,
            captures: caps
                .iter()
                .map(|(k, v)| {
                    let span =
                        Span { token_start: 0, token_end: 0, char_start: 0, char_end: v.chars().count(), text: v.to_string() };
                    (k.to_string(), span)
                })
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let mut out = Vec::new();
        let n = write_tsv(&mut out, &["r".into()], Vec::new(), &Corpus::default()).unwrap();
        assert_eq!(n, 0);
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "doc_id\tsent_id\tsentence\tr.name\tr.text\tr.token_start\tr.token_end\tr.char_start\tr.char_end\n"
        );
    }

    #[test]
    fn fixture_row_carries_stored_offsets() {
        let idx = fixture();
        let q = Query::Boolean(parse_boolean("r:hypertension children").unwrap());
        let eval = Evaluator::new(&idx).eval(&q).unwrap();
        assert_eq!(eval.matches.len(), 1);
        let mut out = Vec::new();
        write_tsv(&mut out, &eval.capture_names, eval.matches.clone(), &idx).unwrap();
        let (names, rows) = read_tsv(out.as_slice()).unwrap();
        assert_eq!(names, ["r"]);
        let sent = idx.sentence(eval.matches[0].sentence.ordinal);
        let span = rows[0].captures[0].1.clone().unwrap();
        let tok = &sent.tokens[span.token_start];
        assert_eq!(span.text, "hypertension");
        assert_eq!((span.token_start, span.token_end), (0, 0));
        assert_eq!((span.char_start, span.char_end), (tok.char_start, tok.char_end));
        assert_eq!(rows[0].sentence, sent.text);
        let via_offsets: String = sent.text.chars().skip(span.char_start).take(span.char_end - span.char_start).collect();
        assert_eq!(via_offsets, span.text);
    }

    #[test]
    fn absent_capture_gives_empty_cells() {
        let idx = fixture();
        let q = Query::Boolean(parse_boolean("r:e=DISEASE ?o:zzz").unwrap());
        let eval = Evaluator::new(&idx).eval(&q).unwrap();
        let line = ExportRow::from_match(&eval.matches[0], &eval.capture_names, &idx).to_tsv_line();
        assert!(line.starts_with(&eval.matches[0].sentence.doc_id));
        assert!(line.contains("\t\t\t\t\t\t") || line.ends_with("\t\t\t\t\t\n"));
    }

    #[test]
    fn escaping_round_trip() {
        let s = "a\tb\\c\nd\re";
        assert_eq!(escape(s), "a\\tb\\\\c\\nd\\re");
        assert_eq!(unescape(&escape(s)).unwrap(), s);
        assert!(unescape("x\\q").is_err());
        assert!(unescape("x\\").is_err());
    }

    #[test]
    fn frequency_examples() {
        let ms = [m(&[("r", "a")]), m(&[("r", "b")]), m(&[("r", "a")]), m(&[])];
        let t = aggregate_by_capture(&ms, "r");
        let rows: Vec<_> = t.rows.iter().map(|r| (r.key.as_str(), r.count)).collect();
        assert_eq!(rows, [("a", 2), ("b", 1)]);
        assert_eq!((t.excluded, t.total), (1, 4));

        let ms = [m(&[("r", "y")]), m(&[("r", "X")]), m(&[("r", "x")]), m(&[("r", "Y")])];
        let t = aggregate_by_capture(&ms, "r");
        let rows: Vec<_> = t.rows.iter().map(|r| (r.key.as_str(), r.display.as_str(), r.count)).collect();
        assert_eq!(rows, [("x", "X", 2), ("y", "Y", 2)]);

        let ms = [m(&[("r", "Hypertension")]), m(&[("r", "hypertension")]), m(&[("r", "hypertension")])];
        assert_eq!(aggregate_by_capture(&ms, "r").rows[0].display, "hypertension");
    }

    #[test]
    fn risk_factor_aggregation_matches_manual_grouping() {
        let idx = fixture();
        let q = Query::Boolean(parse_boolean("<>r:e=DISEASE risk factor").unwrap());
        let eval = Evaluator::new(&idx).eval(&q).unwrap();
        let mut out = Vec::new();
        let n = write_tsv(&mut out, &eval.capture_names, eval.matches.clone(), &idx).unwrap();
        let (_, rows) = read_tsv(out.as_slice()).unwrap();
        assert_eq!(rows.len(), n);
        let mut manual: BTreeMap<String, usize> = BTreeMap::new();
        for row in &rows {
            if let Some(s) = &row.captures[0].1 {
                *manual.entry(s.text.to_lowercase()).or_default() += 1;
            }
        }
        let table = aggregate_by_capture(&eval.matches, "r");
        let from_table: BTreeMap<String, usize> = table.rows.iter().map(|r| (r.key.clone(), r.count)).collect();
        assert_eq!(from_table, manual);
        assert_eq!(table.rows.iter().map(|r| r.count).sum::<usize>() + table.excluded, rows.len());
    }

    proptest! {
        #[test]
        fn tsv_round_trip(
            doc in "\\PC{0,8}", sent in "[a-z\t\n\\\\ ]{0,12}",
            caps in prop::collection::vec(prop::option::of(("[a-z\t\\\\]{1,6}", 0usize..9, 0usize..40)), 0..3),
        ) {
            let names: Vec<String> = (0..caps.len()).map(|i| format!("c{i}")).collect();
            let row = ExportRow {
                doc_id: doc.clone(),
                sent_id: "s\t1".into(),
                sentence: sent.clone(),
                captures: names.iter().zip(&caps).map(|(n, c)| {
                    (n.clone(), c.as_ref().map(|(text, t, ch)| Span {
                        text: text.clone(), token_start: *t, token_end: t + 1, char_start: *ch, char_end: ch + 3,
                    }))
                }).collect(),
            };
            let text = format!("{}{}", tsv_header(&names), row.to_tsv_line());
            let (back_names, rows) = read_tsv(text.as_bytes()).unwrap();
            prop_assert_eq!(back_names, names);
            prop_assert_eq!(rows, vec![row]);
        }
    }
}
