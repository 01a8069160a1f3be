//! Query ASTs for the boolean, sequential and contextual-restriction
//! languages, with one shared term-constraint grammar.
//!
//! The grammar is documented in `docs/query-syntax.md`. Every parser here
//! is a pure function returning either a validated AST or a [`ParseError`]
//! positioned at a character offset of the input.

pub(crate) mod parser;
mod render;

use std::collections::HashSet;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Token;

pub use parser::{parse_boolean, parse_context, parse_sequential, parse_term_constraint};

/// A token field a constraint can inspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Word,
    Lemma,
    Tag,
    Entity,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::Word, Field::Lemma, Field::Tag, Field::Entity];

    pub fn from_name(name: &str) -> Option<Field> {
        match name {
            "word" | "w" => Some(Field::Word),
            "lemma" | "l" => Some(Field::Lemma),
            "tag" | "t" => Some(Field::Tag),
            "entity" | "e" => Some(Field::Entity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Word => "word",
            Field::Lemma => "lemma",
            Field::Tag => "tag",
            Field::Entity => "entity",
        }
    }

    /// Word and lemma compare case-insensitively; tag and entity exactly.
    pub fn case_insensitive(self) -> bool {
        matches!(self, Field::Word | Field::Lemma)
    }

    /// Folds a value according to this field's case policy.
    pub fn normalize(self, value: &str) -> String {
        if self.case_insensitive() {
            value.to_lowercase()
        } else {
            value.to_string()
        }
    }

    /// The token's value for this field, unnormalized.
    pub fn value_of(self, token: &Token) -> Option<&str> {
        match self {
            Field::Word => Some(&token.word),
            Field::Lemma => Some(&token.lemma),
            Field::Tag => Some(&token.tag),
            Field::Entity => token.entity_label(),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    /// Any of the listed literal values.
    Exact(Vec<String>),
    /// A pattern that must match the whole field value.
    Regex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldConstraint {
    pub field: Field,
    pub matcher: Matcher,
}

impl FieldConstraint {
    pub fn exact(field: Field, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        FieldConstraint { field, matcher: Matcher::Exact(values.into_iter().map(Into::into).collect()) }
    }

    pub fn regex(field: Field, pattern: impl Into<String>) -> Self {
        FieldConstraint { field, matcher: Matcher::Regex(pattern.into()) }
    }

    /// Compiles a regex matcher with the anchoring and case policy used for
    /// evaluation.
    pub fn compile_regex(field: Field, pattern: &str) -> Result<Regex, regex::Error> {
        let flags = if field.case_insensitive() { "(?i)" } else { "" };
        Regex::new(&format!("{flags}^(?:{pattern})$"))
    }
}

/// Conjunction of field constraints joined by `&`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermConstraint {
    pub conjuncts: Vec<FieldConstraint>,
}

impl TermConstraint {
    pub fn new(conjuncts: Vec<FieldConstraint>) -> Self {
        TermConstraint { conjuncts }
    }

    pub fn single(fc: FieldConstraint) -> Self {
        TermConstraint { conjuncts: vec![fc] }
    }

    pub fn word(value: impl Into<String>) -> Self {
        Self::single(FieldConstraint::exact(Field::Word, [value.into()]))
    }

    pub fn has_field(&self, field: Field) -> bool {
        self.conjuncts.iter().any(|c| c.field == field)
    }

    pub fn compile(&self) -> Result<CompiledTerm, regex::Error> {
        CompiledTerm::new(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub constraint: TermConstraint,
    pub optional: bool,
    pub capture: Option<String>,
    pub expand: bool,
}

impl Term {
    pub fn new(constraint: TermConstraint) -> Self {
        Term { constraint, optional: false, capture: None, expand: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanQuery {
    pub terms: Vec<Term>,
    pub context: Option<ContextQuery>,
}

impl BooleanQuery {
    pub fn capture_names(&self) -> Vec<String> {
        sorted_names(self.terms.iter().filter_map(|t| t.capture.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    Star,
    Plus,
    Question,
    /// `{min,max}`, both inclusive.
    Range(u32, u32),
}

impl Quantifier {
    pub fn bounds(self) -> (usize, Option<usize>) {
        match self {
            Quantifier::Star => (0, None),
            Quantifier::Plus => (1, None),
            Quantifier::Question => (0, Some(1)),
            Quantifier::Range(lo, hi) => (lo as usize, Some(hi as usize)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Element {
    Term(Term),
    /// Exactly one token of any kind.
    Wildcard { capture: Option<String> },
    /// `min..=max` tokens of any kind; `max: None` runs to the sentence end.
    Gap { min: u32, max: Option<u32>, capture: Option<String> },
    Repetition { constraint: TermConstraint, quantifier: Quantifier, capture: Option<String> },
}

impl Element {
    pub fn capture(&self) -> Option<&str> {
        match self {
            Element::Term(t) => t.capture.as_deref(),
            Element::Wildcard { capture } | Element::Gap { capture, .. } | Element::Repetition { capture, .. } => {
                capture.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialQuery {
    pub elements: Vec<Element>,
    pub context: Option<ContextQuery>,
}

impl SequentialQuery {
    pub fn capture_names(&self) -> Vec<String> {
        sorted_names(self.elements.iter().filter_map(|e| e.capture().map(str::to_owned)))
    }
}

fn sorted_names(names: impl Iterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = names.collect();
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Must,
    MustNot,
    Should,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextField {
    Title,
    Abstract,
    Paragraph,
    Authors,
    Venue,
    Year,
    Mesh,
}

impl ContextField {
    pub const ALL: [ContextField; 7] = [
        ContextField::Title,
        ContextField::Abstract,
        ContextField::Paragraph,
        ContextField::Authors,
        ContextField::Venue,
        ContextField::Year,
        ContextField::Mesh,
    ];

    pub fn from_name(name: &str) -> Option<ContextField> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            ContextField::Title => "title",
            ContextField::Abstract => "abstract",
            ContextField::Paragraph => "paragraph",
            ContextField::Authors => "authors",
            ContextField::Venue => "venue",
            ContextField::Year => "year",
            ContextField::Mesh => "mesh",
        }
    }

    /// Fields matched as whole strings rather than word tokens.
    pub fn is_keyword(self) -> bool {
        matches!(self, ContextField::Venue | ContextField::Mesh)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextValue {
    Term(String),
    Phrase(String),
    Prefix(String),
    Regex(String),
    /// Inclusive year range.
    Range(u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextClause {
    pub polarity: Polarity,
    pub field: ContextField,
    pub value: ContextValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextQuery {
    pub clauses: Vec<ContextClause>,
}

impl ContextQuery {
    pub fn has_paragraph_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.field == ContextField::Paragraph)
    }
}

/// Lowercases and splits text into word tokens for title, abstract,
/// paragraph and author matching.
pub fn analyze(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    EmptyQuery,
    UnexpectedChar,
    UnterminatedQuote,
    UnterminatedRegex,
    UnterminatedBracket,
    EmptyValue,
    UnknownField,
    DuplicateField,
    BadRegex,
    DuplicateCapture,
    ExpandWithoutCapture,
    AllOptional,
    GapAtBoundary,
    BadGap,
    BadQuantifier,
    MissingQuantifier,
    EmptyContext,
    BadRange,
    RangeOnNonYear,
    BadYear,
    NoMarks,
    AnchorAndCapture,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::EmptyQuery => "empty_query",
            ErrorCode::UnexpectedChar => "unexpected_char",
            ErrorCode::UnterminatedQuote => "unterminated_quote",
            ErrorCode::UnterminatedRegex => "unterminated_regex",
            ErrorCode::UnterminatedBracket => "unterminated_bracket",
            ErrorCode::EmptyValue => "empty_value",
            ErrorCode::UnknownField => "unknown_field",
            ErrorCode::DuplicateField => "duplicate_field",
            ErrorCode::BadRegex => "bad_regex",
            ErrorCode::DuplicateCapture => "duplicate_capture",
            ErrorCode::ExpandWithoutCapture => "expand_without_capture",
            ErrorCode::AllOptional => "all_optional",
            ErrorCode::GapAtBoundary => "gap_at_boundary",
            ErrorCode::BadGap => "bad_gap",
            ErrorCode::BadQuantifier => "bad_quantifier",
            ErrorCode::MissingQuantifier => "missing_quantifier",
            ErrorCode::EmptyContext => "empty_context",
            ErrorCode::BadRange => "bad_range",
            ErrorCode::RangeOnNonYear => "range_on_non_year",
            ErrorCode::BadYear => "bad_year",
            ErrorCode::NoMarks => "no_marks",
            ErrorCode::AnchorAndCapture => "anchor_and_capture",
        }
    }
}

/// A positioned parse error: `(offset, code, message)`, offset in characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub code: ErrorCode,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, code: ErrorCode, message: impl Into<String>) -> Self {
        ParseError { offset, code, message: message.into() }
    }
}

enum CompiledMatcher {
    Exact(HashSet<String>),
    Regex(Regex),
}

/// A [`TermConstraint`] ready for per-token evaluation.
pub struct CompiledTerm {
    fields: Vec<(Field, CompiledMatcher)>,
}

impl CompiledTerm {
    fn new(tc: &TermConstraint) -> Result<Self, regex::Error> {
        let mut fields = Vec::with_capacity(tc.conjuncts.len());
        for c in &tc.conjuncts {
            let m = match &c.matcher {
                Matcher::Exact(vals) => CompiledMatcher::Exact(vals.iter().map(|v| c.field.normalize(v)).collect()),
                Matcher::Regex(p) => CompiledMatcher::Regex(FieldConstraint::compile_regex(c.field, p)?),
            };
            fields.push((c.field, m));
        }
        Ok(CompiledTerm { fields })
    }

    /// Matches anything.
    pub fn any() -> Self {
        CompiledTerm { fields: Vec::new() }
    }

    pub fn matches(&self, token: &Token) -> bool {
        self.fields.iter().all(|(field, m)| {
            let Some(raw) = field.value_of(token) else { return false };
            match m {
                CompiledMatcher::Exact(set) => {
                    if field.case_insensitive() {
                        set.contains(&raw.to_lowercase())
                    } else {
                        set.contains(raw)
                    }
                }
                CompiledMatcher::Regex(re) => {
                    if field.case_insensitive() {
                        re.is_match(&raw.to_lowercase())
                    } else {
                        re.is_match(raw)
                    }
                }
            }
        })
    }

    pub fn constrains_entity(&self) -> bool {
        self.fields.iter().any(|(f, _)| *f == Field::Entity)
    }
}
