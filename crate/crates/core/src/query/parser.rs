use std::collections::HashSet;

use super::*;

struct Cursor<'a> {
    chars: &'a [char],
    pos: usize,
    /// Offset of `chars[0]` within the caller's original input.
    base: usize,
}

enum CaptureSpec {
    None,
    Auto,
    Named(String),
}

struct Prefixes {
    optional: bool,
    expand: bool,
    capture: CaptureSpec,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_bare_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '|' | '&' | '"' | '[' | ']')
}

impl<'a> Cursor<'a> {
    fn new(chars: &'a [char], base: usize) -> Self {
        Cursor { chars, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn err(&self, code: ErrorCode, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.offset(), code, msg)
    }

    fn err_at(&self, pos: usize, code: ErrorCode, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.base + pos, code, msg)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn eof(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(k, c)| self.chars.get(self.pos + k) == Some(&c))
    }

    fn at_boundary(&self, n: usize) -> bool {
        self.peek_at(n).is_none_or(char::is_whitespace)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_context_marker(&self) -> bool {
        self.starts_with("#d") && self.at_boundary(2)
    }

    /// Length of an identifier starting at the cursor.
    fn ident_len(&self) -> usize {
        match self.peek() {
            Some(c) if is_ident_start(c) => {}
            _ => return 0,
        }
        let mut n = 1;
        while self.peek_at(n).is_some_and(is_ident_char) {
            n += 1;
        }
        n
    }

    fn take(&mut self, n: usize) -> String {
        let s: String = self.chars[self.pos..self.pos + n].iter().collect();
        self.pos += n;
        s
    }

    fn expect_term_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(c) if c.is_whitespace() => Ok(()),
            Some(c) => Err(self.err(ErrorCode::UnexpectedChar, format!("unexpected `{c}`"))),
        }
    }

    fn prefixes(&mut self) -> Prefixes {
        let mut p = Prefixes { optional: false, expand: false, capture: CaptureSpec::None };
        loop {
            if !p.optional && self.peek() == Some('?') {
                p.optional = true;
                self.pos += 1;
            } else if !p.expand && self.starts_with("<>") {
                p.expand = true;
                self.pos += 2;
            } else {
                break;
            }
        }
        if self.peek() == Some(':') {
            self.pos += 1;
            p.capture = CaptureSpec::Auto;
        } else {
            let n = self.ident_len();
            if n > 0 && self.peek_at(n) == Some(':') {
                let name = self.take(n);
                self.pos += 1;
                p.capture = CaptureSpec::Named(name);
            }
        }
        p
    }

    /// Reads a delimited literal (`"…"` or `/…/`) starting at the opening
    /// delimiter. Only the delimiter can be escaped for regexes; quotes also
    /// unescape `\\`.
    fn delimited(&mut self, delim: char) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    let code = if delim == '"' { ErrorCode::UnterminatedQuote } else { ErrorCode::UnterminatedRegex };
                    return Err(self.err_at(start, code, format!("missing closing `{delim}`")));
                }
                Some(c) if c == delim => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    let next = self.peek_at(1);
                    match next {
                        Some(n) if n == delim => out.push(n),
                        Some('\\') if delim == '"' => out.push('\\'),
                        Some(n) => {
                            out.push('\\');
                            out.push(n);
                        }
                        None => {
                            out.push('\\');
                            self.pos += 1;
                            continue;
                        }
                    }
                    self.pos += 2;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn value(&mut self) -> Result<String, ParseError> {
        if self.peek() == Some('"') {
            return self.delimited('"');
        }
        let start = self.pos;
        while self.peek().is_some_and(is_bare_char) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(ErrorCode::EmptyValue, "expected a value"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn matcher(&mut self, field: Field) -> Result<Matcher, ParseError> {
        if self.peek() == Some('/') {
            let start = self.pos;
            let pattern = self.delimited('/')?;
            FieldConstraint::compile_regex(field, &pattern)
                .map_err(|e| self.err_at(start, ErrorCode::BadRegex, format!("invalid regex: {e}")))?;
            return Ok(Matcher::Regex(pattern));
        }
        let mut values = vec![self.value()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            values.push(self.value()?);
        }
        Ok(Matcher::Exact(values))
    }

    fn constraint(&mut self) -> Result<TermConstraint, ParseError> {
        let mut conjuncts: Vec<FieldConstraint> = Vec::new();
        loop {
            let start = self.pos;
            let n = self.ident_len();
            let field = if n > 0 && self.peek_at(n) == Some('=') {
                let name = self.take(n);
                self.pos += 1;
                Field::from_name(&name)
                    .ok_or_else(|| self.err_at(start, ErrorCode::UnknownField, format!("unknown field `{name}`")))?
            } else {
                Field::Word
            };
            if conjuncts.iter().any(|c| c.field == field) {
                return Err(self.err_at(start, ErrorCode::DuplicateField, format!("field `{field}` constrained twice")));
            }
            let matcher = self.matcher(field)?;
            conjuncts.push(FieldConstraint { field, matcher });
            if self.peek() == Some('&') {
                self.pos += 1;
            } else {
                return Ok(TermConstraint { conjuncts });
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().ok()
    }
}

/// Captures as parsed, before automatic names are assigned.
struct CaptureSlots {
    slots: Vec<(usize, CaptureSpec)>,
}

impl CaptureSlots {
    fn new() -> Self {
        CaptureSlots { slots: Vec::new() }
    }

    fn push(&mut self, offset: usize, spec: CaptureSpec) -> usize {
        self.slots.push((offset, spec));
        self.slots.len() - 1
    }

    /// Resolves every slot to a final name, numbering automatic captures
    /// `cap1`, `cap2`, … while skipping names taken explicitly.
    fn resolve(self) -> Result<Vec<Option<String>>, ParseError> {
        let mut used = HashSet::new();
        for (offset, spec) in &self.slots {
            if let CaptureSpec::Named(n) = spec {
                if !used.insert(n.clone()) {
                    return Err(ParseError::new(*offset, ErrorCode::DuplicateCapture, format!("capture `{n}` defined twice")));
                }
            }
        }
        let mut counter = 0;
        let mut out = Vec::with_capacity(self.slots.len());
        for (_, spec) in self.slots {
            out.push(match spec {
                CaptureSpec::None => None,
                CaptureSpec::Named(n) => Some(n),
                CaptureSpec::Auto => loop {
                    counter += 1;
                    let name = format!("cap{counter}");
                    if used.insert(name.clone()) {
                        break Some(name);
                    }
                },
            });
        }
        Ok(out)
    }
}

fn trailing_context(c: &mut Cursor<'_>) -> Result<Option<ContextQuery>, ParseError> {
    if !c.at_context_marker() {
        return Ok(None);
    }
    c.pos += 2;
    let rest = &c.chars[c.pos..];
    let ctx = context_at(rest, c.offset())?;
    c.pos = c.chars.len();
    Ok(Some(ctx))
}

fn check_expand(c: &Cursor<'_>, start: usize, p: &Prefixes) -> Result<(), ParseError> {
    if p.expand && matches!(p.capture, CaptureSpec::None) {
        return Err(c.err_at(start, ErrorCode::ExpandWithoutCapture, "expansion `<>` requires a capture"));
    }
    Ok(())
}

pub fn parse_boolean(text: &str) -> Result<BooleanQuery, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut c = Cursor::new(&chars, 0);
    let mut terms = Vec::new();
    let mut caps = CaptureSlots::new();
    let mut context = None;
    loop {
        c.skip_ws();
        if c.eof() {
            break;
        }
        if let Some(ctx) = trailing_context(&mut c)? {
            context = Some(ctx);
            break;
        }
        let start = c.pos;
        let p = c.prefixes();
        check_expand(&c, start, &p)?;
        let constraint = c.constraint()?;
        c.expect_term_end()?;
        let slot = caps.push(c.base + start, p.capture);
        terms.push((slot, Term { constraint, optional: p.optional, capture: None, expand: p.expand }));
    }
    if terms.is_empty() {
        return Err(ParseError::new(0, ErrorCode::EmptyQuery, "query has no terms"));
    }
    let names = caps.resolve()?;
    let terms: Vec<Term> = terms.into_iter().map(|(slot, t)| Term { capture: names[slot].clone(), ..t }).collect();
    if terms.iter().all(|t| t.optional) {
        return Err(ParseError::new(0, ErrorCode::AllOptional, "all terms optional: at least one term must be required"));
    }
    Ok(BooleanQuery { terms, context })
}

pub fn parse_sequential(text: &str) -> Result<SequentialQuery, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut c = Cursor::new(&chars, 0);
    let mut elements: Vec<(usize, usize, Element)> = Vec::new();
    let mut caps = CaptureSlots::new();
    let mut context = None;
    loop {
        c.skip_ws();
        if c.eof() {
            break;
        }
        if let Some(ctx) = trailing_context(&mut c)? {
            context = Some(ctx);
            break;
        }
        let start = c.pos;
        let p = c.prefixes();
        let structural = c.starts_with("...") || (c.peek() == Some('*') && c.at_boundary(1)) || c.peek() == Some('[');
        if structural && (p.optional || p.expand) {
            return Err(c.err_at(start, ErrorCode::UnexpectedChar, "gaps, wildcards and repetitions cannot be optional or expanded"));
        }
        check_expand(&c, start, &p)?;
        let slot = caps.push(c.base + start, p.capture);
        let element = if c.starts_with("...") {
            c.pos += 3;
            if c.at_boundary(0) {
                Element::Gap { min: 0, max: None, capture: None }
            } else {
                let at = c.pos;
                let lo = c.number();
                let dash = c.peek() == Some('-');
                c.pos += usize::from(dash);
                let hi = c.number();
                match (lo, dash, hi, c.starts_with("...")) {
                    (Some(lo), true, Some(hi), true) => {
                        c.pos += 3;
                        if lo > hi {
                            return Err(c.err_at(at, ErrorCode::BadGap, format!("gap minimum {lo} exceeds maximum {hi}")));
                        }
                        Element::Gap { min: lo, max: Some(hi), capture: None }
                    }
                    _ => return Err(c.err_at(at, ErrorCode::BadGap, "expected `...` or `...n-m...`")),
                }
            }
        } else if c.peek() == Some('*') && c.at_boundary(1) {
            c.pos += 1;
            Element::Wildcard { capture: None }
        } else if c.peek() == Some('[') {
            let open = c.pos;
            c.pos += 1;
            let constraint = c.constraint()?;
            if c.peek() != Some(']') {
                return Err(c.err_at(open, ErrorCode::UnterminatedBracket, "missing closing `]`"));
            }
            c.pos += 1;
            let q_at = c.pos;
            let quantifier = match c.peek() {
                Some('*') => Quantifier::Star,
                Some('+') => Quantifier::Plus,
                Some('?') => Quantifier::Question,
                Some('{') => {
                    c.pos += 1;
                    let lo = c.number();
                    let hi = if c.peek() == Some(',') {
                        c.pos += 1;
                        c.number()
                    } else {
                        lo
                    };
                    match (lo, hi, c.peek()) {
                        (Some(lo), Some(hi), Some('}')) if lo <= hi => Quantifier::Range(lo, hi),
                        (Some(lo), Some(hi), Some('}')) => {
                            return Err(c.err_at(q_at, ErrorCode::BadQuantifier, format!("repetition minimum {lo} exceeds maximum {hi}")))
                        }
                        _ => return Err(c.err_at(q_at, ErrorCode::BadQuantifier, "expected `{n,m}`")),
                    }
                }
                _ => return Err(c.err_at(q_at, ErrorCode::MissingQuantifier, "repetition needs `*`, `+`, `?` or `{n,m}`")),
            };
            c.pos += 1;
            Element::Repetition { constraint, quantifier, capture: None }
        } else {
            let constraint = c.constraint()?;
            Element::Term(Term { constraint, optional: p.optional, capture: None, expand: p.expand })
        };
        c.expect_term_end()?;
        elements.push((start, slot, element));
    }
    if elements.is_empty() {
        return Err(ParseError::new(0, ErrorCode::EmptyQuery, "query has no elements"));
    }
    for &(start, _, ref e) in [elements.first(), elements.last()].into_iter().flatten() {
        if matches!(e, Element::Gap { .. }) {
            return Err(ParseError::new(start, ErrorCode::GapAtBoundary, "gap at boundary: a gap cannot start or end the pattern"));
        }
    }
    let names = caps.resolve()?;
    let elements = elements
        .into_iter()
        .map(|(_, slot, e)| {
            let name = names[slot].clone();
            match e {
                Element::Term(t) => Element::Term(Term { capture: name, ..t }),
                Element::Wildcard { .. } => Element::Wildcard { capture: name },
                Element::Gap { min, max, .. } => Element::Gap { min, max, capture: name },
                Element::Repetition { constraint, quantifier, .. } => {
                    Element::Repetition { constraint, quantifier, capture: name }
                }
            }
        })
        .collect();
    Ok(SequentialQuery { elements, context })
}

/// Parses a bare term constraint such as `lemma=cause|reason&tag=NN`.
pub fn parse_term_constraint(text: &str) -> Result<TermConstraint, ParseError> {
    parse_term_constraint_at(text, 0)
}

pub(crate) fn parse_term_constraint_at(text: &str, base: usize) -> Result<TermConstraint, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut c = Cursor::new(&chars, base);
    let tc = c.constraint()?;
    if !c.eof() {
        return Err(c.err(ErrorCode::UnexpectedChar, format!("unexpected `{}`", c.peek().unwrap_or(' '))));
    }
    Ok(tc)
}

pub fn parse_context(text: &str) -> Result<ContextQuery, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    context_at(&chars, 0)
}

pub(crate) fn parse_context_at(text: &str, base: usize) -> Result<ContextQuery, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    context_at(&chars, base)
}

fn context_at(chars: &[char], base: usize) -> Result<ContextQuery, ParseError> {
    let mut c = Cursor::new(chars, base);
    let mut clauses = Vec::new();
    c.skip_ws();
    if c.at_context_marker() {
        c.pos += 2;
    }
    loop {
        c.skip_ws();
        if c.eof() {
            break;
        }
        let polarity = match c.peek() {
            Some('+') => {
                c.pos += 1;
                Polarity::Must
            }
            Some('-') => {
                c.pos += 1;
                Polarity::MustNot
            }
            _ => Polarity::Should,
        };
        let field_at = c.pos;
        let n = c.ident_len();
        if n == 0 || c.peek_at(n) != Some(':') {
            return Err(c.err(ErrorCode::UnexpectedChar, "expected `field:value`"));
        }
        let name = c.take(n);
        let field = ContextField::from_name(&name)
            .ok_or_else(|| c.err_at(field_at, ErrorCode::UnknownField, format!("unknown context field `{name}`")))?;
        c.pos += 1;
        let ws = c.pos;
        c.skip_ws();
        if c.peek() != Some('[') {
            c.pos = ws;
        }
        let value_at = c.pos;
        let value = match c.peek() {
            Some('"') => {
                let s = c.delimited('"')?;
                if s.trim().is_empty() {
                    return Err(c.err_at(value_at, ErrorCode::EmptyValue, "empty phrase"));
                }
                ContextValue::Phrase(s)
            }
            Some('/') => {
                let s = c.delimited('/')?;
                regex::Regex::new(&format!("(?i)^(?:{s})$"))
                    .map_err(|e| c.err_at(value_at, ErrorCode::BadRegex, format!("invalid regex: {e}")))?;
                ContextValue::Regex(s)
            }
            Some('[') => {
                if field != ContextField::Year {
                    return Err(c.err_at(value_at, ErrorCode::RangeOnNonYear, format!("range on non-year field `{name}`")));
                }
                c.pos += 1;
                c.skip_ws();
                let lo = c.number();
                c.skip_ws();
                let to = c.starts_with("TO");
                c.pos += if to { 2 } else { 0 };
                c.skip_ws();
                let hi = c.number();
                c.skip_ws();
                match (lo, to, hi, c.peek()) {
                    (Some(lo), true, Some(hi), Some(']')) if lo <= hi => {
                        c.pos += 1;
                        ContextValue::Range(lo, hi)
                    }
                    (Some(lo), true, Some(hi), Some(']')) => {
                        return Err(c.err_at(value_at, ErrorCode::BadRange, format!("range low {lo} exceeds high {hi}")))
                    }
                    _ => return Err(c.err_at(value_at, ErrorCode::BadRange, "expected `[low TO high]`")),
                }
            }
            _ => {
                let start = c.pos;
                while c.peek().is_some_and(|ch| !ch.is_whitespace()) {
                    c.pos += 1;
                }
                let s: String = chars[start..c.pos].iter().collect();
                if s.is_empty() {
                    return Err(c.err_at(value_at, ErrorCode::EmptyValue, "expected a value"));
                }
                match s.strip_suffix('*') {
                    Some(p) if !p.is_empty() => ContextValue::Prefix(p.to_string()),
                    _ => ContextValue::Term(s),
                }
            }
        };
        if field == ContextField::Year {
            match &value {
                ContextValue::Range(..) => {}
                ContextValue::Term(t) if t.parse::<u32>().is_ok() => {}
                _ => return Err(c.err_at(value_at, ErrorCode::BadYear, "year takes an integer or `[low TO high]`")),
            }
        }
        c.expect_term_end()?;
        clauses.push(ContextClause { polarity, field, value });
    }
    if clauses.is_empty() {
        return Err(c.err(ErrorCode::EmptyContext, "contextual restriction has no clauses"));
    }
    Ok(ContextQuery { clauses })
}
