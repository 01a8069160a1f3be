use std::fmt::{self, Write};

use super::*;

fn needs_quotes(v: &str) -> bool {
    v.is_empty()
        || v == "*"
        || v.starts_with("...")
        || v.starts_with(['?', '<', '/', '#', '$', '*'])
        || v.chars().any(|c| c.is_whitespace() || "\"|&[]=:\\".contains(c))
}

fn write_quoted(f: &mut impl Write, v: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in v.chars() {
        if c == '"' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('"')
}

fn write_value(f: &mut impl Write, v: &str) -> fmt::Result {
    if needs_quotes(v) {
        write_quoted(f, v)
    } else {
        f.write_str(v)
    }
}

/// Writes `/pattern/`, escaping bare slashes while leaving existing escape
/// pairs intact.
fn write_regex(f: &mut impl Write, pattern: &str) -> fmt::Result {
    f.write_char('/')?;
    let mut chars = pattern.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                f.write_char('\\')?;
                if let Some(n) = chars.next() {
                    f.write_char(n)?;
                }
            }
            '/' => f.write_str("\\/")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('/')
}

impl fmt::Display for FieldConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field != Field::Word {
            write!(f, "{}=", self.field.name())?;
        }
        match &self.matcher {
            Matcher::Regex(p) => write_regex(f, p),
            Matcher::Exact(values) => {
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_char('|')?;
                    }
                    write_value(f, v)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TermConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_char('&')?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn write_capture(f: &mut fmt::Formatter<'_>, capture: &Option<String>) -> fmt::Result {
    match capture {
        Some(name) => write!(f, "{name}:"),
        None => Ok(()),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.optional {
            f.write_char('?')?;
        }
        if self.expand {
            f.write_str("<>")?;
        }
        write_capture(f, &self.capture)?;
        write!(f, "{}", self.constraint)
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantifier::Star => f.write_char('*'),
            Quantifier::Plus => f.write_char('+'),
            Quantifier::Question => f.write_char('?'),
            Quantifier::Range(lo, hi) => write!(f, "{{{lo},{hi}}}"),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Term(t) => write!(f, "{t}"),
            Element::Wildcard { capture } => {
                write_capture(f, capture)?;
                f.write_char('*')
            }
            Element::Gap { min, max, capture } => {
                write_capture(f, capture)?;
                match max {
                    Some(max) => write!(f, "...{min}-{max}..."),
                    None => f.write_str("..."),
                }
            }
            Element::Repetition { constraint, quantifier, capture } => {
                write_capture(f, capture)?;
                write!(f, "[{constraint}]{quantifier}")
            }
        }
    }
}

fn write_with_context<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    items: &[T],
    context: &Option<ContextQuery>,
) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_char(' ')?;
        }
        write!(f, "{item}")?;
    }
    if let Some(ctx) = context {
        write!(f, " #d {ctx}")?;
    }
    Ok(())
}

impl fmt::Display for BooleanQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_with_context(f, &self.terms, &self.context)
    }
}

impl fmt::Display for SequentialQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_with_context(f, &self.elements, &self.context)
    }
}

impl fmt::Display for ContextClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Must => f.write_char('+')?,
            Polarity::MustNot => f.write_char('-')?,
            Polarity::Should => {}
        }
        write!(f, "{}:", self.field.name())?;
        match &self.value {
            ContextValue::Term(t) => f.write_str(t),
            ContextValue::Phrase(p) => write_quoted(f, p),
            ContextValue::Prefix(p) => write!(f, "{p}*"),
            ContextValue::Regex(p) => write_regex(f, p),
            ContextValue::Range(lo, hi) => write!(f, "[{lo} TO {hi}]"),
        }
    }
}

impl fmt::Display for ContextQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_char(' ')?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
