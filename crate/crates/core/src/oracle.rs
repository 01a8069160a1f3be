//! Index-free reference evaluation.
//!
//! Everything here is written for obviousness rather than speed: exhaustive
//! enumeration of assignments, segmentations and node mappings, and a
//! direct scan of document metadata for contextual restrictions. The
//! results are the yardstick for [`crate::matching`].

use std::collections::BTreeSet;

use crate::corpus::{AnnotatedSentence, Corpus, DocumentMeta};
use crate::matching::{is_blocked, EvalConfig, EvalError, Match, Query, Range, SentenceTuples, Tuple};
use crate::qbe::QueryGraph;
use crate::query::{
    analyze, BooleanQuery, CompiledTerm, ContextClause, ContextField, ContextQuery, ContextValue, Element, Field,
    Polarity, SequentialQuery,
};

/// Evaluates `query` over every sentence of `corpus`.
pub fn oracle_eval(corpus: &Corpus, query: &Query, config: &EvalConfig) -> Result<Vec<Match>, EvalError> {
    let names = query.capture_names();
    let mut out = Vec::new();
    for (ord, sentence) in corpus.sentences.iter().enumerate() {
        if let Some(ctx) = query.context() {
            if !context_allows(corpus, ctx, sentence) {
                continue;
            }
        }
        let tuples = match query {
            Query::Boolean(q) => boolean(sentence, q, &names, config)?,
            Query::Sequential(q) => sequential(sentence, q, &names, config)?,
            Query::Syntactic(g) => syntactic(sentence, g, &names, config)?,
        };
        let truncated = tuples.len() > config.cap;
        let st = SentenceTuples { tuples: tuples.into_iter().take(config.cap).collect(), truncated };
        out.extend(st.into_matches(ord as u32, sentence, query.mode(), &names));
    }
    Ok(out)
}

fn entity_constrained(tc: &crate::query::TermConstraint) -> bool {
    tc.conjuncts.iter().any(|c| c.field == Field::Entity)
}

/// The mention containing `token`, found by walking the B/I tags.
fn mention_of(sentence: &AnnotatedSentence, token: usize) -> Range {
    for m in sentence.mentions() {
        if m.start <= token && token <= m.end {
            return (m.start, m.end);
        }
    }
    (token, token)
}

/// Tokens reachable from `seed` downward through unblocked basic edges,
/// reduced to the contiguous run around the seed.
pub fn expand_naive(sentence: &AnnotatedSentence, seed: usize, blocklist: &[String]) -> Range {
    let n = sentence.tokens.len();
    let mut head: Vec<Option<(usize, &str)>> = vec![None; n];
    for e in &sentence.edges {
        if e.dependent != sentence.root && head[e.dependent].is_none() {
            head[e.dependent] = Some((e.head, &e.label));
        }
    }
    let below = |mut t: usize| loop {
        if t == seed {
            return true;
        }
        match head[t] {
            Some((h, label)) if !is_blocked(label, blocklist) => t = h,
            _ => return false,
        }
    };
    let mut start = seed;
    while start > 0 && below(start - 1) {
        start -= 1;
    }
    let mut end = seed;
    while end + 1 < n && below(end + 1) {
        end += 1;
    }
    (start, end)
}

fn expand_range(sentence: &AnnotatedSentence, (s, e): Range, blocklist: &[String]) -> Range {
    let mut out = (s, e);
    for t in s..=e {
        let (a, b) = expand_naive(sentence, t, blocklist);
        out = (out.0.min(a), out.1.max(b));
    }
    out
}

fn overlaps(a: Range, b: Range) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn boolean(
    sentence: &AnnotatedSentence,
    q: &BooleanQuery,
    names: &[String],
    config: &EvalConfig,
) -> Result<BTreeSet<Tuple>, EvalError> {
    let mut occ: Vec<Vec<Range>> = Vec::new();
    for t in &q.terms {
        let c = t.constraint.compile()?;
        let entity = entity_constrained(&t.constraint);
        let set: BTreeSet<Range> = (0..sentence.tokens.len())
            .filter(|&i| c.matches(&sentence.tokens[i]))
            .map(|i| if entity { mention_of(sentence, i) } else { (i, i) })
            .collect();
        occ.push(set.into_iter().collect());
    }
    let required: Vec<&Vec<Range>> = q.terms.iter().zip(&occ).filter(|(t, _)| !t.optional).map(|(_, o)| o).collect();

    fn any_disjoint(lists: &[&Vec<Range>], chosen: &mut Vec<Range>) -> bool {
        let Some((first, rest)) = lists.split_first() else { return true };
        for &r in first.iter() {
            if chosen.iter().all(|&c| !overlaps(c, r)) {
                chosen.push(r);
                let ok = any_disjoint(rest, chosen);
                chosen.pop();
                if ok {
                    return true;
                }
            }
        }
        false
    }
    if !any_disjoint(&required, &mut Vec::new()) {
        return Ok(BTreeSet::new());
    }

    let mut tuples = BTreeSet::from([vec![None; names.len()]]);
    for (t, o) in q.terms.iter().zip(&occ) {
        let Some(name) = &t.capture else { continue };
        let slot = names.iter().position(|n| n == name).expect("capture is named");
        if o.is_empty() {
            continue;
        }
        let mut next = BTreeSet::new();
        for tuple in &tuples {
            for &r in o {
                let mut tuple = tuple.clone();
                tuple[slot] = Some(if t.expand { expand_range(sentence, r, &config.blocklist) } else { r });
                next.insert(tuple);
            }
        }
        tuples = next;
    }
    Ok(tuples)
}

enum El {
    Term { c: CompiledTerm, optional: bool, entity: bool, expand: bool, slot: Option<usize> },
    Any { min: usize, max: Option<usize>, slot: Option<usize> },
    Rep { c: CompiledTerm, min: usize, max: Option<usize>, slot: Option<usize> },
}

fn sequential(
    sentence: &AnnotatedSentence,
    q: &SequentialQuery,
    names: &[String],
    config: &EvalConfig,
) -> Result<BTreeSet<Tuple>, EvalError> {
    let slot = |c: Option<&str>| c.map(|c| names.iter().position(|n| n == c).expect("capture is named"));
    let mut els = Vec::new();
    for e in &q.elements {
        els.push(match e {
            Element::Term(t) => El::Term {
                c: t.constraint.compile()?,
                optional: t.optional,
                entity: entity_constrained(&t.constraint),
                expand: t.expand,
                slot: slot(t.capture.as_deref()),
            },
            Element::Wildcard { capture } => El::Any { min: 1, max: Some(1), slot: slot(capture.as_deref()) },
            Element::Gap { min, max, capture } => {
                El::Any { min: *min as usize, max: max.map(|m| m as usize), slot: slot(capture.as_deref()) }
            }
            Element::Repetition { constraint, quantifier, capture } => {
                let (min, max) = quantifier.bounds();
                El::Rep { c: constraint.compile()?, min, max, slot: slot(capture.as_deref()) }
            }
        });
    }
    let n = sentence.tokens.len();
    let toks = &sentence.tokens;

    // Every way of assigning a length to each element, from every start,
    // kept only when each element's own acceptance condition holds.
    fn walk(
        els: &[El],
        pos: usize,
        n: usize,
        toks: &[crate::corpus::Token],
        bindings: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some(el) = els.get(bindings.len()) else {
            out.push(bindings.clone());
            return;
        };
        for k in 0..=(n - pos) {
            let all = |c: &CompiledTerm| (pos..pos + k).all(|i| c.matches(&toks[i]));
            let next_matches = |c: &CompiledTerm| pos + k < n && c.matches(&toks[pos + k]);
            let ok = match el {
                El::Term { c, optional, .. } => match k {
                    1 => all(c),
                    0 => *optional && !next_matches(c),
                    _ => false,
                },
                El::Any { min, max, .. } => k >= *min && max.is_none_or(|m| k <= m),
                El::Rep { c, min, max, .. } => {
                    k >= *min && max.is_none_or(|m| k <= m) && all(c) && (Some(k) == *max || !next_matches(c))
                }
            };
            if ok {
                bindings.push((pos, k));
                walk(els, pos + k, n, toks, bindings, out);
                bindings.pop();
            }
        }
    }

    let mut segmentations = Vec::new();
    for start in 0..=n {
        walk(&els, start, n, toks, &mut Vec::new(), &mut segmentations);
    }
    let mut tuples = BTreeSet::new();
    for seg in segmentations {
        let mut tuple = vec![None; names.len()];
        for (el, &(pos, k)) in els.iter().zip(&seg) {
            match el {
                El::Term { entity, expand, slot: Some(s), .. } if k == 1 => {
                    let r = if *entity { mention_of(sentence, pos) } else { (pos, pos) };
                    tuple[*s] = Some(if *expand { expand_range(sentence, r, &config.blocklist) } else { r });
                }
                El::Any { slot: Some(s), .. } | El::Rep { slot: Some(s), .. } if k > 0 => {
                    tuple[*s] = Some((pos, pos + k - 1));
                }
                _ => {}
            }
        }
        tuples.insert(tuple);
    }
    Ok(tuples)
}

fn syntactic(
    sentence: &AnnotatedSentence,
    g: &QueryGraph,
    names: &[String],
    config: &EvalConfig,
) -> Result<BTreeSet<Tuple>, EvalError> {
    let compiled: Vec<Option<CompiledTerm>> =
        g.nodes.iter().map(|n| n.constraint.as_ref().map(|c| c.compile()).transpose()).collect::<Result<_, _>>()?;
    let n = sentence.tokens.len();
    let k = g.nodes.len();
    let mut tuples = BTreeSet::new();
    if k > n {
        return Ok(tuples);
    }
    let mut assign = vec![0usize; k];
    'outer: loop {
        let distinct = (0..k).all(|a| (a + 1..k).all(|b| assign[a] != assign[b]));
        let nodes_ok = compiled
            .iter()
            .zip(&assign)
            .all(|(c, &t)| c.as_ref().is_none_or(|c| c.matches(&sentence.tokens[t])));
        let edges_ok = g.edges.iter().all(|e| {
            sentence
                .edges
                .iter()
                .any(|s| s.head == assign[e.from] && s.dependent == assign[e.to] && s.label == e.label)
        });
        if distinct && nodes_ok && edges_ok {
            let mut tuple = vec![None; names.len()];
            for (node, &t) in g.nodes.iter().zip(&assign) {
                let Some(name) = &node.capture else { continue };
                let slot = names.iter().position(|x| x == name).expect("capture is named");
                let entity = node.constraint.as_ref().is_some_and(entity_constrained);
                let r = if entity { mention_of(sentence, t) } else { (t, t) };
                tuple[slot] = Some(if node.expand { expand_range(sentence, r, &config.blocklist) } else { r });
            }
            tuples.insert(tuple);
        }
        for i in (0..k).rev() {
            assign[i] += 1;
            if assign[i] < n {
                continue 'outer;
            }
            assign[i] = 0;
        }
        break;
    }
    Ok(tuples)
}

fn text_holds(tokens: &[String], value: &ContextValue) -> bool {
    match value {
        ContextValue::Term(t) | ContextValue::Phrase(t) => {
            let words = analyze(t);
            !words.is_empty() && tokens.windows(words.len()).any(|w| w == words.as_slice())
        }
        ContextValue::Prefix(p) => {
            let p = p.to_lowercase();
            tokens.iter().any(|t| t.starts_with(&p))
        }
        ContextValue::Regex(p) => match crate::index::context_regex(p) {
            Some(re) => tokens.iter().any(|t| re.is_match(t)),
            None => false,
        },
        ContextValue::Range(..) => false,
    }
}

fn keyword_holds(value_str: &str, value: &ContextValue) -> bool {
    if value_str.is_empty() {
        return false;
    }
    let v = value_str.to_lowercase();
    match value {
        ContextValue::Term(t) | ContextValue::Phrase(t) => v == t.to_lowercase(),
        ContextValue::Prefix(p) => v.starts_with(&p.to_lowercase()),
        ContextValue::Regex(p) => crate::index::context_regex(p).is_some_and(|re| re.is_match(&v)),
        ContextValue::Range(..) => false,
    }
}

fn clause_holds(doc: &DocumentMeta, paragraph: &str, clause: &ContextClause) -> bool {
    let v = &clause.value;
    match clause.field {
        ContextField::Title => text_holds(&analyze(&doc.title), v),
        ContextField::Abstract => text_holds(&analyze(&doc.abstract_text), v),
        ContextField::Paragraph => text_holds(&analyze(paragraph), v),
        ContextField::Authors => doc.authors.iter().any(|a| text_holds(&analyze(a), v)),
        ContextField::Venue => keyword_holds(&doc.venue, v),
        ContextField::Mesh => doc.mesh.iter().any(|m| keyword_holds(m, v)),
        ContextField::Year => match (doc.year, v) {
            (Some(y), ContextValue::Range(lo, hi)) => *lo <= y && y <= *hi,
            (Some(y), ContextValue::Term(t)) => t.parse::<u32>() == Ok(y),
            _ => false,
        },
    }
}

/// Whether a sentence's document and paragraph satisfy `ctx`, checked
/// directly against the metadata.
pub fn context_allows(corpus: &Corpus, ctx: &ContextQuery, sentence: &AnnotatedSentence) -> bool {
    let Some(doc) = corpus.documents.get(&sentence.doc_id) else { return false };
    let paragraph = doc.paragraphs.get(&sentence.paragraph_id).map_or("", String::as_str);
    let holds = |c: &ContextClause| clause_holds(doc, paragraph, c);
    let musts = ctx.clauses.iter().filter(|c| c.polarity == Polarity::Must).all(holds);
    let nots = ctx.clauses.iter().filter(|c| c.polarity == Polarity::MustNot).any(holds);
    let shoulds: Vec<&ContextClause> = ctx.clauses.iter().filter(|c| c.polarity == Polarity::Should).collect();
    musts && !nots && (shoulds.is_empty() || shoulds.into_iter().any(holds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Index;
    use crate::matching::Evaluator;
    use crate::qbe::{compile_markup, FixtureProvider};
    use crate::query::{parse_boolean, parse_context, parse_sequential};

    fn corpus() -> Corpus {
        crate::corpus::load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl")).unwrap()
    }

    #[test]
    fn empty_corpus_yields_nothing() {
        let q = Query::Boolean(parse_boolean("a").unwrap());
        assert!(oracle_eval(&Corpus::default(), &q, &EvalConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn phosphorylation_bindings() {
        let provider = FixtureProvider::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/parses.jsonl")).unwrap();
        let g = compile_markup("<>p1:[e]BMP-6 $induces the $phosphorylation $of <>p2:Smad1", &provider).unwrap();
        let got = oracle_eval(&corpus(), &Query::Syntactic(g), &EvalConfig::default()).unwrap();
        let pairs: Vec<(String, String)> =
            got.iter().map(|m| (m.captures["p1"].text.clone(), m.captures["p2"].text.clone())).collect();
        assert_eq!(
            pairs,
            [("ERK".into(), "Elk-1".into()), ("Thrombopoietin".into(), "p80/85 cortactin".into())]
        );
    }

    #[test]
    fn agrees_with_index_on_fixture_queries() {
        let c = corpus();
        let idx = Index::build(c.clone());
        let config = EvalConfig::default();
        let queries = [
            Query::Boolean(parse_boolean("chem:e=SIMPLE_CHEMICAL d:e=DISEASE").unwrap()),
            Query::Boolean(parse_boolean("<>r:e=DISEASE risk ?<>f:factor #d mesh:Child mesh:Adult").unwrap()),
            Query::Sequential(parse_sequential("x:tag=DT [tag=JJ]* y:[tag=NN|NNS]+").unwrap()),
            Query::Sequential(parse_sequential("<>a:e=DISEASE ... b:tag=NN").unwrap()),
            Query::Sequential(parse_sequential("?x:the y:* #d +paragraph:risk").unwrap()),
        ];
        for q in &queries {
            let fast = Evaluator::new(&idx).eval(q).unwrap().matches;
            assert_eq!(fast, oracle_eval(&c, q, &config).unwrap(), "{q:?}");
        }
    }

    #[test]
    fn naive_context_agrees_with_index_on_fixture() {
        let c = corpus();
        let idx = Index::build(c.clone());
        for q in [
            "+title:cancer +mesh:\"Age Distribution\"",
            "abstract:child abstract:children",
            "+year:[2015 TO 2020] -venue:lancet",
            "authors:smith* paragraph:/risk|stroke/",
            "+title:\"novel coronavirus\"",
        ] {
            let ctx = parse_context(q).unwrap();
            let filter = idx.doc_filter(&ctx);
            for (i, s) in c.sentences.iter().enumerate() {
                assert_eq!(filter.allows(i as u32), context_allows(&c, &ctx, s), "{q} on {}", s.sent_id);
            }
        }
    }
}
