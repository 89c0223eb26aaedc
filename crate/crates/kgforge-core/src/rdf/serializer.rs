//! Deterministic Turtle serialization: prefixes sorted by label, subjects
//! sorted by expanded IRI, predicates grouped with `;` (rdf:type first,
//! rendered as `a`), objects grouped with `,`.

use std::collections::BTreeMap;

use super::{Graph, RdfError, Term, RDF_TYPE};

#[derive(Debug, Clone)]
pub struct SerializeOptions {
    /// When a term's namespace has no declared prefix, fall back to
    /// `<full-iri>` instead of erroring.
    pub allow_full_iris: bool,
}

impl Default for SerializeOptions {
    fn default() -> Self {
        SerializeOptions {
            allow_full_iris: true,
        }
    }
}

pub fn serialize_turtle(graph: &Graph) -> Result<String, RdfError> {
    serialize_turtle_with(graph, &SerializeOptions::default())
}

pub fn serialize_turtle_with(
    graph: &Graph,
    options: &SerializeOptions,
) -> Result<String, RdfError> {
    let mut out = String::new();
    for (label, namespace) in graph.prefixes() {
        out.push_str(&format!("@prefix {label}: <{namespace}> .\n"));
    }

    // subject -> predicate -> objects, all in Term order; rdf:type leads.
    let mut by_subject: BTreeMap<&Term, BTreeMap<(bool, &Term), Vec<&Term>>> = BTreeMap::new();
    for triple in graph.iter() {
        let is_type = triple.predicate.as_iri() == Some(RDF_TYPE);
        by_subject
            .entry(&triple.subject)
            .or_default()
            .entry((!is_type, &triple.predicate))
            .or_default()
            .push(&triple.object);
    }

    for (subject, predicates) in by_subject {
        out.push('\n');
        out.push_str(&render_term(subject, graph, options)?);
        let mut first_predicate = true;
        for ((_, predicate), objects) in predicates {
            if first_predicate {
                out.push(' ');
                first_predicate = false;
            } else {
                out.push_str(" ;\n    ");
            }
            if predicate.as_iri() == Some(RDF_TYPE) {
                out.push('a');
            } else {
                out.push_str(&render_term(predicate, graph, options)?);
            }
            let rendered: Result<Vec<String>, RdfError> = objects
                .iter()
                .map(|o| render_term(o, graph, options))
                .collect();
            out.push(' ');
            out.push_str(&rendered?.join(", "));
        }
        out.push_str(" .\n");
    }
    Ok(out)
}

fn render_term(term: &Term, graph: &Graph, options: &SerializeOptions) -> Result<String, RdfError> {
    match term {
        Term::Iri(iri) => render_iri(iri, graph, options),
        Term::Blank(label) => Ok(format!("_:{label}")),
        Term::Literal {
            lexical,
            datatype,
            language,
        } => {
            let mut out = format!("\"{}\"", escape_literal(lexical));
            if let Some(tag) = language {
                out.push('@');
                out.push_str(tag);
            } else if let Some(dt) = datatype {
                out.push_str("^^");
                out.push_str(&render_iri(dt, graph, options)?);
            }
            Ok(out)
        }
    }
}

/// Prefer the longest declared namespace whose remainder is a safe local
/// name; otherwise fall back to an angle-bracketed IRI.
fn render_iri(iri: &str, graph: &Graph, options: &SerializeOptions) -> Result<String, RdfError> {
    let mut best: Option<(&str, &str)> = None;
    for (label, namespace) in graph.prefixes() {
        if let Some(local) = iri.strip_prefix(namespace.as_str()) {
            if is_safe_local(local) && best.is_none_or(|(_, ns)| namespace.len() > ns.len()) {
                best = Some((label, namespace));
            }
        }
    }
    if let Some((label, namespace)) = best {
        return Ok(format!("{label}:{}", &iri[namespace.len()..]));
    }
    if options.allow_full_iris {
        Ok(format!("<{iri}>"))
    } else {
        let at = iri.rfind(['/', '#']).map(|i| i + 1).unwrap_or(iri.len());
        Err(RdfError::MissingPrefix(iri[..at].to_string()))
    }
}

fn is_safe_local(local: &str) -> bool {
    local
        .chars()
        .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

pub(crate) fn escape_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}
