//! Turtle parsing: a strict single-pass parser plus a recovering variant
//! that skips malformed statements and resynchronizes at the next `.`.
//!
//! LLM-authored ontologies write multi-word class tokens after a prefixed
//! name (`wd:party conference`). Bare words following a prefixed-name object
//! are absorbed into its local name, joined with underscores, so those
//! documents parse to terms consistent with minted entity IRIs.

use std::collections::BTreeMap;

use super::{Graph, RdfError, Term, Triple, RDF_TYPE};

/// Result of recovering parse: the triples that parsed plus how many
/// statements were skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovered {
    pub graph: Graph,
    pub skipped_statements: usize,
}

/// Strict parse: fails on the first malformed statement.
pub fn parse_turtle(text: &str) -> Result<Graph, RdfError> {
    let mut parser = Parser::new(text);
    loop {
        parser.skip_trivia();
        if parser.at_eof() {
            return Ok(parser.into_graph());
        }
        parser.statement()?;
    }
}

/// Recovering parse: never fails. Code-fence framing lines are stripped,
/// then statements parse one at a time; a statement that errors is skipped
/// wholesale by scanning to the next top-level `.`.
pub fn extract_valid_triples(text: &str) -> Recovered {
    extract_valid_triples_seeded(text, &BTreeMap::new())
}

/// Recovering parse with ambient prefix declarations. LLM replies routinely
/// use the prefixes their prompt declared without re-declaring them; stages
/// parsing such replies seed the standard preamble here.
pub fn extract_valid_triples_seeded(text: &str, prefixes: &BTreeMap<String, String>) -> Recovered {
    let stripped = strip_code_fences(text);
    let mut parser = Parser::new(&stripped);
    for (label, namespace) in prefixes {
        parser.prefixes.insert(label.clone(), namespace.clone());
        parser.graph.add_prefix(label.clone(), namespace.clone());
    }
    let mut skipped = 0usize;
    loop {
        parser.skip_trivia();
        if parser.at_eof() {
            break;
        }
        let checkpoint = parser.graph_len();
        if parser.statement().is_err() {
            parser.discard_new_triples(checkpoint);
            parser.resync_past_dot();
            skipped += 1;
        }
    }
    Recovered {
        graph: parser.into_graph(),
        skipped_statements: skipped,
    }
}

/// Drop lines that are code-fence markers (``` with an optional info tag).
fn strip_code_fences(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    prefixes: BTreeMap<String, String>,
    graph: Graph,
    triple_order: Vec<Triple>,
}

impl Parser {
    fn new(text: &str) -> Parser {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
            prefixes: BTreeMap::new(),
            graph: Graph::new(),
            triple_order: Vec::new(),
        }
    }

    fn into_graph(self) -> Graph {
        self.graph
    }

    fn graph_len(&self) -> usize {
        self.triple_order.len()
    }

    /// Roll back triples emitted by a statement that later failed. Only
    /// first occurrences are recorded in `triple_order`, so a duplicate of an
    /// earlier statement's triple is never removed here.
    fn discard_new_triples(&mut self, checkpoint: usize) {
        for triple in self.triple_order.split_off(checkpoint) {
            self.graph.remove(&triple);
        }
    }

    // ----- character machinery -----

    fn peek_char(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_char_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek_char() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    // ----- token-ish helpers -----

    fn is_local_char(c: char) -> bool {
        c.is_alphanumeric() || c == '_' || c == '-'
    }

    /// Consume a run of local-name characters.
    fn read_word(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek_char() {
            if Self::is_local_char(c) {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        out
    }

    fn expect_char(&mut self, expected: char) -> Result<(), RdfError> {
        match self.peek_char() {
            Some(c) if c == expected => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected '{expected}', found '{c}'"))),
            None => Err(self.err(format!("expected '{expected}', found end of input"))),
        }
    }

    fn read_iriref(&mut self) -> Result<String, RdfError> {
        self.expect_char('<')?;
        let mut iri = String::new();
        loop {
            match self.peek_char() {
                Some('>') => {
                    self.bump();
                    break;
                }
                Some(c) if c.is_whitespace() => {
                    return Err(self.err("whitespace inside IRI"));
                }
                Some('<') => return Err(self.err("'<' inside IRI")),
                Some(c) => {
                    iri.push(c);
                    self.bump();
                }
                None => return Err(self.err("unterminated IRI")),
            }
        }
        if iri.is_empty() {
            return Err(self.err("empty IRI"));
        }
        if !iri.contains(':') {
            return Err(self.err(format!("relative IRI not supported: <{iri}>")));
        }
        Ok(iri)
    }

    fn read_string_literal(&mut self) -> Result<String, RdfError> {
        self.expect_char('"')?;
        let mut out = String::new();
        loop {
            match self.peek_char() {
                Some('"') => {
                    self.bump();
                    return Ok(out);
                }
                Some('\\') => {
                    self.bump();
                    let escaped = self
                        .peek_char()
                        .ok_or_else(|| self.err("unterminated escape"))?;
                    let replacement = match escaped {
                        't' => '\t',
                        'n' => '\n',
                        'r' => '\r',
                        'b' => '\u{0008}',
                        'f' => '\u{000C}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        other => return Err(self.err(format!("unknown escape '\\{other}'"))),
                    };
                    out.push(replacement);
                    self.bump();
                }
                Some('\n') => return Err(self.err("newline inside string literal")),
                Some(c) => {
                    out.push(c);
                    self.bump();
                }
                None => return Err(self.err("unterminated string literal")),
            }
        }
    }

    fn read_language_tag(&mut self) -> Result<String, RdfError> {
        let mut tag = String::new();
        while let Some(c) = self.peek_char() {
            if c.is_ascii_alphanumeric() || c == '-' {
                tag.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if tag.is_empty() || !tag.chars().next().unwrap().is_ascii_alphabetic() {
            return Err(self.err("invalid language tag"));
        }
        Ok(tag)
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<Term, RdfError> {
        let namespace = self
            .prefixes
            .get(prefix)
            .ok_or_else(|| RdfError::UnknownPrefix(prefix.to_string()))?;
        Term::iri(format!("{namespace}{local}"))
    }

    // ----- grammar -----

    fn statement(&mut self) -> Result<(), RdfError> {
        self.skip_trivia();
        if self.peek_char() == Some('@') && self.lookahead_keyword("@prefix") {
            return self.prefix_directive();
        }
        self.triples_statement()
    }

    fn lookahead_keyword(&self, keyword: &str) -> bool {
        keyword
            .chars()
            .enumerate()
            .all(|(i, k)| self.peek_char_at(i) == Some(k))
    }

    fn prefix_directive(&mut self) -> Result<(), RdfError> {
        for _ in 0.."@prefix".len() {
            self.bump();
        }
        self.skip_trivia();
        let label = self.read_word();
        self.expect_char(':')?;
        self.skip_trivia();
        let namespace = self.read_iriref()?;
        self.skip_trivia();
        self.expect_char('.')?;
        self.prefixes.insert(label.clone(), namespace.clone());
        self.graph.add_prefix(label, namespace);
        Ok(())
    }

    fn triples_statement(&mut self) -> Result<(), RdfError> {
        let subject = self.subject()?;
        loop {
            self.skip_trivia();
            let predicate = self.verb()?;
            loop {
                self.skip_trivia();
                let object = self.object()?;
                let triple = Triple::new(subject.clone(), predicate.clone(), object)
                    .map_err(|e| self.err(e.to_string()))?;
                if self.graph.insert(triple.clone()) {
                    self.triple_order.push(triple);
                }
                self.skip_trivia();
                if self.peek_char() == Some(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            self.skip_trivia();
            if self.peek_char() == Some(';') {
                while self.peek_char() == Some(';') {
                    self.bump();
                    self.skip_trivia();
                }
                if self.peek_char() == Some('.') {
                    break;
                }
            } else {
                break;
            }
        }
        self.skip_trivia();
        self.expect_char('.')?;
        Ok(())
    }

    fn subject(&mut self) -> Result<Term, RdfError> {
        self.skip_trivia();
        match self.peek_char() {
            Some('<') => {
                let iri = self.read_iriref()?;
                Term::iri(iri).map_err(|e| self.err(e.to_string()))
            }
            Some('_') if self.peek_char_at(1) == Some(':') => self.blank_node(),
            Some(c) if Self::is_local_char(c) => {
                let (prefix, local) = self.prefixed_name()?;
                self.expand(&prefix, &local)
            }
            Some(c) => Err(self.err(format!("expected subject, found '{c}'"))),
            None => Err(self.err("expected subject, found end of input")),
        }
    }

    fn blank_node(&mut self) -> Result<Term, RdfError> {
        self.bump(); // '_'
        self.bump(); // ':'
        let label = self.read_word();
        if label.is_empty() {
            return Err(self.err("empty blank node label"));
        }
        Ok(Term::blank(label))
    }

    /// Reads `prefix:local`. The caller has checked the first char.
    fn prefixed_name(&mut self) -> Result<(String, String), RdfError> {
        let prefix = self.read_word();
        self.expect_char(':')?;
        let local = self.read_word();
        Ok((prefix, local))
    }

    fn verb(&mut self) -> Result<Term, RdfError> {
        match self.peek_char() {
            Some('<') => {
                let iri = self.read_iriref()?;
                Term::iri(iri).map_err(|e| self.err(e.to_string()))
            }
            Some('a') if !matches!(self.peek_char_at(1), Some(c) if Self::is_local_char(c) || c == ':') =>
            {
                self.bump();
                Term::iri(RDF_TYPE).map_err(|e| self.err(e.to_string()))
            }
            Some(c) if Self::is_local_char(c) => {
                let (prefix, local) = self.prefixed_name()?;
                self.expand(&prefix, &local)
            }
            Some(c) => Err(self.err(format!("expected predicate, found '{c}'"))),
            None => Err(self.err("expected predicate, found end of input")),
        }
    }

    fn object(&mut self) -> Result<Term, RdfError> {
        match self.peek_char() {
            Some('<') => {
                let iri = self.read_iriref()?;
                Term::iri(iri).map_err(|e| self.err(e.to_string()))
            }
            Some('"') => self.literal(),
            Some('_') if self.peek_char_at(1) == Some(':') => self.blank_node(),
            Some(c) if Self::is_local_char(c) => {
                let (prefix, mut local) = self.prefixed_name()?;
                // Absorb trailing bare words into the local name
                // (underscore-joined), e.g. `wd:party conference`.
                loop {
                    let mark = (self.pos, self.line, self.column);
                    self.skip_trivia();
                    match self.peek_char() {
                        Some(c) if Self::is_local_char(c) => {
                            let word = self.read_word();
                            if self.peek_char() == Some(':') || word == "a" {
                                // A prefixed name or the `a` keyword is new
                                // syntax, not part of this local name.
                                (self.pos, self.line, self.column) = mark;
                                break;
                            }
                            if !local.is_empty() {
                                local.push('_');
                            }
                            local.push_str(&word);
                        }
                        _ => {
                            (self.pos, self.line, self.column) = mark;
                            break;
                        }
                    }
                }
                self.expand(&prefix, &local)
            }
            Some(c) => Err(self.err(format!("expected object, found '{c}'"))),
            None => Err(self.err("expected object, found end of input")),
        }
    }

    fn literal(&mut self) -> Result<Term, RdfError> {
        let lexical = self.read_string_literal()?;
        match self.peek_char() {
            Some('^') => {
                self.bump();
                self.expect_char('^')?;
                self.skip_trivia();
                let datatype = match self.peek_char() {
                    Some('<') => self.read_iriref()?,
                    Some(c) if Self::is_local_char(c) => {
                        let (prefix, local) = self.prefixed_name()?;
                        match self.expand(&prefix, &local)? {
                            Term::Iri(iri) => iri,
                            _ => unreachable!("expand returns IRIs"),
                        }
                    }
                    _ => return Err(self.err("expected datatype IRI after '^^'")),
                };
                Ok(Term::typed_literal(lexical, datatype))
            }
            Some('@') => {
                self.bump();
                let tag = self.read_language_tag()?;
                Ok(Term::lang_literal(lexical, tag))
            }
            _ => Ok(Term::plain_literal(lexical)),
        }
    }

    /// Skip forward until a top-level `.` has been consumed (or EOF). String
    /// literals and IRIs are skipped atomically so embedded dots don't count.
    fn resync_past_dot(&mut self) {
        loop {
            self.skip_trivia();
            match self.peek_char() {
                None => return,
                Some('.') => {
                    self.bump();
                    return;
                }
                // Both readers consume at least one character, so scanning
                // always makes progress even when they error.
                Some('"') => {
                    let _ = self.read_string_literal();
                }
                Some('<') => {
                    let _ = self.read_iriref();
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }
}
