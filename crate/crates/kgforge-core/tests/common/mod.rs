//! Shared helpers for integration tests: a deterministic RNG, a random
//! graph generator staying inside the supported Turtle grammar, and an
//! exhaustive alignment oracle independent of the production code path.

// Each test binary compiles this module separately and uses a different
// slice of it.
#![allow(dead_code)]

use std::collections::BTreeMap;

use kgforge_core::eval::{element_match, Criterion, MatchLevel};
use kgforge_core::rdf::{Graph, Term, Triple, RDFS_NS, RDF_TYPE, WDT_NS, WD_NS};

/// xorshift64*: deterministic, seedable, no dependencies.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound.max(1) as u64) as usize
    }

    pub fn chance(&mut self, percent: usize) -> bool {
        self.below(100) < percent
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

const LOCAL_WORDS: [&str; 10] = [
    "Tehran",
    "Iran",
    "Musician",
    "Adams",
    "Cambridge",
    "Writer",
    "Galaxy",
    "Radio",
    "Barbat",
    "Firouzi",
];
const PRED_WORDS: [&str; 8] = [
    "PlaceOfBirth",
    "DateOfBirth",
    "CountryOfCitizenship",
    "occupation",
    "NotableWork",
    "EducatedAt",
    "MemberOf",
    "Genre",
];
const LITERAL_WORDS: [&str; 8] = [
    "1958",
    "musician",
    "English author",
    "radio comedy",
    "1952-03-11",
    "five books",
    "Mohammad Firouzi",
    "comedy, drama",
];

pub fn random_local(rng: &mut Rng) -> String {
    let mut local = (*rng.pick(&LOCAL_WORDS)).to_string();
    if rng.chance(40) {
        local.push('_');
        local.push_str(rng.pick(&LOCAL_WORDS));
    }
    if rng.chance(30) {
        local.push_str(&format!("{}", rng.below(100)));
    }
    local
}

pub fn random_subject(rng: &mut Rng) -> Term {
    if rng.chance(10) {
        Term::blank(format!("b{}", rng.below(5)))
    } else {
        Term::iri(format!("{WD_NS}{}", random_local(rng))).unwrap()
    }
}

pub fn random_predicate(rng: &mut Rng) -> Term {
    if rng.chance(10) {
        Term::iri(RDF_TYPE).unwrap()
    } else if rng.chance(15) {
        Term::iri(format!("{RDFS_NS}label")).unwrap()
    } else {
        Term::iri(format!("{WDT_NS}{}", rng.pick(&PRED_WORDS))).unwrap()
    }
}

pub fn random_object(rng: &mut Rng) -> Term {
    match rng.below(5) {
        0 => Term::plain_literal(*rng.pick(&LITERAL_WORDS)),
        1 => Term::typed_literal(
            *rng.pick(&LITERAL_WORDS),
            "http://www.w3.org/2001/XMLSchema#date",
        ),
        2 => Term::lang_literal(*rng.pick(&LITERAL_WORDS), "en"),
        3 if rng.chance(30) => Term::blank(format!("b{}", rng.below(5))),
        _ => Term::iri(format!("{WD_NS}{}", random_local(rng))).unwrap(),
    }
}

/// A random graph within the supported grammar, with the standard prefixes.
pub fn random_graph(rng: &mut Rng, max_triples: usize) -> Graph {
    let mut graph = Graph::with_standard_prefixes();
    let count = 1 + rng.below(max_triples.max(1));
    for _ in 0..count {
        let triple = Triple::new(
            random_subject(rng),
            random_predicate(rng),
            random_object(rng),
        )
        .unwrap();
        graph.insert(triple);
    }
    graph
}

fn pair_levels(
    predicted: &[String; 3],
    gold: &[String; 3],
    criterion: Criterion,
    jaccard: f64,
) -> (u32, u32, u32) {
    let mut partials = 0;
    let mut exacts = 0;
    for (a, b) in predicted.iter().zip(gold.iter()) {
        match element_match(a, b, jaccard) {
            MatchLevel::Exact => {
                partials += 1;
                exacts += 1;
            }
            MatchLevel::Partial => partials += 1,
            MatchLevel::None => {}
        }
    }
    let hit = match criterion {
        Criterion::Partial => partials == 3,
        Criterion::Exact => exacts == 3,
    };
    (partials, exacts, u32::from(hit))
}

/// Exhaustive alignment oracle: enumerate every injective mapping from the
/// smaller side into the larger, maximize (partial elements, exact
/// elements, hits) lexicographically, and report the hits of the optimum.
pub fn oracle_hits(
    predicted: &[[String; 3]],
    gold: &[[String; 3]],
    criterion: Criterion,
    jaccard: f64,
) -> usize {
    if predicted.is_empty() || gold.is_empty() {
        return 0;
    }
    let swap = predicted.len() > gold.len();
    let (rows, cols): (&[[String; 3]], &[[String; 3]]) = if swap {
        (gold, predicted)
    } else {
        (predicted, gold)
    };
    let levels: Vec<Vec<(u32, u32, u32)>> = rows
        .iter()
        .map(|r| {
            cols.iter()
                .map(|c| {
                    if swap {
                        pair_levels(c, r, criterion, jaccard)
                    } else {
                        pair_levels(r, c, criterion, jaccard)
                    }
                })
                .collect()
        })
        .collect();
    let mut available: Vec<usize> = (0..cols.len()).collect();
    let mut best = (0u32, 0u32, 0u32);
    fn recurse(
        levels: &[Vec<(u32, u32, u32)>],
        row: usize,
        available: &mut Vec<usize>,
        acc: (u32, u32, u32),
        best: &mut (u32, u32, u32),
    ) {
        if row == levels.len() {
            if acc > *best {
                *best = acc;
            }
            return;
        }
        for i in 0..available.len() {
            let col = available.swap_remove(i);
            let (p, e, h) = levels[row][col];
            recurse(
                levels,
                row + 1,
                available,
                (acc.0 + p, acc.1 + e, acc.2 + h),
                best,
            );
            available.push(col);
            let last = available.len() - 1;
            available.swap(i, last);
        }
    }
    recurse(&levels, 0, &mut available, (0, 0, 0), &mut best);
    best.2 as usize
}

/// Write a default-per-template mock fixture.
pub fn write_default_fixture(mock_dir: &std::path::Path, template: &str, content: &str) {
    let dir = mock_dir.join(template);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("default.txt"), content).unwrap();
}

/// Gold strings straight from a triple's terms, for self-evaluation tests.
pub fn gold_strings_of(triple: &Triple) -> [String; 3] {
    let text_of = |term: &Term| match term {
        Term::Iri(iri) => iri.clone(),
        Term::Blank(label) => label.clone(),
        Term::Literal { lexical, .. } => lexical.clone(),
    };
    [
        text_of(&triple.subject),
        text_of(&triple.predicate),
        text_of(&triple.object),
    ]
}

pub fn bindings_of(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
