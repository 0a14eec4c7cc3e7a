//! Regenerates the deterministic test fixtures under `tests/fixtures/`:
//! the raw DGen-format input, the two stub backend tables (tuned and
//! un-tuned) and the POS lexicon. Golden artifacts under
//! `tests/fixtures/golden/` are produced by running the CLI over these
//! files; see the repo README.
//!
//! Run: `cargo run --example make_fixtures -- crates/clozegen/tests/fixtures`

use clozegen::backend::{format_query, Strategy, StubTable};
use clozegen::corpus::{parse_dgen, DgenRecord};
use std::collections::BTreeMap;
use std::path::Path;

struct Fixture {
    id: &'static str,
    sentence: &'static str,
    answer: &'static str,
    gold: [&'static str; 3],
    extras: [&'static str; 2],
    domain: &'static str,
}

const FIXTURES: [Fixture; 6] = [
    Fixture {
        id: "d001",
        sentence: "Water boils at _ degrees.",
        answer: "100",
        gold: ["90", "80", "50"],
        extras: ["60", "heat"],
        domain: "science",
    },
    Fixture {
        id: "d002",
        sentence: "The sun rises in the _ .",
        answer: "east",
        gold: ["west", "north", "south"],
        extras: ["sky", "sunrise"],
        domain: "science",
    },
    Fixture {
        id: "d003",
        sentence: "Plants absorb _ from the air.",
        answer: "carbon dioxide",
        gold: ["oxygen", "nitrogen", "hydrogen"],
        extras: ["water", "sunlight"],
        domain: "science",
    },
    Fixture {
        id: "d004",
        sentence: "An atom's nucleus contains protons and _ .",
        answer: "neutrons",
        gold: ["electrons", "photons", "ions"],
        extras: ["quarks", "energy"],
        domain: "science",
    },
    Fixture {
        id: "d005",
        sentence: "Sound travels fastest through _ .",
        answer: "solids",
        gold: ["liquids", "gases", "vacuum"],
        extras: ["metals", "air"],
        domain: "science",
    },
    Fixture {
        id: "d006",
        sentence: "The largest planet is _ .",
        answer: "Jupiter",
        gold: ["Mars", "Venus", "Saturn"],
        extras: ["Neptune", "Pluto"],
        domain: "science",
    },
];

fn record(f: &Fixture) -> DgenRecord {
    DgenRecord {
        id: f.id.to_string(),
        sentence: f.sentence.to_string(),
        answer: f.answer.to_string(),
        distractors: f.gold.iter().map(|s| s.to_string()).collect(),
        domain: Some(f.domain.to_string()),
    }
}

fn row(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(s, p)| (s.to_string(), *p)).collect()
}

fn main() {
    let dir = std::env::args().nth(1).expect("usage: make_fixtures <fixtures-dir>");
    let dir = Path::new(&dir);
    std::fs::create_dir_all(dir).unwrap();

    let mut raw = String::new();
    let mut tuned = StubTable { version: 1, entries: BTreeMap::new(), default: None };
    let mut base = StubTable { version: 1, entries: BTreeMap::new(), default: None };

    for f in &FIXTURES {
        let rec = record(f);
        raw.push_str(&serde_json::to_string(&rec).unwrap());
        raw.push('\n');
        let item = parse_dgen(&rec).unwrap();

        for strategy in [Strategy::AnswerRelating, Strategy::Naive] {
            let key = format_query(&item, strategy).key();
            // the tuned table ranks the gold distractors at the top
            // (beneath the answer, which the generator filters)
            let tuned_row = match strategy {
                Strategy::AnswerRelating => row(&[
                    (f.answer, 0.40),
                    (f.gold[0], 0.32),
                    (f.gold[1], 0.24),
                    (f.gold[2], 0.18),
                    (f.extras[0], 0.12),
                    (f.extras[1], 0.06),
                ]),
                Strategy::Naive => row(&[
                    (f.answer, 0.35),
                    (f.gold[0], 0.30),
                    (f.gold[1], 0.15),
                    (f.gold[2], 0.22),
                    (f.extras[0], 0.10),
                    (f.extras[1], 0.05),
                ]),
            };
            tuned.entries.insert(key.clone(), tuned_row);
            // the un-tuned table prefers the generic extras
            base.entries.insert(
                key,
                row(&[
                    (f.answer, 0.28),
                    (f.extras[0], 0.30),
                    (f.extras[1], 0.25),
                    (f.gold[0], 0.10),
                    (f.gold[1], 0.08),
                    (f.gold[2], 0.05),
                ]),
            );
        }
    }

    let lexicon: BTreeMap<String, String> = [
        ("100", "NUM"),
        ("90", "NUM"),
        ("80", "NUM"),
        ("50", "NUM"),
        ("60", "NUM"),
        ("heat", "NOUN"),
        ("east", "NOUN"),
        ("west", "NOUN"),
        ("north", "NOUN"),
        ("south", "NOUN"),
        ("sky", "NOUN"),
        ("carbon dioxide", "NOUN"),
        ("oxygen", "NOUN"),
        ("nitrogen", "NOUN"),
        ("hydrogen", "NOUN"),
        ("water", "NOUN"),
        ("neutrons", "NOUN"),
        ("electrons", "NOUN"),
        ("photons", "NOUN"),
        ("ions", "NOUN"),
        ("quarks", "NOUN"),
        ("energy", "NOUN"),
        ("solids", "NOUN"),
        ("liquids", "NOUN"),
        ("gases", "NOUN"),
        ("metals", "NOUN"),
        ("air", "NOUN"),
        ("jupiter", "PROPN"),
        ("mars", "PROPN"),
        ("venus", "PROPN"),
        ("saturn", "PROPN"),
        ("neptune", "PROPN"),
        ("pluto", "PROPN"),
        // "sunrise", "sunlight" and "vacuum" are deliberately untagged to
        // exercise the unknown-POS warning path
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    std::fs::write(dir.join("dgen_raw.jsonl"), raw).unwrap();
    write_json(&dir.join("stub_backend.json"), &tuned);
    write_json(&dir.join("stub_backend_base.json"), &base);
    write_json(&dir.join("pos_lexicon.json"), &serde_json::json!({ "tags": lexicon }));
    println!("fixtures written to {}", dir.display());
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    std::fs::write(path, text).unwrap();
}
