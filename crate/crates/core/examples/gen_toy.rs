//! Regenerate the bundled toy corpora under `data/`. Run from the
//! workspace root:
//!
//! ```sh
//! cargo run -p stancekit --example gen_toy
//! ```
//!
//! The outputs are deterministic, so rerunning must leave the checked-in
//! files unchanged.

use stancekit::synth;
use std::fs;
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let toy = root.join("data/toy");
    let toy3 = root.join("data/toy3");
    fs::create_dir_all(&toy).expect("create data/toy");
    fs::create_dir_all(&toy3).expect("create data/toy3");

    fs::write(toy.join("discussions.jsonl"), synth::tagger_corpus_jsonl(20, 42))
        .expect("write tagger corpus");
    fs::write(toy.join("disputes.jsonl"), synth::dispute_corpus_jsonl(20, 42))
        .expect("write dispute corpus");
    fs::write(toy.join("seeds.tsv"), synth::SEED_TSV).expect("write seeds");

    fs::write(toy3.join("discussions.jsonl"), synth::toy3_jsonl()).expect("write toy3 corpus");
    fs::write(toy3.join("seeds.tsv"), synth::SEED_TSV).expect("write toy3 seeds");

    println!("wrote data/toy and data/toy3");
}
