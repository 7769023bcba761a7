//! Token ids checked against goldens produced by the HuggingFace
//! `BertTokenizer` and `GPT2Tokenizer` from the same vocabulary files
//! (see `fixtures/tokenizer/make_goldens.py`).

mod common;

use common::fixture;
use corpusforge::tokenizer::SubwordVocab;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    text: String,
    wordpiece: Vec<u32>,
    bpe: Vec<u32>,
}

fn goldens() -> Vec<Golden> {
    let text = std::fs::read_to_string(fixture("tokenizer/goldens.jsonl")).unwrap();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn wordpiece() -> SubwordVocab {
    SubwordVocab::wordpiece_from_file(&fixture("tokenizer/wordpiece_vocab.txt")).unwrap()
}

fn bpe() -> SubwordVocab {
    SubwordVocab::bpe_from_files(
        &fixture("tokenizer/bpe-vocab.json"),
        &fixture("tokenizer/bpe-merges.txt"),
    )
    .unwrap()
}

#[test]
fn fifty_sentences() {
    assert_eq!(goldens().len(), 50);
}

#[test]
fn wordpiece_matches_reference_ids() {
    let v = wordpiece();
    for g in goldens() {
        assert_eq!(v.tokenize_content(&g.text), g.wordpiece, "{}", g.text);
    }
}

#[test]
fn bpe_matches_reference_ids() {
    let v = bpe();
    for g in goldens() {
        assert_eq!(v.tokenize_content(&g.text), g.bpe, "{}", g.text);
    }
}

/// Whitespace split, then every ASCII punctuation character split off,
/// joined by single spaces.
fn oracle_canonical(text: &str) -> String {
    let mut words = Vec::new();
    for w in text.split_whitespace() {
        let mut cur = String::new();
        for c in w.chars() {
            if c.is_ascii_punctuation() {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
                words.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words.join(" ")
}

#[test]
fn wordpiece_round_trip() {
    let v = wordpiece();
    let unk = v.specials().unk;
    for g in goldens() {
        let ids = v.tokenize(&g.text);
        assert!(!ids.contains(&unk), "{}", g.text);
        let back = v.detokenize(&ids);
        assert_eq!(back, oracle_canonical(&g.text));
        assert_eq!(back, v.canonical_text(&g.text));
    }
}

#[test]
fn bpe_round_trip_is_exact() {
    let v = bpe();
    for g in goldens() {
        assert_eq!(v.detokenize(&v.tokenize(&g.text)), g.text);
    }
}

#[test]
fn delimiters_and_truncation() {
    for v in [wordpiece(), bpe()] {
        let s = v.specials();
        for g in goldens() {
            let enc = v.encode(&g.text, 30);
            assert!(enc.ids.len() <= 30);
            assert_eq!(enc.ids[0], s.cls);
            assert_eq!(*enc.ids.last().unwrap(), s.sep);
            let full = v.tokenize(&g.text);
            assert_eq!(enc.truncated, full.len() > 30);
            if !enc.truncated {
                assert_eq!(enc.ids, full);
            }
        }
    }
}
