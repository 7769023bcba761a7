//! Subword vocabularies compatible with pretrained model files: WordPiece
//! (`vocab.txt`, one token per line) and byte-level BPE (`vocab.json` plus
//! `merges.txt`).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabKind {
    WordPiece,
    ByteBpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn all(&self) -> [u32; 5] {
        [self.pad, self.unk, self.cls, self.sep, self.mask]
    }
}

const WORDPIECE_SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
const BPE_SPECIALS: [&str; 5] = ["<pad>", "<unk>", "<s>", "</s>", "<mask>"];
const CONTINUATION: &str = "##";
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone)]
pub struct SubwordVocab {
    kind: VocabKind,
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    specials: SpecialIds,
    is_special: Vec<bool>,
    merge_ranks: HashMap<(String, String), usize>,
    byte_encoder: Vec<char>,
    byte_decoder: HashMap<char, u8>,
    hash: String,
}

/// Token ids with delimiters, after truncation to a maximum length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

impl SubwordVocab {
    pub fn wordpiece_from_file(path: &Path) -> Result<Self> {
        let bytes = crate::io::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::format(path, 0, e.to_string()))?;
        Self::wordpiece_from_str(&text)
    }

    pub fn wordpiece_from_str(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        let hash = crate::io::sha256_hex(text.as_bytes());
        Self::build(VocabKind::WordPiece, tokens, Vec::new(), hash)
    }

    pub fn bpe_from_files(vocab: &Path, merges: &Path) -> Result<Self> {
        let v = crate::io::read_to_string(vocab)?;
        let m = crate::io::read_to_string(merges)?;
        Self::bpe_from_str(&v, &m).map_err(|e| match e {
            Error::Data(msg) => Error::format(vocab, 0, msg),
            other => other,
        })
    }

    pub fn bpe_from_str(vocab_json: &str, merges: &str) -> Result<Self> {
        let map: HashMap<String, u32> = serde_json::from_str(vocab_json)
            .map_err(|e| Error::Data(format!("vocab.json: {e}")))?;
        let size = map.len();
        let mut tokens = vec![None; size];
        for (tok, id) in map {
            let slot = tokens
                .get_mut(id as usize)
                .ok_or_else(|| Error::Data(format!("vocab id {id} out of range 0..{size}")))?;
            if slot.is_some() {
                return Err(Error::Data(format!("vocab id {id} assigned twice")));
            }
            *slot = Some(tok);
        }
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.unwrap()).collect();
        let mut pairs = Vec::new();
        for (i, line) in merges.lines().enumerate() {
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => pairs.push((a.to_string(), b.to_string())),
                _ => return Err(Error::Data(format!("merges line {}: expected two symbols", i + 1))),
            }
        }
        let mut hasher_input = vocab_json.as_bytes().to_vec();
        hasher_input.push(0);
        hasher_input.extend_from_slice(merges.as_bytes());
        let hash = crate::io::sha256_hex(&hasher_input);
        Self::build(VocabKind::ByteBpe, tokens, pairs, hash)
    }

    fn build(
        kind: VocabKind,
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
        hash: String,
    ) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("token {t:?} appears twice in vocabulary")));
            }
        }
        let names = match kind {
            VocabKind::WordPiece => WORDPIECE_SPECIALS,
            VocabKind::ByteBpe => BPE_SPECIALS,
        };
        let lookup = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| Error::Data(format!("vocabulary lacks special token {name}")))
        };
        let specials = SpecialIds {
            pad: lookup(names[0])?,
            unk: lookup(names[1])?,
            cls: lookup(names[2])?,
            sep: lookup(names[3])?,
            mask: lookup(names[4])?,
        };
        let mut is_special = vec![false; tokens.len()];
        for id in specials.all() {
            is_special[id as usize] = true;
        }
        let merge_ranks = merges.into_iter().enumerate().map(|(r, p)| (p, r)).collect();
        let byte_encoder = bytes_to_unicode();
        let byte_decoder = byte_encoder.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Ok(Self {
            kind,
            tokens,
            ids,
            specials,
            is_special,
            merge_ranks,
            byte_encoder,
            byte_decoder,
            hash,
        })
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// SHA-256 of the vocabulary file bytes (and merges, for BPE).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.is_special.get(id as usize).copied().unwrap_or(false)
    }

    /// Ids eligible as random replacements during masking.
    pub fn non_special_ids(&self) -> Vec<u32> {
        (0..self.tokens.len() as u32).filter(|&i| !self.is_special(i)).collect()
    }

    /// Subword ids of `text` without delimiters.
    pub fn tokenize_content(&self, text: &str) -> Vec<u32> {
        match self.kind {
            VocabKind::WordPiece => pre_tokenize_wordpiece(text)
                .iter()
                .flat_map(|w| self.wordpiece(w))
                .collect(),
            VocabKind::ByteBpe => pre_tokenize_bytelevel(text)
                .iter()
                .flat_map(|w| self.bpe(w))
                .collect(),
        }
    }

    /// Subword ids of `text` wrapped in the sequence delimiters.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut ids = vec![self.specials.cls];
        ids.extend(self.tokenize_content(text));
        ids.push(self.specials.sep);
        ids
    }

    /// Like [`tokenize`](Self::tokenize) but keeps at most `max_len`
    /// positions, delimiters included.
    pub fn encode(&self, text: &str, max_len: usize) -> Encoding {
        assert!(max_len >= 2, "max_len must leave room for both delimiters");
        let mut content = self.tokenize_content(text);
        let truncated = content.len() > max_len - 2;
        content.truncate(max_len - 2);
        let mut ids = Vec::with_capacity(content.len() + 2);
        ids.push(self.specials.cls);
        ids.extend(content);
        ids.push(self.specials.sep);
        Encoding { ids, truncated }
    }

    /// Inverse of tokenization, ignoring special tokens other than unk.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        let content = ids
            .iter()
            .filter(|&&i| !self.is_special(i) || i == self.specials.unk)
            .filter_map(|&i| self.token(i));
        match self.kind {
            VocabKind::WordPiece => {
                let mut out = String::new();
                for tok in content {
                    if let Some(rest) = tok.strip_prefix(CONTINUATION) {
                        out.push_str(rest);
                    } else {
                        if !out.is_empty() {
                            out.push(' ');
                        }
                        out.push_str(tok);
                    }
                }
                out
            }
            VocabKind::ByteBpe => {
                let bytes: Vec<u8> = content
                    .flat_map(|t| t.chars())
                    .filter_map(|c| self.byte_decoder.get(&c).copied())
                    .collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
        }
    }

    /// The form of `text` that detokenization reproduces: pre-tokens joined
    /// by single spaces for WordPiece, the text itself for byte-level BPE.
    pub fn canonical_text(&self, text: &str) -> String {
        match self.kind {
            VocabKind::WordPiece => pre_tokenize_wordpiece(text).join(" "),
            VocabKind::ByteBpe => text.to_string(),
        }
    }

    /// Whether each id begins a new word (false for continuation pieces).
    /// Special tokens count as their own words.
    pub fn word_starts(&self, ids: &[u32]) -> Vec<bool> {
        ids.iter()
            .enumerate()
            .map(|(pos, &id)| {
                if self.is_special(id) && id != self.specials.unk {
                    return true;
                }
                let tok = self.token(id).unwrap_or("");
                match self.kind {
                    VocabKind::WordPiece => !tok.starts_with(CONTINUATION),
                    VocabKind::ByteBpe => {
                        let prev_special = pos == 0 || self.is_special(ids[pos - 1]);
                        prev_special || tok.starts_with(self.byte_encoder[b' ' as usize])
                    }
                }
            })
            .collect()
    }

    fn wordpiece(&self, word: &str) -> Vec<u32> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            return vec![self.specials.unk];
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, CONTINUATION);
                }
                if let Some(&id) = self.ids.get(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => return vec![self.specials.unk],
            }
            start = end;
        }
        pieces
    }

    fn bpe(&self, pre_token: &str) -> Vec<u32> {
        let mut symbols: Vec<String> = pre_token
            .bytes()
            .map(|b| self.byte_encoder[b as usize].to_string())
            .collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.merge_ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, i))
                })
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len()
                    && self.merge_ranks.get(&(symbols[i].clone(), symbols[i + 1].clone())) == Some(&rank)
                {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
            .iter()
            .map(|s| self.ids.get(s).copied().unwrap_or(self.specials.unk))
            .collect()
    }
}

/// GPT-2's reversible byte to printable-character table.
fn bytes_to_unicode() -> Vec<char> {
    let printable = |b: u32| (0x21..=0x7e).contains(&b) || (0xa1..=0xac).contains(&b) || (0xae..=0xff).contains(&b);
    let mut table = vec!['\0'; 256];
    let mut extra = 0;
    for b in 0..256u32 {
        let c = if printable(b) {
            b
        } else {
            extra += 1;
            255 + extra
        };
        table[b as usize] = char::from_u32(c).unwrap();
    }
    table
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace())
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0x20000..=0x2A6DF | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F | 0x2B820..=0x2CEAF | 0xF900..=0xFAFF | 0x2F800..=0x2FA1F)
}

/// BERT's basic (cased) pre-tokenization: drop control characters, split
/// on whitespace, and split punctuation and CJK characters into their own
/// tokens.
pub fn pre_tokenize_wordpiece(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c == '\0' || c == '\u{fffd}' || (c.is_control() && !c.is_whitespace()) {
            continue;
        }
        if c.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if is_punctuation(c) || is_cjk(c) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// GPT-2 pre-tokenization: contractions, optionally space-prefixed runs of
/// letters, numbers or other symbols, and whitespace runs that leave their
/// last space to the following word.
pub fn pre_tokenize_bytelevel(text: &str) -> Vec<String> {
    const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let is_other = |c: char| !c.is_whitespace() && !c.is_alphabetic() && !c.is_numeric();
    let run = |from: usize, pred: &dyn Fn(char) -> bool| {
        let mut j = from;
        while j < n && pred(chars[j]) {
            j += 1;
        }
        j
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let rest: String = chars[i..n.min(i + 3)].iter().collect();
        if let Some(c) = CONTRACTIONS.iter().find(|c| rest.starts_with(*c)) {
            let len = c.chars().count();
            out.push(chars[i..i + len].iter().collect());
            i += len;
            continue;
        }
        let body = if chars[i] == ' ' && i + 1 < n { i + 1 } else { i };
        let c = chars[body];
        let end = if c.is_alphabetic() {
            run(body, &|c: char| c.is_alphabetic())
        } else if c.is_numeric() {
            run(body, &|c: char| c.is_numeric())
        } else if is_other(c) {
            run(body, &is_other)
        } else {
            // whitespace run
            let j = run(i, &|c: char| c.is_whitespace());
            if j < n && j - i > 1 {
                j - 1
            } else {
                j
            }
        };
        out.push(chars[i..end].iter().collect());
        i = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp() -> SubwordVocab {
        let vocab = "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nthe\ncoffee\nAlex\ndrinks\n.\n,\nawake\nstay\n##s\nun\n##believ\n##able";
        SubwordVocab::wordpiece_from_str(vocab).unwrap()
    }

    #[test]
    fn empty_text_is_delimiters_only() {
        let v = wp();
        assert_eq!(v.tokenize(""), vec![2, 3]);
        assert!(v.tokenize_content("").is_empty());
    }

    #[test]
    fn vocabulary_word_is_one_token() {
        assert_eq!(wp().tokenize_content("coffee"), vec![6]);
    }

    #[test]
    fn greedy_longest_match() {
        let v = wp();
        assert_eq!(v.tokenize_content("unbelievable"), vec![14, 15, 16]);
        assert_eq!(v.tokenize_content("stays"), vec![12, 13]);
        assert_eq!(v.tokenize_content("unknownword"), vec![1]);
        assert_eq!(v.detokenize(&v.tokenize("Alex drinks coffee.")), "Alex drinks coffee .");
        assert_eq!(v.word_starts(&[2, 14, 15, 16, 3]), vec![true, true, false, false, true]);
    }

    #[test]
    fn truncation_keeps_delimiters() {
        let v = wp();
        let e = v.encode("the the the the the", 4);
        assert_eq!(e.ids, vec![2, 5, 5, 3]);
        assert!(e.truncated);
        assert!(!v.encode("the", 4).truncated);
    }

    #[test]
    fn vocab_validation() {
        assert!(SubwordVocab::wordpiece_from_str("[PAD]\n[UNK]\n[CLS]\n[SEP]").is_err());
        assert!(SubwordVocab::wordpiece_from_str("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\na\na").is_err());
    }

    #[test]
    fn byte_table_is_a_bijection() {
        let t = bytes_to_unicode();
        let distinct: std::collections::HashSet<char> = t.iter().copied().collect();
        assert_eq!(distinct.len(), 256);
        assert_eq!(t[b' ' as usize], 'Ġ');
        assert_eq!(t[b'A' as usize], 'A');
    }

    #[test]
    fn gpt2_pre_tokenization() {
        assert_eq!(
            pre_tokenize_bytelevel("Hello world's  end!! 42\nx"),
            vec!["Hello", " world", "'s", " ", " end", "!!", " 42", "\n", "x"]
        );
    }

    #[test]
    fn bpe_merges_and_round_trip() {
        let vocab = r#"{"<s>":0,"<pad>":1,"</s>":2,"<unk>":3,"<mask>":4,"l":5,"o":6,"w":7,"Ġ":8,"lo":9,"low":10,"Ġlow":11,"e":12,"r":13,"er":14,"!":15}"#;
        let merges = "#version: 0.2\nl o\nlo w\nĠ low\ne r\n";
        let v = SubwordVocab::bpe_from_str(vocab, merges).unwrap();
        let ids = v.tokenize_content("low lower!");
        assert_eq!(ids, vec![10, 11, 14, 15]);
        assert_eq!(v.detokenize(&v.tokenize("low lower!")), "low lower!");
        assert_eq!(v.word_starts(&[0, 10, 11, 14, 15, 2]), vec![true, true, true, false, false, true]);
    }
}
