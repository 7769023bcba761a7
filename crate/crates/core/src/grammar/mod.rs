//! Ordered, deterministic sentence clean-up applied to every verbalized
//! sample, plus an optional advisory pass through an external checker.

mod checker;

pub use checker::{
    check_external, CheckOptions, CheckReport, CheckedSentence, GrammarChecker, Issue,
    RepeatedWordChecker, SubprocessChecker,
};

pub const RULESET_VERSION: &str = "rules/1";

pub struct Rule {
    pub name: &'static str,
    pub apply: fn(&str) -> String,
}

pub struct RuleSet {
    pub version: &'static str,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn shipped() -> Self {
        Self {
            version: RULESET_VERSION,
            rules: vec![
                Rule { name: "collapse-whitespace", apply: collapse_whitespace },
                Rule { name: "space-before-punctuation", apply: remove_space_before_punctuation },
                Rule { name: "capitalize-sentences", apply: capitalize_sentences },
                Rule { name: "terminal-period", apply: ensure_terminal_punctuation },
                Rule { name: "collapse-periods", apply: collapse_periods },
                Rule { name: "article-agreement", apply: article_agreement },
            ],
        }
    }

    pub fn apply(&self, text: &str) -> String {
        self.rules
            .iter()
            .fold(text.to_string(), |acc, rule| (rule.apply)(&acc))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.iter().map(|r| r.name).collect()
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::shipped()
    }
}

/// Applies the shipped rule set. Idempotent.
pub fn normalize(text: &str) -> String {
    RuleSet::shipped().apply(text)
}

const CLAUSE_PUNCT: [char; 6] = ['.', ',', '!', '?', ';', ':'];
const SENTENCE_END: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 5] = ['"', '\'', ')', ']', '}'];

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn remove_space_before_punctuation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ' ' && chars.get(i + 1).is_some_and(|n| CLAUSE_PUNCT.contains(n)) {
            continue;
        }
        out.push(c);
    }
    out
}

fn capitalize_sentences(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cap_next = true;
    let mut after_end = false;
    for c in text.chars() {
        if cap_next && c.is_alphanumeric() {
            out.extend(c.to_uppercase());
            cap_next = false;
            after_end = false;
            continue;
        }
        if cap_next && !(CLOSERS.contains(&c) || c == '(' || c == '[') {
            cap_next = false;
        }
        if SENTENCE_END.contains(&c) {
            after_end = true;
        } else if c == ' ' && after_end {
            cap_next = true;
            after_end = false;
        } else if !(after_end && CLOSERS.contains(&c)) {
            after_end = false;
        }
        out.push(c);
    }
    out
}

fn ensure_terminal_punctuation(text: &str) -> String {
    if text.is_empty() {
        return String::new();
    }
    let body = text.trim_end_matches(CLOSERS);
    if body.ends_with(SENTENCE_END) || body.is_empty() {
        return text.to_string();
    }
    let closers = &text[body.len()..];
    let body = body.trim_end_matches([',', ';', ':']).trim_end();
    if body.is_empty() {
        return text.to_string();
    }
    if closers.is_empty() {
        format!("{body}.")
    } else {
        format!("{body}{closers}.")
    }
}

fn collapse_periods(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '.' && out.ends_with('.') {
            continue;
        }
        out.push(c);
    }
    out
}

/// Words spelled with a leading vowel letter but pronounced with a consonant.
const CONSONANT_SOUND_PREFIXES: &[&str] = &[
    "one", "once", "ubiquit", "ufo", "ukulele", "unanim", "unicorn", "unicycl", "unific",
    "uniform", "unilateral", "union", "uniq", "unison", "unit", "univers", "uran", "urin",
    "usa", "usab", "usag", "use", "using", "usu", "utensil", "uter", "utili", "utopia", "eu",
    "ewe",
];

/// Words spelled with a leading consonant letter but pronounced with a vowel.
const VOWEL_SOUND_PREFIXES: &[&str] = &["heir", "honest", "honor", "honour", "hour"];

fn takes_an(word: &str) -> Option<bool> {
    let first = word.chars().next()?;
    if !first.is_alphabetic() {
        return None;
    }
    // acronyms are spelled out letter by letter; leave them alone
    if word.chars().count() > 1 && word.chars().all(|c| !c.is_lowercase()) {
        return None;
    }
    let lower = word.to_lowercase();
    if CONSONANT_SOUND_PREFIXES.iter().any(|p| lower.starts_with(p)) {
        return Some(false);
    }
    if VOWEL_SOUND_PREFIXES.iter().any(|p| lower.starts_with(p)) {
        return Some(true);
    }
    Some(matches!(lower.chars().next(), Some('a' | 'e' | 'i' | 'o' | 'u')))
}

fn article_agreement(text: &str) -> String {
    let tokens: Vec<&str> = text.split(' ').collect();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let is_article = matches!(*tok, "a" | "an" | "A" | "An");
        let sentence_start =
            i == 0 || tokens[i - 1].trim_end_matches(CLOSERS).ends_with(SENTENCE_END);
        let capital = tok.starts_with('A');
        if !is_article || (capital && !sentence_start) {
            out.push(tok.to_string());
            continue;
        }
        let next = tokens.get(i + 1).map(|w| w.trim_start_matches(['"', '\'', '(']));
        let fixed = match next.and_then(takes_an) {
            Some(true) if tok.len() == 1 => format!("{tok}n"),
            Some(false) if tok.len() == 2 => tok[..1].to_string(),
            _ => tok.to_string(),
        };
        out.push(fixed);
    }
    out.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn concatenated_template_sentence() {
        assert_eq!(
            normalize("alex drinks coffee . as a result, Alex will stays awake"),
            "Alex drinks coffee. As a result, Alex will stays awake."
        );
    }

    #[test]
    fn article_rule() {
        assert_eq!(normalize("A apple"), "An apple.");
        assert_eq!(normalize("she ate a egg and an banana"), "She ate an egg and a banana.");
        assert_eq!(normalize("it was an hour"), "It was an hour.");
        assert_eq!(normalize("a hour passed"), "An hour passed.");
        assert_eq!(normalize("an university"), "A university.");
        assert_eq!(normalize("a useful tool"), "A useful tool.");
        assert_eq!(normalize("an FBI agent"), "An FBI agent.");
        assert_eq!(normalize("take vitamin A every day"), "Take vitamin A every day.");
    }

    #[test]
    fn clean_sentence_is_unchanged() {
        for s in ["Alex drinks coffee.", "Is it raining?", "He said \"hi.\"", "Wow!"] {
            assert_eq!(normalize(s), s);
        }
    }

    #[test]
    fn punctuation_clean_up() {
        assert_eq!(normalize("  hello   world ,  friend  "), "Hello world, friend.");
        assert_eq!(normalize("done.."), "Done.");
        assert_eq!(normalize("as a result,"), "As a result.");
        assert_eq!(normalize("it is (maybe)"), "It is (maybe).");
        assert_eq!(normalize("first. second! third? fourth"), "First. Second! Third? Fourth.");
    }

    #[test]
    fn verb_agreement_is_left_alone() {
        assert!(normalize("alex will stays awake").contains("will stays"));
    }

    #[test]
    fn rule_order_is_stable() {
        assert_eq!(
            RuleSet::shipped().names(),
            vec![
                "collapse-whitespace",
                "space-before-punctuation",
                "capitalize-sentences",
                "terminal-period",
                "collapse-periods",
                "article-agreement"
            ]
        );
    }

    fn words(s: &str) -> Vec<String> {
        s.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| {
                let w = w.to_lowercase();
                if w == "an" {
                    "a".to_string()
                } else {
                    w
                }
            })
            .collect()
    }

    fn sentence() -> impl Strategy<Value = String> {
        let word = prop_oneof![
            Just("a".to_string()),
            Just("an".to_string()),
            Just("A".to_string()),
            Just(".".to_string()),
            Just(",".to_string()),
            Just("?".to_string()),
            Just("..".to_string()),
            Just("hour".to_string()),
            Just("use".to_string()),
            Just("\"".to_string()),
            "[a-zA-Z]{1,8}",
            "[a-z]{1,5}[.,!]",
        ];
        (prop::collection::vec(word, 1..14), prop::collection::vec(" {0,3}", 14)).prop_map(
            |(ws, seps)| {
                ws.iter()
                    .zip(seps.iter())
                    .map(|(w, s)| format!("{s}{w}"))
                    .collect::<String>()
            },
        )
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in sentence()) {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalize_keeps_alphanumeric_content(s in sentence()) {
            prop_assert_eq!(words(&normalize(&s)), words(&s));
        }
    }
}
