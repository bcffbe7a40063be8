//! Turns a (question, option) pair into a declarative hypothesis.
//!
//! Rules are tried against the last sentence of the stem, in order:
//!
//! | rule            | trigger                                   | effect                                  |
//! |-----------------|-------------------------------------------|-----------------------------------------|
//! | `blank`         | a `__` placeholder anywhere in the stem   | placeholder replaced by the option      |
//! | `do-support`    | `What/Which/Who do/does/did X ...?`       | `X ... <option>.`                       |
//! | `leading-wh`    | sentence opens with a wh-phrase           | wh-phrase replaced by the option        |
//! | `inline-wh`     | wh-word inside the sentence               | wh-word replaced by the option          |
//! | `placeholder`   | sentence ends in `?` without a wh-word    | `?` replaced by the option              |
//! | `append`        | anything else (incl. how/why questions)   | option appended                         |
//!
//! Wh-rules only fire when the last sentence ends in `?`.
//! Terminal punctuation is always normalized to a single `.`.

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Question};
use crate::text::{TokenSet, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Blank,
    DoSupport,
    LeadingWh,
    InlineWh,
    Placeholder,
    Append,
    /// The option text was empty; the hypothesis is the bare stem.
    EmptyOption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub question_id: String,
    pub option_label: Label,
    pub text: String,
    pub token_set: TokenSet,
    pub rule: Rule,
}

const SUBSTITUTABLE_WH: [&str; 6] = ["what", "which", "who", "whom", "where", "when"];
const LEADING_PHRASES: [&str; 4] = ["which of the following", "which of these", "what of the following", "which one"];
const AUX: [&str; 3] = ["do", "does", "did"];

pub fn generate_hypotheses(question: &Question, tokenizer: &Tokenizer) -> Vec<Hypothesis> {
    question
        .options
        .iter()
        .map(|opt| {
            let (text, rule) = declarativize(&question.stem, &opt.text);
            Hypothesis {
                question_id: question.id.clone(),
                option_label: opt.label,
                token_set: tokenizer.token_set(&text),
                text,
                rule,
            }
        })
        .collect()
}

/// Builds the hypothesis text for one option.
pub fn declarativize(stem: &str, option: &str) -> (String, Rule) {
    let option = option.trim().trim_end_matches(['.', '?', '!']).trim_end();
    let stem = stem.trim();
    if option.is_empty() {
        return (stem.to_string(), Rule::EmptyOption);
    }

    if let Some(start) = stem.find("__") {
        let end = start + stem[start..].find(|c| c != '_').unwrap_or(stem.len() - start);
        let text = format!("{} {} {}", &stem[..start], option, &stem[end..]);
        return (terminate(&text.split_whitespace().collect::<Vec<_>>().join(" ")), Rule::Blank);
    }

    let (prefix, last) = split_last_sentence(stem);
    let asks = last.trim_end().ends_with('?');
    let body = last.trim_end().trim_end_matches(['?', '.', '!', ' ']);
    let words: Vec<(usize, &str)> = word_spans(body);
    // Relative pronouns in statements ("..., which is why") are not questions.
    let first_wh = if asks {
        words.iter().position(|(_, w)| {
            let lw = w.to_lowercase();
            SUBSTITUTABLE_WH.contains(&lw.as_str()) || lw == "how" || lw == "why"
        })
    } else {
        None
    };

    let rebuilt = |sentence: String, rule: Rule| (terminate(&format!("{prefix}{sentence}")), rule);

    match first_wh {
        Some(i) => {
            let (pos, word) = words[i];
            let lw = word.to_lowercase();
            if lw == "how" || lw == "why" {
                return rebuilt(format!("{body} {option}"), Rule::Append);
            }
            if i == 0 {
                if let Some((_, aux)) = words.get(1) {
                    if AUX.contains(&aux.to_lowercase().as_str()) && words.len() > 2 {
                        let rest = &body[words[2].0..];
                        return rebuilt(format!("{rest} {option}"), Rule::DoSupport);
                    }
                }
                let lower = body.to_lowercase();
                let phrase_len = LEADING_PHRASES
                    .iter()
                    .find(|p| lower.starts_with(*p) && lower[p.len()..].starts_with(' '))
                    .map_or(word.len(), |p| p.len());
                let rest = body[phrase_len..].trim_start();
                return rebuilt(format!("{option} {rest}"), Rule::LeadingWh);
            }
            let sentence = format!("{}{}{}", &body[..pos], option, &body[pos + word.len()..]);
            rebuilt(sentence, Rule::InlineWh)
        }
        None if asks => rebuilt(format!("{body} {option}"), Rule::Placeholder),
        None => rebuilt(format!("{body} {option}"), Rule::Append),
    }
}

fn terminate(text: &str) -> String {
    let t = text.trim().trim_end_matches(['.', '?', '!', ',', ';', ':', ' ']);
    format!("{t}.")
}

/// Splits at the last sentence boundary that is not the final character.
fn split_last_sentence(stem: &str) -> (&str, &str) {
    let bytes = stem.as_bytes();
    let mut cut = 0;
    for i in 0..bytes.len().saturating_sub(1) {
        if matches!(bytes[i], b'.' | b'?' | b'!') && bytes[i + 1] == b' ' {
            cut = i + 2;
        }
    }
    // A boundary followed by only whitespace or punctuation is not a new sentence.
    if stem[cut..].trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation()).is_empty() {
        return ("", stem);
    }
    (&stem[..cut], &stem[cut..])
}

fn word_spans(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        let is_word = c.is_alphanumeric() || c == '\'' || c == '-';
        match (is_word, start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                out.push((st, &s[st..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out
}
