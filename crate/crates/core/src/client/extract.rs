//! The answer extractor.
//!
//! A *standalone* letter is one bounded on both sides by a
//! non-alphanumeric character or the string edge. The scan first looks
//! for uppercase standalone letters and only then accepts lowercase ones,
//! so articles such as "a" do not shadow a later "B". Results are always
//! uppercase.

use super::PromptMode;

fn is_valid(c: char, valid: &[char]) -> bool {
    valid.contains(&c.to_ascii_uppercase())
}

fn standalone_at(chars: &[char], i: usize) -> bool {
    let before = i == 0 || !chars[i - 1].is_alphanumeric();
    let after = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
    before && after
}

fn first_standalone(chars: &[char], valid: &[char]) -> Option<char> {
    let pass = |upper_only: bool| {
        (0..chars.len()).find_map(|i| {
            let c = chars[i];
            let case_ok = !upper_only || c.is_ascii_uppercase();
            (case_ok && c.is_ascii_alphabetic() && is_valid(c, valid) && standalone_at(chars, i)).then(|| c.to_ascii_uppercase())
        })
    };
    pass(true).or_else(|| pass(false))
}

/// Last `Answer:` (any case) followed by optional whitespace, an optional
/// `(`, and a standalone valid letter.
fn last_answer_tag(chars: &[char], valid: &[char]) -> Option<char> {
    const TAG: [char; 7] = ['a', 'n', 's', 'w', 'e', 'r', ':'];
    let lower: Vec<char> = chars.iter().map(|c| c.to_ascii_lowercase()).collect();
    (0..lower.len().saturating_sub(TAG.len() - 1)).rev().find_map(|start| {
        if lower[start..start + TAG.len()] != TAG {
            return None;
        }
        let mut i = start + TAG.len();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i < chars.len() && chars[i] == '(' {
            i += 1;
        }
        let c = *chars.get(i)?;
        let after_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        (c.is_ascii_alphabetic() && is_valid(c, valid) && after_ok).then(|| c.to_ascii_uppercase())
    })
}

/// Maps a raw response onto one of `valid` letters, or `None` when
/// nothing usable is found (scored as incorrect and flagged unparsable).
pub fn extract_answer(text: &str, mode: PromptMode, valid: &[char]) -> Option<char> {
    let chars: Vec<char> = text.chars().collect();
    match mode {
        PromptMode::Direct => first_standalone(&chars, valid),
        PromptMode::Cot => last_answer_tag(&chars, valid).or_else(|| first_standalone(&chars, valid)),
    }
}
