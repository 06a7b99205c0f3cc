//! Suffix-stripping noun lemmatizer for section headings.
//!
//! Headings are short noun phrases, so collapsing plural forms is all that
//! is needed. Rules are applied until the word stops changing, so
//! [`lemmatize`] is idempotent.

const IRREGULAR: &[(&str, &str)] = &[
    ("analyses", "analysis"),
    ("children", "child"),
    ("criteria", "criterion"),
    ("diagnoses", "diagnosis"),
    ("hypotheses", "hypothesis"),
    ("men", "man"),
    ("people", "person"),
    ("phenomena", "phenomenon"),
    ("prognoses", "prognosis"),
    ("women", "woman"),
];

/// Words ending in `s` that are not plurals.
const KEEP: &[&str] = &[
    "aids", "always", "diabetes", "news", "series", "species", "this", "thus", "versus", "whereas",
];

pub fn lemmatize(word: &str) -> String {
    let mut current = word.to_string();
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn strip_once(word: &str) -> String {
    if let Some((_, lemma)) = IRREGULAR.iter().find(|(plural, _)| *plural == word) {
        return (*lemma).to_string();
    }
    if KEEP.contains(&word) {
        return word.to_string();
    }
    let n = word.chars().count();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if word.ends_with("sses")
        || word.ends_with("ches")
        || word.ends_with("shes")
        || word.ends_with("xes")
    {
        return word[..word.len() - 2].to_string();
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if n > 3 && word.ends_with('s') {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}
