//! English noun number by suffix rules.

const IRREGULAR: [(&str, &str); 6] = [
    ("child", "children"),
    ("man", "men"),
    ("person", "people"),
    ("foot", "feet"),
    ("tooth", "teeth"),
    ("mouse", "mice"),
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn with_case_of(template: &str, word: String) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        let mut c = word.chars();
        c.next()
            .map(|f| f.to_uppercase().chain(c).collect())
            .unwrap_or_default()
    } else {
        word
    }
}

pub fn irregular_plural(singular: &str) -> Option<&'static str> {
    IRREGULAR.iter().find(|(s, _)| *s == singular).map(|(_, p)| *p)
}

pub fn irregular_singular(plural: &str) -> Option<&'static str> {
    IRREGULAR.iter().find(|(_, p)| *p == plural).map(|(s, _)| *s)
}

pub fn pluralize(word: &str) -> String {
    let lower = word.to_lowercase();
    let out = if let Some(p) = irregular_plural(&lower) {
        p.to_string()
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| lower.ends_with(s)) {
        format!("{lower}es")
    } else if lower.len() > 1 && lower.ends_with('y') && !lower[..lower.len() - 1].ends_with(is_vowel) {
        format!("{}ies", &lower[..lower.len() - 1])
    } else {
        format!("{lower}s")
    };
    with_case_of(word, out)
}

pub fn singularize(word: &str) -> String {
    let lower = word.to_lowercase();
    let out = if let Some(s) = irregular_singular(&lower) {
        s.to_string()
    } else if let Some(stem) = lower.strip_suffix("ies").filter(|s| !s.is_empty()) {
        format!("{stem}y")
    } else if let Some(stem) = ["ses", "xes", "zes", "ches", "shes"]
        .iter()
        .find(|s| lower.ends_with(*s))
        .map(|_| &lower[..lower.len() - 2])
    {
        stem.to_string()
    } else if let Some(stem) = lower.strip_suffix('s').filter(|s| !s.is_empty()) {
        stem.to_string()
    } else {
        lower
    };
    with_case_of(word, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_and_irregular() {
        for (s, p) in [
            ("society", "societies"),
            ("idea", "ideas"),
            ("box", "boxes"),
            ("church", "churches"),
            ("day", "days"),
            ("child", "children"),
            ("mouse", "mice"),
            ("Person", "People"),
        ] {
            assert_eq!(pluralize(s), p);
            assert_eq!(singularize(p), s);
        }
        assert_eq!(pluralize("sheep"), "sheeps");
    }
}
