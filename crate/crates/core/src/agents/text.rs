//! Word-level text handling for the rule-based agents.

use crate::scene::{Scene, Vec3};

/// Lowercased words with sentence and clause ids per word. Clauses split at
/// commas and semicolons; `segment` further splits at conjunctions.
#[derive(Debug, Clone, Default)]
pub(crate) struct Doc {
    pub words: Vec<String>,
    pub sentence: Vec<usize>,
    pub segment: Vec<usize>,
}

const CONJUNCTIONS: [&str; 4] = ["and", "but", "while", "then"];

fn expand(word: &str) -> Vec<String> {
    let w = word.replace('\u{2019}', "'");
    let expanded = match w.as_str() {
        "don't" | "dont" => "do not",
        "doesn't" => "does not",
        "can't" | "cannot" => "can not",
        "won't" => "will not",
        "shouldn't" => "should not",
        "i'd" => "i would",
        "i'm" => "i am",
        "i'll" => "i will",
        _ => "",
    };
    if !expanded.is_empty() {
        return expanded.split(' ').map(str::to_owned).collect();
    }
    let w = w.strip_suffix("'s").unwrap_or(&w);
    vec![w.replace('\'', "")]
}

impl Doc {
    pub fn parse(text: &str) -> Self {
        let mut doc = Doc::default();
        let (mut sentence, mut segment) = (0usize, 0usize);
        let mut current = String::new();
        let flush = |current: &mut String, doc: &mut Doc, sentence: usize, segment: &mut usize| {
            if current.is_empty() {
                return;
            }
            for w in expand(&current.to_lowercase()) {
                if w.is_empty() {
                    continue;
                }
                if CONJUNCTIONS.contains(&w.as_str()) {
                    *segment += 1;
                }
                doc.words.push(w);
                doc.sentence.push(sentence);
                doc.segment.push(*segment);
            }
            current.clear();
        };
        for c in text.chars() {
            if c.is_alphanumeric() || c == '\'' || c == '\u{2019}' {
                current.push(c);
                continue;
            }
            flush(&mut current, &mut doc, sentence, &mut segment);
            match c {
                '.' | '!' | '?' => {
                    sentence += 1;
                    segment += 1;
                }
                ',' | ';' | ':' => segment += 1,
                _ => {}
            }
        }
        flush(&mut current, &mut doc, sentence, &mut segment);
        doc
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Start indices where `phrase` occurs. The last phrase word also
    /// matches its plural.
    pub fn find(&self, phrase: &[String]) -> Vec<usize> {
        let n = phrase.len();
        if n == 0 || n > self.len() {
            return Vec::new();
        }
        (0..=self.len() - n)
            .filter(|&i| {
                (0..n).all(|k| {
                    let (w, p) = (&self.words[i + k], &phrase[k]);
                    w == p || (k == n - 1 && (*w == format!("{p}s") || *w == format!("{p}es")))
                })
                && (n == 1 || (0..n).all(|k| self.sentence[i + k] == self.sentence[i]))
            })
            .collect()
    }

    /// Indices of words that inflect any of `stems`.
    pub fn find_verbs(&self, stems: &[&str]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| stems.iter().any(|s| inflects(&self.words[i], s)))
            .collect()
    }

    pub fn has_word(&self, i: usize, options: &[&str]) -> bool {
        self.words.get(i).is_some_and(|w| options.contains(&w.as_str()))
    }
}

/// `word` is `stem` or a regular inflection of it.
pub(crate) fn inflects(word: &str, stem: &str) -> bool {
    if word == stem {
        return true;
    }
    let Some(rest) = word.strip_prefix(stem) else {
        if let Some(base) = stem.strip_suffix('e') {
            if let Some(rest) = word.strip_prefix(base) {
                return rest == "ing" || rest == "ed";
            }
        }
        return false;
    };
    if ["s", "es", "ed", "d", "ing"].contains(&rest) {
        return true;
    }
    let last = stem.chars().last().unwrap_or(' ');
    rest.strip_prefix(last).is_some_and(|r| r == "ing" || r == "ed")
}

/// `FlightBooking` → `["flight", "booking"]`.
pub(crate) fn split_name(name: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        prev_lower = c.is_lowercase() || c.is_numeric();
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Word sequences that refer to `name`: its split form and, for compound
/// names, the run-together form.
pub(crate) fn name_phrases(name: &str) -> Vec<Vec<String>> {
    let words = split_name(name);
    let mut out = vec![words.clone()];
    if words.len() > 1 {
        out.push(vec![words.concat()]);
    }
    out
}

pub(crate) fn relative_position(scene: &Scene, p: Vec3) -> String {
    let eye = scene.pose.eye_position;
    let g = scene.pose.gaze_direction;
    let forward = Vec3::new(g.x, 0.0, g.z).normalized().unwrap_or(Vec3::new(0.0, 0.0, -1.0));
    let right = forward.cross(Vec3::Y);
    let d = p - eye;
    let ahead = d.dot(forward);
    let side = d.dot(right);
    let up = d.y;
    let lateral = if side.abs() < 0.005 {
        "centered".to_owned()
    } else if side > 0.0 {
        format!("{:.2} m to the right", side)
    } else {
        format!("{:.2} m to the left", -side)
    };
    let vertical = if up.abs() < 0.005 {
        "at eye level".to_owned()
    } else if up > 0.0 {
        format!("{:.2} m above eye level", up)
    } else {
        format!("{:.2} m below eye level", -up)
    };
    format!("{ahead:.2} m ahead, {lateral}, {vertical}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_with_structure() {
        let d = Doc::parse("Don't block the monitor, and keep it clean. Thanks!");
        assert_eq!(
            d.words,
            ["do", "not", "block", "the", "monitor", "and", "keep", "it", "clean", "thanks"]
        );
        assert_eq!(d.sentence, [0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert!(d.segment[4] < d.segment[5]);
    }

    #[test]
    fn inflections() {
        for (w, s) in [
            ("typing", "type"),
            ("types", "type"),
            ("dragging", "drag"),
            ("watches", "watch"),
            ("reading", "read"),
            ("touch", "touch"),
            ("seeing", "see"),
        ] {
            assert!(inflects(w, s), "{w} / {s}");
        }
        assert!(!inflects("typical", "type"));
        assert!(!inflects("reader", "read"));
        assert!(!inflects("seen", "seem"));
    }

    #[test]
    fn names() {
        assert_eq!(split_name("FlightBooking"), ["flight", "booking"]);
        assert_eq!(split_name("Email"), ["email"]);
        assert_eq!(split_name("tv"), ["tv"]);
        assert_eq!(name_phrases("FlightBooking")[1], ["flightbooking"]);
        let d = Doc::parse("Show the flight booking and two emails");
        assert_eq!(d.find(&split_name("FlightBooking")), [2]);
        assert_eq!(d.find(&split_name("Email")), [6]);
    }
}
