//! Run-length character-class generalization of example strings into an
//! anchored regex.
//!
//! Each value is cut into runs of letters, ASCII digits, or one repeated
//! literal character. Values with the same sequence of run classes merge into
//! one branch whose run lengths widen to `{min,max}`. Distinct sequences
//! become alternatives of a non-capturing group.
//!
//! Output dialect: `^`/`$`, `(?:a|b)`, `[a-z]`, `[A-Z]`, `[A-Za-z]`, `\d`,
//! `[\p{Alphabetic}\p{N}]` for non-ASCII alphanumerics, `{n}` / `{n,m}`, and
//! backslash-escaped literals.

use std::collections::BTreeMap;

use crate::error::IndexError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Class {
    Digit,
    Alpha,
    Literal(char),
}

#[derive(Debug, Clone, Copy, Default)]
struct Letters {
    lower: bool,
    upper: bool,
    other: bool,
}

impl Letters {
    fn add(&mut self, c: char) {
        if c.is_ascii_lowercase() {
            self.lower = true;
        } else if c.is_ascii_uppercase() {
            self.upper = true;
        } else {
            self.other = true;
        }
    }

    fn union(&mut self, o: Letters) {
        self.lower |= o.lower;
        self.upper |= o.upper;
        self.other |= o.other;
    }

    fn render(self) -> &'static str {
        match (self.other, self.lower, self.upper) {
            (true, _, _) => r"[\p{Alphabetic}\p{N}]",
            (false, true, false) => "[a-z]",
            (false, false, true) => "[A-Z]",
            _ => "[A-Za-z]",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    class: Class,
    min: usize,
    max: usize,
    letters: Letters,
}

fn class_of(c: char) -> Class {
    if c.is_ascii_digit() {
        Class::Digit
    } else if c.is_alphanumeric() {
        Class::Alpha
    } else {
        Class::Literal(c)
    }
}

fn runs(value: &str) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for c in value.chars() {
        let class = class_of(c);
        match out.last_mut() {
            Some(r) if r.class == class => {
                r.min += 1;
                r.max += 1;
                if class == Class::Alpha {
                    r.letters.add(c);
                }
            }
            _ => {
                let mut letters = Letters::default();
                if class == Class::Alpha {
                    letters.add(c);
                }
                out.push(Run {
                    class,
                    min: 1,
                    max: 1,
                    letters,
                });
            }
        }
    }
    out
}

fn render_branch(runs: &[Run]) -> String {
    let mut out = String::new();
    for r in runs {
        let atom = match r.class {
            Class::Digit => r"\d".to_string(),
            Class::Alpha => r.letters.render().to_string(),
            Class::Literal(c) => regex::escape(&c.to_string()),
        };
        out.push_str(&atom);
        let literal = matches!(r.class, Class::Literal(_));
        if r.min == r.max {
            if !(literal && r.min == 1) {
                out.push_str(&format!("{{{}}}", r.min));
            }
        } else {
            out.push_str(&format!("{{{},{}}}", r.min, r.max));
        }
    }
    out
}

/// Generalizes a sample into one anchored regex that matches every
/// non-empty input value. Empty values are ignored.
pub fn generalize_pattern<S: AsRef<str>>(values: &[S]) -> Result<String, IndexError> {
    let mut shapes: BTreeMap<Vec<Class>, Vec<Run>> = BTreeMap::new();
    for v in values {
        let v = v.as_ref();
        if v.is_empty() {
            continue;
        }
        let rs = runs(v);
        let key: Vec<Class> = rs.iter().map(|r| r.class).collect();
        match shapes.get_mut(&key) {
            Some(merged) => {
                for (m, r) in merged.iter_mut().zip(&rs) {
                    m.min = m.min.min(r.min);
                    m.max = m.max.max(r.max);
                    m.letters.union(r.letters);
                }
            }
            None => {
                shapes.insert(key, rs);
            }
        }
    }
    if shapes.is_empty() {
        return Err(IndexError::InvalidPattern {
            pattern: String::new(),
            reason: "empty sample".into(),
        });
    }
    let mut branches: Vec<String> = shapes.values().map(|rs| render_branch(rs)).collect();
    branches.sort();
    branches.dedup();
    Ok(if branches.len() == 1 {
        format!("^{}$", branches[0])
    } else {
        format!("^(?:{})$", branches.join("|"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use regex::Regex;

    #[test]
    fn dates() {
        let values = ["11/07/2005", "03/21/1999"];
        let p = generalize_pattern(&values).unwrap();
        assert_eq!(p, r"^\d{2}/\d{2}/\d{4}$");
        let re = Regex::new(&p).unwrap();
        assert!(values.iter().all(|v| re.is_match(v)));
    }

    #[test]
    fn single_email() {
        let p = generalize_pattern(&["a@b.com"]).unwrap();
        assert_eq!(p, r"^[a-z]{1}@[a-z]{1}\.[a-z]{3}$");
        assert!(Regex::new(&p).unwrap().is_match("a@b.com"));
    }

    #[test]
    fn widening_and_alternation() {
        let p = generalize_pattern(&["abc-12", "Ab-1234", "november 07, 2005"]).unwrap();
        assert_eq!(p, r"^(?:[A-Za-z]{2,3}\-\d{2,4}|[a-z]{8} \d{2}, \d{4})$");
        let re = Regex::new(&p).unwrap();
        for v in ["abc-12", "Ab-1234", "november 07, 2005"] {
            assert!(re.is_match(v), "{v}");
        }
        assert!(!re.is_match("abc-12x"));
    }

    #[test]
    fn empty_sample() {
        assert!(generalize_pattern(&[""]).is_err());
        assert!(generalize_pattern::<&str>(&[]).is_err());
    }

    proptest! {
        #[test]
        fn matches_every_input(values in prop::collection::vec("\\PC{1,12}", 1..8)) {
            let p = generalize_pattern(&values).unwrap();
            let re = Regex::new(&p).unwrap();
            for v in &values {
                prop_assert!(re.is_match(v), "{} should match {:?}", p, v);
            }
        }
    }
}
