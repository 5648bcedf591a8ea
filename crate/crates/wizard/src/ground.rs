use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::belief::{concept_range, Range};
use crate::term::parse_number;
use crate::{KnowledgeBase, Result, Term, WizardError};

/// Minimum normalized Damerau-Levenshtein similarity for a fuzzy match.
pub const FUZZY_THRESHOLD: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub symbol: String,
    pub dimension: String,
    pub si_unit: String,
    pub si_factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct Form {
    text: String,
    words: usize,
    value: String,
}

/// Surface forms per concept and the unit table, both read from the KB.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    labels: BTreeMap<String, Vec<Form>>,
    synonyms: BTreeMap<String, Vec<Form>>,
    units: Vec<Unit>,
}

/// `OrbitalSander` → `orbital sander`.
fn default_label(symbol: &str) -> String {
    let name = symbol.rsplit(':').next().unwrap_or(symbol);
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push(' ');
        }
        out.push(c);
    }
    normalize(&out)
}

/// Lowercase, punctuation to spaces, single-spaced.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| *c != '\'')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Lexicon {
    pub fn from_kb(kb: &KnowledgeBase) -> Result<Lexicon> {
        let mut lex = Lexicon::default();
        let mut classes: Vec<&str> = Vec::new();
        for t in kb.matches(crate::Pattern::new(None, Some("type"), None)) {
            if let Some(c) = t.object.as_symbol() {
                if !classes.contains(&c) {
                    classes.push(c);
                }
            }
        }
        for class in classes {
            let mut owner: HashMap<String, String> = HashMap::new();
            let (mut labels, mut synonyms) = (Vec::new(), Vec::new());
            for inst in kb.instances(class) {
                let label = match kb.object(inst, "label") {
                    Some(Term::String { value }) => normalize(value),
                    _ => default_label(inst),
                };
                let syns = kb.objects(inst, "synonym").filter_map(Term::as_str).map(normalize);
                for (i, text) in std::iter::once(label).chain(syns).enumerate() {
                    if text.is_empty() {
                        continue;
                    }
                    match owner.get(&text) {
                        Some(o) if o != inst => {
                            return Err(WizardError::Consistency(format!(
                                "surface form `{text}` names both `{o}` and `{inst}` in `{class}`"
                            )))
                        }
                        Some(_) => continue,
                        None => {}
                    }
                    owner.insert(text.clone(), inst.to_owned());
                    let form = Form {
                        words: text.split(' ').count(),
                        text,
                        value: inst.to_owned(),
                    };
                    if i == 0 { labels.push(form) } else { synonyms.push(form) }
                }
            }
            lex.labels.insert(class.to_owned(), labels);
            lex.synonyms.insert(class.to_owned(), synonyms);
        }
        for u in kb.instances("Unit") {
            let dimension = kb.object(u, "dimension").and_then(Term::as_symbol);
            let factor = kb.object(u, "si_factor").and_then(Term::as_f64);
            let (Some(dimension), Some(si_factor)) = (dimension, factor) else {
                return Err(WizardError::Consistency(format!("unit `{u}` needs dimension and si_factor")));
            };
            let Ok(Range::Dimension { si_unit, .. }) = concept_range(kb, dimension) else {
                return Err(WizardError::Consistency(format!("unit `{u}`: `{dimension}` is not a dimension")));
            };
            lex.units.push(Unit {
                symbol: u.to_owned(),
                dimension: dimension.to_owned(),
                si_unit,
                si_factor,
            });
        }
        Ok(lex)
    }

    /// Label used to ask about or echo `value`.
    pub fn primary_form(&self, concept: &str, value: &str) -> Option<&str> {
        self.labels
            .get(concept)?
            .iter()
            .find(|f| f.value == value)
            .map(|f| f.text.as_str())
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// Unit by symbol; exact spelling wins over a unique case-insensitive
    /// match.
    pub fn unit(&self, token: &str) -> Option<&Unit> {
        if let Some(u) = self.units.iter().find(|u| u.symbol == token) {
            return Some(u);
        }
        let mut folded = self.units.iter().filter(|u| u.symbol.eq_ignore_ascii_case(token));
        match (folded.next(), folded.next()) {
            (Some(u), None) => Some(u),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
    pub si_value: f64,
    pub si_unit: String,
    pub dimension: String,
}

impl Quantity {
    pub fn si_term(&self) -> Term {
        Term::quantity(self.si_value, self.si_unit.clone())
    }
}

fn quantity_error(text: &str, reason: &str) -> WizardError {
    WizardError::Quantity {
        text: text.to_owned(),
        reason: reason.to_owned(),
    }
}

/// `number unit`, with or without a space between them.
pub fn parse_quantity(text: &str, lexicon: &Lexicon) -> Result<Quantity> {
    let t = text.trim();
    let (num, unit) = match t.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => {
            // Glued form: the longest numeric prefix followed by a unit.
            let split = (1..t.len())
                .rev()
                .filter(|&i| t.is_char_boundary(i))
                .find(|&i| parse_number(&t[..i]).is_some() && lexicon.unit(&t[i..]).is_some());
            match split {
                Some(i) => (&t[..i], &t[i..]),
                None if parse_number(t).is_some() => return Err(quantity_error(text, "missing unit")),
                None => return Err(quantity_error(text, "no number")),
            }
        }
    };
    let value = parse_number(num).ok_or_else(|| quantity_error(text, "no number"))?;
    if unit.is_empty() {
        return Err(quantity_error(text, "missing unit"));
    }
    let u = lexicon.unit(unit).ok_or_else(|| quantity_error(text, "unknown unit"))?;
    Ok(Quantity {
        value,
        unit: u.symbol.clone(),
        si_value: value * u.si_factor,
        si_unit: u.si_unit.clone(),
        dimension: u.dimension.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Stage {
    Exact,
    Synonym,
    Fuzzy { score: f64 },
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Grounding {
    Match { value: Term, stage: Stage },
    NoMatch,
}

fn ngrams<'a>(tokens: &'a [&'a str], n: usize) -> impl Iterator<Item = String> + 'a {
    tokens.windows(n).map(|w| w.join(" "))
}

/// Values whose form occurs verbatim as an n-gram, keeping the longest match.
fn verbatim(tokens: &[&str], forms: &[Form]) -> Option<String> {
    let mut best: Option<(usize, Vec<&str>)> = None;
    for f in forms {
        if f.words > tokens.len() || !ngrams(tokens, f.words).any(|g| g == f.text) {
            continue;
        }
        match &mut best {
            Some((w, vals)) if *w == f.words => {
                if !vals.contains(&f.value.as_str()) {
                    vals.push(&f.value);
                }
            }
            Some((w, _)) if *w > f.words => {}
            _ => best = Some((f.words, vec![&f.value])),
        }
    }
    match best {
        Some((_, vals)) if vals.len() == 1 => Some(vals[0].to_owned()),
        _ => None,
    }
}

/// Best-scoring value over n-grams within one word of each form's length;
/// `None` below the threshold or on a tie between values.
fn fuzzy(tokens: &[&str], forms: &[&Form]) -> Option<(String, f64)> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for f in forms {
        for n in f.words.saturating_sub(1).max(1)..=(f.words + 1).min(tokens.len()) {
            for g in ngrams(tokens, n) {
                let s = strsim::normalized_damerau_levenshtein(&g, &f.text);
                let e = best.entry(&f.value).or_insert(0.0);
                *e = e.max(s);
            }
        }
    }
    let top = best.values().copied().fold(0.0, f64::max);
    if top < FUZZY_THRESHOLD {
        return None;
    }
    let winners: Vec<&str> = best.iter().filter(|(_, &s)| s == top).map(|(v, _)| *v).collect();
    (winners.len() == 1).then(|| (winners[0].to_owned(), top))
}

/// Raw tokens with trailing sentence punctuation removed.
fn raw_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|t| t.trim_end_matches([',', ';', '!', '?', '.']))
        .filter(|t| !t.is_empty())
        .collect()
}

fn unique<T: PartialEq>(mut found: Vec<T>) -> Option<T> {
    let first = found.pop()?;
    found.iter().all(|f| *f == first).then_some(first)
}

fn literal_match(text: &str, range: &Range, lexicon: &Lexicon) -> Option<Term> {
    let toks = raw_tokens(text);
    match range {
        Range::Count => unique(
            toks.iter()
                .filter_map(|t| t.parse::<u64>().ok())
                .map(|v| Term::num(v as f64))
                .collect(),
        ),
        Range::Dimension { name, .. } => {
            let mut found = Vec::new();
            let mut i = 0;
            while i < toks.len() {
                if i + 1 < toks.len() {
                    if let Ok(q) = parse_quantity(&format!("{} {}", toks[i], toks[i + 1]), lexicon) {
                        found.push(q);
                        i += 2;
                        continue;
                    }
                }
                if let Ok(q) = parse_quantity(toks[i], lexicon) {
                    found.push(q);
                }
                i += 1;
            }
            unique(found.into_iter().map(|q| (q.dimension.clone(), q.si_term())).collect())
                .filter(|(d, _)| d == name)
                .map(|(_, t)| t)
        }
        _ => None,
    }
}

/// Resolves an utterance to a value of `concept`: exact label, synonym,
/// fuzzy label or synonym, then typed literal parsing.
pub fn ground_concept(utterance: &str, concept: &str, lexicon: &Lexicon, kb: &KnowledgeBase) -> Result<Grounding> {
    let range = concept_range(kb, concept)?;
    let norm = normalize(utterance);
    let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
    let candidates_of = match &range {
        Range::Class(c) => Some(c.as_str()),
        Range::Boolean => Some("Boolean"),
        _ => None,
    };
    if let Some(class) = candidates_of.filter(|_| !tokens.is_empty()) {
        let empty = Vec::new();
        let labels = lexicon.labels.get(class).unwrap_or(&empty);
        let synonyms = lexicon.synonyms.get(class).unwrap_or(&empty);
        let hit = verbatim(&tokens, labels)
            .map(|v| (v, Stage::Exact))
            .or_else(|| verbatim(&tokens, synonyms).map(|v| (v, Stage::Synonym)))
            .or_else(|| {
                let all: Vec<&Form> = labels.iter().chain(synonyms).collect();
                fuzzy(&tokens, &all).map(|(v, score)| (v, Stage::Fuzzy { score }))
            });
        if let Some((v, stage)) = hit {
            let value = match kb.object(&v, "value") {
                Some(lit) => lit.clone(),
                None => Term::sym(v),
            };
            return Ok(Grounding::Match { value, stage });
        }
    }
    Ok(match literal_match(utterance, &range, lexicon) {
        Some(value) => Grounding::Match {
            value,
            stage: Stage::Literal,
        },
        None => Grounding::NoMatch,
    })
}
