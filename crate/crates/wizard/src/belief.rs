use std::collections::BTreeMap;

use crate::{KnowledgeBase, Result, Term, WizardError};

/// Grounded values by belief key.
pub type BeliefState = BTreeMap<String, Term>;

pub const BELIEF_KEY: &str = "BeliefKey";

/// Value domain of a belief key or grounding concept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Range {
    Boolean,
    /// Non-negative integer.
    Count,
    /// Quantity of the named dimension, stored in its SI unit.
    Dimension { name: String, si_unit: String },
    /// Instances of a KB class.
    Class(String),
}

/// Domain of a concept symbol: `Boolean`, `Count`, a declared dimension or a
/// class with instances.
pub fn concept_range(kb: &KnowledgeBase, concept: &str) -> Result<Range> {
    match concept {
        "Count" => return Ok(Range::Count),
        "Boolean" => return Ok(Range::Boolean),
        _ => {}
    }
    if kb.is_a(concept, "Dimension") {
        let si_unit = kb
            .object(concept, "si_unit")
            .and_then(Term::as_symbol)
            .ok_or_else(|| WizardError::Consistency(format!("dimension `{concept}` has no si_unit")))?;
        return Ok(Range::Dimension {
            name: concept.to_owned(),
            si_unit: si_unit.to_owned(),
        });
    }
    if kb.instances(concept).is_empty() {
        return Err(WizardError::Consistency(format!(
            "concept `{concept}` is neither a literal type nor a class with instances"
        )));
    }
    Ok(Range::Class(concept.to_owned()))
}

/// Range of a declared belief key.
pub fn key_range(kb: &KnowledgeBase, key: &str) -> Result<Range> {
    if !kb.is_a(key, BELIEF_KEY) {
        return Err(WizardError::Type(format!("`{key}` is not a declared belief key")));
    }
    let concept = kb
        .object(key, "range")
        .and_then(Term::as_symbol)
        .ok_or_else(|| WizardError::Consistency(format!("belief key `{key}` has no range")))?;
    concept_range(kb, concept)
}

pub fn range_accepts(kb: &KnowledgeBase, range: &Range, value: &Term) -> bool {
    match (range, value) {
        (Range::Boolean, Term::Boolean { .. }) => true,
        (Range::Count, Term::Number { value }) => *value >= 0.0 && value.fract() == 0.0,
        (Range::Dimension { si_unit, .. }, Term::Quantity { unit, .. }) => unit == si_unit,
        (Range::Class(c), Term::Symbol { name }) => kb.is_a(name, c),
        _ => false,
    }
}

pub fn type_check(kb: &KnowledgeBase, key: &str, value: &Term) -> Result<()> {
    let range = key_range(kb, key)?;
    if range_accepts(kb, &range, value) {
        Ok(())
    } else {
        Err(WizardError::Type(format!("{value} is not a valid `{key}` ({range:?})")))
    }
}
