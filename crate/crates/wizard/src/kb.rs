use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{parse, Rule, Term, WizardError, WorkflowDef, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: Term) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object,
        }
    }
}

/// Query pattern; `None` positions are variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pattern {
    pub subject: Option<String>,
    pub predicate: Option<String>,
    pub object: Option<Term>,
}

impl Pattern {
    pub fn new(subject: Option<&str>, predicate: Option<&str>, object: Option<Term>) -> Self {
        Pattern {
            subject: subject.map(str::to_owned),
            predicate: predicate.map(str::to_owned),
            object,
        }
    }
}

/// Values of the variable positions of a matched pattern. A fully ground
/// pattern that holds yields one empty binding.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding {
    pub subject: Option<String>,
    pub predicate: Option<String>,
    pub object: Option<Term>,
}

/// Predicates whose subjects may carry only one object each.
const FUNCTIONAL: &str = "FunctionalProperty";

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    present: HashSet<Triple>,
    by_subject: HashMap<String, Vec<usize>>,
    by_predicate: HashMap<String, Vec<usize>>,
    by_object: HashMap<Term, Vec<usize>>,
    pub(crate) namespaces: Vec<String>,
    pub(crate) rules: Vec<Rule>,
    pub(crate) workflows: BTreeMap<String, WorkflowDef>,
}

pub fn kb_load(path: impl AsRef<Path>) -> Result<KnowledgeBase> {
    let text = std::fs::read_to_string(path)?;
    KnowledgeBase::parse(&text)
}

impl KnowledgeBase {
    pub fn parse(text: &str) -> Result<KnowledgeBase> {
        let kb = parse::parse_kb(text)?;
        kb.check()?;
        Ok(kb)
    }

    /// Adds a triple; returns false when it was already present.
    pub(crate) fn insert(&mut self, t: Triple) -> bool {
        if self.present.contains(&t) {
            return false;
        }
        let id = self.triples.len();
        self.by_subject.entry(t.subject.clone()).or_default().push(id);
        self.by_predicate.entry(t.predicate.clone()).or_default().push(id);
        self.by_object.entry(t.object.clone()).or_default().push(id);
        self.present.insert(t.clone());
        self.triples.push(t);
        true
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn namespaces(&self) -> &[String] {
        &self.namespaces
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn workflow(&self, id: &str) -> Result<&WorkflowDef> {
        self.workflows
            .get(id)
            .ok_or_else(|| WizardError::UnknownWorkflow(id.to_owned()))
    }

    pub fn workflows(&self) -> impl Iterator<Item = &WorkflowDef> {
        self.workflows.values()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.present.contains(t)
    }

    /// Matching triples in insertion order.
    pub fn matches(&self, pattern: Pattern) -> impl Iterator<Item = &Triple> + '_ {
        let candidates: Box<dyn Iterator<Item = usize> + '_> = {
            let lists = [
                pattern.subject.as_ref().map(|s| self.by_subject.get(s)),
                pattern.predicate.as_ref().map(|p| self.by_predicate.get(p)),
                pattern.object.as_ref().map(|o| self.by_object.get(o)),
            ];
            // The shortest index list among the bound positions drives the scan.
            let best = lists
                .iter()
                .flatten()
                .min_by_key(|l| l.map_or(0, |v| v.len()));
            match best {
                Some(Some(ids)) => Box::new(ids.iter().copied()),
                Some(None) => Box::new(std::iter::empty()),
                None => Box::new(0..self.triples.len()),
            }
        };
        candidates.map(|i| &self.triples[i]).filter(move |t| {
            pattern.subject.as_ref().is_none_or(|s| &t.subject == s)
                && pattern.predicate.as_ref().is_none_or(|p| &t.predicate == p)
                && pattern.object.as_ref().is_none_or(|o| &t.object == o)
        })
    }

    /// Objects of `(subject, predicate, ?)`.
    pub fn objects<'a>(&'a self, subject: &str, predicate: &str) -> impl Iterator<Item = &'a Term> + 'a {
        let ids = self.by_subject.get(subject).map(Vec::as_slice).unwrap_or(&[]);
        let predicate = predicate.to_owned();
        ids.iter()
            .map(|&i| &self.triples[i])
            .filter(move |t| t.predicate == predicate)
            .map(|t| &t.object)
    }

    pub fn object(&self, subject: &str, predicate: &str) -> Option<&Term> {
        self.objects(subject, predicate).next()
    }

    /// Subjects of `(?, predicate, object)`.
    pub fn subjects(&self, predicate: &str, object: &Term) -> Vec<&str> {
        let p = Pattern::new(None, Some(predicate), Some(object.clone()));
        self.matches(p).map(|t| t.subject.as_str()).collect()
    }

    /// Instances of a class, in insertion order.
    pub fn instances(&self, class: &str) -> Vec<&str> {
        self.subjects("type", &Term::sym(class))
    }

    pub fn is_a(&self, subject: &str, class: &str) -> bool {
        self.contains(&Triple::new(subject, "type", Term::sym(class)))
    }

    fn check(&self) -> Result<()> {
        for t in &self.triples {
            self.check_prefix(&t.subject)?;
            self.check_prefix(&t.predicate)?;
            if let Some(o) = t.object.as_symbol() {
                self.check_prefix(o)?;
            }
        }
        for p in self.instances(FUNCTIONAL) {
            let mut seen: HashMap<&str, &Term> = HashMap::new();
            for t in self.matches(Pattern::new(None, Some(p), None)) {
                if let Some(prev) = seen.insert(&t.subject, &t.object) {
                    return Err(WizardError::Consistency(format!(
                        "`{} {p}` declared as both {prev} and {}",
                        t.subject, t.object
                    )));
                }
            }
        }
        for rule in &self.rules {
            rule.check()?;
        }
        for wf in self.workflows.values() {
            wf.check(self)?;
        }
        Ok(())
    }

    fn check_prefix(&self, name: &str) -> Result<()> {
        match name.split_once(':') {
            Some((prefix, _)) if !self.namespaces.iter().any(|n| n == prefix) => Err(
                WizardError::Consistency(format!("undeclared prefix `{prefix}` in `{name}`")),
            ),
            _ => Ok(()),
        }
    }
}

/// All triples matching `pattern`, with the variable positions bound.
pub fn query(kb: &KnowledgeBase, pattern: &Pattern) -> Vec<Binding> {
    kb.matches(pattern.clone())
        .map(|t| Binding {
            subject: pattern.subject.is_none().then(|| t.subject.clone()),
            predicate: pattern.predicate.is_none().then(|| t.predicate.clone()),
            object: pattern.object.is_none().then(|| t.object.clone()),
        })
        .collect()
}
