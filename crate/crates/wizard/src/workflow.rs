use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::{key_range, BeliefState, Range, BELIEF_KEY};
use crate::{KnowledgeBase, Result, Term, WizardError};

/// Edge target that ends the workflow.
pub const DONE: &str = "Done";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Gt => ">",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub key: String,
    pub op: Op,
    pub value: Term,
}

impl Condition {
    /// Conditions on absent keys are false.
    pub fn holds(&self, belief: &BeliefState) -> bool {
        let Some(v) = belief.get(&self.key) else {
            return false;
        };
        match self.op {
            Op::Eq => v == &self.value,
            Op::Ne => v != &self.value,
            Op::Lt | Op::Gt => {
                let same_kind = match (v, &self.value) {
                    (Term::Number { .. }, Term::Number { .. }) => true,
                    (Term::Quantity { unit: a, .. }, Term::Quantity { unit: b, .. }) => a == b,
                    _ => false,
                };
                let (Some(a), Some(b)) = (v.as_f64(), self.value.as_f64()) else {
                    return false;
                };
                same_kind && if self.op == Op::Lt { a < b } else { a > b }
            }
        }
    }
}

/// Conjunction of conditions; empty means always true.
pub type Guard = Vec<Condition>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub guard: Guard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDef {
    pub id: String,
    pub start: String,
    pub steps: Vec<String>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "step", rename_all = "kebab-case")]
pub enum NextTask {
    Step(String),
    Done,
}

impl WorkflowDef {
    pub fn outgoing<'a>(&'a self, step: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == step)
    }

    pub fn has_step(&self, step: &str) -> bool {
        self.steps.iter().any(|s| s == step)
    }

    pub(crate) fn check(&self, kb: &KnowledgeBase) -> Result<()> {
        let bad = |m: String| Err(WizardError::Consistency(format!("workflow `{}`: {m}", self.id)));
        let mut seen = HashSet::new();
        for s in &self.steps {
            if s == DONE {
                return bad(format!("`{DONE}` is reserved"));
            }
            if !seen.insert(s) {
                return bad(format!("step `{s}` declared twice"));
            }
        }
        if !self.has_step(&self.start) {
            return bad(format!("start `{}` is not a declared step", self.start));
        }
        for e in &self.edges {
            if !self.has_step(&e.from) || !(e.to == DONE || self.has_step(&e.to)) {
                return bad(format!("edge {} -> {} uses an undeclared step", e.from, e.to));
            }
            for c in &e.guard {
                if !kb.is_a(&c.key, BELIEF_KEY) {
                    return bad(format!("guard key `{}` is not a declared belief key", c.key));
                }
            }
        }
        if !self.edges.iter().any(|e| e.to == DONE) {
            return bad(format!("no edge reaches `{DONE}`"));
        }
        for s in &self.steps {
            if self.outgoing(s).next().is_none() {
                return bad(format!("step `{s}` has no outgoing edge"));
            }
        }
        let reachable = self.reachable();
        if let Some(s) = self.steps.iter().find(|s| !reachable.contains(s.as_str())) {
            return bad(format!("step `{s}` is unreachable from `{}`", self.start));
        }
        Ok(())
    }

    /// Steps reachable from the start, ignoring guards.
    pub fn reachable(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([self.start.as_str()]);
        while let Some(s) = queue.pop_front() {
            if s == DONE || !out.insert(s) {
                continue;
            }
            queue.extend(self.outgoing(s).map(|e| e.to.as_str()));
        }
        out
    }
}

/// Successor of `step` under `belief`. Exactly one outgoing guard must hold.
pub fn next_task(kb: &KnowledgeBase, workflow: &str, step: &str, belief: &BeliefState) -> Result<NextTask> {
    let wf = kb.workflow(workflow)?;
    if !wf.has_step(step) {
        return Err(WizardError::UnknownStep {
            workflow: workflow.to_owned(),
            step: step.to_owned(),
        });
    }
    let targets: Vec<&str> = wf
        .outgoing(step)
        .filter(|e| e.guard.iter().all(|c| c.holds(belief)))
        .map(|e| e.to.as_str())
        .collect();
    match targets.as_slice() {
        [] => Err(WizardError::NoSuccessor { step: step.to_owned() }),
        [t] if *t == DONE => Ok(NextTask::Done),
        [t] => Ok(NextTask::Step((*t).to_owned())),
        _ => Err(WizardError::AmbiguousSuccessor {
            step: step.to_owned(),
            targets: targets.iter().map(|t| (*t).to_owned()).collect(),
        }),
    }
}

/// Values a guard key is enumerated over: the whole domain for booleans and
/// classes, each guard literal and its neighbors for numbers.
fn key_domain(kb: &KnowledgeBase, key: &str, literals: &[&Term]) -> Result<Vec<Term>> {
    let mut out: Vec<Term> = Vec::new();
    let mut push = |t: Term| {
        if !out.contains(&t) {
            out.push(t);
        }
    };
    match key_range(kb, key)? {
        Range::Boolean => {
            push(Term::bool(false));
            push(Term::bool(true));
        }
        Range::Class(c) => kb.instances(&c).into_iter().for_each(|i| push(Term::sym(i))),
        Range::Count => {
            push(Term::num(0.0));
            for l in literals.iter().filter_map(|l| l.as_f64()) {
                for v in [l.floor() - 1.0, l.floor(), l.floor() + 1.0, l.ceil() + 1.0] {
                    if v >= 0.0 {
                        push(Term::num(v));
                    }
                }
            }
        }
        Range::Dimension { si_unit, .. } => {
            push(Term::quantity(0.0, si_unit.clone()));
            for l in literals.iter().filter_map(|l| l.as_f64()) {
                let d = l.abs().max(1.0) * 0.5;
                for v in [l - d, l, l + d] {
                    push(Term::quantity(v, si_unit.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Model check: for every reachable step and every combination of the
/// values its guard keys can take, `next_task` resolves to exactly one
/// successor. Returns the number of combinations checked.
pub fn check_totality(kb: &KnowledgeBase, workflow: &str) -> Result<usize> {
    let wf = kb.workflow(workflow)?;
    let mut checked = 0;
    for step in wf.reachable() {
        let mut literals: BTreeMap<&str, Vec<&Term>> = BTreeMap::new();
        for e in wf.outgoing(step) {
            for c in &e.guard {
                literals.entry(&c.key).or_default().push(&c.value);
            }
        }
        let keys: Vec<&str> = literals.keys().copied().collect();
        let domains = keys
            .iter()
            .map(|k| key_domain(kb, k, &literals[k]))
            .collect::<Result<Vec<_>>>()?;
        let mut idx = vec![0usize; keys.len()];
        loop {
            let belief: BeliefState = keys
                .iter()
                .zip(&idx)
                .zip(&domains)
                .map(|((k, &i), d)| ((*k).to_owned(), d[i].clone()))
                .collect();
            next_task(kb, workflow, step, &belief)?;
            checked += 1;
            // Odometer increment over the product of domains.
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < domains[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    Ok(checked)
}
