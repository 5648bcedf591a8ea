use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::{KnowledgeBase, Result, Term, WizardError};

/// Body atom over all stored triples, with the predicate as an argument.
pub const TRIPLE_ATOM: &str = "triple";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Var(String),
    Const(Term),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(v) => write!(f, "?{v}"),
            Arg::Const(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Arg>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// One Horn clause. Several clauses may share a name; their heads then
/// define the same derived predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub(crate) fn check(&self) -> Result<()> {
        let bad = |m: String| Err(WizardError::Consistency(format!("rule `{}`: {m}", self.name)));
        if self.head.predicate != self.name {
            return bad(format!("head predicate `{}` differs from the rule name", self.head.predicate));
        }
        if self.head.predicate == TRIPLE_ATOM {
            return bad(format!("`{TRIPLE_ATOM}` is reserved"));
        }
        if self.body.is_empty() {
            return bad("empty body".into());
        }
        for atom in &self.body {
            if atom.predicate == TRIPLE_ATOM && atom.args.len() != 3 {
                return bad(format!("`{TRIPLE_ATOM}` takes three arguments"));
            }
        }
        let bound: HashSet<&str> = self
            .body
            .iter()
            .flat_map(|a| &a.args)
            .filter_map(|a| match a {
                Arg::Var(v) => Some(v.as_str()),
                Arg::Const(_) => None,
            })
            .collect();
        for a in &self.head.args {
            if let Arg::Var(v) = a {
                if !bound.contains(v.as_str()) {
                    return bad(format!("head variable ?{v} does not occur in the body"));
                }
            }
        }
        Ok(())
    }
}

type Tuple = Vec<Term>;

/// Derived relations, keyed by predicate, in derivation order.
#[derive(Default)]
struct Facts {
    rows: HashMap<String, Vec<Tuple>>,
    seen: HashSet<(String, Tuple)>,
}

impl Facts {
    fn add(&mut self, pred: &str, row: Tuple) -> bool {
        if !self.seen.insert((pred.to_owned(), row.clone())) {
            return false;
        }
        self.rows.entry(pred.to_owned()).or_default().push(row);
        true
    }

    fn get(&self, pred: &str) -> &[Tuple] {
        self.rows.get(pred).map(Vec::as_slice).unwrap_or(&[])
    }
}

type Env = HashMap<String, Term>;

fn unify(args: &[Arg], row: &[Term], env: &Env) -> Option<Env> {
    if args.len() != row.len() {
        return None;
    }
    let mut out = env.clone();
    for (a, v) in args.iter().zip(row) {
        match a {
            Arg::Const(c) if c != v => return None,
            Arg::Const(_) => {}
            Arg::Var(name) => match out.get(name) {
                Some(bound) if bound != v => return None,
                Some(_) => {}
                None => {
                    out.insert(name.clone(), v.clone());
                }
            },
        }
    }
    Some(out)
}

fn solve(kb: &KnowledgeBase, facts: &Facts, body: &[Atom], env: Env, out: &mut Vec<Env>) {
    let Some((atom, rest)) = body.split_first() else {
        out.push(env);
        return;
    };
    if atom.predicate == TRIPLE_ATOM {
        for t in kb.triples() {
            let row = [Term::sym(&t.subject), Term::sym(&t.predicate), t.object.clone()];
            if let Some(e) = unify(&atom.args, &row, &env) {
                solve(kb, facts, rest, e, out);
            }
        }
    } else {
        for row in facts.get(&atom.predicate) {
            if let Some(e) = unify(&atom.args, row, &env) {
                solve(kb, facts, rest, e, out);
            }
        }
    }
}

/// Naive forward chaining to the fixpoint. Stored triples seed the binary
/// relations, so a derived predicate also includes its explicit edges.
fn closure(kb: &KnowledgeBase) -> Facts {
    let mut facts = Facts::default();
    for t in kb.triples() {
        facts.add(&t.predicate, vec![Term::sym(&t.subject), t.object.clone()]);
    }
    loop {
        let mut changed = false;
        for rule in kb.rules() {
            let mut envs = Vec::new();
            solve(kb, &facts, &rule.body, Env::new(), &mut envs);
            for env in envs {
                let row = rule
                    .head
                    .args
                    .iter()
                    .map(|a| match a {
                        Arg::Const(c) => c.clone(),
                        Arg::Var(v) => env[v].clone(),
                    })
                    .collect();
                changed |= facts.add(&rule.name, row);
            }
        }
        if !changed {
            return facts;
        }
    }
}

/// Tuples of the derived relation `rule` matching `args` (`None` is a free
/// position), in derivation order.
pub fn derive(kb: &KnowledgeBase, rule: &str, args: &[Option<Term>]) -> Result<Vec<Vec<Term>>> {
    let clause = kb
        .rules()
        .iter()
        .find(|r| r.name == rule)
        .ok_or_else(|| WizardError::UnknownRule(rule.to_owned()))?;
    if clause.head.args.len() != args.len() {
        return Err(WizardError::Arity {
            rule: rule.to_owned(),
            expected: clause.head.args.len(),
            got: args.len(),
        });
    }
    let facts = closure(kb);
    Ok(facts
        .get(rule)
        .iter()
        .filter(|row| args.iter().zip(row.iter()).all(|(a, v)| a.as_ref().is_none_or(|a| a == v)))
        .cloned()
        .collect())
}
