//! Line-oriented KB text format.
//!
//! ```text
//! # comment
//! @prefix soma
//! Sanding type Task
//! Fiberglass label "fiberglass"
//! FiberglassSanding rotational_speed 6000~rpm
//! @rule has_tool: has_tool(?task, ?tool) :- requires(?task, ?c), capable_of(?tool, ?c).
//! @workflow Treatment
//! start Scan
//! steps Scan, Plan
//! Scan -> Plan
//! Plan -> Done [approval = true]
//! Plan -> Scan [approval = false]
//! @end
//! ```

use crate::kb::Triple;
use crate::rules::{Arg, Atom, Rule};
use crate::term::is_identifier;
use crate::workflow::{Condition, Edge, Op, WorkflowDef};
use crate::{KnowledgeBase, Result, Term, WizardError};

fn err(line: usize, message: impl Into<String>) -> WizardError {
    WizardError::Parse {
        line,
        message: message.into(),
    }
}

/// Drops a `#` comment that is not inside a string.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Whitespace split that keeps quoted strings whole.
fn tokenize(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut escaped = false;
    for c in line.chars() {
        if quoted {
            cur.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                quoted = false;
            }
        } else if c.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            if c == '"' {
                quoted = true;
            }
            cur.push(c);
        }
    }
    if quoted {
        return Err("unterminated string".into());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn symbol(line: usize, s: &str, what: &str) -> Result<String> {
    if is_identifier(s) && s != "true" && s != "false" {
        Ok(s.to_owned())
    } else {
        Err(err(line, format!("{what} must be a symbol, got `{s}`")))
    }
}

pub(crate) fn parse_kb(text: &str) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::default();
    let mut workflow: Option<(usize, WorkflowDef)> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some((_, wf)) = workflow.as_mut() {
            if line == "@end" {
                let (_, wf) = workflow.take().expect("inside a workflow block");
                if kb.workflows.contains_key(&wf.id) {
                    return Err(WizardError::Consistency(format!("workflow `{}` declared twice", wf.id)));
                }
                kb.workflows.insert(wf.id.clone(), wf);
            } else {
                workflow_line(n, line, wf)?;
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("@prefix") {
            let name = symbol(n, rest.trim(), "prefix")?;
            if name.contains(':') {
                return Err(err(n, "prefix names cannot contain `:`"));
            }
            if !kb.namespaces.contains(&name) {
                kb.namespaces.push(name);
            }
        } else if let Some(rest) = line.strip_prefix("@rule") {
            kb.rules.push(rule(n, rest.trim())?);
        } else if let Some(rest) = line.strip_prefix("@workflow") {
            let id = symbol(n, rest.trim(), "workflow id")?;
            workflow = Some((
                n,
                WorkflowDef {
                    id,
                    start: String::new(),
                    steps: Vec::new(),
                    edges: Vec::new(),
                },
            ));
        } else if line.starts_with('@') {
            return Err(err(n, format!("unknown directive `{line}`")));
        } else {
            let tokens = tokenize(line).map_err(|m| err(n, m))?;
            let [s, p, o] = tokens.as_slice() else {
                return Err(err(n, format!("expected `subject predicate object`, got {} tokens", tokens.len())));
            };
            let subject = symbol(n, s, "subject")?;
            let predicate = symbol(n, p, "predicate")?;
            let object = Term::parse(o).map_err(|m| err(n, m))?;
            kb.insert(Triple::new(subject, predicate, object));
        }
    }
    if let Some((start, wf)) = workflow {
        return Err(err(start, format!("workflow `{}` lacks @end", wf.id)));
    }
    Ok(kb)
}

fn workflow_line(n: usize, line: &str, wf: &mut WorkflowDef) -> Result<()> {
    if let Some(rest) = line.strip_prefix("start ") {
        if !wf.start.is_empty() {
            return Err(err(n, "start declared twice"));
        }
        wf.start = symbol(n, rest.trim(), "start step")?;
    } else if let Some(rest) = line.strip_prefix("steps ") {
        for s in rest.split(',') {
            wf.steps.push(symbol(n, s.trim(), "step")?);
        }
    } else if let Some((from, rest)) = line.split_once("->") {
        let (to, guard) = match rest.split_once('[') {
            Some((to, g)) => {
                let g = g
                    .trim_end()
                    .strip_suffix(']')
                    .ok_or_else(|| err(n, "guard lacks `]`"))?;
                (to, guard(n, g)?)
            }
            None => (rest, Vec::new()),
        };
        wf.edges.push(Edge {
            from: symbol(n, from.trim(), "step")?,
            to: symbol(n, to.trim(), "step")?,
            guard,
        });
    } else {
        return Err(err(n, format!("unexpected line in workflow block: `{line}`")));
    }
    Ok(())
}

fn guard(n: usize, text: &str) -> Result<Vec<Condition>> {
    text.split(',')
        .map(|atom| {
            let atom = atom.trim();
            // Two-character operators first so `!=` is not read as `=`.
            let ops = [("!=", Op::Ne), ("≠", Op::Ne), ("=", Op::Eq), ("<", Op::Lt), (">", Op::Gt)];
            let (key, op, value) = ops
                .iter()
                .find_map(|(tok, op)| atom.split_once(tok).map(|(k, v)| (k, *op, v)))
                .ok_or_else(|| err(n, format!("guard atom `{atom}` lacks an operator")))?;
            Ok(Condition {
                key: symbol(n, key.trim(), "guard key")?,
                op,
                value: Term::parse(value).map_err(|m| err(n, m))?,
            })
        })
        .collect()
}

fn atom(n: usize, text: &str) -> Result<Atom> {
    let text = text.trim();
    let (pred, rest) = text
        .split_once('(')
        .ok_or_else(|| err(n, format!("atom `{text}` lacks `(`")))?;
    let inner = rest
        .strip_suffix(')')
        .ok_or_else(|| err(n, format!("atom `{text}` lacks `)`")))?;
    let args = inner
        .split(',')
        .map(|a| {
            let a = a.trim();
            match a.strip_prefix('?') {
                Some(v) if is_identifier(v) => Ok(Arg::Var(v.to_owned())),
                Some(_) => Err(err(n, format!("bad variable `{a}`"))),
                None => Term::parse(a).map(Arg::Const).map_err(|m| err(n, m)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Atom {
        predicate: symbol(n, pred.trim(), "predicate")?,
        args,
    })
}

/// Splits at top-level commas, outside parentheses.
fn split_atoms(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

/// `name: head(...) :- body(...), body(...).`
fn rule(n: usize, text: &str) -> Result<Rule> {
    let (name, clause) = text
        .split_once(':')
        .filter(|(_, c)| !c.starts_with('-'))
        .ok_or_else(|| err(n, "rule lacks `name:`"))?;
    let clause = clause
        .trim()
        .strip_suffix('.')
        .ok_or_else(|| err(n, "rule must end with `.`"))?;
    let (head, body) = clause
        .split_once(":-")
        .ok_or_else(|| err(n, "rule lacks `:-`"))?;
    Ok(Rule {
        name: symbol(n, name.trim(), "rule name")?,
        head: atom(n, head)?,
        body: split_atoms(body).into_iter().map(|a| atom(n, a)).collect::<Result<_>>()?,
    })
}
