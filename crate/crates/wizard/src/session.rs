use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::{key_range, type_check, BeliefState};
use crate::workflow::{next_task, NextTask};
use crate::{derive, ground_concept, Grounding, KnowledgeBase, Lexicon, Result, Term, WizardError};

/// Text of the final wizard turn.
pub const DONE_TEXT: &str = "All steps are complete.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub key: String,
    pub concept: String,
    pub prompt: String,
}

/// Pipeline call requested from the host.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub kind: String,
    pub step: String,
    pub params: BTreeMap<String, Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub kind: String,
    pub ok: bool,
    /// Belief updates reported by the action, e.g. measured metrics.
    #[serde(default)]
    pub facts: BTreeMap<String, Term>,
}

impl ActionResult {
    pub fn ok(kind: impl Into<String>) -> Self {
        ActionResult {
            kind: kind.into(),
            ok: true,
            facts: BTreeMap::new(),
        }
    }

    pub fn failed(kind: impl Into<String>) -> Self {
        ActionResult {
            ok: false,
            ..ActionResult::ok(kind)
        }
    }

    pub fn with_fact(mut self, key: impl Into<String>, value: Term) -> Self {
        self.facts.insert(key.into(), value);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Pending {
    Question(Question),
    Action(ActionDescriptor),
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingUser,
    AwaitingAction,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Wizard,
    User,
    Action,
    Result,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.speaker {
            Speaker::Wizard => "wizard",
            Speaker::User => "user",
            Speaker::Action => "action",
            Speaker::Result => "result",
        };
        write!(f, "{tag}: {}", self.text)
    }
}

impl Turn {
    pub fn parse(line: &str) -> Result<Turn> {
        let (tag, text) = line
            .split_once(": ")
            .or_else(|| line.strip_suffix(':').map(|t| (t, "")))
            .ok_or_else(|| WizardError::Protocol(format!("transcript line without speaker: `{line}`")))?;
        let speaker = match tag {
            "wizard" => Speaker::Wizard,
            "user" => Speaker::User,
            "action" => Speaker::Action,
            "result" => Speaker::Result,
            _ => return Err(WizardError::Protocol(format!("unknown speaker `{tag}`"))),
        };
        Ok(Turn {
            speaker,
            text: text.to_owned(),
        })
    }
}

pub fn format_transcript(turns: &[Turn]) -> String {
    turns.iter().map(|t| format!("{t}\n")).collect()
}

pub fn parse_transcript(text: &str) -> Result<Vec<Turn>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(Turn::parse).collect()
}

fn format_params(kind: &str, params: &BTreeMap<String, Term>) -> String {
    std::iter::once(kind.to_owned())
        .chain(params.iter().map(|(k, v)| format!("{k}={v}")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn format_result(r: &ActionResult) -> String {
    let status = if r.ok { "ok" } else { "failed" };
    format_params(&format!("{} {status}", r.kind), &r.facts)
}

/// Inverse of the `result:` transcript text.
pub fn parse_result(text: &str) -> Result<ActionResult> {
    let bad = || WizardError::Protocol(format!("bad action result `{text}`"));
    let mut parts = text.split_whitespace();
    let kind = parts.next().ok_or_else(bad)?;
    let ok = match parts.next() {
        Some("ok") => true,
        Some("failed") => false,
        _ => return Err(bad()),
    };
    let mut facts = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(bad)?;
        facts.insert(k.to_owned(), Term::parse(v).map_err(|_| bad())?);
    }
    Ok(ActionResult {
        kind: kind.to_owned(),
        ok,
        facts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WizardSession {
    pub id: String,
    pub workflow: String,
    pub belief: BeliefState,
    /// Current workflow step; `None` once done.
    pub step: Option<String>,
    pub pending: Pending,
    pub transcript: Vec<Turn>,
}

impl WizardSession {
    pub fn status(&self) -> Status {
        match self.pending {
            Pending::Question(_) => Status::AwaitingUser,
            Pending::Action(_) => Status::AwaitingAction,
            Pending::Done => Status::Done,
        }
    }

    /// Action descriptors emitted so far, in order.
    pub fn actions(&self) -> Vec<&str> {
        self.transcript
            .iter()
            .filter(|t| t.speaker == Speaker::Action)
            .filter_map(|t| t.text.split(' ').next())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum Input {
    User(String),
    Result(ActionResult),
}

/// What the host should do next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Output {
    Prompt(Question),
    Action(ActionDescriptor),
    Done,
}

impl From<&Pending> for Output {
    fn from(p: &Pending) -> Output {
        match p {
            Pending::Question(q) => Output::Prompt(q.clone()),
            Pending::Action(a) => Output::Action(a.clone()),
            Pending::Done => Output::Done,
        }
    }
}

/// Knowledge base, lexicon and workflow a session runs against.
#[derive(Clone, Debug)]
pub struct Wizard {
    pub kb: KnowledgeBase,
    pub lexicon: Lexicon,
    pub workflow: String,
}

fn symbols<'a>(kb: &'a KnowledgeBase, subject: &str, predicate: &str) -> Vec<&'a str> {
    kb.objects(subject, predicate).filter_map(Term::as_symbol).collect()
}

impl Wizard {
    pub fn new(kb: KnowledgeBase, workflow: &str) -> Result<Wizard> {
        let wf = kb.workflow(workflow)?;
        for step in &wf.steps {
            for key in symbols(&kb, step, "needs") {
                key_range(&kb, key)?;
                if kb.object(key, "prompt").and_then(Term::as_str).is_none() {
                    return Err(WizardError::Consistency(format!("belief key `{key}` has no prompt")));
                }
            }
            for pred in ["resets", "result_key", "decrements"] {
                for key in symbols(&kb, step, pred) {
                    key_range(&kb, key)?;
                }
            }
        }
        let lexicon = Lexicon::from_kb(&kb)?;
        Ok(Wizard {
            kb,
            lexicon,
            workflow: workflow.to_owned(),
        })
    }

    pub fn start(&self, id: impl Into<String>) -> Result<(WizardSession, Output)> {
        let wf = self.kb.workflow(&self.workflow)?;
        let mut s = WizardSession {
            id: id.into(),
            workflow: self.workflow.clone(),
            belief: BeliefState::new(),
            step: None,
            pending: Pending::Done,
            transcript: Vec::new(),
        };
        self.enter(&mut s, &wf.start)?;
        let out = Output::from(&s.pending);
        Ok((s, out))
    }

    fn say(s: &mut WizardSession, speaker: Speaker, text: String) {
        s.transcript.push(Turn { speaker, text });
    }

    fn enter(&self, s: &mut WizardSession, step: &str) -> Result<()> {
        let mut step = step.to_owned();
        // Each hop either stops for input or moves on; a cycle that never
        // asks or acts is a workflow authoring error.
        let limit = 4 * self.kb.workflow(&self.workflow)?.steps.len() + 4;
        for _ in 0..limit {
            for key in symbols(&self.kb, &step, "resets") {
                s.belief.remove(key);
            }
            s.step = Some(step.clone());
            if let Some(kind) = symbols(&self.kb, &step, "action").first() {
                let desc = ActionDescriptor {
                    kind: (*kind).to_owned(),
                    step: step.clone(),
                    params: self.action_params(&s.belief)?,
                };
                Self::say(s, Speaker::Action, format_params(&desc.kind, &desc.params));
                s.pending = Pending::Action(desc);
                return Ok(());
            }
            match self.ask_or_next(s, &step)? {
                Some(next) => step = next,
                None => return Ok(()),
            }
        }
        Err(WizardError::Protocol(format!(
            "workflow `{}` cycles without input from `{step}`",
            self.workflow
        )))
    }

    /// Asks for the first missing need of `step`; otherwise returns the
    /// successor step, or finishes the session.
    fn ask_or_next(&self, s: &mut WizardSession, step: &str) -> Result<Option<String>> {
        self.derive_tool(&mut s.belief)?;
        for key in symbols(&self.kb, step, "needs") {
            if s.belief.contains_key(key) {
                continue;
            }
            let concept = self
                .kb
                .object(key, "range")
                .and_then(Term::as_symbol)
                .expect("checked when the wizard was built");
            let prompt = self.kb.object(key, "prompt").and_then(Term::as_str).expect("checked");
            let q = Question {
                key: key.to_owned(),
                concept: concept.to_owned(),
                prompt: prompt.to_owned(),
            };
            Self::say(s, Speaker::Wizard, q.prompt.clone());
            s.pending = Pending::Question(q);
            return Ok(None);
        }
        match next_task(&self.kb, &self.workflow, step, &s.belief)? {
            NextTask::Step(next) => Ok(Some(next)),
            NextTask::Done => {
                s.step = None;
                s.pending = Pending::Done;
                Self::say(s, Speaker::Wizard, DONE_TEXT.to_owned());
                Ok(None)
            }
        }
    }

    /// Fills `tool` with the first tool usable for the task that is also
    /// compatible with the material, once both are known.
    fn derive_tool(&self, belief: &mut BeliefState) -> Result<()> {
        if belief.contains_key("tool") || !self.kb.is_a("tool", crate::belief::BELIEF_KEY) {
            return Ok(());
        }
        let (Some(task), Some(material)) = (belief.get("task"), belief.get("material")) else {
            return Ok(());
        };
        let has_rule = |r: &str| self.kb.rules().iter().any(|x| x.name == r);
        if !has_rule("has_tool") || !has_rule("compatible_material") {
            return Ok(());
        }
        let compatible = derive(&self.kb, "compatible_material", &[None, Some(material.clone())])?;
        let tool = derive(&self.kb, "has_tool", &[Some(task.clone()), None])?
            .into_iter()
            .map(|row| row[1].clone())
            .find(|t| compatible.iter().any(|row| &row[0] == t));
        if let Some(t) = tool {
            belief.insert("tool".to_owned(), t);
        }
        Ok(())
    }

    /// User-supplied belief, the derived tool and KB default process
    /// parameters for the task and material.
    fn action_params(&self, belief: &BeliefState) -> Result<BTreeMap<String, Term>> {
        let wf = self.kb.workflow(&self.workflow)?;
        let mut params = BTreeMap::new();
        for step in &wf.steps {
            for key in symbols(&self.kb, step, "needs") {
                if let Some(v) = belief.get(key) {
                    params.insert(key.to_owned(), v.clone());
                }
            }
        }
        if let Some(t) = belief.get("tool") {
            params.insert("tool".to_owned(), t.clone());
        }
        if let (Some(task), Some(material)) = (belief.get("task"), belief.get("material")) {
            if self.kb.rules().iter().any(|r| r.name == "default_param") {
                for row in derive(&self.kb, "default_param", &[Some(task.clone()), Some(material.clone()), None, None])? {
                    if let Some(k) = row[2].as_symbol() {
                        params.entry(k.to_owned()).or_insert_with(|| row[3].clone());
                    }
                }
            }
        }
        Ok(params)
    }

    pub fn step(&self, session: &WizardSession, input: Input) -> Result<(WizardSession, Output)> {
        if session.workflow != self.workflow {
            return Err(WizardError::Protocol(format!(
                "session runs workflow `{}`, not `{}`",
                session.workflow, self.workflow
            )));
        }
        let mut s = session.clone();
        let step = s.step.clone();
        match (&session.pending, input) {
            (Pending::Done, _) => return Err(WizardError::Protocol("session is done".into())),
            (Pending::Question(_), Input::Result(r)) => {
                return Err(WizardError::Protocol(format!(
                    "got a `{}` result while awaiting the user",
                    r.kind
                )))
            }
            (Pending::Action(a), Input::User(_)) => {
                return Err(WizardError::Protocol(format!(
                    "got user input while awaiting the `{}` action",
                    a.kind
                )))
            }
            (Pending::Question(q), Input::User(text)) => {
                Self::say(&mut s, Speaker::User, text.clone());
                let value = match ground_concept(&text, &q.concept, &self.lexicon, &self.kb)? {
                    Grounding::Match { value, .. } if type_check(&self.kb, &q.key, &value).is_ok() => Some(value),
                    _ => None,
                };
                let Some(value) = value else {
                    // Discard the answer and repeat the question.
                    Self::say(&mut s, Speaker::Wizard, q.prompt.clone());
                    let out = Output::from(&s.pending);
                    return Ok((s, out));
                };
                s.belief.insert(q.key.clone(), value);
            }
            (Pending::Action(a), Input::Result(r)) => {
                if r.kind != a.kind {
                    return Err(WizardError::Protocol(format!(
                        "expected a `{}` result, got `{}`",
                        a.kind, r.kind
                    )));
                }
                for (k, v) in &r.facts {
                    type_check(&self.kb, k, v)?;
                }
                Self::say(&mut s, Speaker::Result, format_result(&r));
                s.belief.extend(r.facts.clone());
                for key in symbols(&self.kb, &a.step, "result_key") {
                    s.belief.insert(key.to_owned(), Term::bool(r.ok));
                }
                if r.ok {
                    for key in symbols(&self.kb, &a.step, "decrements") {
                        if let Some(n) = s.belief.get(key).and_then(Term::as_f64) {
                            s.belief.insert(key.to_owned(), Term::num((n - 1.0).max(0.0)));
                        }
                    }
                }
            }
        }
        let step = step.expect("pending input implies a current step");
        if let Some(next) = self.ask_or_next(&mut s, &step)? {
            self.enter(&mut s, &next)?;
        }
        let out = Output::from(&s.pending);
        Ok((s, out))
    }
}

/// One dialog turn; see [`Wizard::step`].
pub fn wizard_step(wizard: &Wizard, session: &WizardSession, input: Input) -> Result<(WizardSession, Output)> {
    wizard.step(session, input)
}

/// Inputs recorded in a transcript: user turns and action results.
pub fn transcript_inputs(turns: &[Turn]) -> Result<Vec<Input>> {
    turns
        .iter()
        .filter_map(|t| match t.speaker {
            Speaker::User => Some(Ok(Input::User(t.text.clone()))),
            Speaker::Result => Some(parse_result(&t.text).map(Input::Result)),
            _ => None,
        })
        .collect()
}

/// Replays the inputs of `turns` against a fresh session.
pub fn replay(wizard: &Wizard, id: &str, turns: &[Turn]) -> Result<WizardSession> {
    let (mut s, _) = wizard.start(id)?;
    for input in transcript_inputs(turns)? {
        s = wizard.step(&s, input)?.0;
    }
    Ok(s)
}
