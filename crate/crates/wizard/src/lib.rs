//! Knowledge base, reasoner, workflow routing and the grounding dialog that
//! steers a surface treatment run.

mod belief;
mod error;
mod ground;
mod kb;
mod parse;
mod rules;
mod session;
mod term;
mod workflow;

pub use belief::{concept_range, key_range, range_accepts, type_check, BeliefState, Range, BELIEF_KEY};
pub use error::{Result, WizardError};
pub use ground::{
    ground_concept, normalize, parse_quantity, Grounding, Lexicon, Quantity, Stage, Unit, FUZZY_THRESHOLD,
};
pub use kb::{kb_load, query, Binding, KnowledgeBase, Pattern, Triple};
pub use rules::{derive, Arg, Atom, Rule, TRIPLE_ATOM};
pub use session::{
    format_transcript, parse_result, parse_transcript, replay, transcript_inputs, wizard_step, ActionDescriptor,
    ActionResult, Input, Output, Pending, Question, Speaker, Status, Turn, Wizard, WizardSession, DONE_TEXT,
};
pub use term::Term;
pub use workflow::{check_totality, next_task, Condition, Edge, Guard, NextTask, Op, WorkflowDef, DONE};

/// Text of the shipped knowledge base.
pub const DEFAULT_KB: &str = include_str!("../kb/default.kb");

/// Workflow of the shipped knowledge base.
pub const DEFAULT_WORKFLOW: &str = "SurfaceTreatment";

/// Scripted dialog that drives the shipped workflow to completion.
pub const GOLDEN_TRANSCRIPT: &str = include_str!("../kb/golden.transcript");

pub fn default_kb() -> KnowledgeBase {
    KnowledgeBase::parse(DEFAULT_KB).expect("shipped knowledge base parses")
}

impl Wizard {
    /// Wizard over the shipped knowledge base and workflow.
    pub fn shipped() -> Wizard {
        Wizard::new(default_kb(), DEFAULT_WORKFLOW).expect("shipped workflow is consistent")
    }
}
