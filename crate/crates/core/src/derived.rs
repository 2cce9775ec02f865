//! Primitives derived from Prefix Consensus: graded consensus from a
//! length-1 Consistent PC instance and back, binary consensus and validated
//! consensus on top of Strong PC.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::crypto::{Keyring, PartyId};
use crate::pc::{OutputKind, PcAction, PcEngine, PcMsg};
use crate::prefix::{PrefixVector, Value};
use crate::sim::{Action, Node, Report, Time};
use crate::spc::{SpcConfig, SpcEngine, SpcMsg};
use crate::wire::{Decode, DecodeError, DecodeErrorKind, Encode, Reader, Sink};

/// Graded consensus output; `value` is `None` iff `grade` is 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GradedOutput {
    pub value: Option<Value>,
    pub grade: u8,
}

/// Precondition violations of the graded mappings.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradedError {
    #[error("graded mapping needs vectors of length at most 1, got low {low} and high {high}")]
    TooLong { low: usize, high: usize },
    #[error("low is not a prefix of high")]
    NotPrefix,
}

/// Maps a length-1 Consistent PC output pair to a graded output.
pub fn graded_from_pc(low: &PrefixVector, high: &PrefixVector) -> Result<GradedOutput, GradedError> {
    if low.len() > 1 || high.len() > 1 {
        return Err(GradedError::TooLong { low: low.len(), high: high.len() });
    }
    if !low.is_prefix_of(high) {
        return Err(GradedError::NotPrefix);
    }
    Ok(match (low.0.first(), high.0.first()) {
        (_, None) => GradedOutput { value: None, grade: 0 },
        (None, Some(x)) => GradedOutput { value: Some(x.clone()), grade: 1 },
        (Some(_), Some(x)) => GradedOutput { value: Some(x.clone()), grade: 2 },
    })
}

/// Combines `L` graded outputs (one per index) into a low/high pair: low is
/// the longest prefix graded 2 throughout, high the longest graded at least 1.
pub fn pc_from_graded(grades: &[GradedOutput]) -> (PrefixVector, PrefixVector) {
    let take = |min: u8| {
        PrefixVector(grades.iter().map_while(|g| (g.grade >= min).then(|| g.value.clone()).flatten()).collect())
    };
    (take(2), take(1))
}

/// Runs a length-1 PC instance and reports its graded output.
pub struct GradedNode {
    engine: PcEngine,
    input: Option<Value>,
    low: Option<PrefixVector>,
    high: Option<PrefixVector>,
}

impl GradedNode {
    /// `engine` must have capacity 1.
    pub fn new(engine: PcEngine, input: Option<Value>) -> Self {
        GradedNode { engine, input, low: None, high: None }
    }

    fn map(&mut self, acts: Vec<PcAction>) -> Vec<Action<PcMsg>> {
        let mut out = Vec::new();
        for a in acts {
            match a {
                PcAction::Broadcast(m) => out.push(Action::Broadcast(m)),
                PcAction::Fault(e) => out.push(Action::Report(Report::Fault(e))),
                PcAction::Output(o) => {
                    match o.kind {
                        OutputKind::Low => self.low = Some(o.value.clone()),
                        OutputKind::High => self.high = Some(o.value.clone()),
                        OutputKind::Opt => {}
                    }
                    let done = o.kind != OutputKind::Opt && self.low.is_some() && self.high.is_some();
                    out.push(Action::Report(Report::Pc(o)));
                    if done {
                        let g = graded_from_pc(self.low.as_ref().expect("set"), self.high.as_ref().expect("set"));
                        out.push(Action::Report(match g {
                            Ok(g) => Report::Graded(g),
                            Err(e) => Report::Fault(e.to_string()),
                        }));
                    }
                }
            }
        }
        out
    }
}

impl Node for GradedNode {
    type Msg = PcMsg;

    fn start(&mut self) -> Vec<Action<PcMsg>> {
        match self.input.take() {
            Some(v) => {
                let acts = self.engine.input(PrefixVector(vec![v])).expect("capacity 1");
                self.map(acts)
            }
            None => Vec::new(),
        }
    }

    fn on_message(&mut self, from: PartyId, msg: PcMsg) -> Vec<Action<PcMsg>> {
        let acts = self.engine.on_message(from, msg);
        self.map(acts)
    }

    fn on_timer(&mut self, _id: u64) -> Vec<Action<PcMsg>> {
        Vec::new()
    }
}

/// Binary consensus: Strong PC on a length-1 vector holding the bit; an
/// empty high decides 0.
pub struct BinaryNode {
    engine: SpcEngine,
    bit: bool,
}

/// Element value of a bit.
pub fn bit_value(b: bool) -> Value {
    Value::new(if b { b"1" } else { b"0" })
}

impl BinaryNode {
    /// `cfg.l` must be 1.
    pub fn new(cfg: SpcConfig, keys: Keyring, bit: bool) -> Self {
        BinaryNode { engine: SpcEngine::new(cfg, keys), bit }
    }

    fn map(acts: Vec<Action<SpcMsg>>) -> Vec<Action<SpcMsg>> {
        let mut out = Vec::with_capacity(acts.len());
        for a in acts {
            if let Action::Report(Report::Spc { kind: OutputKind::High, value, .. }) = &a {
                let bit = value.0.first().cloned().unwrap_or_else(|| bit_value(false));
                out.push(a.clone());
                out.push(Action::Report(Report::Decide(Some(bit))));
            } else {
                out.push(a);
            }
        }
        out
    }
}

impl Node for BinaryNode {
    type Msg = SpcMsg;

    fn start(&mut self) -> Vec<Action<SpcMsg>> {
        Self::map(self.engine.input(PrefixVector(vec![bit_value(self.bit)])).expect("capacity 1"))
    }

    fn on_message(&mut self, from: PartyId, msg: SpcMsg) -> Vec<Action<SpcMsg>> {
        Self::map(self.engine.on_message(from, msg))
    }

    fn on_timer(&mut self, id: u64) -> Vec<Action<SpcMsg>> {
        Self::map(self.engine.on_timer(id))
    }
}

/// Validated consensus messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidatedMsg {
    Input(Arc<[u8]>),
    Spc(SpcMsg),
}

impl ValidatedMsg {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ValidatedMsg::Input(_) => "input",
            ValidatedMsg::Spc(m) => m.kind_name(),
        }
    }
}

const INPUT_TIMER: u64 = 0;

/// Validated consensus: inputs are disseminated, Strong PC runs on the
/// vector of collected inputs (⊥ where missing, by party index, trailing ⊥
/// dropped) once all arrived or after 2Δ, and the first entry of the decided
/// high that passes the validity predicate is decided. No such entry leaves the party
/// undecided.
pub struct ValidatedNode {
    engine: SpcEngine,
    input: Arc<[u8]>,
    valid: fn(&[u8]) -> bool,
    got: Vec<Option<Arc<[u8]>>>,
    ran: bool,
    timeout: Time,
    seen: BTreeSet<PartyId>,
}

impl ValidatedNode {
    /// `cfg.l` must be `n`.
    pub fn new(cfg: SpcConfig, keys: Keyring, input: Vec<u8>, valid: fn(&[u8]) -> bool) -> Self {
        let n = cfg.n;
        let timeout = cfg.timeout;
        ValidatedNode {
            engine: SpcEngine::new(cfg, keys),
            input: input.into(),
            valid,
            got: vec![None; n],
            ran: false,
            timeout,
            seen: BTreeSet::new(),
        }
    }

    fn map(&self, acts: Vec<Action<SpcMsg>>) -> Vec<Action<ValidatedMsg>> {
        let mut out = Vec::with_capacity(acts.len());
        for a in acts {
            match a {
                Action::Broadcast(m) => out.push(Action::Broadcast(ValidatedMsg::Spc(m))),
                Action::Send(to, m) => out.push(Action::Send(to, ValidatedMsg::Spc(m))),
                Action::Timer { id, after } => out.push(Action::Timer { id: id + 1, after }),
                Action::Report(r) => {
                    if let Report::Spc { kind: OutputKind::High, value, .. } = &r {
                        let pick = value.0.iter().find(|e| e.bytes().is_some_and(|b| (self.valid)(b))).cloned();
                        out.push(Action::Report(r.clone()));
                        out.push(Action::Report(Report::Decide(pick)));
                    } else {
                        out.push(Action::Report(r));
                    }
                }
            }
        }
        out
    }

    fn run(&mut self) -> Vec<Action<ValidatedMsg>> {
        if self.ran {
            return Vec::new();
        }
        self.ran = true;
        let v: Vec<Value> = self.got.iter().map(|g| g.as_ref().map_or(Value::Bot, Value::new)).collect();
        let acts = self.engine.input(PrefixVector::from_padded(&v)).expect("capacity n");
        self.map(acts)
    }
}

impl Node for ValidatedNode {
    type Msg = ValidatedMsg;

    fn start(&mut self) -> Vec<Action<ValidatedMsg>> {
        vec![
            Action::Broadcast(ValidatedMsg::Input(self.input.clone())),
            Action::Timer { id: INPUT_TIMER, after: self.timeout },
        ]
    }

    fn on_message(&mut self, from: PartyId, msg: ValidatedMsg) -> Vec<Action<ValidatedMsg>> {
        match msg {
            ValidatedMsg::Input(b) => {
                if from < self.got.len() && self.seen.insert(from) && !self.ran && (self.valid)(&b) {
                    self.got[from] = Some(b);
                }
                if self.seen.len() == self.got.len() {
                    return self.run();
                }
                Vec::new()
            }
            ValidatedMsg::Spc(m) => {
                let acts = self.engine.on_message(from, m);
                self.map(acts)
            }
        }
    }

    fn on_timer(&mut self, id: u64) -> Vec<Action<ValidatedMsg>> {
        if id == INPUT_TIMER {
            self.run()
        } else {
            let acts = self.engine.on_timer(id - 1);
            self.map(acts)
        }
    }
}

impl Encode for ValidatedMsg {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            ValidatedMsg::Input(b) => {
                s.put_u8(0x40);
                s.put_len_bytes(b);
            }
            ValidatedMsg::Spc(m) => {
                s.put_u8(0x41);
                m.encode(s);
            }
        }
    }
}

impl Decode for ValidatedMsg {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0x40 => Ok(ValidatedMsg::Input(r.field("input", |r| r.len_bytes())?.into())),
            0x41 => Ok(ValidatedMsg::Spc(r.field("msg", SpcMsg::decode)?)),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}
