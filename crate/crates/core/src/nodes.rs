//! Simulator adapters for the protocol engines.

use crate::crypto::PartyId;
use crate::derived::ValidatedMsg;
use crate::msc::{MscEngine, MscMsg};
use crate::pc::{PcAction, PcEngine, PcMsg};
use crate::prefix::PrefixVector;
use crate::sim::{Action, Message, Node, Report};
use crate::spc::{SpcEngine, SpcMsg};

impl Message for PcMsg {
    fn kind(&self) -> &'static str {
        self.kind_name()
    }

    fn summary(&self) -> String {
        let v = match self {
            PcMsg::Vote1(v) => format!("{:?}", v.value),
            PcMsg::Vote2(v) => format!("{:?}", v.value),
            PcMsg::Vote3(v) => format!("{:?}", v.value),
            PcMsg::Vote4(v) => format!("{:?}", v.value),
            PcMsg::CVote1(v) => format!("{:?}", v.value),
            PcMsg::CVote2(v) => format!("{:?}", v.x),
            PcMsg::CVote3(v) => format!("{:?}", v.xp),
        };
        format!("{} by {} {v}", self.kind_name(), self.signer())
    }
}

impl Message for SpcMsg {
    fn kind(&self) -> &'static str {
        self.kind_name()
    }

    fn summary(&self) -> String {
        match self {
            SpcMsg::Vpc { view, msg } => format!("view {view} {}", msg.summary()),
            SpcMsg::NewView(o) => format!("new_view {} from view {}", o.view, o.cert.view()),
            SpcMsg::EmptyView(e) => format!("empty_view {} star {}", e.view, e.star),
            SpcMsg::NewCommit(c) => format!("new_commit view {} len {}", c.view, c.value.len()),
            SpcMsg::FetchReq(d) => format!("fetch_req {d:?}"),
            SpcMsg::FetchResp(o) => format!("fetch_resp {:?}", o.digest()),
        }
    }
}

impl Message for MscMsg {
    fn kind(&self) -> &'static str {
        self.kind_name()
    }

    fn summary(&self) -> String {
        match self {
            MscMsg::Proposal { slot, payload } => format!("proposal slot {slot} {} bytes", payload.len()),
            MscMsg::Spc { slot, msg } => format!("slot {slot} {}", msg.summary()),
            MscMsg::FetchReq { slot, digest } => format!("payload_req slot {slot} {digest:?}"),
            MscMsg::FetchResp { slot, payload } => format!("payload_resp slot {slot} {} bytes", payload.len()),
        }
    }
}

impl Message for ValidatedMsg {
    fn kind(&self) -> &'static str {
        self.kind_name()
    }

    fn summary(&self) -> String {
        match self {
            ValidatedMsg::Input(b) => format!("input {} bytes", b.len()),
            ValidatedMsg::Spc(m) => m.summary(),
        }
    }
}

/// Maps PC engine actions to simulator actions.
pub fn pc_actions(acts: Vec<PcAction>) -> Vec<Action<PcMsg>> {
    acts.into_iter()
        .map(|a| match a {
            PcAction::Broadcast(m) => Action::Broadcast(m),
            PcAction::Output(o) => Action::Report(Report::Pc(o)),
            PcAction::Fault(e) => Action::Report(Report::Fault(e)),
        })
        .collect()
}

/// A standalone PC party.
pub struct PcNode {
    pub engine: PcEngine,
    pub input: Option<PrefixVector>,
}

impl Node for PcNode {
    type Msg = PcMsg;

    fn start(&mut self) -> Vec<Action<PcMsg>> {
        match self.input.take() {
            Some(v) => match self.engine.input(v) {
                Ok(acts) => pc_actions(acts),
                Err(e) => vec![Action::Report(Report::Fault(e.to_string()))],
            },
            None => Vec::new(),
        }
    }

    fn on_message(&mut self, from: PartyId, msg: PcMsg) -> Vec<Action<PcMsg>> {
        pc_actions(self.engine.on_message(from, msg))
    }

    fn on_timer(&mut self, _id: u64) -> Vec<Action<PcMsg>> {
        Vec::new()
    }
}

/// A standalone Strong PC party.
pub struct SpcNode {
    pub engine: SpcEngine,
    pub input: Option<PrefixVector>,
}

impl Node for SpcNode {
    type Msg = SpcMsg;

    fn start(&mut self) -> Vec<Action<SpcMsg>> {
        match self.input.take() {
            Some(v) => match self.engine.input(v) {
                Ok(acts) => acts,
                Err(e) => vec![Action::Report(Report::Fault(e.to_string()))],
            },
            None => Vec::new(),
        }
    }

    fn on_message(&mut self, from: PartyId, msg: SpcMsg) -> Vec<Action<SpcMsg>> {
        self.engine.on_message(from, msg)
    }

    fn on_timer(&mut self, id: u64) -> Vec<Action<SpcMsg>> {
        self.engine.on_timer(id)
    }
}

impl Node for MscEngine {
    type Msg = MscMsg;

    fn start(&mut self) -> Vec<Action<MscMsg>> {
        MscEngine::start(self)
    }

    fn on_message(&mut self, from: PartyId, msg: MscMsg) -> Vec<Action<MscMsg>> {
        MscEngine::on_message(self, from, msg)
    }

    fn on_timer(&mut self, id: u64) -> Vec<Action<MscMsg>> {
        MscEngine::on_timer(self, id)
    }
}
