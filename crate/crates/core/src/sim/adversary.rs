//! Built-in Byzantine behaviors.
//!
//! A [`Strategy`] maps each Byzantine party to a [`Behavior`] and rewrites
//! that party's outgoing messages. Byzantine parties run honest engines
//! (two of them for a split-brain equivocator) and only ever hold their own
//! keyrings, so nothing they emit can carry an honest signature.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand::Rng;

use crate::crypto::{hbot, Keyring, MsgKind, PartyId};
use crate::derived::ValidatedMsg;
use crate::msc::MscMsg;
use crate::pc::{Instance, Memo, PcMsg, Vote2, Vote3, Vote4, FAMILY_SPC};
use crate::prefix::{PrefixVector, Value};
use crate::spc::{Cert, EmptyView, NewCommit, ProposalObj, SpcMsg, empty_view_bytes};
use crate::wire::sign_bytes;

use super::Interceptor;

/// What a Byzantine party does with its outgoing messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Behavior {
    /// Follows the protocol (useful with link delays).
    Honest,
    /// Sends nothing.
    Silent,
    /// Two replicas with different inputs; replica 1 talks to `second`,
    /// replica 0 to everyone else.
    Equivocate { second: Vec<PartyId> },
    /// Sends proposal bodies only to `reveal_to`.
    Censor { reveal_to: Vec<PartyId> },
    /// Sends proposal bodies only to `reveal_to` and never answers fetches.
    WithholdBody { reveal_to: Vec<PartyId> },
    /// Precedes every message with doctored variants: re-signed votes whose
    /// value disagrees with their certificate, proofs replayed under other
    /// views or values, mismatched fetch responses.
    Doctor,
}

impl Behavior {
    /// Number of engine replicas the party runs.
    pub fn replicas(&self) -> usize {
        match self {
            Behavior::Silent => 0,
            Behavior::Equivocate { .. } => 2,
            _ => 1,
        }
    }
}

/// Messages the built-in behaviors know how to manipulate.
pub trait Tamper: Sized {
    /// Carries a proposal body (payload or proposal object).
    fn is_body(&self) -> bool;

    fn is_fetch_response(&self) -> bool;

    /// Invalid variants signed with `keys` under instance `inst`.
    fn doctor(&self, keys: &Keyring, inst: Instance, rng: &mut ChaCha8Rng) -> Vec<Self>;
}

fn junk() -> Value {
    Value::new(b"zz")
}

fn extend(v: &PrefixVector) -> PrefixVector {
    let mut v = v.clone();
    v.0.push(junk());
    v
}

fn alter(v: &PrefixVector, rng: &mut ChaCha8Rng) -> PrefixVector {
    if !v.is_empty() && rng.gen_bool(0.5) {
        v.prefix(rng.gen_range(0..v.len()))
    } else {
        extend(v)
    }
}

impl Tamper for PcMsg {
    fn is_body(&self) -> bool {
        false
    }

    fn is_fetch_response(&self) -> bool {
        false
    }

    fn doctor(&self, keys: &Keyring, inst: Instance, rng: &mut ChaCha8Rng) -> Vec<Self> {
        let sign = |kind: MsgKind, v: &PrefixVector| keys.sign(&inst.tag(kind), &sign_bytes(&v.0));
        match self {
            PcMsg::Vote2(v) => {
                let value = alter(&v.value, rng);
                let sig = sign(MsgKind::Vote2, &value);
                vec![PcMsg::Vote2(Arc::new(Vote2 { value, sig, qc1: v.qc1.clone(), memo: Memo::default() }))]
            }
            PcMsg::Vote3(v) => {
                let value = alter(&v.value, rng);
                let sig = sign(MsgKind::Vote3, &value);
                vec![PcMsg::Vote3(Arc::new(Vote3 {
                    value,
                    sig,
                    qc1: v.qc1.clone(),
                    qc2: v.qc2.clone(),
                    memo: Memo::default(),
                }))]
            }
            PcMsg::Vote4(v) => {
                let value = alter(&v.value, rng);
                let sig = sign(MsgKind::Vote4, &value);
                vec![PcMsg::Vote4(Arc::new(Vote4 { value, sig, qc3: v.qc3.clone(), memo: Memo::default() }))]
            }
            PcMsg::CVote2(v) => {
                let mut d = (**v).clone();
                d.x = alter(&v.x, rng);
                vec![PcMsg::CVote2(Arc::new(d))]
            }
            PcMsg::CVote3(v) => {
                let mut d = (**v).clone();
                d.xp = alter(&v.xp, rng);
                d.sig = sign(MsgKind::Vote3, &d.xp);
                vec![PcMsg::CVote3(Arc::new(d))]
            }
            PcMsg::Vote1(_) | PcMsg::CVote1(_) => Vec::new(),
        }
    }
}

fn spc_inst(inst: Instance, view: u64) -> Instance {
    Instance { family: FAMILY_SPC, slot: inst.slot, view }
}

impl Tamper for SpcMsg {
    fn is_body(&self) -> bool {
        matches!(self, SpcMsg::NewView(_))
    }

    fn is_fetch_response(&self) -> bool {
        matches!(self, SpcMsg::FetchResp(_))
    }

    fn doctor(&self, keys: &Keyring, inst: Instance, rng: &mut ChaCha8Rng) -> Vec<Self> {
        match self {
            SpcMsg::Vpc { view, msg } => msg
                .doctor(keys, spc_inst(inst, *view), rng)
                .into_iter()
                .map(|m| SpcMsg::Vpc { view: *view, msg: m })
                .collect(),
            SpcMsg::NewView(obj) => {
                let cert = match &obj.cert {
                    Cert::Direct { view, high, proof } => {
                        Cert::Direct { view: *view, high: alter(high, rng), proof: proof.clone() }
                    }
                    Cert::Indirect { view, star, high, proof, sigma } => Cert::Indirect {
                        view: *view,
                        star: star.saturating_sub(1),
                        high: high.clone(),
                        proof: proof.clone(),
                        sigma: sigma.clone(),
                    },
                };
                let skipped = ProposalObj { view: obj.view + 1, cert: obj.cert.clone() };
                vec![
                    SpcMsg::NewView(Arc::new(ProposalObj { view: obj.view, cert })),
                    SpcMsg::NewView(Arc::new(skipped)),
                ]
            }
            SpcMsg::EmptyView(e) => {
                let star = e.star + 1;
                let sig = keys.sign(&spc_inst(inst, e.view).tag(MsgKind::EmptyView), &empty_view_bytes(e.view, star));
                vec![SpcMsg::EmptyView(Arc::new(EmptyView {
                    view: e.view,
                    star,
                    high: e.high.clone(),
                    proof: e.proof.clone(),
                    sig,
                }))]
            }
            SpcMsg::NewCommit(c) => {
                let mut longer = c.value.clone();
                longer.0.push(Value::new(hbot().0));
                vec![
                    SpcMsg::NewCommit(Arc::new(NewCommit { view: c.view, value: longer, proof: c.proof.clone() })),
                    SpcMsg::NewCommit(Arc::new(NewCommit {
                        view: c.view + 1,
                        value: c.value.clone(),
                        proof: c.proof.clone(),
                    })),
                ]
            }
            SpcMsg::FetchResp(obj) => {
                vec![SpcMsg::FetchResp(Arc::new(ProposalObj { view: obj.view + 1, cert: obj.cert.clone() }))]
            }
            SpcMsg::FetchReq(_) => Vec::new(),
        }
    }
}

impl Tamper for MscMsg {
    fn is_body(&self) -> bool {
        matches!(self, MscMsg::Proposal { .. })
    }

    fn is_fetch_response(&self) -> bool {
        matches!(self, MscMsg::FetchResp { .. } | MscMsg::Spc { msg: SpcMsg::FetchResp(_), .. })
    }

    fn doctor(&self, keys: &Keyring, _inst: Instance, rng: &mut ChaCha8Rng) -> Vec<Self> {
        match self {
            MscMsg::Spc { slot, msg } => {
                let inst = Instance { family: FAMILY_SPC, slot: *slot, view: 0 };
                msg.doctor(keys, inst, rng).into_iter().map(|m| MscMsg::Spc { slot: *slot, msg: m }).collect()
            }
            MscMsg::FetchResp { slot, payload } => {
                let mut p = payload.to_vec();
                p.push(0xff);
                vec![MscMsg::FetchResp { slot: *slot, payload: p.into() }]
            }
            _ => Vec::new(),
        }
    }
}

impl Tamper for ValidatedMsg {
    fn is_body(&self) -> bool {
        matches!(self, ValidatedMsg::Input(_))
    }

    fn is_fetch_response(&self) -> bool {
        matches!(self, ValidatedMsg::Spc(SpcMsg::FetchResp(_)))
    }

    fn doctor(&self, keys: &Keyring, inst: Instance, rng: &mut ChaCha8Rng) -> Vec<Self> {
        match self {
            ValidatedMsg::Spc(m) => m.doctor(keys, inst, rng).into_iter().map(ValidatedMsg::Spc).collect(),
            ValidatedMsg::Input(_) => Vec::new(),
        }
    }
}

/// Behaviors of the Byzantine parties.
pub struct Strategy {
    behaviors: BTreeMap<PartyId, (Behavior, Keyring)>,
    inst: Instance,
}

impl Strategy {
    /// `inst` is the base instance used when re-signing doctored messages.
    pub fn new(inst: Instance) -> Self {
        Strategy { behaviors: BTreeMap::new(), inst }
    }

    pub fn with(mut self, party: PartyId, behavior: Behavior, keys: Keyring) -> Self {
        assert_eq!(keys.id(), party, "a Byzantine party holds only its own keys");
        self.behaviors.insert(party, (behavior, keys));
        self
    }

    pub fn behavior(&self, party: PartyId) -> Option<&Behavior> {
        self.behaviors.get(&party).map(|b| &b.0)
    }
}

impl<M: Tamper + Clone> Interceptor<M> for Strategy {
    fn route(&mut self, from: PartyId, replica: usize, to: PartyId, msg: &M, rng: &mut ChaCha8Rng) -> Vec<M> {
        let Some((behavior, keys)) = self.behaviors.get(&from) else {
            return vec![msg.clone()];
        };
        let pass = match behavior {
            Behavior::Honest | Behavior::Doctor => true,
            Behavior::Silent => false,
            Behavior::Equivocate { second } => second.contains(&to) == (replica == 1),
            Behavior::Censor { reveal_to } => !msg.is_body() || reveal_to.contains(&to),
            Behavior::WithholdBody { reveal_to } => {
                !msg.is_fetch_response() && (!msg.is_body() || reveal_to.contains(&to))
            }
        };
        let mut out = Vec::new();
        if *behavior == Behavior::Doctor {
            out = msg.doctor(keys, self.inst, rng);
        }
        if pass {
            out.push(msg.clone());
        }
        out
    }
}
