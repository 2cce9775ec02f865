//! Declarative run descriptions (TOML, versioned schema) and their
//! validation. Errors carry the dotted path of the offending field.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::PartyId;
use crate::pc::{Codec, Variant};
use crate::sim::{t, Time};

/// Current schema version.
pub const SCHEMA: u32 = 1;

/// Which protocol a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Pc3,
    PcOpt,
    #[serde(rename = "pc_5f1")]
    Pc5f1,
    Spc,
    Msc,
    Graded,
    Binary,
    Validated,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::Pc3,
        Protocol::PcOpt,
        Protocol::Pc5f1,
        Protocol::Spc,
        Protocol::Msc,
        Protocol::Graded,
        Protocol::Binary,
        Protocol::Validated,
    ];

    /// PC variant run by the protocol (views and slots use the 3-round one).
    pub fn variant(self) -> Variant {
        match self {
            Protocol::PcOpt => Variant::Optimistic,
            Protocol::Pc5f1 => Variant::Fast5f1,
            _ => Variant::ThreeRound,
        }
    }

    /// Standalone PC family (outputs carry proofs).
    pub fn is_pc(self) -> bool {
        matches!(self, Protocol::Pc3 | Protocol::PcOpt | Protocol::Pc5f1)
    }

    /// Built on Strong PC.
    pub fn is_spc(self) -> bool {
        matches!(self, Protocol::Spc | Protocol::Binary | Protocol::Validated)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Pc3 => "pc3",
            Protocol::PcOpt => "pc_opt",
            Protocol::Pc5f1 => "pc_5f1",
            Protocol::Spc => "spc",
            Protocol::Msc => "msc",
            Protocol::Graded => "graded",
            Protocol::Binary => "binary",
            Protocol::Validated => "validated",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Signature backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CryptoBackend {
    #[default]
    Mac,
    Ed25519,
}

impl CryptoBackend {
    pub fn name(self) -> &'static str {
        match self {
            CryptoBackend::Mac => "mac",
            CryptoBackend::Ed25519 => "ed25519",
        }
    }
}

/// A rational time written as an integer or an `"a/b"` string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSpec(pub Time);

impl TimeSpec {
    pub fn int(v: i64) -> Self {
        TimeSpec(t(v))
    }
}

impl<'de> Deserialize<'de> for TimeSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(TimeSpec(t(v))),
            Raw::Str(s) => s
                .trim()
                .parse::<Time>()
                .map(TimeSpec)
                .map_err(|_| serde::de::Error::custom(format!("invalid time `{s}` (expected an integer or \"a/b\")"))),
        }
    }
}

impl Serialize for TimeSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.to_integer())
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

/// Delay preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Every message takes exactly δ.
    #[default]
    Synchronized,
    /// Random delays: fuzzed before GST, within Δ after.
    Partial,
}

/// Per-link delay override.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: PartyId,
    pub to: PartyId,
    pub delay: TimeSpec,
}

/// Network timing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    #[serde(default)]
    pub preset: Preset,
    /// δ.
    #[serde(default = "one")]
    pub delta: TimeSpec,
    /// Δ; timers are 2Δ.
    #[serde(default = "two")]
    pub delta_cap: TimeSpec,
    #[serde(default = "zero")]
    pub gst: TimeSpec,
    /// Random pre-GST delivery order (partial preset).
    #[serde(default = "yes")]
    pub fuzz: bool,
    /// Links stretched to the latest admissible pre-GST delivery.
    #[serde(default)]
    pub slow_links: Vec<(PartyId, PartyId)>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

fn one() -> TimeSpec {
    TimeSpec::int(1)
}

fn two() -> TimeSpec {
    TimeSpec::int(2)
}

fn zero() -> TimeSpec {
    TimeSpec::int(0)
}

fn yes() -> bool {
    true
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec {
            preset: Preset::Synchronized,
            delta: one(),
            delta_cap: two(),
            gst: zero(),
            fuzz: true,
            slow_links: Vec::new(),
            links: Vec::new(),
        }
    }
}

/// Party inputs; unspecified inputs are generated from `seed`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// One vector per party (PC family and Strong PC).
    #[serde(default)]
    pub vectors: Option<Vec<Vec<String>>>,
    /// One value per party (graded and validated consensus).
    #[serde(default)]
    pub values: Option<Vec<String>>,
    /// One bit per party (binary consensus).
    #[serde(default)]
    pub bits: Option<Vec<bool>>,
    /// Seed of generated inputs.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Byzantine behavior of one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Honest,
    Silent,
    Equivocate,
    Censor,
    WithholdBody,
    Doctor,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 6] = [
        BehaviorKind::Honest,
        BehaviorKind::Silent,
        BehaviorKind::Equivocate,
        BehaviorKind::Censor,
        BehaviorKind::WithholdBody,
        BehaviorKind::Doctor,
    ];
}

/// One Byzantine party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub party: PartyId,
    pub behavior: BehaviorKind,
    /// Equivocation: receivers of the second replica (default: upper half).
    #[serde(default)]
    pub second: Option<Vec<PartyId>>,
    /// Censor / withhold: receivers of proposal bodies (default: none).
    #[serde(default)]
    pub reveal_to: Vec<PartyId>,
}

/// Round-robin suspension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionSpec {
    #[serde(default = "zero")]
    pub start: TimeSpec,
    #[serde(default = "one")]
    pub window: TimeSpec,
    /// Suspension order (default: honest parties by index).
    #[serde(default)]
    pub order: Option<Vec<PartyId>>,
}

/// Run limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSpec {
    #[serde(default = "horizon")]
    pub horizon: TimeSpec,
    #[serde(default = "max_events")]
    pub max_events: u64,
}

fn horizon() -> TimeSpec {
    TimeSpec::int(100_000)
}

fn max_events() -> u64 {
    20_000_000
}

impl Default for LimitSpec {
    fn default() -> Self {
        LimitSpec { horizon: horizon(), max_events: max_events() }
    }
}

/// Artifact options.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for metrics, transcript and commit log.
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub transcript: bool,
    /// Include the hex wire encoding of every message in the transcript.
    #[serde(default)]
    pub wire: bool,
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub protocol: Protocol,
    pub n: usize,
    pub f: usize,
    /// Input capacity L.
    #[serde(rename = "L", alias = "l", default = "one_usize")]
    pub l: usize,
    #[serde(default)]
    pub codec: Codec,
    #[serde(default)]
    pub crypto: CryptoBackend,
    #[serde(default)]
    pub seed: u64,
    /// Slots to run (multi-slot consensus).
    #[serde(default = "one_u64")]
    pub slots: u64,
    #[serde(default)]
    pub delay: DelaySpec,
    #[serde(default)]
    pub inputs: InputSpec,
    #[serde(default)]
    pub adversary: Vec<AdversarySpec>,
    #[serde(default)]
    pub suspension: Option<SuspensionSpec>,
    #[serde(default)]
    pub limits: LimitSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one_usize() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

/// A malformed or inconsistent scenario.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError { path: path.into(), message: message.into() })
}

impl Scenario {
    /// A fault-free synchronized scenario with generated inputs.
    pub fn new(protocol: Protocol, n: usize, f: usize, l: usize) -> Self {
        Scenario {
            schema: SCHEMA,
            name: String::new(),
            protocol,
            n,
            f,
            l,
            codec: Codec::Plain,
            crypto: CryptoBackend::Mac,
            seed: 0,
            slots: 1,
            delay: DelaySpec::default(),
            inputs: InputSpec::default(),
            adversary: Vec::new(),
            suspension: None,
            limits: LimitSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Parties declared Byzantine.
    pub fn byzantine(&self) -> Vec<PartyId> {
        let mut b: Vec<PartyId> = self.adversary.iter().map(|a| a.party).collect();
        b.sort_unstable();
        b
    }

    /// Parties not declared Byzantine.
    pub fn honest(&self) -> Vec<PartyId> {
        let b = self.byzantine();
        (0..self.n).filter(|p| !b.contains(p)).collect()
    }

    /// Checks cross-field constraints.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.schema != SCHEMA {
            return err("schema", format!("unsupported schema version {} (expected {SCHEMA})", self.schema));
        }
        let need = match self.protocol.variant() {
            Variant::Fast5f1 => 5 * self.f + 1,
            _ => 3 * self.f + 1,
        };
        if self.n < need {
            return err("n", format!("{} requires n >= {need} for f = {}, got n = {}", self.protocol, self.f, self.n));
        }
        if self.l == 0 {
            return err("L", "capacity must be positive");
        }
        if self.codec == Codec::Compact && self.protocol.variant() != Variant::ThreeRound {
            return err("codec", "the compact codec supports only 3-round instances");
        }
        if self.slots == 0 {
            return err("slots", "at least one slot");
        }
        let d = &self.delay;
        if d.delta.0 <= t(0) {
            return err("delay.delta", "must be positive");
        }
        if d.delta_cap.0 < d.delta.0 {
            return err("delay.delta_cap", "must be at least delta");
        }
        if d.gst.0 < t(0) {
            return err("delay.gst", "must be non-negative");
        }
        for (i, l) in d.links.iter().enumerate() {
            if l.from >= self.n || l.to >= self.n {
                return err(format!("delay.links[{i}]"), "party out of range");
            }
            if l.delay.0 <= t(0) {
                return err(format!("delay.links[{i}].delay"), "must be positive");
            }
        }
        for (i, (a, b)) in d.slow_links.iter().enumerate() {
            if *a >= self.n || *b >= self.n {
                return err(format!("delay.slow_links[{i}]"), "party out of range");
            }
        }
        if self.adversary.len() > self.f {
            return err("adversary", format!("{} Byzantine parties exceed f = {}", self.adversary.len(), self.f));
        }
        let mut seen = Vec::new();
        for (i, a) in self.adversary.iter().enumerate() {
            if a.party >= self.n {
                return err(format!("adversary[{i}].party"), format!("party {} out of range", a.party));
            }
            if seen.contains(&a.party) {
                return err(format!("adversary[{i}].party"), format!("party {} listed twice", a.party));
            }
            seen.push(a.party);
            let ids = a.second.iter().flatten().chain(a.reveal_to.iter());
            if ids.into_iter().any(|&p| p >= self.n) {
                return err(format!("adversary[{i}]"), "receiver out of range");
            }
        }
        let inputs = &self.inputs;
        if let Some(v) = &inputs.vectors {
            if v.len() != self.n {
                return err("inputs.vectors", format!("expected {} vectors, got {}", self.n, v.len()));
            }
            for (i, x) in v.iter().enumerate() {
                if x.len() > self.l {
                    return err(format!("inputs.vectors[{i}]"), format!("length {} exceeds L = {}", x.len(), self.l));
                }
            }
        }
        if let Some(v) = &inputs.values {
            if v.len() != self.n {
                return err("inputs.values", format!("expected {} values, got {}", self.n, v.len()));
            }
        }
        if let Some(v) = &inputs.bits {
            if v.len() != self.n {
                return err("inputs.bits", format!("expected {} bits, got {}", self.n, v.len()));
            }
        }
        if let Some(s) = &self.suspension {
            if s.window.0 <= t(0) {
                return err("suspension.window", "must be positive");
            }
            if s.order.iter().flatten().any(|&p| p >= self.n) {
                return err("suspension.order", "party out of range");
            }
        }
        if self.limits.horizon.0 <= t(0) {
            return err("limits.horizon", "must be positive");
        }
        Ok(())
    }

    /// Serialized TOML form.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Parses and validates a TOML scenario.
pub fn parse(text: &str) -> Result<Scenario, SchemaError> {
    let de = toml::Deserializer::new(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().message().trim().to_string();
        SchemaError { path, message }
    })?;
    sc.validate()?;
    Ok(sc)
}
