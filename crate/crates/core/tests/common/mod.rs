//! Minimal message-queue driver for PC engines, independent of the simulator.
#![allow(dead_code)]

pub mod oracle;
pub mod reverse;

use std::collections::VecDeque;
use std::sync::Arc;

use prefix_consensus::crypto::{MacScheme, Verifier};
use prefix_consensus::pc::{Codec, Instance, PcAction, PcConfig, PcEngine, PcMsg, PcOutput, Variant};
use prefix_consensus::prefix::PrefixVector;
use prefix_consensus::wire::Encode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn verifier(n: usize) -> Verifier {
    Verifier::new(Arc::new(MacScheme::new(n, 7)))
}

pub fn config(n: usize, f: usize, l: usize, variant: Variant, codec: Codec) -> PcConfig {
    PcConfig::new(n, f, l, variant, codec, Instance::standalone()).unwrap()
}

#[derive(Debug, Default)]
pub struct Run {
    /// Outputs per party in emission order.
    pub outputs: Vec<Vec<PcOutput>>,
    /// Network messages (self-delivery excluded).
    pub messages: usize,
    pub bytes: usize,
    /// Longest causal chain of messages preceding each party's outputs.
    pub depth: Vec<Vec<usize>>,
    pub faults: Vec<String>,
}

impl Run {
    pub fn get(&self, party: usize, kind: prefix_consensus::pc::OutputKind) -> Option<&PcOutput> {
        self.outputs[party].iter().find(|o| o.kind == kind)
    }
}

/// Runs one instance. `None` inputs are silent parties. With `seed`, the next
/// delivery is drawn uniformly from all pending messages; otherwise FIFO.
pub fn drive(cfg: PcConfig, ver: &Verifier, inputs: &[Option<PrefixVector>], seed: Option<u64>) -> Run {
    let n = cfg.n;
    let mut engines: Vec<PcEngine> = (0..n).map(|i| PcEngine::new(cfg, ver.keyring(i))).collect();
    let mut run = Run { outputs: vec![Vec::new(); n], depth: vec![Vec::new(); n], ..Run::default() };
    let mut queue = VecDeque::new();
    let mut local = VecDeque::new();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let honest: Vec<bool> = inputs.iter().map(Option::is_some).collect();

    type Q = VecDeque<(usize, usize, PcMsg, usize)>;
    let handle = |me: usize, acts: Vec<PcAction>, depth: usize, queue: &mut Q, local: &mut Q, run: &mut Run| {
        for a in acts {
            match a {
                PcAction::Broadcast(m) => {
                    for to in 0..n {
                        if to != me {
                            run.messages += 1;
                            run.bytes += m.encoded_len();
                            queue.push_back((me, to, m.clone(), depth + 1));
                        } else {
                            local.push_back((me, to, m.clone(), depth));
                        }
                    }
                }
                PcAction::Output(o) => {
                    run.outputs[me].push(o);
                    run.depth[me].push(depth);
                }
                PcAction::Fault(e) => run.faults.push(e),
            }
        }
    };

    for (i, v) in inputs.iter().enumerate() {
        if let Some(v) = v {
            let acts = engines[i].input(v.clone()).unwrap();
            handle(i, acts, 0, &mut queue, &mut local, &mut run);
        }
    }
    loop {
        let next = match (local.pop_front(), rng.as_mut()) {
            (Some(e), _) => Some(e),
            (None, _) if queue.is_empty() => None,
            (None, Some(r)) => queue.remove(r.gen_range(0..queue.len())),
            (None, None) => queue.pop_front(),
        };
        let Some((from, to, m, d)) = next else { break };
        if !honest[to] {
            continue;
        }
        let acts = engines[to].on_message(from, m);
        handle(to, acts, d, &mut queue, &mut local, &mut run);
    }
    run
}
