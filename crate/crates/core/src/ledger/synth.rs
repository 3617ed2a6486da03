//! Deterministic synthetic ledgers with planted unknown-output patterns.
//!
//! A pattern is a small list of template transactions. A template tx with no
//! spends is a coinbase and opens a new block; the others are appended to the
//! current block, so every spend points strictly backwards in ledger order.
//! Pattern instances never touch each other's outputs, which makes the
//! planted T-DAG multiset exact.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Hash32, InputRef, Ledger, LedgerError, OutputRecord, Tx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutKind {
    /// Standard P2PKH output with a random address.
    Addressed,
    /// Null address, script that matches no default rule.
    Null,
    /// Null address, anyone-can-spend `OP_TRUE` script.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutSpec {
    Kind(OutKind),
    /// Null address with the given script, hex encoded.
    Script { script: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxTemplate {
    /// `(template tx index, vout)` pairs. Empty means coinbase.
    #[serde(default)]
    pub spends: Vec<(usize, u32)>,
    pub outputs: Vec<OutSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTemplate {
    pub txs: Vec<TxTemplate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomPattern {
    pub name: String,
    pub count: usize,
    pub txs: Vec<TxTemplate>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Named shapes (see [`named_pattern`]) with instance counts.
    #[serde(default)]
    pub patterns: BTreeMap<String, usize>,
    #[serde(default)]
    pub custom: Vec<CustomPattern>,
    /// Transactions of unstructured random traffic, appended after patterns.
    #[serde(default)]
    pub random_txs: usize,
    /// Blocks holding only a coinbase paying one addressed output.
    #[serde(default)]
    pub coinbase_blocks: usize,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown pattern name {0:?}")]
    UnknownPattern(String),
    #[error("pattern {pattern:?}: {message}")]
    Infeasible { pattern: String, message: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn tx(spends: &[(usize, u32)], outputs: &[OutKind]) -> TxTemplate {
    TxTemplate {
        spends: spends.to_vec(),
        outputs: outputs.iter().copied().map(OutSpec::Kind).collect(),
    }
}

use OutKind::{Addressed as A, Null as N, Trivial as Tr};

fn fan_out(k: usize) -> PatternTemplate {
    PatternTemplate {
        txs: vec![tx(&[], &[N]), tx(&[(0, 0)], &vec![A; k])],
    }
}

fn join(k: usize) -> PatternTemplate {
    let mut txs: Vec<TxTemplate> = (0..k).map(|_| tx(&[], &[N])).collect();
    let spends: Vec<(usize, u32)> = (0..k).map(|i| (i, 0)).collect();
    txs.push(tx(&spends, &[A]));
    PatternTemplate { txs }
}

/// `n` vertices: a coinbase and `n - 2` spenders, each with one output.
fn deep_chain(n: usize) -> PatternTemplate {
    let mut txs = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let kind = if i + 2 == n { A } else { N };
        if i == 0 {
            txs.push(tx(&[], &[kind]));
        } else {
            txs.push(tx(&[(i - 1, 0)], &[kind]));
        }
    }
    PatternTemplate { txs }
}

/// Locking script (hex) that the default filter rule `rule` matches.
pub fn filter_fixture_script(rule: &str) -> Option<&'static str> {
    Some(match rule {
        "P2PKH_NOP" => "76a91400112233445566778899aabbccddeeff0011223388ac61",
        "OP_MIN_OP_EQUAL" => "a387",
        "PAY_TO_HASH" => "a8206fe28c0ab6f1b372c1a6a246ae63f74f931e8365e15a089c68d619000000000087",
        "OP_IF" => "635168",
        "OP_CHECKMULTISIG_TRIVIAL" => "0000ae",
        _ => return None,
    })
}

/// Built-in shapes. The `tableN` names plant the rows of the most common
/// isomorphism classes in the order they are usually reported.
pub fn named_pattern(name: &str) -> Result<PatternTemplate, SynthError> {
    let arg = |prefix: &str| -> Option<Result<usize, SynthError>> {
        name.strip_prefix(prefix).map(|s| {
            s.parse::<usize>()
                .map_err(|_| SynthError::UnknownPattern(name.to_owned()))
        })
    };
    if let Some(k) = arg("fan_out:") {
        return Ok(fan_out(k?));
    }
    if let Some(k) = arg("join:") {
        return Ok(join(k?));
    }
    if let Some(n) = arg("deep_chain:") {
        let n = n?;
        if n < 2 {
            return Err(SynthError::Infeasible {
                pattern: name.to_owned(),
                message: "a chain needs at least 2 vertices".into(),
            });
        }
        return Ok(deep_chain(n));
    }
    if let Some(rule) = name.strip_prefix("filtered:") {
        let script = filter_fixture_script(rule)
            .ok_or_else(|| SynthError::UnknownPattern(name.to_owned()))?;
        return Ok(PatternTemplate {
            txs: vec![
                TxTemplate {
                    spends: vec![],
                    outputs: vec![OutSpec::Script { script: script.to_owned() }],
                },
                tx(&[(0, 0)], &[A]),
            ],
        });
    }
    let txs = match name {
        "chain3" | "table1" => return Ok(fan_out(1)),
        "table2" => vec![
            tx(&[], &[N]),
            tx(&[], &[N]),
            tx(&[(0, 0), (1, 0)], &[A, A, A, A, A, A]),
        ],
        "table3" => vec![tx(&[], &[N, N, A]), tx(&[(0, 0), (0, 1)], &[A, A])],
        "table4" => return Ok(fan_out(4)),
        "table5" => return Ok(fan_out(3)),
        "table6" => return Ok(fan_out(5)),
        "table7" => vec![
            tx(&[], &[N, N]),
            tx(&[(0, 0)], &[A, A]),
            tx(&[(0, 1)], &[A, A]),
        ],
        "table8" => vec![tx(&[], &[N, N, A, A]), tx(&[(0, 0), (0, 1)], &[A])],
        "table9" => return Ok(fan_out(2)),
        "table10" => vec![tx(&[], &[N, A]), tx(&[(0, 0)], &[A, A, A])],
        "table11" => return Ok(join(20000)),
        "star3" => vec![tx(&[], &[A, A])],
        "height1" => vec![tx(&[], &[N])],
        "trivial_chain" => vec![
            tx(&[], &[Tr]),
            tx(&[(0, 0)], &[N]),
            tx(&[(1, 0)], &[A; 8]),
        ],
        _ => return Err(SynthError::UnknownPattern(name.to_owned())),
    };
    Ok(PatternTemplate { txs })
}

fn validate(name: &str, t: &PatternTemplate) -> Result<(), SynthError> {
    let bad = |message: String| SynthError::Infeasible {
        pattern: name.to_owned(),
        message,
    };
    if t.txs.is_empty() {
        return Err(bad("pattern has no transactions".into()));
    }
    let mut spent = HashSet::new();
    for (i, tx) in t.txs.iter().enumerate() {
        if tx.outputs.is_empty() {
            return Err(bad(format!("tx {i} has zero outputs")));
        }
        for &(src, vout) in &tx.spends {
            if src >= i {
                return Err(bad(format!("tx {i} spends tx {src}, which is not earlier")));
            }
            if vout as usize >= t.txs[src].outputs.len() {
                return Err(bad(format!("tx {i} spends missing output {src}:{vout}")));
            }
            if !spent.insert((src, vout)) {
                return Err(bad(format!("output {src}:{vout} spent twice")));
            }
        }
        for o in &tx.outputs {
            if let OutSpec::Script { script } = o {
                if hex::decode(script).is_err() {
                    return Err(bad(format!("tx {i}: invalid script hex {script:?}")));
                }
            }
        }
    }
    Ok(())
}

const BASE58: &[u8] = b"123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

struct Builder {
    rng: ChaCha8Rng,
    blocks: Vec<(Hash32, u64, Vec<Tx>)>,
    used: HashSet<Hash32>,
}

impl Builder {
    fn hash(&mut self) -> Hash32 {
        loop {
            let h = Hash32(self.rng.random());
            if self.used.insert(h) {
                return h;
            }
        }
    }

    fn p2pkh(&mut self) -> Vec<u8> {
        let mut s = vec![0x76, 0xa9, 0x14];
        s.extend(self.rng.random::<[u8; 20]>());
        s.extend([0x88, 0xac]);
        s
    }

    fn output(&mut self, spec: &OutSpec) -> OutputRecord {
        let value = self.rng.random_range(546..5_000_000_000u64);
        let (address, script) = match spec {
            OutSpec::Kind(OutKind::Addressed) => {
                let mut a = String::from("1");
                for _ in 0..33 {
                    a.push(BASE58[self.rng.random_range(0..BASE58.len())] as char);
                }
                (Some(a), self.p2pkh())
            }
            OutSpec::Kind(OutKind::Null) => {
                // 32-byte push, OP_DROP, then a P2PKH body.
                let mut s = vec![0x20];
                s.extend(self.rng.random::<[u8; 32]>());
                s.push(0x75);
                s.extend(self.p2pkh());
                (None, s)
            }
            OutSpec::Kind(OutKind::Trivial) => (None, vec![0x51]),
            OutSpec::Script { script } => (None, hex::decode(script).unwrap_or_default()),
        };
        OutputRecord {
            address,
            script,
            value,
            spent_by: None,
        }
    }

    fn open_block(&mut self) {
        let h = self.hash();
        let height = self.blocks.len() as u64;
        self.blocks.push((h, height, Vec::new()));
    }

    fn push_tx(&mut self, prevs: Vec<(Hash32, u32)>, outs: &[OutSpec]) -> Hash32 {
        if prevs.is_empty() || self.blocks.is_empty() {
            self.open_block();
        }
        let hash = self.hash();
        let vout = outs.iter().map(|o| self.output(o)).collect();
        let coinbase = prevs.is_empty();
        let vin = prevs
            .into_iter()
            .map(|(prev_txid, prev_vout)| InputRef {
                prev_txid,
                prev_vout,
                source: None,
            })
            .collect();
        let block = self.blocks.last_mut().expect("block opened above");
        block.2.push(Tx {
            hash,
            blockhash: block.0,
            vin,
            vout,
            coinbase,
        });
        hash
    }

    fn plant(&mut self, t: &PatternTemplate) {
        let mut hashes = Vec::with_capacity(t.txs.len());
        for tx in &t.txs {
            let prevs = tx.spends.iter().map(|&(i, v)| (hashes[i], v)).collect();
            hashes.push(self.push_tx(prevs, &tx.outputs));
        }
    }

    /// Unstructured traffic over its own pool of outputs.
    fn random_traffic(&mut self, n: usize) {
        let mut pool: Vec<(Hash32, u32)> = Vec::new();
        let mut done = 0;
        while done < n {
            let kind = |r: &mut ChaCha8Rng| {
                let x = r.random_range(0..10);
                OutSpec::Kind(match x {
                    0..=4 => N,
                    5..=8 => A,
                    _ => Tr,
                })
            };
            if pool.is_empty() || self.rng.random_bool(0.15) {
                let outs: Vec<OutSpec> =
                    (0..self.rng.random_range(1..=3)).map(|_| kind(&mut self.rng)).collect();
                let h = self.push_tx(Vec::new(), &outs);
                pool.extend((0..outs.len() as u32).map(|v| (h, v)));
            } else {
                let k = self.rng.random_range(1..=pool.len().min(3));
                let prevs: Vec<(Hash32, u32)> = (0..k)
                    .map(|_| {
                        let i = self.rng.random_range(0..pool.len());
                        pool.swap_remove(i)
                    })
                    .collect();
                let outs: Vec<OutSpec> =
                    (0..self.rng.random_range(1..=4)).map(|_| kind(&mut self.rng)).collect();
                let h = self.push_tx(prevs, &outs);
                pool.extend((0..outs.len() as u32).map(|v| (h, v)));
            }
            done += 1;
        }
    }
}

/// Builds the ledger described by `spec`. Same spec and seed give the same
/// ledger, byte for byte once written.
pub fn synth(spec: &GeneratorSpec, seed: u64) -> Result<Ledger, SynthError> {
    let mut instances: Vec<PatternTemplate> = Vec::new();
    for (name, &count) in &spec.patterns {
        let t = named_pattern(name)?;
        validate(name, &t)?;
        instances.extend(std::iter::repeat_n(t, count));
    }
    for c in &spec.custom {
        let t = PatternTemplate { txs: c.txs.clone() };
        validate(&c.name, &t)?;
        instances.extend(std::iter::repeat_n(t, c.count));
    }
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        blocks: Vec::new(),
        used: HashSet::new(),
    };
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut b.rng);
    for i in order {
        b.plant(&instances[i]);
    }
    for _ in 0..spec.coinbase_blocks {
        b.push_tx(Vec::new(), &[OutSpec::Kind(A)]);
    }
    b.random_traffic(spec.random_txs);
    Ok(Ledger::from_blocks(b.blocks)?)
}
