//! Minimal two-entity chain model (`block`, `tx`) with forward linkage.
//!
//! Transactions are identified by the pair `(blockhash, hash)` because the
//! chain contains duplicated transaction hashes. After [`link`], every output
//! knows which later input spends it, which is what lets the rest of the
//! pipeline walk the chain forward in time.

mod interchange;
pub mod synth;

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use thiserror::Error;

pub use interchange::{ingest, ingest_reader, write, write_writer};

/// A 32-byte identifier, hex encoded (lowercase) in interchange files.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash32(pub [u8; 32]);

impl Hash32 {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("expected 64 lowercase hex characters")]
pub struct ParseHashError;

impl FromStr for Hash32 {
    type Err = ParseHashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ParseHashError);
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| ParseHashError)?;
        Ok(Hash32(out))
    }
}

/// Position of a transaction in ledger order: blocks by height, then the
/// index inside the block. This is the temporal order of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxPos(pub u32);

impl TxPos {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Reference to one output: transaction position plus `vout` index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPoint {
    pub tx: TxPos,
    pub vout: u32,
}

/// Reference to one input: transaction position plus `vin` index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InPoint {
    pub tx: TxPos,
    pub vin: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub hash: Hash32,
    pub height: u64,
    /// Transaction hashes in block order. The position is an identifier.
    pub tx: Vec<Hash32>,
    first_tx: u32,
}

impl Block {
    /// Ledger positions of this block's transactions, in block order.
    pub fn tx_positions(&self) -> impl Iterator<Item = TxPos> + '_ {
        (self.first_tx..self.first_tx + self.tx.len() as u32).map(TxPos)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputRef {
    pub prev_txid: Hash32,
    pub prev_vout: u32,
    /// The output this input spends. Filled in by [`link`].
    pub source: Option<OutPoint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputRecord {
    /// `None` is the Null address: the reference client could not infer one.
    pub address: Option<String>,
    /// Locking script bytes.
    pub script: Vec<u8>,
    /// Satoshis. Reporting only; never used for graph construction.
    pub value: u64,
    /// The input spending this output. Filled in by [`link`]; `None` after
    /// linking means the output is in the UTXO set.
    pub spent_by: Option<InPoint>,
}

impl OutputRecord {
    pub fn is_unknown(&self) -> bool {
        self.address.is_none()
    }
}

/// Termination application: 0 for an output whose address is Null, 1
/// otherwise. Total over all outputs.
pub fn termination(out: &OutputRecord) -> u8 {
    u8::from(out.address.is_some())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tx {
    pub hash: Hash32,
    pub blockhash: Hash32,
    pub vin: Vec<InputRef>,
    pub vout: Vec<OutputRecord>,
    pub coinbase: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TioKind {
    Input,
    Output,
}

/// Unique transaction input/output identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tio {
    pub kind: TioKind,
    pub txid: Hash32,
    pub blockhash: Hash32,
    pub index: u32,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate block hash {hash}")]
    DuplicateBlockHash { line: usize, hash: Hash32 },
    #[error("line {line}: duplicate block height {height}")]
    DuplicateHeight { line: usize, height: u64 },
    #[error("dangling input: block {blockhash} tx {txid} vin {vin} spends {prev_txid}:{prev_vout}, which does not exist")]
    DanglingInput {
        blockhash: Hash32,
        txid: Hash32,
        vin: u32,
        prev_txid: Hash32,
        prev_vout: u32,
    },
    #[error("double spend of {prev_txid}:{prev_vout} by block {blockhash} tx {txid} vin {vin}")]
    DoubleSpend {
        blockhash: Hash32,
        txid: Hash32,
        vin: u32,
        prev_txid: Hash32,
        prev_vout: u32,
    },
    #[error("unresolvable TIO {0:?}")]
    Unresolvable(Tio),
    #[error("expected a TIO of kind {expected:?}, got {got:?}")]
    WrongKind { expected: TioKind, got: TioKind },
    #[error("funded input {input:?} does not come after spent output {output:?}")]
    TemporalOrder { output: Tio, input: Tio },
    #[error("ledger too large: more than u32::MAX transactions")]
    TooLarge,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ingested chain data. Blocks are in height order and transactions are
/// stored flat in ledger order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    blocks: Vec<Block>,
    txs: Vec<Tx>,
    index: HashMap<(Hash32, Hash32), TxPos>,
    warnings: Vec<String>,
}

impl Ledger {
    /// Builds a ledger from blocks, each carrying its transactions. Blocks
    /// are sorted by height; hashes and heights must be unique.
    pub fn from_blocks(
        blocks: impl IntoIterator<Item = (Hash32, u64, Vec<Tx>)>,
    ) -> Result<Self, LedgerError> {
        let mut staged: Vec<(usize, Hash32, u64, Vec<Tx>)> = blocks
            .into_iter()
            .enumerate()
            .map(|(i, (h, height, txs))| (i + 1, h, height, txs))
            .collect();
        let mut seen_hashes = HashMap::with_capacity(staged.len());
        for (line, hash, _, _) in &staged {
            if seen_hashes.insert(*hash, *line).is_some() {
                return Err(LedgerError::DuplicateBlockHash { line: *line, hash: *hash });
            }
        }
        staged.sort_by_key(|(_, _, height, _)| *height);

        let mut ledger = Ledger::default();
        let mut prev_height: Option<u64> = None;
        for (line, hash, height, txs) in staged {
            match prev_height {
                Some(p) if p == height => {
                    return Err(LedgerError::DuplicateHeight { line, height })
                }
                Some(p) if height != p + 1 => ledger
                    .warnings
                    .push(format!("non-contiguous heights: {p} followed by {height}")),
                None if height != 0 => ledger
                    .warnings
                    .push(format!("ledger starts at height {height}")),
                _ => {}
            }
            prev_height = Some(height);

            let first_tx = u32::try_from(ledger.txs.len()).map_err(|_| LedgerError::TooLarge)?;
            let mut hashes = Vec::with_capacity(txs.len());
            for mut tx in txs {
                tx.blockhash = hash;
                let pos = TxPos(u32::try_from(ledger.txs.len()).map_err(|_| LedgerError::TooLarge)?);
                ledger.index.insert((hash, tx.hash), pos);
                hashes.push(tx.hash);
                ledger.txs.push(tx);
            }
            ledger.blocks.push(Block {
                hash,
                height,
                tx: hashes,
                first_tx,
            });
        }
        for w in &ledger.warnings {
            log::warn!("{w}");
        }
        Ok(ledger)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn txs(&self) -> &[Tx] {
        &self.txs
    }

    pub fn tx(&self, pos: TxPos) -> &Tx {
        &self.txs[pos.index()]
    }

    pub fn output(&self, at: OutPoint) -> &OutputRecord {
        &self.txs[at.tx.index()].vout[at.vout as usize]
    }

    /// Non-fatal findings from ingest, such as gaps in block heights.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn input_count(&self) -> usize {
        self.txs.iter().map(|t| t.vin.len()).sum()
    }

    pub fn output_count(&self) -> usize {
        self.txs.iter().map(|t| t.vout.len()).sum()
    }

    /// Looks up a transaction by its `(blockhash, hash)` identity.
    pub fn position(&self, blockhash: &Hash32, txid: &Hash32) -> Option<TxPos> {
        self.index.get(&(*blockhash, *txid)).copied()
    }

    pub fn output_tio(&self, at: OutPoint) -> Tio {
        let tx = self.tx(at.tx);
        Tio {
            kind: TioKind::Output,
            txid: tx.hash,
            blockhash: tx.blockhash,
            index: at.vout,
        }
    }

    pub fn input_tio(&self, at: InPoint) -> Tio {
        let tx = self.tx(at.tx);
        Tio {
            kind: TioKind::Input,
            txid: tx.hash,
            blockhash: tx.blockhash,
            index: at.vin,
        }
    }

    /// Resolves a TIO to its transaction position, checking that the index
    /// exists within `vin` or `vout`.
    pub fn resolve(&self, tio: &Tio) -> Result<TxPos, LedgerError> {
        let pos = self
            .position(&tio.blockhash, &tio.txid)
            .ok_or(LedgerError::Unresolvable(*tio))?;
        let tx = self.tx(pos);
        let len = match tio.kind {
            TioKind::Input => tx.vin.len(),
            TioKind::Output => tx.vout.len(),
        };
        if (tio.index as usize) < len {
            Ok(pos)
        } else {
            Err(LedgerError::Unresolvable(*tio))
        }
    }
}

/// A ledger whose outputs carry their spending inputs. Immutable from here
/// on and safe to share across threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkedLedger(Ledger);

impl Deref for LinkedLedger {
    type Target = Ledger;

    fn deref(&self) -> &Ledger {
        &self.0
    }
}

impl LinkedLedger {
    pub fn into_inner(self) -> Ledger {
        self.0
    }

    /// Number of outputs never spent inside this ledger.
    pub fn utxo_count(&self) -> usize {
        self.txs
            .iter()
            .flat_map(|t| &t.vout)
            .filter(|o| o.spent_by.is_none())
            .count()
    }

    /// The input spending `out`, or `None` for a UTXO member.
    pub fn funded_input(&self, out: &Tio) -> Result<Option<Tio>, LedgerError> {
        if out.kind != TioKind::Output {
            return Err(LedgerError::WrongKind {
                expected: TioKind::Output,
                got: out.kind,
            });
        }
        let pos = self.resolve(out)?;
        let Some(spend) = self.tx(pos).vout[out.index as usize].spent_by else {
            return Ok(None);
        };
        let input = self.input_tio(spend);
        if spend.tx <= pos {
            return Err(LedgerError::TemporalOrder {
                output: *out,
                input,
            });
        }
        Ok(Some(input))
    }

    /// All outputs of the transaction containing `inp`, in `vout` order.
    pub fn funded_outputs(&self, inp: &Tio) -> Result<Vec<Tio>, LedgerError> {
        if inp.kind != TioKind::Input {
            return Err(LedgerError::WrongKind {
                expected: TioKind::Input,
                got: inp.kind,
            });
        }
        let pos = self.resolve(inp)?;
        Ok((0..self.tx(pos).vout.len() as u32)
            .map(|vout| self.output_tio(OutPoint { tx: pos, vout }))
            .collect())
    }
}

/// Populates every output's `spent_by` and every input's `source`.
///
/// A `(prev_txid, prev_vout)` reference resolves to the latest transaction
/// with that hash positioned before the spender; earlier duplicates stay
/// stored but cannot be spent.
pub fn link(mut ledger: Ledger) -> Result<LinkedLedger, LedgerError> {
    let mut latest: HashMap<Hash32, TxPos> = HashMap::with_capacity(ledger.txs.len());
    for pos in 0..ledger.txs.len() {
        let pos = TxPos(pos as u32);
        let n_inputs = ledger.txs[pos.index()].vin.len();
        for vin in 0..n_inputs {
            let (prev_txid, prev_vout) = {
                let i = &ledger.txs[pos.index()].vin[vin];
                (i.prev_txid, i.prev_vout)
            };
            let spender = &ledger.txs[pos.index()];
            let ctx = |double: bool| {
                let (blockhash, txid, vin) = (spender.blockhash, spender.hash, vin as u32);
                if double {
                    LedgerError::DoubleSpend { blockhash, txid, vin, prev_txid, prev_vout }
                } else {
                    LedgerError::DanglingInput { blockhash, txid, vin, prev_txid, prev_vout }
                }
            };
            let src_pos = *latest.get(&prev_txid).ok_or_else(|| ctx(false))?;
            let slot = ledger.txs[src_pos.index()]
                .vout
                .get(prev_vout as usize)
                .ok_or_else(|| ctx(false))?;
            if slot.spent_by.is_some() {
                return Err(ctx(true));
            }
            ledger.txs[src_pos.index()].vout[prev_vout as usize].spent_by = Some(InPoint {
                tx: pos,
                vin: vin as u32,
            });
            ledger.txs[pos.index()].vin[vin].source = Some(OutPoint {
                tx: src_pos,
                vout: prev_vout,
            });
        }
        latest.insert(ledger.txs[pos.index()].hash, pos);
    }
    Ok(LinkedLedger(ledger))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn h(n: u8) -> Hash32 {
        let mut b = [0u8; 32];
        b[31] = n;
        b[0] = 0xab;
        Hash32(b)
    }

    fn out(addr: Option<&str>) -> OutputRecord {
        OutputRecord {
            address: addr.map(str::to_owned),
            script: vec![0x51],
            value: 1000,
            spent_by: None,
        }
    }

    fn tx(hash: Hash32, vin: &[(Hash32, u32)], vout: Vec<OutputRecord>) -> Tx {
        Tx {
            hash,
            blockhash: Hash32::default(),
            vin: vin
                .iter()
                .map(|&(prev_txid, prev_vout)| InputRef {
                    prev_txid,
                    prev_vout,
                    source: None,
                })
                .collect(),
            vout,
            coinbase: vin.is_empty(),
        }
    }

    #[test]
    fn hash_parsing_rejects_uppercase_and_short() {
        let s = "ab".repeat(32);
        assert!(s.parse::<Hash32>().is_ok());
        assert!(s.to_uppercase().parse::<Hash32>().is_err());
        assert!("abcd".parse::<Hash32>().is_err());
    }

    #[test]
    fn single_spend_links_both_directions() {
        let a = tx(h(1), &[], vec![out(None)]);
        let b = tx(h(2), &[(h(1), 0)], vec![out(Some("x"))]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![a]), (h(101), 1, vec![b])]).unwrap();
        let linked = link(ledger).unwrap();
        let spent = linked.txs()[0].vout[0].spent_by.unwrap();
        assert_eq!(spent, InPoint { tx: TxPos(1), vin: 0 });
        assert_eq!(linked.txs()[1].vin[0].source, Some(OutPoint { tx: TxPos(0), vout: 0 }));
        assert_eq!(linked.utxo_count(), 1);
    }

    #[test]
    fn dangling_input_names_offender() {
        let b = tx(h(2), &[(h(9), 0)], vec![out(None)]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![b])]).unwrap();
        match link(ledger) {
            Err(LedgerError::DanglingInput { blockhash, txid, vin, .. }) => {
                assert_eq!((blockhash, txid, vin), (h(100), h(2), 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_vout_is_dangling() {
        let a = tx(h(1), &[], vec![out(None)]);
        let b = tx(h(2), &[(h(1), 3)], vec![out(None)]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![a, b])]).unwrap();
        assert!(matches!(link(ledger), Err(LedgerError::DanglingInput { .. })));
    }

    #[test]
    fn double_spend_is_fatal() {
        let a = tx(h(1), &[], vec![out(None)]);
        let b = tx(h(2), &[(h(1), 0)], vec![out(None)]);
        let c = tx(h(3), &[(h(1), 0)], vec![out(None)]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![a, b, c])]).unwrap();
        match link(ledger) {
            Err(LedgerError::DoubleSpend { txid, vin, .. }) => assert_eq!((txid, vin), (h(3), 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_hash_spends_latest_occurrence() {
        // Same hash in two blocks; a later spend resolves to the second copy.
        let first = tx(h(7), &[], vec![out(Some("a"))]);
        let second = tx(h(7), &[], vec![out(Some("b"))]);
        let spender = tx(h(8), &[(h(7), 0)], vec![out(None)]);
        let ledger = Ledger::from_blocks([
            (h(100), 0, vec![first]),
            (h(101), 1, vec![second]),
            (h(102), 2, vec![spender]),
        ])
        .unwrap();
        assert_eq!(ledger.txs().len(), 3);
        assert_eq!(ledger.position(&h(100), &h(7)), Some(TxPos(0)));
        assert_eq!(ledger.position(&h(101), &h(7)), Some(TxPos(1)));
        let linked = link(ledger).unwrap();
        assert!(linked.txs()[0].vout[0].spent_by.is_none());
        assert!(linked.txs()[1].vout[0].spent_by.is_some());
    }

    #[test]
    fn same_block_spend_respects_order() {
        let a = tx(h(1), &[], vec![out(None), out(Some("z"))]);
        let b = tx(h(2), &[(h(1), 0)], vec![out(Some("y"))]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![a, b])]).unwrap();
        let linked = link(ledger).unwrap();
        let o = linked.output_tio(OutPoint { tx: TxPos(0), vout: 0 });
        let i = linked.funded_input(&o).unwrap().unwrap();
        assert_eq!((i.txid, i.index, i.kind), (h(2), 0, TioKind::Input));
        let utxo = linked.output_tio(OutPoint { tx: TxPos(0), vout: 1 });
        assert_eq!(linked.funded_input(&utxo).unwrap(), None);
    }

    #[test]
    fn spend_before_creation_is_dangling() {
        let b = tx(h(2), &[(h(1), 0)], vec![out(None)]);
        let a = tx(h(1), &[], vec![out(None)]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![b, a])]).unwrap();
        assert!(matches!(link(ledger), Err(LedgerError::DanglingInput { .. })));
    }

    #[test]
    fn funded_outputs_follow_vout_order() {
        let a = tx(h(1), &[], vec![out(None), out(None)]);
        let b = tx(h(2), &[(h(1), 0), (h(1), 1)], vec![out(Some("p")), out(None), out(Some("q"))]);
        let ledger = Ledger::from_blocks([(h(100), 0, vec![a, b])]).unwrap();
        let linked = link(ledger).unwrap();
        let in0 = linked.input_tio(InPoint { tx: TxPos(1), vin: 0 });
        let in1 = linked.input_tio(InPoint { tx: TxPos(1), vin: 1 });
        let outs = linked.funded_outputs(&in0).unwrap();
        assert_eq!(outs.iter().map(|t| t.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(outs, linked.funded_outputs(&in1).unwrap());
        assert!(linked.funded_outputs(&outs[0]).is_err());
        let bogus = Tio { index: 9, ..in0 };
        assert!(matches!(linked.funded_outputs(&bogus), Err(LedgerError::Unresolvable(_))));
    }

    #[test]
    fn termination_is_zero_only_for_null_address() {
        assert_eq!(termination(&out(Some("1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa"))), 1);
        let mut weird = out(None);
        weird.script = vec![0x6a, 0x04, 1, 2, 3, 4];
        assert_eq!(termination(&weird), 0);
    }

    #[test]
    fn duplicate_height_rejected_and_gap_warned() {
        let a = tx(h(1), &[], vec![out(None)]);
        let b = tx(h(2), &[], vec![out(None)]);
        assert!(matches!(
            Ledger::from_blocks([(h(100), 3, vec![a.clone()]), (h(101), 3, vec![b.clone()])]),
            Err(LedgerError::DuplicateHeight { .. })
        ));
        let l = Ledger::from_blocks([(h(100), 0, vec![a]), (h(101), 5, vec![b])]).unwrap();
        assert_eq!(l.warnings().len(), 1);
    }
}
