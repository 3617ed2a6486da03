//! Newline-delimited JSON ledger format, one block per line:
//!
//! ```text
//! {"hash": hex64, "height": int, "tx": [{"hash": hex64, "coinbase": bool,
//!   "vin": [{"prev_txid": hex64, "prev_vout": int}],
//!   "vout": [{"address": string|null, "script": hexstring, "value": int}]}]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hash32, InputRef, Ledger, LedgerError, OutputRecord, Tx};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BlockLine {
    pub hash: String,
    pub height: u64,
    pub tx: Vec<TxLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TxLine {
    pub hash: String,
    pub coinbase: bool,
    pub vin: Vec<InputLine>,
    pub vout: Vec<OutputLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct InputLine {
    pub prev_txid: String,
    pub prev_vout: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct OutputLine {
    pub address: Option<String>,
    pub script: String,
    pub value: u64,
}

fn schema(line: usize, message: impl Into<String>) -> LedgerError {
    LedgerError::Schema {
        line,
        message: message.into(),
    }
}

fn parse_hash(line: usize, field: &str, s: &str) -> Result<Hash32, LedgerError> {
    s.parse()
        .map_err(|e| schema(line, format!("field `{field}`: {e}, got {s:?}")))
}

fn decode_block(line: usize, raw: BlockLine) -> Result<(Hash32, u64, Vec<Tx>), LedgerError> {
    let hash = parse_hash(line, "hash", &raw.hash)?;
    let mut txs = Vec::with_capacity(raw.tx.len());
    for (ti, t) in raw.tx.into_iter().enumerate() {
        let txhash = parse_hash(line, &format!("tx[{ti}].hash"), &t.hash)?;
        if t.coinbase != t.vin.is_empty() {
            return Err(schema(
                line,
                format!("field `tx[{ti}].coinbase`: must be true exactly when `vin` is empty"),
            ));
        }
        let vin = t
            .vin
            .into_iter()
            .enumerate()
            .map(|(ii, i)| {
                Ok(InputRef {
                    prev_txid: parse_hash(line, &format!("tx[{ti}].vin[{ii}].prev_txid"), &i.prev_txid)?,
                    prev_vout: i.prev_vout,
                    source: None,
                })
            })
            .collect::<Result<Vec<_>, LedgerError>>()?;
        let vout = t
            .vout
            .into_iter()
            .enumerate()
            .map(|(oi, o)| {
                if o.script.bytes().any(|b| b.is_ascii_uppercase()) {
                    return Err(schema(line, format!("field `tx[{ti}].vout[{oi}].script`: hex must be lowercase")));
                }
                let script = hex::decode(&o.script).map_err(|e| {
                    schema(line, format!("field `tx[{ti}].vout[{oi}].script`: {e}"))
                })?;
                Ok(OutputRecord {
                    address: o.address,
                    script,
                    value: o.value,
                    spent_by: None,
                })
            })
            .collect::<Result<Vec<_>, LedgerError>>()?;
        txs.push(Tx {
            hash: txhash,
            blockhash: hash,
            vin,
            vout,
            coinbase: t.coinbase,
        });
    }
    Ok((hash, raw.height, txs))
}

/// Reads a ledger from any reader producing the interchange format.
pub fn ingest_reader(reader: impl Read) -> Result<Ledger, LedgerError> {
    let mut blocks = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: BlockLine =
            serde_json::from_str(&line).map_err(|e| schema(lineno, e.to_string()))?;
        blocks.push(decode_block(lineno, raw)?);
    }
    Ledger::from_blocks(blocks)
}

/// Reads a ledger file in the interchange format.
pub fn ingest(path: impl AsRef<Path>) -> Result<Ledger, LedgerError> {
    ingest_reader(File::open(path)?)
}

pub(crate) fn encode_block(ledger: &Ledger, b: &super::Block) -> BlockLine {
    BlockLine {
        hash: b.hash.to_hex(),
        height: b.height,
        tx: b
            .tx_positions()
            .map(|pos| {
                let t = ledger.tx(pos);
                TxLine {
                    hash: t.hash.to_hex(),
                    coinbase: t.coinbase,
                    vin: t
                        .vin
                        .iter()
                        .map(|i| InputLine {
                            prev_txid: i.prev_txid.to_hex(),
                            prev_vout: i.prev_vout,
                        })
                        .collect(),
                    vout: t
                        .vout
                        .iter()
                        .map(|o| OutputLine {
                            address: o.address.clone(),
                            script: hex::encode(&o.script),
                            value: o.value,
                        })
                        .collect(),
                }
            })
            .collect(),
    }
}

/// Writes a ledger in the interchange format. Linkage is not serialized.
pub fn write_writer(ledger: &Ledger, writer: impl Write) -> Result<(), LedgerError> {
    let mut w = BufWriter::new(writer);
    for b in ledger.blocks() {
        serde_json::to_writer(&mut w, &encode_block(ledger, b)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write(ledger: &Ledger, path: impl AsRef<Path>) -> Result<(), LedgerError> {
    write_writer(ledger, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H1: &str = "1111111111111111111111111111111111111111111111111111111111111111";
    const H2: &str = "2222222222222222222222222222222222222222222222222222222222222222";

    fn coinbase_block(hash: &str, height: u64, txhash: &str) -> String {
        format!(
            r#"{{"hash":"{hash}","height":{height},"tx":[{{"hash":"{txhash}","coinbase":true,"vin":[],"vout":[{{"address":"1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa","script":"51","value":5000000000}}]}}]}}"#
        )
    }

    #[test]
    fn minimal_ledger() {
        let l = ingest_reader(coinbase_block(H1, 0, H2).as_bytes()).unwrap();
        assert_eq!(l.blocks().len(), 1);
        assert_eq!(l.txs().len(), 1);
        assert_eq!(l.input_count(), 0);
        assert_eq!(l.output_count(), 1);
    }

    #[test]
    fn duplicated_tx_hash_in_two_blocks_is_kept() {
        // Blocks 91812 and 91842 share a coinbase hash on the real chain.
        let dup = "d5d27987d2a3dfc724e359870c6644b40e497bdc0589a033220fe15429d88599";
        let text = format!("{}\n{}\n", coinbase_block(H1, 91812, dup), coinbase_block(H2, 91813, dup));
        let l = ingest_reader(text.as_bytes()).unwrap();
        assert_eq!(l.txs().len(), 2);
        let txid = dup.parse().unwrap();
        assert_ne!(l.position(&H1.parse().unwrap(), &txid), l.position(&H2.parse().unwrap(), &txid));
    }

    #[test]
    fn schema_error_names_line_and_field() {
        let mut lines: Vec<String> = (0..6)
            .map(|i| coinbase_block(&format!("{:064x}", i + 1), i, &format!("{:064x}", 100 + i)))
            .collect();
        lines.push(format!(
            r#"{{"hash":"{:064x}","height":6,"tx":[{{"hash":"{:064x}","coinbase":true,"vin":[]}}]}}"#,
            7, 106
        ));
        let err = ingest_reader(lines.join("\n").as_bytes()).unwrap_err();
        match err {
            LedgerError::Schema { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("vout"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coinbase_flag_must_match_vin() {
        let text = format!(
            r#"{{"hash":"{H1}","height":0,"tx":[{{"hash":"{H2}","coinbase":false,"vin":[],"vout":[]}}]}}"#
        );
        assert!(matches!(ingest_reader(text.as_bytes()), Err(LedgerError::Schema { line: 1, .. })));
    }

    #[test]
    fn uppercase_hex_rejected() {
        let text = coinbase_block(&H1.replace('1', "A"), 0, H2);
        assert!(matches!(ingest_reader(text.as_bytes()), Err(LedgerError::Schema { .. })));
    }

    #[test]
    fn duplicate_block_hash_rejected() {
        let text = format!("{}\n{}\n", coinbase_block(H1, 0, H2), coinbase_block(H1, 1, H2));
        assert!(matches!(
            ingest_reader(text.as_bytes()),
            Err(LedgerError::DuplicateBlockHash { line: 2, .. })
        ));
    }

    #[test]
    fn blocks_sorted_by_height_and_rewritten_identically() {
        let text = format!("{}\n{}\n", coinbase_block(H2, 1, H1), coinbase_block(H1, 0, H2));
        let l = ingest_reader(text.as_bytes()).unwrap();
        assert_eq!(l.blocks()[0].height, 0);
        let mut out = Vec::new();
        write_writer(&l, &mut out).unwrap();
        let expected = format!("{}\n{}\n", coinbase_block(H1, 0, H2), coinbase_block(H2, 1, H1));
        assert_eq!(String::from_utf8(out).unwrap(), expected);
    }
}
