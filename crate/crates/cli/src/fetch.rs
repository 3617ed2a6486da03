//! Block fetcher over the node's JSON-RPC interface (`getblockhash`,
//! `getblock` at verbosity 2), writing interchange lines.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use base64::Engine;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::pipeline::progress;

pub const URL_ENV: &str = "NODE_RPC_URL";
pub const AUTH_ENV: &str = "NODE_RPC_AUTH";

pub struct RpcClient {
    url: String,
    auth: Option<String>,
    agent: ureq::Agent,
}

impl RpcClient {
    /// `auth` is `user:password`.
    pub fn new(url: &str, auth: Option<&str>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        RpcClient {
            url: url.to_owned(),
            auth: auth.map(|a| {
                format!("Basic {}", base64::engine::general_purpose::STANDARD.encode(a))
            }),
            agent,
        }
    }

    pub fn from_env(url: Option<&str>) -> CliResult<Self> {
        let url = match url {
            Some(u) => u.to_owned(),
            None => std::env::var(URL_ENV).map_err(|_| {
                CliError::input(anyhow!("no node URL: pass --node-url or set {URL_ENV}"))
            })?,
        };
        let auth = std::env::var(AUTH_ENV).ok();
        Ok(Self::new(&url, auth.as_deref()))
    }

    pub fn call(&self, method: &str, params: Value) -> anyhow::Result<Value> {
        let body = json!({"jsonrpc": "1.0", "id": "unktx", "method": method, "params": params});
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(a) = &self.auth {
            req = req.header("Authorization", a);
        }
        let mut resp = req.send_json(&body).with_context(|| format!("{method}: request failed"))?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            bail!("{method}: authentication failed (HTTP {status})");
        }
        let v: Value = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_json()
            .with_context(|| format!("{method}: HTTP {status}, unreadable body"))?;
        if let Some(e) = v.get("error").filter(|e| !e.is_null()) {
            bail!("{method}: node error {e}");
        }
        if status != 200 {
            bail!("{method}: HTTP {status}");
        }
        v.get("result")
            .cloned()
            .ok_or_else(|| anyhow!("{method}: response has no result"))
    }

    pub fn block_at(&self, height: u64) -> anyhow::Result<Value> {
        let hash = self.call("getblockhash", json!([height]))?;
        self.call("getblock", json!([hash, 2]))
    }
}

#[derive(Serialize)]
struct BlockLine {
    hash: String,
    height: u64,
    tx: Vec<TxLine>,
}

#[derive(Serialize)]
struct TxLine {
    hash: String,
    coinbase: bool,
    vin: Vec<InputLine>,
    vout: Vec<OutputLine>,
}

#[derive(Serialize)]
struct InputLine {
    prev_txid: String,
    prev_vout: u32,
}

#[derive(Serialize)]
struct OutputLine {
    address: Option<String>,
    script: String,
    value: u64,
}

fn str_field<'a>(v: &'a Value, k: &str) -> anyhow::Result<&'a str> {
    v.get(k)
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("missing string field `{k}`"))
}

/// Amount in BTC (float) to satoshis.
fn satoshis(v: &Value) -> anyhow::Result<u64> {
    let btc = v.as_f64().ok_or_else(|| anyhow!("bad value {v}"))?;
    if !(0.0..=21e6).contains(&btc) {
        bail!("value out of range: {btc}");
    }
    Ok((btc * 1e8).round() as u64)
}

/// Converts a verbosity-2 `getblock` result to one interchange line. A
/// missing `address` (and no single-entry `addresses`) means Null.
pub fn interchange_line(block: &Value, height: u64) -> anyhow::Result<String> {
    let txs = block
        .get("tx")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("block has no `tx` array"))?;
    let mut out = Vec::with_capacity(txs.len());
    for t in txs {
        let vin_raw = t.get("vin").and_then(Value::as_array).ok_or_else(|| anyhow!("tx without vin"))?;
        let coinbase = vin_raw.iter().any(|i| i.get("coinbase").is_some());
        let mut vin = Vec::new();
        if !coinbase {
            for i in vin_raw {
                vin.push(InputLine {
                    prev_txid: str_field(i, "txid")?.to_ascii_lowercase(),
                    prev_vout: i
                        .get("vout")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| anyhow!("input without vout"))? as u32,
                });
            }
        }
        let mut vout = Vec::new();
        for o in t.get("vout").and_then(Value::as_array).ok_or_else(|| anyhow!("tx without vout"))? {
            let spk = o.get("scriptPubKey").ok_or_else(|| anyhow!("output without scriptPubKey"))?;
            let address = spk
                .get("address")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .or_else(|| match spk.get("addresses").and_then(Value::as_array) {
                    Some(a) if a.len() == 1 => a[0].as_str().map(str::to_owned),
                    _ => None,
                });
            vout.push(OutputLine {
                address,
                script: str_field(spk, "hex")?.to_ascii_lowercase(),
                value: satoshis(o.get("value").unwrap_or(&Value::Null))?,
            });
        }
        out.push(TxLine {
            hash: str_field(t, "txid")?.to_ascii_lowercase(),
            coinbase,
            vin,
            vout,
        });
    }
    let line = BlockLine {
        hash: str_field(block, "hash")?.to_ascii_lowercase(),
        height,
        tx: out,
    };
    Ok(serde_json::to_string(&line)?)
}

/// Height of the last complete line in an existing output file. A torn
/// final line is cut off.
fn resume_point(path: &Path) -> CliResult<Option<u64>> {
    if !path.exists() {
        return Ok(None);
    }
    let f = fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(CliError::Input)?;
    let mut good_len = 0u64;
    let mut last = None;
    let mut r = BufReader::new(f);
    let mut line = String::new();
    loop {
        line.clear();
        let k = r.read_line(&mut line).map_err(CliError::input)?;
        if k == 0 || !line.ends_with('\n') {
            break;
        }
        let Some(h) = serde_json::from_str::<Value>(&line)
            .ok()
            .and_then(|v| v.get("height").and_then(Value::as_u64))
        else {
            break;
        };
        last = Some(h);
        good_len += k as u64;
    }
    let f = OpenOptions::new().write(true).open(path).map_err(CliError::input)?;
    f.set_len(good_len).map_err(CliError::input)?;
    Ok(last)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchOutcome {
    pub written: u64,
    pub last_good: Option<u64>,
}

/// Appends blocks `from..=to` not already in `out`. Each line is flushed
/// before the next request, so an interrupted run resumes cleanly.
pub fn fetch(client: &RpcClient, from: u64, to: u64, out: &Path) -> CliResult<FetchOutcome> {
    if from > to {
        return Err(CliError::input(anyhow!("empty height range {from}..={to}")));
    }
    let mut last_good = resume_point(out)?;
    let start = match last_good {
        Some(h) if h >= from => h + 1,
        _ => from,
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .with_context(|| format!("opening {}", out.display()))
        .map_err(CliError::Input)?;
    let total = (to + 1 - from) as usize;
    let mut written = 0;
    for h in start..=to {
        let line = client
            .block_at(h)
            .and_then(|b| interchange_line(&b, h))
            .map_err(|e| {
                let at = last_good.map_or("none".to_owned(), |g| g.to_string());
                CliError::Remote(e.context(format!("height {h} (last good height {at})")))
            })?;
        writeln!(file, "{line}")
            .and_then(|_| file.flush())
            .map_err(|e| CliError::Remote(anyhow!(e).context(format!("writing height {h}"))))?;
        written += 1;
        last_good = Some(h);
        progress("fetch", (h + 1 - from) as usize, total);
    }
    Ok(FetchOutcome { written, last_good })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> Value {
        json!({
            "hash": "AB".repeat(32),
            "height": 3,
            "tx": [
                {"txid": "01".repeat(32), "vin": [{"coinbase": "04ffff", "sequence": 1}],
                 "vout": [{"value": 50.0, "n": 0, "scriptPubKey": {"hex": "51", "address": "1abc"}}]},
                {"txid": "02".repeat(32), "vin": [{"txid": "01".repeat(32), "vout": 0}],
                 "vout": [{"value": 0.00000001, "n": 0, "scriptPubKey": {"hex": "6a"}},
                          {"value": 1.5, "n": 1, "scriptPubKey": {"hex": "76", "addresses": ["1x"]}}]}
            ]
        })
    }

    #[test]
    fn converts_verbose_block() {
        let line = interchange_line(&block(), 3).unwrap();
        let l = unktx_core::ledger::ingest_reader(format!("{line}\n").as_bytes()).unwrap();
        assert_eq!(l.txs().len(), 2);
        assert!(l.txs()[0].coinbase);
        assert_eq!(l.txs()[0].vout[0].value, 5_000_000_000);
        assert_eq!(l.txs()[1].vout[0].address, None);
        assert_eq!(l.txs()[1].vout[0].value, 1);
        assert_eq!(l.txs()[1].vout[1].address.as_deref(), Some("1x"));
    }

    #[test]
    fn torn_tail_is_cut() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        fs::write(&p, "{\"height\":0}\n{\"height\":1}\n{\"hei").unwrap();
        assert_eq!(resume_point(&p).unwrap(), Some(1));
        assert_eq!(fs::read_to_string(&p).unwrap(), "{\"height\":0}\n{\"height\":1}\n");
    }
}
