//! Locking-script disassembly and regex rule matching over the opcode text.
//!
//! Text form: opcodes by name separated by single spaces, pushed data as
//! lowercase hex. `OP_TRUE` is rendered as `OP_1`.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

fn opcode_name(op: u8) -> Option<&'static str> {
    Some(match op {
        0x00 => "OP_0",
        0x4f => "OP_1NEGATE",
        0x50 => "OP_RESERVED",
        0x51 => "OP_1",
        0x52 => "OP_2",
        0x53 => "OP_3",
        0x54 => "OP_4",
        0x55 => "OP_5",
        0x56 => "OP_6",
        0x57 => "OP_7",
        0x58 => "OP_8",
        0x59 => "OP_9",
        0x5a => "OP_10",
        0x5b => "OP_11",
        0x5c => "OP_12",
        0x5d => "OP_13",
        0x5e => "OP_14",
        0x5f => "OP_15",
        0x60 => "OP_16",
        0x61 => "OP_NOP",
        0x62 => "OP_VER",
        0x63 => "OP_IF",
        0x64 => "OP_NOTIF",
        0x65 => "OP_VERIF",
        0x66 => "OP_VERNOTIF",
        0x67 => "OP_ELSE",
        0x68 => "OP_ENDIF",
        0x69 => "OP_VERIFY",
        0x6a => "OP_RETURN",
        0x6b => "OP_TOALTSTACK",
        0x6c => "OP_FROMALTSTACK",
        0x6d => "OP_2DROP",
        0x6e => "OP_2DUP",
        0x6f => "OP_3DUP",
        0x70 => "OP_2OVER",
        0x71 => "OP_2ROT",
        0x72 => "OP_2SWAP",
        0x73 => "OP_IFDUP",
        0x74 => "OP_DEPTH",
        0x75 => "OP_DROP",
        0x76 => "OP_DUP",
        0x77 => "OP_NIP",
        0x78 => "OP_OVER",
        0x79 => "OP_PICK",
        0x7a => "OP_ROLL",
        0x7b => "OP_ROT",
        0x7c => "OP_SWAP",
        0x7d => "OP_TUCK",
        0x7e => "OP_CAT",
        0x7f => "OP_SUBSTR",
        0x80 => "OP_LEFT",
        0x81 => "OP_RIGHT",
        0x82 => "OP_SIZE",
        0x83 => "OP_INVERT",
        0x84 => "OP_AND",
        0x85 => "OP_OR",
        0x86 => "OP_XOR",
        0x87 => "OP_EQUAL",
        0x88 => "OP_EQUALVERIFY",
        0x89 => "OP_RESERVED1",
        0x8a => "OP_RESERVED2",
        0x8b => "OP_1ADD",
        0x8c => "OP_1SUB",
        0x8d => "OP_2MUL",
        0x8e => "OP_2DIV",
        0x8f => "OP_NEGATE",
        0x90 => "OP_ABS",
        0x91 => "OP_NOT",
        0x92 => "OP_0NOTEQUAL",
        0x93 => "OP_ADD",
        0x94 => "OP_SUB",
        0x95 => "OP_MUL",
        0x96 => "OP_DIV",
        0x97 => "OP_MOD",
        0x98 => "OP_LSHIFT",
        0x99 => "OP_RSHIFT",
        0x9a => "OP_BOOLAND",
        0x9b => "OP_BOOLOR",
        0x9c => "OP_NUMEQUAL",
        0x9d => "OP_NUMEQUALVERIFY",
        0x9e => "OP_NUMNOTEQUAL",
        0x9f => "OP_LESSTHAN",
        0xa0 => "OP_GREATERTHAN",
        0xa1 => "OP_LESSTHANOREQUAL",
        0xa2 => "OP_GREATERTHANOREQUAL",
        0xa3 => "OP_MIN",
        0xa4 => "OP_MAX",
        0xa5 => "OP_WITHIN",
        0xa6 => "OP_RIPEMD160",
        0xa7 => "OP_SHA1",
        0xa8 => "OP_SHA256",
        0xa9 => "OP_HASH160",
        0xaa => "OP_HASH256",
        0xab => "OP_CODESEPARATOR",
        0xac => "OP_CHECKSIG",
        0xad => "OP_CHECKSIGVERIFY",
        0xae => "OP_CHECKMULTISIG",
        0xaf => "OP_CHECKMULTISIGVERIFY",
        0xb0 => "OP_NOP1",
        0xb1 => "OP_CHECKLOCKTIMEVERIFY",
        0xb2 => "OP_CHECKSEQUENCEVERIFY",
        0xb3 => "OP_NOP4",
        0xb4 => "OP_NOP5",
        0xb5 => "OP_NOP6",
        0xb6 => "OP_NOP7",
        0xb7 => "OP_NOP8",
        0xb8 => "OP_NOP9",
        0xb9 => "OP_NOP10",
        0xba => "OP_CHECKSIGADD",
        _ => return None,
    })
}

/// Renders a script as opcode text. A push that runs past the end of the
/// script is rendered as `[error]` and ends the disassembly.
pub fn disassemble(script: &[u8]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < script.len() {
        let op = script[i];
        i += 1;
        let len = match op {
            0x01..=0x4b => Some(op as usize),
            0x4c => read_len(script, &mut i, 1),
            0x4d => read_len(script, &mut i, 2),
            0x4e => read_len(script, &mut i, 4),
            _ => {
                parts.push(match opcode_name(op) {
                    Some(n) => n.to_owned(),
                    None => format!("OP_UNKNOWN_{op:02x}"),
                });
                continue;
            }
        };
        match len {
            Some(n) if i + n <= script.len() => {
                parts.push(hex::encode(&script[i..i + n]));
                i += n;
            }
            _ => {
                parts.push("[error]".to_owned());
                break;
            }
        }
    }
    parts.join(" ")
}

fn read_len(script: &[u8], i: &mut usize, width: usize) -> Option<usize> {
    let bytes = script.get(*i..*i + width)?;
    *i += width;
    Some(bytes.iter().rev().fold(0usize, |acc, &b| (acc << 8) | b as usize))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub name: String,
    pub pattern: String,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("duplicate rule name {0:?}")]
    DuplicateName(String),
    #[error("rule {name:?}: {source}")]
    BadPattern { name: String, source: regex::Error },
}

#[derive(Clone, Debug)]
struct Rule {
    name: String,
    regex: Regex,
}

/// Ordered, named regex rules over [`disassemble`] output. The first rule
/// that matches wins.
#[derive(Clone, Debug)]
pub struct ScriptMatcher {
    rules: Vec<Rule>,
}

impl ScriptMatcher {
    pub fn new(specs: impl IntoIterator<Item = RuleSpec>) -> Result<Self, ScriptError> {
        let mut rules: Vec<Rule> = Vec::new();
        for s in specs {
            if rules.iter().any(|r| r.name == s.name) {
                return Err(ScriptError::DuplicateName(s.name));
            }
            let regex = Regex::new(&s.pattern).map_err(|source| ScriptError::BadPattern {
                name: s.name.clone(),
                source,
            })?;
            rules.push(Rule { name: s.name, regex });
        }
        Ok(ScriptMatcher { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn specs(&self) -> Vec<RuleSpec> {
        self.rules
            .iter()
            .map(|r| RuleSpec {
                name: r.name.clone(),
                pattern: r.regex.as_str().to_owned(),
            })
            .collect()
    }

    pub fn match_text(&self, text: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.regex.is_match(text))
            .map(|r| r.name.as_str())
    }

    /// Name of the first rule matching the disassembled script.
    pub fn match_script(&self, script: &[u8]) -> Option<&str> {
        self.match_text(&disassemble(script))
    }
}

fn rule(name: &str, pattern: &str) -> RuleSpec {
    RuleSpec {
        name: name.to_owned(),
        pattern: pattern.to_owned(),
    }
}

/// Scripts spendable without any secret: empty, or a lone `OP_TRUE`.
pub fn default_trivial_matcher() -> ScriptMatcher {
    ScriptMatcher::new([rule("EMPTY", "^$"), rule("OP_TRUE", "^OP_1$")])
        .expect("built-in rules compile")
}

/// Root-script filters for patterns with a known, uninteresting meaning.
pub fn default_matcher() -> ScriptMatcher {
    ScriptMatcher::new([
        // P2PKH followed by one or more OP_NOP, used to exercise the opcode.
        rule(
            "P2PKH_NOP",
            r"^OP_DUP OP_HASH160 [0-9a-f]{40} OP_EQUALVERIFY OP_CHECKSIG( OP_NOP)+$",
        ),
        // OP_MIN then OP_EQUAL, with at most one operand between: the
        // unlocking side just supplies matching numbers.
        rule("OP_MIN_OP_EQUAL", r"^OP_MIN( \S+)? OP_EQUAL$"),
        // Hash puzzle: reveal a preimage of the pushed digest.
        rule(
            "PAY_TO_HASH",
            r"^OP_(SHA256|HASH256|HASH160|RIPEMD160|SHA1) [0-9a-f]+ OP_EQUAL$",
        ),
        // Whole script wrapped in a conditional.
        rule("OP_IF", r"^OP_IF .* OP_ENDIF$"),
        // Bare OP_CHECKMULTISIG, or a 0-of-n multisig; both unlock with no
        // signature.
        rule(
            "OP_CHECKMULTISIG_TRIVIAL",
            r"^(?:OP_0(?: [0-9a-f]+)* OP_(?:[0-9]|1[0-6]) )?OP_CHECKMULTISIG$",
        ),
    ])
    .expect("built-in rules compile")
}
