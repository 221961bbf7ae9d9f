// SPDX-License-Identifier: Apache-2.0

//! The `mra` command line.
//!
//! Exit codes: 0 success or accept, 1 verification reject, 2 usage or
//! file error, 3 invalid parameters, 4 audit formula mismatch, 5 budget
//! exceeded. Errors print one JSON line to stderr:
//! `{"error":"<kind>","exit":<code>,"message":"..."}`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::census::{self, AuditOptions, Census, CensusError, CheckSelector, Coalition, Model, Scope, Value};
use crate::field::{FieldElement, FieldSpec};
use crate::linalg::{Matrix, Strictness, Subspace, SubspaceRecord};
use crate::mracode::{EncodingRule, ReceiverKey, SchemeContext, SchemeError, SchemeParams};
use crate::rng;

pub const FILE_FORMAT: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARAMS: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_BUDGET: i32 = 5;

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    exit: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            exit: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError {
            kind: "io",
            exit: EXIT_USAGE,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn format(message: impl Into<String>) -> Self {
        CliError {
            kind: "format",
            exit: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        let (kind, exit) = match &e {
            SchemeError::ConstraintViolation(_) | SchemeError::NonBinaryField(_) | SchemeError::Field(_) => {
                ("invalid-params", EXIT_PARAMS)
            }
            SchemeError::ReceiverOutOfRange { .. } => ("usage", EXIT_USAGE),
            _ => ("format", EXIT_USAGE),
        };
        CliError {
            kind,
            exit,
            message: e.to_string(),
        }
    }
}

impl From<CensusError> for CliError {
    fn from(e: CensusError) -> Self {
        match e {
            CensusError::BudgetExceeded { .. } => CliError {
                kind: "budget",
                exit: EXIT_BUDGET,
                message: e.to_string(),
            },
            CensusError::Scheme(s) => s.into(),
            other => CliError::usage(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mra", version, about = "Multi-receiver authentication over pseudo-symplectic geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print dimensions, family sizes and closed-form probabilities.
    Params {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an encoding rule and derive every receiver key.
    Keygen {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = rng::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write receiver_<i>.json key files into this directory.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Draw a source state and broadcast it under the sender's rule.
    Send {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long, default_value_t = rng::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Check a message against one receiver's key (exit 0 accept, 1 reject).
    Verify {
        #[arg(long)]
        msg: PathBuf,
        /// A key bundle (with --receiver) or a single receiver key file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        receiver: Option<usize>,
        #[arg(long)]
        lenient: bool,
    },
    /// Recover the source state from a message.
    Decode {
        #[arg(long)]
        msg: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Run the enumeration checks and write a report (exit 4 on mismatch).
    Audit {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// `all` or a comma-separated list of check ids.
        #[arg(long, default_value = "all")]
        checks: String,
        /// Coalition size for the per-coalition checks.
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the check table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exact attack probabilities with witnesses.
    Attack {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1)]
        target: usize,
        /// Comma-separated receiver indices.
        #[arg(long, value_delimiter = ',', required = true)]
        coalition: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ModelArg::Both)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = ScopeArg::Canonical)]
        scope: ScopeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate one family.
    Census {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        family: Family,
        /// Receiver index for `--family eR`.
        #[arg(long, default_value_t = 1)]
        receiver: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    /// Field order, a power of two.
    #[arg(long, required_unless_present = "params_file")]
    q: Option<u64>,
    #[arg(long, required_unless_present = "params_file")]
    nu: Option<usize>,
    #[arg(long, required_unless_present = "params_file")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "params_file")]
    r: Option<usize>,
    /// Reduction polynomial overriding the default for GF(q).
    #[arg(long)]
    poly: Option<u32>,
    /// JSON file `{"field":{"k":..,"poly":..},"nu":..,"n":..,"r":..}`.
    #[arg(long = "params", conflicts_with_all = ["q", "nu", "n", "r", "poly"])]
    params_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, env = "MRA_THREADS", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    threads: u32,
    #[arg(long, default_value_t = census::DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModelArg {
    A,
    B,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScopeArg {
    Canonical,
    Full,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    #[value(name = "eT")]
    ET,
    #[value(name = "eR")]
    ER,
    #[value(name = "S")]
    S,
    #[value(name = "M")]
    M,
    #[value(name = "type-count")]
    TypeCount,
}

impl ParamArgs {
    fn resolve(&self) -> Result<SchemeParams, CliError> {
        if let Some(path) = &self.params_file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            return serde_json::from_str(&text).map_err(|e| {
                // constraint violations surface through serde as messages
                let msg = e.to_string();
                if msg.contains("constraint") || msg.contains("characteristic") || msg.contains("degree") || msg.contains("reducible") {
                    CliError {
                        kind: "invalid-params",
                        exit: EXIT_PARAMS,
                        message: format!("{}: {msg}", path.display()),
                    }
                } else {
                    CliError::format(format!("{}: {msg}", path.display()))
                }
            });
        }
        let (q, nu, n, r) = (self.q.unwrap(), self.nu.unwrap(), self.n.unwrap(), self.r.unwrap());
        let field = match self.poly {
            None => FieldSpec::from_order(q).map_err(|_| SchemeError::NonBinaryField(q))?,
            Some(poly) => {
                if !q.is_power_of_two() || q < 2 {
                    return Err(SchemeError::NonBinaryField(q).into());
                }
                FieldSpec::with_poly(q.trailing_zeros(), poly).map_err(SchemeError::from)?
            }
        };
        Ok(SchemeParams::new(field, nu, n, r)?)
    }
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

#[derive(Serialize, Deserialize, Debug)]
struct SenderRecord {
    role: String,
    #[serde(rename = "R2")]
    r2: Vec<Vec<u32>>,
    #[serde(rename = "R5")]
    r5: Vec<u32>,
    subspace: SubspaceRecord,
}

#[derive(Serialize, Deserialize, Debug)]
struct ReceiverRecord {
    role: String,
    index: usize,
    subspace: SubspaceRecord,
}

#[derive(Serialize, Deserialize, Debug)]
struct KeyBundle {
    format: u32,
    params: SchemeParams,
    sender: SenderRecord,
    receivers: Vec<ReceiverRecord>,
}

#[derive(Serialize, Deserialize, Debug)]
struct ReceiverFile {
    format: u32,
    params: SchemeParams,
    role: String,
    index: usize,
    subspace: SubspaceRecord,
}

#[derive(Serialize, Deserialize, Debug)]
struct MessageFile {
    format: u32,
    params: SchemeParams,
    subspace: SubspaceRecord,
}

fn check_format(format: u32) -> Result<(), CliError> {
    if format != FILE_FORMAT {
        return Err(CliError::format(format!("unsupported format {format}, expected {FILE_FORMAT}")));
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

/// Writes `contents` through a temporary file in the target directory.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn subspace(ctx: &SchemeContext, rec: &SubspaceRecord, lenient: bool) -> Result<Subspace, CliError> {
    Subspace::from_record(*ctx.field(), rec, strictness(lenient)).map_err(|e| CliError::format(e.to_string()))
}

fn load_sender(ctx: &SchemeContext, rec: &SenderRecord, lenient: bool) -> Result<EncodingRule, CliError> {
    if rec.role != "sender" {
        return Err(CliError::format(format!("expected role \"sender\", found {:?}", rec.role)));
    }
    let s = subspace(ctx, &rec.subspace, lenient)?;
    let rule = ctx.parse_encoding_rule(&s)?;
    let r2 = Matrix::from_values(&rec.r2).map_err(|e| CliError::format(e.to_string()))?;
    let r5: Vec<FieldElement> = rec.r5.iter().map(|&v| FieldElement::from_raw(v)).collect();
    if *rule.r2() != r2 || rule.r5() != r5.as_slice() {
        return Err(CliError::format("R2/R5 blocks disagree with the sender subspace"));
    }
    Ok(rule)
}

fn sender_record(rule: &EncodingRule) -> SenderRecord {
    SenderRecord {
        role: "sender".into(),
        r2: rule.r2().values(),
        r5: rule.r5().iter().map(|x| x.value()).collect(),
        subspace: rule.subspace().to_record(),
    }
}

fn cmd_params(p: SchemeParams, out: Option<&Path>) -> Result<i32, CliError> {
    let ctx = SchemeContext::new(p)?;
    let (q, nu, n, r) = (p.q(), p.nu(), p.n(), p.r());
    let inv = |e: usize| census::inverse_power(q, e);
    let probs: Vec<_> = (1..n)
        .map(|l| {
            json!({
                "l": l,
                "P_I": inv((n - l) * (nu - r) + (r - n + 1)),
                "P_S": inv(r - l),
            })
        })
        .collect();
    let doc = json!({
        "format": FILE_FORMAT,
        "params": p,
        "ambient_dim": ctx.ambient_dim(),
        "dims": {
            "U": ctx.u().dim(),
            "U_perp": ctx.u_perp().dim(),
            "encoding_rule": 2 * n,
            "receiver_key": n + 1,
            "source_state": 2 * r - n + 1,
            "message": 2 * r + 1,
        },
        "types": {
            "encoding_rule": ctx.rule_type().to_string(),
            "source_state": ctx.source_type().to_string(),
            "message": ctx.message_type().to_string(),
        },
        "sizes": {
            "E_T": census::rule_count(&ctx),
            "E_R": census::key_count(&ctx),
            "S_candidates": ctx.source_candidate_count().map(|v| v.to_string()),
        },
        "probabilities": probs,
    });
    emit(out, &to_json(&doc))?;
    Ok(EXIT_OK)
}

fn cmd_keygen(p: SchemeParams, seed: u64, out: &Path, split: Option<&Path>) -> Result<i32, CliError> {
    let ctx = SchemeContext::new(p)?;
    let mut rng = rng::from_seed(seed);
    let rule = ctx.sample_encoding_rule(&mut rng);
    let keys: Vec<ReceiverKey> = (1..=p.n())
        .map(|i| ctx.derive_receiver_key(&rule, i))
        .collect::<Result<_, _>>()?;
    let bundle = KeyBundle {
        format: FILE_FORMAT,
        params: p,
        sender: sender_record(&rule),
        receivers: keys
            .iter()
            .map(|k| ReceiverRecord {
                role: "receiver".into(),
                index: k.index(),
                subspace: k.subspace().to_record(),
            })
            .collect(),
    };
    write_atomic(out, &to_json(&bundle))?;
    if let Some(dir) = split {
        for k in &keys {
            let file = ReceiverFile {
                format: FILE_FORMAT,
                params: p,
                role: "receiver".into(),
                index: k.index(),
                subspace: k.subspace().to_record(),
            };
            write_atomic(&dir.join(format!("receiver_{}.json", k.index())), &to_json(&file))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_send(keys: &Path, seed: u64, out: Option<&Path>, lenient: bool) -> Result<i32, CliError> {
    let bundle: KeyBundle = read_json(keys)?;
    check_format(bundle.format)?;
    let ctx = SchemeContext::new(bundle.params)?;
    let rule = load_sender(&ctx, &bundle.sender, lenient)?;
    let mut rng = rng::from_seed(seed);
    let s = ctx.sample_source_state(&mut rng)?;
    let m = ctx.encode(&s, &rule)?;
    let file = MessageFile {
        format: FILE_FORMAT,
        params: bundle.params,
        subspace: m.subspace().to_record(),
    };
    emit(out, &to_json(&file))?;
    Ok(EXIT_OK)
}

fn load_message(path: &Path, lenient: bool) -> Result<(SchemeContext, Subspace), CliError> {
    let file: MessageFile = read_json(path)?;
    check_format(file.format)?;
    let ctx = SchemeContext::new(file.params)?;
    let m = subspace(&ctx, &file.subspace, lenient)?;
    Ok((ctx, m))
}

fn cmd_verify(msg: &Path, key: &Path, receiver: Option<usize>, lenient: bool) -> Result<i32, CliError> {
    let (ctx, m) = load_message(msg, lenient)?;
    let value: serde_json::Value = read_json(key)?;
    let (params, index, rec) = if value.get("receivers").is_some() {
        let bundle: KeyBundle = serde_json::from_value(value).map_err(|e| CliError::format(format!("{}: {e}", key.display())))?;
        check_format(bundle.format)?;
        let i = receiver.ok_or_else(|| CliError::usage("--receiver is required with a key bundle"))?;
        let rec = bundle
            .receivers
            .into_iter()
            .find(|r| r.index == i)
            .ok_or_else(|| CliError::usage(format!("no key for receiver {i} in bundle")))?;
        (bundle.params, i, rec.subspace)
    } else {
        let file: ReceiverFile = serde_json::from_value(value).map_err(|e| CliError::format(format!("{}: {e}", key.display())))?;
        check_format(file.format)?;
        if file.role != "receiver" {
            return Err(CliError::format(format!("expected role \"receiver\", found {:?}", file.role)));
        }
        if receiver.is_some_and(|i| i != file.index) {
            return Err(CliError::usage("--receiver does not match the key file"));
        }
        (file.params, file.index, file.subspace)
    };
    if params != *ctx.params() {
        return Err(CliError::format("key and message parameters differ"));
    }
    let key = ctx.parse_receiver_key(index, &subspace(&ctx, &rec, lenient)?)?;
    let accepted = ctx.verify(&m, &key)?;
    println!("{}", json!({ "receiver": index, "accepted": accepted }));
    Ok(if accepted { EXIT_OK } else { EXIT_REJECT })
}

fn cmd_decode(msg: &Path, out: Option<&Path>, lenient: bool) -> Result<i32, CliError> {
    let (ctx, m) = load_message(msg, lenient)?;
    let s = ctx.decode(&m)?;
    let doc = json!({
        "format": FILE_FORMAT,
        "params": ctx.params(),
        "source_state": s.subspace().to_record(),
    });
    emit(out, &to_json(&doc))?;
    Ok(EXIT_OK)
}

fn cmd_audit(
    p: SchemeParams,
    run: &RunArgs,
    checks: &str,
    l: usize,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<i32, CliError> {
    let ctx = SchemeContext::new(p)?;
    let selector = if checks == "all" {
        CheckSelector::All
    } else {
        let ids: BTreeSet<String> = checks.split(',').map(|s| s.trim().to_string()).collect();
        if let Some(bad) = ids.iter().find(|id| !census::CHECK_IDS.contains(&id.as_str())) {
            return Err(CliError::usage(format!("unknown check id {bad}")));
        }
        CheckSelector::Only(ids)
    };
    let opts = AuditOptions {
        budget: run.budget,
        threads: run.threads as usize,
        l,
        checks: selector,
    };
    let report = census::audit(&ctx, &opts)?;
    emit(out, &report.to_json())?;
    if let Some(path) = csv {
        write_atomic(path, &report.to_csv())?;
    }
    Ok(if report.has_mismatch() {
        EXIT_MISMATCH
    } else if report.budget_exceeded() {
        EXIT_BUDGET
    } else {
        EXIT_OK
    })
}

fn witness_json(c: &Census, co: &Coalition, w: &census::Witness) -> serde_json::Value {
    let keys: Vec<_> = co
        .members()
        .iter()
        .zip(&w.coalition_keys)
        .map(|(&j, &code)| json!({ "index": j, "subspace": c.keys(j)[code as usize].subspace().to_record() }))
        .collect();
    json!({
        "coalition_keys": keys,
        "target_key": w.target_key.map(|code| c.keys(co.target())[code as usize].subspace().to_record()),
        "message": census::message_record(c, w.message),
        "replacement": w.replacement.map(|m| census::message_record(c, m)),
    })
}

fn cmd_attack(
    p: SchemeParams,
    run: &RunArgs,
    target: usize,
    members: &[usize],
    model: ModelArg,
    scope: ScopeArg,
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let ctx = SchemeContext::new(p)?;
    let co = Coalition::new(&p, target, members)?;
    let c = Census::build(ctx, run.budget, run.threads as usize)?;
    let models: &[Model] = match model {
        ModelArg::A => &[Model::A],
        ModelArg::B => &[Model::B],
        ModelArg::Both => &[Model::A, Model::B],
    };
    let scopes: &[Scope] = match scope {
        ScopeArg::Canonical => &[Scope::Canonical],
        ScopeArg::Full => &[Scope::Full],
        ScopeArg::Both => &[Scope::Canonical, Scope::Full],
    };
    let (q, nu, n, r, l) = (p.q(), p.nu(), p.n(), p.r(), co.l());
    let mut results = Vec::new();
    for &m in models {
        let pi = c.impersonation_probability(&co, m)?;
        results.push(json!({
            "attack": "impersonation",
            "model": m,
            "scope": Scope::Full,
            "value": Value::Rational(pi.value),
            "closed_form": census::inverse_power(q, (n - l) * (nu - r) + (r - n + 1)),
            "witness": witness_json(&c, &co, &pi.witness),
        }));
        for &s in scopes {
            let ps = c.substitution_probability(&co, m, s)?;
            results.push(json!({
                "attack": "substitution",
                "model": m,
                "scope": s,
                "value": Value::Rational(ps.value),
                "closed_form": census::inverse_power(q, r - l),
                "witness": witness_json(&c, &co, &ps.witness),
            }));
        }
    }
    let doc = json!({
        "format": FILE_FORMAT,
        "params": p,
        "coalition": co,
        "results": results,
    });
    emit(out, &to_json(&doc))?;
    Ok(EXIT_OK)
}

fn cmd_census(p: SchemeParams, run: &RunArgs, family: Family, receiver: usize, out: Option<&Path>) -> Result<i32, CliError> {
    let ctx = SchemeContext::new(p)?;
    let budget = run.budget;
    let records = |subs: Vec<&Subspace>| -> serde_json::Value {
        json!({ "count": subs.len(), "members": subs.iter().map(|s| s.to_record()).collect::<Vec<_>>() })
    };
    let body = match family {
        Family::ET => {
            let rules = census::enumerate_encoding_rules(&ctx, budget)?;
            records(rules.iter().map(|r| r.subspace()).collect())
        }
        Family::ER => {
            let keys = census::enumerate_receiver_keys(&ctx, receiver, budget)?;
            records(keys.iter().map(|k| k.subspace()).collect())
        }
        Family::S => {
            let states = census::enumerate_source_states(&ctx, budget)?;
            records(states.iter().map(|s| s.subspace()).collect())
        }
        Family::M => {
            let c = Census::build(ctx.clone(), budget, run.threads as usize)?;
            let members: Vec<_> = (0..c.messages().len())
                .map(|m| json!({ "subspace": c.messages()[m].subspace().to_record(), "multiplicity": c.multiplicity(m) }))
                .collect();
            json!({ "count": members.len(), "members": members })
        }
        Family::TypeCount => {
            let c = Census::build(ctx.clone(), budget, run.threads as usize)?;
            let tally = |subs: Vec<&Subspace>| -> Result<serde_json::Value, CliError> {
                let mut t = std::collections::BTreeMap::new();
                for s in subs {
                    let ty = ctx.space().classify(s).map_err(SchemeError::from)?;
                    *t.entry(ty.to_string()).or_insert(0u64) += 1;
                }
                Ok(json!(t))
            };
            let mut fam = serde_json::Map::new();
            fam.insert("eT".into(), tally(c.rules().iter().map(|r| r.subspace()).collect())?);
            for i in 1..=p.n() {
                fam.insert(format!("eR{i}"), tally(c.keys(i).iter().map(|k| k.subspace()).collect())?);
            }
            fam.insert("S".into(), tally(c.states().iter().map(|s| s.subspace()).collect())?);
            fam.insert("M".into(), tally(c.messages().iter().map(|m| m.subspace()).collect())?);
            json!({ "types": fam })
        }
    };
    let family_name = match family {
        Family::ET => "eT",
        Family::ER => "eR",
        Family::S => "S",
        Family::M => "M",
        Family::TypeCount => "type-count",
    };
    let mut doc = json!({ "format": FILE_FORMAT, "params": p, "family": family_name });
    if family == Family::ER {
        doc["receiver"] = json!(receiver);
    }
    for (k, v) in body.as_object().expect("object body") {
        doc[k] = v.clone();
    }
    emit(out, &to_json(&doc))?;
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Params { params, out } => cmd_params(params.resolve()?, out.as_deref()),
        Command::Keygen { params, seed, out, split } => cmd_keygen(params.resolve()?, seed, &out, split.as_deref()),
        Command::Send { keys, seed, out, lenient } => cmd_send(&keys, seed, out.as_deref(), lenient),
        Command::Verify { msg, key, receiver, lenient } => cmd_verify(&msg, &key, receiver, lenient),
        Command::Decode { msg, out, lenient } => cmd_decode(&msg, out.as_deref(), lenient),
        Command::Audit { params, run, checks, l, out, csv } => {
            cmd_audit(params.resolve()?, &run, &checks, l, out.as_deref(), csv.as_deref())
        }
        Command::Attack {
            params,
            run,
            target,
            coalition,
            model,
            scope,
            out,
        } => cmd_attack(params.resolve()?, &run, target, &coalition, model, scope, out.as_deref()),
        Command::Census {
            params,
            run,
            family,
            receiver,
            out,
        } => cmd_census(params.resolve()?, &run, family, receiver, out.as_deref()),
    }
}

fn diagnostic(e: &CliError) -> String {
    json!({ "error": e.kind, "exit": e.exit, "message": e.message }).to_string()
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", diagnostic(&CliError::usage(first)));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            e.exit
        }
    }
}
