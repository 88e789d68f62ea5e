//! Command-line front end for `tcfkit`.
//!
//! [`run`] parses arguments, calls the library and renders either a text
//! summary or a JSON [`Report`]. The report's `result` member is the library
//! value serialized as-is.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tcfkit::codec::{self, ConsentRecord, Deciseconds, Violation};
use tcfkit::flow_sim::{run_script, EventTrace, SimError, Step, WorldConfig};
use tcfkit::receipt::{self, ConsentReceipt, ReceiptError, ReceiptKey, Verification};
use tcfkit::rules::{self, BannerDescriptor, Finding, Severity, Threshold};
use tcfkit::tracker_class::{scan_site, CategoryDb, ScanError};
use tcfkit::vendor_list::VendorList;

pub const REPORT_SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tcfkit", version, about = "Consent-signal codec, CMP simulator and consent-flow auditor")]
struct Cli {
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Lowest finding severity that makes the exit status 1.
    #[arg(long, global = true, value_enum, default_value_t = FailOn::Warning)]
    fail_on: FailOn,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FailOn {
    Info,
    Warning,
    Violation,
}

impl From<FailOn> for Severity {
    fn from(f: FailOn) -> Self {
        match f {
            FailOn::Info => Severity::Info,
            FailOn::Warning => Severity::Warning,
            FailOn::Violation => Severity::Violation,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode a consent string.
    Decode { signal: String },
    /// Encode a consent record given as JSON.
    Encode { record: PathBuf },
    /// Check a consent string against a vendor list.
    Validate {
        signal: String,
        #[arg(long, env = "TCFKIT_GVL")]
        gvl: PathBuf,
    },
    /// Run an action script against a simulated world.
    Simulate {
        world: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print only the event trace, one JSON object per line.
        #[arg(long)]
        jsonl: bool,
    },
    /// Visit a simulated site with several visitors and classify its cookies.
    Scan {
        world: PathBuf,
        #[arg(long)]
        site: String,
        /// Comma-separated visitor ids; defaults to every visitor in the world.
        #[arg(long, value_delimiter = ',')]
        visitors: Vec<String>,
        /// Cookie-category database; defaults to the built-in one.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audit a banner, a trace, or the breadth of a consent record.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Issue or verify consent receipts.
    #[command(subcommand)]
    Receipt(ReceiptCommand),
    /// Print the rule catalog.
    Rules,
}

#[derive(Debug, Subcommand)]
enum AuditCommand {
    Banner {
        banner: PathBuf,
    },
    Flow {
        /// Event trace in JSONL form.
        trace: PathBuf,
        /// Consent string read back after the trace ended.
        #[arg(long)]
        observed: Option<String>,
    },
    Breadth {
        /// Consent string.
        #[arg(long)]
        record: String,
        /// Comma-separated ids of vendors present on the site.
        #[arg(long, value_delimiter = ',')]
        present: Vec<u16>,
        #[arg(long, default_value_t = Threshold::DEFAULT.get())]
        threshold: f64,
    },
}

#[derive(Debug, Subcommand)]
enum ReceiptCommand {
    Issue {
        /// Consent string.
        #[arg(long)]
        record: String,
        #[arg(long)]
        banner: PathBuf,
        #[arg(long)]
        key_file: PathBuf,
        /// Deciseconds since the epoch; defaults to the record's last update.
        #[arg(long)]
        issued_at: Option<u64>,
    },
    Verify {
        receipt: String,
        #[arg(long)]
        key_file: PathBuf,
        /// Banner presented to the user, checked against the receipt digest.
        #[arg(long)]
        banner: Option<PathBuf>,
    },
}

/// Machine-readable report printed with `--json`.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub inputs: BTreeMap<String, Value>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
    pub exit_status: i32,
}

/// What [`run`] produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Input(Value),
    Internal(String),
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure::Input(json!({ "code": "input_error", "message": message.to_string() }))
    }

    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn value(&self) -> Value {
        match self {
            Failure::Input(v) => v.clone(),
            Failure::Internal(m) => json!({ "code": "internal_error", "message": m }),
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Input(v) => v.get("message").and_then(Value::as_str).map_or_else(|| v.to_string(), str::to_owned),
            Failure::Internal(m) => m.clone(),
        }
    }
}

impl From<codec::CodecError> for Failure {
    fn from(e: codec::CodecError) -> Self {
        let mut v = serde_json::to_value(&e).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut v {
            m.insert("message".into(), e.to_string().into());
        }
        Failure::Input(v)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Codec(c) => c.into(),
            other => Failure::input(other),
        }
    }
}

impl From<ScanError> for Failure {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::Sim(s) => s.into(),
            other => Failure::input(other),
        }
    }
}

impl From<ReceiptError> for Failure {
    fn from(e: ReceiptError) -> Self {
        match e {
            ReceiptError::Codec(c) => c.into(),
            other => Failure::input(other),
        }
    }
}

struct Done {
    result: Value,
    text: String,
    failing: bool,
    /// Replaces the whole output, bypassing the report.
    raw: Option<String>,
}

struct Ctx {
    command: String,
    inputs: BTreeMap<String, Value>,
    fail_on: Severity,
}

impl Ctx {
    fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.inputs.insert(key.to_owned(), value.into());
    }

    fn read(&mut self, key: &str, path: &Path) -> Result<String, Failure> {
        self.input(key, path.display().to_string());
        fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&mut self, key: &str, path: &Path) -> Result<T, Failure> {
        let text = self.read(key, path)?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Internal(format!("serialization failed: {e}")))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let mut ctx = Ctx { command: command_name(&cli.command), inputs: BTreeMap::new(), fail_on: cli.fail_on.into() };
    let outcome = execute(&cli.command, &mut ctx);

    let (code, result, error, text, raw) = match outcome {
        Ok(done) => {
            let code = if done.failing { EXIT_FINDINGS } else { EXIT_OK };
            (code, done.result, None, done.text, done.raw)
        }
        Err(f) => (f.code(), Value::Null, Some(f.value()), format!("error: {}\n", f.message()), None),
    };
    if let Some(raw) = raw {
        return Outcome { code, stdout: raw, stderr: String::new() };
    }
    if cli.json {
        let report = Report {
            schema: REPORT_SCHEMA,
            tool_version: TOOL_VERSION,
            command: ctx.command,
            inputs: ctx.inputs,
            result,
            error,
            exit_status: code,
        };
        match serde_json::to_string_pretty(&report) {
            Ok(s) => Outcome { code, stdout: s + "\n", stderr: String::new() },
            Err(e) => Outcome { code: EXIT_INTERNAL, stdout: String::new(), stderr: format!("error: {e}\n") },
        }
    } else if error.is_some() {
        Outcome { code, stdout: String::new(), stderr: text }
    } else {
        Outcome { code, stdout: text, stderr: String::new() }
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Decode { .. } => "decode",
        Command::Encode { .. } => "encode",
        Command::Validate { .. } => "validate",
        Command::Simulate { .. } => "simulate",
        Command::Scan { .. } => "scan",
        Command::Audit(AuditCommand::Banner { .. }) => "audit banner",
        Command::Audit(AuditCommand::Flow { .. }) => "audit flow",
        Command::Audit(AuditCommand::Breadth { .. }) => "audit breadth",
        Command::Receipt(ReceiptCommand::Issue { .. }) => "receipt issue",
        Command::Receipt(ReceiptCommand::Verify { .. }) => "receipt verify",
        Command::Rules => "rules",
    }
    .to_owned()
}

fn execute(command: &Command, ctx: &mut Ctx) -> Result<Done, Failure> {
    match command {
        Command::Decode { signal } => {
            ctx.input("signal", signal.as_str());
            let record = codec::decode(signal)?;
            let counts = record.counts();
            Ok(Done {
                result: json!({ "record": to_value(&record)?, "counts": to_value(&counts)? }),
                text: render_record(&record),
                failing: false,
                raw: None,
            })
        }
        Command::Encode { record } => {
            let record: ConsentRecord = ctx.read_json("record", record)?;
            let signal = codec::encode(&record)?;
            Ok(Done { result: json!({ "signal": signal.as_str() }), text: format!("{signal}\n"), failing: false, raw: None })
        }
        Command::Validate { signal, gvl } => {
            ctx.input("signal", signal.as_str());
            let list = VendorList::load(&ctx.read("gvl", gvl)?).map_err(Failure::input)?;
            let record = codec::decode(signal)?;
            let violations = codec::validate(&record, &list);
            let mut text = String::new();
            for v in &violations {
                let _ = match v {
                    Violation::UnknownVendor { vendor } => writeln!(text, "unknown vendor {vendor}"),
                    Violation::UndeclaredPurpose { vendor, purpose } => {
                        writeln!(text, "vendor {vendor} has consent for undeclared purpose {purpose}")
                    }
                };
            }
            let _ = writeln!(text, "{} violation(s) against vendor list v{}", violations.len(), list.version());
            Ok(Done {
                result: json!({ "violations": to_value(&violations)? }),
                text,
                failing: !violations.is_empty() && Severity::Violation >= ctx.fail_on,
                raw: None,
            })
        }
        Command::Simulate { world, script, seed, jsonl } => {
            let config: WorldConfig = ctx.read_json("world", world)?;
            let steps: Vec<Step> = ctx.read_json("script", script)?;
            ctx.input("seed", *seed);
            let outcome = run_script(&config, *seed, &steps)?;
            let mut text = String::new();
            for s in &outcome.steps {
                let _ = write!(text, "step {} {}: {} event(s)", s.step, s.op, s.events);
                let _ = match &s.signal {
                    Some(sig) => writeln!(text, ", signal {sig}"),
                    None => writeln!(text),
                };
            }
            let _ = writeln!(text, "trace: {} event(s), seed {}", outcome.trace.len(), outcome.seed);
            Ok(Done {
                result: to_value(&outcome)?,
                text,
                failing: false,
                raw: jsonl.then(|| outcome.trace.to_jsonl()),
            })
        }
        Command::Scan { world, site, visitors, db, seed } => {
            let config: WorldConfig = ctx.read_json("world", world)?;
            let db = match db {
                Some(p) => {
                    let text = ctx.read("db", p)?;
                    CategoryDb::load(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
                }
                None => CategoryDb::builtin(),
            };
            let visitors = if visitors.is_empty() { config.visitors.iter().map(|v| v.id.clone()).collect() } else { visitors.clone() };
            ctx.input("site", site.as_str());
            ctx.input("visitors", visitors.clone());
            ctx.input("seed", *seed);
            let report = scan_site(&config, *seed, site, &visitors, &db)?;
            let text = format!("{}tracker cookies: {}\n", report.to_table(), report.tracker_count());
            Ok(Done { result: to_value(&report)?, text, failing: false, raw: None })
        }
        Command::Audit(AuditCommand::Banner { banner }) => {
            let banner: BannerDescriptor = ctx.read_json("banner", banner)?;
            banner.check().map_err(Failure::input)?;
            findings_done(rules::audit_banner(&banner), ctx.fail_on)
        }
        Command::Audit(AuditCommand::Flow { trace, observed }) => {
            let text = ctx.read("trace", trace)?;
            let trace = EventTrace::from_jsonl(&text).map_err(Failure::input)?;
            let observed = match observed {
                Some(s) => {
                    ctx.input("observed", s.as_str());
                    Some(codec::decode(s)?)
                }
                None => None,
            };
            findings_done(rules::audit_flow(&trace, observed.as_ref()), ctx.fail_on)
        }
        Command::Audit(AuditCommand::Breadth { record, present, threshold }) => {
            ctx.input("record", record.as_str());
            ctx.input("present", present.clone());
            ctx.input("threshold", *threshold);
            let threshold = Threshold::new(*threshold).map_err(Failure::input)?;
            let record = codec::decode(record)?;
            let present = present.iter().copied().collect();
            findings_done(rules::audit_vendor_breadth(&record, &present, threshold), ctx.fail_on)
        }
        Command::Receipt(ReceiptCommand::Issue { record, banner, key_file, issued_at }) => {
            ctx.input("record", record.as_str());
            let banner: BannerDescriptor = ctx.read_json("banner", banner)?;
            let key: ReceiptKey = ctx.read_json("key_file", key_file)?;
            let record = codec::decode(record)?;
            let receipt = match issued_at {
                Some(t) => {
                    ctx.input("issued_at", *t);
                    receipt::issue_at(&record, &banner, &key, Deciseconds(*t))?
                }
                None => receipt::issue(&record, &banner, &key)?,
            };
            let wire = receipt.to_string();
            Ok(Done { result: json!({ "receipt": wire }), text: format!("{wire}\n"), failing: false, raw: None })
        }
        Command::Receipt(ReceiptCommand::Verify { receipt: wire, key_file, banner }) => {
            ctx.input("receipt", wire.as_str());
            let key: ReceiptKey = ctx.read_json("key_file", key_file)?;
            let banner: Option<BannerDescriptor> = match banner {
                Some(p) => Some(ctx.read_json("banner", p)?),
                None => None,
            };
            let verification = match wire.parse::<ConsentReceipt>() {
                Ok(r) => (receipt::verify(&r, &key), Some(r)),
                Err(_) => (Verification::Invalid(receipt::InvalidReason::Malformed), None),
            };
            let (verification, parsed) = verification;
            let ui = match (&banner, &parsed) {
                (Some(b), Some(r)) if verification.is_valid() => {
                    if r.ui_matches(b) {
                        "match"
                    } else {
                        "ui_mismatch"
                    }
                }
                _ => "not_checked",
            };
            let text = match verification {
                Verification::Valid => format!("valid\nui: {ui}\n"),
                Verification::Invalid(reason) => format!("invalid: {}\n", to_value(&reason)?.as_str().unwrap_or("?")),
            };
            Ok(Done {
                result: json!({ "verification": to_value(&verification)?, "ui": ui }),
                text,
                failing: !verification.is_valid() || ui == "ui_mismatch",
                raw: None,
            })
        }
        Command::Rules => {
            let catalog: Vec<Value> = rules::RuleId::ALL
                .iter()
                .map(|r| {
                    json!({
                        "rule_id": r.as_str(),
                        "audit": r.audit(),
                        "severity": r.severity(),
                        "condition": r.condition(),
                        "paper_ref": r.basis(),
                    })
                })
                .collect();
            Ok(Done { result: Value::Array(catalog), text: rules::rules_markdown(), failing: false, raw: None })
        }
    }
}

fn findings_done(findings: Vec<Finding>, fail_on: Severity) -> Result<Done, Failure> {
    let failing = findings.iter().any(|f| f.severity >= fail_on);
    let mut text = String::new();
    for f in &findings {
        let _ = writeln!(text, "{} [{}] {}", f.rule_id, f.severity, f.message);
        if !f.anchors.is_empty() {
            let _ = writeln!(text, "    at {}", f.anchors.join(", "));
        }
    }
    let _ = writeln!(text, "{} finding(s)", findings.len());
    Ok(Done { result: json!({ "findings": to_value(&findings)? }), text, failing, raw: None })
}

fn render_record(r: &ConsentRecord) -> String {
    fn list<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
        xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
    let mut t = String::new();
    let _ = writeln!(t, "version:              {}", r.version);
    let _ = writeln!(t, "created:              {}", r.created.get());
    let _ = writeln!(t, "last_updated:         {}", r.last_updated.get());
    let _ = writeln!(t, "cmp:                  {} v{}", r.cmp_id, r.cmp_version);
    let _ = writeln!(t, "consent_screen:       {}", r.consent_screen);
    let _ = writeln!(t, "consent_language:     {}", r.consent_language.as_str());
    let _ = writeln!(t, "vendor_list_version:  {}", r.vendor_list_version);
    let _ = writeln!(t, "policy_version:       {}", r.policy_version);
    let _ = writeln!(t, "service_specific:     {}", r.service_specific);
    let _ = writeln!(t, "special_features:     {}", list(&r.special_feature_optins));
    let _ = writeln!(t, "purposes_consent:     {}", list(&r.purposes_consent));
    let _ = writeln!(t, "purposes_li:          {}", list(&r.purposes_li));
    let _ = writeln!(t, "vendors_consent:      {} vendor(s)", r.vendors_consent.len());
    let _ = writeln!(t, "vendors_li:           {} vendor(s)", r.vendors_li.len());
    if !r.opaque_segments.is_empty() {
        let _ = writeln!(t, "opaque_segments:      {}", r.opaque_segments.len());
    }
    let _ = writeln!(t, "counts:               {}", r.counts());
    t
}
