//! The `srw` command line.
//!
//! Exit status: 0 on success, 1 for validation and domain errors, 2 for
//! usage errors, 3 when a session stops on a conflict.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::agents::{
    parse_agent, run_session, Agent, AgentError, SessionConfig, SessionError, SessionStatus,
};
use crate::bayes::{posterior_marginals, BayesError, BeliefMap, EvidenceSet, NodeId, State};
use crate::config::{effective_threshold, Mode, OutputFormat};
use crate::elicitation::{parse_rulebook, ElicitationError, PatternRule};
use crate::evaluation::{parse_gold, parse_implied, score, EvalError};
use crate::fragment::{
    classify, compile, parse_fragment, Fragment, FragmentError, ImpliedSet, RankedNode,
};
use crate::glue::{glue_all, GlueError, GlueManifest, GlueReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Fragment {
        path: PathBuf,
        source: FragmentError,
    },
    #[error("{}: invalid manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Agent { path: PathBuf, source: AgentError },
    #[error("{}: {source}", path.display())]
    Rules {
        path: PathBuf,
        source: ElicitationError,
    },
    #[error("{}: {source}", path.display())]
    EvalInput { path: PathBuf, source: EvalError },
    #[error(transparent)]
    Compile(#[from] FragmentError),
    #[error(transparent)]
    Glue(#[from] GlueError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Parser)]
#[command(
    name = "srw",
    version,
    about = "System requirement webs: validate, glue, infer, elicit and score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check fragment files (or glue manifests) against the format rules.
    Validate {
        #[arg(required = true)]
        fragments: Vec<PathBuf>,
    },
    /// Glue the fragments listed in a manifest into one fragment.
    Glue {
        manifest: PathBuf,
        /// Output fragment; the glue report goes next to it as `*.report.json`.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Posterior beliefs of every node given evidence.
    Infer {
        /// Fragment or glue manifest
        web: PathBuf,
        #[command(flatten)]
        evidence: EvidenceArgs,
        #[arg(long, value_enum, default_value_t)]
        output_format: OutputFormat,
    },
    /// Requirements implied at a threshold given evidence.
    Classify {
        /// Fragment or glue manifest
        web: PathBuf,
        #[command(flatten)]
        evidence: EvidenceArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, value_enum, default_value_t)]
        output_format: OutputFormat,
    },
    /// Headless elicitation session over a file of utterances.
    Session {
        /// Fragment or glue manifest
        web: PathBuf,
        /// Directory of agent files (`*.json`).
        #[arg(long)]
        agents: PathBuf,
        /// Pattern rulebook.
        #[arg(long)]
        rules: PathBuf,
        /// One utterance per line; blank lines and `#` comments are skipped.
        #[arg(long)]
        utterances: PathBuf,
        /// Write the transcript here as line-delimited JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Propagate once per utterance instead of after every change
        #[arg(long)]
        batch_propagate: bool,
        /// Agent rounds allowed per utterance before the session is stopped
        #[arg(long, default_value_t = SessionConfig::default().max_rounds)]
        max_rounds: u32,
        #[arg(long, value_enum, default_value_t)]
        output_format: OutputFormat,
    },
    /// Accuracy and coverage of an implied set against a gold standard.
    Score {
        #[arg(long)]
        implied: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        output_format: OutputFormat,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Persist session transcripts to this directory.
        #[arg(long)]
        transcript_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EvidenceArgs {
    /// Hard evidence, `node=1` (implied) or `node=0` (not implied). Repeatable.
    #[arg(long = "evidence", value_name = "NODE=1|0", value_parser = parse_hard)]
    hard: Vec<(NodeId, State)>,
    /// Soft evidence as likelihoods, `node=l_implied,l_not`. Repeatable.
    #[arg(long = "soft", value_name = "NODE=L1,L0", value_parser = parse_soft)]
    soft: Vec<(NodeId, f64, f64)>,
}

impl EvidenceArgs {
    fn to_evidence(&self) -> Result<EvidenceSet, BayesError> {
        let mut ev = EvidenceSet::new();
        for (node, state) in &self.hard {
            ev.assert_hard(node.clone(), *state, "cli");
        }
        for (node, l1, l0) in &self.soft {
            ev.declare_soft(node.clone(), *l1, *l0, "cli")?;
        }
        Ok(ev)
    }
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Explicit threshold; overrides the mode preset.
    #[arg(long)]
    threshold: Option<f64>,
    /// `expert` (0.5) or `strict` (0.75).
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl ThresholdArgs {
    fn resolve(&self) -> f64 {
        effective_threshold(self.mode, self.threshold)
    }
}

fn parse_node(s: &str) -> Result<NodeId, String> {
    NodeId::new(s.trim()).map_err(|e| e.to_string())
}

fn parse_hard(s: &str) -> Result<(NodeId, State), String> {
    let (node, value) = s.split_once('=').ok_or("expected NODE=1 or NODE=0")?;
    let state = match value.trim() {
        "1" => State::Implied,
        "0" => State::NotImplied,
        other => return Err(format!("expected 1 or 0, got `{other}`")),
    };
    Ok((parse_node(node)?, state))
}

fn parse_soft(s: &str) -> Result<(NodeId, f64, f64), String> {
    let (node, value) = s.split_once('=').ok_or("expected NODE=L1,L0")?;
    let (l1, l0) = value
        .split_once(',')
        .ok_or("expected two likelihoods separated by a comma")?;
    let number = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((parse_node(node)?, number(l1)?, number(l0)?))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn is_manifest(bytes: &[u8]) -> bool {
    serde_json::from_slice::<serde_json::Value>(bytes)
        .map(|v| v.get("fragments").is_some())
        .unwrap_or(false)
}

/// Glue every fragment a manifest lists.
pub fn glue_manifest(path: &Path) -> Result<(Fragment, GlueReport), CliError> {
    let bytes = read(path)?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    let manifest: GlueManifest =
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            message: {
                let at = e.path().to_string();
                format!("at `{at}`: {}", e.into_inner())
            },
        })?;
    let fragments = manifest
        .resolve(path)
        .iter()
        .map(|p| {
            parse_fragment(&read(p)?).map_err(|source| CliError::Fragment {
                path: p.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(glue_all(&fragments, manifest.policy)?)
}

/// Load a web from a fragment file or a glue manifest (an object with a
/// `fragments` key). Returns the fragment and any non-fatal warnings.
pub fn load_web(path: &Path) -> Result<(Fragment, Vec<String>), CliError> {
    let bytes = read(path)?;
    if is_manifest(&bytes) {
        let (fragment, report) = glue_manifest(path)?;
        return Ok((fragment, report.warnings));
    }
    let fragment = parse_fragment(&bytes).map_err(|source| CliError::Fragment {
        path: path.to_path_buf(),
        source,
    })?;
    let warnings = fragment.validate()?;
    Ok((fragment, warnings))
}

/// Every `*.json` file in `dir`, in file name order.
pub fn load_agents(dir: &Path) -> Result<Vec<Agent>, CliError> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            parse_agent(&read(p)?).map_err(|source| CliError::Agent {
                path: p.clone(),
                source,
            })
        })
        .collect()
}

pub fn load_rules(path: &Path) -> Result<Vec<PatternRule>, CliError> {
    parse_rulebook(&read(path)?).map_err(|source| CliError::Rules {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_utterances(path: &Path) -> Result<Vec<String>, CliError> {
    let bytes = read(path)?;
    Ok(String::from_utf8_lossy(&bytes)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Beliefs as `node belief` rows, descending belief then id, 4 decimals.
pub fn belief_table(beliefs: &BeliefMap) -> String {
    let ranked = beliefs.ranked();
    let width = ranked
        .iter()
        .map(|(id, _)| id.as_str().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = format!("{:<width$}  belief\n", "node");
    for (id, p) in ranked {
        out += &format!("{:<width$}  {p:.4}\n", id.as_str());
    }
    out
}

fn ranked(beliefs: &BeliefMap) -> Vec<RankedNode> {
    beliefs
        .ranked()
        .into_iter()
        .map(|(id, belief)| RankedNode {
            node: id.clone(),
            belief,
        })
        .collect()
}

fn implied_table(set: &ImpliedSet) -> String {
    let width = set
        .implied
        .iter()
        .chain(&set.borderline)
        .map(|r| r.node.as_str().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = format!("implied at threshold {:.4}\n", set.threshold);
    for r in &set.implied {
        out += &format!("  {:<width$}  {:.4}\n", r.node.as_str(), r.belief);
    }
    if !set.borderline.is_empty() {
        out += &format!("borderline (within {:.4} below)\n", set.band);
        for r in &set.borderline {
            out += &format!("  {:<width$}  {:.4}\n", r.node.as_str(), r.belief);
        }
    }
    out
}

#[derive(Serialize)]
struct BeliefsOutput {
    beliefs: Vec<RankedNode>,
}

/// JSON shape of `session --output-format json`. The implied-set fields are
/// inlined so the output can be fed to `score --implied` directly.
#[derive(Serialize)]
struct SessionOutput<'a> {
    status: &'a SessionStatus,
    #[serde(flatten)]
    implied: &'a ImpliedSet,
    beliefs: Vec<RankedNode>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

/// Parse `args` (program name first) and run. Output goes to `out`,
/// diagnostics to `err`; the return value is the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                EXIT_OK
            } else {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut emit = |text: String| {
        let _ = out.write_all(text.as_bytes());
    };
    match command {
        Command::Validate { fragments } => {
            let mut failed = false;
            for path in &fragments {
                match load_web(path) {
                    Ok((fragment, warnings)) => {
                        emit(format!(
                            "ok {} ({} nodes)\n",
                            path.display(),
                            fragment.nodes.len()
                        ));
                        for w in warnings {
                            let _ = writeln!(err, "warning: {}: {w}", path.display());
                        }
                    }
                    Err(e) => {
                        failed = true;
                        let _ = writeln!(err, "error: {e}");
                    }
                }
            }
            Ok(if failed { EXIT_DOMAIN } else { EXIT_OK })
        }
        Command::Glue { manifest, output } => {
            let (fragment, report) = glue_manifest(&manifest)?;
            write_file(&output, &(fragment.to_json() + "\n"))?;
            let report_path = output.with_extension("report.json");
            write_file(&report_path, &to_json(&report))?;
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            emit(format!(
                "glued {} nodes ({} unified) into {}\n",
                fragment.nodes.len(),
                report.unified.len(),
                output.display()
            ));
            Ok(EXIT_OK)
        }
        Command::Infer {
            web,
            evidence,
            output_format,
        } => {
            let (fragment, _) = load_web(&web)?;
            let beliefs = posterior_marginals(&compile(&fragment)?, &evidence.to_evidence()?)?;
            emit(match output_format {
                OutputFormat::Table => belief_table(&beliefs),
                OutputFormat::Json => to_json(&BeliefsOutput {
                    beliefs: ranked(&beliefs),
                }),
            });
            Ok(EXIT_OK)
        }
        Command::Classify {
            web,
            evidence,
            threshold,
            output_format,
        } => {
            let (fragment, _) = load_web(&web)?;
            let beliefs = posterior_marginals(&compile(&fragment)?, &evidence.to_evidence()?)?;
            let set = classify(&beliefs, threshold.resolve());
            emit(match output_format {
                OutputFormat::Table => implied_table(&set),
                OutputFormat::Json => to_json(&set),
            });
            Ok(EXIT_OK)
        }
        Command::Session {
            web,
            agents,
            rules,
            utterances,
            transcript,
            threshold,
            batch_propagate,
            max_rounds,
            output_format,
        } => {
            let (fragment, _) = load_web(&web)?;
            let network = compile(&fragment)?;
            let config = SessionConfig {
                threshold: threshold.resolve(),
                batch_propagate,
                max_rounds,
                halt_on_conflict: true,
                ..SessionConfig::default()
            };
            let outcome = run_session(
                network,
                load_agents(&agents)?,
                &load_utterances(&utterances)?,
                load_rules(&rules)?,
                config,
            )?;
            if let Some(path) = &transcript {
                write_file(path, &outcome.transcript.to_jsonl())?;
            }
            emit(match output_format {
                OutputFormat::Table => {
                    belief_table(&outcome.beliefs) + "\n" + &implied_table(&outcome.implied)
                }
                OutputFormat::Json => to_json(&SessionOutput {
                    status: &outcome.status,
                    implied: &outcome.implied,
                    beliefs: ranked(&outcome.beliefs),
                }),
            });
            match outcome.conflict() {
                Some(conflict) => {
                    let detail = serde_json::to_string(conflict).expect("conflict serializes");
                    let _ = writeln!(err, "conflict: session halted: {detail}");
                    Ok(EXIT_CONFLICT)
                }
                None => Ok(EXIT_OK),
            }
        }
        Command::Score {
            implied,
            gold,
            output_format,
        } => {
            let implied_ids =
                parse_implied(&read(&implied)?).map_err(|source| CliError::EvalInput {
                    path: implied.clone(),
                    source,
                })?;
            let gold_standard =
                parse_gold(&read(&gold)?).map_err(|source| CliError::EvalInput {
                    path: gold.clone(),
                    source,
                })?;
            let metrics = score(&implied_ids, &gold_standard)?;
            emit(match output_format {
                OutputFormat::Table => metrics.to_table(),
                OutputFormat::Json => to_json(&metrics.report()),
            });
            Ok(EXIT_OK)
        }
        Command::Serve {
            port,
            host,
            transcript_dir,
        } => {
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
                path: PathBuf::from("."),
                source,
            })?;
            let _ = writeln!(err, "listening on http://{addr}");
            runtime
                .block_on(crate::service::serve(addr, transcript_dir))
                .map_err(|source| CliError::Io {
                    path: PathBuf::from(addr.to_string()),
                    source,
                })?;
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_flags() {
        assert_eq!(
            parse_hard("pdes=1"),
            Ok((crate::bayes::node("pdes"), State::Implied))
        );
        assert_eq!(parse_hard("pdes=0").unwrap().1, State::NotImplied);
        assert!(parse_hard("pdes=yes").is_err());
        assert!(parse_hard("pdes").is_err());
        assert_eq!(
            parse_soft("x=0.8,0.2"),
            Ok((crate::bayes::node("x"), 0.8, 0.2))
        );
        assert!(parse_soft("x=0.8").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["srw", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert!(!err.is_empty());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["srw", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("Usage"));
    }

    #[test]
    fn belief_table_is_ranked_with_four_decimals() {
        let beliefs = BeliefMap::from_map(
            [
                (crate::bayes::node("b"), 0.5),
                (crate::bayes::node("a"), 0.5),
                (crate::bayes::node("c"), 0.8),
            ]
            .into(),
        );
        assert_eq!(
            belief_table(&beliefs),
            "node  belief\nc     0.8000\na     0.5000\nb     0.5000\n"
        );
    }
}
