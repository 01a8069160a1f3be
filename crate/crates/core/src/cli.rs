//! Command-line front end. Exit codes: 0 on success, 1 on a query error
//! (reported as the same JSON error body the service returns), 2 on I/O,
//! configuration or usage errors.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::api::{self, AggregateRequest, ExpandContext, Highlight, QueryError, QueryRequest};
use crate::corpus::{apply_entity_lexicon, load_corpus};
use crate::index::Index;
use crate::matching::{EvalConfig, Mode, DEFAULT_BLOCKLIST, DEFAULT_CAP};
use crate::qbe::{CommandProvider, FixtureProvider, ParseProvider};
use crate::results::write_tsv;
use crate::service::{self, Service};

#[derive(Debug, Parser)]
#[command(name = "exsearch", version, about = "Extractive search over annotated corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an index from a JSONL corpus and save it.
    Index {
        #[arg(long, env = "EXSEARCH_CORPUS")]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a query and print hits with captures marked as `[name:text]`.
    Query {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 20)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        /// Print the service response body instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write every match as TSV.
    Export {
        #[command(flatten)]
        query: QueryArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count matches by the text of one capture.
    Aggregate {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        capture: String,
        #[arg(long)]
        json: bool,
    },
    /// Tag lexicon entries as an entity type and rebuild the index.
    Tag {
        #[command(flatten)]
        source: SourceArgs,
        /// File with one lexicon entry per line.
        #[arg(long, required_unless_present = "entry")]
        lexicon: Option<PathBuf>,
        /// A lexicon entry; may be repeated.
        #[arg(long)]
        entry: Vec<String>,
        #[arg(long)]
        type_name: String,
        /// Where to save the rebuilt index.
        #[arg(long)]
        out: PathBuf,
        /// Also write the re-tagged corpus as JSONL.
        #[arg(long)]
        corpus_out: Option<PathBuf>,
    },
    /// Serve the HTTP interface.
    Serve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        parser: ParserArgs,
        #[arg(long, env = "EXSEARCH_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Saved index file.
    #[arg(long, env = "EXSEARCH_INDEX", conflicts_with = "corpus")]
    index: Option<PathBuf>,
    /// JSONL corpus, indexed on load.
    #[arg(long, env = "EXSEARCH_CORPUS")]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Maximum matches kept per sentence.
    #[arg(long, env = "EXSEARCH_CAP", default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Comma-separated relations left out of expansions.
    #[arg(long, env = "EXSEARCH_BLOCKLIST", value_delimiter = ',')]
    blocklist: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct ParserArgs {
    /// JSONL file of pre-parsed example sentences for syntactic queries.
    #[arg(long, env = "EXSEARCH_PARSE_FIXTURES", conflicts_with = "annotator_cmd")]
    parse_fixtures: Option<PathBuf>,
    /// External annotator command for syntactic queries.
    #[arg(long, env = "EXSEARCH_ANNOTATOR_CMD")]
    annotator_cmd: Option<String>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    eval: EvalArgs,
    #[command(flatten)]
    parser: ParserArgs,
    #[arg(long, default_value = "boolean")]
    mode: Mode,
    /// Contextual restriction, as an alternative to inline `#d`.
    #[arg(long)]
    context: Option<String>,
    /// Read the query from a file instead of the argument.
    #[arg(long, conflicts_with = "query")]
    query_file: Option<PathBuf>,
    #[arg(long)]
    title: bool,
    #[arg(long)]
    paragraph: bool,
    #[arg(required_unless_present = "query_file")]
    query: Option<String>,
}

enum Failure {
    Query(QueryError),
    Setup(String),
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        Failure::Query(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Setup(e.to_string())
    }
}

fn setup<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Setup(format!("{context}: {e}"))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(rendered.as_bytes()) } else { stdout.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(Failure::Query(e)) => {
            let body = serde_json::to_string(&e.body()).expect("error body serializes");
            let _ = writeln!(stderr, "error: {body}");
            1
        }
        Err(Failure::Setup(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Index { corpus, out } => {
            let index = Index::build(load_corpus(&corpus).map_err(setup("reading corpus"))?);
            index.save(&out).map_err(setup("writing index"))?;
            writeln!(
                stderr,
                "indexed {} sentences from {} documents, version {}",
                index.len(),
                index.document_count(),
                index.version()
            )?;
        }
        Command::Query { query, limit, offset, json } => {
            let (index, provider, config, mut request) = prepare(&query)?;
            request.limit = limit;
            request.offset = offset;
            let resp = api::run_query(&index, &request, provider.as_deref(), &config)?;
            if json {
                serde_json::to_writer_pretty(&mut *stdout, &resp).map_err(setup("writing output"))?;
                writeln!(stdout)?;
            } else {
                for hit in &resp.hits {
                    writeln!(stdout, "{}\t{}\t{}", hit.doc_id, hit.sent_id, mark_up(&hit.sentence, &hit.highlights))?;
                }
                let shown = resp.hits.len();
                let flag = if resp.truncated { ", some sentences truncated" } else { "" };
                writeln!(stderr, "{shown} of {} matches in {} sentences{flag}", resp.total, resp.matched_sentences)?;
            }
        }
        Command::Export { query, out } => {
            let (index, provider, config, request) = prepare(&query)?;
            let (_, stream) = api::open_stream(&index, &request, provider.as_deref(), &config)?;
            let names = stream.capture_names().to_vec();
            let rows = match out {
                Some(path) => {
                    let file = File::create(&path).map_err(setup("creating output"))?;
                    write_tsv(BufWriter::new(file), &names, stream, index.as_ref())?
                }
                None => write_tsv(&mut *stdout, &names, stream, index.as_ref())?,
            };
            writeln!(stderr, "exported {rows} rows")?;
        }
        Command::Aggregate { query, capture, json } => {
            let (index, provider, config, request) = prepare(&query)?;
            let resp = api::run_aggregate(&index, &AggregateRequest { request, capture }, provider.as_deref(), &config)?;
            if json {
                serde_json::to_writer_pretty(&mut *stdout, &resp).map_err(setup("writing output"))?;
                writeln!(stdout)?;
            } else {
                for row in &resp.table.rows {
                    writeln!(stdout, "{}\t{}", row.count, row.display)?;
                }
                writeln!(
                    stderr,
                    "{} distinct values over {} matches, {} without `{}`",
                    resp.table.rows.len(),
                    resp.table.total,
                    resp.table.excluded,
                    resp.table.capture
                )?;
            }
        }
        Command::Tag { source, lexicon, entry, type_name, out, corpus_out } => {
            let mut entries = entry;
            if let Some(path) = lexicon {
                let file = File::open(&path).map_err(setup("reading lexicon"))?;
                for line in BufReader::new(file).lines() {
                    let line = line?;
                    if !line.trim().is_empty() {
                        entries.push(line.trim().to_string());
                    }
                }
            }
            let index = load_index(&source)?;
            let corpus = apply_entity_lexicon(index.corpus(), &entries, &type_name).map_err(setup("applying lexicon"))?;
            if let Some(path) = corpus_out {
                corpus.save(&path).map_err(setup("writing corpus"))?;
            }
            let rebuilt = Index::build(corpus);
            rebuilt.save(&out).map_err(setup("writing index"))?;
            writeln!(stderr, "tagged {} entries as {type_name}, version {}", entries.len(), rebuilt.version())?;
        }
        Command::Serve { source, eval, parser, bind } => {
            let provider = load_provider(&parser)?;
            let config = eval_config(&eval);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind).await.map_err(setup("binding"))?;
                let svc = Service::loading(provider, config);
                let loader = svc.clone();
                let load = tokio::task::spawn_blocking(move || load_index(&source).map(|i| loader.install(i)));
                writeln!(stderr, "listening on {}", listener.local_addr()?)?;
                let server = tokio::spawn(service::serve(listener, svc));
                load.await.map_err(setup("loading index"))??;
                server.await.map_err(setup("server"))?.map_err(setup("server"))
            })?;
        }
    }
    Ok(())
}

type Prepared = (Arc<Index>, Option<Arc<dyn ParseProvider>>, EvalConfig, QueryRequest);

fn prepare(args: &QueryArgs) -> Result<Prepared, Failure> {
    let text = match (&args.query, &args.query_file) {
        (_, Some(path)) => {
            let raw = std::fs::read_to_string(path).map_err(setup("reading query file"))?;
            raw.trim_end_matches(['\n', '\r']).to_string()
        }
        (Some(q), None) => q.clone(),
        (None, None) => return Err(Failure::Setup("no query given".into())),
    };
    let provider = load_provider(&args.parser)?;
    if args.mode == Mode::Syntactic && provider.is_none() {
        return Err(Failure::Setup("syntactic queries need --parse-fixtures or --annotator-cmd".into()));
    }
    let mut request = QueryRequest::new(args.mode, text);
    request.context = args.context.clone();
    request.expand_context = ExpandContext { title: args.title, paragraph: args.paragraph };
    Ok((Arc::new(load_index(&args.source)?), provider, eval_config(&args.eval), request))
}

fn eval_config(args: &EvalArgs) -> EvalConfig {
    EvalConfig {
        cap: args.cap,
        blocklist: args
            .blocklist
            .clone()
            .unwrap_or_else(|| DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect()),
        ..EvalConfig::default()
    }
}

fn load_provider(args: &ParserArgs) -> Result<Option<Arc<dyn ParseProvider>>, Failure> {
    if let Some(path) = &args.parse_fixtures {
        let fixtures = FixtureProvider::load(path).map_err(setup("reading parse fixtures"))?;
        return Ok(Some(Arc::new(fixtures)));
    }
    if let Some(cmd) = &args.annotator_cmd {
        let provider = CommandProvider::from_command_line(cmd)
            .ok_or_else(|| Failure::Setup("annotator command is empty".into()))?;
        return Ok(Some(Arc::new(provider)));
    }
    Ok(None)
}

fn load_index(source: &SourceArgs) -> Result<Index, Failure> {
    match (&source.index, &source.corpus) {
        (Some(path), _) => Index::load(path).map_err(setup(&display(path))),
        (None, Some(path)) => Ok(Index::build(load_corpus(path).map_err(setup(&display(path)))?)),
        (None, None) => Err(Failure::Setup("one of --index or --corpus is required".into())),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Wraps each capture as `[name:text]`. Overlapping captures after the
/// first one at a position are left unmarked.
pub fn mark_up(sentence: &str, highlights: &[Highlight]) -> String {
    let chars: Vec<char> = sentence.chars().collect();
    let mut out = String::with_capacity(sentence.len() + 16);
    let mut pos = 0;
    for h in highlights {
        if h.char_start < pos || h.char_end > chars.len() {
            continue;
        }
        out.extend(&chars[pos..h.char_start]);
        out.push('[');
        out.push_str(&h.capture);
        out.push(':');
        out.extend(&chars[h.char_start..h.char_end]);
        out.push(']');
        pos = h.char_end;
    }
    out.extend(&chars[pos..]);
    out
}
