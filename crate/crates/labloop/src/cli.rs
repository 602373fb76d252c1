//! `labloop` command line: one subcommand per campaign stage plus `run-all`,
//! `simulate`, `status` and `serve`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand, ValueEnum};
use labloop_core::virtlab::WorldModel;
use labloop_core::{curation_digest, normalize_recipe, Recipe, Role, ScoreBreakdown};
use serde_json::{json, Value};

use crate::campaign::{
    read_json, Campaign, CampaignConfig, CampaignError, Report, RoundOptions, SelectionInput, Services, Stage,
};
use crate::evaluator::{EvalError, Evaluator, VirtlabEvaluator};

/// Test hook: abort the process once this many evaluations have finished.
pub const ABORT_AFTER_ENV: &str = "LABLOOP_ABORT_AFTER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "labloop", version, about = "Literature-to-lab campaign engine")]
pub struct Cli {
    /// Campaign directory.
    #[arg(long, global = true)]
    pub campaign: Option<PathBuf>,
    /// Campaign config file (init, run-all, simulate).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Article corpus directory (init).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Master seed (init); noise seed (simulate).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for relevance scoring, mining and evaluation.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Article relevance threshold (init); highlight threshold (candidates).
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Total rounds (init); rounds to run now (run, run-all).
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a campaign directory from a config.
    Init {
        #[arg(long)]
        requirement: Option<String>,
        /// Mock gateway fixture.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Generate search keywords from the requirement.
    Analyze,
    /// Search the corpus and score article relevance.
    Retrieve,
    /// Extract candidate substances from the relevant articles.
    Mine,
    /// Print the curation digest.
    Candidates {
        /// Include candidates below the threshold.
        #[arg(long)]
        all: bool,
    },
    /// Approve ingredients; give one --role per --cas, in the same order.
    Select {
        #[arg(long = "cas", required = true)]
        cas: Vec<String>,
        #[arg(long = "role", required = true, value_parser = parse_role)]
        role: Vec<Role>,
    },
    /// Run optimization rounds (all remaining unless --rounds).
    Run {
        /// Exploration weight for new rounds, replacing the schedule.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Write and print report.json.
    Report,
    /// Stage, version and progress of a campaign.
    Status,
    /// Evaluate one recipe file in the virtual lab.
    Simulate {
        /// JSON object mapping CAS codes to nonnegative amounts.
        #[arg(long)]
        recipe: PathBuf,
        /// World model JSON (defaults to the reference world).
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Init if needed, then every stage; stops at the selection gate unless
    /// --cas/--role are given.
    RunAll {
        #[arg(long)]
        requirement: Option<String>,
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long = "cas")]
        cas: Vec<String>,
        #[arg(long = "role", value_parser = parse_role)]
        role: Vec<Role>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory holding one subdirectory per campaign.
        #[arg(long, default_value = "campaigns")]
        root: PathBuf,
    },
}

fn parse_role(s: &str) -> Result<Role, String> {
    Role::parse(s).ok_or_else(|| format!("unknown role {s:?} (colorant, additive, solvent, reactor, adjuster)"))
}

enum Failure {
    Usage(String),
    Domain { code: &'static str, message: String },
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Failure {
        Failure::Domain { code: e.code(), message: e.to_string() }
    }
}

struct Output {
    human: String,
    json: Value,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let format = cli.format;
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = match format {
                Format::Human => write!(stdout, "{}", out.human),
                Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).expect("json")),
            };
            0
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain { code, message }) => {
            if format == Format::Json {
                println!("{}", json!({ "error": { "code": code, "message": message } }));
            }
            eprintln!("error[{code}]: {message}");
            1
        }
    }
}

fn workers(cli: &Cli) -> usize {
    cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
}

fn campaign_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.campaign.as_deref().ok_or_else(|| Failure::Usage("--campaign is required".into()))
}

fn execute(cli: Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Init { requirement, fixture, top_k, batch_size } => {
            let dir = campaign_dir(&cli)?;
            let config = build_config(&cli, requirement.as_deref(), fixture.as_deref(), *top_k, *batch_size)?;
            init(dir, config)
        }
        Command::Analyze => stage_command(&cli, Stage::Analysis),
        Command::Retrieve => stage_command(&cli, Stage::Retrieval),
        Command::Mine => stage_command(&cli, Stage::Mining),
        Command::Candidates { all } => {
            let c = Campaign::open(campaign_dir(&cli)?)?;
            candidates(&c, *all, cli.threshold)
        }
        Command::Select { cas, role } => select(&cli, cas, role),
        Command::Run { beta } => {
            let mut c = Campaign::open(campaign_dir(&cli)?)?;
            run_rounds(&mut c, workers(&cli), cli.rounds, *beta)
        }
        Command::Report => {
            let c = Campaign::open(campaign_dir(&cli)?)?;
            let report = c.write_report()?;
            Ok(Output { human: render_report(&report), json: serde_json::to_value(&report).expect("json") })
        }
        Command::Status => {
            let c = Campaign::open(campaign_dir(&cli)?)?;
            Ok(status(&c))
        }
        Command::Simulate { recipe, world } => simulate(&cli, recipe, world.as_deref()),
        Command::RunAll { requirement, fixture, cas, role, beta } => {
            run_all(&cli, requirement.as_deref(), fixture.as_deref(), cas, role, *beta)
        }
        Command::Serve { addr, root } => {
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Failure::Domain { code: "io_error", message: e.to_string() })?;
            rt.block_on(crate::api::serve(addr, root.clone(), workers(&cli)))
                .map_err(|e| Failure::Domain { code: "io_error", message: e.to_string() })?;
            Ok(Output { human: String::new(), json: Value::Null })
        }
    }
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(p).map_err(|e| Failure::Domain { code: "io_error", message: format!("{}: {e}", p.display()) })
}

fn build_config(
    cli: &Cli,
    requirement: Option<&str>,
    fixture: Option<&Path>,
    top_k: Option<usize>,
    batch_size: Option<usize>,
) -> Result<CampaignConfig, Failure> {
    let mut config = match (&cli.config, requirement, &cli.corpus) {
        (Some(path), _, _) => CampaignConfig::load(path)?,
        (None, Some(req), Some(corpus)) => CampaignConfig::new(req, corpus),
        _ => return Err(Failure::Usage("give --config, or --requirement with --corpus".into())),
    };
    if let Some(req) = requirement {
        config.requirement = req.to_string();
    }
    if let Some(corpus) = &cli.corpus {
        config.corpus = corpus.clone();
    }
    config.corpus = absolute(&config.corpus)?;
    if let Some(f) = fixture {
        config.gateway.fixture = Some(f.to_path_buf());
    }
    if let Some(f) = config.gateway.fixture.take() {
        config.gateway.fixture = Some(absolute(&f)?);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(t) = cli.threshold {
        config.article_threshold = t;
    }
    if let Some(r) = cli.rounds {
        config.set_rounds(r);
    }
    if let Some(k) = top_k {
        config.top_k = k;
    }
    if let Some(b) = batch_size {
        config.batch_size = b;
    }
    Ok(config)
}

fn init(dir: &Path, config: CampaignConfig) -> Result<Output, Failure> {
    let (campaign, created) = match Campaign::create(dir, config.clone()) {
        Ok(c) => (c, true),
        Err(CampaignError::AlreadyExists(p)) => {
            let existing = Campaign::open(dir)?;
            if existing.config() != &config {
                return Err(CampaignError::AlreadyExists(p).into());
            }
            (existing, false)
        }
        Err(e) => return Err(e.into()),
    };
    let human = if created {
        format!("created campaign {} at {}\n", campaign.id(), dir.display())
    } else {
        format!("campaign {} already initialized\n", campaign.id())
    };
    Ok(Output { human, json: json!({ "campaign": campaign.id(), "created": created, "stage": campaign.stage() }) })
}

fn stage_command(cli: &Cli, stage: Stage) -> Result<Output, Failure> {
    let mut c = Campaign::open(campaign_dir(cli)?)?;
    let ran = if c.stage() > stage {
        false
    } else {
        let services = Services::from_config(c.config(), workers(cli))?;
        c.complete_stage(stage, &services)?
    };
    c.reload()?;
    Ok(stage_output(&c, stage, ran))
}

fn stage_output(c: &Campaign, stage: Stage, ran: bool) -> Output {
    let s = c.state();
    let note = if ran { "" } else { " (already done)" };
    match stage {
        Stage::Analysis => Output {
            human: format!("keywords{note}:\n{}", s.keywords.iter().map(|k| format!("  {k}\n")).collect::<String>()),
            json: json!({ "ran": ran, "stage": s.stage, "keywords": s.keywords }),
        },
        Stage::Retrieval => Output {
            human: format!(
                "retrieved {} articles, {} at or above the relevance threshold{note}\n",
                s.articles.len(),
                s.relevant_articles.len()
            ),
            json: json!({
                "ran": ran,
                "stage": s.stage,
                "retrieved": s.articles.len(),
                "relevant": s.relevant_articles.len(),
            }),
        },
        _ => {
            let stats = s.mining.as_ref();
            let candidates = s.candidates.as_ref().map_or(0, |l| l.len());
            let highlighted = s.candidates.as_ref().map_or(0, |l| l.highlighted(c.config().reagent_threshold).len());
            let mut human = format!("mined {candidates} candidate substances, {highlighted} highlighted{note}\n");
            if let Some(st) = stats {
                human.push_str(&format!(
                    "  articles mined {}/{}, missing fulltext {}, records {}, rejected CAS {}, retries {}\n",
                    st.articles_mined,
                    st.articles_requested,
                    st.missing_fulltext.len(),
                    st.records,
                    st.rejected_cas,
                    st.retries_used
                ));
            }
            Output {
                human,
                json: json!({
                    "ran": ran,
                    "stage": s.stage,
                    "candidates": candidates,
                    "highlighted": highlighted,
                    "stats": stats,
                }),
            }
        }
    }
}

fn candidates(c: &Campaign, all: bool, threshold: Option<f64>) -> Result<Output, Failure> {
    let list = c
        .state()
        .candidates
        .as_ref()
        .ok_or_else(|| CampaignError::PreconditionFailed("no candidates yet; run mine first".into()))?;
    let threshold = threshold.unwrap_or(c.config().reagent_threshold);
    let shown = if all { list.clone() } else { list.highlighted(threshold) };
    let digest =
        curation_digest(&shown).map_err(|e| Failure::Domain { code: "no_candidates", message: e.to_string() })?;
    Ok(Output {
        human: digest.text,
        json: json!({ "threshold": if all { Value::Null } else { json!(threshold) }, "candidates": digest.listing }),
    })
}

fn selection_inputs(cas: &[String], role: &[Role]) -> Result<Vec<SelectionInput>, Failure> {
    if cas.len() != role.len() {
        return Err(Failure::Usage(format!("{} --cas values but {} --role values", cas.len(), role.len())));
    }
    Ok(cas.iter().zip(role).map(|(c, r)| SelectionInput { cas: c.clone(), role: *r }).collect())
}

fn select(cli: &Cli, cas: &[String], role: &[Role]) -> Result<Output, Failure> {
    let picks = selection_inputs(cas, role)?;
    let mut c = Campaign::open(campaign_dir(cli)?)?;
    let selection = c.submit_selection(&picks)?.clone();
    let mut human =
        format!("selected {} ingredients (dimension {})\n", selection.ingredients.len(), selection.dimension);
    for i in &selection.ingredients {
        human.push_str(&format!("  {:<12} {:<9} {}\n", i.cas, i.role.as_str(), i.name));
    }
    Ok(Output { human, json: json!({ "stage": c.stage(), "selection": selection }) })
}

/// Aborts the process after a fixed number of evaluations.
struct AbortAfter<'a> {
    inner: &'a dyn Evaluator,
    limit: usize,
    count: AtomicUsize,
}

impl Evaluator for AbortAfter<'_> {
    fn evaluate(&self, recipe: &Recipe, seed: u64) -> Result<ScoreBreakdown, EvalError> {
        if self.count.fetch_add(1, Ordering::SeqCst) >= self.limit {
            std::process::abort();
        }
        self.inner.evaluate(recipe, seed)
    }
}

fn run_rounds(c: &mut Campaign, workers: usize, rounds: Option<usize>, beta: Option<f64>) -> Result<Output, Failure> {
    let base = VirtlabEvaluator::from_config(c.config());
    let abort_after = std::env::var(ABORT_AFTER_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    let guarded;
    let evaluator: &dyn Evaluator = match abort_after {
        Some(limit) => {
            guarded = AbortAfter { inner: &base, limit, count: AtomicUsize::new(0) };
            &guarded
        }
        None => &base,
    };
    if c.stage() == Stage::Done {
        return Ok(Output {
            human: "all rounds are complete\n".into(),
            json: json!({ "stage": Stage::Done, "rounds": [] }),
        });
    }
    let remaining = c.config().rounds.saturating_sub(c.state().completed_count());
    let todo = rounds.unwrap_or(remaining).min(remaining);
    let opts = RoundOptions { beta_override: beta, workers, progress: None };
    let mut human = String::new();
    let mut summaries = Vec::new();
    for _ in 0..todo {
        let s = c.run_round(evaluator, &opts)?;
        human.push_str(&format!(
            "round {}: {} evaluations, max {:.4}, best so far {:.4}\n",
            s.round, s.evaluations, s.round_max, s.best_so_far
        ));
        summaries.push(s);
    }
    c.reload()?;
    Ok(Output { human, json: json!({ "stage": c.stage(), "rounds": summaries }) })
}

fn status(c: &Campaign) -> Output {
    let s = c.state();
    let best = s.best_so_far().last().copied();
    let open = s.open_round().map(|r| json!({ "round": r.index, "status": r.status, "error": r.error }));
    let human = format!(
        "campaign {}: stage {}, version {}, rounds {}/{}{}\n",
        c.id(),
        s.stage,
        s.version,
        s.completed_count(),
        c.config().rounds,
        best.map(|b| format!(", best {b:.4}")).unwrap_or_default()
    );
    Output {
        human,
        json: json!({
            "campaign": c.id(),
            "stage": s.stage,
            "version": s.version,
            "rounds_completed": s.completed_count(),
            "rounds_planned": c.config().rounds,
            "best": best,
            "open_round": open,
        }),
    }
}

fn simulate(cli: &Cli, recipe: &Path, world: Option<&Path>) -> Result<Output, Failure> {
    let raw: serde_json::Map<String, Value> = read_json(recipe)?;
    let mut amounts = Vec::with_capacity(raw.len());
    for (k, v) in raw {
        let a = v.as_f64().ok_or_else(|| Failure::Domain {
            code: "invalid_recipe",
            message: format!("{k}: amount must be a number"),
        })?;
        amounts.push((k, a));
    }
    let recipe =
        normalize_recipe(&amounts).map_err(|e| Failure::Domain { code: "invalid_recipe", message: e.to_string() })?;
    let mut config = match &cli.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::new("", Path::new(".")),
    };
    if let Some(w) = world {
        config.world = Some(read_json::<WorldModel>(w)?);
    }
    let evaluator = VirtlabEvaluator::from_config(&config);
    let b = evaluator
        .evaluate(&recipe, cli.seed.unwrap_or(0))
        .map_err(|e| Failure::Domain { code: "evaluator_failure", message: e.to_string() })?;
    let human = format!(
        "amplitude {:.4}\nresponse time {:.1} s\nreversibility {:.4}\nsensitivity {:.6}\nscore {:.4}\n",
        b.amplitude,
        b.response_time_s,
        b.reversibility,
        b.sensitivity,
        b.score.unwrap_or(0.0)
    );
    Ok(Output { human, json: json!({ "recipe": recipe, "breakdown": b }) })
}

fn run_all(
    cli: &Cli,
    requirement: Option<&str>,
    fixture: Option<&Path>,
    cas: &[String],
    role: &[Role],
    beta: Option<f64>,
) -> Result<Output, Failure> {
    let dir = campaign_dir(cli)?;
    let picks = selection_inputs(cas, role)?;
    let mut human = String::new();
    let mut steps = serde_json::Map::new();
    if !dir.join("state.json").exists() {
        let out = init(dir, build_config(cli, requirement, fixture, None, None)?)?;
        human.push_str(&out.human);
        steps.insert("init".into(), out.json);
    }
    for (name, stage) in [("analyze", Stage::Analysis), ("retrieve", Stage::Retrieval), ("mine", Stage::Mining)] {
        let out = stage_command(cli, stage)?;
        human.push_str(&out.human);
        steps.insert(name.into(), out.json);
    }
    let mut c = Campaign::open(dir)?;
    if picks.is_empty() {
        if c.stage() == Stage::Feedback {
            let out = candidates(&c, false, cli.threshold)?;
            human.push_str(&out.human);
            human.push_str("\nwaiting for a selection (pass --cas/--role or run `select`)\n");
            steps.insert("candidates".into(), out.json);
        }
    } else {
        c.submit_selection(&picks)?;
        steps.insert("select".into(), json!({ "selection": c.state().selection }));
    }
    c.reload()?;
    if matches!(c.stage(), Stage::Execution | Stage::Done) {
        let out = run_rounds(&mut c, workers(cli), cli.rounds, beta)?;
        human.push_str(&out.human);
        steps.insert("run".into(), out.json);
        if c.state().completed_count() > 0 {
            c.write_report()?;
        }
    }
    steps.insert("stage".into(), json!(c.stage()));
    Ok(Output { human, json: Value::Object(steps) })
}

fn render_report(r: &Report) -> String {
    let mut s = String::new();
    s.push_str("round  beta   n    max     median  near-zero\n");
    for round in &r.rounds {
        s.push_str(&format!(
            "{:<6} {:<6} {:<4} {:<7.4} {:<7.4} {:.0}%\n",
            round.round,
            round.beta.map(|b| format!("{b}")).unwrap_or_else(|| "-".into()),
            round.evaluations,
            round.max,
            round.median,
            round.near_zero_fraction * 100.0
        ));
    }
    s.push_str("\ntop recipes\n");
    for rec in &r.top {
        let parts: Vec<String> = rec.recipe.iter().map(|(cas, f)| format!("{cas}={f:.3}")).collect();
        s.push_str(&format!("  {} {:.4}  {}\n", rec.recipe_id, rec.score, parts.join(" ")));
    }
    if let Some(cal) = &r.calibration {
        s.push_str(&format!(
            "\ncalibration of {} + {}: RMSE {:.2}% RH\n",
            cal.recipe_ids[0], cal.recipe_ids[1], cal.rmse_percent
        ));
    }
    s.push_str(&format!("\n{} records\n", r.records.len()));
    s
}
