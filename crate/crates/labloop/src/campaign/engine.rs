use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use labloop_core::acquisition::propose_points;
use labloop_core::gp::fit;
use labloop_core::seed::derive;
use labloop_core::simplex::sample_simplex;
use labloop_core::{Recipe, Role};
use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use super::exchange::compile_exchange_file;
use super::report::{round_report, Report};
use super::state::{
    CampaignState, Evaluation, PlannedRecipe, RoundRecord, RoundStatus, SelectedIngredient, Selection, Stage,
};
use super::store::{read_json, to_pretty, write_atomic, write_json, CampaignDir};
use super::CampaignError;
use crate::evaluator::Evaluator;
use crate::gateway::Gateway;
use crate::literature::{self, filter_relevant, Corpus};
use crate::miner;
use crate::parallel;

/// External collaborators for the literature stages.
#[derive(Debug, Clone)]
pub struct Services {
    pub gateway: Gateway,
    pub corpus: Corpus,
    pub workers: usize,
}

impl Services {
    pub fn from_config(config: &CampaignConfig, workers: usize) -> Result<Services, CampaignError> {
        Ok(Services {
            gateway: Gateway::from_config(&config.gateway)?,
            corpus: Corpus::open(&config.corpus)?,
            workers: workers.max(1),
        })
    }
}

/// One `{cas, role}` pick from the candidate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionInput {
    pub cas: String,
    pub role: Role,
}

pub struct RoundOptions<'a> {
    /// Replaces the scheduled exploration weight for a new round.
    pub beta_override: Option<f64>,
    pub workers: usize,
    /// Called with `(evaluated, batch_size)` as evaluations finish.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

impl Default for RoundOptions<'_> {
    fn default() -> Self {
        RoundOptions { beta_override: None, workers: 1, progress: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub beta: Option<f64>,
    pub evaluations: usize,
    pub round_max: f64,
    pub best_so_far: f64,
    pub stage: Stage,
}

/// A campaign directory with its config and last committed state.
///
/// Every mutation takes the directory lock, reloads the committed state,
/// applies one step and commits the next version.
#[derive(Debug, Clone)]
pub struct Campaign {
    dir: CampaignDir,
    config: CampaignConfig,
    state: CampaignState,
}

impl Campaign {
    /// Creates the directory layout, `config.json` and a fresh `state.json`.
    pub fn create(root: &Path, config: CampaignConfig) -> Result<Campaign, CampaignError> {
        config.validate()?;
        let dir = CampaignDir::new(root);
        if dir.state().exists() {
            return Err(CampaignError::AlreadyExists(root.to_path_buf()));
        }
        std::fs::create_dir_all(root).map_err(|e| CampaignError::io(root, e))?;
        let _lock = dir.lock()?;
        write_json(&dir.config(), &config)?;
        let state = CampaignState::default();
        write_json(&dir.state(), &state)?;
        Ok(Campaign { dir, config, state })
    }

    pub fn open(root: &Path) -> Result<Campaign, CampaignError> {
        let dir = CampaignDir::new(root);
        if !dir.state().exists() {
            return Err(CampaignError::NotFound(root.to_path_buf()));
        }
        let config: CampaignConfig = read_json(&dir.config())?;
        let state: CampaignState = read_json(&dir.state())?;
        Ok(Campaign { dir, config, state })
    }

    pub fn id(&self) -> String {
        self.dir.id()
    }

    pub fn dir(&self) -> &CampaignDir {
        &self.dir
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn stage(&self) -> Stage {
        self.state.stage
    }

    /// Rereads the committed state.
    pub fn reload(&mut self) -> Result<(), CampaignError> {
        self.state = read_json(&self.dir.state())?;
        Ok(())
    }

    fn commit(&mut self) -> Result<(), CampaignError> {
        self.state.version += 1;
        write_atomic(&self.dir.state(), &to_pretty(&self.state))
    }

    /// Runs the current non-gated stage and returns the new stage.
    pub fn advance(&mut self, services: &Services) -> Result<Stage, CampaignError> {
        let _lock = self.dir.lock()?;
        self.reload()?;
        self.run_stage(services)?;
        Ok(self.state.stage)
    }

    /// Runs `stage` if it is the current one; a no-op returning `false` if
    /// the campaign is already past it.
    pub fn complete_stage(&mut self, stage: Stage, services: &Services) -> Result<bool, CampaignError> {
        let _lock = self.dir.lock()?;
        self.reload()?;
        if self.state.stage > stage {
            return Ok(false);
        }
        if self.state.stage < stage {
            return Err(CampaignError::PreconditionFailed(format!(
                "campaign is at {}; finish that stage before {stage}",
                self.state.stage
            )));
        }
        self.run_stage(services)?;
        Ok(true)
    }

    fn run_stage(&mut self, services: &Services) -> Result<(), CampaignError> {
        let cfg = &self.config;
        match self.state.stage {
            Stage::Analysis => {
                let kw = literature::generate_keywords(&services.gateway, &cfg.requirement)?;
                self.state.keywords = kw.keywords;
                self.state.stage = Stage::Retrieval;
            }
            Stage::Retrieval => {
                let hits = literature::search(&services.corpus, &self.state.keywords, cfg.top_k)?;
                let scored = literature::score_all(&services.gateway, &hits, &cfg.requirement, services.workers)?;
                self.state.relevant_articles =
                    filter_relevant(&scored, cfg.article_threshold).into_iter().map(|a| a.id).collect();
                self.state.articles = scored;
                self.state.stage = Stage::Mining;
            }
            Stage::Mining => {
                let outcome = miner::mine(
                    &services.gateway,
                    &services.corpus,
                    &self.state.relevant_articles,
                    &cfg.requirement,
                    services.workers,
                )?;
                write_json(&self.dir.candidates(), &outcome.candidates)?;
                write_json(&self.dir.mining_stats(), &outcome.stats)?;
                self.state.candidates = Some(outcome.candidates);
                self.state.mining = Some(outcome.stats);
                self.state.stage = Stage::Feedback;
            }
            Stage::Feedback => {
                return Err(CampaignError::PreconditionFailed(
                    "campaign is waiting for the researcher's ingredient selection".into(),
                ))
            }
            Stage::Execution => {
                return Err(CampaignError::PreconditionFailed(
                    "campaign is executing rounds; advance does not apply".into(),
                ))
            }
            Stage::Done => return Err(CampaignError::PreconditionFailed("campaign is done".into())),
        }
        self.commit()
    }

    /// Records the approved ingredients and opens execution. Resubmitting
    /// the accepted selection is a no-op.
    pub fn submit_selection(&mut self, picks: &[SelectionInput]) -> Result<&Selection, CampaignError> {
        let _lock = self.dir.lock()?;
        self.reload()?;
        if self.state.stage != Stage::Feedback {
            let same = self.state.selection.as_ref().is_some_and(|s| {
                s.ingredients.len() == picks.len()
                    && s.ingredients.iter().zip(picks).all(|(a, b)| a.cas == b.cas && a.role == b.role)
            });
            if same {
                return Ok(self.state.selection.as_ref().expect("checked"));
            }
            return Err(CampaignError::PreconditionFailed(format!(
                "selection is only accepted at the feedback stage (campaign is at {})",
                self.state.stage
            )));
        }
        let candidates =
            self.state.candidates.as_ref().ok_or_else(|| CampaignError::PreconditionFailed("no candidates".into()))?;
        if picks.is_empty() {
            return Err(CampaignError::InvalidSelection("no ingredients selected".into()));
        }
        let mut seen = BTreeSet::new();
        let mut ingredients = Vec::with_capacity(picks.len());
        for p in picks {
            if !seen.insert(p.cas.as_str()) {
                return Err(CampaignError::InvalidSelection(format!("{} selected twice", p.cas)));
            }
            let entry = candidates.get(&p.cas).ok_or_else(|| CampaignError::UnknownCandidate(p.cas.clone()))?;
            ingredients.push(SelectedIngredient { cas: p.cas.clone(), name: entry.name.clone(), role: p.role });
        }
        let rules = self.config.selection_rules;
        let colorants = picks.iter().filter(|p| p.role == Role::Colorant).count();
        let solvents = picks.iter().filter(|p| p.role == Role::Solvent).count();
        if colorants < rules.min_colorants {
            return Err(CampaignError::RoleConstraintViolated(format!(
                "need at least {} colorant(s), got {colorants}",
                rules.min_colorants
            )));
        }
        if solvents != rules.solvents {
            return Err(CampaignError::RoleConstraintViolated(format!(
                "need exactly {} solvent(s), got {solvents}",
                rules.solvents
            )));
        }
        if picks.len() < 2 {
            return Err(CampaignError::InvalidSelection("a mixture needs at least two ingredients".into()));
        }
        let dimension = ingredients.len() - 1;
        self.state.selection = Some(Selection { ingredients, dimension });
        self.state.stage = Stage::Execution;
        self.commit()?;
        Ok(self.state.selection.as_ref().expect("just set"))
    }

    /// Plans (or resumes) the next round, writes its exchange file,
    /// evaluates it and commits the results.
    pub fn run_round(&mut self, evaluator: &dyn Evaluator, opts: &RoundOptions) -> Result<RoundSummary, CampaignError> {
        let _lock = self.dir.lock()?;
        self.reload()?;
        match self.state.stage {
            Stage::Execution => {}
            Stage::Done => return Err(CampaignError::PreconditionFailed("all rounds are complete".into())),
            s => {
                return Err(CampaignError::PreconditionFailed(format!(
                    "rounds need an accepted selection (campaign is at {s})"
                )))
            }
        }
        if let Some(b) = opts.beta_override {
            if !(b.is_finite() && b >= 0.0) {
                return Err(CampaignError::InvalidConfig("beta must be finite and nonnegative".into()));
            }
        }
        let selection =
            self.state.selection.clone().ok_or_else(|| CampaignError::PreconditionFailed("no selection".into()))?;
        let cas = selection.cas_codes();

        if self.state.open_round().is_none() {
            let round = self.plan_round(&cas, opts.beta_override)?;
            self.state.rounds.push(round);
            self.commit()?;
        }
        let pos = self.state.rounds.len() - 1;
        let index = self.state.rounds[pos].index;
        let batch = self.state.rounds[pos].batch.clone();
        let exchange = compile_exchange_file(
            &self.id(),
            index,
            &batch,
            &cas,
            self.config.exchange_mode,
            self.config.total_volume_ul,
        )?;
        write_json(&self.dir.exchange(index), &exchange)?;

        let done = AtomicUsize::new(0);
        let total = batch.len();
        let outcomes = parallel::map(opts.workers, &batch, |p| {
            let r = evaluator.evaluate(&p.recipe, p.seed);
            let n = done.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(cb) = opts.progress {
                cb(n, total);
            }
            r
        });

        let mut results = Vec::with_capacity(total);
        for (p, r) in batch.iter().zip(outcomes) {
            match r {
                Ok(b) => results.push(Evaluation {
                    recipe_id: p.recipe_id.clone(),
                    recipe: p.recipe.clone(),
                    seed: p.seed,
                    score: b.score.unwrap_or(0.0),
                    breakdown: b,
                }),
                Err(e) => {
                    let message = format!("{}: {e}", p.recipe_id);
                    let round = &mut self.state.rounds[pos];
                    round.status = RoundStatus::Failed;
                    round.error = Some(message.clone());
                    self.commit()?;
                    return Err(CampaignError::EvaluatorFailure { round: index, message });
                }
            }
        }

        let mut lines = Vec::new();
        for e in &results {
            let mut row = serde_json::to_vec(&serde_json::json!({
                "round": index,
                "recipe_id": e.recipe_id,
                "recipe": e.recipe,
                "seed": e.seed,
                "breakdown": e.breakdown,
                "score": e.score,
            }))
            .expect("serializable");
            row.push(b'\n');
            lines.extend(row);
        }
        write_atomic(&self.dir.round(index), &lines)?;

        let round = &mut self.state.rounds[pos];
        round.results = results;
        round.batch.clear();
        round.status = RoundStatus::Complete;
        round.error = None;
        let beta = round.beta;
        let round_max = round.results.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        if self.state.completed_count() >= self.config.rounds {
            self.state.stage = Stage::Done;
        }
        self.commit()?;
        write_json(&self.dir.report(), &round_report(&self.state, &self.config)?)?;

        Ok(RoundSummary {
            round: index,
            beta,
            evaluations: total,
            round_max,
            best_so_far: self.state.best_so_far().last().copied().unwrap_or(round_max),
            stage: self.state.stage,
        })
    }

    fn plan_round(&self, cas: &[String], beta_override: Option<f64>) -> Result<RoundRecord, CampaignError> {
        let cfg = &self.config;
        let index = self.state.completed_count() + 1;
        let batch_seed = derive(cfg.seed, "batch", index as u64);
        let (beta, points) = if index == 1 {
            (None, sample_simplex(cfg.batch_size, cas.len(), batch_seed))
        } else {
            let beta = beta_override.unwrap_or(cfg.beta_schedule[(index - 1).min(cfg.beta_schedule.len() - 1)]);
            let (xs, ys): (Vec<Vec<f64>>, Vec<f64>) =
                self.state.history().map(|e| (cas.iter().map(|c| e.recipe.fraction(c)).collect(), e.score)).unzip();
            let model = fit(&xs, &ys).map_err(|e| CampaignError::Optimizer(e.to_string()))?;
            let points = propose_points(&model, &cfg.acquisition.with_beta(beta), cfg.batch_size, batch_seed)
                .map_err(|e| CampaignError::Optimizer(e.to_string()))?;
            (Some(beta), points)
        };
        let batch = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let recipe = Recipe::from_fractions(cas.iter().cloned(), p)
                    .map_err(|e| CampaignError::Optimizer(e.to_string()))?
                    .quantized();
                Ok(PlannedRecipe {
                    recipe_id: format!("r{index}-{i:03}"),
                    recipe,
                    seed: derive(cfg.seed, "eval", ((index as u64) << 32) | i as u64),
                })
            })
            .collect::<Result<Vec<_>, CampaignError>>()?;
        Ok(RoundRecord { index, beta, status: RoundStatus::Pending, batch, results: Vec::new(), error: None })
    }

    pub fn report(&self) -> Result<Report, CampaignError> {
        round_report(&self.state, &self.config)
    }

    /// Computes the report and writes `report.json`.
    pub fn write_report(&self) -> Result<Report, CampaignError> {
        let report = self.report()?;
        write_json(&self.dir.report(), &report)?;
        Ok(report)
    }
}
