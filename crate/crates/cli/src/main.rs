use std::path::PathBuf;
use std::process::ExitCode;

use abductive_ir::abduction::{write_bow_data, AbducedQuery, AbductionModel};
use abductive_ir::answering::{Aggregation, Prediction};
use abductive_ir::corpus::write_jsonl;
use abductive_ir::facts::{write_sts_pairs, FactList};
use abductive_ir::hypothesis::Hypothesis;
use abductive_ir::knowledge::KnowledgeList;
use abductive_ir::metrics::{render_table, write_report};
use abductive_ir::pipeline::{
    self, read_stage, AnswerScorerKind, FactScorerKind, IndexKind, Pipeline, PipelineConfig, RedundancyKind,
    RelevanceKind,
};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Knowledge hunting for open-book multiple-choice QA.
#[derive(Parser)]
#[command(name = "abduct-ir", version)]
struct Cli {
    /// TOML file with pipeline settings; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn every (question, option) pair into a hypothesis.
    Hypothesize,
    /// Retrieve the top facts for each hypothesis.
    RetrieveFacts,
    /// Write (hypothesis, fact, target) pairs for similarity fine-tuning.
    GenStsPairs,
    /// Build missing-knowledge queries from hypotheses and facts.
    Abduce,
    /// Write labelled words for the bag-of-words abduction model.
    GenBowData,
    /// Retrieve a candidate pool for each abduced query.
    RetrieveKnowledge,
    /// Re-rank candidate pools by information gain.
    Rerank,
    /// Score passages and aggregate predictions.
    Answer,
    /// Score predictions against the answer keys.
    Evaluate,
    /// Run every stage end to end.
    Run,
    /// Sweep the number of facts and knowledge sentences.
    Grid,
}

/// One flag per config key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    questions: Option<PathBuf>,
    #[arg(long, global = true)]
    facts: Option<PathBuf>,
    #[arg(long, global = true)]
    knowledge: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    word_probs: Option<PathBuf>,
    #[arg(long, global = true)]
    gen_candidates: Option<PathBuf>,
    #[arg(long, global = true)]
    index_cache: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    fact_scorer: Option<FactScorerKind>,
    #[arg(long, global = true)]
    relevance: Option<RelevanceKind>,
    #[arg(long, global = true)]
    redundancy: Option<RedundancyKind>,
    #[arg(long, global = true)]
    answer_scorer: Option<AnswerScorerKind>,
    #[arg(long, global = true)]
    index_mode: Option<IndexKind>,
    #[arg(long, global = true)]
    abduction: Option<AbductionModel>,
    #[arg(long, global = true)]
    aggregation: Option<Aggregation>,
    #[arg(long, global = true)]
    remote_url: Option<String>,
    #[arg(long, global = true)]
    remote_model_id: Option<String>,
    #[arg(long, global = true)]
    remote_batch_size: Option<usize>,
    #[arg(long, global = true)]
    remote_timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    n_facts: Option<usize>,
    #[arg(long, global = true)]
    n_knowledge: Option<usize>,
    #[arg(long, global = true)]
    abduction_facts: Option<usize>,
    #[arg(long, global = true)]
    pool_m: Option<usize>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, global = true)]
    max_tokens: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    samples_per_q: Option<usize>,
    #[arg(long, global = true)]
    sim_threshold: Option<f64>,
    /// Comma-separated fact counts for `grid`.
    #[arg(long, global = true, value_delimiter = ',')]
    grid_facts: Option<Vec<usize>>,
    /// Comma-separated knowledge counts for `grid`.
    #[arg(long, global = true, value_delimiter = ',')]
    grid_knowledge: Option<Vec<usize>>,
}

macro_rules! apply {
    ($src:ident, $dst:ident; $($path:ident),* ; $($plain:ident),*) => {
        $(if let Some(v) = $src.$path { $dst.$path = Some(v); })*
        $(if let Some(v) = $src.$plain { $dst.$plain = v; })*
    };
}

impl Overrides {
    fn apply(self, c: &mut PipelineConfig) {
        let o = self;
        apply!(o, c;
            questions, facts, knowledge, embeddings, stopwords, word_probs, gen_candidates, index_cache, remote_url;
            out_dir, fact_scorer, relevance, redundancy, answer_scorer, index_mode, abduction, aggregation,
            remote_model_id, remote_batch_size, remote_timeout_ms, n_facts, n_knowledge, abduction_facts,
            pool_m, theta, top_k, max_tokens, seed, parallelism, samples_per_q, sim_threshold,
            grid_facts, grid_knowledge
        );
    }
}

macro_rules! write_stage {
    ($p:expr, $file:expr, $items:expr) => {{
        let items = $items;
        let path = $p.out_path($file);
        write_jsonl(&path, &items)?;
        println!("wrote {} records to {}", items.len(), path.display());
    }};
}

fn execute(command: Command, p: &Pipeline) -> Result<()> {
    let config = p.config();
    let out = &config.out_dir;
    match command {
        Command::Hypothesize => {
            let questions = p.load_questions()?;
            write_stage!(p, pipeline::HYPOTHESES_FILE, p.hypothesize(&questions)?);
        }
        Command::RetrieveFacts => {
            let hyps: Vec<Hypothesis> = read_stage(out, pipeline::HYPOTHESES_FILE)?;
            let depth = config.n_facts.max(config.abduction_facts);
            write_stage!(p, pipeline::FACTS_FILE, p.retrieve_facts(&hyps, depth)?);
        }
        Command::GenStsPairs => {
            let questions = p.load_questions()?;
            let pairs = p.gen_sts_pairs(&questions)?;
            let path = p.out_path(pipeline::STS_PAIRS_FILE);
            write_sts_pairs(&path, &pairs.pairs)?;
            println!(
                "wrote {} pairs to {} ({} questions without a gold fact skipped)",
                pairs.pairs.len(),
                path.display(),
                pairs.skipped
            );
        }
        Command::Abduce => {
            let hyps: Vec<Hypothesis> = read_stage(out, pipeline::HYPOTHESES_FILE)?;
            let facts: Vec<FactList> = read_stage(out, pipeline::FACTS_FILE)?;
            write_stage!(p, pipeline::QUERIES_FILE, p.abduce(&hyps, &facts)?);
        }
        Command::GenBowData => {
            let questions = p.load_questions()?;
            let hyps: Vec<Hypothesis> = read_stage(out, pipeline::HYPOTHESES_FILE)?;
            let facts: Vec<FactList> = read_stage(out, pipeline::FACTS_FILE)?;
            let examples = p.gen_bow_data(&questions, &hyps, &facts)?;
            let path = p.out_path(pipeline::BOW_FILE);
            write_bow_data(&path, &examples)?;
            println!("wrote {} examples to {}", examples.len(), path.display());
        }
        Command::RetrieveKnowledge => {
            let hyps: Vec<Hypothesis> = read_stage(out, pipeline::HYPOTHESES_FILE)?;
            let queries: Vec<AbducedQuery> = read_stage(out, pipeline::QUERIES_FILE)?;
            write_stage!(p, pipeline::CANDIDATES_FILE, p.retrieve_knowledge(&queries, &hyps)?);
        }
        Command::Rerank => {
            let candidates: Vec<KnowledgeList> = read_stage(out, pipeline::CANDIDATES_FILE)?;
            let depth = config.top_k.max(config.n_knowledge);
            write_stage!(p, pipeline::KNOWLEDGE_FILE, p.rerank(&candidates, depth)?);
        }
        Command::Answer => {
            let questions = p.load_questions()?;
            let facts: Vec<FactList> = read_stage(out, pipeline::FACTS_FILE)?;
            let knowledge: Vec<KnowledgeList> = if config.n_knowledge > 0 {
                read_stage(out, pipeline::KNOWLEDGE_FILE)?
            } else {
                Vec::new()
            };
            let answers = p.answer(&questions, &facts, &knowledge, config.n_facts, config.n_knowledge)?;
            p.write_answers(&answers)?;
            println!(
                "wrote {} predictions to {}",
                answers.predictions.len(),
                p.out_path(pipeline::PREDICTIONS_FILE).display()
            );
        }
        Command::Evaluate => {
            let questions = p.load_questions()?;
            let facts: Vec<FactList> = read_stage(out, pipeline::FACTS_FILE)?;
            let predictions: Vec<Prediction> = read_stage(out, pipeline::PREDICTIONS_FILE)?;
            let report = p.evaluate(&predictions, &questions, &facts, config.n_facts)?;
            let rows = [report.row(config.n_facts, config.n_knowledge)];
            write_report(out, &rows)?;
            print!("{}", render_table(&rows));
        }
        Command::Run => {
            let run = p.run()?;
            print!("{}", render_table(&run.report.rows));
        }
        Command::Grid => {
            let report = p.grid()?;
            print!("{}", render_table(&report.rows));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<abductive_ir::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = (|| -> Result<()> {
        let mut config = match &cli.config {
            Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        cli.overrides.apply(&mut config);
        log::debug!("effective config: {config:?}");
        let p = Pipeline::new(config)?;
        execute(cli.command, &p)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
