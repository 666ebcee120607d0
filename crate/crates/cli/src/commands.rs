use std::fs::OpenOptions;
use std::io::Write;

use anyhow::{bail, Context, Result};
use vrn_core::checkpoint;
use vrn_core::datagen::QAItem;
use vrn_core::eval::{dataset_report, entity_accuracy, hits_at_1, supervised_embedding, MetricsRow};
use vrn_core::infer::{answer, inspect_path};
use vrn_core::kg::tokenize;
use vrn_core::model::EntityNames;
use vrn_core::oracle;
use vrn_core::pipeline::{build_dataset, encode, probe_items, standard_vocab};
use vrn_core::train::{TrainItem, TrainState, Trainer};
use vrn_core::{compute_scope, Env, KnowledgeGraph, ScopeCache, Vocabulary};

use crate::artifacts::Layout;
use crate::config::RunConfig;

/// Graph, vocabulary and name index loaded from a run directory.
struct Loaded {
    graph: KnowledgeGraph,
    vocab: Vocabulary,
    names: EntityNames,
    cache: ScopeCache,
}

impl Loaded {
    fn read(layout: &Layout, hops: usize) -> Result<Self> {
        let graph = layout.read_graph()?;
        let vocab = layout.read_vocab()?;
        let names = EntityNames::new(&graph, &vocab);
        Ok(Self { graph, vocab, names, cache: ScopeCache::new(hops) })
    }

    fn env(&self) -> Env<'_> {
        Env::new(&self.graph, &self.names, &self.cache)
    }

    fn items(&self, layout: &Layout, split: &str, hops: usize) -> Result<(Vec<QAItem>, Vec<TrainItem>)> {
        let raw = layout.read_items(&self.graph, split, hops)?;
        let enc = encode(&raw, &self.vocab);
        Ok((raw, enc))
    }
}

pub fn gen_data(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let hops = cfg.data.hops;
    let d = build_dataset(&cfg.data)?;
    layout.create_dir()?;
    layout.write_graph(&d.graph)?;
    layout.write_vocab(&standard_vocab(&d.graph))?;
    layout.write_split(&d.graph, &d.split, hops)?;
    let mut w = layout.writer("config.toml")?;
    // the directory itself is left out so identical runs compare equal
    let record = RunConfig { out: None, ..cfg.clone() };
    w.write_all(toml::to_string(&record)?.as_bytes())?;
    w.flush()?;
    let report = dataset_report(&d.split.train, &d.split.test)?;
    let labeled = d.split.train.iter().filter(|it| it.is_labeled()).count();
    println!(
        "kg: {} entities, {} relations, {} triples",
        d.graph.num_entities(),
        d.graph.num_relations(),
        d.graph.num_triples()
    );
    println!(
        "{hops}-hop questions: train {} ({labeled} labeled), valid {}, test {}",
        d.split.train.len(),
        d.split.valid.len(),
        d.split.test.len()
    );
    println!(
        "test: new topic entities {:.4}, new (topic, answer) pairs {:.4}",
        report.new_entity_fraction, report.new_pair_fraction
    );
    println!("wrote {}", layout.dir.display());
    Ok(())
}

fn pretrained(cfg: &RunConfig, layout: &Layout, data: &Loaded, trainer: &Trainer<'_>, train: &[TrainItem]) -> Result<TrainState> {
    let mut state = trainer.init_state(&cfg.model, data.vocab.len());
    trainer.pretrain(&mut state.params, train)?;
    checkpoint::save(&state, layout.checkpoint(cfg.data.hops, "pretrain"))?;
    Ok(state)
}

fn probe_accuracy(state: &TrainState, data: &Loaded, probe: &[TrainItem]) -> vrn_core::Result<Option<f64>> {
    if probe.is_empty() {
        return Ok(None);
    }
    entity_accuracy(&state.params.recognition, &data.names, probe).map(Some)
}

pub fn pretrain(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let hops = cfg.data.hops;
    let data = Loaded::read(layout, hops)?;
    let (_, train) = data.items(layout, "train", hops)?;
    let (valid_raw, _) = data.items(layout, "valid", hops)?;
    let trainer = Trainer::new(data.env(), cfg.train.clone())?;
    let state = pretrained(cfg, layout, &data, &trainer, &train)?;
    let probe = probe_items(&valid_raw, &data.vocab);
    if let Some(acc) = probe_accuracy(&state, &data, &probe)? {
        println!("valid entity accuracy {acc:.4}");
    }
    println!("wrote {}", layout.checkpoint(hops, "pretrain").display());
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn train(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let hops = cfg.data.hops;
    let data = Loaded::read(layout, hops)?;
    let (_, train) = data.items(layout, "train", hops)?;
    let (valid_raw, _) = data.items(layout, "valid", hops)?;
    let probe = probe_items(&valid_raw, &data.vocab);
    let trainer = Trainer::new(data.env(), cfg.train.clone())?;
    let pre = layout.checkpoint(hops, "pretrain");
    let mut state = if pre.exists() {
        let s = checkpoint::load(&pre)?;
        if s.params.shapes.num_entities != data.graph.num_entities() || s.params.shapes.vocab_size != data.vocab.len() {
            bail!("{} does not match the graph and vocabulary in {}", pre.display(), layout.dir.display());
        }
        s
    } else {
        pretrained(cfg, layout, &data, &trainer, &train)?
    };

    let mut log = csv::Writer::from_writer(layout.writer("trainlog.csv")?);
    log.write_record(["step", "total_loss", "mean_signal", "elbo", "probe_entity_accuracy"])?;
    log.write_record(["0", "", "", "", &fmt_opt(probe_accuracy(&state, &data, &probe)?)])?;
    let every = cfg.train.checkpoint_every;
    trainer.train(&mut state, &train, |s, d| {
        let acc = probe_accuracy(s, &data, &probe)?;
        log.write_record([
            d.step.to_string(),
            d.total_loss.to_string(),
            d.mean_signal.to_string(),
            d.elbo_estimate.to_string(),
            fmt_opt(acc),
        ])
        .map_err(|e| vrn_core::VrnError::Io(e.into()))?;
        if every > 0 && d.step % every == 0 {
            checkpoint::save(s, layout.checkpoint(hops, &format!("step{}", d.step)))?;
        }
        Ok(())
    })?;
    log.flush()?;
    let last = layout.checkpoint(hops, "final");
    checkpoint::save(&state, &last)?;
    if let Some(acc) = probe_accuracy(&state, &data, &probe)? {
        println!("valid entity accuracy {acc:.4}");
    }
    println!("{} steps, wrote {}", state.step, last.display());
    Ok(())
}

fn latest_checkpoint(layout: &Layout, hops: usize) -> Result<TrainState> {
    for tag in ["final", "pretrain"] {
        let p = layout.checkpoint(hops, tag);
        if p.exists() {
            return checkpoint::load(&p).with_context(|| format!("loading {}", p.display()));
        }
    }
    bail!("no checkpoint for {hops}-hop in {}; run train first", layout.dir.display())
}

fn append_metrics(layout: &Layout, name: &str, row: &MetricsRow) -> Result<()> {
    let path = layout.path(name);
    let fresh = !path.exists();
    let f = OpenOptions::new().create(true).append(true).open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(f);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let hops = cfg.data.hops;
    let data = Loaded::read(layout, hops)?;
    let state = latest_checkpoint(layout, hops)?;
    let env = data.env();
    let (_, train) = data.items(layout, "train", hops)?;
    let (test_raw, test) = data.items(layout, "test", hops)?;
    let hits = hits_at_1(&test, |it| answer(&state.params, &env, &it.question, &cfg.inference).map(|r| r.answer))?;
    let probe = probe_items(&test_raw, &data.vocab);
    let acc = probe_accuracy(&state, &data, &probe)?;
    let regime = cfg.regime().to_owned();
    let row = MetricsRow { dataset: "synthetic".into(), hop: hops, regime: regime.clone(), hits_at_1: hits, entity_accuracy: acc };
    append_metrics(layout, "metrics.csv", &row)?;

    let se = supervised_embedding(&train, data.vocab.len(), data.graph.num_entities(), &cfg.supervised)?;
    let se_hits = hits_at_1(&test, |it| se.predict(&it.question))?;
    let se_row = MetricsRow { dataset: "synthetic".into(), hop: hops, regime, hits_at_1: se_hits, entity_accuracy: None };
    append_metrics(layout, "baseline_metrics.csv", &se_row)?;
    println!("vrn hits@1 {hits:.4} entity accuracy {}", acc.map_or("n/a".into(), |a| format!("{a:.4}")));
    println!("supervised embedding hits@1 {se_hits:.4}");
    Ok(())
}

pub fn infer(cfg: &RunConfig, layout: &Layout, question: &str, explain: bool) -> Result<()> {
    let hops = cfg.data.hops;
    let data = Loaded::read(layout, hops)?;
    let state = latest_checkpoint(layout, hops)?;
    let env = data.env();
    let tokens = tokenize(&question.replace(['[', ']'], " "));
    if tokens.is_empty() {
        bail!("question has no words");
    }
    let q = data.vocab.encode(&tokens);
    let res = answer(&state.params, &env, &q, &cfg.inference)?;
    let g = &data.graph;
    println!("question: {}", tokens.join(" "));
    println!("{:>4}  {:<28} {:>12}  {:<28} {:>12}", "rank", "topic", "log_p_topic", "answer", "log_p_answer");
    for (i, c) in res.candidates.iter().enumerate() {
        println!(
            "{:>4}  {:<28} {:>12.4}  {:<28} {:>12.4}",
            i + 1,
            g.entity_name(c.topic),
            c.log_topic,
            g.entity_name(c.best_answer),
            c.log_answer
        );
    }
    println!("answer: {}", g.entity_name(res.answer));
    if explain {
        let path = inspect_path(&state.params, &env, &q, res.topic, res.answer)?;
        if path.edges.is_empty() {
            println!("path: {} (answer is the topic entity)", g.entity_name(res.topic));
        } else {
            println!("path: {}", path.display(g));
        }
    }
    Ok(())
}

pub fn inspect_scope(cfg: &RunConfig, layout: &Layout, entity: &str) -> Result<()> {
    let g = layout.read_graph()?;
    let e = g.entity_by_name(entity).with_context(|| format!("unknown entity `{entity}`"))?;
    let scope = compute_scope(&g, e, cfg.data.hops)?;
    println!("scope of {entity} within {} hops: {} entities, {} parent edges", cfg.data.hops, scope.len(), scope.num_parent_edges());
    println!("hop\tentity\tparents");
    let stdout = std::io::stdout();
    scope.dump(&g, stdout.lock())?;
    Ok(())
}

/// Runs every oracle suite; the error carries the failed suite names.
pub fn oracle_check(cfg: &RunConfig) -> Result<()> {
    let reports = oracle::run_all(cfg.seed)?;
    let mut failed = Vec::new();
    for r in &reports {
        println!("{}: {} ({})", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if !failed.is_empty() {
        bail!("oracle suites failed: {}", failed.join(", "));
    }
    Ok(())
}
