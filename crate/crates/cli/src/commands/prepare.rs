use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use affectline_annosvc::{Service, ServiceConfig, SystemClock};
use affectline_core::corpus::{ingest as read_posts, partition_by_day, write_partition_listing};
use affectline_core::retrieval::{harvest, KeywordList};
use affectline_core::rundir::{advance_bootstrap, read_text, Advance};
use affectline_core::synth::{generate, SynthConfig};
use affectline_core::textfeat::{parse_keywords, tfidf_rank, tokenize, write_keywords, KeywordScore, TokenSequence};

use super::write_with;
use crate::error::{config_err, CliError, CliResult};
use crate::tables::{load_labels, parse_token};
use crate::{Ctx, StageIo};

pub fn synth(ctx: &Ctx, days: usize, posts_per_day: usize) -> CliResult<StageIo> {
    let cfg = SynthConfig {
        days,
        posts_per_day,
        seed: ctx.cfg.seed,
        ..Default::default()
    };
    let (corpus, truth) = generate(&cfg)?;
    let posts = ctx.dir.root().join("synth/posts.jsonl");
    write_with(&posts, |w| corpus.write_to(w))?;
    write_with(&ctx.dir.synth_truth(), |w| truth.write_to(w))?;
    println!("generated {} posts over {days} days", corpus.len());
    let mut io = StageIo::default();
    io.arg("days", days);
    io.arg("posts_per_day", posts_per_day);
    io.outputs = vec![posts, ctx.dir.synth_truth()];
    Ok(io)
}

pub fn ingest(ctx: &Ctx, input: Option<PathBuf>) -> CliResult<StageIo> {
    let input = input
        .or_else(|| ctx.cfg.corpus.clone())
        .ok_or_else(|| config_err("ingest needs --input or `corpus` in the config"))?;
    let f = std::fs::File::open(&input).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(input.clone()),
        _ => e.into(),
    })?;
    let (corpus, report) = read_posts(BufReader::new(f))?;
    let dir = &ctx.dir;
    write_with(&dir.corpus(), |w| corpus.write_to(w))?;
    write_with(&dir.rejections(), |w| report.write_tsv(w))?;
    let parts = partition_by_day(&corpus);
    write_with(&dir.partitions(), |w| write_partition_listing(&parts, w))?;
    tracing::info!(posts = corpus.len(), rejected = report.len(), days = parts.len(), "ingested");
    println!("{} posts accepted, {} rejected, {} days", corpus.len(), report.len(), parts.len());
    Ok(StageIo::new(vec![input], vec![dir.corpus(), dir.rejections(), dir.partitions()]))
}

fn read_lines(path: &Path) -> CliResult<Vec<TokenSequence>> {
    Ok(read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(tokenize)
        .collect())
}

pub fn seed_keywords(
    ctx: &Ctx,
    targets: Option<PathBuf>,
    background: Option<PathBuf>,
    select: Vec<String>,
    from_file: Option<PathBuf>,
) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let mut io = StageIo::default();
    if targets.is_none() && select.is_empty() && from_file.is_none() {
        return Err(config_err("seed-keywords needs --targets, --select or --from-file"));
    }
    if let Some(t) = &targets {
        let docs = read_lines(t)?;
        let bg = match &background {
            Some(b) => {
                io.inputs.push(b.clone());
                read_lines(b)?
            }
            None => {
                io.inputs.push(dir.corpus());
                dir.load_corpus()?.posts().iter().map(|p| tokenize(&p.text)).collect()
            }
        };
        let ranked = tfidf_rank(&docs, &bg, ctx.cfg.bootstrap.top_k)?;
        write_with(&dir.keyword_candidates(), |w| write_keywords(&ranked, w))?;
        println!("{} candidates written to {}", ranked.len(), dir.keyword_candidates().display());
        io.inputs.push(t.clone());
        io.outputs.push(dir.keyword_candidates());
        io.arg("top_k", ctx.cfg.bootstrap.top_k);
    }
    let mut chosen: Vec<String> = select.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if let Some(p) = &from_file {
        chosen.extend(parse_keywords(&read_text(p)?)?.into_iter().map(|k| k.term));
        io.inputs.push(p.clone());
    }
    if !chosen.is_empty() {
        let scores: BTreeMap<String, f64> = match std::fs::read_to_string(dir.keyword_candidates()) {
            Ok(text) => parse_keywords(&text)?.into_iter().map(|k| (k.term, k.score)).collect(),
            Err(_) => BTreeMap::new(),
        };
        let mut entries: Vec<KeywordScore> = Vec::new();
        for term in chosen {
            let term = term.to_lowercase();
            if entries.iter().any(|e| e.term == term) {
                continue;
            }
            let score = scores.get(&term).copied().unwrap_or(0.0);
            entries.push(KeywordScore { term, score });
        }
        let list = KeywordList::new(0, entries)?;
        write_with(&dir.seed_keywords(), |w| list.write_to(w))?;
        println!("{} seed keywords written to {}", list.len(), dir.seed_keywords().display());
        io.arg("select", list.terms().collect::<Vec<_>>().join(","));
        io.outputs.push(dir.seed_keywords());
    }
    Ok(io)
}

/// The keyword list in force: an explicit file, else the final list, else
/// the latest round's, else the seed list.
fn current_keywords(ctx: &Ctx, explicit: Option<PathBuf>) -> CliResult<(KeywordList, PathBuf)> {
    let dir = &ctx.dir;
    if let Some(p) = explicit {
        return Ok((KeywordList::parse(&read_text(&p)?)?, p));
    }
    if dir.final_keywords().exists() {
        let p = dir.final_keywords();
        return Ok((KeywordList::parse(&read_text(&p)?)?, p));
    }
    let rounds = dir.load_rounds()?;
    if let Some(last) = rounds.last() {
        return Ok((last.keywords.clone(), dir.round(last.round)));
    }
    let p = dir.seed_keywords();
    Ok((KeywordList::parse(&read_text(&p)?)?, p))
}

pub fn harvest_posts(ctx: &Ctx, keywords: Option<PathBuf>) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let (list, source) = current_keywords(ctx, keywords)?;
    let hits = harvest(&corpus, &list);
    write_with(&dir.harvest(), |w| {
        for id in &hits {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })?;
    println!("{} of {} posts match {} keywords", hits.len(), corpus.len(), list.len());
    Ok(StageIo::new(vec![dir.corpus(), source], vec![dir.harvest()]))
}

pub fn bootstrap(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let cfg = ctx.cfg.bootstrap();
    let max = ctx.cfg.bootstrap.rounds;
    loop {
        let labels = load_labels(&dir.labels(), false)?;
        match advance_bootstrap(dir, &corpus, &labels, &cfg, max)? {
            Advance::Opened { round, harvested, sample } => {
                tracing::info!(round, harvested, sample, "round opened");
            }
            Advance::Closed { round, test_f1 } => {
                tracing::info!(round, test_f1, "round closed");
                println!("round {round} closed, test F1 {test_f1:.4}");
            }
            Advance::Awaiting { round, pending } => {
                println!("round {round} is awaiting {pending} relevance labels; collect them with `affectline serve`");
                break;
            }
            Advance::Complete { rounds } => {
                println!("bootstrap complete after {rounds} rounds");
                break;
            }
        }
    }
    let mut io = StageIo::default();
    io.arg("rounds", max);
    io.arg("sample", cfg.sample_size);
    io.arg("replace_keywords", cfg.expansion.replace);
    io.inputs = vec![dir.corpus(), dir.seed_keywords(), dir.labels()];
    let rounds = dir.load_rounds()?;
    for r in &rounds {
        io.outputs.push(dir.round(r.round));
        io.outputs.push(dir.round_model(r.round));
    }
    io.outputs.push(dir.final_keywords());
    Ok(io)
}

pub fn serve(ctx: &Ctx, tokens: Vec<String>) -> CliResult<StageIo> {
    let mut map = ctx.cfg.serve.tokens.clone();
    for t in &tokens {
        let (tok, ann) = parse_token(t)?;
        map.insert(tok, ann);
    }
    if map.is_empty() {
        return Err(config_err("serve needs at least one --token TOKEN=ANNOTATOR"));
    }
    let addr: SocketAddr = ctx
        .cfg
        .serve
        .addr
        .parse()
        .map_err(|_| config_err(format!("bad address `{}`", ctx.cfg.serve.addr)))?;
    let svc_cfg = ServiceConfig {
        bootstrap: ctx.cfg.bootstrap(),
        max_rounds: ctx.cfg.bootstrap.rounds,
        lease_secs: ctx.cfg.serve.lease_secs,
        tokens: map,
    };
    let svc = Arc::new(Service::open(ctx.dir.clone(), svc_cfg, Arc::new(SystemClock))?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(affectline_annosvc::serve_until(svc, addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    let mut io = StageIo::default();
    io.arg("addr", addr);
    io.outputs = vec![ctx.dir.labels()];
    Ok(io)
}
