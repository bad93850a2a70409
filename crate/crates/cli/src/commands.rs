use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use promptad_core::client::Client;
use promptad_core::eval::{
    default_train_sizes, holdout_threshold_eval, read_score_set, AblationRow, BenchmarkLine, Metrics, RampUpConfig,
    ScoredRecord,
};
use promptad_core::experiment::{read_manifest, read_records, read_rows, run_ablation_to_dir, run_rampup_to_dir, RunSpec};
use promptad_core::forest::{ForestParams, CONTAMINATION_GRID};
use promptad_core::prompt::{compose, render_template, AblationConfig, SectionKind};
use promptad_core::refine::{refine, ProposalBook, RefinementProposal, RefinementRequest};
use promptad_core::Execution;
use promptad_service::{AppState, ServiceConfig};
use similar::{ChangeTag, TextDiff};

use crate::{Command, TemplateAction};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Compose {
            scenario,
            data,
            config,
            sample,
            template,
        } => {
            let config: AblationConfig = config.parse()?;
            let ds = promptad_core::dataset::load(scenario, &data)?;
            let template = ds.attach_references(&template.resolve(scenario)?);
            let samples = ds.eval_samples();
            let query = match &sample {
                Some(id) => samples
                    .iter()
                    .find(|s| &s.id == id)
                    .ok_or_else(|| anyhow!("no test sample {id}"))?,
                None => samples.first().ok_or_else(|| anyhow!("dataset has no test samples"))?,
            };
            emit(&compose(&template, &config, &query.payload)?.transcript())?;
            Ok(())
        }
        Command::Template { action } => template(action),
        Command::Refine {
            store,
            notes,
            notes_file,
            target,
            guidelines,
            yes,
            model,
        } => {
            let notes = match (notes, notes_file) {
                (Some(n), _) => n,
                (None, Some(path)) => fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                (None, None) => bail!("--notes or --notes-file is required"),
            };
            let targets = target
                .iter()
                .map(|t| t.parse::<SectionKind>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut store = store.open()?;
            let mut request = RefinementRequest::new(notes, store.current().clone(), targets);
            if let Some(path) = guidelines {
                request.guidelines =
                    Some(fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?);
            }
            request.validate()?;
            let client = Client::new(model.config())?;
            let proposal = refine(&client, &request)?;
            print_proposal(&proposal, &request);

            let mut book = ProposalBook::new();
            let id = book.submit(proposal)?.id;
            if yes || ask("Apply this proposal?")? {
                let t = book.approve_and_apply(id, &mut store)?;
                println!("approved: template is now version {}", t.version);
            } else {
                book.reject(id)?;
                println!("rejected: template stays at version {}", store.current().version);
            }
            Ok(())
        }
        Command::Ablate {
            scenario,
            data,
            configs,
            reference_ids,
            runs,
            run_id,
            serial,
            template,
            model,
        } => {
            let spec = RunSpec {
                scenario,
                data_root: data,
                configs: configs.iter().map(|k| k.parse()).collect::<Result<_, _>>()?,
                reference_ids,
            };
            let template = template.resolve(scenario)?;
            let client = Client::new(model.config())?;
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            let out = run_ablation_to_dir(
                &spec,
                &template,
                client.config(),
                &client,
                &runs,
                run_id.as_deref(),
                exec,
                None,
            )?;
            print_rows(&out.rows);
            println!("run {} written to {}", out.run_id, out.dir.display());
            Ok(())
        }
        Command::BenchIf {
            pool,
            eval,
            sizes,
            grid,
            seed,
            trees,
            out,
            benchmark,
            serial,
        } => {
            let config = RampUpConfig {
                train_sizes: sizes.unwrap_or_else(default_train_sizes),
                params: ForestParams {
                    n_trees: trees,
                    ..ForestParams::default()
                },
                grid: grid.unwrap_or_else(|| CONTAMINATION_GRID.to_vec()),
                seed,
            };
            let benchmarks = benchmark.iter().map(|b| parse_benchmark(b)).collect::<Result<Vec<_>>>()?;
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            let points = run_rampup_to_dir(&pool, &eval, &config, &benchmarks, &out, exec)?;
            println!("{:>6}  {:>6}  {:>5} {:>5} {:>5} {:>5}  P/R/F1", "size", "C", "tp", "fp", "fn", "tn");
            for p in &points {
                let c = &p.confusion;
                let contamination = p.chosen_contamination.map(|c| format!("{c:.2}")).unwrap_or_else(|| "-".into());
                println!(
                    "{:>6}  {:>6}  {:>5} {:>5} {:>5} {:>5}  {}",
                    p.train_size,
                    contamination,
                    c.tp,
                    c.fp,
                    c.fn_,
                    c.tn,
                    p.metrics.percent_triplet()
                );
            }
            println!("written to {}", out.display());
            Ok(())
        }
        Command::BenchScores {
            scores,
            val_fraction,
            seed,
            json,
        } => {
            let set = read_score_set(&scores)?;
            let r = holdout_threshold_eval(&set, val_fraction, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                let h = &r.holdout;
                println!("threshold  {}", r.threshold);
                println!("validation {} samples", r.validation_ids.len());
                println!("holdout    tp {} fp {} fn {} tn {}", h.tp, h.fp, h.fn_, h.tn);
                println!("P/R/F1     {}", r.metrics.percent_triplet());
                if r.degenerate {
                    println!("warning: validation scores are all equal; the threshold carries no information");
                }
            }
            Ok(())
        }
        Command::Report {
            runs,
            run_id,
            misclassified,
            json,
        } => {
            let run_id = match run_id {
                Some(id) => id,
                None => latest_run(&runs)?,
            };
            if misclassified {
                let records = read_records(&runs, &run_id, true)?;
                if json {
                    println!("{}", serde_json::to_string_pretty(&records)?);
                } else {
                    emit(&records_text(&records))?;
                }
            } else {
                let rows = read_rows(&runs, &run_id)?;
                if json {
                    println!("{}", serde_json::to_string_pretty(&rows)?);
                } else {
                    let m = read_manifest(&runs, &run_id)?;
                    println!(
                        "run {}  scenario {}  model {}  template v{}",
                        m.run_id, m.scenario, m.model_id, m.template_version
                    );
                    print_rows(&rows);
                }
            }
            Ok(())
        }
        Command::Serve {
            port,
            host,
            runs,
            store,
            data,
            token_env,
            model,
            preprocessor,
        } => {
            let mut config = ServiceConfig::new(runs, store.preset);
            config.template_dir = Some(store.store);
            config.data_roots = data.into_iter().map(|d| (d.scenario, d.path)).collect::<HashMap<_, _>>();
            config.detector = model.config();
            config.preprocessor = preprocessor.config();
            if let Some(var) = token_env {
                config.token = Some(std::env::var(&var).with_context(|| format!("reading token from ${var}"))?);
            }
            let state = AppState::new(config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                promptad_service::serve(listener, state).await
            })?;
            Ok(())
        }
    }
}

fn template(action: TemplateAction) -> Result<()> {
    match action {
        TemplateAction::Show { store, version } => {
            let store = store.open()?;
            let t = match version {
                Some(v) => store.get(v)?,
                None => store.current(),
            };
            print!("{}", render_template(t));
        }
        TemplateAction::History { store } => {
            for t in store.open()?.history() {
                let provenance = if t.provenance.is_empty() { "-" } else { t.provenance.as_str() };
                println!("v{}\t{}", t.version, provenance.replace('\n', " "));
            }
        }
        TemplateAction::Set { store, file } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let parsed = promptad_core::prompt::parse_template(&text)?;
            let mut store = store.open()?;
            let t = store.replace(parsed, &format!("edited via CLI from {}", file.display()))?;
            println!("saved version {}", t.version);
        }
    }
    Ok(())
}

fn ask(question: &str) -> Result<bool> {
    print!("{question} [y/N] ");
    io::stdout().flush()?;
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line)?;
    Ok(matches!(line.trim().to_ascii_lowercase().as_str(), "y" | "yes"))
}

fn print_proposal(p: &RefinementProposal, request: &RefinementRequest) {
    for (kind, proposed) in &p.proposed {
        println!("--- {} (current)", kind.header());
        println!("+++ {} (proposed)", kind.header());
        let diff = TextDiff::from_lines(request.current.section(*kind), proposed.as_str());
        for change in diff.iter_all_changes() {
            let sign = match change.tag() {
                ChangeTag::Delete => '-',
                ChangeTag::Insert => '+',
                ChangeTag::Equal => ' ',
            };
            print!("{sign}{change}");
            if change.missing_newline() {
                println!();
            }
        }
    }
    println!("\nRationale: {}", p.rationale);
}

fn print_rows(rows: &[AblationRow]) {
    println!(
        "{:<22} {:<24} {:>4} {:>4} {:>4} {:>4}  {:<16} {:>10} {:>8} {:>5}",
        "config", "label", "tp", "fp", "fn", "tn", "P/R/F1", "in tokens", "out mean", "bad"
    );
    for r in rows {
        let c = &r.confusion;
        println!(
            "{:<22} {:<24} {:>4} {:>4} {:>4} {:>4}  {:<16} {:>10} {:>8.1} {:>5}",
            r.key,
            r.label,
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            r.metrics.percent_triplet(),
            r.input_tokens_total,
            r.output_tokens_mean,
            r.unparseable
        );
    }
}

fn records_text(records: &[ScoredRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let predicted = r
            .record
            .classification()
            .map(|l| l.as_u8().to_string())
            .unwrap_or_else(|| "?".into());
        out.push_str(&format!(
            "{}\t{}\ttruth {}\tpredicted {}\t{}\n",
            r.config,
            r.record.sample_id,
            r.truth.as_u8(),
            predicted,
            r.record.reasoning().unwrap_or("").replace('\n', " ")
        ));
    }
    out
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// `label=precision,recall,f1` with fractions in [0, 1].
fn parse_benchmark(s: &str) -> Result<BenchmarkLine> {
    let (label, values) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("benchmark {s:?} is not label=precision,recall,f1"))?;
    let v: Vec<f64> = values
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("benchmark {s:?}"))?;
    if v.len() != 3 || v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        bail!("benchmark {s:?} needs three fractions in [0, 1]");
    }
    Ok(BenchmarkLine {
        label: label.to_string(),
        metrics: Metrics {
            precision: v[0],
            recall: v[1],
            f1: v[2],
            degenerate: false,
        },
    })
}

/// The most recently modified run directory under `runs`.
fn latest_run(runs: &Path) -> Result<String> {
    let mut best = None;
    for e in fs::read_dir(runs).with_context(|| format!("reading {}", runs.display()))? {
        let e = e?;
        let manifest = e.path().join("manifest.json");
        if let Ok(meta) = fs::metadata(&manifest) {
            let modified = meta.modified()?;
            if best.as_ref().is_none_or(|(t, _)| modified > *t) {
                best = Some((modified, e.file_name().to_string_lossy().into_owned()));
            }
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| anyhow!("no runs under {}", runs.display()))
}

