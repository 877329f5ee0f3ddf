//! Stage implementations behind the CLI subcommands.
//!
//! Every stage reads its inputs (source fixtures or upstream artifacts in
//! the output directory), writes its outputs plus a manifest, and is
//! independently re-runnable. All randomness flows from the global seed
//! through named sub-seeds, so reruns with the same config and inputs
//! produce byte-identical data outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use ipforge_core::align::{
    grad_check, pick_check_indices, ppo_objective_with_grad, Activation, MicroModel,
    MicroModelConfig, PpoConfig, RewardHead, SftSample, SftSource,
};
use ipforge_core::corpus::{
    load_records, to_jsonl, Category, Document, FileWrapperRecord, PatentRecord,
};
use ipforge_core::evalharness::{
    bleu, exact_match, f1_macro, judge_pair, score_exam, tally, BleuTokenization, EvalInstance,
    JudgeVerdict, MetricEntry, MetricReport, TaskKind,
};
use ipforge_core::infercost::{first_token_latency_proxy, preset, total_memory_curve};
use ipforge_core::preprocess::{exact_dedup, filter_documents, fuzzy_dedup, rewrite_upsample};
use ipforge_core::scheduler::{
    cosine_lr, pack_sequences, plan_stages, sample_schedule, write_batches, CorpusIndex,
    PackingOptions, Stage,
};
use ipforge_core::synthesize::{
    build_wrapper_concat, build_xfile_concat, build_xfile_instruction, extract_xfile_pairs,
    link_wrapper, InstructionTemplate, PairLevel, PatentIndex, XFilePair,
};
use ipforge_core::tokenizer::{compression_ratio, merge_vocab, train_bpe, Vocab};
use ipforge_core::util::{sub_seed, DetRng};

use crate::config::{resolve, LoadedConfig};
use crate::manifest::{OutputLock, RunManifest, StageTimer};
use crate::transports::{judge_client, rewriter_client};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Preprocess,
    Synthesize,
    Tokenize,
    Schedule,
    VerifyKernels,
    Evaluate,
    Cost,
    All,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Preprocess => "preprocess",
            Subcommand::Synthesize => "synthesize",
            Subcommand::Tokenize => "tokenize",
            Subcommand::Schedule => "schedule",
            Subcommand::VerifyKernels => "verify-kernels",
            Subcommand::Evaluate => "evaluate",
            Subcommand::Cost => "cost",
            Subcommand::All => "all",
        }
    }
}

/// Per-invocation options from CLI flags.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Restrict the cost stage to one preset.
    pub preset: Option<String>,
    /// Restrict evaluation to one task.
    pub task: Option<TaskKind>,
}

/// Runs one subcommand end to end, returning the manifest it wrote.
pub fn run(sub: Subcommand, loaded: &LoadedConfig, opts: &RunOptions) -> Result<RunManifest> {
    let out_dir = resolve(&loaded.base_dir, &loaded.config.paths.output_dir);
    let _lock = OutputLock::acquire(&out_dir)?;
    let mut manifest = RunManifest::new(sub.name(), &loaded.config_hash, loaded.config.seed);

    let result = match sub {
        Subcommand::Preprocess => stage_preprocess(loaded, &out_dir, &mut manifest),
        Subcommand::Synthesize => stage_synthesize(loaded, &out_dir, &mut manifest),
        Subcommand::Tokenize => stage_tokenize(loaded, &out_dir, &mut manifest),
        Subcommand::Schedule => stage_schedule(loaded, &out_dir, &mut manifest),
        Subcommand::VerifyKernels => stage_verify_kernels(loaded, &out_dir, &mut manifest),
        Subcommand::Evaluate => stage_evaluate(loaded, &out_dir, &mut manifest, opts.task),
        Subcommand::Cost => stage_cost(loaded, &out_dir, &mut manifest, opts.preset.as_deref()),
        Subcommand::All => {
            stage_preprocess(loaded, &out_dir, &mut manifest)
                .and_then(|()| stage_synthesize(loaded, &out_dir, &mut manifest))
                .and_then(|()| stage_tokenize(loaded, &out_dir, &mut manifest))
                .and_then(|()| stage_schedule(loaded, &out_dir, &mut manifest))
                .and_then(|()| stage_verify_kernels(loaded, &out_dir, &mut manifest))
                .and_then(|()| stage_evaluate(loaded, &out_dir, &mut manifest, opts.task))
                .and_then(|()| stage_cost(loaded, &out_dir, &mut manifest, opts.preset.as_deref()))
        }
    };

    // Partial progress still gets a manifest so failures are inspectable.
    let write_result = manifest.write(&out_dir);
    result?;
    write_result?;
    Ok(manifest)
}

fn write_file(timer: &mut StageTimer, path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    timer.output(path);
    Ok(())
}

fn write_json<T: Serialize>(timer: &mut StageTimer, path: &Path, value: &T) -> Result<()> {
    write_file(timer, path, serde_json::to_string_pretty(value).expect("serializable").as_bytes())
}

fn load_documents(loaded: &LoadedConfig, timer: &mut StageTimer) -> Result<(Vec<Document>, usize)> {
    let path = resolve(&loaded.base_dir, &loaded.config.paths.documents);
    timer.input(&path);
    let report = load_records::<Document>(&path)?;
    Ok((report.records, report.rejected.len()))
}

fn stage_preprocess(loaded: &LoadedConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("preprocess");
    let (docs, rejected) = load_documents(loaded, &mut timer)?;
    timer.count("input_records", docs.len() as u64);
    timer.count("rejected_lines", rejected as u64);

    let filter_report = filter_documents(docs, &cfg.filter, None);
    timer.count("filter_removed", filter_report.removed.len() as u64);
    write_file(
        &mut timer,
        &out_dir.join("removed.jsonl"),
        &to_jsonl(&filter_report.removed),
    )?;

    let exact = exact_dedup(&filter_report.kept);
    let exact_kept: std::collections::HashSet<&str> =
        exact.kept_ids.iter().map(String::as_str).collect();
    let after_exact: Vec<Document> = filter_report
        .kept
        .iter()
        .filter(|d| exact_kept.contains(d.id.as_str()))
        .cloned()
        .collect();
    timer.count("exact_dedup_removed", exact.removed_ids.len() as u64);
    write_file(&mut timer, &out_dir.join("dedup_exact.jsonl"), &to_jsonl(&exact.clusters))?;

    let fuzzy = fuzzy_dedup(&after_exact, &cfg.minhash);
    let fuzzy_kept: std::collections::HashSet<&str> =
        fuzzy.kept_ids.iter().map(String::as_str).collect();
    let mut kept: Vec<Document> = after_exact
        .iter()
        .filter(|d| fuzzy_kept.contains(d.id.as_str()))
        .cloned()
        .collect();
    timer.count("fuzzy_dedup_removed", fuzzy.removed_ids.len() as u64);
    write_file(&mut timer, &out_dir.join("dedup_fuzzy.jsonl"), &to_jsonl(&fuzzy.clusters))?;

    if !cfg.rewrite.styles.is_empty() {
        let rewriter = rewriter_client(&cfg.rewrite.endpoint)?;
        let books: Vec<Document> =
            kept.iter().filter(|d| d.category == Category::Book).cloned().collect();
        let outcome = rewrite_upsample(&books, &cfg.rewrite.styles, rewriter.as_ref());
        timer.count("rewritten_docs", outcome.new_documents.len() as u64);
        timer.count("rewrite_skips", outcome.skipped.len() as u64);
        kept.extend(outcome.new_documents);
    }

    timer.count("kept_records", kept.len() as u64);
    write_file(&mut timer, &out_dir.join("filtered.jsonl"), &to_jsonl(&kept))?;
    timer.finish(manifest);
    Ok(())
}

fn stage_synthesize(loaded: &LoadedConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("synthesize");

    let mut patents = Vec::new();
    for path in &cfg.paths.patents {
        let path = resolve(&loaded.base_dir, path);
        timer.input(&path);
        let report = load_records::<PatentRecord>(&path)?;
        timer.count(
            &format!("patent_rejects:{}", path.file_name().unwrap_or_default().to_string_lossy()),
            report.rejected.len() as u64,
        );
        patents.extend(report.records);
    }
    let mut wrappers: Vec<FileWrapperRecord> = Vec::new();
    for path in &cfg.paths.wrappers {
        let path = resolve(&loaded.base_dir, path);
        timer.input(&path);
        let report = load_records::<FileWrapperRecord>(&path)?;
        wrappers.extend(report.records);
    }
    timer.count("patents", patents.len() as u64);
    timer.count("wrappers", wrappers.len() as u64);

    let index = PatentIndex::from_records(patents);
    let template = match InstructionTemplate::builtin(&cfg.synthesize.template_id) {
        Some(t) => t,
        None => InstructionTemplate::from_file(resolve(&loaded.base_dir, Path::new(&cfg.synthesize.template_id)))
            .map_err(|e| anyhow::anyhow!("synthesize.template_id: {e}"))?,
    };
    let mut docs = Vec::new();
    let mut pairs: Vec<XFilePair> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();

    for wrapper in &wrappers {
        let link = match link_wrapper(wrapper, &index) {
            Ok(link) => link,
            Err(e) => {
                skipped.push(format!("{}: {e}", wrapper.examined_patent_number));
                continue;
            }
        };
        match build_wrapper_concat(&link) {
            Ok(doc) => docs.push(doc),
            Err(e) => skipped.push(format!("{}: {e}", wrapper.examined_patent_number)),
        }
        for cited in &link.cited {
            docs.push(build_xfile_concat(&link.examined, cited)?);
        }
        let extraction = extract_xfile_pairs(&link);
        skipped.extend(extraction.skipped.iter().cloned());

        // one instruction sample per (examined, cited) pair that yielded
        // sentence-level pairs
        let mut by_cited: BTreeMap<String, Vec<XFilePair>> = BTreeMap::new();
        for pair in &extraction.pairs {
            if pair.level == PairLevel::Sentence {
                by_cited.entry(pair.cited_pn.clone()).or_default().push(pair.clone());
            }
        }
        for (cited_pn, sentence_pairs) in by_cited {
            let cited = link
                .cited
                .iter()
                .find(|c| c.patent_number == cited_pn)
                .expect("pair references resolved patent");
            docs.push(build_xfile_instruction(&sentence_pairs, &link.examined, cited, &template)?);
        }
        pairs.extend(extraction.pairs);
    }

    timer.count("synthetic_docs", docs.len() as u64);
    timer.count("xfile_pairs", pairs.len() as u64);
    timer.count("skipped_spans", skipped.len() as u64);
    write_file(&mut timer, &out_dir.join("synthetic_docs.jsonl"), &to_jsonl(&docs))?;
    write_file(&mut timer, &out_dir.join("xfile_pairs.jsonl"), &to_jsonl(&pairs))?;
    write_file(&mut timer, &out_dir.join("synth_skipped.txt"), skipped.join("\n").as_bytes())?;
    timer.finish(manifest);
    Ok(())
}

fn require_artifact(out_dir: &Path, name: &str, produced_by: &str) -> Result<PathBuf> {
    let path = out_dir.join(name);
    if !path.exists() {
        bail!("missing artifact {}; run the {produced_by} stage first", path.display());
    }
    Ok(path)
}

fn stage_tokenize(loaded: &LoadedConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("tokenize");
    let input = require_artifact(out_dir, "filtered.jsonl", "preprocess")?;
    timer.input(&input);
    let mut docs = load_records::<Document>(&input)?.records;

    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let learned = train_bpe(&texts, cfg.tokenizer.target_new_tokens, sub_seed(cfg.seed, "tokenize"))?;
    let base = match (&cfg.tokenizer.base_tokens_file, &cfg.tokenizer.base_merges_file) {
        (Some(tokens), Some(merges)) => Vocab::load(
            resolve(&loaded.base_dir, tokens),
            resolve(&loaded.base_dir, merges),
        )?,
        _ => Vocab::byte_alphabet(),
    };
    let merged = merge_vocab(&base, &learned);
    timer.count("base_vocab", base.size() as u64);
    timer.count("learned_vocab", learned.size() as u64);
    timer.count("merged_vocab", merged.size() as u64);

    let tokens_path = out_dir.join("vocab_tokens.txt");
    let merges_path = out_dir.join("vocab_merges.txt");
    merged.save(&tokens_path, &merges_path)?;
    timer.output(&tokens_path);
    timer.output(&merges_path);

    for doc in &mut docs {
        doc.token_count = merged.encode(&doc.text).len() as u64;
    }
    write_file(&mut timer, &out_dir.join("tokenized.jsonl"), &to_jsonl(&docs))?;

    // compression of the merged vocab against its base on a corpus sample
    let mut sample = String::new();
    for doc in &docs {
        if sample.len() >= cfg.tokenizer.compression_sample_chars {
            break;
        }
        sample.push_str(&doc.text);
        sample.push('\n');
    }
    let ratio = compression_ratio(&sample, &base, &merged);
    #[derive(Serialize)]
    struct Compression {
        sample_chars: usize,
        ratio_base_over_merged: f64,
    }
    write_json(
        &mut timer,
        &out_dir.join("compression.json"),
        &Compression { sample_chars: sample.chars().count(), ratio_base_over_merged: ratio },
    )?;
    timer.finish(manifest);
    Ok(())
}

fn stage_schedule(loaded: &LoadedConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("schedule");
    let input = require_artifact(out_dir, "tokenized.jsonl", "tokenize")?;
    timer.input(&input);
    let docs = load_records::<Document>(&input)?.records;
    let vocab = Vocab::load(
        require_artifact(out_dir, "vocab_tokens.txt", "tokenize")?,
        require_artifact(out_dir, "vocab_merges.txt", "tokenize")?,
    )?;

    let mut totals: BTreeMap<Category, u64> = BTreeMap::new();
    let mut index = CorpusIndex::default();
    let mut by_id: BTreeMap<String, &Document> = BTreeMap::new();
    for doc in &docs {
        *totals.entry(doc.category).or_default() += doc.token_count;
        index.insert(doc.category, doc.id.clone(), doc.token_count);
        by_id.insert(doc.id.clone(), doc);
    }

    let plan = plan_stages(&totals, &cfg.stage1, &cfg.stage2, cfg.schedule_profile)?;
    write_json(&mut timer, &out_dir.join("plan.json"), &plan)?;
    timer.count("profile_violations", plan.profile_violations.len() as u64);

    for stage_cfg in [&cfg.stage1, &cfg.stage2] {
        let stage_name = match stage_cfg.stage {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        };
        let quotas = &plan.quotas[&stage_cfg.stage];
        let stream =
            sample_schedule(quotas, &index, sub_seed(cfg.seed, &format!("schedule:{stage_name}")))?;
        write_file(
            &mut timer,
            &out_dir.join(format!("schedule_{stage_name}.txt")),
            (stream.join("\n") + "\n").as_bytes(),
        )?;
        timer.count(&format!("{stage_name}_docs"), stream.len() as u64);

        let doc_streams: Vec<(String, Vec<u32>)> = stream
            .iter()
            .map(|id| (id.clone(), vocab.encode(&by_id[id].text)))
            .collect();
        let packing = PackingOptions {
            context_length: stage_cfg.context_length,
            batch_token_budget: cfg.packing.batch_token_budget,
            separator_token: cfg.packing.separator_token,
            carryover: cfg.packing.carryover,
        };
        let outcome = pack_sequences(doc_streams, &packing)?;
        timer.count(&format!("{stage_name}_batches"), outcome.batches.len() as u64);
        timer.count(&format!("{stage_name}_dropped_tail_tokens"), outcome.dropped_tail_tokens);
        let bin = out_dir.join(format!("batches_{stage_name}.bin"));
        let idx = out_dir.join(format!("batches_{stage_name}.index.json"));
        write_batches(&outcome.batches, &bin, &idx)?;
        timer.output(&bin);
        timer.output(&idx);

        let total_steps = outcome.batches.len() as u64;
        if total_steps > 0 && stage_cfg.warmup_steps < total_steps {
            let mut csv = String::from("step,lr\n");
            for step in 0..=total_steps {
                let lr = cosine_lr(
                    step,
                    total_steps,
                    stage_cfg.warmup_steps,
                    stage_cfg.peak_lr,
                    stage_cfg.final_lr_fraction,
                );
                csv.push_str(&format!("{step},{lr:e}\n"));
            }
            write_file(&mut timer, &out_dir.join(format!("lr_{stage_name}.csv")), csv.as_bytes())?;
        } else {
            timer.count(&format!("{stage_name}_lr_skipped_warmup_ge_steps"), 1);
        }
    }
    timer.finish(manifest);
    Ok(())
}

const KERNEL_TOLERANCE: f64 = 1e-4;

fn stage_verify_kernels(loaded: &LoadedConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("verify-kernels");
    let seed = sub_seed(cfg.seed, "verify-kernels");

    #[derive(Serialize)]
    struct Check {
        name: String,
        max_relative_error: f64,
        tolerance: f64,
        pass: bool,
    }
    let mut checks = Vec::new();
    let mut record = |name: &str, err: f64| {
        checks.push(Check {
            name: name.to_string(),
            max_relative_error: err,
            tolerance: KERNEL_TOLERANCE,
            pass: err < KERNEL_TOLERANCE,
        });
    };

    // weighted next-token loss through the micro model, tied and untied
    for (name, tied) in [("sft-loss-untied", false), ("sft-loss-tied", true)] {
        let model = MicroModel::new(MicroModelConfig {
            seed: sub_seed(seed, name),
            tied_output: tied,
            ..MicroModelConfig::default()
        })
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let sample = SftSample::new(
            vec![3, 11, 7, 0, 19, 4, 2, 9, 13, 5],
            vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1],
            SftSource::Expert,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        let (_, analytic) = model.sft_loss_and_grad(&sample).map_err(|e| anyhow::anyhow!("{e}"))?;
        let indices = pick_check_indices(model.param_count(), 50, sub_seed(seed, "indices"));
        let mut probe = model.clone();
        let err = grad_check(
            move |p: &[f64]| {
                probe.set_params(p.to_vec()).map_err(|e| e.to_string())?;
                probe.sft_loss_and_grad(&sample).map(|(l, _)| l).map_err(|e| e.to_string())
            },
            model.params(),
            &analytic,
            &indices,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        record(name, err);
    }

    // ranking loss through the two-layer reward head
    {
        let in_dim = 16;
        let mid_dim = 8;
        let mut rng = DetRng::new(sub_seed(seed, "ranking"));
        let params: Vec<f64> =
            (0..RewardHead::param_count(in_dim, mid_dim)).map(|_| rng.next_f64() - 0.5).collect();
        let chosen: Vec<f64> = (0..in_dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let rejected: Vec<f64> = (0..in_dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let head = RewardHead::new(in_dim, mid_dim, Activation::Tanh, params.clone())
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let (_, analytic) = head
            .ranking_loss_with_param_grad(&chosen, &rejected)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let indices = pick_check_indices(params.len(), 50, sub_seed(seed, "ranking-indices"));
        let err = grad_check(
            |p: &[f64]| {
                RewardHead::new(in_dim, mid_dim, Activation::Tanh, p.to_vec())
                    .and_then(|h| h.ranking_loss_with_param_grad(&chosen, &rejected))
                    .map(|(l, _)| l)
                    .map_err(|e| e.to_string())
            },
            &params,
            &analytic,
            &indices,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        record("ranking-loss-reward-head", err);
    }

    // clipped PPO objective over new-policy log-probabilities
    {
        let ppo_cfg = PpoConfig { kl_coeff: cfg.ppo.kl_coeff, ..cfg.ppo.clone() };
        let mut rng = DetRng::new(sub_seed(seed, "ppo"));
        let n = 16;
        let logp_old: Vec<f64> = (0..n).map(|_| -0.5 - rng.next_f64()).collect();
        let logp_new: Vec<f64> =
            logp_old.iter().map(|lp| lp + 0.05 * (rng.next_f64() - 0.5)).collect();
        let logp_ref: Vec<f64> =
            logp_old.iter().map(|lp| lp + 0.1 * (rng.next_f64() - 0.5)).collect();
        let advantage: Vec<f64> = (0..n).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        let (_, analytic) =
            ppo_objective_with_grad(&logp_new, &logp_old, &advantage, &logp_ref, &ppo_cfg)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
        let indices: Vec<usize> = (0..n).collect();
        let err = grad_check(
            |p: &[f64]| {
                ppo_objective_with_grad(p, &logp_old, &advantage, &logp_ref, &ppo_cfg)
                    .map(|(l, _)| l)
                    .map_err(|e| e.to_string())
            },
            &logp_new,
            &analytic,
            &indices,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?;
        record("ppo-objective", err);
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for check in &checks {
        timer.count(&check.name, if check.pass { 1 } else { 0 });
        println!(
            "{}: max relative error {:.3e} (tolerance {:.0e}) {}",
            check.name,
            check.max_relative_error,
            check.tolerance,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    write_json(&mut timer, &out_dir.join("kernel_report.json"), &checks)?;
    timer.finish(manifest);
    if !all_pass {
        bail!("kernel gradient verification failed; see kernel_report.json");
    }
    Ok(())
}

fn has_cjk(text: &str) -> bool {
    text.chars().any(|c| ('\u{4e00}'..='\u{9fff}').contains(&c))
}

fn stage_evaluate(
    loaded: &LoadedConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
    task_filter: Option<TaskKind>,
) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("evaluate");
    let (Some(instances_path), Some(outputs_path)) =
        (&cfg.paths.eval_instances, &cfg.paths.model_outputs)
    else {
        timer.count("skipped_no_eval_inputs", 1);
        timer.finish(manifest);
        return Ok(());
    };
    let instances_path = resolve(&loaded.base_dir, instances_path);
    let outputs_path = resolve(&loaded.base_dir, outputs_path);
    timer.input(&instances_path);
    timer.input(&outputs_path);

    let instances: Vec<EvalInstance> = read_jsonl(&instances_path)?;
    for inst in &instances {
        inst.validate().map_err(|e| anyhow::anyhow!("bad eval instance: {e}"))?;
    }
    #[derive(serde::Deserialize)]
    struct ModelOutput {
        output: String,
    }
    let outputs: Vec<ModelOutput> = read_jsonl(&outputs_path)?;
    if outputs.len() != instances.len() {
        bail!("{} outputs for {} instances", outputs.len(), instances.len());
    }
    let selected = |task: TaskKind| task_filter.is_none() || task_filter == Some(task);

    let mut report = MetricReport {
        model: cfg.eval.model_name.clone(),
        config_hash: loaded.config_hash.clone(),
        entries: Vec::new(),
        tallies: Vec::new(),
    };

    let with_task = |task: TaskKind| -> Vec<(&EvalInstance, &str)> {
        instances
            .iter()
            .zip(&outputs)
            .filter(|(i, _)| i.task == task)
            .map(|(i, o)| (i, o.output.as_str()))
            .collect()
    };

    // classification: macro-F1 over the labels present in gold
    let cls = with_task(TaskKind::Classification);
    if selected(TaskKind::Classification) && !cls.is_empty() {
        let gold: Vec<String> = cls.iter().map(|(i, _)| i.reference.clone()).collect();
        let pred: Vec<String> = cls.iter().map(|(_, o)| o.trim().to_string()).collect();
        let labels = ipforge_core::evalharness::labels_of(&gold);
        let f1 = f1_macro(&pred, &gold, &labels).map_err(|e| anyhow::anyhow!("{e}"))?;
        report.entries.push(MetricEntry {
            task: TaskKind::Classification,
            metric: "macro_f1".into(),
            value: f1,
            instances: cls.len(),
        });
    }

    // exam: 0.5 points per correct answer
    let exam = with_task(TaskKind::Exam);
    if selected(TaskKind::Exam) && !exam.is_empty() {
        let key: Vec<&str> = exam.iter().map(|(i, _)| i.reference.as_str()).collect();
        let answers: Vec<&str> = exam.iter().map(|(_, o)| o.trim()).collect();
        let score = score_exam(&answers, &key).map_err(|e| anyhow::anyhow!("{e}"))?;
        report.entries.push(MetricEntry {
            task: TaskKind::Exam,
            metric: "points".into(),
            value: score.points,
            instances: exam.len(),
        });
        report.entries.push(MetricEntry {
            task: TaskKind::Exam,
            metric: "accuracy".into(),
            value: score.correct as f64 / exam.len() as f64,
            instances: exam.len(),
        });
    }

    // translation: mean BLEU, character tokens when the target is Chinese
    let translation = with_task(TaskKind::Translation);
    if selected(TaskKind::Translation) && !translation.is_empty() {
        let mut total = 0.0;
        for (inst, output) in &translation {
            let mode = if has_cjk(&inst.reference) {
                BleuTokenization::Character
            } else {
                BleuTokenization::Whitespace
            };
            total += bleu(output, &[inst.reference.as_str()], mode);
        }
        report.entries.push(MetricEntry {
            task: TaskKind::Translation,
            metric: "bleu".into(),
            value: total / translation.len() as f64,
            instances: translation.len(),
        });
    }

    // correction and reasoning score by exact match; patent matching is
    // multiple choice so the same comparison doubles as accuracy
    for (task, metric) in [
        (TaskKind::Correction, "exact_match"),
        (TaskKind::Reasoning, "exact_match"),
        (TaskKind::Match, "accuracy"),
    ] {
        let items = with_task(task);
        if !selected(task) || items.is_empty() {
            continue;
        }
        let hits: u32 = items.iter().map(|(i, o)| u32::from(exact_match(o, &i.reference))).sum();
        report.entries.push(MetricEntry {
            task,
            metric: metric.into(),
            value: hits as f64 / items.len() as f64,
            instances: items.len(),
        });
    }

    // pairwise judging for open-ended tasks when baseline outputs exist
    if let Some(baseline_path) = &cfg.paths.baseline_outputs {
        let baseline_path = resolve(&loaded.base_dir, baseline_path);
        timer.input(&baseline_path);
        let baseline: Vec<ModelOutput> = read_jsonl(&baseline_path)?;
        if baseline.len() != instances.len() {
            bail!("{} baseline outputs for {} instances", baseline.len(), instances.len());
        }
        let judge = judge_client(&cfg.eval.judge_endpoint)?;
        let mut results: Vec<Result<JudgeVerdict, _>> = Vec::new();
        for ((inst, out), base) in instances.iter().zip(&outputs).zip(&baseline) {
            if !matches!(inst.task, TaskKind::Qa | TaskKind::Writing | TaskKind::Summary)
                || !selected(inst.task)
            {
                continue;
            }
            results.push(judge_pair(
                &cfg.eval.model_name,
                &cfg.eval.baseline_name,
                &inst.prompt,
                &out.output,
                &base.output,
                judge.as_ref(),
                &cfg.eval.judge,
            ));
        }
        if !results.is_empty() {
            let verdicts: Vec<&JudgeVerdict> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
            write_file(&mut timer, &out_dir.join("verdicts.jsonl"), &to_jsonl(&verdicts))?;
            report.tallies.push(tally(&results).map_err(|e| anyhow::anyhow!("{e}"))?);
        }
    }

    for entry in &report.entries {
        timer.count(&format!("{}/{}", entry.metric, entry.instances), 1);
    }
    write_file(&mut timer, &out_dir.join("metrics.jsonl"), &to_jsonl(&report.entries))?;
    write_file(&mut timer, &out_dir.join("metrics.txt"), report.render_table().as_bytes())?;
    write_json(&mut timer, &out_dir.join("metric_report.json"), &report)?;
    timer.finish(manifest);
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line)
                .with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

fn stage_cost(
    loaded: &LoadedConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
    preset_override: Option<&str>,
) -> Result<()> {
    let cfg = &loaded.config;
    let mut timer = StageTimer::start("cost");
    let names: Vec<String> = match preset_override {
        Some(name) => vec![name.to_string()],
        None => cfg.cost.presets.clone(),
    };
    for name in &names {
        let model = preset(name).map_err(|e| anyhow::anyhow!("{e}"))?;
        let curve = total_memory_curve(&model, &cfg.cost.seq_lens);
        let mut memory_csv = String::from("seq_len,bytes\n");
        for (seq, bytes) in &curve {
            memory_csv.push_str(&format!("{seq},{bytes}\n"));
        }
        write_file(&mut timer, &out_dir.join(format!("cost_{name}_memory.csv")), memory_csv.as_bytes())?;

        let mut latency_csv = String::from("seq_len,seconds\n");
        for &seq in &cfg.cost.seq_lens {
            let secs =
                first_token_latency_proxy(&model, seq, cfg.cost.device_flops, cfg.cost.latency_model);
            latency_csv.push_str(&format!("{seq},{secs:e}\n"));
        }
        write_file(&mut timer, &out_dir.join(format!("cost_{name}_latency.csv")), latency_csv.as_bytes())?;
    }
    timer.count("presets", names.len() as u64);
    timer.finish(manifest);
    Ok(())
}
