use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use hiliter_core::dataset::{
    build_dataset, split_dataset, BuildOptions, CleaningReport, CodeCleaner, DatasetRecord, LabeledSentence,
    TagDictionary,
};
use hiliter_core::eval::{categorize_failures, evaluate, frequency_analysis, predict_all, FailureBreakdown, FrequencyReport};
use hiliter_core::ingest::{read_jsonl, write_jsonl, PostsXmlReader};
use hiliter_core::labeler::{train, LabelerConfig, LabelerModel, TrainingParams};
use hiliter_core::markup::{parse_answer, RawAnswer};
use hiliter_core::recommend::{render_markdown, resolve_conflicts, suggest_all, ResolutionPolicy};
use hiliter_core::service::{self, canonical_json, ModelSet, RenderRequest, SuggestRequest};
use hiliter_core::stats::{compute_answer_stats, StatsAccumulator};
use hiliter_core::synthetic::code_corpus;
use hiliter_core::FormatType;

use crate::cli::*;

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Answers from a `.xml` dump or a JSON Lines file, streamed.
fn raw_answers(path: &Path) -> Result<Box<dyn Iterator<Item = Result<RawAnswer>>>> {
    let input = open(path)?;
    let is_xml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"));
    Ok(if is_xml {
        Box::new(PostsXmlReader::new(input).map(|r| r.map_err(Into::into)))
    } else {
        Box::new(read_jsonl::<RawAnswer, _>(input).map(|r| r.map_err(Into::into)))
    })
}

fn read_dataset(path: &Path, format: FormatType) -> Result<Vec<LabeledSentence>> {
    let records: Vec<DatasetRecord> = read_jsonl(open(path)?).collect::<Result<_, _>>()?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            LabeledSentence::from_record(r, format).with_context(|| format!("{}: record {}", path.display(), i + 1))
        })
        .collect()
}

fn write_dataset(path: &Path, sentences: &[LabeledSentence]) -> Result<()> {
    write_jsonl(create(path)?, sentences.iter().map(LabeledSentence::to_record))?;
    Ok(())
}

pub fn parse(args: &ParseArgs) -> Result<()> {
    let mut out = create(&args.out)?;
    let mut n = 0;
    for raw in raw_answers(&args.input)? {
        let parsed = parse_answer(&raw?);
        serde_json::to_writer(&mut out, &parsed)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    eprintln!("parsed {n} answers");
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let mut acc = StatsAccumulator::new();
    for raw in raw_answers(&args.input)? {
        acc.add(&compute_answer_stats(&parse_answer(&raw?)));
    }
    let report = acc.finish();
    write_json(&args.report, &report)?;
    if let Some(dir) = &args.csv {
        fs::create_dir_all(dir)?;
        let mut out = create(&dir.join("distributions.csv"))?;
        writeln!(out, "scope,metric,value")?;
        for (scope, metric, value) in acc.distributions() {
            writeln!(out, "{scope},{metric},{value}")?;
        }
        out.flush()?;
    }
    eprintln!(
        "{} answers, {} with highlights",
        report.n_answers, report.n_highlighted_answers
    );
    Ok(())
}

#[derive(Serialize)]
struct BuildReport {
    format: FormatType,
    seed: u64,
    split: f64,
    sentences: usize,
    train: usize,
    test: usize,
    cleaning: CleaningReport,
}

pub fn build(args: &BuildArgs) -> Result<()> {
    let format: FormatType = args.format.into();
    let answers: Vec<_> = raw_answers(&args.input)?
        .map(|r| r.map(|raw| parse_answer(&raw)))
        .collect::<Result<_>>()?;
    let dictionary = match &args.tags_dict {
        Some(p) => Some(TagDictionary::from_text(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?),
        None => None,
    };
    let mut cleaner = CodeCleaner::new(dictionary);
    cleaner.fuzzy_threshold = args.fuzzy_threshold;
    let built = build_dataset(&answers, &BuildOptions::new(format, Some(cleaner)))?;
    let n = built.sentences.len();
    let (train_set, test_set) = split_dataset(built.sentences, args.split, args.seed)?;
    write_dataset(&args.out_train, &train_set)?;
    write_dataset(&args.out_test, &test_set)?;
    let report = BuildReport {
        format,
        seed: args.seed,
        split: args.split,
        sentences: n,
        train: train_set.len(),
        test: test_set.len(),
        cleaning: built.report,
    };
    if let Some(path) = &args.clean_report {
        write_json(path, &report)?;
    }
    eprintln!("{format}: {n} sentences, {} train / {} test", report.train, report.test);
    Ok(())
}

pub fn train_model(args: &TrainArgs) -> Result<()> {
    let format: FormatType = args.format.into();
    let data = read_dataset(&args.train, format)?;
    let config = LabelerConfig {
        embed_dim: args.embed_dim,
        n_layers: args.layers,
        seed: args.seed,
        ..LabelerConfig::new(format)
    };
    let params = TrainingParams {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        ..TrainingParams::default()
    };
    let (model, log) = train(&data, config, &params)?;
    if log.split_sentences > 0 {
        eprintln!("warning: {} sentences longer than 512 tokens were split", log.split_sentences);
    }
    for e in &log.epochs {
        eprintln!("epoch {}: mean loss {:.6} over {} tokens", e.epoch + 1, e.mean_loss, e.tokens);
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

pub fn evaluate_model(args: &EvaluateArgs) -> Result<()> {
    let model = LabelerModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let test = read_dataset(&args.test, model.format())?;
    let report = evaluate(&model, &test)?;
    let m = &report.metrics;
    eprintln!(
        "{}: P {:.4} R {:.4} F1 {:.4}",
        report.format, m.precision.value, m.recall.value, m.f1.value
    );
    match &args.report {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

#[derive(Serialize)]
struct FailureOutput {
    failures: FailureBreakdown,
    frequency: Option<FrequencyReport>,
}

pub fn analyze_failures(args: &FailureArgs) -> Result<()> {
    let target: FormatType = args.target.into();
    let set = ModelSet::load_dir(&args.models).with_context(|| format!("reading {}", args.models.display()))?;
    for info in set.info().iter().filter(|i| i.warning.is_some()) {
        eprintln!("warning: {}: {}", info.file, info.warning.as_deref().unwrap_or_default());
    }
    let model = set
        .models()
        .iter()
        .find(|m| m.format() == target)
        .with_context(|| format!("no {target} model in {}", args.models.display()))?;
    let test = read_dataset(&args.test, target)?;
    let predictions = predict_all(model, &test);
    let others: Vec<_> = set
        .models()
        .iter()
        .filter(|m| m.format() != target)
        .map(|m| (m.format(), predict_all(m, &test)))
        .collect();
    if others.is_empty() {
        eprintln!("no sibling models: misidentification is not computed");
    }
    let failures = categorize_failures(&predictions, &test, &others)?;
    let frequency = match &args.train {
        Some(path) => {
            let train_set = read_dataset(path, target)?;
            Some(frequency_analysis(&train_set, &test, &predictions)?)
        }
        None => None,
    };
    if let Some(csv) = &args.freq_csv {
        let Some(freq) = &frequency else {
            bail!("--freq-csv needs --train");
        };
        let mut out = create(csv)?;
        out.write_all(freq.to_csv().as_bytes())?;
        out.flush()?;
    }
    write_json(&args.out, &FailureOutput { failures, frequency })
}

fn load_models(dir: &Path) -> Result<ModelSet> {
    let set = ModelSet::load_dir(dir).with_context(|| format!("reading model directory {}", dir.display()))?;
    for info in set.info().iter().filter(|i| i.warning.is_some()) {
        eprintln!("warning: {}: {}", info.file, info.warning.as_deref().unwrap_or_default());
    }
    Ok(set)
}

/// Output of `suggest`, without a trailing newline.
pub fn suggest_output(args: &SuggestArgs) -> Result<String> {
    let set = load_models(&args.models)?;
    let body = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let types = args
        .types
        .as_ref()
        .map(|ts| ts.iter().map(|&t| FormatType::from(t).to_string()).collect());
    match args.mode {
        SuggestMode::Json => {
            let req = SuggestRequest {
                body,
                types,
                policy: Some(args.policy.name().to_string()),
            };
            Ok(canonical_json(&service::suggest(&set, &req)?))
        }
        SuggestMode::Apply => {
            if args.policy != PolicyArg::Highest {
                bail!("--mode apply needs --policy highest");
            }
            let wanted: Option<Vec<FormatType>> = args
                .types
                .as_ref()
                .map(|ts| ts.iter().map(|&t| t.into()).collect());
            let models: Vec<LabelerModel> = set
                .models()
                .iter()
                .filter(|m| wanted.as_ref().is_none_or(|w| w.contains(&m.format())))
                .cloned()
                .collect();
            if models.is_empty() {
                return Ok(body);
            }
            let out = suggest_all(&body, &models)?;
            let kept = resolve_conflicts(&out.suggestions, &ResolutionPolicy::default());
            Ok(render_markdown(&body, &kept)?)
        }
    }
}

pub fn render_output(args: &RenderArgs) -> Result<String> {
    let set = load_models(&args.models)?;
    let body = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let req = RenderRequest {
        body,
        accepted_ids: args.accept.clone(),
    };
    Ok(service::render(&set, &req)?.markdown)
}

pub fn synthetic(args: &SyntheticArgs) -> Result<()> {
    write_dataset(&args.out, &code_corpus(args.n, args.seed))
}
