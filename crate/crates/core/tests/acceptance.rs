//! One test per acceptance criterion. Each prints a PASS/FAIL/SKIP line to
//! stderr, outside the test harness's output capture.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use hiliter_core::bioe::{decode_spans, encode_tags, BioTag, TokenSpan};
use hiliter_core::dataset::{clean_code_instances, encode_bioe, is_equation, is_path, CodeCleaner, LabeledSentence, MisuseReason, TagDictionary};
use hiliter_core::eval::{categorize_failures, count_partial_match, evaluate, micro_metrics, PartialMatchCounts};
use hiliter_core::ingest::PostsXmlReader;
use hiliter_core::labeler::{gradient_check, train, AttributeRows, GradCheckOptions, LabelerConfig, LabelerModel, TrainingParams};
use hiliter_core::markup::{parse_answer, parse_body, split_sentences, RawAnswer};
use hiliter_core::recommend::{render_markdown, resolve_conflicts, ResolutionMode, ResolutionPolicy, Suggestion};
use hiliter_core::stats::{aggregate, compute_answer_stats, CorpusReport, StatsAccumulator, Summary};
use hiliter_core::synthetic::code_corpus;
use hiliter_core::FormatType;

use common::{parser_cases, stats_cases};

type Outcome = Result<String, String>;

fn report(name: &str, outcome: Outcome) {
    let line = match &outcome {
        Ok(detail) => format!("PASS {name}: {detail}"),
        Err(why) => format!("FAIL {name}: {why}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(why) = outcome {
        panic!("{name}: {why}");
    }
}

fn check(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

#[test]
fn parser_corpus() {
    report("parser corpus", (|| {
        let start = Instant::now();
        let cases = parser_cases();
        check(cases.len() >= 50, || format!("only {} cases", cases.len()))?;
        let mut mismatches = Vec::new();
        for case in &cases {
            let parsed = parse_body(&case.body);
            let mut got: Vec<_> = parsed.spans.iter().map(|s| (s.format, s.start, s.end)).collect();
            got.sort();
            if parsed.plain_text != case.text || got != case.spans {
                mismatches.push(case.id);
            }
        }
        let took = within(start, Duration::from_secs(5))?;
        check(mismatches.is_empty(), || format!("mismatched cases {mismatches:?}"))?;
        Ok(format!("{} posts, 0 mismatches, {took:.2?}", cases.len()))
    })());
}

fn random_spans(rng: &mut ChaCha8Rng, n: usize) -> Vec<TokenSpan> {
    (0..rng.gen_range(0..=4))
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(a + 1..=n);
            TokenSpan::new(a, b)
        })
        .collect()
}

fn oracle_counts(pred: &[TokenSpan], gold: &[TokenSpan]) -> (usize, usize, usize) {
    let p: HashSet<usize> = pred.iter().flat_map(|s| s.start..s.end).collect();
    let g: HashSet<usize> = gold.iter().flat_map(|s| s.start..s.end).collect();
    (p.intersection(&g).count(), p.len(), g.len())
}

fn oracle_prf(correct: usize, predicted: usize, gold: usize) -> (Option<f64>, Option<f64>, Option<f64>) {
    let p = (predicted > 0).then(|| correct as f64 / predicted as f64);
    let r = (gold > 0).then(|| correct as f64 / gold as f64);
    let f = match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    (p, r, f)
}

#[test]
fn metric_oracle() {
    report("metric oracle", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut batch = Vec::new();
        let mut totals = (0, 0, 0);
        for case in 0..1000 {
            let n = rng.gen_range(1..=20);
            let pred = random_spans(&mut rng, n);
            let gold = random_spans(&mut rng, n);
            let counts = count_partial_match(&pred, &gold, n).map_err(|e| e.to_string())?;
            let (c, p, g) = oracle_counts(&pred, &gold);
            check(counts == PartialMatchCounts { correct: c, predicted: p, gold: g }, || {
                format!("case {case}: {counts:?} vs oracle ({c}, {p}, {g})")
            })?;
            let m = micro_metrics([counts]);
            let (op, or, of) = oracle_prf(c, p, g);
            let as_opt = |v: hiliter_core::eval::Metric| (!v.undefined).then_some(v.value);
            check((as_opt(m.precision), as_opt(m.recall), as_opt(m.f1)) == (op, or, of), || {
                format!("case {case}: metrics {m:?} vs oracle {op:?} {or:?} {of:?}")
            })?;
            batch.push(counts);
            totals = (totals.0 + c, totals.1 + p, totals.2 + g);
        }
        let micro = micro_metrics(batch);
        let (op, or, _) = oracle_prf(totals.0, totals.1, totals.2);
        check(Some(micro.precision.value) == op && Some(micro.recall.value) == or, || "micro totals differ".into())?;

        // "sudo netstat -antp | fgrep LISTEN", with "-antp" missed
        let gold = [TokenSpan::new(0, 6)];
        let pred = [TokenSpan::new(0, 2), TokenSpan::new(3, 6)];
        let m = micro_metrics([count_partial_match(&pred, &gold, 6).map_err(|e| e.to_string())?]);
        check(m.precision.value == 1.0 && m.recall.value == 5.0 / 6.0, || format!("netstat {m:?}"))?;
        Ok(format!("1000 cases exact; netstat P {} R {:.4}", m.precision.value, m.recall.value))
    })());
}

fn tags_from(s: &str) -> Vec<BioTag> {
    s.chars()
        .map(|c| match c {
            'O' => BioTag::O,
            'B' => BioTag::B,
            'I' => BioTag::I,
            _ => BioTag::E,
        })
        .collect()
}

#[test]
fn bioe_round_trip() {
    report("bioe round trip", (|| {
        // fixture sentences through the dataset encoder
        let mut fixture_spans = 0;
        for case in parser_cases() {
            let parsed = parse_body(&case.body);
            for sentence in split_sentences(case.id, &parsed.plain_text, &parsed.spans) {
                for format in FormatType::ALL {
                    let labeled = encode_bioe(&sentence, format).map_err(|e| format!("case {}: {e}", case.id))?;
                    let want: Vec<TokenSpan> = sentence
                        .spans_of(format)
                        .map(|s| {
                            let (a, b) = sentence.token_range(s).expect("span on token edges");
                            TokenSpan::new(a, b)
                        })
                        .collect();
                    check(decode_spans(&labeled.tags) == want, || format!("case {} {format}", case.id))?;
                    fixture_spans += want.len();
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..1000 {
            let n = rng.gen_range(1..=25);
            let mut spans = Vec::new();
            let mut i = 0;
            while i < n {
                if rng.gen_bool(0.3) {
                    let end = rng.gen_range(i + 1..=n.min(i + 5));
                    spans.push(TokenSpan::new(i, end));
                    i = end;
                } else {
                    i += 1;
                }
            }
            let tags = encode_tags(n, &spans).map_err(|e| e.to_string())?;
            check(decode_spans(&tags) == spans, || format!("random case {case}: {spans:?}"))?;
        }

        // repair table: spans are the leftmost-longest matches of [BIE]I*E?
        let pattern = Regex::new("[BIE]I*E?").unwrap();
        let mut sequences = 0;
        for len in 0..=4u32 {
            for code in 0..4usize.pow(len) {
                let s: String = (0..len)
                    .map(|k| ['O', 'B', 'I', 'E'][code / 4usize.pow(k) % 4])
                    .collect();
                let want: Vec<TokenSpan> = pattern.find_iter(&s).map(|m| TokenSpan::new(m.start(), m.end())).collect();
                check(decode_spans(&tags_from(&s)) == want, || format!("{s}: {:?}", decode_spans(&tags_from(&s))))?;
                sequences += 1;
            }
        }
        let hand = [
            ("BIIE", vec![(0, 4)]),
            ("IOB", vec![(0, 1), (2, 3)]),
            ("OOO", vec![]),
            ("EE", vec![(0, 2)]),
            ("BB", vec![(0, 1), (1, 2)]),
            ("BIO", vec![(0, 2)]),
        ];
        for (s, want) in hand {
            let want: Vec<TokenSpan> = want.into_iter().map(|(a, b)| TokenSpan::new(a, b)).collect();
            check(decode_spans(&tags_from(s)) == want, || format!("hand row {s}"))?;
        }
        Ok(format!("{fixture_spans} fixture spans, 1000 random sets, {sequences} label sequences"))
    })());
}

fn gradcheck_config(i: u64) -> LabelerConfig {
    LabelerConfig {
        embed_dim: 16,
        attr_dim: [4, 8][i as usize % 2],
        n_layers: 2,
        window: 1 + (i as usize / 2) % 2,
        maxout_pieces: 2 + (i as usize % 3),
        residual: i % 4 != 3,
        table_rows: AttributeRows {
            norm: 211,
            prefix: 97,
            suffix: 97,
            shape: 31,
        },
        seed: 1000 + i,
        ..LabelerConfig::new(FormatType::Code)
    }
}

#[test]
fn gradient_check_small_configs() {
    report("gradient check", (|| {
        let start = Instant::now();
        let sentences = code_corpus(10, 99);
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        let mut ties = 0;
        for i in 0..10u64 {
            let opts = GradCheckOptions {
                seed: i,
                ..GradCheckOptions::default()
            };
            let r = gradient_check(&gradcheck_config(i), &sentences[i as usize], &opts).map_err(|e| e.to_string())?;
            check(r.max_relative_error < 1e-4, || format!("config {i}: {r:?}"))?;
            worst = worst.max(r.max_relative_error);
            checked += r.checked;
            ties += r.skipped_ties;
        }
        let took = within(start, Duration::from_secs(30))?;
        Ok(format!("max relative error {worst:.2e} over {checked} parameters ({ties} tie-excluded), {took:.2?}"))
    })());
}

#[test]
fn learnability_and_determinism() {
    let train_set = code_corpus(200, 1);
    let held_out = code_corpus(100, 2);
    let config = LabelerConfig::new(FormatType::Code);
    let params = TrainingParams::default();

    let start = Instant::now();
    let trained = train(&train_set, config.clone(), &params);
    let took = start.elapsed();
    let model = match trained {
        Ok((m, _)) => m,
        Err(e) => {
            report("learnability", Err(e.to_string()));
            unreachable!()
        }
    };
    report("learnability", (|| {
        let train_f1 = evaluate(&model, &train_set).map_err(|e| e.to_string())?.metrics.f1.value;
        let test_f1 = evaluate(&model, &held_out).map_err(|e| e.to_string())?.metrics.f1.value;
        check(took < Duration::from_secs(60), || format!("training took {took:.2?}"))?;
        check(train_f1 >= 0.95 && test_f1 >= 0.90, || format!("train F1 {train_f1:.4}, held-out F1 {test_f1:.4}"))?;
        Ok(format!("train F1 {train_f1:.4}, held-out F1 {test_f1:.4}, {took:.2?}"))
    })());

    report("determinism", (|| {
        let (again, _) = train(&train_set, config.clone(), &params).map_err(|e| e.to_string())?;
        let bytes = model.to_bytes();
        check(bytes == again.to_bytes(), || "two seed-42 runs produced different model files".into())?;

        let path = std::env::temp_dir().join(format!("hiliter-acceptance-{}.hlm", std::process::id()));
        model.save(&path).map_err(|e| e.to_string())?;
        let loaded = LabelerModel::load(&path).map_err(|e| e.to_string());
        let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
        let _ = std::fs::remove_file(&path);
        let loaded = loaded?;
        check(on_disk == bytes, || "saved file differs from to_bytes".into())?;
        for s in held_out.iter().chain(&train_set) {
            let (a, b) = (model.predict(&s.tokens), loaded.predict(&s.tokens));
            let same = a.tags == b.tags
                && a.probs.iter().flatten().map(|p| p.to_bits()).eq(b.probs.iter().flatten().map(|p| p.to_bits()));
            check(same, || format!("prediction differs after reload on {:?}", s.tokens))?;
        }
        Ok(format!("{} byte model files identical; reload predictions bit-identical", bytes.len()))
    })());
}

#[test]
fn cleaning_rules() {
    report("cleaning rules", (|| {
        check(is_path("/usr/local/bin/"), || "path not flagged".into())?;
        check(is_equation("O(log n)"), || "equation not flagged".into())?;
        let dict = TagDictionary::from_text("mysql\npython\nnode.js\n").map_err(|e| e.to_string())?;
        let cleaner = CodeCleaner::new(Some(dict));
        check(cleaner.classify("MySql") == Some(MisuseReason::SoftwareOrTerminology), || "MySql kept".into())?;
        check(cleaner.classify("client_wait_for()").is_none(), || "client_wait_for() removed".into())?;

        let contents = [
            "/usr/local/bin/", "C:\\Windows\\System32", "O(log n)", "x^2 + y^2", "MySql", "Python",
            "client_wait_for()", "getElementById", "npm install", "int x = 1;",
        ];
        let mut sentences = Vec::new();
        for i in 0..100 {
            let content = contents[i % contents.len()];
            let answer = parse_answer(&RawAnswer {
                post_id: i as u64 + 1,
                body: format!("Step {i} uses <code>{content}</code> here"),
            });
            sentences.extend(answer.sentences());
        }
        let instances: usize = sentences.iter().map(|s| s.spans_of(FormatType::Code).count()).sum();
        check(instances == 100, || format!("fixture has {instances} instances"))?;
        let (once, first) = clean_code_instances(sentences, &cleaner);
        let (twice, second) = clean_code_instances(once.clone(), &cleaner);
        check(second.total_removed() == 0 && twice == once, || format!("second pass removed {second:?}"))?;
        check(first.total_removed() > 0, || "first pass removed nothing".into())?;
        Ok(format!(
            "path/equation/software flagged, call kept; 100 instances: {} removed then 0",
            first.total_removed()
        ))
    })());
}

fn labeled(words: &str, tags: &str) -> LabeledSentence {
    let tokens: Vec<String> = words.split_whitespace().map(str::to_string).collect();
    assert_eq!(tokens.len(), tags.len(), "{words}");
    LabeledSentence {
        tokens,
        tags: tags_from(tags),
        post_id: 1,
        format: FormatType::Code,
    }
}

#[test]
fn failure_taxonomy() {
    report("failure taxonomy", (|| {
        let gold = vec![
            labeled("use the git push command to publish to origin now", "OOBEOOOOBO"),
            labeled("call foo() then bar() and check the result value now", "OBOBOOOOOO"),
            labeled("run sudo netstat -antp | fgrep LISTEN in a shell", "OBIIIIEOOO"),
        ];
        let tokens: usize = gold.iter().map(|s| s.tokens.len()).sum();
        check(tokens == 30, || format!("{tokens} tokens"))?;
        let target = vec![tags_from("OOBEOOOOOO"), tags_from("OBOOOOOOBO"), tags_from("OBEOBIEOOB")];
        let bold = vec![tags_from("OOOOOOOOOO"), tags_from("OOOBOOOOOO"), tags_from("OOOOOOOOBO")];

        let got = categorize_failures(&target, &gold, &[(FormatType::Bold, bold)]).map_err(|e| e.to_string())?;
        let t = &got.tokens;
        check(
            (t.misidentification, t.missing_identification, t.false_identification, t.total) == (Some(1), 2, 2, 5),
            || format!("token counts {t:?}"),
        )?;
        let i = &got.instances;
        check(
            (i.misidentification, i.missing_identification, i.false_identification, i.total) == (Some(1), 1, 2, 4),
            || format!("instance counts {i:?}"),
        )?;
        for c in [t, i] {
            let p = &c.percentages;
            let sum = p.misidentification.unwrap_or(0.0) + p.missing_identification + p.false_identification;
            check((sum - 100.0).abs() < 1e-9, || format!("percentages sum to {sum}"))?;
        }
        check(
            (t.percentages.misidentification, t.percentages.missing_identification) == (Some(20.0), 40.0),
            || format!("token shares {:?}", t.percentages),
        )?;

        let alone = categorize_failures(&target, &gold, &[]).map_err(|e| e.to_string())?;
        check(
            (alone.tokens.misidentification, alone.tokens.missing_identification) == (None, 3),
            || format!("without siblings {:?}", alone.tokens),
        )?;
        Ok("tokens 1/2/2 (20/40/40%), instances 1/1/2 (25/25/50%)".into())
    })());
}

const WORDS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

fn char_range(a: usize, b: usize) -> (usize, usize) {
    let starts: Vec<usize> = WORDS
        .iter()
        .scan(0, |pos, w| {
            let s = *pos;
            *pos += w.len() + 1;
            Some(s)
        })
        .collect();
    (starts[a], starts[b - 1] + WORDS[b - 1].len())
}

fn suggestion(i: usize, format: FormatType, (a, b): (usize, usize), confidence: f64) -> Suggestion {
    let (cs, ce) = char_range(a, b);
    Suggestion {
        id: format!("s{i}"),
        format,
        sentence: 0,
        token_start: a,
        token_end: b,
        char_start: cs,
        char_end: ce,
        content: WORDS[a..b].join(" "),
        confidence,
        note: None,
    }
}

/// Survivor ids by brute force: the transitive overlap groups, each reduced
/// to its single best member.
fn brute_force(all: &[Suggestion], policy: &ResolutionPolicy) -> BTreeSet<String> {
    let n = all.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || (all[i].token_start < all[j].token_end && all[j].token_start < all[i].token_end);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    let rank = |f: FormatType| policy.tie_order.iter().position(|&x| x == f).unwrap();
    let key = |s: &Suggestion| {
        (
            (s.confidence * 1e6) as i64,
            std::cmp::Reverse(rank(s.format)),
            std::cmp::Reverse((s.token_start, s.token_end, s.id.clone())),
        )
    };
    (0..n)
        .filter(|&i| (0..n).filter(|&j| reach[i][j]).all(|j| key(&all[i]) >= key(&all[j])))
        .map(|i| all[i].id.clone())
        .collect()
}

#[test]
fn conflict_resolution() {
    report("conflict resolution", (|| {
        let intervals: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..=4).map(move |b| (a, b))).collect();
        let draft = WORDS.join(" ");
        let policies = [
            ResolutionPolicy::default(),
            ResolutionPolicy::new(
                ResolutionMode::HighestConfidence,
                vec![FormatType::Heading, FormatType::Italic, FormatType::Bold, FormatType::Code],
            )
            .unwrap(),
        ];
        let mut fixtures = 0;
        let mut renders = 0;
        // every multiset of 1 to 5 intervals, under every confidence pattern and type rotation
        let mut stack: Vec<Vec<usize>> = (0..intervals.len()).map(|i| vec![i]).collect();
        while let Some(choice) = stack.pop() {
            if choice.len() < 5 {
                let last = *choice.last().unwrap();
                for next in last..intervals.len() {
                    let mut c = choice.clone();
                    c.push(next);
                    stack.push(c);
                }
            }
            let k = choice.len();
            for conf_bits in 0..(1u32 << k) {
                for rot in 0..4 {
                    let all: Vec<Suggestion> = choice
                        .iter()
                        .enumerate()
                        .map(|(i, &iv)| {
                            let conf = if conf_bits & (1 << i) != 0 { 0.9 } else { 0.6 };
                            suggestion(i, FormatType::MODELED[(i + rot) % 4], intervals[iv], conf)
                        })
                        .collect();
                    for policy in &policies {
                        fixtures += 1;
                        let kept = resolve_conflicts(&all, policy);
                        let ids: BTreeSet<String> = kept.iter().map(|s| s.id.clone()).collect();
                        let want = brute_force(&all, policy);
                        check(ids == want, || format!("{all:?}\nkept {ids:?}, brute force {want:?}"))?;
                        check(resolve_conflicts(&kept, policy) == kept, || "not idempotent".into())?;

                        let renderable: Vec<Suggestion> = kept
                            .into_iter()
                            .filter(|s| s.format != FormatType::Heading || (s.token_start, s.token_end) == (0, 4))
                            .collect();
                        let md = render_markdown(&draft, &renderable).map_err(|e| format!("{renderable:?}: {e}"))?;
                        let parsed = parse_body(&md);
                        let mut got: Vec<_> = parsed.spans.iter().map(|s| (s.format, s.start, s.end)).collect();
                        let mut want: Vec<_> = renderable.iter().map(|s| (s.format, s.char_start, s.char_end)).collect();
                        got.sort();
                        want.sort();
                        check(parsed.plain_text == draft && got == want, || {
                            format!("render {md:?} parsed {:?} {got:?}, want {want:?}", parsed.plain_text)
                        })?;
                        renders += 1;
                    }
                }
            }
        }
        Ok(format!("{fixtures} fixtures match brute force; {renders} render/parse round trips exact"))
    })());
}

fn summary(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let median = if n % 2 == 0 { (v[n / 2 - 1] + v[n / 2]) / 2.0 } else { v[n / 2] };
    Some(Summary {
        mean: values.iter().sum::<f64>() / n as f64,
        median,
        max: v[n - 1],
        count: n,
    })
}

fn close_summary(a: &Option<Summary>, b: &Option<Summary>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.count == b.count
                && (a.mean - b.mean).abs() < 1e-12
                && (a.median - b.median).abs() < 1e-12
                && a.max == b.max
        }
        _ => false,
    }
}

#[test]
fn stats_oracle() {
    report("stats oracle", (|| {
        let cases = stats_cases();
        check(cases.len() == 10, || format!("{} answers", cases.len()))?;
        let stats: Vec<_> = cases
            .iter()
            .map(|c| compute_answer_stats(&parse_answer(&RawAnswer { post_id: c.post_id, body: c.body.clone() })))
            .collect();
        let report = aggregate(&stats);

        // independent recount from the hand tallies
        let highlighted: Vec<_> = cases.iter().filter(|c| !c.instances.is_empty()).collect();
        let per_answer: Vec<f64> = highlighted
            .iter()
            .map(|c| c.instances.iter().map(|(_, w)| w.len()).sum::<usize>() as f64)
            .collect();
        let fractions: Vec<f64> = highlighted.iter().map(|c| c.any_words as f64 / c.total_words as f64).collect();
        let all_words: Vec<f64> = FormatType::ALL
            .iter()
            .flat_map(|f| highlighted.iter().flat_map(move |c| c.instances.iter().filter(move |(g, _)| g == f)))
            .flat_map(|(_, w)| w.iter().map(|&x| x as f64))
            .collect();
        let total: usize = per_answer.iter().sum::<f64>() as usize;
        let mismatch = |field: &str| format!("field {field} differs: {report:#?}");
        check(report.n_answers == 10, || mismatch("n_answers"))?;
        check(report.n_highlighted_answers == highlighted.len(), || mismatch("n_highlighted_answers"))?;
        check(report.pct_highlighted == Some(highlighted.len() as f64 / 10.0), || mismatch("pct_highlighted"))?;
        check(report.total_instances == total, || mismatch("total_instances"))?;
        check(close_summary(&report.overall.instances_per_answer, &summary(&per_answer)), || mismatch("overall.instances_per_answer"))?;
        check(close_summary(&report.overall.pct_words_highlighted, &summary(&fractions)), || mismatch("overall.pct_words_highlighted"))?;
        check(close_summary(&report.overall.words_per_instance, &summary(&all_words)), || mismatch("overall.words_per_instance"))?;
        for format in FormatType::ALL {
            let with: Vec<(&common::StatsCase, &Vec<usize>)> = cases
                .iter()
                .filter_map(|c| c.instances.iter().find(|(f, _)| *f == format).map(|(_, w)| (c, w)))
                .collect();
            let t = &report.per_type[&format];
            let instances: usize = with.iter().map(|(_, w)| w.len()).sum();
            let counts: Vec<f64> = with.iter().map(|(_, w)| w.len() as f64).collect();
            let fr: Vec<f64> = with
                .iter()
                .map(|(c, w)| w.iter().sum::<usize>() as f64 / c.total_words as f64)
                .collect();
            let words: Vec<f64> = with.iter().flat_map(|(_, w)| w.iter().map(|&x| x as f64)).collect();
            let name = format.name();
            check(t.answers == with.len(), || mismatch(&format!("{name}.answers")))?;
            check(t.pct_answers == Some(with.len() as f64 / 10.0), || mismatch(&format!("{name}.pct_answers")))?;
            check(t.instances == instances, || mismatch(&format!("{name}.instances")))?;
            check(t.instance_share == Some(instances as f64 / total as f64), || mismatch(&format!("{name}.instance_share")))?;
            check(close_summary(&t.instances_per_answer, &summary(&counts)), || mismatch(&format!("{name}.instances_per_answer")))?;
            check(close_summary(&t.pct_words_highlighted, &summary(&fr)), || mismatch(&format!("{name}.pct_words_highlighted")))?;
            check(close_summary(&t.words_per_instance, &summary(&words)), || mismatch(&format!("{name}.words_per_instance")))?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut shuffled = stats.clone();
        for round in 0..20 {
            shuffled.shuffle(&mut rng);
            let again: CorpusReport = aggregate(&shuffled);
            check(again == report, || format!("shuffle {round} changed the report"))?;
            let cut = rng.gen_range(0..=shuffled.len());
            let mut left = StatsAccumulator::new();
            let mut right = StatsAccumulator::new();
            shuffled[..cut].iter().for_each(|s| left.add(s));
            shuffled[cut..].iter().for_each(|s| right.add(s));
            right.merge(left);
            check(right.finish() == report, || format!("merge at {cut} changed the report"))?;
        }
        Ok(format!("{total} instances over 10 answers match the recount; 20 shuffles invariant"))
    })());
}

#[test]
fn full_dump_regression() {
    let Some(path) = std::env::var_os("HILITER_POSTS_XML") else {
        let _ = writeln!(std::io::stderr(), "SKIP full-dump regression: set HILITER_POSTS_XML to a Posts.xml path");
        return;
    };
    report("full-dump regression", (|| {
        let file = std::fs::File::open(&path).map_err(|e| e.to_string())?;
        let mut acc = StatsAccumulator::new();
        for raw in PostsXmlReader::new(std::io::BufReader::new(file)) {
            let raw = raw.map_err(|e| e.to_string())?;
            acc.add(&compute_answer_stats(&parse_answer(&raw)));
        }
        let r = acc.finish();
        let prevalence = 100.0 * r.pct_highlighted.unwrap_or(0.0);
        let code = 100.0 * r.per_type[&FormatType::Code].pct_answers.unwrap_or(0.0);
        check((prevalence - 47.6).abs() <= 0.5 && (code - 38.5).abs() <= 0.5, || {
            format!("prevalence {prevalence:.2}%, code share {code:.2}%")
        })?;
        Ok(format!("{} answers, prevalence {prevalence:.2}%, code share {code:.2}%", r.n_answers))
    })());
}
