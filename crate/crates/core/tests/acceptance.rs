//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p kws-core --test acceptance` (add `--release` for
//! representative timings).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use kws_core::cascade::{
    detections_to_jsonl, prepare_prototypes, run_pipeline, run_streaming, PipelineConfig,
    Stage2Mode,
};
use kws_core::ctc_search::{
    ctc_forward_logprob, score_sequence, score_sequence_in, DecodeSession, ForwardLogProb,
    KeywordSpec, LinearDomain, LogDomain, ScoreDomain, SearchOptions,
};
use kws_core::matcher::{merge_weight_files, LoraAdapter, Matrix, MatcherModel, Tensor, WeightFile};
use kws_core::metrics::{auroc, eer, recall_at_far, trials_from_scores};
use kws_core::phoneme::{hard_negative, Lexicon, PhonemeInventory, TokenSequence};
use kws_core::posterior::{ctc_collapse, synth, EmbeddingMatrix, PosteriorGram, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn random_rows(rng: &mut ChaCha8Rng, frames: usize, vocab: usize, zero_prob: f64) -> PosteriorGram {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| loop {
            let raw: Vec<f64> = (0..vocab)
                .map(|_| {
                    if rng.gen_bool(zero_prob) {
                        0.0
                    } else {
                        rng.gen_range(0.01..1.0)
                    }
                })
                .collect();
            let sum: f64 = raw.iter().sum();
            if sum > 0.0 {
                break raw.iter().map(|x| x / sum).collect();
            }
        })
        .collect();
    PosteriorGram::from_rows(&rows).unwrap()
}

fn random_keyword(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> KeywordSpec {
    let len = rng.gen_range(1..=max_len);
    let ids = (0..len).map(|_| rng.gen_range(1..vocab)).collect();
    KeywordSpec::new("kw", TokenSequence::new(ids), 0, 0.5).unwrap()
}

// ---------------------------------------------------------------------------
// 1. trellis against exhaustive max-product path enumeration
// ---------------------------------------------------------------------------

/// Best product per final node over all node paths n_1..n_T, where n_1 is
/// one of the two start nodes with weight 1 and every later frame t moves by
/// 0, 1, or (into a non-blank node) 2 and multiplies in p_t(label).
fn trellis_oracle(p: &PosteriorGram, labels: &[usize], blank: usize) -> Vec<Vec<f64>> {
    let n = labels.len();
    let frames = p.frames();
    let mut best = vec![vec![0.0; n]; frames];
    fn walk(
        p: &PosteriorGram,
        labels: &[usize],
        blank: usize,
        t: usize,
        node: usize,
        product: f64,
        best: &mut [Vec<f64>],
    ) {
        if product > best[t][node] {
            best[t][node] = product;
        }
        if t + 1 == p.frames() {
            return;
        }
        let row = p.row(t + 1);
        for step in 0..=2 {
            let next = node + step;
            if next >= labels.len() || (step == 2 && labels[next] == blank) {
                continue;
            }
            walk(p, labels, blank, t + 1, next, product * row[labels[next]], best);
        }
    }
    for start in 0..2 {
        walk(p, labels, blank, 0, start, 1.0, &mut best);
    }
    best
}

fn criterion_trellis_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e11);
    let instances = 600;
    for case in 0..instances {
        let vocab = rng.gen_range(2..=4);
        let frames = rng.gen_range(1..=6);
        let kw = random_keyword(&mut rng, vocab, 3);
        let p = random_rows(&mut rng, frames, vocab, 0.15);
        let labels = kw.interleaved().to_vec();
        let oracle = trellis_oracle(&p, &labels, 0);
        let n = labels.len();
        let oracle_score = |t: usize| oracle[t][n - 2].max(oracle[t][n - 1]);

        let mut lin =
            DecodeSession::<LinearDomain>::new(Arc::new(kw.clone()), vocab, SearchOptions::literal())
                .unwrap();
        let mut log =
            DecodeSession::<LogDomain>::new(Arc::new(kw.clone()), vocab, SearchOptions::literal())
                .unwrap();
        let batch_lin = score_sequence_in::<LinearDomain>(&p, &kw, SearchOptions::literal()).unwrap();
        let batch_log = score_sequence_in::<LogDomain>(&p, &kw, SearchOptions::literal()).unwrap();
        for (t, expected) in oracle.iter().enumerate() {
            let fs_lin = lin.step(p.row(t)).unwrap();
            let fs_log = log.step(p.row(t)).unwrap();
            let d_lin = lin.delta_linear();
            let d_log = log.delta_linear();
            ensure(d_lin == *expected, || {
                format!("case {case} t={}: linear δ {d_lin:?} vs oracle {expected:?}", t + 1)
            })?;
            for (got, want) in d_log.iter().zip(expected) {
                ensure(rel_close(*got, *want, 1e-9), || {
                    format!("case {case} t={}: log δ {d_log:?} vs oracle {expected:?}", t + 1)
                })?;
            }
            if t > 0 {
                let want = oracle_score(t);
                ensure(fs_lin.score == want && batch_lin.scores[t] == want, || {
                    format!("case {case} t={}: linear score {} / {} vs {want}", t + 1, fs_lin.score, batch_lin.scores[t])
                })?;
                ensure(
                    rel_close(fs_log.score, want, 1e-9) && batch_log.scores[t] == fs_log.score,
                    || format!("case {case} t={}: log score {} / {} vs {want}", t + 1, fs_log.score, batch_log.scores[t]),
                )?;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{instances} instances"))
}

// ---------------------------------------------------------------------------
// 2. CTC forward probability against |A|^T enumeration
// ---------------------------------------------------------------------------

fn forward_oracle(p: &PosteriorGram, tokens: &TokenSequence) -> f64 {
    let (frames, vocab) = (p.frames(), p.vocab());
    let mut total = 0.0;
    let mut path = vec![0usize; frames];
    loop {
        if ctc_collapse(path.iter().copied(), 0) == *tokens {
            total += path.iter().enumerate().map(|(t, &a)| p.row(t)[a]).product::<f64>();
        }
        let mut i = 0;
        loop {
            if i == frames {
                return total;
            }
            path[i] += 1;
            if path[i] < vocab {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

fn criterion_ctc_forward() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf0d);
    let instances = 300;
    let mut infeasible = 0;
    for case in 0..instances {
        let vocab = rng.gen_range(2..=4);
        let frames = rng.gen_range(1..=5);
        let len = rng.gen_range(1..=3);
        let tokens = TokenSequence::new((0..len).map(|_| rng.gen_range(1..vocab)).collect());
        let p = random_rows(&mut rng, frames, vocab, 0.1);
        let want = forward_oracle(&p, &tokens);
        let got = ctc_forward_logprob(&p, &tokens, 0).unwrap();
        match got {
            ForwardLogProb::Infeasible => {
                infeasible += 1;
                ensure(want == 0.0, || format!("case {case}: infeasible but oracle {want}"))?
            }
            ForwardLogProb::Feasible(lp) => ensure((lp.exp() - want).abs() <= 1e-12, || {
                format!("case {case}: exp({lp}) vs oracle {want}")
            })?,
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{instances} instances, {infeasible} infeasible"))
}

// ---------------------------------------------------------------------------
// 3. the three-frame worked example
// ---------------------------------------------------------------------------

fn worked_example<D: ScoreDomain>() -> Result<(Vec<f64>, f64, Vec<f64>, f64), String> {
    let kw = KeywordSpec::new("a", TokenSequence::new(vec![1]), 0, 0.5).unwrap();
    let mut s = DecodeSession::<D>::new(Arc::new(kw), 3, SearchOptions::literal()).unwrap();
    s.step(&[0.2, 0.5, 0.3]).unwrap();
    let s2 = s.step(&[0.7, 0.2, 0.1]).unwrap().score;
    let d2 = s.delta_linear();
    let s3 = s.step(&[0.1, 0.8, 0.1]).unwrap().score;
    let d3 = s.delta_linear();
    Ok((d2, s2, d3, s3))
}

fn criterion_worked_example() -> Outcome {
    let (d2, s2, d3, s3) = worked_example::<LinearDomain>()?;
    let exact2 = [0.7 * 1.0, 0.2 * 1.0, 0.7 * 1.0];
    let exact3 = [0.1 * 0.7, 0.8 * 0.7, 0.1 * 0.7];
    ensure(d2 == exact2 && s2 == 0.7, || format!("t=2: δ {d2:?}, score {s2}"))?;
    ensure(d3 == exact3 && s3 == 0.8 * 0.7, || format!("t=3: δ {d3:?}, score {s3}"))?;
    let decimals = [([0.7, 0.2, 0.7], 0.7, &d2, s2), ([0.07, 0.56, 0.07], 0.56, &d3, s3)];
    for (want, want_score, got, got_score) in decimals {
        for (w, g) in want.iter().zip(got.iter()) {
            ensure((w - g).abs() <= 1e-15, || format!("δ {got:?} vs {want:?}"))?;
        }
        ensure((want_score - got_score).abs() <= 1e-15, || format!("score {got_score}"))?;
    }
    let (l2, ls2, l3, ls3) = worked_example::<LogDomain>()?;
    for (a, b) in l2.iter().chain(&l3).chain([&ls2, &ls3]).zip(d2.iter().chain(&d3).chain([&s2, &s3])) {
        ensure(rel_close(*a, *b, 1e-12), || format!("log domain {a} vs {b}"))?;
    }
    let kw = KeywordSpec::new("a", TokenSequence::new(vec![1]), 0, 0.5).unwrap();
    let p = PosteriorGram::from_rows(&[
        vec![0.2, 0.5, 0.3],
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
    ])
    .unwrap();
    let trace = score_sequence_in::<LinearDomain>(&p, &kw, SearchOptions::literal()).unwrap();
    ensure(trace.scores[1..] == [0.7, 0.8 * 0.7], || format!("batch scores {:?}", trace.scores))?;
    Ok("δ(2)=[0.7,0.2,0.7] Score=0.7; δ(3)=[0.07,0.56,0.07] Score=0.56".into())
}

// ---------------------------------------------------------------------------
// 4. streaming equals batch
// ---------------------------------------------------------------------------

fn criterion_streaming_batch() -> Outcome {
    let inv = PhonemeInventory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b47c);
    let vocab = inv.len();
    let dim = 16;
    let keyword_pool: [&[usize]; 4] = [&[10, 20, 30], &[10, 20, 30, 40], &[5, 6], &[7, 7, 8]];
    let model = MatcherModel::random(vocab, dim, 2, 99);
    let utterances = 100;
    let mut detections = 0;
    for case in 0..utterances {
        let mut ids = Vec::new();
        for _ in 0..rng.gen_range(2..=8) {
            if rng.gen_bool(0.5) {
                ids.extend_from_slice(keyword_pool[rng.gen_range(0..keyword_pool.len())]);
            } else {
                ids.extend((0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..vocab)));
            }
        }
        let spec = SynthSpec::new(TokenSequence::new(ids))
            .frames_per_token(rng.gen_range(1..=3))
            .blank_frames(rng.gen_range(0..=2))
            .pad_frames(rng.gen_range(0..=3))
            .alpha(rng.gen_range(0.0..0.3))
            .seed(rng.gen())
            .dim(dim);
        let (p, e) = synth(&spec, &inv).unwrap();

        let tau1 = [0.0, 0.01, 0.04, 0.1, 0.3][rng.gen_range(0..5)];
        let keywords = keyword_pool
            .iter()
            .enumerate()
            .filter(|_| rng.gen_bool(0.75))
            .map(|(i, t)| KeywordSpec::new(format!("k{i}"), TokenSequence::new(t.to_vec()), 0, tau1).unwrap())
            .collect::<Vec<_>>();
        let keywords = if keywords.is_empty() {
            vec![KeywordSpec::new("k0", TokenSequence::new(keyword_pool[0].to_vec()), 0, tau1).unwrap()]
        } else {
            keywords
        };
        let mode = [Stage2Mode::Prototype, Stage2Mode::Learned, Stage2Mode::Off][rng.gen_range(0..3)];
        let search = SearchOptions {
            repeat_guard: rng.gen_bool(0.3),
            free_start: rng.gen_bool(0.8),
            rearm_on_close: rng.gen_bool(0.3),
            rearm_floor: if rng.gen_bool(0.3) { 1e-6 } else { -1.0 },
        };
        let cfg = PipelineConfig::new(keywords)
            .stage2_mode(mode)
            .tau2([0.0, 0.3, 0.5, 0.7][rng.gen_range(0..4)])
            .crop_margin(rng.gen_range(0..=4))
            .min_gap(rng.gen_range(0..=3))
            .max_len(rng.gen_range(3..=40))
            .suppress_prefixes(rng.gen_bool(0.7))
            .fuse_scores(rng.gen_bool(0.3))
            .search(search);
        let model = (mode == Stage2Mode::Learned).then_some(&model);
        let protos = prepare_prototypes(&cfg, model, &[], dim).unwrap();
        let emb: Option<&EmbeddingMatrix> = (mode != Stage2Mode::Off || rng.gen_bool(0.5)).then_some(&e);
        let batch = run_pipeline(&p, emb, &cfg, model, &protos).map_err(|err| format!("case {case}: {err}"))?;
        let stream = run_streaming(&p, emb, &cfg, model, &protos).map_err(|err| format!("case {case}: {err}"))?;
        let (a, b) = (detections_to_jsonl(&batch.0), detections_to_jsonl(&stream.0));
        ensure(a == b, || format!("case {case}: batch\n{a}streaming\n{b}"))?;
        ensure(batch.1 == stream.1, || format!("case {case}: stats {:?} vs {:?}", batch.1, stream.1))?;
        detections += batch.0.len();
    }
    Ok(format!("{utterances} utterances, {detections} detections identical"))
}

// ---------------------------------------------------------------------------
// 5. metrics against counting oracles
// ---------------------------------------------------------------------------

fn far_frr(pos: &[f64], neg: &[f64], tau: f64) -> (f64, f64) {
    let fa = neg.iter().filter(|&&s| s >= tau).count();
    let fr = pos.iter().filter(|&&s| s < tau).count();
    (fa as f64 / neg.len() as f64, fr as f64 / pos.len() as f64)
}

fn eer_oracle(pos: &[f64], neg: &[f64]) -> f64 {
    let mut taus: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let top = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    taus.push(top.next_up());
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let points: Vec<(f64, f64)> = taus.iter().map(|&t| far_frr(pos, neg, t)).collect();
    let i = points.iter().position(|(fa, fr)| fa <= fr).unwrap();
    let (fa, fr) = points[i];
    if fa == fr || i == 0 {
        return fa;
    }
    let (pa, pr) = points[i - 1];
    // FAR - FRR falls from positive to negative between i-1 and i
    let s = (pa - pr) / ((pa - pr) - (fa - fr));
    pa + s * (fa - pa)
}

fn recall_oracle(pos: &[f64], neg: &[f64], allowed: usize) -> f64 {
    let mut taus: Vec<f64> = pos.iter().chain(neg).flat_map(|&s| [s, s.next_up()]).collect();
    taus.push(f64::NEG_INFINITY);
    taus.iter()
        .filter(|&&t| neg.iter().filter(|&&s| s >= t).count() <= allowed)
        .map(|&t| pos.iter().filter(|&&s| s >= t).count() as f64 / pos.len() as f64)
        .fold(0.0, f64::max)
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa0c);
    let sets = 100;
    for case in 0..sets {
        let levels = rng.gen_range(2..=20);
        let draw = |rng: &mut ChaCha8Rng, n: usize, shift: usize| -> Vec<f64> {
            (0..n).map(|_| (rng.gen_range(0..levels) + shift) as f64 / 25.0).collect()
        };
        let (n_pos, n_neg, shift) = (rng.gen_range(1..=40), rng.gen_range(1..=40), rng.gen_range(0..4));
        let pos = draw(&mut rng, n_pos, shift);
        let neg = draw(&mut rng, n_neg, 0);
        let trials = trials_from_scores(&pos, &neg);

        let mut doubled = 0u64;
        for p in &pos {
            for n in &neg {
                doubled += if p > n { 2 } else if p == n { 1 } else { 0 };
            }
        }
        let want = doubled as f64 / (2 * pos.len() * neg.len()) as f64;
        let got = auroc(&trials).unwrap();
        ensure(got == want, || format!("case {case}: auroc {got} vs {want}"))?;

        let want = eer_oracle(&pos, &neg);
        let got = eer(&trials).unwrap();
        ensure((got - want).abs() <= 1e-12, || format!("case {case}: eer {got} vs {want}"))?;

        let hours = rng.gen_range(1..=10) as f64;
        let targets = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0];
        let got = recall_at_far(&pos, &neg, hours, &targets).unwrap();
        for ((f, r), &target) in got.iter().zip(&targets) {
            let allowed = (target * hours).floor() as usize;
            let want = recall_oracle(&pos, &neg, allowed);
            ensure(*f == target && *r == want, || {
                format!("case {case}: recall@{target}/h over {hours} h = {r}, oracle {want}")
            })?;
        }
    }
    let fixture = trials_from_scores(&[0.8, 0.4], &[0.6, 0.2]);
    let (a, e) = (auroc(&fixture).unwrap(), eer(&fixture).unwrap());
    ensure(a == 0.75 && e == 0.5, || format!("fixture auroc {a} eer {e}"))?;
    Ok(format!("{sets} trial sets; fixture AUROC {a} EER {e}"))
}

// ---------------------------------------------------------------------------
// 6. LoRA merge against dense addition
// ---------------------------------------------------------------------------

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn criterion_lora() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10a);
    let cases = 50;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let d = rng.gen_range(1..=32);
        let r = rng.gen_range(1..=8usize.min(d));
        let scale = rng.gen_range(0.1..2.0);
        let target = ["blk0.wq", "blk0.wk", "blk0.wv", "xattn.wq"][rng.gen_range(0..4)];
        let w = random_matrix(&mut rng, d, d);
        let a = random_matrix(&mut rng, d, r);
        let b = random_matrix(&mut rng, r, d);
        let mut base = WeightFile::new();
        base.insert(target, Tensor::from_matrix(&w));
        base.insert("head.b", Tensor::scalar(0.25));
        let adapter = LoraAdapter::new(target, a.clone(), b.clone()).unwrap().with_scale(scale);
        let merged = merge_weight_files(&base, &[adapter]).unwrap();
        let got = merged.get(target).unwrap().to_matrix().unwrap();
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..r {
                    acc += a.get(i, k) * b.get(k, j);
                }
                let want = w.get(i, j) + scale * acc;
                let err = (got.get(i, j) - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-12, || format!("case {case}: ({i},{j}) {} vs {want}", got.get(i, j)))?;
            }
        }
        ensure(merged.get("head.b") == base.get("head.b"), || format!("case {case}: untouched weight changed"))?;

        let zero = LoraAdapter::new(target, Matrix::zeros(d, r), Matrix::zeros(r, d)).unwrap();
        let same = merge_weight_files(&base, &[zero]).unwrap();
        ensure(same.to_bytes().unwrap() == base.to_bytes().unwrap(), || {
            format!("case {case}: zero adapter changed bytes")
        })?;
    }
    Ok(format!("{cases} cases, max error {worst:.2e}; zero adapters byte-identical"))
}

// ---------------------------------------------------------------------------
// 7 & 8. synthetic corpus
// ---------------------------------------------------------------------------

const CORPUS_TAU1: f64 = 0.04;
const CORPUS_DIM: usize = 16;

struct Corpus {
    keywords: Vec<KeywordSpec>,
    /// Per keyword: positive and negative utterances.
    utterances: Vec<(Vec<SynthSpec>, Vec<SynthSpec>)>,
}

fn corpus_keywords(inv: &PhonemeInventory) -> Vec<KeywordSpec> {
    let lexicon = Lexicon::builtin(inv).unwrap();
    let mut words: Vec<&str> = lexicon
        .words()
        .into_iter()
        .filter(|w| (3..=5).contains(&lexicon.tokens(w).unwrap().len()))
        .collect();
    words.sort_unstable();
    words
        .into_iter()
        .take(20)
        .map(|w| KeywordSpec::new(w, lexicon.tokens(w).unwrap().clone(), inv.blank_id(), CORPUS_TAU1).unwrap())
        .collect()
}

fn build_corpus(inv: &PhonemeInventory, keywords: &[KeywordSpec], seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<usize> = (1..inv.len()).collect();
    let utt = |rng: &mut ChaCha8Rng, tokens: TokenSequence| {
        SynthSpec::new(tokens)
            .frames_per_token(rng.gen_range(2..=4))
            .blank_frames(rng.gen_range(0..=1))
            .pad_frames(rng.gen_range(2..=4))
            .seed(rng.gen())
            .dim(CORPUS_DIM)
    };
    let utterances = keywords
        .iter()
        .map(|k| {
            let pos = (0..20).map(|_| utt(&mut rng, k.tokens().clone())).collect();
            let neg = (0..20)
                .map(|_| {
                    let tokens = hard_negative(k.tokens(), 1, &symbols, &mut rng).unwrap();
                    utt(&mut rng, tokens)
                })
                .collect();
            (pos, neg)
        })
        .collect();
    Corpus {
        keywords: keywords.to_vec(),
        utterances,
    }
}

fn stage1_score(spec: &SynthSpec, alpha: f64, kw: &KeywordSpec, inv: &PhonemeInventory) -> f64 {
    let (p, _) = synth(&spec.clone().alpha(alpha), inv).unwrap();
    score_sequence(&p, kw, SearchOptions::default()).unwrap().max_score()
}

/// Stage-2 score shifted above every stage-1 score when a candidate exists.
fn cascade_score(spec: &SynthSpec, alpha: f64, kw: &KeywordSpec, inv: &PhonemeInventory) -> f64 {
    let (p, e) = synth(&spec.clone().alpha(alpha), inv).unwrap();
    let cfg = PipelineConfig::new(vec![kw.clone()])
        .stage2_mode(Stage2Mode::Prototype)
        .tau2(0.0);
    let protos = prepare_prototypes(&cfg, None, &[], CORPUS_DIM).unwrap();
    let (dets, _) = run_pipeline(&p, Some(&e), &cfg, None, &protos).unwrap();
    match dets.iter().filter_map(|d| d.s2).reduce(f64::max) {
        Some(s2) => 1.0 + s2,
        None => score_sequence(&p, kw, SearchOptions::default()).unwrap().max_score(),
    }
}

fn corpus_scores(
    corpus: &Corpus,
    alpha: f64,
    inv: &PhonemeInventory,
    score: fn(&SynthSpec, f64, &KeywordSpec, &PhonemeInventory) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (kw, (p, n)) in corpus.keywords.iter().zip(&corpus.utterances) {
        pos.extend(p.iter().map(|s| score(s, alpha, kw, inv)));
        neg.extend(n.iter().map(|s| score(s, alpha, kw, inv)));
    }
    (pos, neg)
}

fn mean_recall(corpus: &Corpus, alpha: f64, inv: &PhonemeInventory) -> f64 {
    let per_keyword: Vec<f64> = corpus
        .keywords
        .iter()
        .zip(&corpus.utterances)
        .map(|(kw, (pos, _))| {
            let hits = pos.iter().filter(|s| stage1_score(s, alpha, kw, inv) >= kw.threshold()).count();
            hits as f64 / pos.len() as f64
        })
        .collect();
    per_keyword.iter().sum::<f64>() / per_keyword.len() as f64
}

const ALPHAS: [f64; 3] = [0.0, 0.1, 0.2];

fn criterion_perturbation_trend() -> Outcome {
    let inv = PhonemeInventory::default();
    let keywords = corpus_keywords(&inv);
    ensure(keywords.len() == 20, || format!("only {} keywords", keywords.len()))?;
    let reps = 100;
    let mut monotone = 0;
    let mut recalls = [0.0; 3];
    for rep in 0..reps {
        let corpus = build_corpus(&inv, &keywords, 1000 + rep);
        let r: Vec<f64> = ALPHAS.iter().map(|&a| mean_recall(&corpus, a, &inv)).collect();
        if r.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
        for (acc, v) in recalls.iter_mut().zip(&r) {
            *acc += v / reps as f64;
        }
    }
    ensure(monotone * 100 >= 95 * reps as usize, || {
        format!("recall non-increasing in only {monotone}/{reps} repetitions")
    })?;

    let corpus = build_corpus(&inv, &keywords, 1000);
    let mut aurocs = Vec::new();
    for &alpha in &ALPHAS {
        let (sp, sn) = corpus_scores(&corpus, alpha, &inv, stage1_score);
        let (cp, cn) = corpus_scores(&corpus, alpha, &inv, cascade_score);
        let stage1 = auroc(&trials_from_scores(&sp, &sn)).unwrap();
        let cascade = auroc(&trials_from_scores(&cp, &cn)).unwrap();
        ensure(cascade >= stage1, || format!("α={alpha}: cascade AUROC {cascade} < stage-1 {stage1}"))?;
        aurocs.push(format!("α={alpha}: {stage1:.4}→{cascade:.4}"));
    }
    Ok(format!(
        "monotone {monotone}/{reps}; mean recall {:.3}/{:.3}/{:.3}; AUROC stage-1→cascade {}",
        recalls[0],
        recalls[1],
        recalls[2],
        aurocs.join(", ")
    ))
}

fn criterion_separation() -> Outcome {
    let started = Instant::now();
    let inv = PhonemeInventory::default();
    let keywords = corpus_keywords(&inv);
    let corpus = build_corpus(&inv, &keywords, 1000);
    let (pos, neg) = corpus_scores(&corpus, 0.1, &inv, cascade_score);
    let a = auroc(&trials_from_scores(&pos, &neg)).unwrap();
    let recall = recall_at_far(&pos, &neg, 1.0, &[0.0]).unwrap()[0].1;
    ensure(a >= 0.95, || format!("AUROC {a}"))?;
    ensure(recall >= 0.95, || format!("recall at zero false alarms {recall}"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("AUROC {a:.4}, recall@0 FA {recall:.4} over {} trials", pos.len() + neg.len()))
}

// ---------------------------------------------------------------------------
// 9. prefix suppression
// ---------------------------------------------------------------------------

fn criterion_prefix_suppression() -> Outcome {
    let inv = PhonemeInventory::default();
    let lexicon = Lexicon::builtin(&inv).unwrap();
    let kw = |w: &str| KeywordSpec::from_text(w, &lexicon, inv.blank_id(), 0.04).unwrap();
    let spec = SynthSpec::new(lexicon.tokens("rainbow").unwrap().clone())
        .frames_per_token(2)
        .pad_frames(3)
        .alpha(0.05)
        .seed(9);
    let (p, e) = synth(&spec, &inv).unwrap();
    let mut counts = Vec::new();
    for suppress in [true, false] {
        let cfg = PipelineConfig::new(vec![kw("rain"), kw("rainbow")]).suppress_prefixes(suppress);
        let protos = prepare_prototypes(&cfg, None, &[], e.dim()).unwrap();
        let batch = run_pipeline(&p, Some(&e), &cfg, None, &protos).unwrap();
        let stream = run_streaming(&p, Some(&e), &cfg, None, &protos).unwrap();
        ensure(batch == stream, || format!("suppress={suppress}: streaming differs from batch"))?;
        let names: Vec<&str> = batch.0.iter().map(|d| d.keyword.as_str()).collect();
        counts.push(format!("{suppress}: {names:?}"));
        if suppress {
            ensure(names == ["rainbow"], || format!("suppression on: {names:?}"))?;
        } else {
            ensure(names.len() == 2 && names.contains(&"rain") && names.contains(&"rainbow"), || {
                format!("suppression off: {names:?}")
            })?;
        }
    }
    Ok(counts.join("; "))
}

// ---------------------------------------------------------------------------
// 10. throughput
// ---------------------------------------------------------------------------

fn time_stage1(p: &PosteriorGram, kw: &KeywordSpec) -> Duration {
    (0..5)
        .map(|_| {
            let t = Instant::now();
            let trace = score_sequence(p, kw, SearchOptions::default()).unwrap();
            std::hint::black_box(trace);
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn criterion_throughput() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7);
    let vocab = 71;
    let frames = 100_000;
    let long = random_rows(&mut rng, 2 * frames, vocab, 0.0);
    let short = PosteriorGram::new(frames, vocab, long.as_slice()[..frames * vocab].to_vec()).unwrap();
    let kw = KeywordSpec::new("kw", TokenSequence::new(vec![12, 40, 7, 33, 61]), 0, 0.04).unwrap();
    let t1 = time_stage1(&short, &kw);
    let t2 = time_stage1(&long, &kw);
    let fps = frames as f64 / t1.as_secs_f64();
    let ratio = t2.as_secs_f64() / t1.as_secs_f64();
    ensure(fps >= 10_000.0, || format!("{fps:.0} frames/s"))?;
    ensure(ratio <= 2.5, || format!("doubling T took {ratio:.2}× as long"))?;
    Ok(format!("{fps:.0} frames/s ({:.0}× real time), doubling ratio {ratio:.2}", fps / 100.0))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("trellis oracle equivalence", criterion_trellis_oracle),
        ("CTC forward equivalence", criterion_ctc_forward),
        ("worked trellis fixture", criterion_worked_example),
        ("streaming/batch bit-exactness", criterion_streaming_batch),
        ("metrics oracles", criterion_metrics),
        ("LoRA merge", criterion_lora),
        ("perturbation robustness trend", criterion_perturbation_trend),
        ("end-to-end synthetic separation", criterion_separation),
        ("prefix suppression", criterion_prefix_suppression),
        ("stage-1 throughput", criterion_throughput),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.2}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.2}s) {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
