use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use memorability::eval::{
    compare_feature_sets, default_bin_edges, error_difference, eval_protocol, human_upper_bound, EvalConfig,
    EvalReport,
};
use memorability::formats::{
    fmt_f64, read_features, read_matrix, read_pool, read_predictions, read_records, read_table, write_matrix,
    write_predictions, write_records, write_table, RecordSet,
};
use memorability::game::{
    aggregate_scored, aggregate_scores, alternating_order_effects, generate_sequence, order_study_report,
    score_session, simulate_sessions, Attentiveness, MemorabilityTable, OrderMode, Role, SequenceParams,
    SessionRecord, SimulationParams, StimulusItem, TableRow, TrialSequence,
};
use memorability::gbt::{self, EarlyStopping, FeatureMatrix, GBTHyperparams};
use memorability::rng::{derive_seed, stream_rng};
use memorability::stats::{consistency_curve, group_variance_analysis, spearman, ResponseMatrix};
use memorability_server::{CreateExperiment, Store, StoreOptions};
use rand_distr::{Distribution, Normal};

use crate::args::*;
use crate::error::{CliError, Result};

const SCORES_SALT: u64 = 0x7363_6f72_6573;
const EFFECT_SALT: u64 = 0x6566_6665_6374;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenSeq(a) => gen_seq(a),
        Command::Serve(a) => serve(a),
        Command::Simulate(a) => simulate(a),
        Command::Score(a) => score(a),
        Command::Consistency(a) => consistency(a),
        Command::Variance(a) => variance(a),
        Command::OrderStudy(a) => order_study(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Errdiff(a) => errdiff(a),
        Command::UpperBound(a) => upper_bound(a),
    }
}

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_out(path: Option<&PathBuf>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output(path)?))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn write_row<I, S>(w: &mut csv::Writer<Box<dyn Write>>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(csv_err)
}

fn finish(mut w: csv::Writer<Box<dyn Write>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn attentiveness(a: AttnArgs) -> Attentiveness {
    Attentiveness {
        min_vigilance_hit_rate: a.min_vigilance,
        max_false_alarm_rate: a.max_false_alarm,
    }
}

fn sequence_params(s: &SeqArgs, n_targets: usize, n_fillers: usize, n_vigilance: usize) -> SequenceParams {
    SequenceParams {
        n_targets,
        n_fillers,
        n_vigilance,
        target_spacing: s.target_spacing,
        vigilance_spacing: s.vigilance_spacing,
        display_ms: s.display_ms,
        gap_ms: s.gap_ms,
        order_mode: OrderMode::Randomized,
    }
}

fn hyperparams(h: &HpArgs, seed: u64) -> GBTHyperparams {
    GBTHyperparams {
        n_rounds: h.rounds,
        max_depth: h.max_depth,
        learning_rate: h.learning_rate,
        reg_lambda: h.lambda,
        reg_gamma: h.gamma,
        min_child_weight: h.min_child_weight,
        subsample: h.subsample,
        colsample: h.colsample,
        base_score: h.base_score,
        seed,
        standardize: h.standardize,
        early_stopping: h.early_stopping.map(|f| EarlyStopping {
            holdout_fraction: f,
            patience: h.patience,
        }),
    }
}

fn load_records(path: &Path) -> Result<RecordSet> {
    Ok(read_records(open(path)?)?)
}

fn load_table(path: &Path) -> Result<MemorabilityTable> {
    Ok(read_table(open(path)?)?)
}

fn load_features(path: &Path) -> Result<FeatureMatrix> {
    read_features(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// A response matrix from either a matrix CSV or scored session records.
fn load_matrix(path: &Path, attn: AttnArgs) -> Result<ResponseMatrix> {
    let mut head = [0u8; 14];
    let n = open(path)?.read(&mut head)?;
    if &head[..n] == b"participant_id" {
        return Ok(read_matrix(open(path)?)?);
    }
    let set = load_records(path)?;
    let (_, m) = aggregate_scores(set.pairs()?, &attentiveness(attn))?;
    Ok(m)
}

fn feature_set_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn gen_seq(a: GenSeqArgs) -> Result<()> {
    let mut params = sequence_params(&a.seq, a.targets, a.fillers, a.vigilance);
    if let Some(o) = a.order {
        params.order_mode = OrderMode::FixedOrder(o);
    }
    let pool = match &a.pool {
        Some(p) => read_pool(open(p)?)?,
        None => synthetic_pool(a.targets, a.fillers, a.vigilance),
    };
    let sequences = (0..a.count as u64)
        .map(|i| generate_sequence(&pool, &params, a.seed.wrapping_add(i)))
        .collect::<memorability::Result<Vec<_>>>()?;
    let set = RecordSet {
        sequences,
        sessions: Vec::new(),
    };
    write_records(output(a.out.as_ref())?, &set.to_records())?;
    eprintln!("gen-seq: {} sequence(s) of {} slots, seed={}", a.count, params.total_slots(), a.seed);
    Ok(())
}

fn synthetic_pool(targets: usize, fillers: usize, vigilance: usize) -> Vec<StimulusItem> {
    let make = |prefix: &str, n: usize, role: Role| {
        (0..n)
            .map(|i| {
                let id = format!("{prefix}-{i:04}");
                StimulusItem::new(id.clone(), format!("{id}.jpg"), role)
            })
            .collect::<Vec<_>>()
    };
    let mut pool = make("target", targets, Role::Target);
    pool.extend(make("filler", fillers, Role::Filler));
    pool.extend(make("vigil", vigilance, Role::VigilanceFiller));
    pool
}

fn serve(a: ServeArgs) -> Result<()> {
    let opts = StoreOptions {
        snapshot_every: a.snapshot_every,
        fsync: !a.no_fsync,
        pool_root: a.pool_root.clone(),
    };
    let store = Store::open(&a.data_dir, opts)?;
    for path in &a.preload {
        preload(&store, path, a.max_sessions, a.seed)?;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    eprintln!("serve: listening on {} (data in {}), seed={}", a.addr, a.data_dir.display(), a.seed);
    runtime
        .block_on(memorability_server::serve(a.addr, Arc::new(store), a.stimuli))
        .map_err(|e| CliError::Internal(format!("server: {e}")))
}

/// Registers the first sequence of a gen-seq file as an experiment.
fn preload(store: &Store, path: &Path, max_sessions: usize, seed: u64) -> Result<()> {
    let id = feature_set_name(path);
    if store.experiment_ids().contains(&id) {
        return Ok(());
    }
    let set = load_records(path)?;
    let seq = set
        .sequences
        .first()
        .ok_or_else(|| CliError::Data(format!("{}: no sequences", path.display())))?;
    let mut pool: Vec<StimulusItem> = Vec::new();
    for p in &seq.presentations {
        if !pool.iter().any(|i| i.item_id == p.item_id) {
            pool.push(StimulusItem::new(p.item_id.clone(), p.image_uri.clone(), p.role));
        }
    }
    store.create_experiment(CreateExperiment {
        experiment_id: id,
        pool_manifest: None,
        pool: Some(pool),
        params: seq.params.clone(),
        attentiveness: Attentiveness::default(),
        max_sessions,
        seed,
    })?;
    Ok(())
}

fn true_scores(a: &SimulateArgs) -> Result<BTreeMap<String, f64>> {
    if let Some(path) = &a.scores {
        let table = load_table(path)?;
        return Ok(table.rows.into_iter().map(|r| (r.item_id, r.score)).collect());
    }
    let dist = Normal::new(a.mean, a.sd).map_err(|e| CliError::Usage(format!("--mean/--sd: {e}")))?;
    let mut rng = stream_rng(derive_seed(a.seed, SCORES_SALT), 0);
    Ok((0..a.items)
        .map(|i| (format!("item-{i:04}"), dist.sample(&mut rng).clamp(0.0, 1.0)))
        .collect())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scores = true_scores(&a)?;
    let base = SimulationParams {
        sequence: sequence_params(&a.seq, scores.len(), a.fillers, a.vigilance),
        false_alarm_prob: a.fa_prob,
        vigilance_prob: a.vigilance_prob,
    };
    let mut runs: Vec<(TrialSequence, SessionRecord)> = Vec::new();
    if a.orders == 0 {
        runs = simulate_sessions(&scores, a.participants, None, &base, a.seed)?;
    } else {
        let ids: Vec<String> = scores.keys().cloned().collect();
        let orders: Vec<u32> = (1..=a.orders).collect();
        let effects = alternating_order_effects(
            &ids,
            &orders,
            a.order_delta,
            a.order_delta_fraction,
            derive_seed(a.seed, EFFECT_SALT),
        )?;
        for &o in &orders {
            let mut params = base.clone();
            params.sequence.order_mode = OrderMode::FixedOrder(o);
            let seed = derive_seed(a.seed, u64::from(o));
            for (seq, mut rec) in simulate_sessions(&scores, a.participants, Some(&effects), &params, seed)? {
                rec.participant_id = format!("o{o}-{}", rec.participant_id);
                runs.push((seq, rec));
            }
        }
    }

    let mut set = RecordSet::default();
    for (seq, rec) in runs {
        if set.sequence(&seq.sequence_id).is_none() {
            set.sequences.push(seq);
        }
        set.sessions.push(rec);
    }
    write_records(output(a.out.as_ref())?, &set.to_records())?;
    if let Some(path) = &a.truth_out {
        let rows = scores
            .iter()
            .map(|(id, &s)| TableRow {
                item_id: id.clone(),
                score: s,
                hits: 0,
                n_observers: 0,
                variance: s * (1.0 - s),
                false_alarms: 0.0,
            })
            .collect();
        write_table(create(path)?, &MemorabilityTable { rows })?;
    }
    eprintln!(
        "simulate: {} items, {} sessions, {} sequence(s), seed={}",
        scores.len(),
        set.sessions.len(),
        set.sequences.len(),
        a.seed
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let set = load_records(need(&a.input, "in")?)?;
    let attn = attentiveness(a.attn);
    let scores = set
        .pairs()?
        .into_iter()
        .map(|(seq, rec)| score_session(seq, rec, &attn))
        .collect::<memorability::Result<Vec<_>>>()?;
    let (table, matrix) = aggregate_scored(&scores)?;
    write_table(output(a.out.as_ref())?, &table)?;
    if let Some(path) = &a.matrix_out {
        write_matrix(create(path)?, &matrix)?;
    }
    if let Some(path) = &a.sessions_out {
        let mut w = csv_out(Some(path))?;
        write_row(
            &mut w,
            ["session_id", "participant_id", "sequence_id", "false_alarm_rate", "vigilance_hit_rate", "attentive"],
        )?;
        for s in &scores {
            write_row(
                &mut w,
                [
                    s.session_id.clone(),
                    s.participant_id.clone(),
                    s.sequence_id.clone(),
                    fmt_f64(s.false_alarm_rate),
                    fmt_f64(s.vigilance_hit_rate),
                    s.attentive.to_string(),
                ],
            )?;
        }
        finish(w)?;
    }
    let kept = scores.iter().filter(|s| s.attentive).count();
    eprintln!("score: {} items, {kept} of {} sessions attentive", table.rows.len(), scores.len());
    Ok(())
}

fn consistency(a: ConsistencyArgs) -> Result<()> {
    let m = load_matrix(need(&a.input, "in")?, a.attn)?;
    let reports = consistency_curve(&m, &a.k, a.splits, a.seed)?;
    let mut w = csv_out(a.out.as_ref())?;
    write_row(&mut w, ["seed", "k", "mean_rho", "sigma_rho", "n_splits", "resampled", "n_participants"])?;
    for r in &reports {
        write_row(
            &mut w,
            [
                a.seed.to_string(),
                r.group_size.to_string(),
                fmt_f64(r.mean_rho),
                fmt_f64(r.sigma_rho),
                r.n_splits.to_string(),
                r.resampled.to_string(),
                r.n_participants.to_string(),
            ],
        )?;
    }
    finish(w)?;
    if let Some(path) = &a.per_split_out {
        let mut w = csv_out(Some(path))?;
        write_row(&mut w, ["seed", "k", "split", "rho"])?;
        for r in &reports {
            for (i, rho) in r.per_split_rhos.iter().enumerate() {
                write_row(
                    &mut w,
                    [a.seed.to_string(), r.group_size.to_string(), i.to_string(), fmt_f64(*rho)],
                )?;
            }
        }
        finish(w)?;
    }
    eprintln!("consistency: {} participants, k={:?}, seed={}", m.n_participants(), a.k, a.seed);
    Ok(())
}

fn variance(a: VarianceArgs) -> Result<()> {
    let m = load_matrix(need(&a.input, "in")?, a.attn)?;
    let curves = group_variance_analysis(&m, &a.k, a.groups, a.seed)?;
    let mut w = csv_out(a.out.as_ref())?;
    write_row(&mut w, ["seed", "k", "item_id", "mean_score", "variance", "n_groups"])?;
    for c in &curves {
        for p in &c.points {
            write_row(
                &mut w,
                [
                    a.seed.to_string(),
                    c.group_size.to_string(),
                    p.item_id.clone(),
                    fmt_f64(p.mean_score),
                    fmt_f64(p.variance),
                    p.n_groups.to_string(),
                ],
            )?;
        }
    }
    finish(w)?;
    eprintln!("variance: {} participants, k={:?}, seed={}", m.n_participants(), a.k, a.seed);
    Ok(())
}

fn order_study(a: OrderStudyArgs) -> Result<()> {
    let set = load_records(need(&a.input, "in")?)?;
    let mut grouped: BTreeMap<u32, Vec<(TrialSequence, SessionRecord)>> = BTreeMap::new();
    for (seq, rec) in set.pairs()? {
        let order = seq.order_id().ok_or_else(|| {
            CliError::Data(format!("session {} was shown a randomized sequence", rec.session_id))
        })?;
        grouped.entry(order).or_default().push((seq.clone(), rec.clone()));
    }
    let report = order_study_report(&grouped, a.k, a.splits, &attentiveness(a.attn), a.seed)?;
    let mut w = csv_out(a.out.as_ref())?;
    write_row(&mut w, ["seed", "scope", "order", "k", "mean_rho", "sigma_rho", "n_splits", "resampled"])?;
    let row = |scope: &str, order: String, mean: f64, sigma: f64, n: usize, res: usize| {
        [
            a.seed.to_string(),
            scope.to_string(),
            order,
            a.k.to_string(),
            fmt_f64(mean),
            fmt_f64(sigma),
            n.to_string(),
            res.to_string(),
        ]
    };
    for (o, r) in &report.per_order_consistency {
        write_row(&mut w, row("order", o.to_string(), r.mean_rho, r.sigma_rho, r.n_splits, r.resampled))?;
    }
    for (scope, s) in [("within", &report.within_order), ("cross", &report.cross_order)] {
        write_row(&mut w, row(scope, String::new(), s.mean_rho, s.sigma_rho, s.n_splits, s.resampled))?;
    }
    finish(w)?;
    eprintln!(
        "order-study: {} orders, within={:.4} cross={:.4}, seed={}",
        report.order_ids.len(),
        report.within_order.mean_rho,
        report.cross_order.mean_rho,
        a.seed
    );
    Ok(())
}

/// Features reordered to the label table and the matching scores.
fn training_data(features: &Path, labels: &Path) -> Result<(FeatureMatrix, Vec<f64>)> {
    let x = load_features(features)?;
    let gt = load_table(labels)?;
    let ids: Vec<String> = gt.rows.iter().map(|r| r.item_id.clone()).collect();
    let y = gt.rows.iter().map(|r| r.score).collect();
    Ok((x.align_to(&ids)?, y))
}

fn train(a: TrainArgs) -> Result<()> {
    let out = need(&a.out, "out")?;
    let (x, y) = training_data(need(&a.features, "features")?, need(&a.labels, "labels")?)?;
    let hp = hyperparams(&a.hp, a.seed);
    let model = gbt::train(&x, &y, &hp)?;
    let mut w = create(out)?;
    w.write_all(&gbt::serialize(&model))?;
    w.flush()?;
    eprintln!(
        "train: {} items, {} features, {} trees, seed={}",
        x.n_rows(),
        x.n_features(),
        model.trees.len(),
        a.seed
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model_path = need(&a.model, "model")?;
    let bytes = std::fs::read(model_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", model_path.display())))?;
    let model = gbt::deserialize(&bytes)?;
    let x = load_features(need(&a.features, "features")?)?;
    let preds = gbt::predict(&model, &x)?;
    write_predictions(output(a.out.as_ref())?, x.item_ids(), &preds)?;
    eprintln!("predict: {} items, model seed={}", x.n_rows(), model.hyperparams.seed);
    Ok(())
}

fn eval_config(e: EvalArgs, seed: u64) -> EvalConfig {
    EvalConfig {
        n_splits: e.splits,
        test_fraction: e.test_fraction,
        seed,
    }
}

const REPORT_HEADER: [&str; 7] = ["seed", "name", "n_items", "n_splits", "mean_rho", "sigma_rho", "resampled"];

fn report_row(seed: u64, r: &EvalReport) -> Vec<String> {
    vec![
        seed.to_string(),
        r.name.clone(),
        r.n_items.to_string(),
        r.per_split_rho.len().to_string(),
        fmt_f64(r.mean_rho),
        fmt_f64(r.sigma_rho),
        r.resampled.to_string(),
    ]
}

fn write_per_split(path: &PathBuf, seed: u64, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv_out(Some(path))?;
    write_row(&mut w, ["seed", "name", "split", "rho"])?;
    for r in reports {
        for (i, rho) in r.per_split_rho.iter().enumerate() {
            write_row(&mut w, [seed.to_string(), r.name.clone(), i.to_string(), fmt_f64(*rho)])?;
        }
    }
    finish(w)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let features = need(&a.features, "features")?;
    let labels = need(&a.labels, "labels")?;
    let x = load_features(features)?;
    let gt = load_table(labels)?;
    let hp = hyperparams(&a.hp, a.seed);
    let mut report = eval_protocol(&x, &gt, &hp, &eval_config(a.eval, a.seed))?;
    report.name = feature_set_name(features);

    // in-sample fit on every item, as `train` followed by `predict` would do
    let (x_all, y) = training_data(features, labels)?;
    let model = gbt::train(&x_all, &y, &hp)?;
    let full_fit_rho = spearman(&gbt::predict(&model, &x_all)?, &y)?;

    let mut w = csv_out(a.out.as_ref())?;
    let mut header = REPORT_HEADER.to_vec();
    header.push("full_fit_rho");
    write_row(&mut w, header)?;
    let mut row = report_row(a.seed, &report);
    row.push(fmt_f64(full_fit_rho));
    write_row(&mut w, row)?;
    finish(w)?;
    if let Some(path) = &a.per_split_out {
        write_per_split(path, a.seed, std::slice::from_ref(&report))?;
    }
    eprintln!(
        "evaluate: {} mean_rho={:.4} sigma_rho={:.4}, seed={}",
        report.name, report.mean_rho, report.sigma_rho, a.seed
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let gt = load_table(need(&a.labels, "labels")?)?;
    let ids: Vec<String> = gt.rows.iter().map(|r| r.item_id.clone()).collect();
    let mut sets: Vec<(String, FeatureMatrix)> = Vec::new();
    for spec in &a.features {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => (feature_set_name(Path::new(spec)), PathBuf::from(spec)),
        };
        if sets.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("feature set name {name} used twice")));
        }
        sets.push((name, load_features(&path)?));
    }
    if a.concat {
        let mut it = sets.iter();
        let (_, first) = it
            .next()
            .ok_or_else(|| CliError::Usage("--concat needs feature sets".into()))?;
        let mut joined = first.align_to(&ids)?;
        for (_, x) in it {
            joined = joined.hconcat(&x.align_to(&ids)?)?;
        }
        sets.push(("concat".to_string(), joined));
    }
    let hp = hyperparams(&a.hp, a.seed);
    let reports = compare_feature_sets(&sets, &gt, &hp, &eval_config(a.eval, a.seed))?;
    let mut w = csv_out(a.out.as_ref())?;
    let mut header = vec!["rank"];
    header.extend(REPORT_HEADER);
    write_row(&mut w, header)?;
    for (i, r) in reports.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(report_row(a.seed, r));
        write_row(&mut w, row)?;
    }
    finish(w)?;
    let ranking: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    eprintln!("compare: {}, seed={}", ranking.join(" > "), a.seed);
    Ok(())
}

fn errdiff(a: ErrdiffArgs) -> Result<()> {
    let pa = read_predictions(open(need(&a.pred_a, "pred-a")?)?)?;
    let pb = read_predictions(open(need(&a.pred_b, "pred-b")?)?)?;
    let gt = load_table(need(&a.labels, "labels")?)?;
    let edges = if a.bins.is_empty() { default_bin_edges() } else { a.bins.clone() };
    let report = error_difference(&pa, &pb, &gt, &edges)?;
    let mut w = csv_out(a.out.as_ref())?;
    write_row(&mut w, ["item_id", "gt_score", "diff"])?;
    for it in &report.items {
        write_row(&mut w, [it.item_id.clone(), fmt_f64(it.gt_score), fmt_f64(it.diff)])?;
    }
    finish(w)?;
    if let Some(path) = &a.bins_out {
        let mut w = csv_out(Some(path))?;
        write_row(&mut w, ["lo", "hi", "a_better", "b_better", "ties"])?;
        for b in &report.bins {
            write_row(
                &mut w,
                [fmt_f64(b.lo), fmt_f64(b.hi), b.a_better.to_string(), b.b_better.to_string(), b.ties.to_string()],
            )?;
        }
        finish(w)?;
    }
    let a_better: usize = report.bins.iter().map(|b| b.a_better).sum();
    let b_better: usize = report.bins.iter().map(|b| b.b_better).sum();
    eprintln!("errdiff: {} items, A closer on {a_better}, B closer on {b_better}", report.items.len());
    Ok(())
}

fn upper_bound(a: UpperBoundArgs) -> Result<()> {
    let m = load_matrix(need(&a.input, "in")?, a.attn)?;
    let r = human_upper_bound(&m, a.splits, a.seed)?;
    let mut w = csv_out(a.out.as_ref())?;
    write_row(&mut w, ["seed", "k", "mean_rho", "sigma_rho", "n_splits", "resampled", "n_participants"])?;
    write_row(
        &mut w,
        [
            a.seed.to_string(),
            r.group_size.to_string(),
            fmt_f64(r.mean_rho),
            fmt_f64(r.sigma_rho),
            r.n_splits.to_string(),
            r.resampled.to_string(),
            r.n_participants.to_string(),
        ],
    )?;
    finish(w)?;
    eprintln!("upper-bound: k={} mean_rho={:.4}, seed={}", r.group_size, r.mean_rho, a.seed);
    Ok(())
}
