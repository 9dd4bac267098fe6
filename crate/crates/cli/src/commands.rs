use std::fs;
use std::path::Path;
use std::time::Instant;

use rfod::export::{
    row_scores_csv, write_cat_probabilities, write_cell_scores, write_uncertainty, write_x_hat, Heatmap,
};
use rfod::{
    infer_schema, load_table, split_for_eval, EvalReport, ForestConfig, InferOptions, LabeledTable, Model64,
    RfodConfig, Schema, ScoringOptions, Table64, TreeSettings,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{BenchArgs, DetectArgs, EvalArgs, FitArgs, HeatmapArgs, ModelArgs, SchemaArgs, ScoringArgs};
use crate::manifest::{self, RunManifest};
use crate::CliError;

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "--alpha: alpha must be in (0, 0.5), got {alpha}"
        )))
    }
}

fn check_cap(cap: f64) -> Result<(), CliError> {
    if cap > 0.0 && cap.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "--quantile-cap must be positive and finite, got {cap}"
        )))
    }
}

fn build_config(m: &ModelArgs) -> Result<RfodConfig, CliError> {
    check_alpha(m.alpha)?;
    if !(m.beta > 0.0 && m.beta <= 1.0) {
        return Err(CliError::config(format!(
            "--beta: beta must be in (0, 1], got {}",
            m.beta
        )));
    }
    if m.trees == 0 {
        return Err(CliError::config("--trees must be at least 1"));
    }
    if m.mtry == Some(0) {
        return Err(CliError::config("--mtry must be at least 1"));
    }
    if m.max_depth == Some(0) {
        return Err(CliError::config("--max-depth must be at least 1"));
    }
    check_cap(m.quantile_cap)?;
    let config = RfodConfig {
        alpha: m.alpha,
        beta: m.beta,
        forest: ForestConfig {
            n_trees: m.trees,
            tree: TreeSettings {
                mtry: m.mtry,
                max_depth: m.max_depth,
                ..TreeSettings::default()
            },
            ..ForestConfig::default()
        },
        seed: m.seed,
        distance: m.distance.into(),
        aggregation: m.aggregation.into(),
        score_cap: m.quantile_cap,
    };
    config.validate()?;
    Ok(config)
}

fn scoring_options(base: ScoringOptions, s: &ScoringArgs) -> Result<ScoringOptions, CliError> {
    let mut o = base;
    if let Some(a) = s.alpha {
        check_alpha(a)?;
        o.alpha = a;
    }
    if let Some(d) = s.distance {
        o.distance = d.into();
    }
    if let Some(a) = s.aggregation {
        o.aggregation = a.into();
    }
    if let Some(c) = s.quantile_cap {
        check_cap(c)?;
        o.score_cap = c;
    }
    Ok(o)
}

fn resolve_schema(csv: &Path, args: &SchemaArgs) -> Result<Schema, CliError> {
    match &args.schema {
        Some(path) => {
            let schema = Schema::load_sidecar(path).map_err(|e| CliError::from(e).context(path))?;
            match &args.label {
                Some(l) => Ok(schema.with_label(Some(l.clone()))?),
                None => Ok(schema),
            }
        }
        None => {
            let options = InferOptions {
                label_column: args.label.clone(),
                categorical_max_cardinality: None,
                force_categorical: args.categorical.clone(),
            };
            infer_schema::<f64>(csv, &options).map_err(|e| CliError::from(e).context(csv))
        }
    }
}

fn load(csv: &Path, schema: &Schema) -> Result<LabeledTable<f64>, CliError> {
    load_table(csv, Some(schema)).map_err(|e| CliError::from(e).context(csv))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
}

fn load_model(dir: &Path) -> Result<Model64, CliError> {
    Model64::load(dir).map_err(|e| CliError::from(e).context(dir))
}

/// Digest of the in-memory model: forests and quantile profile.
fn model_fingerprint(model: &Model64) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for f in model.forests() {
        h.update(f.to_json()?.as_bytes());
    }
    h.update(
        serde_json::to_string(model.profile())
            .map_err(rfod::Error::from)?
            .as_bytes(),
    );
    Ok(hex::encode(h.finalize()))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> rfod::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    manifest::write(path, &buf)
}

pub fn fit(args: &FitArgs, threads: Option<usize>) -> Result<(), CliError> {
    let config = build_config(&args.model)?;
    let schema = resolve_schema(&args.train, &args.schema)?;
    let train = load(&args.train, &schema)?.table;
    let (model, timings) = Model64::fit_timed(&train, &config)?;
    create_dir(&args.out)?;
    model
        .save(&args.out)
        .map_err(|e| CliError::from(e).context(&args.out))?;

    for (j, secs) in timings.per_feature.iter().enumerate() {
        println!("TPF {:<24} {secs:.6} s", model.schema().name(j));
    }
    println!(
        "fit total {:.6} s, prune {:.6} s, mean TPF {:.6} s over {} features",
        timings.fit_total,
        timings.prune,
        timings.mean_per_feature(),
        timings.per_feature.len()
    );

    let mut run = RunManifest::new("fit", &config, Some(config.seed), threads)?;
    run.input(&args.train)?;
    if let Some(s) = &args.schema.schema {
        run.input(s)?;
    }
    run.outputs.push(args.out.clone());
    run.timing("fit_total", timings.fit_total);
    run.timing("fit_per_feature", timings.mean_per_feature());
    run.timing("per_feature", &timings.per_feature);
    run.timing("prune", timings.prune);
    run.write(&args.out)
}

struct Scored {
    test: Table64,
    detection: rfod::Detection<f64>,
    recon: rfod::ReconstructionResult<f64>,
    seconds: f64,
}

fn score_file(
    model: &Model64,
    test: &Path,
    label: &Option<String>,
    options: &ScoringOptions,
) -> Result<Scored, CliError> {
    let schema = model.schema().clone().with_label(label.clone())?;
    let test = load(test, &schema)?.table;
    let start = Instant::now();
    let aligned = model.align(&test)?;
    let recon = model.reconstruct_aligned(&aligned)?;
    let detection = model.score(&aligned, &recon, options)?;
    Ok(Scored {
        test,
        detection,
        recon,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn per_sample(seconds: f64, m: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        seconds / m as f64
    }
}

#[derive(Serialize)]
struct DetectConfig<'a> {
    model: &'a RfodConfig,
    scoring: &'a ScoringOptions,
}

pub fn detect(args: &DetectArgs, threads: Option<usize>) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let options = scoring_options(model.config().scoring(), &args.scoring)?;
    let scored = score_file(&model, &args.test, &args.label, &options)?;
    let m = scored.test.n_rows();
    let schema = model.schema();
    let det = &scored.detection;

    create_dir(&args.out)?;
    let mut outputs = vec![
        args.out.join("cell_scores.csv"),
        args.out.join("row_scores.csv"),
        args.out.join("heatmap.json"),
    ];
    write_with(&outputs[0], |w| write_cell_scores(w, schema, &det.cell_scores))?;
    manifest::write(&outputs[1], &row_scores_csv(&det.row_scores)?)?;
    let heatmap = Heatmap::top_rows(schema, &det.cell_scores, &det.row_scores, args.heatmap_rows)?;
    manifest::write(&outputs[2], heatmap.to_json()?.as_bytes())?;
    if args.reconstruction {
        let dicts = model.dictionaries();
        let (x, u, p) = (
            args.out.join("x_hat.csv"),
            args.out.join("uncertainty.csv"),
            args.out.join("cat_probabilities.csv"),
        );
        write_with(&x, |w| write_x_hat(w, schema, dicts, &scored.recon))?;
        write_with(&u, |w| write_uncertainty(w, schema, &scored.recon.uncertainty))?;
        write_with(&p, |w| write_cat_probabilities(w, schema, dicts, &scored.recon))?;
        outputs.extend([x, u, p]);
    }

    let tps = per_sample(scored.seconds, m);
    println!("scored {m} rows in {:.6} s, TPS {tps:.3e} s", scored.seconds);

    let config = DetectConfig {
        model: model.config(),
        scoring: &options,
    };
    let mut run = RunManifest::new("detect", &config, Some(model.config().seed), threads)?;
    run.input(&args.model)?;
    run.input(&args.test)?;
    run.outputs = outputs;
    run.timing("score_total", scored.seconds);
    run.timing("score_per_sample", tps);
    run.write(&args.out)
}

fn parse_contamination(raw: &str) -> Result<Option<f64>, CliError> {
    if raw == "auto" {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(c) if c > 0.0 && c < 1.0 => Ok(Some(c)),
        _ => Err(CliError::config(format!(
            "--contamination must be `auto` or a number in (0, 1), got {raw:?}"
        ))),
    }
}

#[derive(Serialize)]
struct SweepEntry {
    alpha: f64,
    model_digest: String,
}

pub fn eval(args: &EvalArgs, threads: Option<usize>) -> Result<(), CliError> {
    let config = build_config(&args.model)?;
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(CliError::config(format!(
            "--train-fraction must be in (0, 1), got {}",
            args.train_fraction
        )));
    }
    let fixed_contamination = parse_contamination(&args.contamination)?;
    for &a in &args.sweep_alpha {
        check_alpha(a)?;
    }
    let schema = resolve_schema(&args.data, &args.schema)?;
    if schema.label_column().is_none() {
        return Err(CliError::input(
            "eval needs a label column: pass --label or mark one in --schema",
        ));
    }
    let data = load(&args.data, &schema)?;
    let labels = data.labels.expect("schema has a label column");
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(rfod::Error::SingleClass.into());
    }

    let split = split_for_eval(&data.table, &labels, args.train_fraction, config.seed)?;
    let (model, fit_timings) = Model64::fit_timed(&split.train, &config)?;
    let model_dir = args.out.join("model");
    create_dir(&model_dir)?;
    model
        .save(&model_dir)
        .map_err(|e| CliError::from(e).context(&model_dir))?;
    let split_path = args.out.join("split.json");
    manifest::write(
        &split_path,
        serde_json::to_string(&split.manifest())
            .map_err(rfod::Error::from)?
            .as_bytes(),
    )?;

    let contamination = fixed_contamination
        .unwrap_or_else(|| split.test_labels.iter().filter(|&&l| l).count() as f64 / split.test_labels.len() as f64);
    let alphas = if args.sweep_alpha.is_empty() {
        vec![config.alpha]
    } else {
        args.sweep_alpha.clone()
    };

    let start = Instant::now();
    let aligned = model.align(&split.test)?;
    let recon = model.reconstruct_aligned(&aligned)?;
    let recon_secs = start.elapsed().as_secs_f64();
    let mut reports = Vec::with_capacity(alphas.len());
    let mut sweep = Vec::with_capacity(alphas.len());
    let mut first_scores = None;
    let mut first_score_secs = 0.0;
    for (k, &alpha) in alphas.iter().enumerate() {
        let t0 = Instant::now();
        let options = ScoringOptions {
            alpha,
            ..config.scoring()
        };
        let det = model.score(&aligned, &recon, &options)?;
        if k == 0 {
            first_score_secs = t0.elapsed().as_secs_f64();
        }
        reports.push(EvalReport::compute(
            &det.row_scores,
            &split.test_labels,
            contamination,
            alpha,
        )?);
        sweep.push(SweepEntry {
            alpha,
            model_digest: model_fingerprint(&model)?,
        });
        if first_scores.is_none() {
            first_scores = Some(det.row_scores);
        }
    }

    let report_json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(&reports)
    }
    .map_err(rfod::Error::from)?;
    let mut report_csv = String::from(EvalReport::CSV_HEADER);
    report_csv.push('\n');
    for r in &reports {
        report_csv.push_str(&r.csv_row());
        report_csv.push('\n');
    }
    let outputs = vec![
        args.out.join("report.json"),
        args.out.join("report.csv"),
        args.out.join("row_scores.csv"),
        split_path,
        model_dir.clone(),
    ];
    manifest::write(&outputs[0], report_json.as_bytes())?;
    manifest::write(&outputs[1], report_csv.as_bytes())?;
    manifest::write(&outputs[2], &row_scores_csv(first_scores.as_deref().unwrap_or(&[]))?)?;

    for r in &reports {
        println!(
            "alpha {}: AUC-ROC {:.4}  AUC-PR {:.4}  F1 {:.4}  accuracy {:.4}  log-loss {:.4}",
            r.alpha, r.auc_roc, r.auc_pr, r.f1, r.accuracy, r.log_loss
        );
    }

    let score_total = recon_secs + first_score_secs;
    let mut run = RunManifest::new("eval", &config, Some(config.seed), threads)?;
    run.input(&args.data)?;
    if let Some(s) = &args.schema.schema {
        run.input(s)?;
    }
    run.outputs = outputs;
    run.timing("fit_total", fit_timings.fit_total);
    run.timing("fit_per_feature", fit_timings.mean_per_feature());
    run.timing("prune", fit_timings.prune);
    run.timing("score_total", score_total);
    run.timing("score_per_sample", per_sample(score_total, split.test.n_rows()));
    run.extra.insert("contamination".into(), contamination.into());
    run.extra
        .insert("model_dir_digest".into(), manifest::digest_dir(&model_dir)?.into());
    run.extra
        .insert("sweep".into(), serde_json::to_value(&sweep).map_err(rfod::Error::from)?);
    run.write(&args.out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

pub fn bench(args: &BenchArgs, threads: Option<usize>) -> Result<(), CliError> {
    let config = build_config(&args.model)?;
    if args.repeats == 0 {
        return Err(CliError::config("--repeats must be at least 1"));
    }
    if let Some(&f) = args.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(CliError::config(format!(
            "--fractions: each fraction must be in (0, 1], got {f}"
        )));
    }
    let schema = resolve_schema(&args.data, &args.schema)?;
    let data = load(&args.data, &schema)?;
    let pool = match &data.labels {
        Some(l) => {
            let normal: Vec<usize> = (0..l.len()).filter(|&i| !l[i]).collect();
            data.table.select_rows(&normal)
        }
        None => data.table.clone(),
    };
    let mut csv = String::from("fraction,n_train,fit_total,fit_per_feature,score_total,score_per_sample\n");
    for &fraction in &args.fractions {
        let train = if fraction < 1.0 {
            split_for_eval(&pool, &vec![false; pool.n_rows()], fraction, config.seed)?.train
        } else {
            pool.clone()
        };
        let (mut fit, mut tpf, mut score) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..args.repeats {
            let (model, t) = Model64::fit_timed(&train, &config)?;
            fit.push(t.fit_total);
            tpf.push(t.mean_per_feature());
            let start = Instant::now();
            model.detect(&pool)?;
            score.push(start.elapsed().as_secs_f64());
        }
        let (fit, tpf, score) = (median(fit), median(tpf), median(score));
        let tps = per_sample(score, pool.n_rows());
        println!(
            "fraction {fraction}: n_train {}, fit {fit:.6} s, TPF {tpf:.6} s, TPS {tps:.3e} s",
            train.n_rows()
        );
        csv.push_str(&format!("{fraction},{},{fit},{tpf},{score},{tps}\n", train.n_rows()));
    }
    create_dir(&args.out)?;
    let path = args.out.join("bench.csv");
    manifest::write(&path, csv.as_bytes())?;
    let mut run = RunManifest::new("bench", &config, Some(config.seed), threads)?;
    run.input(&args.data)?;
    run.outputs.push(path);
    run.extra.insert("repeats".into(), args.repeats.into());
    run.write(&args.out)
}

pub fn export_heatmap(args: &HeatmapArgs, threads: Option<usize>) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let options = scoring_options(model.config().scoring(), &args.scoring)?;
    let scored = score_file(&model, &args.test, &args.label, &options)?;
    let det = &scored.detection;
    let heatmap = if args.rows.is_empty() {
        Heatmap::top_rows(model.schema(), &det.cell_scores, &det.row_scores, args.top)?
    } else {
        Heatmap::new(model.schema(), &det.cell_scores, Some(&args.rows))?
    };
    create_dir(&args.out)?;
    let path = args.out.join("heatmap.json");
    manifest::write(&path, heatmap.to_json()?.as_bytes())?;
    println!(
        "wrote {} rows x {} features to {}",
        heatmap.rows.len(),
        heatmap.features.len(),
        path.display()
    );
    let config = DetectConfig {
        model: model.config(),
        scoring: &options,
    };
    let mut run = RunManifest::new("export-heatmap", &config, Some(model.config().seed), threads)?;
    run.input(&args.model)?;
    run.input(&args.test)?;
    run.outputs.push(path);
    run.timing("score_total", scored.seconds);
    run.write(&args.out)
}
