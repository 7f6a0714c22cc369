use std::fmt::Write as _;
use std::path::Path;

use distill_core::alignment::{build_framewise_targets, Alignment, Teacher, UnitMapping};
use distill_core::calibration::{
    ece as pooled_ece, ece_per_batch, reliability_csv, PredictionRecord,
};
use distill_core::experiment::{sweep_csv, sweep_lambda, SeedContext};
use distill_core::prob::softmax_t;
use distill_core::temperature::{combine_scores, fit_temperature, LabeledLogits};
use distill_core::{fixed6, Error};
use serde_json::json;

use crate::config::{method_by_name, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{
    parse_alignments, parse_hypotheses, parse_posteriors, parse_predictions, parse_unit_map,
    write_atomic,
};

enum Grouping {
    Pooled,
    Batch(usize),
}

fn parse_group(s: &str) -> CliResult<Grouping> {
    if s == "pooled" {
        return Ok(Grouping::Pooled);
    }
    match s.strip_prefix("batch:").map(str::parse::<usize>) {
        Some(Ok(n)) if n > 0 => Ok(Grouping::Batch(n)),
        _ => Err(CliError::Input(format!(
            "--group must be `pooled` or `batch:SIZE`, got `{s}`"
        ))),
    }
}

fn records(preds: &[LabeledLogits], t: f64) -> CliResult<Vec<PredictionRecord>> {
    preds
        .iter()
        .map(|(l, y)| Ok(PredictionRecord::new(softmax_t(l, t)?, *y)?))
        .collect()
}

pub fn ece(
    input: &Path,
    rank: usize,
    bins: usize,
    group: &str,
    out: Option<&Path>,
) -> CliResult<String> {
    let grouping = parse_group(group)?;
    let recs = records(&parse_predictions(input)?, 1.0)?;
    let report = match grouping {
        Grouping::Pooled => pooled_ece(&recs, rank, bins)?,
        Grouping::Batch(size) => ece_per_batch(&recs, rank, bins, size)?,
    };
    if let Some(out) = out {
        write_atomic(out, &reliability_csv(&report))?;
    }
    Ok(format!(
        "rank={rank} bins={bins} ece={} n={}\n",
        fixed6(report.ece),
        report.n_total
    ))
}

pub fn fit_temp(val: &Path, t_min: f64, t_max: f64, bins: usize) -> CliResult<String> {
    let preds = parse_predictions(val)?;
    let fit = fit_temperature(&preds, (t_min, t_max))?;
    let before = pooled_ece(&records(&preds, 1.0)?, 1, bins)?.ece;
    let after = pooled_ece(&records(&preds, fit.t_star)?, 1, bins)?.ece;
    Ok(format!(
        "t_star={}\nnll_before={} nll_after={}\nece_before={} ece_after={}\n",
        fixed6(fit.t_star),
        fixed6(fit.nll_at_unit),
        fixed6(fit.nll_at_t_star),
        fixed6(before),
        fixed6(after)
    ))
}

pub fn combine(hyps: &Path, t1: f64, t2: f64, out: Option<&Path>) -> CliResult<String> {
    let mut tsv = String::from("utt\trank\tid\tscore\n");
    for (utt, group) in parse_hypotheses(hyps)? {
        for (i, h) in combine_scores(&group, t1, t2)?.iter().enumerate() {
            let _ = writeln!(tsv, "{utt}\t{}\t{}\t{}", i + 1, h.id, fixed6(h.score));
        }
    }
    match out {
        Some(path) => {
            write_atomic(path, &tsv)?;
            Ok(String::new())
        }
        None => Ok(tsv),
    }
}

pub fn targets(
    align: &Path,
    unit: &str,
    ids: &[String],
    maps: &[String],
    posteriors: &[std::path::PathBuf],
    out: &Path,
) -> CliResult<String> {
    if ids.len() != maps.len() || ids.len() != posteriors.len() {
        return Err(CliError::Input(format!(
            "{} --teacher-id, {} --map and {} --posteriors given; counts must match",
            ids.len(),
            maps.len(),
            posteriors.len()
        )));
    }
    let alignments = parse_alignments(align)?;
    let mut mappings = Vec::with_capacity(ids.len());
    let mut providers = Vec::with_capacity(ids.len());
    for ((id, map), post) in ids.iter().zip(maps).zip(posteriors) {
        mappings.push(if map == "identity" {
            UnitMapping::Identity
        } else {
            UnitMapping::Map(parse_unit_map(Path::new(map), unit, id)?)
        });
        providers.push(parse_posteriors(post)?);
    }
    let teachers: Vec<Teacher<'_>> = ids
        .iter()
        .zip(mappings)
        .zip(&providers)
        .map(|((id, mapping), provider)| Teacher {
            id: id.clone(),
            mapping,
            provider,
        })
        .collect();

    let mut text = String::new();
    for (utt, frames) in &alignments {
        let a = Alignment::new(frames.iter().cloned(), unit);
        let sets = build_framewise_targets(utt, &a, &teachers).map_err(|e| match e {
            Error::LengthMismatch { posteriors, labels } => CliError::Input(format!(
                "utterance `{utt}`: {posteriors} posteriors for {labels} deduplicated tokens"
            )),
            other => CliError::Input(format!("utterance `{utt}`: {other}")),
        })?;
        for (frame, set) in sets.iter().enumerate() {
            let _ = write!(text, "{utt}\t{frame}\t{}", set.hard);
            for (id, p) in &set.soft {
                let probs: Vec<String> = p.as_slice().iter().map(f64::to_string).collect();
                let _ = write!(text, "\t{id}={}", probs.join(" "));
            }
            text.push('\n');
        }
    }
    write_atomic(out, &text)?;
    Ok(String::new())
}

pub fn train(config: Option<&Path>, out: &Path) -> CliResult<String> {
    let cfg = RunConfig::load(config)?;
    let method = cfg.method(cfg.lambda).map_err(CliError::Input)?;
    let ctx = SeedContext::new(&cfg.experiment, cfg.seed, method.needs_teacher())?;
    let (outcome, eval) = ctx.run(&cfg.experiment, method)?;
    let net = &outcome.network;
    let model = json!({
        "method": method.name(),
        "lambda": cfg.lambda,
        "seed": cfg.seed,
        "input_dim": net.input_dim(),
        "hidden": net.hidden(),
        "heads": net.heads.iter().map(|h| json!({"name": h.name, "classes": h.layer.outputs})).collect::<Vec<_>>(),
        "loss_curve": outcome.loss_curve,
        "params": net.params_flat(),
    });
    write_atomic(out, &format!("{model}\n"))?;
    Ok(format!(
        "method={} lambda={} seed={} acc={} ece1={} ece2={} ece3={}\n",
        method.name(),
        fixed6(cfg.lambda),
        cfg.seed,
        fixed6(eval.accuracy),
        fixed6(eval.reports[0].ece),
        fixed6(eval.reports[1].ece),
        fixed6(eval.reports[2].ece)
    ))
}

pub fn sweep(config: Option<&Path>, out: &Path) -> CliResult<String> {
    let cfg = RunConfig::load(config)?;
    let methods = cfg
        .methods
        .iter()
        .map(|m| method_by_name(&cfg.experiment, m, 0.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Input)?;
    let rows = sweep_lambda(&cfg.experiment, &cfg.lambdas, &methods, &cfg.seeds)?;
    write_atomic(out, &sweep_csv(&rows))?;
    Ok(format!("rows={}\n", rows.len()))
}
