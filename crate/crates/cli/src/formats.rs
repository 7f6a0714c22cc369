//! Readers and writers for the on-disk formats.
//!
//! Every reader reports the 1-based line of the first bad record. Blank lines
//! are skipped everywhere; `#` starts a comment only in config files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use distill_core::alignment::{InMemoryPosteriors, UnitMap};
use distill_core::prob::{LogitVector, ProbVector, SIMPLEX_TOL};
use distill_core::temperature::{LabeledLogits, ScoredHypothesis};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Posterior rows written with limited precision are renormalized if their
/// sum is this close to 1; rows already on the simplex are kept verbatim.
const POSTERIOR_SUM_TOL: f64 = 1e-6;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let fail =
        |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

#[derive(Deserialize)]
struct PredictionLine {
    logits: Vec<f64>,
    label: usize,
}

/// `{"logits": [...], "label": n}` per line; every record must share K.
pub fn parse_predictions(path: &Path) -> CliResult<Vec<LabeledLogits>> {
    let text = read_text(path)?;
    let mut out: Vec<LabeledLogits> = Vec::new();
    for (n, line) in lines(&text) {
        let rec: PredictionLine =
            serde_json::from_str(line).map_err(|e| CliError::parse(path, n, e.to_string()))?;
        if let Some((first, _)) = out.first() {
            if first.len() != rec.logits.len() {
                return Err(CliError::parse(
                    path,
                    n,
                    format!(
                        "{} logits, earlier records have {}",
                        rec.logits.len(),
                        first.len()
                    ),
                ));
            }
        }
        let k = rec.logits.len();
        let logits =
            LogitVector::new(rec.logits).map_err(|e| CliError::parse(path, n, e.to_string()))?;
        if rec.label >= k {
            return Err(CliError::parse(
                path,
                n,
                format!("label {} outside 0..{k}", rec.label),
            ));
        }
        out.push((logits, rec.label));
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{}: no records", path.display())));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct HypothesisLine {
    utt: String,
    id: String,
    am_logp: f64,
    lm_logp: f64,
}

/// Hypotheses grouped by utterance, utterances in order of first appearance.
pub fn parse_hypotheses(path: &Path) -> CliResult<Vec<(String, Vec<ScoredHypothesis>)>> {
    let text = read_text(path)?;
    let mut groups: Vec<(String, Vec<ScoredHypothesis>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, line) in lines(&text) {
        let h: HypothesisLine =
            serde_json::from_str(line).map_err(|e| CliError::parse(path, n, e.to_string()))?;
        if !h.am_logp.is_finite() || !h.lm_logp.is_finite() {
            return Err(CliError::parse(path, n, "scores must be finite"));
        }
        let slot = *index.entry(h.utt.clone()).or_insert_with(|| {
            groups.push((h.utt.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(ScoredHypothesis {
            id: h.id,
            am_logp: h.am_logp,
            lm_logp: h.lm_logp,
        });
    }
    if groups.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no hypotheses",
            path.display()
        )));
    }
    Ok(groups)
}

/// `utt<TAB>tok tok ...` per line.
pub fn parse_alignments(path: &Path) -> CliResult<Vec<(String, Vec<String>)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in lines(&text) {
        let (utt, toks) = line
            .split_once('\t')
            .ok_or_else(|| CliError::parse(path, n, "expected `utt<TAB>tokens`"))?;
        let toks: Vec<String> = toks.split_whitespace().map(String::from).collect();
        if utt.is_empty() || toks.is_empty() {
            return Err(CliError::parse(path, n, "empty utterance id or token list"));
        }
        if out.iter().any(|(u, _): &(String, Vec<String>)| u == utt) {
            return Err(CliError::parse(
                path,
                n,
                format!("utterance `{utt}` repeated"),
            ));
        }
        out.push((utt.to_string(), toks));
    }
    Ok(out)
}

/// `source<TAB>target` per line.
pub fn parse_unit_map(path: &Path, source: &str, target: &str) -> CliResult<UnitMap> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (n, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(CliError::parse(path, n, "expected `source<TAB>target`"));
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    UnitMap::from_pairs(source, target, pairs)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `utt<TAB>index<TAB>p0 p1 ...`; indices per utterance must run 0, 1, 2, ...
pub fn parse_posteriors(path: &Path) -> CliResult<InMemoryPosteriors> {
    let text = read_text(path)?;
    let mut by_utterance: BTreeMap<String, Vec<ProbVector>> = BTreeMap::new();
    let mut k = None;
    for (n, line) in lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CliError::parse(
                path,
                n,
                "expected `utt<TAB>index<TAB>probabilities`",
            ));
        }
        let idx: usize = fields[1]
            .parse()
            .map_err(|_| CliError::parse(path, n, format!("bad index `{}`", fields[1])))?;
        let mut p = fields[2]
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::parse(path, n, format!("bad probability: {e}")))?;
        if *k.get_or_insert(p.len()) != p.len() {
            return Err(CliError::parse(
                path,
                n,
                format!("{} probabilities, expected {}", p.len(), k.unwrap()),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOL {
            return Err(CliError::parse(
                path,
                n,
                format!("probabilities sum to {sum}"),
            ));
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            p.iter_mut().for_each(|v| *v /= sum);
        }
        let p = ProbVector::new(p).map_err(|e| CliError::parse(path, n, e.to_string()))?;
        let seq = by_utterance.entry(fields[0].to_string()).or_default();
        if idx != seq.len() {
            return Err(CliError::parse(
                path,
                n,
                format!("index {idx}, expected {}", seq.len()),
            ));
        }
        seq.push(p);
    }
    Ok(InMemoryPosteriors { by_utterance })
}

/// `key=value` lines with `#` comments; keys may not repeat.
pub fn parse_config(path: &Path) -> CliResult<Vec<(usize, String, String)>> {
    let text = read_text(path)?;
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let n = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::parse(path, n, "expected `key=value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if out.iter().any(|(_, seen, _)| seen == k) {
            return Err(CliError::parse(path, n, format!("key `{k}` repeated")));
        }
        out.push((n, k.to_string(), v.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn line_of(e: CliError) -> usize {
        match e {
            CliError::Parse { line, .. } => line,
            other => panic!("not a parse error: {other}"),
        }
    }

    #[test]
    fn prediction_errors_carry_line_numbers() {
        let f =
            file("{\"logits\": [0, 1], \"label\": 0}\n\n{\"logits\": [0, 1, 2], \"label\": 0}\n");
        assert_eq!(line_of(parse_predictions(f.path()).unwrap_err()), 3);
        let f = file("{\"logits\": [0, 1], \"label\": 2}\n");
        assert_eq!(line_of(parse_predictions(f.path()).unwrap_err()), 1);
        let f = file("{\"logits\": [0, 1], \"label\": 1}\nnot json\n");
        assert_eq!(line_of(parse_predictions(f.path()).unwrap_err()), 2);
    }

    #[test]
    fn hypotheses_group_in_first_seen_order() {
        let f = file(concat!(
            "{\"utt\": \"b\", \"id\": \"x\", \"am_logp\": -1, \"lm_logp\": -2}\n",
            "{\"utt\": \"a\", \"id\": \"y\", \"am_logp\": -1, \"lm_logp\": -2}\n",
            "{\"utt\": \"b\", \"id\": \"z\", \"am_logp\": -3, \"lm_logp\": -1}\n",
        ));
        let g = parse_hypotheses(f.path()).unwrap();
        assert_eq!(g[0].0, "b");
        assert_eq!(g[0].1.len(), 2);
        assert_eq!(g[1].0, "a");
    }

    #[test]
    fn posterior_indices_must_be_contiguous() {
        let f = file("u\t0\t0.5 0.5\nu\t2\t0.5 0.5\n");
        assert_eq!(line_of(parse_posteriors(f.path()).unwrap_err()), 2);
        let f = file("u\t0\t0.333333 0.666667\n");
        let p = parse_posteriors(f.path()).unwrap();
        assert!((p.by_utterance["u"][0].as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_repeats_and_garbage() {
        let f = file("# comment\nepochs = 3\nepochs=4\n");
        assert_eq!(line_of(parse_config(f.path()).unwrap_err()), 3);
        let f = file("epochs\n");
        assert_eq!(line_of(parse_config(f.path()).unwrap_err()), 1);
        let f = file("a=1 # trailing\n\nb = x\n");
        let c = parse_config(f.path()).unwrap();
        assert_eq!(
            c,
            vec![(1, "a".into(), "1".into()), (3, "b".into(), "x".into())]
        );
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "one\n").unwrap();
        write_atomic(&p, "two\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
