//! Frame-level alignment processing for distilling teachers that emit one
//! posterior per token rather than per frame.
//!
//! A forced alignment repeats each token over the frames it spans. Teachers
//! see the token sequence, so the alignment is first mapped into the
//! teacher's unit inventory, collapsed into runs (deduplication), and the
//! teacher's per-token posteriors are then stretched back over those runs
//! (rearrangement).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::prob::ProbVector;

/// Frame-wise token sequence tagged with its unit inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub frames: Vec<String>,
    pub unit: String,
}

impl Alignment {
    pub fn new<I, S>(frames: I, unit: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            frames: frames.into_iter().map(Into::into).collect(),
            unit: unit.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Token-level map from a fine unit inventory to a coarser one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitMap {
    mapping: BTreeMap<String, String>,
    source: String,
    target: String,
}

impl UnitMap {
    /// Builds a map from `(fine, coarse)` pairs. A fine token listed twice
    /// with different images is rejected.
    pub fn from_pairs<I, A, B>(
        source: impl Into<String>,
        target: impl Into<String>,
        pairs: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut mapping = BTreeMap::new();
        for (fine, coarse) in pairs {
            let (fine, coarse) = (fine.into(), coarse.into());
            if let Some(prev) = mapping.get(&fine) {
                if *prev != coarse {
                    return Err(Error::InvalidInput(format!(
                        "token `{fine}` mapped to both `{prev}` and `{coarse}`"
                    )));
                }
            }
            mapping.insert(fine, coarse);
        }
        Ok(Self {
            mapping,
            source: source.into(),
            target: target.into(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.mapping.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

/// Deduplicated token sequence with run lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthAlignment {
    pub labels: Vec<String>,
    pub runs: Vec<usize>,
    pub unit: String,
}

impl RunLengthAlignment {
    pub fn frame_count(&self) -> usize {
        self.runs.iter().sum()
    }
}

/// Replaces every frame's token with its image under `m`.
pub fn map_units(a: &Alignment, m: &UnitMap) -> Result<Alignment> {
    if a.unit != m.source {
        return Err(Error::InvalidInput(format!(
            "alignment unit `{}` does not match map source `{}`",
            a.unit, m.source
        )));
    }
    let frames = a
        .frames
        .iter()
        .map(|tok| {
            m.get(tok)
                .map(String::from)
                .ok_or_else(|| Error::UnmappedToken(tok.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Alignment {
        frames,
        unit: m.target.clone(),
    })
}

/// Collapses maximal runs of equal consecutive tokens.
pub fn deduplicate(a: &Alignment) -> RunLengthAlignment {
    let mut labels: Vec<String> = Vec::new();
    let mut runs: Vec<usize> = Vec::new();
    for tok in &a.frames {
        match labels.last() {
            Some(last) if last == tok => *runs.last_mut().unwrap() += 1,
            _ => {
                labels.push(tok.clone());
                runs.push(1);
            }
        }
    }
    RunLengthAlignment {
        labels,
        runs,
        unit: a.unit.clone(),
    }
}

/// Repeats item `i` `rla.runs[i]` times, restoring frame rate.
pub fn rearrange<T: Clone>(items: &[T], rla: &RunLengthAlignment) -> Result<Vec<T>> {
    if items.len() != rla.labels.len() {
        return Err(Error::LengthMismatch {
            posteriors: items.len(),
            labels: rla.labels.len(),
        });
    }
    let mut out = Vec::with_capacity(rla.frame_count());
    for (item, &run) in items.iter().zip(&rla.runs) {
        out.extend(core::iter::repeat_n(item, run).cloned());
    }
    Ok(out)
}

/// Source of teacher posteriors, one per deduplicated token of an utterance.
pub trait PosteriorProvider {
    fn posteriors(&self, utterance: &str, tokens: &RunLengthAlignment) -> Result<Vec<ProbVector>>;
}

impl<F> PosteriorProvider for F
where
    F: Fn(&str, &RunLengthAlignment) -> Result<Vec<ProbVector>>,
{
    fn posteriors(&self, utterance: &str, tokens: &RunLengthAlignment) -> Result<Vec<ProbVector>> {
        self(utterance, tokens)
    }
}

/// Pre-computed posteriors keyed by utterance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InMemoryPosteriors {
    pub by_utterance: BTreeMap<String, Vec<ProbVector>>,
}

impl PosteriorProvider for InMemoryPosteriors {
    fn posteriors(&self, utterance: &str, _tokens: &RunLengthAlignment) -> Result<Vec<ProbVector>> {
        self.by_utterance.get(utterance).cloned().ok_or_else(|| {
            Error::InvalidInput(format!("no posteriors for utterance `{utterance}`"))
        })
    }
}

/// How a teacher's unit inventory relates to the alignment's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitMapping {
    Identity,
    Map(UnitMap),
}

pub struct Teacher<'a> {
    pub id: String,
    pub mapping: UnitMapping,
    pub provider: &'a dyn PosteriorProvider,
}

/// Supervision for one frame: the aligned token and each teacher's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub hard: String,
    pub soft: Vec<(String, ProbVector)>,
}

/// Expands every teacher's token-level posteriors to frame level:
/// map units, deduplicate, fetch posteriors, rearrange.
pub fn build_framewise_targets(
    utterance: &str,
    a: &Alignment,
    teachers: &[Teacher<'_>],
) -> Result<Vec<TargetSet>> {
    let mut streams: Vec<Vec<ProbVector>> = Vec::with_capacity(teachers.len());
    for t in teachers {
        let mapped = match &t.mapping {
            UnitMapping::Identity => a.clone(),
            UnitMapping::Map(m) => map_units(a, m)?,
        };
        let rla = deduplicate(&mapped);
        let posteriors = t.provider.posteriors(utterance, &rla)?;
        streams.push(rearrange(&posteriors, &rla)?);
    }
    let mut out: Vec<TargetSet> = a
        .frames
        .iter()
        .map(|tok| TargetSet {
            hard: tok.clone(),
            soft: Vec::with_capacity(teachers.len()),
        })
        .collect();
    for (t, stream) in teachers.iter().zip(streams) {
        for (frame, p) in out.iter_mut().zip(stream) {
            frame.soft.push((t.id.clone(), p));
        }
    }
    Ok(out)
}
