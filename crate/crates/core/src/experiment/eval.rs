use crate::audio::MixtureRecord;
use crate::error::{invalid, Result};
use crate::metrics::{evaluate, EvalResult, EvalRow};
use crate::model::Separator;
use crate::numeric::Scalar;

/// Separated waveforms for `mixture`, one per source, truncated to the
/// analyzed length.
pub fn separate_signal<T: Scalar>(model: &Separator<T>, mixture: &[f64]) -> Result<Vec<Vec<f64>>> {
    let input: Vec<T> = mixture.iter().map(|&v| T::from_f64(v)).collect();
    let out = model.forward(&input)?;
    let sources = out.sources;
    Ok((0..sources.shape()[0])
        .map(|c| sources.row(c).iter().map(|v| v.as_f64()).collect())
        .collect())
}

/// Scores one mixture against its references over the analyzed span.
pub fn evaluate_signal<T: Scalar, R: AsRef<[f64]>>(
    model: &Separator<T>,
    mixture: &[f64],
    references: &[R],
) -> Result<EvalResult> {
    let estimates = separate_signal(model, mixture)?;
    let len = estimates[0].len();
    let refs: Vec<&[f64]> = references.iter().map(|r| &r.as_ref()[..len]).collect();
    evaluate(&mixture[..len], &estimates, &refs)
}

pub fn evaluate_record<T: Scalar>(model: &Separator<T>, record: &MixtureRecord) -> Result<EvalResult> {
    let refs: Vec<&[f64]> = record.sources.iter().map(|s| s.samples.as_slice()).collect();
    evaluate_signal(model, &record.mixture.samples, &refs)
}

#[derive(Debug, Clone)]
pub struct CorpusScore {
    pub rows: Vec<EvalRow>,
    pub results: Vec<EvalResult>,
    pub mean_si_snri: f64,
    pub mean_sdri: f64,
}

pub fn evaluate_corpus<T: Scalar>(model: &Separator<T>, corpus: &[MixtureRecord]) -> Result<CorpusScore> {
    if corpus.is_empty() {
        return Err(invalid("evaluate_corpus", "empty corpus"));
    }
    let scheme = model.config().sharing.to_string();
    let mut rows = Vec::with_capacity(corpus.len());
    let mut results = Vec::with_capacity(corpus.len());
    for record in corpus {
        let r = evaluate_record(model, record)?;
        rows.push(EvalRow::new(record.id.clone(), scheme.clone(), &r));
        results.push(r);
    }
    let n = results.len() as f64;
    Ok(CorpusScore {
        mean_si_snri: results.iter().map(|r| r.si_snri).sum::<f64>() / n,
        mean_sdri: results.iter().map(|r| r.sdri).sum::<f64>() / n,
        rows,
        results,
    })
}
