use std::collections::BTreeMap;
use std::fmt;

use super::{evaluate, Evaluation, MetricsReport, Query, RetrievalError, RetrievalIndex};
use crate::dsp::{LogMelConfig, Spectrogram};
use crate::encoder::{AudioEncoder, PatchGeometry};
use crate::space::{train, ModelState, Phase, TrainConfig, TrainingSet};
use crate::Scalar;

/// mAP@10 (in percent) of the full-data row of the published ablation.
/// It needs pre-trained encoders and the full datasets, so it is reported
/// for reference only.
pub const REFERENCE_FULL_DATA_MAP: f64 = 35.22;

/// Frozen-encoder outputs for a held-out split: one audio vector per clip
/// and any number of caption queries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet<T> {
    pub audio_ids: Vec<String>,
    pub audio: Vec<Vec<T>>,
    pub queries: Vec<Query<T>>,
}

/// Projects both sides through the heads and evaluates.
pub fn evaluate_model<T: Scalar>(state: &ModelState<T>, set: &EvalSet<T>) -> Result<Evaluation, RetrievalError> {
    let index = RetrievalIndex::build(set.audio_ids.clone(), state.audio.project_batch(&set.audio)?)?;
    let queries = set
        .queries
        .iter()
        .map(|q| {
            Ok(Query { id: q.id.clone(), target: q.target.clone(), vector: state.text.project(&q.vector)? })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    evaluate(&queries, &index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub datasets: String,
    pub map_at_10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("datasets,map_at_10\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.datasets, r.map_at_10));
        }
        out
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.datasets.len()).max().unwrap_or(0).max(8);
        writeln!(f, "{:<width$}  {:>8}", "datasets", "mAP@10")?;
        for r in &self.rows {
            writeln!(f, "{:<width$}  {:>8.2}", r.datasets, 100.0 * r.map_at_10)?;
        }
        write!(
            f,
            "reference: the full-data configuration with pre-trained encoders reports {REFERENCE_FULL_DATA_MAP:.2} \
             mAP@10; that figure is not reproducible with the toy encoders and synthetic data used here\n"
        )
    }
}

/// Trains one model per requested dataset combination and evaluates each on
/// the same held-out set. Every row starts from the same initialization.
pub fn ablation_run<T: Scalar>(
    combos: &[Vec<String>],
    sources: &BTreeMap<String, TrainingSet<T>>,
    heldout: &EvalSet<T>,
    cfg: &TrainConfig,
) -> Result<AblationTable, RetrievalError> {
    let mut rows = Vec::with_capacity(combos.len());
    for combo in combos {
        if combo.is_empty() {
            return Err(RetrievalError::InvalidInput("empty dataset combination".into()));
        }
        let sets = combo
            .iter()
            .map(|name| {
                sources.get(name).ok_or_else(|| RetrievalError::InvalidInput(format!("unknown dataset `{name}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let data = TrainingSet::concat(&sets)?;
        let mut state = ModelState::init(data.audio_dim(), data.text_dim(), cfg);
        train(&mut state, &data, cfg, Phase::Pretrain)?;
        let eval = evaluate_model(&state, heldout)?;
        rows.push(AblationRow { datasets: combo.join("+"), map_at_10: eval.report.map_at_10 });
    }
    Ok(AblationTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seconds: f64,
    pub report: MetricsReport,
    /// Segment embeddings computed across all clips.
    pub segments: usize,
}

/// Evaluates a trained model with clips split into fixed-length segments
/// whose embeddings are averaged. `queries` hold raw text-encoder outputs.
pub fn segment_length_sweep<T: Scalar>(
    lengths: &[f64],
    clips: &[(String, Spectrogram<T>)],
    queries: &[Query<T>],
    encoder: &AudioEncoder<T>,
    geometry: &PatchGeometry,
    mel: &LogMelConfig,
    state: &ModelState<T>,
) -> Result<Vec<SweepRow>, RetrievalError> {
    if lengths.is_empty() {
        return Err(RetrievalError::InvalidInput("no segment lengths".into()));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &seconds in lengths {
        if !(seconds > 0.0) {
            return Err(RetrievalError::InvalidInput(format!("segment length {seconds} is not positive")));
        }
        let seg_frames = mel.frames_for_seconds(seconds);
        let before = encoder.encode_calls();
        let audio = clips
            .iter()
            .map(|(_, s)| encoder.embed_spectrogram::<rand_chacha::ChaCha8Rng>(s, geometry, seg_frames, None))
            .collect::<Result<Vec<_>, _>>()?;
        let segments = encoder.encode_calls() - before;
        let set = EvalSet { audio_ids: clips.iter().map(|c| c.0.clone()).collect(), audio, queries: queries.to_vec() };
        rows.push(SweepRow { seconds, report: evaluate_model(state, &set)?.report, segments });
    }
    Ok(rows)
}
