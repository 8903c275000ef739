use std::path::Path;

use super::{evaluate, train, Dataset, ModelRecognizer, TrainConfig, TrainError};
use crate::nnkernel::Scalar;
use crate::objective::LossToggles;
use crate::tfnet::ModelConfig;

/// One configuration of the branch and loss switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationRow {
    pub table: &'static str,
    pub label: &'static str,
    pub temporal: bool,
    pub frequency: bool,
    pub vae_t: bool,
    pub vae_f: bool,
}

const fn row(table: &'static str, label: &'static str, flags: [bool; 4]) -> AblationRow {
    AblationRow {
        table,
        label,
        temporal: flags[0],
        frequency: flags[1],
        vae_t: flags[2],
        vae_f: flags[3],
    }
}

/// Loss combinations with both branches, then branch combinations with
/// every applicable loss.
pub const ABLATION_ROWS: [AblationRow; 7] = [
    row("loss", "ctc", [true, true, false, false]),
    row("loss", "ctc+vae_t", [true, true, true, false]),
    row("loss", "ctc+vae_f", [true, true, false, true]),
    row("loss", "ctc+vae_t+vae_f", [true, true, true, true]),
    row("branch", "temporal", [true, false, true, false]),
    row("branch", "frequency", [false, true, false, true]),
    row("branch", "temporal+frequency", [true, true, true, true]),
];

impl AblationRow {
    pub fn apply(&self, model: &ModelConfig, train: &TrainConfig) -> (ModelConfig, TrainConfig) {
        let mut m = model.clone();
        m.temporal_branch = self.temporal;
        m.frequency_branch = self.frequency;
        let mut t = train.clone();
        t.losses = LossToggles {
            vae_t: self.vae_t,
            vae_f: self.vae_f,
        };
        (m, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub row: AblationRow,
    pub dev_wer: Option<f64>,
    pub test_wer: Option<f64>,
    pub final_l_sum: f64,
}

impl AblationResult {
    pub fn to_line(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        let wer = |w: Option<f64>| w.map_or("-".to_string(), |w| format!("{w:.2}"));
        format!(
            "ablation\ttable={}\tconfig={}\ttemporal={}\tfrequency={}\tvae_t={}\tvae_f={}\tl_sum={:.4}\tdev_wer={}\ttest_wer={}",
            self.row.table,
            self.row.label,
            on(self.row.temporal),
            on(self.row.frequency),
            on(self.row.vae_t),
            on(self.row.vae_f),
            self.final_l_sum,
            wer(self.dev_wer),
            wer(self.test_wer)
        )
    }
}

/// Trains one model per row and scores it on dev and test. Each row's run
/// is written to its own subdirectory of `outdir` when given.
pub fn run_ablation<S: Scalar>(
    data: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    rows: &[AblationRow],
    outdir: Option<&Path>,
    on_result: &mut dyn FnMut(&AblationResult),
) -> Result<Vec<AblationResult>, TrainError> {
    let mut results = Vec::with_capacity(rows.len());
    for row in rows {
        let (m, t) = row.apply(model_cfg, train_cfg);
        let dir = outdir.map(|d| d.join(format!("{}-{}", row.table, row.label.replace('+', "_"))));
        let outcome = train::<S>(data, &m, &t, dir.as_deref(), &mut |_| {})?;
        let mut rec = ModelRecognizer {
            model: &outcome.model,
            vocab: &data.vocab,
            beam_width: t.beam_width,
        };
        let score = |split: &[super::Sample], rec: &mut ModelRecognizer<'_, S>| -> Result<Option<f64>, TrainError> {
            if split.is_empty() {
                Ok(None)
            } else {
                Ok(Some(evaluate(split, rec)?.wer_percent()))
            }
        };
        let result = AblationResult {
            row: *row,
            dev_wer: score(&data.dev, &mut rec)?,
            test_wer: score(&data.test, &mut rec)?,
            final_l_sum: outcome.metrics.last().map_or(f64::NAN, |r| r.l_sum),
        };
        on_result(&result);
        results.push(result);
    }
    Ok(results)
}
