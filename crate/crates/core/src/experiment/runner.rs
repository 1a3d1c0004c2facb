use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint;
use super::config::RunConfig;
use super::grid::{collect_errors, error_grid_png, errors_csv, ErrorTile};
use super::metrics::{fmt_sig, EpochRow, StepRow, TimingRow, TrainRecord};
use super::model::Model;
use super::plot::loss_svg;
use crate::data::{Dataset, Split, Standardizer};
use crate::error::{Error, Result};
use crate::hrm::count_correct;

/// Training and test splits standardized with training statistics.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub standardizer: Standardizer,
}

impl PreparedData {
    /// Applies the limits, fits on `train` and standardizes both splits.
    pub fn new(train: Dataset, test: Dataset, config: &RunConfig) -> Result<Self> {
        let mut train = match config.train_limit {
            Some(n) => train.take(n),
            None => train,
        };
        let mut test = match config.test_limit {
            Some(n) => test.take(n),
            None => test,
        };
        if train.is_empty() || test.is_empty() {
            return Err(Error::Data("training and test splits must be non-empty".into()));
        }
        let standardizer = Standardizer::fit(&train);
        standardizer.apply(&mut train)?;
        standardizer.apply(&mut test)?;
        Ok(Self {
            train,
            test,
            standardizer,
        })
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        let train = config.dataset.load(&config.data_dir, Split::Train)?;
        let test = config.dataset.load(&config.data_dir, Split::Test)?;
        Self::new(train, test, config)
    }
}

/// Predictions over a whole split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Evaluates in order, batch `i` using evaluation stream `i`.
pub fn evaluate(model: &Model, data: &Dataset, batch_size: usize) -> Result<EvalResult> {
    let mut predictions = Vec::with_capacity(data.len());
    let mut correct = 0;
    for (i, batch) in data.batches(batch_size, 0, 0, false).enumerate() {
        let logits = model.logits(&batch.images, i as u64)?;
        correct += count_correct(&logits, &batch.labels);
        predictions.extend(logits.argmax_last());
    }
    Ok(EvalResult {
        accuracy: correct as f64 / data.len() as f64,
        predictions,
    })
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub num_params: usize,
    pub record: TrainRecord,
    pub final_test_acc: f64,
    pub errors: usize,
    pub model: Model,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_history(dir: &Path, config: &RunConfig, record: &TrainRecord) -> Result<()> {
    record.write(dir)?;
    let losses: Vec<f64> = record.steps.iter().map(|s| s.loss).collect();
    let title = format!("{} on {}: training loss", config.model, config.dataset);
    write(&dir.join("loss.svg"), loss_svg(&losses, config.smooth_window, &title)?.as_bytes())
}

/// Writes `errors.png` and `errors.csv` for the first mispredicted test images.
pub fn write_error_grid(
    dir: &Path,
    test: &Dataset,
    standardizer: &Standardizer,
    predictions: &[usize],
    max_tiles: usize,
) -> Result<usize> {
    let shape = test.image_shape();
    let c = shape.2;
    let tiles: Vec<ErrorTile> = collect_errors(predictions, &test.labels, max_tiles)
        .into_iter()
        .map(|(index, truth, predicted)| ErrorTile {
            index,
            truth,
            predicted,
            pixels: test
                .image(index)
                .iter()
                .enumerate()
                .map(|(k, v)| (*v as f64 * standardizer.std[k % c] + standardizer.mean[k % c]) as f32)
                .collect(),
        })
        .collect();
    write(&dir.join("errors.png"), &error_grid_png(&tiles, shape, 8)?)?;
    write(&dir.join("errors.csv"), errors_csv(&tiles).as_bytes())?;
    Ok(tiles.len())
}

fn log(config: &RunConfig, msg: String) {
    if config.log_every > 0 {
        eprintln!("{msg}");
    }
}

/// Trains from scratch, writing every artifact into `config.out_dir`.
///
/// A non-finite loss or gradient stops the run with an error; the history up
/// to that point is written and the previous epoch's checkpoint is kept.
pub fn train(config: &RunConfig, data: &PreparedData) -> Result<RunSummary> {
    config.validate()?;
    let dir = config.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("config.txt"), config.to_text().as_bytes())?;

    let mut model = Model::build(config)?;
    let nb = data.train.num_batches(config.batch_size);
    let mut opt = model.optimizer(config, nb)?;
    let mut record = TrainRecord::default();
    log(
        config,
        format!(
            "{} on {}: {} parameters, {} train / {} test, {nb} batches per epoch",
            config.model,
            config.dataset,
            model.num_params(),
            data.train.len(),
            data.test.len()
        ),
    );

    let mut last = None;
    if config.epochs == 0 {
        let eval = evaluate(&model, &data.test, config.batch_size)?;
        record.epochs.push(EpochRow {
            epoch: 0,
            train_loss: f64::NAN,
            train_acc: f64::NAN,
            test_acc: Some(eval.accuracy),
        });
        last = Some(eval);
        checkpoint::save(&dir, config, 0, &model)?;
    }
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let (mut loss_sum, mut loss_n, mut correct) = (0.0, 0usize, 0usize);
        for (b, batch) in data.train.batches(config.batch_size, config.seed, epoch, true).enumerate() {
            let outcome = match model.train_batch(&batch.images, &batch.labels, &mut opt, config.label_smoothing) {
                Ok(o) => o,
                Err(e) => {
                    write_history(&dir, config, &record)?;
                    return Err(Error::Numeric(format!("epoch {epoch} batch {b}: {e}")));
                }
            };
            for &(segment, loss, lr) in &outcome.steps {
                record.steps.push(StepRow {
                    step: record.steps.len(),
                    segment,
                    loss,
                    lr,
                });
                loss_sum += loss;
                loss_n += 1;
            }
            correct += outcome.correct;
            if config.log_every > 0 && (b + 1) % config.log_every == 0 {
                let (_, loss, lr) = outcome.steps[outcome.steps.len() - 1];
                log(
                    config,
                    format!(
                        "epoch {epoch} batch {}/{nb} loss {} lr {} {:.0}s",
                        b + 1,
                        fmt_sig(loss),
                        fmt_sig(lr),
                        started.elapsed().as_secs_f64()
                    ),
                );
            }
        }
        let train_seconds = started.elapsed().as_secs_f64();
        let eval_started = Instant::now();
        let eval = evaluate(&model, &data.test, config.batch_size)?;
        let eval_seconds = eval_started.elapsed().as_secs_f64();
        let row = EpochRow {
            epoch,
            train_loss: loss_sum / loss_n.max(1) as f64,
            train_acc: correct as f64 / data.train.len() as f64,
            test_acc: Some(eval.accuracy),
        };
        log(
            config,
            format!(
                "epoch {epoch}: train loss {} train acc {} test acc {}",
                fmt_sig(row.train_loss),
                fmt_sig(row.train_acc),
                fmt_sig(eval.accuracy)
            ),
        );
        record.epochs.push(row);
        record.timing.push(TimingRow {
            epoch,
            train_seconds,
            eval_seconds,
            steps: loss_n,
        });
        write_history(&dir, config, &record)?;
        checkpoint::save(&dir, config, epoch, &model)?;
        last = Some(eval);
    }
    let last = last.expect("at least one evaluation");
    write_history(&dir, config, &record)?;
    let errors = write_error_grid(&dir, &data.test, &data.standardizer, &last.predictions, config.error_tiles)?;
    let summary = format!(
        "model={}\ndataset={}\nparams={}\nepochs={}\ntest_acc={}\n",
        config.model,
        config.dataset,
        model.num_params(),
        config.epochs,
        fmt_sig(last.accuracy)
    );
    write(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(RunSummary {
        out_dir: dir,
        num_params: model.num_params(),
        record,
        final_test_acc: last.accuracy,
        errors,
        model,
    })
}
