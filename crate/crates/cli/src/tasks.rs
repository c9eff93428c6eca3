use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use parspike::config::{Task, TrainSection};
use parspike::io::{ingest_mnist, locate_mnist};
use parspike::traingrad::{impulse_task, Dataset, Model, TrainConfig};

fn load(files: &(PathBuf, PathBuf), permute: Option<u64>, limit: usize) -> anyhow::Result<Dataset> {
    ingest_mnist(&files.0, &files.1, permute, Some(limit))
        .with_context(|| format!("reading {}", files.0.display()))
}

/// Train and test sets for the configured task.
///
/// MNIST prefers the `train` split for training and `t10k` for testing; with
/// only one split present, the test samples follow the training samples.
pub fn datasets(
    section: &TrainSection,
    data_dir: &Path,
    seed: u64,
) -> anyhow::Result<(Dataset, Dataset)> {
    let (n_train, n_test) = (section.train_samples, section.test_samples);
    let permute = match section.task {
        Task::Impulse => {
            return Ok((
                impulse_task(n_train, section.steps, seed.wrapping_add(1))?,
                impulse_task(n_test, section.steps, seed.wrapping_add(2))?,
            ))
        }
        Task::Smnist => None,
        Task::Psmnist => Some(section.permute_seed),
    };
    match (
        locate_mnist(data_dir, "train"),
        locate_mnist(data_dir, "t10k"),
    ) {
        (Some(train), Some(test)) => Ok((
            load(&train, permute, n_train)?,
            load(&test, permute, n_test)?,
        )),
        (Some(only), None) | (None, Some(only)) => {
            let all = load(&only, permute, n_train + n_test)?;
            if all.len() < n_train + n_test {
                bail!("{} holds only {} samples", only.0.display(), all.len());
            }
            Ok((all.take(n_train), all.range(n_train, n_train + n_test)))
        }
        (None, None) => bail!(
            "no MNIST IDX files in {}; set PARSPIKE_DATA_DIR or --data-dir",
            data_dir.display()
        ),
    }
}

/// Model and optimizer settings derived from the base seed.
pub fn model(
    section: &TrainSection,
    data: &Dataset,
    seed: u64,
) -> anyhow::Result<(Model, TrainConfig)> {
    let cfg = section
        .hyper
        .model_config(section.architecture(), data.input_dim(), data.classes());
    let hyper = TrainConfig {
        seed: seed.wrapping_add(7),
        ..section.hyper.clone()
    };
    Ok((Model::new(cfg, seed.wrapping_add(11))?, hyper))
}
