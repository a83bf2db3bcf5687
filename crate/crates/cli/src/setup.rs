//! Builds datasets and models from a configuration.

use samlab::data::{
    gen_digit_images, gen_gaussian_task, load_char_corpus, load_mnist, shift_images, Dataset, GaussianTask,
    ImageShift, Split,
};
use samlab::model::{Activation, MlpModel, Model, RnnLmModel};
use samlab::shift::{mix_datasets, MixSpec};
use samlab::{Error, Result, Scalar};

use crate::config::ExperimentConfig;

/// Training distribution `D`, shifted distribution `D*`, and the set
/// actually trained on (`D`, or a mixture when `data.mix_fraction > 0`).
#[derive(Clone, Debug)]
pub struct Datasets {
    pub train: Dataset,
    pub shifted: Dataset,
    pub fit: Dataset,
    /// Corpus vocabulary size, when the source is text.
    pub vocab: Option<usize>,
}

impl Datasets {
    pub fn split(&self, name: &str) -> &Dataset {
        if name == "train" {
            &self.train
        } else {
            &self.shifted
        }
    }
}

fn image_shift(cfg: &ExperimentConfig) -> ImageShift {
    let d = &cfg.data;
    ImageShift {
        brightness: d.brightness,
        strength: d.pattern_strength,
        label_strength: d.label_strength,
        noise: d.pixel_noise,
        seed: d.seed.wrapping_add(7),
    }
}

pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Datasets> {
    let d = &cfg.data;
    let mut vocab = None;
    let (train, shifted) = match d.source.as_str() {
        "digits" => {
            let train = gen_digit_images(d.train_size, Split::Train, d.seed)?;
            let fresh = gen_digit_images(d.test_size, Split::Test, d.seed.wrapping_add(1))?;
            (train, shift_images(&fresh, &image_shift(cfg), Split::Test)?)
        }
        "mnist" => {
            let dir = d.path.as_deref().ok_or_else(|| Error::arg("data.path is required for mnist"))?;
            let (train, test) = load_mnist(dir)?;
            let train = train.subset(&(0..d.train_size.min(train.len())).collect::<Vec<_>>());
            let test = test.subset(&(0..d.test_size.min(test.len())).collect::<Vec<_>>());
            (train, shift_images(&test, &image_shift(cfg), Split::Test)?)
        }
        "gaussian" => {
            let shift = if d.shift.is_empty() { vec![0.0; d.dim] } else { d.shift.clone() };
            let mut task = GaussianTask::new(d.classes, d.dim, d.per_class, shift, d.seed);
            task.separation = d.separation;
            gen_gaussian_task(&task)?
        }
        _ => {
            let path = d.path.as_deref().ok_or_else(|| Error::arg("data.path is required for corpus"))?;
            let corpus = load_char_corpus(path, d.window)?;
            vocab = Some(corpus.vocab.len());
            corpus.split(d.test_fraction)?
        }
    };
    let fit = if d.mix_fraction > 0.0 {
        mix_datasets(&MixSpec { fraction: d.mix_fraction, train: &train, shifted: &shifted }, d.seed)?
    } else {
        train.clone()
    };
    Ok(Datasets { train, shifted, fit, vocab })
}

pub fn build_model<S: Scalar>(cfg: &ExperimentConfig, data: &Datasets) -> Result<Box<dyn Model<S>>> {
    let m = &cfg.model;
    match m.kind.as_str() {
        "mlp" => {
            let act = Activation::parse(&m.activation).ok_or_else(|| Error::arg("unknown activation"))?;
            let dim = data.train.feature_dim().ok_or_else(|| Error::arg("mlp needs a classification source"))?;
            let classes = data.train.classes().unwrap_or(0);
            let sizes = &m.sizes;
            if sizes[0] != dim || *sizes.last().unwrap() < classes {
                return Err(Error::arg(format!(
                    "model.sizes {sizes:?} does not fit data with {dim} features and {classes} classes"
                )));
            }
            Ok(Box::new(MlpModel::new(sizes, act)?))
        }
        _ => {
            let vocab = data.vocab.ok_or_else(|| Error::arg("rnn needs the corpus source"))?;
            Ok(Box::new(RnnLmModel::new(vocab, m.embed, m.hidden, m.tied)?))
        }
    }
}
