//! Python extension module `_evifuse`: opinions and fusion, the special
//! functions, loss terms, dataset generation/corruption, and train/predict.
//!
//! Errors surface as `ValueError` with the library's message text.

use evifuse::config::TrainConfig;
use evifuse::data::{load_dataset, save_dataset, split, MultiViewDataset, ViewFormat};
use evifuse::loss::SoftLabel;
use evifuse::metrics::evaluate;
use evifuse::noisegen::corrupt_dataset;
use evifuse::opinion::{combine_many, combine_two, conflict, Evidence, Opinion};
use evifuse::synthetic::{generate, SyntheticSpec};
use evifuse::train::{predict, train, TrainState};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::PathBuf;

/// One corrupted label: (index, original class, corrupted class,
/// reference-model uncertainty).
type FlipRecord = (usize, usize, usize, f64);

fn err(e: evifuse::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    evifuse::special::digamma(x).map_err(err)
}

#[pyfunction]
fn ln_gamma(x: f64) -> PyResult<f64> {
    evifuse::special::ln_gamma(x).map_err(err)
}

#[pyfunction]
fn trigamma(x: f64) -> PyResult<f64> {
    evifuse::special::trigamma(x).map_err(err)
}

#[pyfunction]
fn js_divergence(p: Vec<f64>, q: Vec<f64>) -> f64 {
    evifuse::identify::js_divergence(&p, &q)
}

#[pyfunction]
fn softmax(values: Vec<f64>) -> Vec<f64> {
    evifuse::identify::softmax(&values)
}

#[pyfunction]
fn ace_loss(alpha: Vec<f64>, label: Vec<f64>) -> PyResult<f64> {
    let label = SoftLabel::new(label).map_err(err)?;
    Ok(evifuse::loss::ace_loss(&alpha, &label))
}

#[pyfunction]
fn kl_regularizer(alpha: Vec<f64>, hard_label: usize) -> f64 {
    evifuse::loss::kl_regularizer(&alpha, hard_label)
}

#[pyfunction]
fn annealing_factor(epoch: usize, horizon: usize) -> f64 {
    evifuse::loss::annealing_factor(epoch, horizon)
}

/// Subjective-logic opinion: per-class belief plus uncertainty mass.
#[pyclass(name = "Opinion", from_py_object)]
#[derive(Clone)]
struct PyOpinion {
    inner: Opinion,
}

#[pymethods]
impl PyOpinion {
    #[staticmethod]
    fn from_evidence(evidence: Vec<f64>) -> PyResult<PyOpinion> {
        Ok(PyOpinion {
            inner: Evidence::new(evidence).map_err(err)?.to_opinion(),
        })
    }

    #[staticmethod]
    fn vacuous(class_count: usize) -> PyOpinion {
        PyOpinion {
            inner: Opinion::vacuous(class_count),
        }
    }

    #[staticmethod]
    fn combine_all(opinions: Vec<PyOpinion>) -> PyResult<PyOpinion> {
        let inner: Vec<Opinion> = opinions.into_iter().map(|o| o.inner).collect();
        Ok(PyOpinion {
            inner: combine_many(&inner).map_err(err)?,
        })
    }

    fn combine(&self, other: &PyOpinion) -> PyResult<PyOpinion> {
        Ok(PyOpinion {
            inner: combine_two(&self.inner, &other.inner).map_err(err)?,
        })
    }

    fn conflict(&self, other: &PyOpinion) -> f64 {
        conflict(&self.inner, &other.inner)
    }

    #[getter]
    fn belief(&self) -> Vec<f64> {
        self.inner.belief().to_vec()
    }

    #[getter]
    fn uncertainty(&self) -> f64 {
        self.inner.uncertainty()
    }

    fn alpha(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.to_dirichlet().map_err(err)?.values().to_vec())
    }

    fn expected_probabilities(&self) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .to_dirichlet()
            .map_err(err)?
            .expected_probabilities())
    }

    fn __repr__(&self) -> String {
        format!(
            "Opinion(belief={:?}, uncertainty={})",
            self.inner.belief(),
            self.inner.uncertainty()
        )
    }
}

/// A labeled multi-view dataset held in memory.
#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: MultiViewDataset,
}

fn parse_format(format: &str) -> PyResult<ViewFormat> {
    match format {
        "f64le" => Ok(ViewFormat::F64le),
        "csv" => Ok(ViewFormat::Csv),
        other => Err(PyValueError::new_err(format!(
            "unknown format {other:?}; expected \"f64le\" or \"csv\""
        ))),
    }
}

#[pymethods]
impl PyDataset {
    /// Gaussian class clusters in a latent space observed through random
    /// per-view projections.
    #[staticmethod]
    #[pyo3(signature = (samples=2000, classes=5, view_dims=vec![10, 8, 12], latent_dim=5,
                        class_separation=1.9, view_noise=0.35, seed=7, name="synthetic"))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        samples: usize,
        classes: usize,
        view_dims: Vec<usize>,
        latent_dim: usize,
        class_separation: f64,
        view_noise: f64,
        seed: u64,
        name: &str,
    ) -> PyResult<PyDataset> {
        let spec = SyntheticSpec {
            name: name.to_string(),
            samples,
            classes,
            view_dims,
            latent_dim,
            class_separation,
            view_noise,
            seed,
        };
        Ok(PyDataset {
            inner: generate(&spec).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: load_dataset(&dir).map_err(err)?,
        })
    }

    #[pyo3(signature = (dir, format="f64le"))]
    fn save(&self, dir: PathBuf, format: &str) -> PyResult<()> {
        save_dataset(&self.inner, &dir, parse_format(format)?).map_err(err)
    }

    #[getter]
    fn instances(&self) -> usize {
        self.inner.instances()
    }

    #[getter]
    fn view_count(&self) -> usize {
        self.inner.view_count()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    /// Feature rows of one view.
    fn view(&self, v: usize) -> PyResult<Vec<Vec<f64>>> {
        if v >= self.inner.view_count() {
            return Err(PyValueError::new_err(format!(
                "view {v} out of range ({} views)",
                self.inner.view_count()
            )));
        }
        let m = self.inner.view(v);
        Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
    }

    fn hard_labels(&self) -> Vec<usize> {
        self.inner.hard_labels()
    }

    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
        let (train, test) = split(&self.inner, test_fraction, seed).map_err(err)?;
        Ok((PyDataset { inner: train }, PyDataset { inner: test }))
    }

    /// Corrupts floor(rate * N) labels with instance-dependent noise.
    /// Returns the noisy dataset and (index, original, corrupted,
    /// uncertainty) records sorted by index.
    fn corrupt(&self, rate: f64, seed: u64) -> PyResult<(PyDataset, Vec<FlipRecord>)> {
        let outcome = corrupt_dataset(&self.inner, rate, seed).map_err(err)?;
        let records = outcome
            .records
            .iter()
            .map(|r| (r.index, r.original, r.corrupted, r.uncertainty))
            .collect();
        Ok((
            PyDataset {
                inner: outcome.dataset,
            },
            records,
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(instances={}, views={}, classes={})",
            self.inner.instances(),
            self.inner.view_count(),
            self.inner.classes()
        )
    }
}

/// A trained multi-view model.
#[pyclass(name = "Model")]
struct PyModel {
    state: TrainState,
}

#[pymethods]
impl PyModel {
    /// Trains on `dataset`. `config_toml` uses the same keys as the CLI's
    /// --config file; defaults apply when omitted.
    #[staticmethod]
    #[pyo3(signature = (dataset, config_toml=None))]
    fn train(dataset: &PyDataset, config_toml: Option<&str>) -> PyResult<PyModel> {
        let config: TrainConfig = match config_toml {
            Some(text) => toml::from_str(text)
                .map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))?,
            None => TrainConfig::default(),
        };
        let output = train(&dataset.inner, &config, None).map_err(err)?;
        Ok(PyModel {
            state: output.state,
        })
    }

    /// Fused prediction for one instance: (class, probabilities,
    /// uncertainty).
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<(usize, Vec<f64>, f64)> {
        let refs: Vec<&[f64]> = features.iter().map(|f| f.as_slice()).collect();
        let p = predict(&self.state, &refs).map_err(err)?;
        Ok((p.class, p.probabilities, p.uncertainty))
    }

    /// Accuracy, uncertainty statistics, and the confusion matrix on a
    /// labeled dataset, as a JSON string.
    fn evaluate_json(&self, dataset: &PyDataset) -> PyResult<String> {
        let report = evaluate(&self.state, &dataset.inner).map_err(err)?;
        serde_json::to_string(&report)
            .map_err(|e| PyValueError::new_err(format!("cannot serialize report: {e}")))
    }

    #[pyo3(signature = (path, include_bank=true))]
    fn save(&self, path: PathBuf, include_bank: bool) -> PyResult<()> {
        self.state.save(&path, include_bank).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyModel> {
        Ok(PyModel {
            state: TrainState::load(&path).map_err(err)?,
        })
    }

    #[getter]
    fn classes(&self) -> usize {
        self.state.classes
    }

    #[getter]
    fn epochs_run(&self) -> usize {
        self.state.epochs_run
    }

    /// Indices flagged as noisy during training.
    #[getter]
    fn noisy_indices(&self) -> Vec<usize> {
        self.state.noisy_set.iter().copied().collect()
    }
}

#[pymodule]
fn _evifuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(ln_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(trigamma, m)?)?;
    m.add_function(wrap_pyfunction!(js_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(ace_loss, m)?)?;
    m.add_function(wrap_pyfunction!(kl_regularizer, m)?)?;
    m.add_function(wrap_pyfunction!(annealing_factor, m)?)?;
    m.add_class::<PyOpinion>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
