//! Python bindings: parameter sets, the three encryption schemes, the
//! experiment runners and the resource calculators.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qboots::config::ExperimentConfig;
use qboots::experiments as ex;
use qboots::lattice::{lwe, mhe};
use qboots::pir::Database;
use qboots::resources::{crot_cost_model, resource_count, Scheme};

fn err(e: qboots::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON so results arrive as plain dicts and lists.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

#[pyclass(name = "LweParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLweParams(qboots::lattice::LweParams);

#[pymethods]
impl PyLweParams {
    #[new]
    fn new(log_q: u32, log_l: u32, n: usize, noise_bound: u64) -> PyResult<Self> {
        qboots::lattice::LweParams::new(log_q, log_l, n, noise_bound).map(Self).map_err(err)
    }
    #[getter]
    fn log_q(&self) -> u32 {
        self.0.log_q
    }
    #[getter]
    fn log_l(&self) -> u32 {
        self.0.log_l
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }
    #[getter]
    fn noise_bound(&self) -> u64 {
        self.0.noise_bound
    }
    fn __repr__(&self) -> String {
        format!("LweParams(log_q={}, log_l={}, n={}, noise_bound={})", self.0.log_q, self.0.log_l, self.0.n, self.0.noise_bound)
    }
}

#[pyclass(name = "LweCiphertext", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLweCiphertext(qboots::lattice::LweCiphertext);

#[pymethods]
impl PyLweCiphertext {
    fn __add__(&self, other: &Self) -> PyResult<Self> {
        self.0.add(&other.0).map(Self).map_err(err)
    }
    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        self.0.sub(&other.0).map(Self).map_err(err)
    }
    #[getter]
    fn noise_bound(&self) -> f64 {
        self.0.noise_bound
    }
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        qboots::lattice::LweCiphertext::from_bytes(data).map(Self).map_err(err)
    }
}

/// LWE secret key plus a seeded generator.
#[pyclass(name = "LweScheme")]
struct PyLweScheme {
    params: qboots::lattice::LweParams,
    key: qboots::lattice::LweSecretKey,
    rng: ChaCha20Rng,
}

#[pymethods]
impl PyLweScheme {
    #[new]
    #[pyo3(signature = (params, seed = 0))]
    fn new(params: &PyLweParams, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = lwe::keygen(&params.0, &mut rng);
        PyLweScheme { params: params.0, key, rng }
    }
    fn encrypt(&mut self, m: u64) -> PyResult<PyLweCiphertext> {
        lwe::encrypt(&self.key, m, &self.params, &mut self.rng).map(PyLweCiphertext).map_err(err)
    }
    fn decrypt(&self, ct: &PyLweCiphertext) -> PyResult<u64> {
        ct.0.decrypt(&self.key).map_err(err)
    }
    /// Signed error of `ct` relative to plaintext `m`.
    fn error(&self, ct: &PyLweCiphertext, m: u64) -> PyResult<i64> {
        ct.0.error_for(&self.key, m).map_err(err)
    }
}

#[pyclass(name = "MheCiphertext", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMheCiphertext(qboots::lattice::MheCiphertext);

#[pymethods]
impl PyMheCiphertext {
    fn nand(&self, other: &Self) -> PyResult<Self> {
        self.0.nand(&other.0).map(Self).map_err(err)
    }
    fn and_(&self, other: &Self) -> PyResult<Self> {
        self.0.and(&other.0).map(Self).map_err(err)
    }
    fn xor(&self, other: &Self) -> PyResult<Self> {
        self.0.xor(&other.0).map(Self).map_err(err)
    }
    fn not_(&self) -> Self {
        Self(self.0.not())
    }
    #[getter]
    fn noise(&self) -> f64 {
        self.0.noise
    }
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }
}

/// GSW-style bit encryption for Pauli keys.
#[pyclass(name = "MheScheme")]
struct PyMheScheme {
    sk: qboots::lattice::MheSecretKey,
    pk: qboots::lattice::MhePublicKey,
    rng: ChaCha20Rng,
}

#[pymethods]
impl PyMheScheme {
    #[new]
    #[pyo3(signature = (log_q = 32, n = 2, beta_init = 4, beta_acc = 1e7, seed = 0))]
    fn new(log_q: u32, n: usize, beta_init: u64, beta_acc: f64, seed: u64) -> PyResult<Self> {
        let params = qboots::lattice::MheParams::new(log_q, n, beta_init, beta_acc).map_err(err)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, pk) = mhe::keygen(&params, &mut rng);
        Ok(PyMheScheme { sk, pk, rng })
    }
    fn encrypt(&mut self, bit: u8) -> PyResult<PyMheCiphertext> {
        self.pk.encrypt(bit, &mut self.rng).map(PyMheCiphertext).map_err(err)
    }
    fn decrypt(&self, ct: &PyMheCiphertext) -> PyResult<u8> {
        self.sk.decrypt(&ct.0).map_err(err)
    }
}

/// Toy Paillier keys over `N = p q`. Ciphertexts travel as hex strings.
#[pyclass(name = "Paillier", frozen, skip_from_py_object)]
struct PyPaillier(qboots::paillier::PaillierKeys);

#[pymethods]
impl PyPaillier {
    #[new]
    fn new(p: u64, q: u64) -> PyResult<Self> {
        qboots::paillier::PaillierKeys::generate(p, q).map(Self).map_err(err)
    }
    #[getter]
    fn n(&self) -> String {
        self.0.n().to_string()
    }
    /// Encrypts `m` with randomness `r`, which must be a unit mod N.
    fn encrypt(&self, m: u64, r: u64) -> PyResult<String> {
        self.0.pk.encrypt_u64(m, r).map(|c| c.to_hex()).map_err(err)
    }
    fn decrypt(&self, ct: &str) -> PyResult<String> {
        let ct = qboots::paillier::PaillierCiphertext::from_hex(ct, self.0.n()).map_err(err)?;
        self.0.decrypt(&ct).map(|m| m.to_string()).map_err(err)
    }
    /// Homomorphic sum of two hex ciphertexts.
    fn add(&self, a: &str, b: &str) -> PyResult<String> {
        let a = qboots::paillier::PaillierCiphertext::from_hex(a, self.0.n()).map_err(err)?;
        let b = qboots::paillier::PaillierCiphertext::from_hex(b, self.0.n()).map_err(err)?;
        a.add(&b).map(|c| c.to_hex()).map_err(err)
    }
}

/// Experiment configuration: a preset, a file or inline `key = value` text.
#[pyclass(name = "Config", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        ExperimentConfig::preset(name).map(Self).map_err(err)
    }
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ExperimentConfig::parse(text).map(Self).map_err(err)
    }
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        ExperimentConfig::load(&path).map(Self).map_err(err)
    }
    /// A copy with one key overridden.
    fn set(&self, key: &str, value: &str) -> PyResult<Self> {
        self.0.with(key, value).map(Self).map_err(err)
    }
    fn to_conf(&self) -> String {
        self.0.to_conf()
    }
    fn __repr__(&self) -> String {
        format!("Config({:?})", self.0.to_conf())
    }

    fn run_blindrot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_blindrot(&self.0).map_err(err)?)
    }
    fn run_compressed<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_compressed(&self.0).map_err(err)?)
    }
    fn run_distribution<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_distribution(&self.0).map_err(err)?)
    }
    fn run_bootstrap<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_bootstrap(&self.0).map_err(err)?)
    }
    fn run_fbootstrap<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_fbootstrap(&self.0).map_err(err)?)
    }
    fn run_pir<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_pir(&self.0).map_err(err)?)
    }
    fn run_paillier_cnot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_paillier_cnot(&self.0).map_err(err)?)
    }
    fn run_qram_audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ex::run_qram_audit(&self.0).map_err(err)?)
    }

    /// One PIR session over `words`; returns the word, round count and the
    /// JSON-lines transcript.
    #[pyo3(signature = (words, word_bits, index))]
    fn pir_session<'py>(&self, py: Python<'py>, words: Vec<u64>, word_bits: usize, index: u64) -> PyResult<Bound<'py, PyAny>> {
        let db = Database::new(words, word_bits).map_err(err)?;
        let (out, nand) = ex::pir_session(&self.0, &db, index, ex::session_seeds(&self.0, index)).map_err(err)?;
        to_py(
            py,
            &serde_json::json!({
                "word": out.word,
                "rounds": out.transcript.rounds(),
                "toffoli": out.stats.toffoli,
                "conversion_nand_cost": nand,
                "transcript": out.transcript.to_jsonl(),
            }),
        )
    }
}

/// Qubits for one encrypted CNOT, e.g. `"lwe-cnot:n=1024,logq=31"`.
#[pyfunction]
fn qubit_count(scheme: &str) -> PyResult<u128> {
    let s: Scheme = scheme.parse().map_err(err)?;
    Ok(resource_count(s))
}

/// Itemized 1-bit CROT tally.
#[pyfunction]
#[pyo3(signature = (l_prime_bits, n, n_star_bits, l_tilde, security = 128))]
fn crot_cost<'py>(py: Python<'py>, l_prime_bits: u32, n: usize, n_star_bits: u32, l_tilde: u32, security: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &crot_cost_model(l_prime_bits, n, n_star_bits, l_tilde, security))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    qboots::config::PRESETS.iter().map(|(n, _)| *n).collect()
}

#[pymodule]
#[pyo3(name = "qboots")]
fn qboots_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLweParams>()?;
    m.add_class::<PyLweCiphertext>()?;
    m.add_class::<PyLweScheme>()?;
    m.add_class::<PyMheCiphertext>()?;
    m.add_class::<PyMheScheme>()?;
    m.add_class::<PyPaillier>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(qubit_count, m)?)?;
    m.add_function(wrap_pyfunction!(crot_cost, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    Ok(())
}
