use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use bodynet::calibration::{bundled_targets, calibrate as fit, load_targets};
use bodynet::channel_select::{scan as scan_channels, select_channel as argmin_channel, ScanReport, N_CHANNELS};
use bodynet::classifier::{detect_abnormal as detect, ClassifierConfig};
use bodynet::energy::{
    active_only_components, battery_life_hours as life_hours, default_components, Battery, DutyProfile, ACCELEROMETER,
    MICROCONTROLLER, RADIO,
};
use bodynet::experiment::{run_experiment as run, ExperimentKind, ExperimentParams};
use bodynet::frame::replay_log as replay;
use bodynet::link::{run_echo, EchoLink, EchoTestConfig};
use bodynet::motion::{generate_trace as gen, AccelSample, AccelTrace, ActivityKind};
use bodynet::rf::{channel_center_freq, ChannelSpec, InterferenceModel, Standard};
use bodynet::scenario::{preset_names, resolve_scenario, Scenario as CoreScenario};
use bodynet::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A node layout with its obstacles and interferers.
#[pyclass(name = "Scenario", module = "bodynet_py", skip_from_py_object)]
struct PyScenario {
    inner: CoreScenario,
}

#[pymethods]
impl PyScenario {
    /// Loads a scenario file, or a bundled preset by name.
    #[staticmethod]
    fn load(path_or_preset: &str) -> PyResult<Self> {
        resolve_scenario(path_or_preset).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        CoreScenario::from_toml_str(text, "<string>").map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        preset_names()
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    /// Copy with the named interferers switched off.
    fn with_disabled(&self, labels: Vec<String>) -> PyResult<Self> {
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        self.inner.with_disabled(&refs).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn channel(&self) -> u8 {
        self.inner.channel
    }

    #[getter]
    fn tx_power_dbm(&self) -> f64 {
        self.inner.tx_power_dbm
    }

    #[getter]
    fn interferers(&self) -> Vec<String> {
        self.inner.interferers.iter().map(|i| i.label.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, channel={}, tx_power_dbm={})", self.inner.name, self.inner.channel, self.inner.tx_power_dbm)
    }
}

fn standard(name: &str) -> PyResult<Standard> {
    match name {
        "802.15.4" | "wpan" => Ok(Standard::Wpan154),
        "802.11" | "wlan" => Ok(Standard::Wlan80211),
        other => Err(PyValueError::new_err(format!("unknown standard `{other}`"))),
    }
}

/// Center frequency in MHz of a channel of `standard` ("802.15.4" or "802.11").
#[pyfunction]
fn center_freq_mhz(standard_name: &str, index: u8) -> PyResult<f64> {
    channel_center_freq(standard(standard_name)?, index).map_err(py_err)
}

/// Overlap in MHz between an 802.15.4 channel and an 802.11 channel.
#[pyfunction]
fn overlap_mhz(wpan_channel: u8, wlan_channel: u8) -> PyResult<f64> {
    let a = ChannelSpec::wpan(wpan_channel).map_err(py_err)?;
    let b = ChannelSpec::wlan(wlan_channel).map_err(py_err)?;
    Ok(bodynet::rf::spectral_overlap(&a, &b))
}

#[pyfunction]
#[pyo3(signature = (capacity_mah, accel_duty=1.0, mcu_duty=1.0, radio_duty=1.0, include_sleep_currents=false))]
fn battery_life_hours(
    capacity_mah: f64,
    accel_duty: f64,
    mcu_duty: f64,
    radio_duty: f64,
    include_sleep_currents: bool,
) -> PyResult<f64> {
    let comps = if include_sleep_currents { default_components() } else { active_only_components() };
    let duty = DutyProfile::default()
        .with(ACCELEROMETER, accel_duty)
        .with(MICROCONTROLLER, mcu_duty)
        .with(RADIO, radio_duty);
    let battery = Battery::new(capacity_mah, 3.7).map_err(py_err)?;
    life_hours(&battery, &comps, &duty).map_err(py_err)
}

fn activity(name: &str) -> PyResult<ActivityKind> {
    name.parse().map_err(py_err)
}

/// Synthetic trace as a list of `(t, ax, ay, az)` tuples in g.
#[pyfunction]
#[pyo3(signature = (kind, duration_s, rate_hz=60.0, seed=0))]
fn generate_trace(kind: &str, duration_s: f64, rate_hz: f64, seed: u64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let tr = gen(activity(kind)?, duration_s, rate_hz, seed).map_err(py_err)?;
    Ok(tr.samples.iter().map(|s| (s.t, s.ax, s.ay, s.az)).collect())
}

/// Abnormal events in a sampled trace, as `(t_start, t_end, peak_total_g)`.
#[pyfunction]
#[pyo3(signature = (samples, rate_hz=60.0))]
fn detect_abnormal(samples: Vec<(f64, f64, f64, f64)>, rate_hz: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let n = samples.len();
    let trace = AccelTrace {
        rate_hz,
        samples: samples.into_iter().map(|(t, x, y, z)| AccelSample::new(t, x, y, z)).collect(),
        activity_labels: vec![ActivityKind::Rest; n],
    };
    let events = detect(&trace, &ClassifierConfig::default()).map_err(py_err)?;
    Ok(events.iter().map(|e| (e.t_start, e.t_end, e.peak_total_a)).collect())
}

/// Monte Carlo echo test over a link with fixed per-hop success `p`.
/// Returns `(mean_ratio, std_ratio)`.
#[pyfunction]
#[pyo3(signature = (p, runs=10, n_messages=1000, seed=0))]
fn echo_fixed(p: f64, runs: u32, n_messages: u32, seed: u64) -> PyResult<(f64, f64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PyValueError::new_err("p must lie in [0, 1]"));
    }
    let cfg = EchoTestConfig {
        runs,
        n_messages,
        ..EchoTestConfig::new(ChannelSpec::wpan(11).map_err(py_err)?, 0.0)
    };
    let st = run_echo(&cfg, &EchoLink::fixed(p), seed).map_err(py_err)?;
    Ok((st.mean_ratio, st.std_ratio))
}

/// Per-channel loss scores for channels 11..=26.
#[pyfunction]
#[pyo3(signature = (scenario, tx_power_dbm=None))]
fn scan(scenario: &PyScenario, tx_power_dbm: Option<f64>) -> PyResult<Vec<f64>> {
    let s = &scenario.inner;
    let r = scan_channels(&s.environment(&InterferenceModel::default()), &s.victim(tx_power_dbm.unwrap_or(s.tx_power_dbm)))
        .map_err(py_err)?;
    Ok(r.scores.to_vec())
}

#[pyfunction]
fn select_channel(scores: Vec<f64>) -> PyResult<u8> {
    let arr: [f64; N_CHANNELS] = scores
        .try_into()
        .map_err(|_| PyValueError::new_err(format!("expected {N_CHANNELS} scores")))?;
    Ok(argmin_channel(&ScanReport::new(arr).map_err(py_err)?))
}

/// Decodes a binary frame log. Returns `(frames, crc_errors)` where each
/// frame is a dict of its fields.
#[pyfunction]
fn replay_log(py: Python<'_>, data: &Bound<'_, PyBytes>) -> PyResult<(Py<PyAny>, usize)> {
    let records = replay(data.as_bytes()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let bad = records.iter().filter(|r| r.is_err()).count();
    let frames: Vec<_> = records.into_iter().flatten().collect();
    let text = serde_json::to_string(&frames).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((json_to_py(py, &text)?, bad))
}

/// Fits the interference model. Returns the constants and fit RMS as a dict.
#[pyfunction]
#[pyo3(signature = (targets_csv=None))]
fn calibrate(py: Python<'_>, targets_csv: Option<&str>) -> PyResult<Py<PyAny>> {
    let targets = match targets_csv {
        Some(p) => load_targets(p).map_err(py_err)?,
        None => bundled_targets(),
    };
    let rep = py.detach(|| fit(&targets)).map_err(py_err)?;
    let text = serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

/// Runs one experiment (`echo`, `star`, `classify`, `energy` or `scan`)
/// and returns the result record as a dict.
#[pyfunction]
#[pyo3(signature = (kind, scenario=None, seed=1, channel=None, tx_power_dbm=None, runs=None, n_messages=None, out_dir=None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    kind: &str,
    scenario: Option<&PyScenario>,
    seed: u64,
    channel: Option<u8>,
    tx_power_dbm: Option<f64>,
    runs: Option<u32>,
    n_messages: Option<u32>,
    out_dir: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let kind: ExperimentKind = kind.parse().map_err(py_err)?;
    let sc = scenario.map(|s| s.inner.clone());
    let mut p = sc.as_ref().map(ExperimentParams::for_scenario).unwrap_or_default();
    p.channel = channel.unwrap_or(p.channel);
    p.power_dbm = tx_power_dbm.unwrap_or(p.power_dbm);
    p.runs = runs.unwrap_or(p.runs);
    p.n_messages = n_messages.unwrap_or(p.n_messages);
    let exp = py
        .detach(|| run(kind, sc.as_ref(), &p, seed, &InterferenceModel::default()))
        .map_err(py_err)?;
    if let Some(dir) = out_dir {
        exp.write_to(dir).map_err(py_err)?;
    }
    json_to_py(py, &exp.result.to_json().map_err(py_err)?)
}

#[pymodule]
fn bodynet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(center_freq_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(battery_life_hours, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(detect_abnormal, m)?)?;
    m.add_function(wrap_pyfunction!(echo_fixed, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(select_channel, m)?)?;
    m.add_function(wrap_pyfunction!(replay_log, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
