//! Electric energy metering for training runs.
//!
//! A [`Meter`] exposes cumulative joules as a function of monotonic time;
//! integration happens once, inside the backend, where it is exact. Three
//! backends cover the desk-scale cases: a constant-power model, replay of
//! a piecewise-constant power trace, and a re-read text file holding a
//! wrapping microjoule counter (the commodity CPU energy counter shape).
//!
//! Samples taken during a run accumulate in an [`EnergyLedger`], which is
//! closed at stage end and totalled to kWh / grams of CO2 / wall time.

use crate::metrics::{self, MetricsError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid meter config: {0}")]
    InvalidConfig(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("power trace {path}, line {line}: {reason}")]
    MalformedTrace { path: PathBuf, line: usize, reason: String },
    #[error("counter file {path}: {reason}")]
    MalformedCounter { path: PathBuf, reason: String },
    #[error("non-monotonic read: t={t} s after t={prev} s")]
    NonMonotonicRead { prev: f64, t: f64 },
    #[error("ledger sample at t={t} s would not be monotonic")]
    NonMonotonicSample { t: f64 },
    #[error("ledger is closed")]
    LedgerClosed,
    #[error("ledger not closed yet")]
    LedgerNotClosed,
    #[error("ledger has no samples")]
    EmptyLedger,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, EnergyError>;

/// One cumulative-energy observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t_monotonic_s: f64,
    pub cumulative_joules: f64,
}

/// Time-ordered cumulative-energy record of one training stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    meter_kind: String,
    samples: Vec<EnergySample>,
    closed: bool,
}

impl EnergyLedger {
    pub fn new(meter_kind: impl Into<String>) -> Self {
        EnergyLedger { meter_kind: meter_kind.into(), samples: Vec::new(), closed: false }
    }

    /// Append a sample; time and energy must not go backwards.
    pub fn record(&mut self, t_monotonic_s: f64, cumulative_joules: f64) -> Result<()> {
        if self.closed {
            return Err(EnergyError::LedgerClosed);
        }
        if let Some(last) = self.samples.last() {
            if t_monotonic_s < last.t_monotonic_s || cumulative_joules < last.cumulative_joules {
                return Err(EnergyError::NonMonotonicSample { t: t_monotonic_s });
            }
        }
        self.samples.push(EnergySample { t_monotonic_s, cumulative_joules });
        Ok(())
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn meter_kind(&self) -> &str {
        &self.meter_kind
    }

    pub fn samples(&self) -> &[EnergySample] {
        &self.samples
    }
}

/// Meter backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    ConstantPower,
    TraceReplay,
    CounterFile,
}

impl MeterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeterKind::ConstantPower => "constant_power",
            MeterKind::TraceReplay => "trace_replay",
            MeterKind::CounterFile => "counter_file",
        }
    }
}

/// Declarative meter configuration; exactly the fields demanded by `kind`
/// must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeterConfig {
    pub kind: MeterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_watts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_counter_uj: Option<u64>,
    #[serde(default = "default_sample_period")]
    pub sample_period_s: f64,
    #[serde(default = "default_co2_coefficient")]
    pub co2_g_per_kwh: f64,
}

fn default_sample_period() -> f64 {
    1.0
}

fn default_co2_coefficient() -> f64 {
    metrics::CO2_G_PER_KWH
}

impl MeterConfig {
    pub fn constant_power(watts: f64) -> Self {
        MeterConfig {
            kind: MeterKind::ConstantPower,
            constant_watts: Some(watts),
            trace_path: None,
            counter_path: None,
            max_counter_uj: None,
            sample_period_s: default_sample_period(),
            co2_g_per_kwh: default_co2_coefficient(),
        }
    }

    pub fn trace_replay(path: impl Into<PathBuf>) -> Self {
        MeterConfig {
            kind: MeterKind::TraceReplay,
            constant_watts: None,
            trace_path: Some(path.into()),
            counter_path: None,
            max_counter_uj: None,
            sample_period_s: default_sample_period(),
            co2_g_per_kwh: default_co2_coefficient(),
        }
    }

    pub fn counter_file(path: impl Into<PathBuf>, max_counter_uj: u64) -> Self {
        MeterConfig {
            kind: MeterKind::CounterFile,
            constant_watts: None,
            trace_path: None,
            counter_path: Some(path.into()),
            max_counter_uj: Some(max_counter_uj),
            sample_period_s: default_sample_period(),
            co2_g_per_kwh: default_co2_coefficient(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(EnergyError::InvalidConfig(msg.to_string()));
        if !(self.sample_period_s > 0.0) {
            return invalid("sample_period_s must be positive");
        }
        if !(self.co2_g_per_kwh > 0.0) {
            return invalid("co2_g_per_kwh must be positive");
        }
        match self.kind {
            MeterKind::ConstantPower => {
                let watts = match self.constant_watts {
                    Some(w) => w,
                    None => return invalid("constant_power requires constant_watts"),
                };
                if !(watts >= 0.0) || !watts.is_finite() {
                    return invalid("constant_watts must be finite and nonnegative");
                }
                if self.trace_path.is_some() || self.counter_path.is_some() || self.max_counter_uj.is_some() {
                    return invalid("constant_power takes no trace or counter fields");
                }
            }
            MeterKind::TraceReplay => {
                if self.trace_path.is_none() {
                    return invalid("trace_replay requires trace_path");
                }
                if self.constant_watts.is_some() || self.counter_path.is_some() || self.max_counter_uj.is_some() {
                    return invalid("trace_replay takes only trace_path");
                }
            }
            MeterKind::CounterFile => {
                if self.counter_path.is_none() {
                    return invalid("counter_file requires counter_path");
                }
                match self.max_counter_uj {
                    None => return invalid("counter_file requires max_counter_uj"),
                    Some(0) => return invalid("max_counter_uj must be positive"),
                    Some(_) => {}
                }
                if self.constant_watts.is_some() || self.trace_path.is_some() {
                    return invalid("counter_file takes only counter_path and max_counter_uj");
                }
            }
        }
        Ok(())
    }
}

/// Parsed piecewise-constant power trace: `watts[i]` holds from `t[i]`
/// until the next point, and the last value extends forever.
#[derive(Debug, Clone)]
struct PowerTrace {
    points: Vec<(f64, f64)>,
}

impl PowerTrace {
    fn parse(path: &Path) -> Result<PowerTrace> {
        let text = fs::read_to_string(path).map_err(|source| EnergyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let malformed = |line: usize, reason: &str| EnergyError::MalformedTrace {
            path: path.to_path_buf(),
            line,
            reason: reason.to_string(),
        };

        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "t_seconds,watts" => {}
            Some((_, header)) => {
                return Err(malformed(1, &format!("expected header 't_seconds,watts', got '{}'", header.trim())));
            }
            None => return Err(malformed(1, "empty file")),
        }

        let mut points = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (t_str, w_str) = line
                .split_once(',')
                .ok_or_else(|| malformed(line_no, "expected 't,watts'"))?;
            let t: f64 = t_str
                .trim()
                .parse()
                .map_err(|_| malformed(line_no, "time is not a number"))?;
            let w: f64 = w_str
                .trim()
                .parse()
                .map_err(|_| malformed(line_no, "watts is not a number"))?;
            if !t.is_finite() || !w.is_finite() {
                return Err(malformed(line_no, "values must be finite"));
            }
            if w < 0.0 {
                return Err(malformed(line_no, "watts must be nonnegative"));
            }
            match points.last() {
                None if t != 0.0 => return Err(malformed(line_no, "first point must be at t=0")),
                Some(&(prev, _)) if t <= prev => {
                    return Err(malformed(line_no, "timestamps must be strictly increasing"));
                }
                _ => {}
            }
            points.push((t, w));
        }
        if points.is_empty() {
            return Err(malformed(1, "trace has no data rows"));
        }
        Ok(PowerTrace { points })
    }

    /// Exact integral of the trace over [0, t].
    fn joules_up_to(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(t_i, w_i)) in self.points.iter().enumerate() {
            if t <= t_i {
                break;
            }
            let seg_end = match self.points.get(i + 1) {
                Some(&(t_next, _)) => t_next.min(t),
                None => t,
            };
            total += w_i * (seg_end - t_i);
        }
        total
    }
}

#[derive(Debug)]
enum Backend {
    ConstantPower { watts: f64 },
    TraceReplay { trace: PowerTrace },
    CounterFile { path: PathBuf, max_uj: u64, last_raw: u64, accum_uj: u64 },
}

fn read_counter(path: &Path, max_uj: u64) -> Result<u64> {
    let text = fs::read_to_string(path).map_err(|source| EnergyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: u64 = text.trim().parse().map_err(|_| EnergyError::MalformedCounter {
        path: path.to_path_buf(),
        reason: format!("expected one base-10 integer, got '{}'", text.trim()),
    })?;
    if raw >= max_uj {
        return Err(EnergyError::MalformedCounter {
            path: path.to_path_buf(),
            reason: format!("counter value {raw} out of range [0, {max_uj})"),
        });
    }
    Ok(raw)
}

/// An open energy meter. Single-owner; reads must use nondecreasing
/// timestamps.
#[derive(Debug)]
pub struct Meter {
    kind: MeterKind,
    backend: Backend,
    last_t: Option<f64>,
    sample_period_s: f64,
    co2_g_per_kwh: f64,
}

/// Validate a configuration and open the corresponding meter, with
/// `cumulative_joules(0) == 0`.
pub fn open_meter(config: &MeterConfig) -> Result<Meter> {
    config.validate()?;
    let backend = match config.kind {
        MeterKind::ConstantPower => Backend::ConstantPower {
            watts: config.constant_watts.expect("validated"),
        },
        MeterKind::TraceReplay => Backend::TraceReplay {
            trace: PowerTrace::parse(config.trace_path.as_deref().expect("validated"))?,
        },
        MeterKind::CounterFile => {
            let path = config.counter_path.clone().expect("validated");
            let max_uj = config.max_counter_uj.expect("validated");
            let initial = read_counter(&path, max_uj)?;
            Backend::CounterFile { path, max_uj, last_raw: initial, accum_uj: 0 }
        }
    };
    Ok(Meter {
        kind: config.kind,
        backend,
        last_t: None,
        sample_period_s: config.sample_period_s,
        co2_g_per_kwh: config.co2_g_per_kwh,
    })
}

impl Meter {
    pub fn kind(&self) -> MeterKind {
        self.kind
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn co2_g_per_kwh(&self) -> f64 {
        self.co2_g_per_kwh
    }

    /// Cumulative joules consumed since the meter was opened, at monotonic
    /// time `t` seconds.
    pub fn read_cumulative_joules(&mut self, t_monotonic_s: f64) -> Result<f64> {
        if !(t_monotonic_s >= 0.0) {
            return Err(EnergyError::NonMonotonicRead { prev: 0.0, t: t_monotonic_s });
        }
        if let Some(prev) = self.last_t {
            if t_monotonic_s < prev {
                return Err(EnergyError::NonMonotonicRead { prev, t: t_monotonic_s });
            }
        }
        self.last_t = Some(t_monotonic_s);
        match &mut self.backend {
            Backend::ConstantPower { watts } => Ok(*watts * t_monotonic_s),
            Backend::TraceReplay { trace } => Ok(trace.joules_up_to(t_monotonic_s)),
            Backend::CounterFile { path, max_uj, last_raw, accum_uj } => {
                let raw = read_counter(path, *max_uj)?;
                // Wraparound correction: the counter counts modulo max_uj
                // and at most one wrap may occur between reads.
                let delta = if raw >= *last_raw { raw - *last_raw } else { raw + *max_uj - *last_raw };
                *accum_uj += delta;
                *last_raw = raw;
                Ok(*accum_uj as f64 / 1e6)
            }
        }
    }
}

/// Total consumption of a closed ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotal {
    pub kwh: f64,
    pub grams_co2: u64,
    pub wall_time_s: f64,
}

const JOULES_PER_KWH: f64 = 3.6e6;

/// Reduce a closed ledger to kWh, grams of CO2 at `co2_g_per_kwh`, and
/// wall time.
pub fn ledger_total(ledger: &EnergyLedger, co2_g_per_kwh: f64) -> Result<LedgerTotal> {
    if !ledger.is_closed() {
        return Err(EnergyError::LedgerNotClosed);
    }
    let last = ledger.samples().last().ok_or(EnergyError::EmptyLedger)?;
    let kwh = last.cumulative_joules / JOULES_PER_KWH;
    Ok(LedgerTotal {
        kwh,
        grams_co2: metrics::grams_co2(kwh, co2_g_per_kwh)?,
        wall_time_s: last.t_monotonic_s,
    })
}

/// Couples a meter, a ledger, and a monotonic stopwatch for one training
/// stage. The training loop calls [`StageMeter::sample_if_due`] as it
/// goes; appends are strictly from this single owner.
#[derive(Debug)]
pub struct StageMeter {
    meter: Meter,
    ledger: EnergyLedger,
    started: Instant,
    next_sample_at: f64,
}

impl StageMeter {
    pub fn start(meter: Meter) -> Result<StageMeter> {
        let period = meter.sample_period_s();
        let mut stage = StageMeter {
            ledger: EnergyLedger::new(meter.kind().as_str()),
            meter,
            started: Instant::now(),
            next_sample_at: period,
        };
        let joules = stage.meter.read_cumulative_joules(0.0)?;
        stage.ledger.record(0.0, joules)?;
        Ok(stage)
    }

    pub fn elapsed_s(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Take a sample if at least one sample period elapsed since the last.
    pub fn sample_if_due(&mut self) -> Result<()> {
        if self.elapsed_s() >= self.next_sample_at {
            self.sample_now()?;
        }
        Ok(())
    }

    pub fn sample_now(&mut self) -> Result<()> {
        let t = self.elapsed_s();
        let joules = self.meter.read_cumulative_joules(t)?;
        self.ledger.record(t, joules)?;
        self.next_sample_at = t + self.meter.sample_period_s();
        Ok(())
    }

    /// Final sample, close, and hand the ledger back.
    pub fn finish(mut self) -> Result<(EnergyLedger, Meter)> {
        self.sample_now()?;
        self.ledger.close();
        Ok((self.ledger, self.meter))
    }

    pub fn co2_g_per_kwh(&self) -> f64 {
        self.meter.co2_g_per_kwh()
    }
}
