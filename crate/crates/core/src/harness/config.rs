//! Scenario files: one `key = value` per line, `#` starts a comment.
//!
//! | key | value |
//! |-----|-------|
//! | `name` | scenario name, used for output file names |
//! | `policy` | a built-in policy name, or `inline` |
//! | `core_count`, `levels`, `base_mhz`, `pcu_period_us`, `recovery_delay_ms` | inline policy; `levels = 2:3000,4:2700,8:2100` (cores:MHz) |
//! | `noise` | repeatable: `idle-background`, `constant-load:<cores>`, `vm-interrupts:<a\|b>:<per second>`, or `none` |
//! | `tx_cores` | transmitter cores (default 2, or 3 under constant load) |
//! | `bit_time_ms` | bit time for `run` |
//! | `sweep_ms` | bit times for `sweep`: `6..30`, `6..30:2`, or `6,7,10` |
//! | `payload_bytes` | default 80 |
//! | `seeds` | `1..10` or a list; default 1..10 |
//! | `countermeasure` | `none`, `turbo-off`, `cstate-restricted`, `artificial-noise:<k>` |
//! | `oversampling`, `glitch_max` | default 8 and 2 |
//! | `max_retries` | per packet, default 10, `unbounded` allowed |
//! | `jitter` | relative count noise, default 0.005 |
//! | `threshold` | fixed count threshold instead of the derived one |
//! | `ops_per_cycle` | counting-loop iterations per cycle, default 1 |
//! | `record_outcomes` | unacknowledged frames to record after the transfer |

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::phy::Party;
use crate::turbo::{TurboLevel, TurboPolicy};
use crate::units::{ms_f64, Hertz, Micros};

use super::scenario::{Countermeasure, NoiseSpec, Scenario};

/// A parsed scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// From `bit_time_ms`.
    pub bit_time: Option<Micros>,
    /// From `sweep_ms`.
    pub sweep: Option<Vec<Micros>>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::parse(&text, fallback)
    }

    /// Bit times for a single run: `bit_time_ms`, else the sweep list.
    pub fn run_bit_times(&self) -> Result<Vec<Micros>> {
        match (&self.bit_time, &self.sweep) {
            (Some(bt), _) => Ok(vec![*bt]),
            (None, Some(sw)) => Ok(sw.clone()),
            _ => Err(Error::Config("neither bit_time_ms nor sweep_ms is set".into())),
        }
    }

    /// Bit times for a sweep: `sweep_ms`, else the single bit time.
    pub fn sweep_bit_times(&self) -> Result<Vec<Micros>> {
        match (&self.sweep, &self.bit_time) {
            (Some(sw), _) => Ok(sw.clone()),
            (None, Some(bt)) => Ok(vec![*bt]),
            _ => Err(Error::Config("neither sweep_ms nor bit_time_ms is set".into())),
        }
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let mut single: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut noise: Vec<(usize, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {n}: expected key = value")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k == "noise" {
                noise.push((n, v));
            } else if single.insert(k.clone(), (n, v)).is_some() {
                return Err(Error::Config(format!("line {n}: duplicate key {k}")));
            }
        }
        let mut p = Parser { single };
        let name = p.take("name").map(|(_, v)| v).unwrap_or_else(|| default_name.to_string());
        let policy = p.policy()?;
        let mut s = Scenario::new(name, policy);
        s.noise = noise
            .iter()
            .filter(|(_, v)| v != "none")
            .map(|(n, v)| parse_noise(v).map_err(|e| Error::Config(format!("line {n}: {e}"))))
            .collect::<Result<_>>()?;
        s.tx_cores = p.num("tx_cores")?.unwrap_or_else(|| Scenario::default_tx_cores(s.constant_cores()));
        let bit_time = p.value("bit_time_ms", parse_ms)?;
        let sweep = p.value("sweep_ms", parse_ms_list)?;
        if let Some(v) = p.num("payload_bytes")? {
            s.payload_bytes = v;
        }
        if let Some(v) = p.value("seeds", parse_u64_list)? {
            s.seeds = v;
        }
        if let Some(v) = p.value("countermeasure", parse_countermeasure)? {
            s.countermeasure = v;
        }
        if let Some(v) = p.num("oversampling")? {
            s.oversampling = v;
        }
        if let Some(v) = p.num("glitch_max")? {
            s.glitch_max = v;
        }
        if let Some(v) = p.value("max_retries", |v| match v {
            "unbounded" => Ok(None),
            _ => v.parse().map(Some).map_err(|_| format!("bad retry limit {v:?}")),
        })? {
            s.max_retries = v;
        }
        if let Some(v) = p.num("jitter")? {
            s.jitter = v;
        }
        s.threshold = p.num("threshold")?;
        if let Some(v) = p.num("ops_per_cycle")? {
            s.ops_per_cycle = v;
        }
        if let Some(v) = p.num("record_outcomes")? {
            s.record_outcomes = v;
        }
        if let Some((n, k)) = p.single.iter().next().map(|(k, (n, _))| (*n, k.clone())) {
            return Err(Error::Config(format!("line {n}: unknown key {k}")));
        }
        s.bit_times = bit_time
            .map(|b| vec![b])
            .or_else(|| sweep.clone())
            .unwrap_or_else(|| s.bit_times.clone());
        Ok(ScenarioConfig {
            scenario: s,
            bit_time,
            sweep,
        })
    }
}

struct Parser {
    single: BTreeMap<String, (usize, String)>,
}

impl Parser {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.single.remove(key)
    }

    fn value<T>(&mut self, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((n, v)) => f(&v).map(Some).map_err(|e| Error::Config(format!("line {n}: {key}: {e}"))),
        }
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.value(key, |v| v.parse().map_err(|_| format!("cannot parse {v:?}")))
    }

    fn policy(&mut self) -> Result<TurboPolicy> {
        let (n, name) = self
            .take("policy")
            .unwrap_or((0, TurboPolicy::BUILTIN_NAMES[0].to_string()));
        if name != "inline" {
            return TurboPolicy::builtin(&name).ok_or_else(|| {
                Error::Config(format!(
                    "line {n}: unknown policy {name:?} (built-in: {})",
                    TurboPolicy::BUILTIN_NAMES.join(", ")
                ))
            });
        }
        let need = |k: &str| Error::Config(format!("inline policy needs {k}"));
        let core_count = self.num("core_count")?.ok_or_else(|| need("core_count"))?;
        let levels = self.value("levels", parse_levels)?.ok_or_else(|| need("levels"))?;
        let base = self.num::<u64>("base_mhz")?.ok_or_else(|| need("base_mhz"))?;
        let period = self.num("pcu_period_us")?.unwrap_or(1_000);
        let recovery = self.value("recovery_delay_ms", parse_ms)?.unwrap_or(0);
        TurboPolicy::new("inline", core_count, levels, Hertz::mhz(base), period, recovery)
    }
}

fn parse_ms(v: &str) -> std::result::Result<Micros, String> {
    match v.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(ms_f64(x)),
        _ => Err(format!("bad duration {v:?}")),
    }
}

fn parse_range<T>(v: &str, one: impl Fn(&str) -> std::result::Result<T, String>, step_default: &str) -> std::result::Result<(T, T, T), String> {
    let (range, step) = v.split_once(':').unwrap_or((v, step_default));
    let (a, b) = range.split_once("..").ok_or_else(|| format!("bad range {v:?}"))?;
    Ok((one(a.trim())?, one(b.trim())?, one(step.trim())?))
}

fn parse_ms_list(v: &str) -> std::result::Result<Vec<Micros>, String> {
    if v.contains("..") {
        let (a, b, step) = parse_range(v, parse_ms, "1")?;
        if a > b {
            return Err(format!("empty range {v:?}"));
        }
        return Ok((a..=b).step_by(step as usize).collect());
    }
    v.split(',').map(|x| parse_ms(x.trim())).collect()
}

fn parse_u64_list(v: &str) -> std::result::Result<Vec<u64>, String> {
    let one = |x: &str| x.parse::<u64>().map_err(|_| format!("bad number {x:?}"));
    if v.contains("..") {
        let (a, b, step) = parse_range(v, one, "1")?;
        if a > b || step == 0 {
            return Err(format!("empty range {v:?}"));
        }
        return Ok((a..=b).step_by(step as usize).collect());
    }
    v.split(',').map(|x| one(x.trim())).collect()
}

fn parse_levels(v: &str) -> std::result::Result<Vec<TurboLevel>, String> {
    v.split(',')
        .map(|item| {
            let (c, f) = item.trim().split_once(':').ok_or_else(|| format!("bad level {item:?}"))?;
            let c = c.trim().parse().map_err(|_| format!("bad core count {c:?}"))?;
            let f = f.trim().parse().map_err(|_| format!("bad frequency {f:?}"))?;
            Ok(TurboLevel::new(c, Hertz::mhz(f)))
        })
        .collect()
}

pub fn parse_noise(v: &str) -> std::result::Result<NoiseSpec, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    match parts.as_slice() {
        ["idle-background"] => Ok(NoiseSpec::IdleBackground),
        ["constant-load", n] => n
            .parse()
            .map(NoiseSpec::ConstantLoad)
            .map_err(|_| format!("bad core count {n:?}")),
        ["vm-interrupts", who, rate] => {
            let target = match *who {
                "a" | "A" | "sender" => Party::A,
                "b" | "B" | "receiver" => Party::B,
                _ => return Err(format!("unknown party {who:?}")),
            };
            match rate.parse::<f64>() {
                Ok(r) if r >= 0.0 && r.is_finite() => Ok(NoiseSpec::VmInterrupts { target, rate: r }),
                _ => Err(format!("bad rate {rate:?}")),
            }
        }
        _ => Err(format!("unknown noise {v:?}")),
    }
}

pub fn parse_countermeasure(v: &str) -> std::result::Result<Countermeasure, String> {
    match v.split_once(':') {
        None => match v {
            "none" => Ok(Countermeasure::None),
            "turbo-off" => Ok(Countermeasure::TurboOff),
            "cstate-restricted" => Ok(Countermeasure::CstateRestricted),
            _ => Err(format!("unknown countermeasure {v:?}")),
        },
        Some(("artificial-noise", k)) => k
            .trim()
            .parse()
            .map(Countermeasure::ArtificialNoise)
            .map_err(|_| format!("bad core count {k:?}")),
        _ => Err(format!("unknown countermeasure {v:?}")),
    }
}
