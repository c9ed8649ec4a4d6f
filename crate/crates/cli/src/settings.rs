use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ktram::bench::EncoderConfig;
use ktram::device::preset_params;
use ktram::keyvalue::{Document, Section};
use ktram::{CoreConfig, DeviceParams, Mode, Variant};

use crate::args::{GlobalArgs, TuneArgs};
use crate::CliError;

pub const SEED_ENV: &str = "KTRAM_SEED";

const ROOT_KEYS: [&str; 17] = [
    "seed",
    "mode",
    "preset",
    "epochs",
    "theta",
    "bias",
    "v_read",
    "v_write",
    "t_pulse",
    "renorm_interval",
    "margin",
    "anneal",
    "only_on_error",
    "ensemble",
    "subset",
    "start",
    "header",
];

/// Effective run configuration after layering defaults, `KTRAM_SEED`, the
/// config file and command-line flags (later layers win).
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub mode: Mode,
    pub preset: Variant,
    pub device: DeviceParams,
    pub v_read: f64,
    pub v_write: f64,
    pub t_pulse: f64,
    pub renorm_interval: u32,
    pub bias: bool,
    pub epochs: usize,
    pub theta: f64,
    pub margin: f64,
    pub anneal: f64,
    pub only_on_error: bool,
    pub ensemble: usize,
    pub subset: Option<usize>,
    pub start: f64,
    pub header: bool,
}

fn parse<T: FromStr>(key: &str, raw: &str, origin: &str) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{origin}: invalid value {raw:?} for {key}")))
}

impl Settings {
    fn defaults() -> Self {
        let preset = Variant::W;
        Settings {
            seed: CoreConfig::DEFAULT_SEED,
            mode: Mode::MeanField,
            preset,
            device: preset_params(preset),
            v_read: CoreConfig::DEFAULT_V_READ,
            v_write: CoreConfig::DEFAULT_V_WRITE,
            t_pulse: CoreConfig::DEFAULT_T_PULSE,
            renorm_interval: CoreConfig::DEFAULT_RENORM_INTERVAL,
            bias: true,
            epochs: 20,
            theta: EncoderConfig::default().theta,
            margin: 0.0,
            anneal: 1.0,
            only_on_error: true,
            ensemble: 16,
            subset: None,
            start: 0.5,
            header: false,
        }
    }

    /// Resolves everything except command-specific flags.
    pub fn resolve(global: &GlobalArgs, env_seed: Option<String>) -> Result<Self, CliError> {
        let mut s = Settings::defaults();
        if let Some(raw) = env_seed {
            s.seed = parse("seed", &raw, SEED_ENV)?;
        }
        let mut device_overrides = None;
        if let Some(path) = &global.config {
            device_overrides = s.apply_config_file(path)?;
        }
        if let Some(seed) = global.seed {
            s.seed = seed;
        }
        if let Some(mode) = &global.mode {
            s.mode = parse("--mode", mode, "command line")?;
        }
        if let Some(preset) = &global.preset {
            s.preset = parse("--preset", preset, "command line")?;
        }
        s.device = preset_params(s.preset);
        if let Some(section) = device_overrides {
            s.apply_device_section(&section)?;
        }
        Ok(s)
    }

    fn apply_config_file(&mut self, path: &Path) -> Result<Option<Section>, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let doc: Document = text
            .parse()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let origin = path.display().to_string();
        for section in doc.sections() {
            match section.name.as_str() {
                "" => {
                    for (key, value) in section.entries() {
                        self.apply_key(key, value, &origin)?;
                    }
                }
                "device" => {}
                other => {
                    return Err(CliError::Data(format!(
                        "{origin}: unknown section [{other}] (expected top-level keys or [device])"
                    )))
                }
            }
        }
        Ok(doc.section("device").cloned())
    }

    fn apply_key(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        let data = |e: CliError| CliError::Data(e.to_string());
        match key {
            "seed" => self.seed = parse(key, value, origin).map_err(data)?,
            "mode" => self.mode = parse(key, value, origin).map_err(data)?,
            "preset" => self.preset = parse(key, value, origin).map_err(data)?,
            "epochs" => self.epochs = parse(key, value, origin).map_err(data)?,
            "theta" => self.theta = parse(key, value, origin).map_err(data)?,
            "bias" => self.bias = parse(key, value, origin).map_err(data)?,
            "v_read" => self.v_read = parse(key, value, origin).map_err(data)?,
            "v_write" => self.v_write = parse(key, value, origin).map_err(data)?,
            "t_pulse" => self.t_pulse = parse(key, value, origin).map_err(data)?,
            "renorm_interval" => self.renorm_interval = parse(key, value, origin).map_err(data)?,
            "margin" => self.margin = parse(key, value, origin).map_err(data)?,
            "anneal" => self.anneal = parse(key, value, origin).map_err(data)?,
            "only_on_error" => self.only_on_error = parse(key, value, origin).map_err(data)?,
            "ensemble" => self.ensemble = parse(key, value, origin).map_err(data)?,
            "subset" => self.subset = Some(parse(key, value, origin).map_err(data)?),
            "start" => self.start = parse(key, value, origin).map_err(data)?,
            "header" => self.header = parse(key, value, origin).map_err(data)?,
            other => {
                return Err(CliError::Data(format!(
                    "{origin}: unknown key `{other}` (known: {})",
                    ROOT_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    fn apply_device_section(&mut self, section: &Section) -> Result<(), CliError> {
        let mut merged = Section::new("device");
        self.device.write_section(&mut merged);
        for (key, value) in section.entries() {
            if !DeviceParams::FIELD_NAMES.contains(&key) {
                return Err(CliError::Data(format!(
                    "[device]: unknown key `{key}` (known: {})",
                    DeviceParams::FIELD_NAMES.join(", ")
                )));
            }
            merged.set(key, value);
        }
        self.device = DeviceParams::from_section(&merged)
            .map_err(|e| CliError::Data(format!("[device]: {e}")))?;
        Ok(())
    }

    pub fn apply_tune(&mut self, tune: &TuneArgs) {
        if let Some(v) = tune.epochs {
            self.epochs = v;
        }
        if let Some(v) = tune.theta {
            self.theta = v;
        }
        if tune.no_bias {
            self.bias = false;
        }
        if let Some(v) = tune.v_read {
            self.v_read = v;
        }
        if let Some(v) = tune.v_write {
            self.v_write = v;
        }
        if let Some(v) = tune.t_pulse {
            self.t_pulse = v;
        }
        if let Some(v) = tune.renorm_interval {
            self.renorm_interval = v;
        }
    }

    /// Core configuration template; learners set the geometry.
    pub fn core_config(&self, rows: u32, cols: u32) -> CoreConfig {
        let mut cfg = CoreConfig::new(rows, cols, self.device)
            .with_seed(self.seed)
            .with_mode(self.mode);
        cfg.v_read = self.v_read;
        cfg.v_write = self.v_write;
        cfg.t_pulse = self.t_pulse;
        cfg.renorm_interval = self.renorm_interval;
        cfg.bias = self.bias;
        cfg
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            theta: self.theta,
            include_bias: self.bias,
            ..Default::default()
        }
    }

    /// One-line provenance comment written at the top of every text output.
    pub fn comment_line(&self, command: &str, extra: &[(&str, String)]) -> String {
        let d = &self.device;
        let mut line = format!(
            "# ktram {} command={command} seed={} mode={} preset={} n_switches={} w_on={} w_off={} v_on={} v_off={} tau={} beta={} v_read={} v_write={} t_pulse={} renorm_interval={} bias={}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.mode,
            self.preset,
            d.n_switches,
            d.w_on,
            d.w_off,
            d.v_on,
            d.v_off,
            d.tau,
            d.beta,
            self.v_read,
            self.v_write,
            self.t_pulse,
            self.renorm_interval,
            self.bias,
        );
        for (k, v) in extra {
            let _ = write!(line, " {k}={v}");
        }
        line
    }
}
