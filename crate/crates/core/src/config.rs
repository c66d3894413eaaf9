//! Run configuration: one flat record covering data, model and training.
//!
//! [`RunConfig::validate`] checks the whole record at once and reports
//! every problem in a single error, before any computation starts.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::backbone::{Activation, BackboneKind, BackboneSpec};
use crate::data::{SynthKind, SynthSpec, MIN_SYNTH_LENGTH};
use crate::error::{config_err, Result};
use crate::spectral::{plan_stft, StftPlan, WindowFn};

/// Which real/imaginary planes are hidden, in both training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MaskMode {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "X_real")]
    XReal,
    #[serde(rename = "X_imag")]
    XImag,
    #[serde(rename = "W_real")]
    WReal,
    #[serde(rename = "W_imag")]
    WImag,
    #[serde(rename = "W_imag+X_imag")]
    WImagXImag,
    #[serde(rename = "W_real+X_real")]
    WRealXReal,
}

impl MaskMode {
    pub const ALL: [MaskMode; 7] = [
        Self::None,
        Self::XReal,
        Self::XImag,
        Self::WReal,
        Self::WImag,
        Self::WImagXImag,
        Self::WRealXReal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::XReal => "X_real",
            Self::XImag => "X_imag",
            Self::WReal => "W_real",
            Self::WImag => "W_imag",
            Self::WImagXImag => "W_imag+X_imag",
            Self::WRealXReal => "W_real+X_real",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
            config_err!("unknown mask mode {s:?}; expected one of {}", names.join(", "))
        })
    }

    pub fn input_real(self) -> bool {
        matches!(self, Self::XReal | Self::WRealXReal)
    }

    pub fn input_imag(self) -> bool {
        matches!(self, Self::XImag | Self::WImagXImag)
    }

    pub fn weight_real(self) -> bool {
        matches!(self, Self::WReal | Self::WRealXReal)
    }

    pub fn weight_imag(self) -> bool {
        matches!(self, Self::WImag | Self::WImagXImag)
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of kept bins: an explicit count or every bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TopM {
    #[default]
    Max,
    Count(usize),
}

impl TopM {
    pub fn resolve(self, bins: usize) -> usize {
        match self {
            Self::Max => bins,
            Self::Count(m) => m,
        }
    }
}

impl fmt::Display for TopM {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Max => f.write_str("max"),
            Self::Count(m) => write!(f, "{m}"),
        }
    }
}

impl Serialize for TopM {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Self::Max => s.serialize_str("max"),
            Self::Count(m) => s.serialize_u64(*m as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TopM {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(m) => Ok(Self::Count(m as usize)),
            Raw::Word(w) if w == "max" => Ok(Self::Max),
            Raw::Word(w) => w
                .parse()
                .map(Self::Count)
                .map_err(|_| serde::de::Error::custom(format!("top_m must be \"max\" or a count, got {w:?}"))),
        }
    }
}

/// Everything a run needs. Serialises flat, so the same record works as a
/// config file and as the manifest's copy of the merged configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input; when absent the synthetic corpus below is generated.
    pub data_path: Option<String>,
    pub synth_kind: SynthKind,
    pub synth_length: usize,
    pub synth_channels: usize,
    pub synth_seed: u64,
    pub synth_noise: f64,
    /// Expected channel count; inferred from the data when absent.
    pub channels: Option<usize>,
    pub stride: usize,

    pub lookback: usize,
    pub horizon: usize,
    pub embed: usize,
    pub windows: usize,
    pub nfft: usize,
    pub top_m: TopM,
    pub hidden: usize,
    pub backbone: BackboneKind,
    pub radius: usize,
    pub conjugate_neighbors: bool,
    pub window_fn: WindowFn,
    pub activation: Activation,
    pub mask: MaskMode,

    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            synth_kind: SynthKind::SinusoidMix,
            synth_length: 2000,
            synth_channels: 2,
            synth_seed: 0,
            synth_noise: 0.05,
            channels: None,
            stride: 1,
            lookback: 96,
            horizon: 96,
            embed: 16,
            windows: 4,
            nfft: 48,
            top_m: TopM::Max,
            hidden: 64,
            backbone: BackboneKind::Hc,
            radius: 1,
            conjugate_neighbors: true,
            window_fn: WindowFn::Rectangular,
            activation: Activation::Relu,
            mask: MaskMode::None,
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            lr_decay: 0.9,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn plan(&self) -> Result<StftPlan> {
        plan_stft(self.lookback, self.windows, self.nfft, self.window_fn)
    }

    pub fn backbone_spec(&self) -> BackboneSpec {
        BackboneSpec {
            kind: self.backbone,
            windows: self.windows,
            embed: self.embed,
            radius: self.radius,
            conjugate_neighbors: self.conjugate_neighbors,
            activation: self.activation,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            kind: self.synth_kind,
            seed: self.synth_seed,
            length: self.synth_length,
            channels: self.synth_channels,
            noise: self.synth_noise,
        }
    }

    /// All problems with the record, empty when it is usable.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        need(self.lookback > 0, "lookback must be positive");
        need(self.horizon > 0, "horizon must be positive");
        need(self.embed > 0, "embed must be positive");
        need(self.hidden > 0, "hidden must be positive");
        need(self.epochs > 0, "epochs must be positive");
        need(self.batch_size > 0, "batch_size must be positive");
        need(self.stride > 0, "stride must be positive");
        need(self.lr > 0.0 && self.lr.is_finite(), "lr must be a positive finite number");
        need(
            self.lr_decay > 0.0 && self.lr_decay <= 1.0,
            "lr_decay must lie in (0, 1]",
        );
        need(self.channels != Some(0), "channels must be positive when given");
        if self.data_path.is_none() {
            need(
                self.synth_length >= MIN_SYNTH_LENGTH,
                "synth_length must be at least 256",
            );
            need(self.synth_channels > 0, "synth_channels must be positive");
            need(
                self.synth_noise >= 0.0 && self.synth_noise.is_finite(),
                "synth_noise must be finite and non-negative",
            );
        }
        if self.lookback > 0 && self.windows > 0 && self.nfft > 0 {
            if let Err(e) = self.plan() {
                out.push(root_message(&e));
            }
        } else if self.windows == 0 || self.nfft == 0 {
            out.push("windows and nfft must be positive".to_string());
        }
        if let TopM::Count(m) = self.top_m {
            if m == 0 || m > self.bins() {
                out.push(format!(
                    "top_m = {m} must lie in 1..={} (nfft / 2 + 1)",
                    self.bins()
                ));
            }
        }
        if let Err(e) = self.backbone_spec().validate() {
            out.push(root_message(&e));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Config(format!(
                "{} problem(s):\n  - {}",
                issues.len(),
                issues.join("\n  - ")
            )))
        }
    }
}

fn root_message(e: &crate::Error) -> String {
    match e.root() {
        crate::Error::Config(m) | crate::Error::Contract(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Reference hyperparameters for the long-horizon benchmark datasets.
/// Only the model and training settings are filled in; the caller supplies
/// the data source.
pub fn benchmark_preset(name: &str) -> Option<RunConfig> {
    // (lookback, batch, embed, hidden, nfft, windows, top_m)
    let (lookback, batch, embed, hidden, nfft, windows, top_m) = match name {
        "weather" => (96, 16, 128, 256, 16, 7, TopM::Count(10)),
        "traffic" => (48, 4, 32, 256, 32, 13, TopM::Max),
        "electricity" => (96, 4, 64, 256, 32, 13, TopM::Count(4)),
        "etth1" => (96, 8, 128, 256, 6, 33, TopM::Count(4)),
        "ettm1" => (96, 8, 128, 256, 48, 4, TopM::Count(4)),
        "exchange_rate" => (96, 8, 128, 256, 32, 13, TopM::Max),
        _ => return None,
    };
    Some(RunConfig {
        lookback,
        horizon: 96,
        batch_size: batch,
        embed,
        hidden,
        nfft,
        windows,
        top_m,
        backbone: BackboneKind::Wm,
        epochs: 10,
        ..RunConfig::default()
    })
}

pub const BENCHMARK_PRESETS: [&str; 6] = ["weather", "traffic", "electricity", "etth1", "ettm1", "exchange_rate"];
