use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// How encoder features reach the mirrored decoder layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// Residual-block skips at decoder sides 2 and 4, concatenation elsewhere.
    Aegg,
    /// Concatenation at every resolution.
    UnetConcat,
    /// Plain encoder-decoder.
    None,
}

impl SkipMode {
    pub fn code(self) -> u32 {
        match self {
            SkipMode::Aegg => 0,
            SkipMode::UnetConcat => 1,
            SkipMode::None => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SkipMode::Aegg),
            1 => Some(SkipMode::UnetConcat),
            2 => Some(SkipMode::None),
            _ => None,
        }
    }
}

/// The merge applied after a decoder block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipKind {
    None,
    Concat,
    Residual,
}

/// Decoder feature sides that get a residual-block skip in the transfer net.
pub const RESIDUAL_SIDES: [usize; 2] = [2, 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub image_size: usize,
    pub base_width: usize,
    pub width_cap: usize,
    pub leaky_slope: f64,
    pub skip_mode: SkipMode,
    /// Smallest and largest decoder side supervised by feature taps.
    /// Defaults to `(max(2, image_size/16), image_size/2)`.
    pub tap_range: Option<(usize, usize)>,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub init_std: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::for_size(32)
    }
}

impl NetConfig {
    /// Defaults for a given image side: widths 64/512 from 256 up, 16/128 below.
    pub fn for_size(image_size: usize) -> Self {
        let (base_width, width_cap) = if image_size >= 256 { (64, 512) } else { (16, 128) };
        NetConfig {
            image_size,
            base_width,
            width_cap,
            leaky_slope: 0.2,
            skip_mode: SkipMode::Aegg,
            tap_range: None,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            init_std: 0.02,
        }
    }

    /// Latent dimensionality `C` of the `C×1×1` bottleneck.
    pub fn latent_channels(&self) -> usize {
        self.width_cap
    }

    pub fn taps(&self) -> (usize, usize) {
        self.tap_range
            .unwrap_or(((self.image_size / 16).max(2), self.image_size / 2))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = self.image_size;
        if s < 8 || !s.is_power_of_two() {
            return Err(ConfigError::invalid(
                "net.image_size",
                format!("must be a power of two >= 8, got {s}"),
            ));
        }
        if self.base_width == 0 {
            return Err(ConfigError::invalid("net.base_width", "must be positive"));
        }
        if self.width_cap < self.base_width {
            return Err(ConfigError::invalid("net.width_cap", "must be >= base_width"));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(ConfigError::invalid("net.leaky_slope", "must lie in [0, 1)"));
        }
        if !(self.bn_eps > 0.0) {
            return Err(ConfigError::invalid("net.bn_eps", "must be positive"));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(ConfigError::invalid("net.bn_momentum", "must lie in (0, 1]"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(ConfigError::invalid("net.init_std", "must be finite and >= 0"));
        }
        let (lo, hi) = self.taps();
        if !lo.is_power_of_two() || !hi.is_power_of_two() || lo < 2 || hi > s / 2 || lo > hi {
            return Err(ConfigError::invalid(
                "net.tap_range",
                format!("({lo}, {hi}) must be powers of two with 2 <= lo <= hi <= {}", s / 2),
            ));
        }
        Ok(())
    }
}

/// Per-layer geometry of the encoder-decoder networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapePlan {
    pub image_size: usize,
    /// Output side of each encoder block: `s/2, s/4, …, 1`.
    pub encoder_sides: Vec<usize>,
    pub encoder_channels: Vec<usize>,
    /// Output side of each decoder block: `2, 4, …, s/2`. A final
    /// deconvolution then produces the `s × s` image.
    pub decoder_sides: Vec<usize>,
    pub decoder_channels: Vec<usize>,
    /// Decoder blocks followed by a residual-block skip in the transfer net.
    pub residual_layers: Vec<usize>,
    /// Decoder blocks whose activations are feature taps, in decoder order.
    pub tap_layers: Vec<usize>,
}

impl ShapePlan {
    pub fn num_taps(&self) -> usize {
        self.tap_layers.len()
    }

    pub fn tap_sides(&self) -> Vec<usize> {
        self.tap_layers.iter().map(|j| self.decoder_sides[*j]).collect()
    }

    pub fn latent_channels(&self) -> usize {
        *self.encoder_channels.last().expect("at least one encoder block")
    }

    /// Index of the encoder feature with the same side as decoder block `j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.encoder_sides.len() - 2 - j
    }

    pub fn skip_kinds(&self, mode: SkipMode) -> Vec<SkipKind> {
        self.decoder_sides
            .iter()
            .map(|side| match mode {
                SkipMode::None => SkipKind::None,
                SkipMode::UnetConcat => SkipKind::Concat,
                SkipMode::Aegg if RESIDUAL_SIDES.contains(side) => SkipKind::Residual,
                SkipMode::Aegg => SkipKind::Concat,
            })
            .collect()
    }

    /// Input channels of each decoder block, then of the final deconvolution.
    pub fn decoder_in_channels(&self, mode: SkipMode) -> Vec<usize> {
        let kinds = self.skip_kinds(mode);
        let mut ins = vec![self.latent_channels()];
        for (j, kind) in kinds.iter().enumerate() {
            let c = self.decoder_channels[j];
            ins.push(match kind {
                SkipKind::Concat => c + self.encoder_channels[self.mirror(j)],
                SkipKind::None | SkipKind::Residual => c,
            });
        }
        ins
    }
}

pub fn shape_plan(cfg: &NetConfig) -> Result<ShapePlan, ConfigError> {
    cfg.validate()?;
    let s = cfg.image_size;
    let m = s.trailing_zeros() as usize;
    let encoder_sides: Vec<usize> = (1..=m).map(|i| s >> i).collect();
    let encoder_channels: Vec<usize> = (0..m)
        .map(|i| {
            if i + 1 == m {
                cfg.latent_channels()
            } else {
                (cfg.base_width << i).min(cfg.width_cap)
            }
        })
        .collect();
    let decoder_sides: Vec<usize> = (1..m).map(|j| 1 << j).collect();
    let decoder_channels: Vec<usize> = (0..m - 1).map(|j| encoder_channels[m - 2 - j]).collect();
    let residual_layers = decoder_sides
        .iter()
        .enumerate()
        .filter(|(_, side)| RESIDUAL_SIDES.contains(side))
        .map(|(j, _)| j)
        .collect();
    let (lo, hi) = cfg.taps();
    let tap_layers = decoder_sides
        .iter()
        .enumerate()
        .filter(|(_, side)| (lo..=hi).contains(*side))
        .map(|(j, _)| j)
        .collect();
    Ok(ShapePlan {
        image_size: s,
        encoder_sides,
        encoder_channels,
        decoder_sides,
        decoder_channels,
        residual_layers,
        tap_layers,
    })
}
