//! Grayscale renderings of fields and intensities.

use std::f64::consts::PI;

use holoforge_core::io::pgm::Pgm;
use holoforge_core::{ComplexField, RealImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Amplitude,
    Phase,
    Real,
    Imag,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Amplitude, Channel::Phase, Channel::Real, Channel::Imag];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Amplitude => "amplitude",
            Channel::Phase => "phase",
            Channel::Real => "real",
            Channel::Imag => "imag",
        }
    }
}

/// Min-max scale to `0..=max`; a constant image maps to mid-gray.
fn scale(values: &[f64], max: f64, mid: f64) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![mid; values.len()];
    }
    values.iter().map(|v| ((v - lo) / (hi - lo) * max).round()).collect()
}

/// Phase `(−π, π]` maps linearly onto `[0, 255]`; the other channels are min-max scaled,
/// and a constant channel renders as 128.
pub fn render_field(field: &ComplexField, channel: Channel) -> Pgm {
    let (width, height) = field.dims();
    let pixels = match channel {
        Channel::Phase => field
            .data()
            .iter()
            .map(|c| ((c.arg() + PI) / (2.0 * PI) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
        _ => {
            let img = match channel {
                Channel::Amplitude => field.amplitude(),
                Channel::Real => field.real(),
                _ => field.imag(),
            };
            scale(img.data(), 255.0, 128.0).into_iter().map(|v| v as u8).collect()
        }
    };
    Pgm::Gray8 { width, height, pixels }
}

/// 16-bit min-max rendering of an intensity image. Returns the image and the `(min, max)`
/// that map to 0 and 65535.
pub fn render_intensity16(image: &RealImage) -> (Pgm, (f64, f64)) {
    let (width, height) = image.dims();
    let pixels = scale(image.data(), 65535.0, 32768.0).into_iter().map(|v| v as u16).collect();
    (Pgm::Gray16 { width, height, pixels }, image.min_max())
}
