//! Named kernel presets and the kernel file format.
//!
//! Presets carry the grid-searched scale/shape/moment settings. The
//! original tuning recorded integer cutoff indices in a library-specific
//! unit that is not documented anywhere; those integers are kept
//! verbatim in the preset notes but are not interpreted. All presets
//! realize their cutoff at `0.6 * pi` radians per sample, the one value
//! with a stated kernel shape to validate against.

use super::{synthesize, FirKernel, GgParams, HvsKernelSpec, KernelError};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default number of polynomial terms (derivative orders 2, 4, 6).
pub const DEFAULT_TERMS: usize = 3;
/// Default FIR support.
pub const DEFAULT_TAP_LENGTH: usize = 25;
/// Cutoff used by every preset, as a fraction of pi.
pub const PRESET_CUTOFF_OVER_PI: f64 = 0.6;

/// Names accepted anywhere a kernel preset is expected.
pub const PRESET_NAMES: [&str; 4] = ["natural-1", "natural-2", "synthetic-1", "synthetic-2"];

/// One synthesized kernel plus its recipe and provenance note.
#[derive(Debug, Clone)]
pub struct PresetKernel {
    pub spec: HvsKernelSpec,
    pub kernel: FirKernel,
    pub note: String,
}

/// Expand a preset name into its kernels (two-kernel presets list the
/// primary kernel first). Returns `None` for unknown names.
pub fn build_preset(name: &str) -> Option<Result<Vec<PresetKernel>, KernelError>> {
    let recipes: Vec<(f64, f64, u32, &str)> = match name {
        "natural-1" => vec![(1.7, 1.4, 12, "legacy cutoff index 13")],
        "natural-2" => vec![
            (1.7, 1.4, 12, "legacy cutoff index 13"),
            (0.7, 0.8, 4, "legacy cutoff index 26"),
        ],
        "synthetic-1" => vec![(0.7, 0.8, 20, "legacy cutoff index 19")],
        "synthetic-2" => vec![
            (0.7, 0.8, 20, "legacy cutoff index 19"),
            (0.7, 0.9, 12, "legacy cutoff index 20"),
        ],
        _ => return None,
    };
    Some(
        recipes
            .into_iter()
            .map(|(alpha, beta, moment, legacy)| {
                let spec = HvsKernelSpec::new(
                    GgParams::new(alpha, beta)?,
                    PRESET_CUTOFF_OVER_PI * std::f64::consts::PI,
                    DEFAULT_TERMS,
                    DEFAULT_TAP_LENGTH,
                    moment,
                )?;
                let kernel = synthesize(&spec)?;
                let note = format!(
                    "{name}: alpha={alpha} beta={beta} moment={moment}; {legacy} \
                     (unit unspecified, not interpreted), realized cutoff 0.6*pi; \
                     score increases with blur (lower score = sharper)"
                );
                Ok(PresetKernel { spec, kernel, note })
            })
            .collect(),
    )
}

/// On-disk kernel representation. Taps are serialized center-symmetric,
/// full length.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelFile {
    pub alpha: f64,
    pub beta: f64,
    pub cutoff_over_pi: f64,
    pub terms: usize,
    pub tap_length: usize,
    pub moment: u32,
    pub taps: Vec<f64>,
    pub norm_gain: f64,
    pub preset_note: String,
}

impl KernelFile {
    pub fn from_parts(spec: &HvsKernelSpec, kernel: &FirKernel, note: &str) -> Self {
        Self {
            alpha: spec.gg.alpha,
            beta: spec.gg.beta,
            cutoff_over_pi: spec.cutoff / std::f64::consts::PI,
            terms: spec.terms,
            tap_length: spec.tap_length,
            moment: spec.moment,
            taps: kernel.taps.clone(),
            norm_gain: kernel.norm_gain,
            preset_note: note.to_string(),
        }
    }

    pub fn kernel(&self) -> FirKernel {
        FirKernel { taps: self.taps.clone(), norm_gain: self.norm_gain }
    }

    pub fn spec(&self) -> Result<HvsKernelSpec, KernelError> {
        HvsKernelSpec::new(
            GgParams::new(self.alpha, self.beta)?,
            self.cutoff_over_pi * std::f64::consts::PI,
            self.terms,
            self.tap_length,
            self.moment,
        )
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("kernel file serializes");
        std::fs::write(path, json)
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let data = std::fs::read_to_string(path)?;
        serde_json::from_str(&data).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESET_NAMES {
            let kernels = build_preset(name).unwrap().unwrap();
            let expect = if name.ends_with("-2") { 2 } else { 1 };
            assert_eq!(kernels.len(), expect, "{name}");
            for pk in &kernels {
                assert_eq!(pk.kernel.len(), DEFAULT_TAP_LENGTH);
                let dc: f64 = pk.kernel.taps.iter().sum();
                assert!(dc.abs() <= 1e-10);
            }
        }
        assert!(build_preset("bogus").is_none());
    }

    #[test]
    fn preset_moments_match_recipes() {
        let n2 = build_preset("natural-2").unwrap().unwrap();
        assert_eq!(n2[0].spec.moment, 12);
        assert_eq!(n2[1].spec.moment, 4);
        let s2 = build_preset("synthetic-2").unwrap().unwrap();
        assert_eq!(s2[0].spec.moment, 20);
        assert_eq!(s2[1].spec.moment, 12);
    }

    #[test]
    fn kernel_file_round_trip() {
        let pk = &build_preset("natural-1").unwrap().unwrap()[0];
        let file = KernelFile::from_parts(&pk.spec, &pk.kernel, &pk.note);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        file.save(&path).unwrap();
        let loaded = KernelFile::load(&path).unwrap();
        assert_eq!(file, loaded);
        for (a, b) in loaded.kernel().taps.iter().zip(&pk.kernel.taps) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
