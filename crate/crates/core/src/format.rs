//! Discrete transmission formats.
//!
//! A format `q ∈ {0..Q}` selects a modulation/coding pair with spectral
//! efficiency `η_q = q·η̃`; `q = 0` means no transmission. Achieving `η_q`
//! requires `SNR(q) = 2^{η_q} − 1`.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// The format alphabet `{0..Q}` and its per-format target SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatSet {
    eta_step: f64,
    /// `SNR(q)` for `q = 0..=Q`, precomputed.
    snr: Vec<f64>,
}

impl FormatSet {
    /// `q_max ≥ 1` nonzero formats with efficiencies `q·eta_step`.
    pub fn new(q_max: usize, eta_step: f64) -> Result<FormatSet> {
        if q_max == 0 {
            return Err(Error::InvalidConfig("at least one nonzero format required".into()));
        }
        if !(eta_step.is_finite() && eta_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta_step must be finite and positive, got {eta_step}"
            )));
        }
        let snr = (0..=q_max)
            .map(|q| libm::exp2(q as f64 * eta_step) - 1.0)
            .collect();
        Ok(FormatSet { eta_step, snr })
    }

    /// Largest format index `Q`.
    #[inline]
    pub fn q_max(&self) -> usize {
        self.snr.len() - 1
    }

    /// Alphabet size `Q + 1`.
    #[inline]
    pub fn num_formats(&self) -> usize {
        self.snr.len()
    }

    #[inline]
    pub fn eta_step(&self) -> f64 {
        self.eta_step
    }

    /// Spectral efficiency `η_q` in b/s/Hz.
    #[inline]
    pub fn efficiency(&self, q: usize) -> f64 {
        debug_assert!(q < self.snr.len());
        q as f64 * self.eta_step
    }

    /// Target SNR `2^{η_q} − 1`; `0` for `q = 0`.
    pub fn snr_required(&self, q: usize) -> Result<f64> {
        self.snr
            .get(q)
            .copied()
            .ok_or(Error::FormatOutOfRange { q, max: self.q_max() })
    }

    /// Unchecked variant for hot paths where `q` is valid by construction.
    #[inline]
    pub(crate) fn snr(&self, q: usize) -> f64 {
        self.snr[q]
    }

    /// The format whose efficiency equals `eta` (within 1e-9 relative), if any.
    pub fn format_for_efficiency(&self, eta: f64) -> Option<usize> {
        let ratio = eta / self.eta_step;
        let q = libm::round(ratio);
        if (ratio - q).abs() <= 1e-9 * ratio.abs().max(1.0) && q >= 0.0 && (q as usize) <= self.q_max()
        {
            Some(q as usize)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_matches_definition() {
        let fs = FormatSet::new(4, 1.0).unwrap();
        assert_eq!(fs.snr_required(0).unwrap(), 0.0);
        assert_eq!(fs.snr_required(1).unwrap(), 1.0);
        assert_eq!(fs.snr_required(2).unwrap(), 3.0);
        assert_eq!(fs.snr_required(3).unwrap(), 7.0);
        assert_eq!(fs.snr_required(4).unwrap(), 15.0);
    }

    #[test]
    fn snr_out_of_range_is_an_error() {
        let fs = FormatSet::new(2, 1.0).unwrap();
        assert_eq!(
            fs.snr_required(3),
            Err(Error::FormatOutOfRange { q: 3, max: 2 })
        );
    }

    #[test]
    fn efficiencies_and_snrs_are_strictly_increasing() {
        let fs = FormatSet::new(6, 0.5).unwrap();
        for q in 1..=fs.q_max() {
            assert!(fs.efficiency(q) > fs.efficiency(q - 1));
            assert!(fs.snr_required(q).unwrap() > fs.snr_required(q - 1).unwrap());
        }
        assert_eq!(fs.efficiency(0), 0.0);
    }

    #[test]
    fn format_lookup_by_efficiency() {
        let fs = FormatSet::new(4, 1.0).unwrap();
        assert_eq!(fs.format_for_efficiency(1.0), Some(1));
        assert_eq!(fs.format_for_efficiency(3.0), Some(3));
        assert_eq!(fs.format_for_efficiency(1.5), None);
        assert_eq!(fs.format_for_efficiency(5.0), None);
    }

    #[test]
    fn degenerate_configs_rejected() {
        assert!(FormatSet::new(0, 1.0).is_err());
        assert!(FormatSet::new(4, 0.0).is_err());
        assert!(FormatSet::new(4, -1.0).is_err());
        assert!(FormatSet::new(4, f64::INFINITY).is_err());
    }
}
