//! Statistical channel model: hexagonal-cell user placement, distance path
//! loss and frequency-selective Rayleigh fading with an exponential power
//! delay profile.
//!
//! Powers are relative: path loss is `(d/R)^{-α}` so the cell-edge gain is
//! one, and fading is normalized so the expected subchannel gain equals the
//! path loss. Everything is a pure function of an explicit random stream,
//! so identically seeded streams reproduce identical realizations.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::format::FormatSet;
use crate::problem::ProblemInstance;
use crate::{Error, Result};

/// Cell geometry and propagation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Cell circumradius R in meters.
    pub cell_radius_m: f64,
    /// Total uplink bandwidth W in Hz.
    pub bandwidth_hz: f64,
    /// Number of subchannels F the bandwidth is split into.
    pub num_subchannels: usize,
    /// Path loss exponent α.
    pub path_loss_exponent: f64,
    /// RMS delay spread σ_τ in seconds.
    pub delay_spread_s: f64,
    /// Sample time T_c in seconds (1/W for critically sampled taps).
    pub sample_time_s: f64,
    /// Noise power spectral density N0 in relative units per Hz.
    pub noise_psd: f64,
    /// Users are rejected closer to the base station than this, keeping the
    /// path-loss gain bounded.
    pub min_user_distance_m: f64,
}

impl Default for ChannelParams {
    fn default() -> ChannelParams {
        ChannelParams {
            cell_radius_m: 500.0,
            bandwidth_hz: 5e6,
            num_subchannels: 32,
            path_loss_exponent: 4.0,
            delay_spread_s: 0.5e-6,
            sample_time_s: 200e-9,
            // With the default W and F this makes the per-subchannel noise
            // power B·N0 equal one relative power unit.
            noise_psd: 6.4e-6,
            min_user_distance_m: 10.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("path_loss_exponent", self.path_loss_exponent),
            ("delay_spread_s", self.delay_spread_s),
            ("sample_time_s", self.sample_time_s),
            ("noise_psd", self.noise_psd),
            ("min_user_distance_m", self.min_user_distance_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and positive, got {value}")));
            }
        }
        if self.num_subchannels == 0 {
            return Err(Error::InvalidConfig("num_subchannels must be >= 1".into()));
        }
        if self.min_user_distance_m >= self.cell_radius_m {
            return Err(Error::InvalidConfig("min_user_distance_m must lie inside the cell radius".into()));
        }
        if self.num_taps() < 1 {
            return Err(Error::InvalidConfig(format!(
                "delay spread too small: floor(3·σ_τ/T_c) = {} taps",
                self.num_taps()
            )));
        }
        Ok(())
    }

    /// Normalized delay spread σ_n = σ_τ / T_c.
    #[inline]
    pub fn normalized_delay_spread(&self) -> f64 {
        self.delay_spread_s / self.sample_time_s
    }

    /// Number of channel taps, ⌊3·σ_n⌋.
    #[inline]
    pub fn num_taps(&self) -> usize {
        libm::floor(3.0 * self.normalized_delay_spread()) as usize
    }

    /// Subchannel bandwidth B = W/F.
    #[inline]
    pub fn subchannel_bandwidth(&self) -> f64 {
        self.bandwidth_hz / self.num_subchannels as f64
    }
}

/// Per-user per-subchannel power gains drawn from the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_users: usize,
    pub num_subchannels: usize,
    /// Row-major N×F gains |H_{n,f}|², path loss included.
    pub gains: Vec<f64>,
}

fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // Box-Muller; 1-u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let radius = libm::sqrt(-2.0 * libm::log(u1));
    let angle = 2.0 * core::f64::consts::PI * u2;
    (radius * libm::cos(angle), radius * libm::sin(angle))
}

/// Uniform position in the hexagonal cell (circumradius R, vertices on the
/// x-axis), at least `min_user_distance_m` from the base station at the
/// origin. Rejection sampling; terminates with probability one.
pub fn sample_position<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> (f64, f64) {
    let radius = params.cell_radius_m;
    let half_height = radius * libm::sqrt(3.0) / 2.0;
    loop {
        let x = (2.0 * rng.random::<f64>() - 1.0) * radius;
        let y = (2.0 * rng.random::<f64>() - 1.0) * half_height;
        let inside = y.abs() <= half_height
            && libm::sqrt(3.0) * x.abs() + y.abs() <= libm::sqrt(3.0) * radius;
        if !inside {
            continue;
        }
        let distance = libm::hypot(x, y);
        if distance >= params.min_user_distance_m {
            return (x, y);
        }
    }
}

/// Relative path-loss gain `(d/R)^{-α}`; one at the cell edge.
pub fn path_loss_gain(params: &ChannelParams, distance_m: f64) -> f64 {
    libm::pow(distance_m / params.cell_radius_m, -params.path_loss_exponent)
}

/// Draws one fading realization and returns the squared magnitude of its
/// frequency response at the F subchannel centers. Taps are independent
/// circularly-symmetric complex Gaussians with variances
/// `σ_j² = σ_h²·exp(−j/σ_n)`, `j = 1..N_j`, scaled so the variances sum to
/// one; the expected gain per subchannel is therefore one.
pub fn draw_fading_profile<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Vec<f64> {
    let num_taps = params.num_taps();
    let sigma_n = params.normalized_delay_spread();
    let mut variances = Vec::with_capacity(num_taps);
    let mut total = 0.0;
    for j in 1..=num_taps {
        let v = libm::exp(-(j as f64) / sigma_n);
        variances.push(v);
        total += v;
    }
    // σ_h² = 1/Σ exp(−j/σ_n) normalizes the average channel power.
    let mut taps = Vec::with_capacity(num_taps);
    for v in &variances {
        let std = libm::sqrt(v / total / 2.0);
        let (re, im) = standard_normal_pair(rng);
        taps.push((re * std, im * std));
    }

    let f_count = params.num_subchannels;
    let mut profile = Vec::with_capacity(f_count);
    for k in 0..f_count {
        // Subchannel center at normalized frequency (k + 1/2)/F.
        let nu = (k as f64 + 0.5) / f_count as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &(tr, ti)) in taps.iter().enumerate() {
            let theta = 2.0 * core::f64::consts::PI * nu * j as f64;
            let (c, s) = (libm::cos(theta), libm::sin(theta));
            // (tr + i·ti) · e^{−iθ}
            re += tr * c + ti * s;
            im += ti * c - tr * s;
        }
        profile.push(re * re + im * im);
    }
    profile
}

/// Tap variances normalized to unit sum, exposed for the normalization
/// property check.
pub fn tap_variances(params: &ChannelParams) -> Vec<f64> {
    let num_taps = params.num_taps();
    let sigma_n = params.normalized_delay_spread();
    let raw: Vec<f64> = (1..=num_taps).map(|j| libm::exp(-(j as f64) / sigma_n)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Draws one user's per-subchannel gains: position, path loss, fading.
pub fn draw_user_gain_profile<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Vec<f64> {
    let (x, y) = sample_position(params, rng);
    let pl = path_loss_gain(params, libm::hypot(x, y));
    draw_fading_profile(params, rng).into_iter().map(|g| pl * g).collect()
}

/// Draws a full N-user realization from a seed-derived stream.
pub fn draw_realization(params: &ChannelParams, num_users: usize, seed: u64) -> Result<ChannelRealization> {
    params.validate()?;
    if num_users == 0 {
        return Err(Error::InvalidConfig("num_users must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = Vec::with_capacity(num_users * params.num_subchannels);
    for _ in 0..num_users {
        gains.extend(draw_user_gain_profile(params, &mut rng));
    }
    Ok(ChannelRealization { num_users, num_subchannels: params.num_subchannels, gains })
}

/// Assembles a [`ProblemInstance`] from a fresh realization: pure function
/// of `(params, arguments, seed)`.
pub fn generate_instance(
    params: &ChannelParams,
    num_users: usize,
    formats: FormatSet,
    rate_demands: Vec<f64>,
    power_caps: Vec<f64>,
    seed: u64,
) -> Result<ProblemInstance> {
    if rate_demands.len() != num_users || power_caps.len() != num_users {
        return Err(Error::InvalidConfig(format!(
            "expected {num_users} rate demands and power caps, got {} and {}",
            rate_demands.len(),
            power_caps.len()
        )));
    }
    let realization = draw_realization(params, num_users, seed)?;
    ProblemInstance::new(
        num_users,
        params.num_subchannels,
        params.subchannel_bandwidth(),
        params.noise_psd,
        realization.gains,
        rate_demands,
        power_caps,
        formats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_params_give_seven_taps() {
        // σ_τ = 0.5 µs, T_c = 200 ns → σ_n = 2.5, N_j = 7.
        let params = ChannelParams::default();
        assert!((params.normalized_delay_spread() - 2.5).abs() < 1e-12);
        assert_eq!(params.num_taps(), 7);
        params.validate().unwrap();
    }

    #[test]
    fn tap_variances_sum_to_one() {
        for sigma in [0.4, 1.0, 2.5, 10.0] {
            let params = ChannelParams {
                delay_spread_s: sigma * 200e-9,
                ..ChannelParams::default()
            };
            if params.num_taps() < 1 {
                continue;
            }
            let sum: f64 = tap_variances(&params).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "σ_n = {sigma}: sum = {sum}");
        }
    }

    #[test]
    fn single_tap_channel_is_flat() {
        // Tiny delay spread forces N_j = 1: all subchannel gains equal.
        let params = ChannelParams {
            delay_spread_s: 0.4 * 200e-9,
            ..ChannelParams::default()
        };
        assert_eq!(params.num_taps(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let profile = draw_fading_profile(&params, &mut rng);
        let first = profile[0];
        for &g in &profile {
            assert!((g - first).abs() <= 1e-12 * first.max(1.0));
        }
    }

    #[test]
    fn identical_seeds_reproduce_profiles() {
        let params = ChannelParams::default();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(
            draw_user_gain_profile(&params, &mut a),
            draw_user_gain_profile(&params, &mut b)
        );
    }

    #[test]
    fn instances_are_pure_functions_of_seed() {
        let params = ChannelParams::default();
        let fs = FormatSet::new(4, 1.0).unwrap();
        let make = || {
            generate_instance(
                &params,
                4,
                fs.clone(),
                vec![1e6; 4],
                vec![f64::INFINITY; 4],
                99,
            )
            .unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn generated_instance_shape_and_positivity() {
        let params = ChannelParams::default();
        let fs = FormatSet::new(4, 1.0).unwrap();
        let inst = generate_instance(
            &params,
            4,
            fs,
            vec![1e6; 4],
            vec![f64::INFINITY; 4],
            3,
        )
        .unwrap();
        assert_eq!(inst.num_users(), 4);
        assert_eq!(inst.num_subchannels(), 32);
        for n in 0..4 {
            for f in 0..32 {
                assert!(inst.gain(n, f) > 0.0 && inst.gain(n, f).is_finite());
            }
        }
    }

    #[test]
    fn zero_users_rejected() {
        let params = ChannelParams::default();
        let fs = FormatSet::new(4, 1.0).unwrap();
        assert!(generate_instance(&params, 0, fs, vec![], vec![], 1).is_err());
    }

    #[test]
    fn positions_respect_geometry() {
        let params = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let (x, y) = sample_position(&params, &mut rng);
            let d = libm::hypot(x, y);
            assert!(d >= params.min_user_distance_m);
            assert!(d <= params.cell_radius_m + 1e-9);
        }
    }

    #[test]
    fn path_loss_reference_points() {
        let params = ChannelParams::default();
        assert!((path_loss_gain(&params, 500.0) - 1.0).abs() < 1e-12);
        assert!((path_loss_gain(&params, 250.0) - 16.0).abs() < 1e-9);
    }

    #[test]
    fn mean_subchannel_gain_matches_path_loss() {
        // Law of large numbers at a fixed position: the empirical mean of
        // the per-subchannel gain approaches the path-loss gain.
        let params = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pl = path_loss_gain(&params, 130.0);
        let trials = 20_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let profile = draw_fading_profile(&params, &mut rng);
            let mean: f64 = profile.iter().sum::<f64>() / profile.len() as f64;
            acc += pl * mean;
        }
        let empirical = acc / trials as f64;
        assert!(
            (empirical - pl).abs() <= 0.03 * pl,
            "empirical {empirical} vs path loss {pl}"
        );
    }
}
