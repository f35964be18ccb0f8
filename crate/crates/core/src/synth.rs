//! Seeded generators for synthetic trajectories and flow fields.
//!
//! Control trajectories of a tracked head are smooth: motion obeys physics,
//! so a sum of low-frequency sinusoids per dimension is a good stand-in for
//! clean data. [`generate`] produces such a clean sequence together with a
//! degraded copy — per-entry Gaussian noise plus sparse large spikes — and a
//! manifest of where the spikes landed. This gives controlled ground truth
//! for stabilizer benchmarks.
//!
//! # Determinism
//!
//! Every random draw comes from ChaCha8 seeded with [`TrajectorySpec::seed`];
//! there is no hidden entropy and results are identical across platforms
//! and runs. Streams are split per dimension so dimensions are independent:
//!
//! * stream 0 — sinusoid parameters, when the base motion is seeded
//!   (per dimension, per component: amplitude, frequency, phase);
//! * stream `1 + d` — dimension `d`'s noise (one Gaussian per frame,
//!   ziggurat sampling), then its spike pattern (one uniform per frame
//!   against `outlier_rate`, plus one uniform per hit for the sign).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FlowField;
use crate::stabilizer::ControlSequence;
use ndarray::Array2;

/// Upper bound on angular frequency (radians per frame). Keeps the base
/// motion smooth relative to the frame rate: at most one oscillation per
/// 16 frames.
pub const MAX_OMEGA: f64 = PI / 8.0;

/// One sinusoidal component `amplitude · sin(omega · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    /// Peak amplitude, non-negative.
    pub amplitude: f64,
    /// Angular frequency in radians per frame, in `[0, π/8]`.
    pub omega: f64,
    /// Phase offset in radians.
    pub phase: f64,
}

/// How the clean base motion is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMotion {
    /// One explicit component list per dimension.
    Explicit(Vec<Vec<Sinusoid>>),
    /// Components drawn from stream 0 of [`TrajectorySpec::seed`].
    Seeded {
        /// Sinusoids per dimension.
        components_per_dim: usize,
        /// Amplitude range `[lo, hi]`, sampled uniformly.
        amplitude_range: (f64, f64),
        /// Angular-frequency range `[lo, hi] ⊆ [0, π/8]`, sampled uniformly.
        omega_range: (f64, f64),
    },
}

/// Full description of a synthetic trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    /// Number of frames `n ≥ 8`.
    pub frames: usize,
    /// Number of control dimensions `D ≥ 1`.
    pub dims: usize,
    /// PRNG seed; all randomness derives from it.
    pub seed: u64,
    /// Clean base motion.
    pub base: BaseMotion,
    /// Standard deviation of the per-entry Gaussian noise, `≥ 0`.
    pub noise_sigma: f64,
    /// Per-entry spike probability, in `[0, 1]`.
    pub outlier_rate: f64,
    /// Absolute size of each spike; the sign is drawn per spike.
    pub outlier_magnitude: f64,
}

/// One spike recorded in the manifest: `noisy[frame, dim] += delta` on top
/// of the Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    /// Frame index the spike landed on.
    pub frame: usize,
    /// Dimension the spike landed on.
    pub dim: usize,
    /// Signed offset that was added.
    pub delta: f64,
}

/// Output of [`generate`]: ground truth, degraded copy, spike manifest.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Noise-free base motion.
    pub clean: ControlSequence,
    /// Clean plus Gaussian noise plus spikes.
    pub noisy: ControlSequence,
    /// Where the spikes landed, sorted by frame then dimension.
    pub spikes: Vec<Spike>,
}

/// The benchmark preset used across tests and docs: 120 frames, 106
/// dimensions, two sinusoids per dimension with amplitudes in `[0.2, 1.0]`
/// and frequencies in `[π/60, π/12]`, noise σ = 0.1, 2% spikes of
/// magnitude 1.0, seed 42.
pub fn standard_benchmark() -> TrajectorySpec {
    TrajectorySpec {
        frames: 120,
        dims: 106,
        seed: 42,
        base: BaseMotion::Seeded {
            components_per_dim: 2,
            amplitude_range: (0.2, 1.0),
            omega_range: (PI / 60.0, PI / 12.0),
        },
        noise_sigma: 0.1,
        outlier_rate: 0.02,
        outlier_magnitude: 1.0,
    }
}

impl TrajectorySpec {
    /// Validates every field; violations are invalid-config errors.
    pub fn validate(&self) -> Result<()> {
        if self.frames < 8 {
            return Err(Error::config(format!(
                "trajectory needs at least 8 frames, got {}",
                self.frames
            )));
        }
        if self.dims < 1 {
            return Err(Error::config("trajectory needs at least 1 dimension"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::config(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !self.outlier_rate.is_finite() || !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(Error::config(format!(
                "outlier_rate must lie in [0, 1], got {}",
                self.outlier_rate
            )));
        }
        if !self.outlier_magnitude.is_finite() || self.outlier_magnitude < 0.0 {
            return Err(Error::config(format!(
                "outlier_magnitude must be finite and non-negative, got {}",
                self.outlier_magnitude
            )));
        }
        match &self.base {
            BaseMotion::Explicit(dims) => {
                if dims.len() != self.dims {
                    return Err(Error::config(format!(
                        "explicit base lists {} dimensions, spec says {}",
                        dims.len(),
                        self.dims
                    )));
                }
                for (d, components) in dims.iter().enumerate() {
                    for s in components {
                        if !s.amplitude.is_finite() || s.amplitude < 0.0 {
                            return Err(Error::config(format!(
                                "dimension {d}: amplitude must be finite and non-negative, got {}",
                                s.amplitude
                            )));
                        }
                        if !s.omega.is_finite() || !(0.0..=MAX_OMEGA).contains(&s.omega) {
                            return Err(Error::config(format!(
                                "dimension {d}: frequency must lie in [0, π/8], got {}",
                                s.omega
                            )));
                        }
                        if !s.phase.is_finite() {
                            return Err(Error::config(format!(
                                "dimension {d}: phase must be finite, got {}",
                                s.phase
                            )));
                        }
                    }
                }
            }
            BaseMotion::Seeded {
                components_per_dim,
                amplitude_range,
                omega_range,
            } => {
                if *components_per_dim < 1 {
                    return Err(Error::config(
                        "seeded base needs at least 1 component per dimension",
                    ));
                }
                let (alo, ahi) = *amplitude_range;
                if !alo.is_finite() || !ahi.is_finite() || alo < 0.0 || alo > ahi {
                    return Err(Error::config(format!(
                        "amplitude range must satisfy 0 ≤ lo ≤ hi, got [{alo}, {ahi}]"
                    )));
                }
                let (wlo, whi) = *omega_range;
                if !wlo.is_finite() || !whi.is_finite() || wlo < 0.0 || wlo > whi || whi > MAX_OMEGA
                {
                    return Err(Error::config(format!(
                        "frequency range must satisfy 0 ≤ lo ≤ hi ≤ π/8, got [{wlo}, {whi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The per-dimension sinusoid lists this spec resolves to. Explicit
    /// bases are returned as-is; seeded bases are drawn from stream 0.
    pub fn resolved_components(&self) -> Result<Vec<Vec<Sinusoid>>> {
        self.validate()?;
        match &self.base {
            BaseMotion::Explicit(dims) => Ok(dims.clone()),
            BaseMotion::Seeded {
                components_per_dim,
                amplitude_range,
                omega_range,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(0);
                let uniform =
                    |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
                let mut dims = Vec::with_capacity(self.dims);
                for _ in 0..self.dims {
                    let mut components = Vec::with_capacity(*components_per_dim);
                    for _ in 0..*components_per_dim {
                        components.push(Sinusoid {
                            amplitude: uniform(&mut rng, amplitude_range.0, amplitude_range.1),
                            omega: uniform(&mut rng, omega_range.0, omega_range.1),
                            phase: uniform(&mut rng, 0.0, 2.0 * PI),
                        });
                    }
                    dims.push(components);
                }
                Ok(dims)
            }
        }
    }
}

/// Generates the clean/noisy trajectory pair described by `spec`.
///
/// See the [module docs](self) for the exact stream layout; equal specs
/// produce bitwise-equal outputs. With `noise_sigma = 0` and
/// `outlier_rate = 0` the noisy copy equals the clean one bit for bit.
pub fn generate(spec: &TrajectorySpec) -> Result<Trajectory> {
    spec.validate()?;
    let components = spec.resolved_components()?;
    let (n, d) = (spec.frames, spec.dims);

    let mut clean = Array2::zeros((n, d));
    for (i, dim_components) in components.iter().enumerate() {
        for t in 0..n {
            let mut v = 0.0;
            for s in dim_components {
                v += s.amplitude * (s.omega * t as f64 + s.phase).sin();
            }
            clean[[t, i]] = v;
        }
    }

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::config(format!("invalid noise distribution: {e}")))?;
    let mut noisy = clean.clone();
    let mut spikes = Vec::new();
    for i in 0..d {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1 + i as u64);
        for t in 0..n {
            noisy[[t, i]] += noise.sample(&mut rng);
        }
        for t in 0..n {
            if rng.gen::<f64>() < spec.outlier_rate {
                let sign = if rng.gen::<f64>() < 0.5 { -1.0 } else { 1.0 };
                let delta = sign * spec.outlier_magnitude;
                noisy[[t, i]] += delta;
                spikes.push(Spike {
                    frame: t,
                    dim: i,
                    delta,
                });
            }
        }
    }
    spikes.sort_by_key(|s| (s.frame, s.dim));

    Ok(Trajectory {
        clean: ControlSequence::from_array(clean)?,
        noisy: ControlSequence::from_array(noisy)?,
        spikes,
    })
}

/// Kinds of analytic flow fields [`synth_flow`] can produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowKind {
    /// Zero displacement everywhere.
    Zero,
    /// The same `(u, v)` displacement at every pixel.
    Constant {
        /// Horizontal displacement.
        u: f64,
        /// Vertical displacement.
        v: f64,
    },
    /// Displacement pointing away from the image centre with magnitude
    /// `scale · r` at radius `r`.
    Radial {
        /// Displacement per unit radius.
        scale: f64,
    },
}

/// Produces `count` identical analytic flow fields of the given kind.
///
/// The radial centre sits at `((width−1)/2, (height−1)/2)`. Zero sizes or a
/// zero count are invalid-config errors; non-finite parameters are too.
pub fn synth_flow(
    kind: FlowKind,
    width: usize,
    height: usize,
    count: usize,
) -> Result<Vec<FlowField>> {
    if width == 0 || height == 0 {
        return Err(Error::config(format!(
            "flow dimensions must be positive, got {width}×{height}"
        )));
    }
    if count == 0 {
        return Err(Error::config("flow count must be at least 1"));
    }
    match kind {
        FlowKind::Constant { u, v } if !u.is_finite() || !v.is_finite() => {
            return Err(Error::config(format!(
                "constant flow components must be finite ({u}, {v})"
            )));
        }
        FlowKind::Radial { scale } if !scale.is_finite() => {
            return Err(Error::config(format!(
                "radial flow scale must be finite ({scale})"
            )));
        }
        _ => {}
    }

    let mut u = Array2::zeros((height, width));
    let mut v = Array2::zeros((height, width));
    match kind {
        FlowKind::Zero => {}
        FlowKind::Constant { u: du, v: dv } => {
            u.fill(du);
            v.fill(dv);
        }
        FlowKind::Radial { scale } => {
            let cx = (width as f64 - 1.0) / 2.0;
            let cy = (height as f64 - 1.0) / 2.0;
            for y in 0..height {
                for x in 0..width {
                    u[[y, x]] = scale * (x as f64 - cx);
                    v[[y, x]] = scale * (y as f64 - cy);
                }
            }
        }
    }
    let field = FlowField::new(u, v)?;
    Ok(vec![field; count])
}
