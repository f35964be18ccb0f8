//! Catmull–Rom interpolation of scalar time series.
//!
//! A [`CatmullRomSpline`] interpolates a list of `(timestamp, value)` knots
//! with a C¹ piecewise cubic. The curve is parametrized directly by the
//! timestamp (uniform parametrization, tension ½): on an equally spaced knot
//! grid the segment between knots `P₁` and `P₂` is the classic
//!
//! ```text
//! C(u) = ½ · [2P₁ + (−P₀+P₂)u + (2P₀−5P₁+4P₂−P₃)u² + (−P₀+3P₁−3P₂+P₃)u³]
//! ```
//!
//! which evaluates to `(−P₀ + 9P₁ + 9P₂ − P₃)/16` at the segment midpoint.
//! Unequal spacing is handled by the equivalent Hermite form with
//! finite-difference tangents `mᵢ = (Pᵢ₊₁ − Pᵢ₋₁)/(tᵢ₊₁ − tᵢ₋₁)`.
//!
//! Boundary knots get phantom neighbours by linear reflection
//! (`P₋₁ = 2P₀ − P₁` at `t₋₁ = 2t₀ − t₁`, and symmetrically at the far end),
//! which reduces the boundary tangent to the one-sided secant slope. Outside
//! the knot range the curve continues linearly with that boundary slope, so
//! affine data is reproduced everywhere, extrapolation included.
//!
//! Evaluation at a knot timestamp returns the knot value exactly (bit for
//! bit): knots are routed to parameter 0 of their segment, where the Horner
//! form collapses to the stored value.

use crate::error::{Error, Result};

/// How tangents at the first and last knot are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndpointPolicy {
    /// Phantom neighbours mirrored through the boundary knot
    /// (`P₋₁ = 2P₀ − P₁`), making the boundary tangent the one-sided
    /// secant slope.
    #[default]
    LinearReflection,
}

/// A validated list of interpolation knots: strictly increasing timestamps
/// paired with values.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl KnotSeries {
    /// Builds a knot series, validating the interpolation preconditions.
    ///
    /// Fails with an invalid-input error when fewer than two knots are given,
    /// when the lists differ in length, or when the timestamps are not
    /// finite and strictly increasing.
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::input(format!(
                "knot series has {} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::input(format!(
                "knot series needs at least 2 knots, got {}",
                timestamps.len()
            )));
        }
        for (i, &t) in timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::input(format!("timestamp {i} is not finite ({t})")));
            }
            if i > 0 && t <= timestamps[i - 1] {
                return Err(Error::input(format!(
                    "timestamps must be strictly increasing, but t[{}] = {} \
                     does not exceed t[{}] = {}",
                    i,
                    t,
                    i - 1,
                    timestamps[i - 1]
                )));
            }
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::input(format!("knot value {i} is not finite ({v})")));
            }
        }
        Ok(KnotSeries { timestamps, values })
    }

    /// Number of knots.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    /// True when the series holds no knots. Unreachable for validated series,
    /// provided for API completeness.
    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Knot timestamps, strictly increasing.
    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    /// Knot values, parallel to [`KnotSeries::timestamps`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Coefficients of one cubic segment in the local power basis
/// `c₀ + c₁u + c₂u² + c₃u³`, `u ∈ [0, 1)`.
#[derive(Debug, Clone, Copy)]
struct Segment {
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

/// A fitted Catmull–Rom spline over a [`KnotSeries`].
#[derive(Debug, Clone)]
pub struct CatmullRomSpline {
    knots: KnotSeries,
    /// Tangent (dv/dt) at each knot.
    tangents: Vec<f64>,
    /// One cubic per knot interval, in the local power basis.
    segments: Vec<Segment>,
    endpoint_policy: EndpointPolicy,
}

impl CatmullRomSpline {
    /// Fits a spline through the given knots.
    ///
    /// The knot series is already validated, so fitting cannot fail.
    pub fn fit(knots: KnotSeries) -> Self {
        let ts = &knots.timestamps;
        let vs = &knots.values;
        let n = ts.len();

        let mut tangents = Vec::with_capacity(n);
        for i in 0..n {
            let m = if i == 0 {
                // Reflection phantom P₋₁ = 2P₀ − P₁ at t₋₁ = 2t₀ − t₁
                // collapses to the one-sided secant slope.
                (vs[1] - vs[0]) / (ts[1] - ts[0])
            } else if i == n - 1 {
                (vs[n - 1] - vs[n - 2]) / (ts[n - 1] - ts[n - 2])
            } else {
                (vs[i + 1] - vs[i - 1]) / (ts[i + 1] - ts[i - 1])
            };
            tangents.push(m);
        }

        let mut segments = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = ts[i + 1] - ts[i];
            let (v0, v1) = (vs[i], vs[i + 1]);
            let (m0, m1) = (tangents[i], tangents[i + 1]);
            segments.push(Segment {
                c0: v0,
                c1: h * m0,
                c2: 3.0 * (v1 - v0) - h * (2.0 * m0 + m1),
                c3: 2.0 * (v0 - v1) + h * (m0 + m1),
            });
        }

        CatmullRomSpline {
            knots,
            tangents,
            segments,
            endpoint_policy: EndpointPolicy::LinearReflection,
        }
    }

    /// Validates and fits in one step; convenience over
    /// [`KnotSeries::new`] + [`CatmullRomSpline::fit`].
    pub fn from_points(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::fit(KnotSeries::new(timestamps, values)?))
    }

    /// The knots this spline interpolates.
    pub fn knots(&self) -> &KnotSeries {
        &self.knots
    }

    /// Tangent (dv/dt) at each knot.
    pub fn tangents(&self) -> &[f64] {
        &self.tangents
    }

    /// Endpoint phantom policy used during fitting.
    pub fn endpoint_policy(&self) -> EndpointPolicy {
        self.endpoint_policy
    }

    /// Evaluates the spline at `t`.
    ///
    /// Inside the knot range this is the piecewise cubic; outside it is the
    /// linear continuation with the one-sided boundary slope. Knot timestamps
    /// reproduce their values exactly. A non-finite `t` is an invalid-input
    /// error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::input(format!(
                "evaluation parameter is not finite ({t})"
            )));
        }
        Ok(self.eval_finite(t))
    }

    /// Evaluation core; `t` must be finite.
    pub(crate) fn eval_finite(&self, t: f64) -> f64 {
        let ts = self.knots.timestamps();
        let vs = self.knots.values();
        let n = ts.len();

        if t <= ts[0] {
            // Exact at the first knot; linear continuation below it.
            if t == ts[0] {
                return vs[0];
            }
            return vs[0] + self.tangents[0] * (t - ts[0]);
        }
        if t >= ts[n - 1] {
            if t == ts[n - 1] {
                return vs[n - 1];
            }
            return vs[n - 1] + self.tangents[n - 1] * (t - ts[n - 1]);
        }

        // ts[i] <= t < ts[i+1]; at u = 0 the Horner form returns vs[i] exactly.
        let i = ts.partition_point(|&x| x <= t) - 1;
        let seg = &self.segments[i];
        let u = (t - ts[i]) / (ts[i + 1] - ts[i]);
        seg.c0 + u * (seg.c1 + u * (seg.c2 + u * seg.c3))
    }

    /// Mean squared discrete second difference of spline samples: a
    /// smoothness score for the curve restricted to `sample_ts`.
    ///
    /// With samples `s₀ … s_{k−1}` the energy is
    /// `mean over i of (sᵢ₊₁ − 2sᵢ + sᵢ₋₁)²`. Fewer than 3 samples is an
    /// invalid-input error; a non-finite sample timestamp is reported by
    /// [`CatmullRomSpline::eval`].
    pub fn eval_second_difference_energy(&self, sample_ts: &[f64]) -> Result<f64> {
        if sample_ts.len() < 3 {
            return Err(Error::input(format!(
                "second-difference energy needs at least 3 samples, got {}",
                sample_ts.len()
            )));
        }
        let samples: Vec<f64> = sample_ts
            .iter()
            .map(|&t| self.eval(t))
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        for w in samples.windows(3) {
            let second = w[2] - 2.0 * w[1] + w[0];
            acc += second * second;
        }
        Ok(acc / (samples.len() - 2) as f64)
    }
}
