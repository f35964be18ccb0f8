//! Ensemble-spline stabilization of control sequences.
//!
//! A [`ControlSequence`] holds one control vector per frame: `n` rows
//! (timestamps `0 … n−1`) by `D` dimensions. Head-model controls typically
//! use `D = 106` (100 expression coefficients plus 6 rotation parameters),
//! but every routine here is generic over `D`.
//!
//! [`stabilize`] smooths the sequence dimension by dimension:
//!
//! 1. **Split** the sequence into `m` phase-shifted subsequences;
//!    subsequence `j` keeps the frames at timestamps `j, m+j, 2m+j, …`
//!    (the first `⌊n/m⌋` of them, so every subsequence has equal length).
//! 2. **Fit** one Catmull–Rom spline per subsequence and dimension.
//! 3. Per timestamp `t`, **evaluate** all `m` splines and compute, for each
//!    estimate, the summed absolute distance to all the others
//!    ([`ensemble_distance`]).
//! 4. **Select** the `⌊inlier_fraction·m⌋` estimates (at least one) with the
//!    smallest distances — ties broken toward lower subsequence index — and
//!    output their mean ([`select_and_average`]).
//!
//! A frame corrupted by an estimation glitch lands in exactly one
//! subsequence; the other splines bridge over it, the corrupted spline
//! disagrees with the consensus, and the selection step drops it. `m` is the
//! smoothing knob: larger `m` means sparser knots per spline and a smoother
//! result, at the cost of following genuine fast motion less closely.
//!
//! [`oracle_stabilize`] recomputes the same pipeline with no shared
//! precomputation (splines are re-fitted for every dimension/timestamp
//! pair). It is deliberately slow and obviously correct, and serves as the
//! reference the optimized path is checked against.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spline::{CatmullRomSpline, KnotSeries};

/// Treats products that land within this distance below an integer as that
/// integer when flooring. `inlier_fraction` values like 2/3 round down in
/// binary, so a plain `floor(2/3 · 3)` would give 1 instead of 2.
const INTEGER_FLOOR_GUARD: f64 = 1e-9;

/// A per-frame control sequence: `n ≥ 2` frames by `D ≥ 1` dimensions, all
/// entries finite. Row `t` is the control vector of frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    values: Array2<f64>,
}

impl ControlSequence {
    /// Wraps an `n×D` array, validating the sequence invariants: at least
    /// two frames, at least one dimension, and no non-finite entries.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(Error::input(format!(
                "control sequence needs at least 2 frames, got {n}"
            )));
        }
        if d < 1 {
            return Err(Error::input("control sequence needs at least 1 dimension"));
        }
        for ((t, i), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::input(format!(
                    "control sequence entry at frame {t}, dimension {i} is not finite ({v})"
                )));
            }
        }
        Ok(ControlSequence { values })
    }

    /// Builds a sequence from per-frame rows; rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::input(
                "control sequence needs at least 2 frames, got 0",
            ));
        }
        let d = rows[0].len();
        for (t, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::input(format!(
                    "frame {t} has {} dimensions, expected {d}",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, d), flat)
            .expect("row-major buffer matches the declared shape");
        Self::from_array(values)
    }

    /// Number of frames `n`.
    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    /// Number of control dimensions `D`.
    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    /// The underlying `n×D` array.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Splits the sequence into `m` phase-shifted subsequences.
    ///
    /// Subsequence `j ∈ [0, m)` holds the frames at timestamps
    /// `j, m+j, 2m+j, …`, truncated to the first `⌊n/m⌋` entries so all
    /// subsequences have equal length. When `m` does not divide `n` the tail
    /// frames contribute no knots but still receive stabilized outputs (the
    /// splines extrapolate there). Requires `⌊n/m⌋ ≥ 2`, i.e. `m ≤ n/2`;
    /// otherwise an invalid-config error is returned.
    pub fn split(&self, m: usize) -> Result<Vec<Subsequence>> {
        let n = self.frames();
        if m < 1 {
            return Err(Error::config("subsequence count m must be at least 1"));
        }
        let len = n / m;
        if len < 2 {
            return Err(Error::config(format!(
                "subsequence count m = {m} is too large for {n} frames: \
                 each subsequence needs at least 2 knots (m must not exceed n/2)"
            )));
        }
        let d = self.dims();
        let mut subs = Vec::with_capacity(m);
        for j in 0..m {
            let timestamps: Vec<f64> = (0..len).map(|r| (r * m + j) as f64).collect();
            let mut values = Array2::zeros((len, d));
            for r in 0..len {
                values.row_mut(r).assign(&self.values.row(r * m + j));
            }
            subs.push(Subsequence {
                phase: j,
                timestamps,
                values,
            });
        }
        Ok(subs)
    }
}

/// One phase-shifted subsequence produced by [`ControlSequence::split`]:
/// the parent's rows at timestamps `phase, m+phase, 2m+phase, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsequence {
    phase: usize,
    timestamps: Vec<f64>,
    values: Array2<f64>,
}

impl Subsequence {
    /// Phase offset `j` of this subsequence within its parent.
    pub fn phase(&self) -> usize {
        self.phase
    }

    /// Timestamps of the retained frames (strictly increasing integers).
    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    /// Retained rows, `⌊n/m⌋ × D`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Extracts the knots of one dimension, ready for spline fitting.
    pub fn knot_series(&self, dim: usize) -> Result<KnotSeries> {
        if dim >= self.values.ncols() {
            return Err(Error::input(format!(
                "dimension {dim} out of range for subsequence with {} dimensions",
                self.values.ncols()
            )));
        }
        KnotSeries::new(self.timestamps.clone(), self.values.column(dim).to_vec())
    }
}

/// Configuration for [`stabilize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizerConfig {
    /// Number of phase-shifted subsequences `m` (the ensemble size and the
    /// smoothing knob). Must satisfy `⌊n/m⌋ ≥ 2` for the sequence at hand.
    pub m: usize,
    /// Fraction of the ensemble kept in the averaging step, in `(0, 1]`.
    /// The retained count is `max(1, ⌊inlier_fraction·m⌋)`.
    pub inlier_fraction: f64,
}

impl Default for StabilizerConfig {
    /// `m = 3` with two thirds of the ensemble retained. `m` is
    /// data-dependent — 3 is a practical starting point, not a canonical
    /// value; raise it for smoother output.
    fn default() -> Self {
        StabilizerConfig {
            m: 3,
            inlier_fraction: 2.0 / 3.0,
        }
    }
}

impl StabilizerConfig {
    /// Builds a config with the given ensemble size and the default
    /// two-thirds inlier fraction.
    pub fn with_m(m: usize) -> Self {
        StabilizerConfig {
            m,
            ..Self::default()
        }
    }

    /// Number of estimates retained per timestamp:
    /// `max(1, ⌊inlier_fraction·m⌋)`, clamped to `m`.
    pub fn inlier_count(&self) -> usize {
        let raw = self.inlier_fraction * self.m as f64;
        let floored = (raw + INTEGER_FLOOR_GUARD).floor() as usize;
        floored.max(1).min(self.m)
    }

    /// Checks the config against a sequence of `n` frames.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.m < 1 {
            return Err(Error::config("subsequence count m must be at least 1"));
        }
        if !self.inlier_fraction.is_finite()
            || self.inlier_fraction <= 0.0
            || self.inlier_fraction > 1.0
        {
            return Err(Error::config(format!(
                "inlier_fraction must lie in (0, 1], got {}",
                self.inlier_fraction
            )));
        }
        if n / self.m < 2 {
            return Err(Error::config(format!(
                "subsequence count m = {} is too large for {n} frames \
                 (m must not exceed n/2)",
                self.m
            )));
        }
        Ok(())
    }
}

/// Summed absolute distance from each estimate to all the others:
/// `Dⱼ = Σⱼ′ |eⱼ − eⱼ′|`.
///
/// A single estimate yields `[0]`. Empty input or non-finite estimates are
/// invalid-input errors.
pub fn ensemble_distance(estimates: &[f64]) -> Result<Vec<f64>> {
    if estimates.is_empty() {
        return Err(Error::input(
            "ensemble distance needs at least one estimate",
        ));
    }
    for (j, &e) in estimates.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::input(format!("estimate {j} is not finite ({e})")));
        }
    }
    let mut distances = Vec::with_capacity(estimates.len());
    for &e in estimates {
        let mut acc = 0.0;
        for &other in estimates {
            acc += (e - other).abs();
        }
        distances.push(acc);
    }
    Ok(distances)
}

/// Keeps the `k` estimates with the smallest distances and returns their
/// mean.
///
/// Indices are ordered by ascending distance with ties broken toward the
/// lower index. The mean is computed relative to the first kept estimate,
/// so averaging identical estimates returns that value bit for bit.
/// `k` outside `[1, len]` is an invalid-config error; mismatched slice
/// lengths are an invalid-input error.
pub fn select_and_average(estimates: &[f64], distances: &[f64], k: usize) -> Result<f64> {
    if estimates.len() != distances.len() {
        return Err(Error::input(format!(
            "{} estimates but {} distances",
            estimates.len(),
            distances.len()
        )));
    }
    if k < 1 || k > estimates.len() {
        return Err(Error::config(format!(
            "inlier count k = {k} must lie in [1, {}]",
            estimates.len()
        )));
    }
    let mut order: Vec<usize> = (0..estimates.len()).collect();
    // Stable sort: equal distances keep ascending index order.
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let kept = &order[..k];
    let base = estimates[kept[0]];
    let mut acc = 0.0;
    for &j in kept {
        acc += estimates[j] - base;
    }
    Ok(base + acc / k as f64)
}

/// Smooths a control sequence with a phase-shifted spline ensemble.
///
/// See the [module docs](self) for the pipeline. Output has the same shape
/// as the input. Dimensions are processed independently (and in parallel;
/// results do not depend on the thread count).
pub fn stabilize(seq: &ControlSequence, config: &StabilizerConfig) -> Result<ControlSequence> {
    let n = seq.frames();
    let d = seq.dims();
    config.validate_for(n)?;
    let subs = seq.split(config.m)?;
    let k = config.inlier_count();

    let columns: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let splines: Vec<CatmullRomSpline> = subs
                .iter()
                .map(|s| Ok(CatmullRomSpline::fit(s.knot_series(i)?)))
                .collect::<Result<_>>()?;
            let mut column = Vec::with_capacity(n);
            let mut estimates = Vec::with_capacity(splines.len());
            for t in 0..n {
                estimates.clear();
                for spline in &splines {
                    estimates.push(spline.eval(t as f64)?);
                }
                let distances = ensemble_distance(&estimates)?;
                column.push(select_and_average(&estimates, &distances, k)?);
            }
            Ok(column)
        })
        .collect::<Result<_>>()?;

    let mut out = Array2::zeros((n, d));
    for (i, column) in columns.iter().enumerate() {
        for (t, &v) in column.iter().enumerate() {
            out[[t, i]] = v;
        }
    }
    ControlSequence::from_array(out)
}

/// Reference implementation of [`stabilize`] with no shared precomputation.
///
/// Splines are re-fitted from scratch for every `(dimension, timestamp)`
/// pair, exactly as the pipeline description reads. Slow but transparent;
/// the optimized path is tested to agree with this one.
pub fn oracle_stabilize(
    seq: &ControlSequence,
    config: &StabilizerConfig,
) -> Result<ControlSequence> {
    let n = seq.frames();
    let d = seq.dims();
    config.validate_for(n)?;
    let subs = seq.split(config.m)?;
    let k = config.inlier_count();

    let mut out = Array2::zeros((n, d));
    for i in 0..d {
        for t in 0..n {
            let mut estimates = Vec::with_capacity(subs.len());
            for sub in &subs {
                let spline = CatmullRomSpline::fit(sub.knot_series(i)?);
                estimates.push(spline.eval(t as f64)?);
            }
            let distances = ensemble_distance(&estimates)?;
            out[[t, i]] = select_and_average(&estimates, &distances, k)?;
        }
    }
    ControlSequence::from_array(out)
}
