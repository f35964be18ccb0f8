//! Cross-attention aggregation of per-frame latent codes.
//!
//! An encoder run over a window of frames yields, per frame `i`, a query
//! vector `qᵢ`, a key vector `kᵢ` (both of length `d_k`) and a latent code
//! `wᵢ` of shape `L × C` (typical generator stacks use 14 layers × 512
//! channels; every routine here is generic over the shape). [`aggregate`]
//! fuses the window into a single latent:
//!
//! 1. average the queries into `q̄` ([`mean_query`]);
//! 2. score each frame per attention head by the scaled dot product of the
//!    head's slice of `q̄` and `kᵢ`, and softmax over frames
//!    ([`attention_weights`]);
//! 3. blend the latents: head `a` owns the `C/h` contiguous channels of
//!    slice `a` and mixes them with its own weight row.
//!
//! Projections are the identity — heads are contiguous slices of the raw
//! vectors, so `h` must divide `d_k` and `C`, and the per-head scale is
//! `1/√(d_k/h)`. Externally trained projection matrices can be supplied
//! through [`aggregate_with_projections`].
//!
//! [`aggregate_backward`] returns the exact gradients of
//! `⟨upstream, aggregate(frames)⟩` with respect to every input, including
//! the softmax Jacobian and the `1/M` factor from the query mean.
//!
//! The blend is computed relative to the first frame's latent, so a
//! single-frame window and a window of identical frames reproduce their
//! latent bit for bit.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Per-frame encoder outputs: query, key, and an `L × C` latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    query: Vec<f64>,
    key: Vec<f64>,
    latent: Array2<f64>,
}

impl FrameFeatures {
    /// Bundles one frame's features, validating finiteness and that the
    /// query and key agree in length.
    pub fn new(query: Vec<f64>, key: Vec<f64>, latent: Array2<f64>) -> Result<Self> {
        if query.is_empty() {
            return Err(Error::input("frame query must not be empty"));
        }
        if query.len() != key.len() {
            return Err(Error::input(format!(
                "query has {} entries but key has {}",
                query.len(),
                key.len()
            )));
        }
        for (name, vec) in [("query", &query), ("key", &key)] {
            if let Some(bad) = vec.iter().find(|x| !x.is_finite()) {
                return Err(Error::input(format!(
                    "frame {name} contains a non-finite entry ({bad})"
                )));
            }
        }
        if let Some(bad) = latent.iter().find(|x| !x.is_finite()) {
            return Err(Error::input(format!(
                "frame latent contains a non-finite entry ({bad})"
            )));
        }
        Ok(FrameFeatures { query, key, latent })
    }

    /// Query vector, length `d_k`.
    pub fn query(&self) -> &[f64] {
        &self.query
    }

    /// Key vector, length `d_k`.
    pub fn key(&self) -> &[f64] {
        &self.key
    }

    /// Latent code, `L × C`.
    pub fn latent(&self) -> &Array2<f64> {
        &self.latent
    }
}

/// Shape and head layout for the attention ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    /// Number of attention heads `h`; must divide both `key_dim` and
    /// `channels`.
    pub heads: usize,
    /// Query/key length `d_k`.
    pub key_dim: usize,
    /// Latent layer count `L`.
    pub layers: usize,
    /// Latent channel count `C`.
    pub channels: usize,
}

impl AttentionConfig {
    /// Checks the head layout: positive sizes, `h | d_k`, `h | C`.
    pub fn validate(&self) -> Result<()> {
        if self.heads < 1 || self.key_dim < 1 || self.layers < 1 || self.channels < 1 {
            return Err(Error::config(format!(
                "attention shape must be positive, got h={}, d_k={}, L={}, C={}",
                self.heads, self.key_dim, self.layers, self.channels
            )));
        }
        if !self.key_dim.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "head count {} must divide key dimension {}",
                self.heads, self.key_dim
            )));
        }
        if !self.channels.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "head count {} must divide channel count {}",
                self.heads, self.channels
            )));
        }
        Ok(())
    }

    /// Per-head key length `d_k / h`.
    pub fn head_key_dim(&self) -> usize {
        self.key_dim / self.heads
    }

    /// Per-head channel count `C / h`.
    pub fn head_channels(&self) -> usize {
        self.channels / self.heads
    }

    /// Scaled-dot-product factor `1/√(d_k/h)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.head_key_dim() as f64).sqrt()
    }
}

/// Aggregated latent code, `L × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    values: Array2<f64>,
}

impl LatentCode {
    /// Wraps an `L × C` array.
    pub fn new(values: Array2<f64>) -> Self {
        LatentCode { values }
    }

    /// The latent values.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Gradients of `⟨upstream, aggregate(frames)⟩` with respect to every
/// input, frame by frame.
#[derive(Debug, Clone)]
pub struct AggregateGradients {
    /// One gradient per frame query (all identical: the query mean
    /// distributes `1/M` to each frame).
    pub queries: Vec<Vec<f64>>,
    /// One gradient per frame key.
    pub keys: Vec<Vec<f64>>,
    /// One gradient per frame latent.
    pub latents: Vec<Array2<f64>>,
}

/// Optional externally trained projection matrices for
/// [`aggregate_with_projections`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    /// Applied to the mean query: `d_k × d_k`.
    pub query: Array2<f64>,
    /// Applied to every key: `d_k × d_k`.
    pub key: Array2<f64>,
    /// Applied to latent channels before blending: `C × C`.
    pub value: Array2<f64>,
    /// Applied to output channels after blending: `C × C`.
    pub output: Array2<f64>,
}

fn check_frames(frames: &[FrameFeatures], config: &AttentionConfig) -> Result<()> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::input("aggregation needs at least one frame"));
    }
    for (i, f) in frames.iter().enumerate() {
        if f.query.len() != config.key_dim {
            return Err(Error::input(format!(
                "frame {i} query has {} entries, config says d_k = {}",
                f.query.len(),
                config.key_dim
            )));
        }
        if f.latent.dim() != (config.layers, config.channels) {
            return Err(Error::input(format!(
                "frame {i} latent is {:?}, config says {}×{}",
                f.latent.dim(),
                config.layers,
                config.channels
            )));
        }
    }
    Ok(())
}

/// Elementwise mean of the frame queries.
pub fn mean_query(frames: &[FrameFeatures]) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::input("mean query needs at least one frame"));
    }
    let d = frames[0].query.len();
    for (i, f) in frames.iter().enumerate() {
        if f.query.len() != d {
            return Err(Error::input(format!(
                "frame {i} query has {} entries, expected {d}",
                f.query.len()
            )));
        }
    }
    let m = frames.len() as f64;
    let mut mean = vec![0.0; d];
    for f in frames {
        for (acc, &q) in mean.iter_mut().zip(&f.query) {
            *acc += q;
        }
    }
    for acc in &mut mean {
        *acc /= m;
    }
    Ok(mean)
}

/// Per-head softmax attention over frames: row `a` of the returned `h × M`
/// matrix holds head `a`'s weights, which sum to 1.
///
/// Head `a` scores frame `j` as `⟨q̄ₐ, kⱼₐ⟩ / √(d_k/h)` where the subscript
/// `a` selects the head's contiguous slice, then softmaxes over `j`.
pub fn attention_weights(
    qbar: &[f64],
    frames: &[FrameFeatures],
    config: &AttentionConfig,
) -> Result<Array2<f64>> {
    check_frames(frames, config)?;
    if qbar.len() != config.key_dim {
        return Err(Error::input(format!(
            "mean query has {} entries, config says d_k = {}",
            qbar.len(),
            config.key_dim
        )));
    }
    if let Some(bad) = qbar.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!(
            "mean query contains a non-finite entry ({bad})"
        )));
    }

    let (h, m) = (config.heads, frames.len());
    let dk_h = config.head_key_dim();
    let scale = config.scale();
    let mut weights = Array2::zeros((h, m));
    let mut logits = vec![0.0; m];
    for a in 0..h {
        let slice = a * dk_h..(a + 1) * dk_h;
        for (j, f) in frames.iter().enumerate() {
            let mut dot = 0.0;
            for (qa, ka) in qbar[slice.clone()].iter().zip(&f.key[slice.clone()]) {
                dot += qa * ka;
            }
            logits[j] = scale * dot;
        }
        // Stable softmax: shift by the max logit before exponentiating.
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, &logit) in logits.iter().enumerate() {
            let e = (logit - max).exp();
            weights[[a, j]] = e;
            sum += e;
        }
        for j in 0..m {
            weights[[a, j]] /= sum;
        }
    }
    Ok(weights)
}

/// Fuses the frame latents into one `L × C` code.
///
/// Computes the weights from the mean query, then blends each head's
/// channel slice with that head's weight row. The blend for channel `c` in
/// head `a` is `w₀ + Σⱼ λₐⱼ·(wⱼ − w₀)` — the plain convex combination
/// `Σⱼ λₐⱼ wⱼ` anchored at frame 0 so that identical latents pass through
/// exactly.
pub fn aggregate(frames: &[FrameFeatures], config: &AttentionConfig) -> Result<LatentCode> {
    let qbar = mean_query(frames)?;
    let weights = attention_weights(&qbar, frames, config)?;
    blend_latents(frames, config, &weights)
}

/// [`aggregate`] with externally trained projection matrices applied to the
/// mean query, keys, and latent channels (`None` entries and
/// [`Option::None`] overall mean identity).
pub fn aggregate_with_projections(
    frames: &[FrameFeatures],
    config: &AttentionConfig,
    projections: Option<&Projections>,
) -> Result<LatentCode> {
    let Some(p) = projections else {
        return aggregate(frames, config);
    };
    check_frames(frames, config)?;
    let (dk, c) = (config.key_dim, config.channels);
    for (name, mat, want) in [
        ("query", &p.query, dk),
        ("key", &p.key, dk),
        ("value", &p.value, c),
        ("output", &p.output, c),
    ] {
        if mat.dim() != (want, want) {
            return Err(Error::config(format!(
                "{name} projection is {:?}, expected {want}×{want}",
                mat.dim()
            )));
        }
        if let Some(bad) = mat.iter().find(|x| !x.is_finite()) {
            return Err(Error::config(format!(
                "{name} projection contains a non-finite entry ({bad})"
            )));
        }
    }

    let matvec = |mat: &Array2<f64>, x: &[f64]| -> Vec<f64> {
        mat.rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(m, v)| m * v).sum())
            .collect()
    };
    let qbar = matvec(&p.query, &mean_query(frames)?);
    let projected: Vec<FrameFeatures> = frames
        .iter()
        .map(|f| {
            let key = matvec(&p.key, &f.key);
            let mut latent = Array2::zeros(f.latent.dim());
            for (l, row) in f.latent.rows().into_iter().enumerate() {
                let out = matvec(
                    &p.value,
                    row.as_slice().expect("latent rows are contiguous"),
                );
                for (ci, v) in out.into_iter().enumerate() {
                    latent[[l, ci]] = v;
                }
            }
            FrameFeatures::new(f.query.clone(), key, latent)
        })
        .collect::<Result<_>>()?;

    let weights = attention_weights(&qbar, &projected, config)?;
    let blended = blend_latents(&projected, config, &weights)?;
    let mut out = Array2::zeros(blended.values.dim());
    for (l, row) in blended.values.rows().into_iter().enumerate() {
        let mapped = matvec(
            &p.output,
            row.as_slice().expect("latent rows are contiguous"),
        );
        for (ci, v) in mapped.into_iter().enumerate() {
            out[[l, ci]] = v;
        }
    }
    Ok(LatentCode::new(out))
}

/// Head-sliced convex blend of the frame latents with the given `h × M`
/// weights, anchored at frame 0.
fn blend_latents(
    frames: &[FrameFeatures],
    config: &AttentionConfig,
    weights: &Array2<f64>,
) -> Result<LatentCode> {
    let (layers, channels) = (config.layers, config.channels);
    let ch = config.head_channels();
    let base = &frames[0].latent;
    let mut out = base.clone();
    for a in 0..config.heads {
        for c in a * ch..(a + 1) * ch {
            for l in 0..layers {
                let anchor = base[[l, c]];
                let mut acc = 0.0;
                for (j, f) in frames.iter().enumerate() {
                    acc += weights[[a, j]] * (f.latent[[l, c]] - anchor);
                }
                out[[l, c]] = anchor + acc;
            }
        }
    }
    debug_assert_eq!(out.dim(), (layers, channels));
    Ok(LatentCode::new(out))
}

/// Gradients of the scalar `⟨upstream, aggregate(frames)⟩` with respect to
/// every frame's query, key, and latent.
///
/// `upstream` must be `L × C`. The derivation per head `a` (slice notation
/// as in [`attention_weights`]):
///
/// * latent: `∂J/∂wⱼ[l,c] = λₐⱼ · G[l,c]` for `c` in head `a`'s slice;
/// * logits: with `rⱼ = ⟨G, wⱼ⟩` restricted to the slice and
///   `ρ = Σⱼ λₐⱼ rⱼ`, the softmax Jacobian gives
///   `gⱼ = λₐⱼ (rⱼ − ρ)`;
/// * key: `∂J/∂kⱼₐ = gⱼ · q̄ₐ / √(d_k/h)`;
/// * query: `∂J/∂qᵢₐ = (1/M) Σⱼ gⱼ kⱼₐ / √(d_k/h)` — identical for every
///   frame `i` because each contributes `1/M` of the mean query.
pub fn aggregate_backward(
    frames: &[FrameFeatures],
    config: &AttentionConfig,
    upstream: &Array2<f64>,
) -> Result<AggregateGradients> {
    check_frames(frames, config)?;
    if upstream.dim() != (config.layers, config.channels) {
        return Err(Error::input(format!(
            "upstream gradient is {:?}, config says {}×{}",
            upstream.dim(),
            config.layers,
            config.channels
        )));
    }
    if let Some(bad) = upstream.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!(
            "upstream gradient contains a non-finite entry ({bad})"
        )));
    }

    let qbar = mean_query(frames)?;
    let weights = attention_weights(&qbar, frames, config)?;
    let m = frames.len();
    let (dk_h, ch) = (config.head_key_dim(), config.head_channels());
    let scale = config.scale();

    let mut grad_latents: Vec<Array2<f64>> = frames
        .iter()
        .map(|f| Array2::zeros(f.latent.dim()))
        .collect();
    let mut grad_keys: Vec<Vec<f64>> = vec![vec![0.0; config.key_dim]; m];
    let mut grad_query: Vec<f64> = vec![0.0; config.key_dim];

    for a in 0..config.heads {
        let channel_slice = a * ch..(a + 1) * ch;
        let key_slice = a * dk_h..(a + 1) * dk_h;

        // rⱼ = ⟨G, wⱼ⟩ over this head's channels.
        let mut r = vec![0.0; m];
        for (j, f) in frames.iter().enumerate() {
            let mut acc = 0.0;
            for c in channel_slice.clone() {
                for l in 0..config.layers {
                    acc += upstream[[l, c]] * f.latent[[l, c]];
                }
            }
            r[j] = acc;
        }
        let rho: f64 = (0..m).map(|j| weights[[a, j]] * r[j]).sum();

        for (j, f) in frames.iter().enumerate() {
            let lambda = weights[[a, j]];
            for c in channel_slice.clone() {
                for l in 0..config.layers {
                    grad_latents[j][[l, c]] = lambda * upstream[[l, c]];
                }
            }
            let g = lambda * (r[j] - rho);
            for e in key_slice.clone() {
                grad_keys[j][e] = g * scale * qbar[e];
                grad_query[e] += g * scale * f.key[e] / m as f64;
            }
        }
    }

    let grad_queries = vec![grad_query; m];
    Ok(AggregateGradients {
        queries: grad_queries,
        keys: grad_keys,
        latents: grad_latents,
    })
}
