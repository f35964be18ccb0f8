//! Acceptance gate for the whole workspace.
//!
//! Each test here is one release criterion and prints a single
//! `ACCEPTANCE PASS <name>` / `ACCEPTANCE FAIL <name>` line (visible with
//! `cargo test --test acceptance -- --nocapture`). The criteria cover
//! oracle equivalence, identity fixpoints, outlier suppression, measured
//! noise reduction on the standard benchmark, the smoothness knob,
//! metric exactness, attention properties with gradient checks, spline
//! properties, and the I/O + exit-code contract.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqstab::aggregator::{
    aggregate, aggregate_backward, attention_weights, mean_query, AttentionConfig, FrameFeatures,
};
use seqstab::metrics::{flv, rmse, roughness};
use seqstab::spline::CatmullRomSpline;
use seqstab::stabilizer::{oracle_stabilize, stabilize, ControlSequence, StabilizerConfig};
use seqstab::synth::{generate, standard_benchmark, synth_flow, FlowKind, Trajectory};

/// Runs one criterion, printing a PASS/FAIL line before propagating any
/// failure to the harness.
fn criterion(name: &str, body: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("ACCEPTANCE PASS {name}"),
        Err(panic) => {
            println!("ACCEPTANCE FAIL {name}");
            std::panic::resume_unwind(panic);
        }
    }
}

fn random_sequence(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> ControlSequence {
    ControlSequence::from_array(Array2::from_shape_fn((n, dims), |_| {
        rng.gen_range(-5.0..5.0)
    }))
    .unwrap()
}

fn max_abs_diff(a: &ControlSequence, b: &ControlSequence) -> f64 {
    a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_1_optimized_stabilizer_matches_the_oracle() {
    criterion(
        "stabilizer matches brute-force oracle on 200 instances",
        || {
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(1001);
            for case in 0..200 {
                let m = rng.gen_range(1..=5usize);
                let n = rng.gen_range(2 * m..=64);
                let dims = rng.gen_range(1..=8);
                let seq = random_sequence(&mut rng, n, dims);
                let config = StabilizerConfig::with_m(m);
                let fast = stabilize(&seq, &config).unwrap();
                let slow = oracle_stabilize(&seq, &config).unwrap();
                let diff = max_abs_diff(&fast, &slow);
                assert!(
                    diff <= 1e-12,
                    "case {case} (n={n}, m={m}, D={dims}): diff {diff}"
                );
            }
            let elapsed = start.elapsed();
            assert!(
                elapsed < Duration::from_secs(10),
                "oracle sweep took {elapsed:?}"
            );
        },
    );
}

#[test]
fn acceptance_2_identity_fixpoints() {
    criterion("m=1, constant, and affine sequences pass through", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1002);

        // m = 1: one spline through every frame interpolates them all.
        for _ in 0..20 {
            let n = rng.gen_range(8..=40);
            let dims = rng.gen_range(1..=4);
            let seq = random_sequence(&mut rng, n, dims);
            let out = stabilize(&seq, &StabilizerConfig::with_m(1)).unwrap();
            let diff = max_abs_diff(&seq, &out);
            assert!(diff <= 1e-12, "m=1 identity violated by {diff}");
        }

        // Constant sequences reproduce bitwise.
        for _ in 0..20 {
            let n = rng.gen_range(8..=40);
            let dims = rng.gen_range(1..=4);
            let levels: Vec<f64> = (0..dims).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let seq =
                ControlSequence::from_array(Array2::from_shape_fn((n, dims), |(_, d)| levels[d]))
                    .unwrap();
            let m = rng.gen_range(1..=n / 2);
            let out = stabilize(&seq, &StabilizerConfig::with_m(m)).unwrap();
            assert_eq!(
                seq.values(),
                out.values(),
                "constant fixpoint broke at m={m}"
            );
        }

        // Affine sequences survive every valid ensemble size.
        for _ in 0..20 {
            let n = rng.gen_range(8..=32);
            let dims = rng.gen_range(1..=3);
            let slopes: Vec<f64> = (0..dims).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let offsets: Vec<f64> = (0..dims).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let seq = ControlSequence::from_array(Array2::from_shape_fn((n, dims), |(t, d)| {
                slopes[d] * t as f64 + offsets[d]
            }))
            .unwrap();
            for m in 1..=n / 2 {
                let out = stabilize(&seq, &StabilizerConfig::with_m(m)).unwrap();
                let diff = max_abs_diff(&seq, &out);
                assert!(
                    diff <= 1e-9,
                    "affine fixpoint off by {diff} at n={n}, m={m}"
                );
            }
        }
    });
}

#[test]
fn acceptance_3_spike_suppression_is_local() {
    criterion(
        "a spike leaves other-phase outputs bitwise unchanged",
        || {
            let ramp: Vec<Vec<f64>> = (0..12).map(|t| vec![t as f64]).collect();
            let mut spiked = ramp.clone();
            spiked[4][0] += 10.0;
            let base = ControlSequence::from_rows(&ramp).unwrap();
            let outlier = ControlSequence::from_rows(&spiked).unwrap();

            let config = StabilizerConfig::with_m(3);
            let out_base = stabilize(&base, &config).unwrap();
            let out_spiked = stabilize(&outlier, &config).unwrap();

            // Frame 4 lands in phase-1 knots; every other phase must be
            // untouched down to the last bit.
            for t in 0..12 {
                if t % 3 != 1 {
                    let a = out_base.values()[[t, 0]];
                    let b = out_spiked.values()[[t, 0]];
                    assert_eq!(a.to_bits(), b.to_bits(), "t={t}: {a} vs {b}");
                }
            }
        },
    );
}

/// Shared setup for the benchmark criteria: the seed-42 preset.
fn benchmark() -> Trajectory {
    generate(&standard_benchmark()).expect("preset is valid")
}

#[test]
fn acceptance_4_noise_reduction_on_the_standard_benchmark() {
    criterion("stabilization reduces RMSE-to-clean and roughness", || {
        let start = Instant::now();
        let data = benchmark();
        let rmse_noisy = rmse(&data.noisy, &data.clean).unwrap();
        let rough_noisy = roughness(&data.noisy).unwrap();
        let mut ratio_m3 = f64::NAN;
        for m in [3, 4, 5] {
            let out = stabilize(&data.noisy, &StabilizerConfig::with_m(m)).unwrap();
            let rmse_out = rmse(&out, &data.clean).unwrap();
            let rough_out = roughness(&out).unwrap();
            assert!(
                rmse_out < rmse_noisy,
                "m={m}: rmse {rmse_out} not below noisy {rmse_noisy}"
            );
            assert!(
                rough_out < rough_noisy,
                "m={m}: roughness {rough_out} not below noisy {rough_noisy}"
            );
            if m == 3 {
                ratio_m3 = rmse_out / rmse_noisy;
            }
        }
        // Pinned on the first verified run; drift means the pipeline changed.
        let pinned = 0.4257600872669091;
        assert!(
            (ratio_m3 - pinned).abs() < 1e-12,
            "m=3 RMSE reduction ratio {ratio_m3} drifted from pinned {pinned}"
        );
        let elapsed = start.elapsed();
        assert!(
            elapsed < Duration::from_secs(1),
            "benchmark run took {elapsed:?}"
        );
    });
}

#[test]
fn acceptance_5_larger_ensembles_smooth_at_least_as_much() {
    criterion("roughness is non-increasing as m goes 1 to 3 to 5", || {
        let data = benchmark();
        let rough_of = |m: usize| {
            let out = stabilize(&data.noisy, &StabilizerConfig::with_m(m)).unwrap();
            roughness(&out).unwrap()
        };
        let (r1, r3, r5) = (rough_of(1), rough_of(3), rough_of(5));
        assert!(r3 <= r1, "m=3 roughness {r3} above m=1 {r1}");
        assert!(r5 <= r3, "m=5 roughness {r5} above m=3 {r3}");
    });
}

#[test]
fn acceptance_6_flv_reproduces_closed_forms() {
    criterion("flv matches hand-computed flow displacement values", || {
        let zeros = synth_flow(FlowKind::Zero, 4, 3, 3).unwrap();
        assert_eq!(flv(&zeros).unwrap(), 0.0);

        let constant = synth_flow(FlowKind::Constant { u: 3.0, v: 4.0 }, 6, 5, 4).unwrap();
        assert_eq!(flv(&constant).unwrap(), 5.0);

        // 3×3 radial, scale 1: corners √2, edge centres 1, middle 0.
        let radial = synth_flow(FlowKind::Radial { scale: 1.0 }, 3, 3, 1).unwrap();
        let want = (4.0 + 4.0 * 2.0f64.sqrt()) / 9.0;
        let got = flv(&radial).unwrap();
        assert!((got - want).abs() <= 1e-12, "radial flv {got}, want {want}");
    });
}

fn random_frames(rng: &mut ChaCha8Rng, m: usize, config: &AttentionConfig) -> Vec<FrameFeatures> {
    (0..m)
        .map(|_| {
            let q = (0..config.key_dim)
                .map(|_| rng.gen_range(-1.5..1.5))
                .collect();
            let k = (0..config.key_dim)
                .map(|_| rng.gen_range(-1.5..1.5))
                .collect();
            let w = Array2::from_shape_fn((config.layers, config.channels), |_| {
                rng.gen_range(-2.0..2.0)
            });
            FrameFeatures::new(q, k, w).unwrap()
        })
        .collect()
}

/// Central-difference check of `J = ⟨upstream, aggregate(frames)⟩` against
/// the analytic gradients, mirroring the library's documented convention
/// (step 1e-5, relative error with a 1e-8 floor).
fn gradient_max_rel_err(
    frames: &[FrameFeatures],
    config: &AttentionConfig,
    upstream: &Array2<f64>,
) -> f64 {
    let j_of = |frames: &[FrameFeatures]| -> f64 {
        let out = aggregate(frames, config).unwrap();
        out.values()
            .iter()
            .zip(upstream.iter())
            .map(|(o, u)| o * u)
            .sum()
    };
    let grads = aggregate_backward(frames, config, upstream).unwrap();
    let step = 1e-5;
    let mut max_rel = 0.0f64;
    let mut check = |analytic: f64, nudge: &dyn Fn(f64) -> Vec<FrameFeatures>| {
        let numeric = (j_of(&nudge(step)) - j_of(&nudge(-step))) / (2.0 * step);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    };
    let rebuild =
        |frames: &[FrameFeatures], fi: usize, q: Vec<f64>, k: Vec<f64>, w: Array2<f64>| {
            let mut fs = frames.to_vec();
            fs[fi] = FrameFeatures::new(q, k, w).unwrap();
            fs
        };
    for fi in 0..frames.len() {
        let f = &frames[fi];
        for e in 0..config.key_dim {
            check(grads.queries[fi][e], &|eps| {
                let mut q = f.query().to_vec();
                q[e] += eps;
                rebuild(frames, fi, q, f.key().to_vec(), f.latent().clone())
            });
            check(grads.keys[fi][e], &|eps| {
                let mut k = f.key().to_vec();
                k[e] += eps;
                rebuild(frames, fi, f.query().to_vec(), k, f.latent().clone())
            });
        }
        for l in 0..config.layers {
            for c in 0..config.channels {
                check(grads.latents[fi][[l, c]], &|eps| {
                    let mut w = f.latent().clone();
                    w[[l, c]] += eps;
                    rebuild(frames, fi, f.query().to_vec(), f.key().to_vec(), w)
                });
            }
        }
    }
    max_rel
}

#[test]
fn acceptance_7_attention_properties_and_gradients() {
    criterion("attention invariants hold and gradients check out", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1007);

        // Weight rows are probability distributions.
        for _ in 0..20 {
            let heads = rng.gen_range(1..=3);
            let config = AttentionConfig {
                heads,
                key_dim: heads * rng.gen_range(1..=3),
                layers: rng.gen_range(1..=2),
                channels: heads * rng.gen_range(1..=3),
            };
            let count = rng.gen_range(1..=6);
            let frames = random_frames(&mut rng, count, &config);
            let qbar = mean_query(&frames).unwrap();
            let weights = attention_weights(&qbar, &frames, &config).unwrap();
            for row in weights.rows() {
                let sum: f64 = row.sum();
                assert!((sum - 1.0).abs() <= 1e-12, "weight row sums to {sum}");
            }
        }

        // Frame order does not matter.
        for _ in 0..20 {
            let config = AttentionConfig {
                heads: 2,
                key_dim: 4,
                layers: 2,
                channels: 4,
            };
            let frames = random_frames(&mut rng, 5, &config);
            let fused = aggregate(&frames, &config).unwrap();
            let mut shuffled = frames.clone();
            shuffled.reverse();
            shuffled.swap(0, 2);
            let refused = aggregate(&shuffled, &config).unwrap();
            let diff = fused
                .values()
                .iter()
                .zip(refused.values().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12, "permutation moved the output by {diff}");
        }

        // Single-frame and identical-frame aggregation are exact identities.
        let config = AttentionConfig {
            heads: 2,
            key_dim: 4,
            layers: 2,
            channels: 4,
        };
        let frames = random_frames(&mut rng, 1, &config);
        let fused = aggregate(&frames, &config).unwrap();
        assert_eq!(fused.values(), frames[0].latent());
        let copies = vec![frames[0].clone(); 5];
        let fused = aggregate(&copies, &config).unwrap();
        assert_eq!(fused.values(), copies[0].latent());

        // Analytic gradients agree with finite differences.
        for case in 0..50 {
            let heads = rng.gen_range(1..=2);
            let config = AttentionConfig {
                heads,
                key_dim: heads * rng.gen_range(1..=2),
                layers: rng.gen_range(1..=2),
                channels: heads * rng.gen_range(1..=2),
            };
            let count = rng.gen_range(2..=4);
            let frames = random_frames(&mut rng, count, &config);
            let upstream = Array2::from_shape_fn((config.layers, config.channels), |_| {
                rng.gen_range(-1.0..1.0)
            });
            let rel = gradient_max_rel_err(&frames, &config, &upstream);
            assert!(rel < 1e-4, "case {case}: max relative gradient error {rel}");
        }

        let elapsed = start.elapsed();
        assert!(
            elapsed < Duration::from_secs(5),
            "attention sweep took {elapsed:?}"
        );
    });
}

#[test]
fn acceptance_8_spline_interpolation_guarantees() {
    criterion(
        "knot interpolation, affine reproduction, midpoint value",
        || {
            // Exact interpolation at every knot, equal or unequal spacing.
            let layouts: [(&[f64], &[f64]); 3] = [
                (&[0.0, 1.0, 2.0, 3.0], &[0.5, -2.0, 4.0, 1.0]),
                (&[0.0, 0.25, 2.0, 5.5, 6.0], &[1.0, 1.0, -3.5, 2.25, 0.0]),
                (&[-4.0, -1.5, 3.0], &[100.0, -100.0, 50.0]),
            ];
            for (ts, vs) in layouts {
                let s = CatmullRomSpline::from_points(ts.to_vec(), vs.to_vec()).unwrap();
                for (&t, &v) in ts.iter().zip(vs) {
                    assert_eq!(s.eval(t).unwrap(), v, "knot at t={t}");
                }
            }

            // Affine data comes back affine, extrapolation included.
            let (a, b) = (-1.75, 4.0);
            let ts: Vec<f64> = (0..10).map(|t| t as f64).collect();
            let vs: Vec<f64> = ts.iter().map(|&t| a * t + b).collect();
            let s = CatmullRomSpline::from_points(ts, vs).unwrap();
            for i in -8..=44 {
                let t = i as f64 * 0.5;
                let got = s.eval(t).unwrap();
                let want = a * t + b;
                assert!(
                    (got - want).abs() <= 1e-12,
                    "affine at t={t}: {got} vs {want}"
                );
            }

            // The classic uniform midpoint: knots 0,1,2,0 → 27/16 at t=1.5.
            let s =
                CatmullRomSpline::from_points(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 0.0])
                    .unwrap();
            let got = s.eval(1.5).unwrap();
            assert!((got - 27.0 / 16.0).abs() <= 1e-15, "midpoint {got}");
        },
    );
}

#[test]
fn acceptance_9_io_round_trips_and_exit_codes() {
    criterion("flo/CSV round trips are lossless; exit codes hold", || {
        use seqstab::io;
        use std::process::Command;

        let dir = tempfile::tempdir().unwrap();

        // .flo: write → read → re-serialize is byte-identical.
        let flow = synth_flow(FlowKind::Radial { scale: 0.3 }, 7, 5, 1)
            .unwrap()
            .remove(0);
        let path = dir.path().join("field.flo");
        io::write_flo(&path, &flow).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = io::read_flo(&path).unwrap();
        assert_eq!(io::flow_to_flo_bytes(&back), bytes);

        // CSV: every double survives the text round trip bit for bit.
        let seq = ControlSequence::from_rows(&[
            vec![1.0 / 3.0, 2.0f64.sqrt()],
            vec![-0.0, 1e-300],
            vec![std::f64::consts::PI, -7.5e200],
        ])
        .unwrap();
        let csv_path = dir.path().join("seq.csv");
        io::write_control_sequence_csv(&csv_path, &seq).unwrap();
        let back = io::read_control_sequence_csv(&csv_path).unwrap();
        for (x, y) in seq.values().iter().zip(back.values().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }

        // Exit codes: 0 success, 2 parse error, 3 config error.
        let bin = env!("CARGO_BIN_EXE_seqstab");
        let code = |args: &[&str]| {
            Command::new(bin)
                .args(args)
                .output()
                .unwrap()
                .status
                .code()
                .unwrap()
        };
        let good = dir.path().join("good.csv");
        std::fs::write(&good, "t,c0\n0,1.0\n1,2.0\n2,3.0\n").unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "t,c0\n0,huh\n").unwrap();
        let out = dir.path().join("out.csv");
        assert_eq!(code(&["metrics", "roughness", good.to_str().unwrap()]), 0);
        assert_eq!(
            code(&[
                "stabilize",
                "--input",
                bad.to_str().unwrap(),
                "--output",
                out.to_str().unwrap()
            ]),
            2
        );
        assert_eq!(
            code(&[
                "stabilize",
                "--input",
                good.to_str().unwrap(),
                "-m",
                "40",
                "--output",
                out.to_str().unwrap(),
            ]),
            3
        );
    });
}
