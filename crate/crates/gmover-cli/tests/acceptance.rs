//! Acceptance suite: one test per exit criterion, each printing a PASS
//! line with its measured numbers. Run with
//! `cargo test -p gmover-cli --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gmover::decompose::{decompose, select_light_mask};
use gmover::hdr::{read_pfm, read_rgbe, write_pfm, Panorama};
use gmover::metrics;
use gmover::ot::{
    exact_emd, geometric_cost, gml_gradient, sinkhorn_gml, sinkhorn_unbalanced_gml,
    SinkhornConfig,
};
use gmover::projection::{
    gaussian_map, reproject, spatially_varying_map, PositionOffset, ProjectionConfig,
};
use gmover::sphere::{generate_anchors, nearest_anchor, pixel_direction, AnchorSet};
use gmover_cli::fixtures;

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let unit = Uniform::new(0.0f64, 1.0);
    let mut raw: Vec<f64> = (0..n).map(|_| unit.sample(rng) + 1e-6).collect();
    let total: f64 = raw.iter().sum();
    raw.iter_mut().for_each(|x| *x /= total);
    raw
}

fn random_depths(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let range = Uniform::new(0.5f64, 5.0);
    (0..n).map(|_| range.sample(rng)).collect()
}

#[test]
fn acceptance_01_sinkhorn_tracks_exact_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = SinkhornConfig::default();
    assert_eq!(cfg.epsilon, 1e-4);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n = [3usize, 5, 8, 16][trial % 4];
        let anchors = generate_anchors(n).unwrap();
        let du = random_depths(&mut rng, n);
        let dv = random_depths(&mut rng, n);
        let cost = geometric_cost(&anchors, &du, &dv).unwrap();
        let u = random_distribution(&mut rng, n);
        let v = random_distribution(&mut rng, n);

        let (exact, _) = exact_emd(&u, &v, &cost).unwrap();
        let sol = sinkhorn_gml(&u, &v, &cost, &cfg).unwrap();
        assert!(sol.converged, "instance {trial} did not converge");
        let bound = 5.0 * cfg.epsilon * (n as f64).ln() + 1e-6;
        let gap = (sol.value - exact).abs();
        worst = worst.max(gap / bound);
        assert!(
            gap <= bound,
            "instance {trial} (n={n}): |{} - {exact}| = {gap} > {bound}",
            sol.value
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1}s, budget 30s");
    println!(
        "PASS sinkhorn-vs-exact: 200 instances, worst gap/bound {worst:.3}, {elapsed:.2}s"
    );
}

#[test]
fn acceptance_02_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let n = 8;
    let anchors = generate_anchors(n).unwrap();
    let cfg = SinkhornConfig::default();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let du = random_depths(&mut rng, n);
        let dv = random_depths(&mut rng, n);
        let cost = geometric_cost(&anchors, &du, &dv).unwrap();
        let u = random_distribution(&mut rng, n);
        let v = random_distribution(&mut rng, n);

        let grad = gml_gradient(&u, &v, &cost, &cfg).unwrap();
        let objective = |w: &[f64]| {
            let sol = sinkhorn_gml(w, &v, &cost, &cfg).unwrap();
            assert!(sol.converged);
            sol.entropic_objective()
        };
        let mut fd = vec![0.0; n];
        for k in 0..n {
            // Simplex-tangent perturbation: e_k recentered to zero sum.
            let mut up = u.clone();
            let mut dn = u.clone();
            for i in 0..n {
                let delta = if i == k {
                    1.0 - 1.0 / n as f64
                } else {
                    -1.0 / n as f64
                };
                up[i] += h * delta;
                dn[i] -= h * delta;
            }
            fd[k] = (objective(&up) - objective(&dn)) / (2.0 * h);
        }
        let err: f64 = fd
            .iter()
            .zip(&grad)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = err / scale;
        worst = worst.max(rel);
        assert!(rel <= 1e-3, "instance {trial}: relative error {rel}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1}s, budget 30s");
    println!(
        "PASS gradient-vs-finite-differences: 50 instances, worst rel {worst:.2e}, {elapsed:.2}s"
    );
}

#[test]
fn acceptance_03_unbalanced_analytic_case() {
    let start = Instant::now();
    let cost = gmover::ot::CostMatrix::new(ndarray::arr2(&[[0.0]])).unwrap();
    let cfg = SinkhornConfig {
        epsilon: 1e-6,
        kl_weight: 1.0,
        ..Default::default()
    };
    let sol = sinkhorn_unbalanced_gml(&[1.0], &[2.0], &cost, &cfg).unwrap();
    assert!(sol.converged);
    let analytic = 3.0 - 2.0 * 2.0f64.sqrt();
    let gap = (sol.value - analytic).abs();
    assert!(gap <= 1e-4, "objective {} vs {analytic}", sol.value);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.2}s, budget 1s");
    println!("PASS unbalanced-analytic: |{:.9} - {analytic:.9}| = {gap:.2e}, {elapsed:.3}s", sol.value);
}

#[test]
fn acceptance_04_geometric_cost_spot_values() {
    // Right angle, 3-4-5 triangle: exactly 25.
    let right = AnchorSet::new(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
    let c = geometric_cost(&right, &[3.0, 3.0], &[4.0, 4.0]).unwrap();
    assert_eq!(c.entries()[[0, 1]], 25.0);

    // Coincident points at equal depth: exactly 0, for several depths.
    for d in [0.5, 1.0, 1.7, 4.25] {
        let c = geometric_cost(&right, &[d, d], &[d, d]).unwrap();
        assert_eq!(c.entries()[[0, 0]], 0.0);
        assert_eq!(c.entries()[[1, 1]], 0.0);
    }

    // Antipodal unit depths: exactly 4.
    let anti = AnchorSet::new(vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
    let c = geometric_cost(&anti, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
    assert_eq!(c.entries()[[0, 1]], 4.0);

    println!("PASS geometric-cost-spot-values: 25, 0, 4 all exact");
}

#[test]
fn acceptance_05_decompose_conservation_on_fixtures() {
    let (w, h) = (256usize, 128usize);
    let anchors = generate_anchors(128).unwrap();
    let fraction = 0.05;
    let fixture_set: Vec<(&str, Panorama)> = vec![
        (
            "delta",
            fixtures::delta(w, h, [0.0, 0.0, 1.0], 10.0, 0.0).unwrap(),
        ),
        (
            "two-lights",
            fixtures::two_lights(w, h, [0.0, 0.0, 1.0], 8.0, [1.0, 0.0, 0.0], 5.0, 0.1)
                .unwrap(),
        ),
        ("uniform", fixtures::uniform(w, h, 1.0).unwrap()),
        ("gradient", fixtures::gradient(w, h, 0.5, 2.0).unwrap()),
    ];

    for (name, pano) in &fixture_set {
        let d = decompose(pano, None, &anchors, fraction).unwrap();
        let total: f64 = d.params.distribution.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9, "{name}: ΣP = {total}");

        // Independent channelwise sum over the masked pixels, same
        // row-major order as the decomposition.
        let mask = select_light_mask(pano, fraction).unwrap();
        let mut sum = [0.0f64; 3];
        for (idx, px) in pano.pixels().iter().enumerate() {
            if mask[idx] {
                for c in 0..3 {
                    sum[c] += px[c] as f64;
                }
            }
        }
        assert_eq!(d.params.intensity, sum, "{name}: intensity mismatch");

        // Doubling the pixels doubles I and A and leaves P bit-identical.
        let doubled = Panorama::new(
            w,
            h,
            pano.pixels().iter().map(|p| p.map(|c| c * 2.0)).collect(),
        )
        .unwrap();
        let d2 = decompose(&doubled, None, &anchors, fraction).unwrap();
        for c in 0..3 {
            assert_eq!(d2.params.intensity[c], 2.0 * d.params.intensity[c]);
            assert_eq!(d2.params.ambient[c], 2.0 * d.params.ambient[c]);
        }
        for (a, b) in d.params.distribution.iter().zip(&d2.params.distribution) {
            assert_eq!(a.to_bits(), b.to_bits(), "{name}: P changed under doubling");
        }
    }
    println!("PASS decompose-conservation: 4 fixtures, sums exact, doubling bitwise");
}

#[test]
fn acceptance_06_projection_identities() {
    // Delta lobe peaks at v + A on the anchor-aligned pixel.
    let cfg = ProjectionConfig {
        width: 64,
        height: 32,
        angular_size: 0.0025,
        s_schedule: vec![0.0025],
    };
    let dir = pixel_direction(9, 17, cfg.height, cfg.width).unwrap();
    let aligned = AnchorSet::new(vec![dir]).unwrap();
    let params = gmover::decompose::IlluminationParams::new(
        vec![1.0],
        [5.0, 5.0, 5.0],
        [0.25, 0.25, 0.25],
        vec![1.0],
    )
    .unwrap();
    let map = gaussian_map(&params, &aligned, &cfg).unwrap();
    for c in map.pixel(9, 17) {
        assert!((c as f64 - 5.25).abs() <= 1e-9, "peak {c}");
    }

    // Zero offset reproduces the straight render bit for bit.
    let anchors = generate_anchors(16).unwrap();
    let params16 = gmover::decompose::IlluminationParams::new(
        vec![1.0 / 16.0; 16],
        [3.0, 2.0, 1.0],
        [0.1, 0.1, 0.1],
        (0..16).map(|i| 1.5 + 0.25 * (i % 4) as f64).collect(),
    )
    .unwrap();
    let zero = PositionOffset::new([0.0, 0.0, 0.0]).unwrap();
    let direct = gaussian_map(&params16, &anchors, &cfg).unwrap();
    let displaced = spatially_varying_map(&params16, &anchors, &zero, &cfg).unwrap();
    for (a, b) in direct.pixels().iter().zip(displaced.pixels()) {
        for c in 0..3 {
            assert_eq!(a[c].to_bits(), b[c].to_bits());
        }
    }

    // Offset then negated offset restores depths and directions.
    let off = PositionOffset::new([0.3, -0.2, 0.4]).unwrap();
    let back = PositionOffset::new([-0.3, 0.2, -0.4]).unwrap();
    let (p1, a1) = reproject(&params16, &anchors, &off).unwrap();
    let (p2, a2) = reproject(&p1, &a1, &back).unwrap();
    for i in 0..16 {
        assert!((p2.depth[i] - params16.depth[i]).abs() <= 1e-9);
        assert!((p2.distribution[i] - params16.distribution[i]).abs() <= 1e-9);
        for c in 0..3 {
            assert!((a2.direction(i)[c] - anchors.direction(i)[c]).abs() <= 1e-9);
        }
    }
    println!("PASS projection-identities: peak, zero-offset, roundtrip all hold");
}

#[test]
fn acceptance_07_gmd_sanity() {
    let cfg = SinkhornConfig::default();

    // Identity at exact-solver scale.
    let anchors = generate_anchors(32).unwrap();
    let varied = Panorama::new(
        64,
        32,
        (0..64 * 32)
            .map(|i| {
                let x = ((i * 7 + 3) % 23) as f32 * 0.2 + 0.05;
                [x, x * 0.5, x * 1.5]
            })
            .collect(),
    )
    .unwrap();
    assert_eq!(
        metrics::gmd(&varied, &varied, &anchors, None, None, &cfg).unwrap(),
        0.0
    );

    // Delta pairs at known angles cost the squared chord.
    for theta in [
        std::f64::consts::FRAC_PI_6,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::PI,
    ] {
        let pair =
            AnchorSet::new(vec![[0.0, 0.0, 1.0], [theta.sin(), 0.0, theta.cos()]]).unwrap();
        let (w, h) = (64, 32);
        let pixel_for = |target: usize| {
            for row in 0..h {
                for col in 0..w {
                    let d = pixel_direction(row, col, h, w).unwrap();
                    if nearest_anchor(d, &pair).unwrap() == target {
                        return row * w + col;
                    }
                }
            }
            unreachable!("anchor {target} owns no pixel")
        };
        let (ia, ib) = (pixel_for(0), pixel_for(1));
        let mk = |idx: usize, value: f32| {
            let mut px = vec![[0.0f32; 3]; w * h];
            px[idx] = [value; 3];
            Panorama::new(w, h, px).unwrap()
        };
        let a = mk(ia, 6.0);
        let b = mk(ib, 9.0);
        let expect = 2.0 - 2.0 * theta.cos();
        let d_ab = metrics::gmd(&a, &b, &pair, None, None, &cfg).unwrap();
        let d_ba = metrics::gmd(&b, &a, &pair, None, None, &cfg).unwrap();
        assert!(
            (d_ab - expect).abs() <= 1e-6,
            "theta {theta}: {d_ab} vs {expect}"
        );
        assert!((d_ab - d_ba).abs() <= 1e-9, "asymmetry at theta {theta}");
    }
    println!("PASS gmd-sanity: identity zero, chord values at π/6, π/2, π, symmetric");
}

#[test]
fn acceptance_08_metric_invariances() {
    let base = Panorama::new(
        32,
        16,
        (0..32 * 16)
            .map(|i| {
                let x = ((i * 13 + 5) % 37) as f32 * 0.11 + 0.01;
                [x, (x * 1.9) % 3.0 + 0.01, (x * 0.6) % 1.5 + 0.01]
            })
            .collect(),
    )
    .unwrap();
    let doubled = Panorama::new(
        32,
        16,
        base.pixels().iter().map(|p| p.map(|c| c * 2.0)).collect(),
    )
    .unwrap();
    assert!(metrics::si_rmse(&base, &doubled).unwrap() <= 1e-9);
    assert!(metrics::rgb_angular_error(&base, &doubled).unwrap() <= 1e-9);
    assert!(metrics::cosine_distance(&base, &doubled).unwrap() <= 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let unit = Uniform::new(0.0f32, 4.0);
    for _ in 0..100 {
        let (w, h) = (16, 8);
        let a = Panorama::new(
            w,
            h,
            (0..w * h)
                .map(|_| [unit.sample(&mut rng) + 0.01, unit.sample(&mut rng), unit.sample(&mut rng)])
                .collect(),
        )
        .unwrap();
        let b = Panorama::new(
            w,
            h,
            (0..w * h)
                .map(|_| [unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)])
                .collect(),
        )
        .unwrap();
        let si = metrics::si_rmse(&a, &b).unwrap();
        let plain = metrics::rmse(&a, &b).unwrap();
        assert!(si <= plain + 1e-12, "si {si} > rmse {plain}");
    }
    println!("PASS metric-invariances: scale invariance ≤1e-9, si ≤ rmse on 100 pairs");
}

#[test]
fn acceptance_09_io_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let exponent = Uniform::new(-6.0f64, 6.0);
    for trial in 0..20 {
        let (w, h) = (5 + trial % 7, 3 + trial % 5);
        let pixels: Vec<[f32; 3]> = (0..w * h)
            .map(|_| {
                [
                    10f64.powf(exponent.sample(&mut rng)) as f32,
                    10f64.powf(exponent.sample(&mut rng)) as f32,
                    10f64.powf(exponent.sample(&mut rng)) as f32,
                ]
            })
            .collect();
        let p = Panorama::new(w, h, pixels).unwrap();
        let q = read_pfm(&write_pfm(&p)).unwrap();
        for (a, b) in p.pixels().iter().zip(q.pixels()) {
            for c in 0..3 {
                assert_eq!(a[c].to_bits(), b[c].to_bits(), "trial {trial}");
            }
        }
    }

    let mut hdr = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 1\n".to_vec();
    hdr.extend_from_slice(&[128, 128, 128, 129]);
    let decoded = read_rgbe(&hdr).unwrap();
    assert_eq!(decoded.pixel(0, 0), [1.0, 1.0, 1.0]);
    println!("PASS io-roundtrips: 20 PFM roundtrips bit-exact, RGBE unit pixel decodes");
}

#[test]
fn acceptance_10_pipeline_determinism() {
    let bin = env!("CARGO_BIN_EXE_gmover");
    let run_pipeline = |dir: &std::path::Path| {
        let path = |name: &str| dir.join(name).to_str().unwrap().to_string();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "fixture".into(),
                "two-lights".into(),
                "--dir-a".into(),
                "0,0,1".into(),
                "--value-a".into(),
                "9".into(),
                "--dir-b".into(),
                "1,0,0".into(),
                "--value-b".into(),
                "4".into(),
                "--ambient".into(),
                "0.05".into(),
                "--width".into(),
                "256".into(),
                "--height".into(),
                "128".into(),
                "--out".into(),
                path("scene.pfm"),
                "--depth-out".into(),
                path("depth.pfm"),
                "--depth-linear".into(),
                "1.5,3.5".into(),
            ],
            vec![
                "anchors".into(),
                "--n".into(),
                "128".into(),
                "--out".into(),
                path("anchors.json"),
            ],
            vec![
                "decompose".into(),
                "--pano".into(),
                path("scene.pfm"),
                "--depth".into(),
                path("depth.pfm"),
                "--n".into(),
                "128".into(),
                "--fraction".into(),
                "0.05".into(),
                "--out".into(),
                path("params.json"),
            ],
            vec![
                "project".into(),
                "--params".into(),
                path("params.json"),
                "--anchors".into(),
                path("anchors.json"),
                "--width".into(),
                "256".into(),
                "--height".into(),
                "128".into(),
                "--schedule".into(),
                "0.04,0.01,0.0025".into(),
                "--out".into(),
                path("map.pfm"),
            ],
            vec![
                "metrics".into(),
                "--pred".into(),
                path("map.pfm"),
                "--gt".into(),
                path("scene.pfm"),
                "--anchors".into(),
                path("anchors.json"),
            ],
        ];
        let mut stdout_log = Vec::new();
        for step in steps {
            let out = Command::new(bin)
                .args(&step)
                .output()
                .expect("spawn gmover");
            assert!(
                out.status.success(),
                "step {:?} failed: {}",
                step[0],
                String::from_utf8_lossy(&out.stderr)
            );
            stdout_log.extend_from_slice(&out.stdout);
        }
        let artifacts = [
            "scene.pfm",
            "depth.pfm",
            "anchors.json",
            "params.json",
            "map.pfm",
            "map.0.pfm",
            "map.1.pfm",
            "map.2.pfm",
        ];
        let mut blobs = vec![stdout_log];
        for a in artifacts {
            blobs.push(std::fs::read(dir.join(a)).unwrap());
        }
        blobs
    };

    let base = std::env::temp_dir().join(format!("gmover_acceptance_{}", std::process::id()));
    let dir1 = base.join("run1");
    let dir2 = base.join("run2");
    std::fs::create_dir_all(&dir1).unwrap();
    std::fs::create_dir_all(&dir2).unwrap();
    let first = run_pipeline(&dir1);
    let second = run_pipeline(&dir2);
    assert_eq!(first.len(), second.len());
    for (k, (a, b)) in first.iter().zip(&second).enumerate() {
        assert_eq!(a, b, "artifact {k} differs between runs");
    }
    std::fs::remove_dir_all(&base).ok();
    println!("PASS pipeline-determinism: fixture→decompose→project→metrics byte-identical twice");
}

#[test]
fn acceptance_11_performance_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let n = 128;
    let anchors = generate_anchors(n).unwrap().with_angles();
    let du = random_depths(&mut rng, n);
    let dv = random_depths(&mut rng, n);
    let cost = geometric_cost(&anchors, &du, &dv).unwrap();
    let u = random_distribution(&mut rng, n);
    let v = random_distribution(&mut rng, n);

    let cfg = SinkhornConfig::default();
    let start = Instant::now();
    let sol = sinkhorn_gml(&u, &v, &cost, &cfg).unwrap();
    let solve_time = start.elapsed().as_secs_f64();
    assert!(sol.converged);
    assert!(sol.marginal_violation <= 1e-9);
    assert!(solve_time < 1.0, "sinkhorn n=128 took {solve_time:.3}s");

    let params = gmover::decompose::IlluminationParams::new(
        random_distribution(&mut rng, n),
        [4.0, 3.5, 3.0],
        [0.2, 0.2, 0.2],
        random_depths(&mut rng, n),
    )
    .unwrap();
    let cfg_map = ProjectionConfig {
        width: 256,
        height: 128,
        angular_size: 0.0025,
        s_schedule: vec![0.0025],
    };
    let start = Instant::now();
    let map = gaussian_map(&params, &anchors, &cfg_map).unwrap();
    let render_time = start.elapsed().as_secs_f64();
    assert_eq!((map.width(), map.height()), (256, 128));
    assert!(render_time < 2.0, "render took {render_time:.3}s");

    println!(
        "PASS performance-floor: sinkhorn n=128 {solve_time:.3}s (<1s), render 128x256 {render_time:.3}s (<2s)"
    );
}
