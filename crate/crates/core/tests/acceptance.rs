//! Acceptance gate. Every criterion runs in sequence and prints one
//! `PASS`/`FAIL` line; the test fails if any line is `FAIL`.
//!
//! Run with `cargo test --release --test acceptance`.

use gazemap::assignment::{assignment_cost, min_cost_assignment};
use gazemap::baselines::{
    mlp::Gradient, run_sweep, FeatureVector, ForestParams, MlpModel, MlpParams, ModelSpec, Sample,
};
use gazemap::commands::default_model_specs;
use gazemap::gaze::assign_gaze;
use gazemap::geometry::{BoundingBox, Point2D};
use gazemap::io::align;
use gazemap::metrics::{cohens_kappa, evaluate, friedman_test, weighted_f1, ClassMetrics, ConfusionMatrix};
use gazemap::model::{BehaviourClass, FrameRecord, GazeTarget, HeadDetection, ObjectClass, ObjectDetection, PersonId};
use gazemap::pipeline::{labelled_features, run_pipeline};
use gazemap::seating::TrackedFrame;
use gazemap::simulator::{generate, NoiseSpec, SceneSpec, SimulationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Written straight to stdout so the lines show up without `--nocapture`.
fn report(line: String) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("geometric oracle", geometric_oracle),
        ("noiseless end-to-end", noiseless_end_to_end),
        ("tracking correctness", tracking_correctness),
        ("metrics exactness", metrics_exactness),
        ("friedman", friedman),
        ("kappa", kappa),
        ("mlp gradient check", mlp_gradient_check),
        ("sweep shape", sweep_shape),
        ("cross-configuration stability", cross_configuration),
        ("determinism", determinism),
    ];
    report(String::new());
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => report(format!("PASS  {name}: {d} [{took:.2}s]")),
            Err(d) => {
                report(format!("FAIL  {name}: {d} [{took:.2}s]"));
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

// ---- geometric oracle ----------------------------------------------------

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    // integer corners on a small canvas make containment edges and
    // equidistant centres common
    let x = rng.random_range(0..40) as f64 * 5.0;
    let y = rng.random_range(0..40) as f64 * 5.0;
    let w = rng.random_range(1..20) as f64 * 5.0;
    let h = rng.random_range(1..20) as f64 * 5.0;
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

/// Containment by the closed-box definition, then the smallest centre
/// distance, then the lowest candidate position.
fn oracle_target(point: Point2D, subject: PersonId, tracked: &TrackedFrame, frame: &FrameRecord) -> GazeTarget {
    let mut cands: Vec<(GazeTarget, BoundingBox)> = Vec::new();
    for (i, a) in tracked.assignments.iter().enumerate() {
        if let Some(h) = a {
            if i != subject.index() {
                cands.push((GazeTarget::Person(PersonId::from_index(i)), frame.heads[*h].bbox));
            }
        }
    }
    for (i, o) in frame.objects.iter().enumerate() {
        cands.push((GazeTarget::Object(o.class, i), o.bbox));
    }
    let inside: Vec<(GazeTarget, f64)> = cands
        .into_iter()
        .filter(|(_, b)| b.x_min() <= point.x && point.x <= b.x_max() && b.y_min() <= point.y && point.y <= b.y_max())
        .map(|(t, b)| {
            let cx = (b.x_min() + b.x_max()) / 2.0;
            let cy = (b.y_min() + b.y_max()) / 2.0;
            (t, ((point.x - cx).powi(2) + (point.y - cy).powi(2)).sqrt())
        })
        .collect();
    let Some(min) = inside.iter().map(|c| c.1).min_by(f64::total_cmp) else {
        return GazeTarget::Unassigned;
    };
    inside.iter().find(|c| c.1 == min).unwrap().0
}

fn geometric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let classes = [ObjectClass::Laptop, ObjectClass::Tablet, ObjectClass::Phone];
    let start = Instant::now();
    let (mut checked, mut mismatches, mut assigned) = (0usize, 0usize, 0usize);
    for f in 0..10_000u64 {
        let n_heads = rng.random_range(1..=6);
        let heads: Vec<HeadDetection> = (0..n_heads)
            .map(|_| HeadDetection {
                bbox: random_box(&mut rng),
                confidence: 1.0,
                keypoints: None,
            })
            .collect();
        let objects: Vec<ObjectDetection> = (0..rng.random_range(0..=6))
            .map(|_| ObjectDetection {
                class: classes[rng.random_range(0..3)],
                bbox: random_box(&mut rng),
                confidence: 1.0,
            })
            .collect();
        let seats = rng.random_range(n_heads..=n_heads + 2).min(8);
        // a random injective seat -> head map, with some seats left empty
        let mut pool: Vec<usize> = (0..n_heads).collect();
        let assignments: Vec<Option<usize>> = (0..seats)
            .map(|_| {
                if pool.is_empty() || rng.random_bool(0.15) {
                    None
                } else {
                    Some(pool.swap_remove(rng.random_range(0..pool.len())))
                }
            })
            .collect();
        let frame = FrameRecord {
            frame_index: f,
            heads,
            objects,
            ..Default::default()
        };
        let tracked = TrackedFrame {
            frame_index: f,
            centers: assignments
                .iter()
                .map(|a| a.map(|h| frame.heads[h].bbox.center()))
                .collect(),
            unmatched_heads: pool,
            assignments,
        };
        for s in 0..seats {
            if tracked.assignments[s].is_none() {
                continue;
            }
            let subject = PersonId::from_index(s);
            let point = if rng.random_bool(0.5) {
                Point2D::new(
                    rng.random_range(0..60) as f64 * 5.0,
                    rng.random_range(0..60) as f64 * 5.0,
                )
            } else {
                Point2D::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0))
            };
            let got = assign_gaze(point, subject, &tracked, &frame).map_err(|e| e.to_string())?;
            let want = oracle_target(point, subject, &tracked, &frame);
            checked += 1;
            assigned += usize::from(want != GazeTarget::Unassigned);
            mismatches += usize::from(got != want);
        }
    }
    let took = start.elapsed();
    ensure(
        mismatches == 0 && took < Duration::from_secs(10),
        format!("{checked} gaze points on 10000 frames ({assigned} inside a box), {mismatches} disagreements, {:.2}s (limit 10s)", took.as_secs_f64()),
    )
}

// ---- noiseless end-to-end --------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gazemap")
}

fn gazemap(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "gazemap {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn noiseless_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [4usize, 5] {
        let root = dir.path().join(format!("seats{n}"));
        std::fs::create_dir_all(&root).unwrap();
        let cfg = SimulationConfig {
            scene: SceneSpec::ring(n, 1000, 100 + n as u64),
            noise: NoiseSpec::default(),
        };
        let cfg_path = root.join("scene.toml");
        std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
        let (sim, run, eval) = (root.join("sim"), root.join("run"), root.join("eval"));
        gazemap(&["simulate", "--config", s(&cfg_path), "--out-dir", s(&sim)])?;
        gazemap(&[
            "pipeline",
            "--detections",
            s(&sim.join("detections.jsonl")),
            "--config",
            s(&sim.join("session.toml")),
            "--out-dir",
            s(&run),
        ])?;
        gazemap(&[
            "evaluate",
            "--decisions",
            s(&run.join("decisions.csv")),
            "--annotations",
            s(&sim.join("annotations.csv")),
            "--out-dir",
            s(&eval),
        ])?;
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
        let f1 = report["weighted_f1"].as_f64().unwrap();
        let pairs = report["pairs"].as_u64().unwrap();
        ok &= f1 == 1.0 && pairs == 1000 * n as u64;
        lines.push(format!("{n} seats F1 {f1} over {pairs} pairs"));
    }
    ensure(ok, lines.join("; "))
}

// ---- tracking ----------------------------------------------------------------

/// Minimum total cost over every injective map from the smaller side.
fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    fn rec(cost: &[Vec<f64>], r: usize, used: &mut Vec<bool>, skips: usize, acc: f64, best: &mut f64) {
        if r == cost.len() {
            *best = best.min(acc);
            return;
        }
        if skips > 0 {
            rec(cost, r + 1, used, skips - 1, acc, best);
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                rec(cost, r + 1, used, skips, acc + cost[r][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(
        cost,
        0,
        &mut vec![false; cols],
        rows.saturating_sub(cols),
        0.0,
        &mut best,
    );
    best
}

fn hungarian_agrees(cost: &[Vec<f64>]) -> bool {
    let a = min_cost_assignment(cost);
    let matched = a.iter().flatten().count();
    let want = brute_force_min(cost);
    let got = assignment_cost(cost, &a);
    matched == cost.len().min(cost[0].len()) && (got - want).abs() <= 1e-9 * want.abs().max(1.0)
}

fn tracking_correctness() -> Outcome {
    let mut scene = SceneSpec::ring(4, 5000, 21);
    scene.seats.clear();
    let noise = NoiseSpec {
        box_jitter_sigma: 12.0,
        head_miss_prob: 0.05,
        ..NoiseSpec::default()
    };
    let sim = generate(&scene, &noise).unwrap();
    let run = run_pipeline(&sim.stream, &scene.session_config()).map_err(|e| e.to_string())?;
    let (mut swaps, mut lost, mut checked, mut max_jitter) = (0usize, 0usize, 0usize, 0.0f64);
    for t in &sim.truth.records {
        let Some(h) = t.detected_head else { continue };
        let frame = t.frame_index as usize;
        let seen = sim.stream.frames[frame].heads[h].bbox.center();
        max_jitter = max_jitter.max(seen.distance(&t.head_box.center()));
        checked += 1;
        match run.tracked[frame].person_for_head(h) {
            Some(p) if p == t.person => {}
            Some(_) => swaps += 1,
            None => lost += 1,
        }
    }
    let jitter_ok = max_jitter < run.gate / 2.0;

    let mut mismatched = 0usize;
    let mut matrices = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for frame in &sim.stream.frames {
        if frame.heads.is_empty() || frame.heads.len() > 6 {
            continue;
        }
        let cost: Vec<Vec<f64>> = run
            .final_seats
            .seats()
            .iter()
            .map(|seat| {
                frame
                    .heads
                    .iter()
                    .map(|h| seat.anchor.distance(&h.bbox.center()))
                    .collect()
            })
            .collect();
        matrices += 1;
        mismatched += usize::from(!hungarian_agrees(&cost));
    }
    for _ in 0..5000 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let cost: Vec<Vec<f64>> = (0..r)
            .map(|_| {
                (0..c)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(0.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect();
        matrices += 1;
        mismatched += usize::from(!hungarian_agrees(&cost));
    }
    ensure(
        jitter_ok && swaps == 0 && mismatched == 0,
        format!(
            "{checked} detected heads over 5000 frames, max centre jitter {max_jitter:.1}px vs gate/2 {:.1}px, {swaps} swaps, {lost} unmatched; assignment optimal on {}/{matrices} matrices with <= 6 heads",
            run.gate / 2.0,
            matrices - mismatched
        ),
    )
}

// ---- metrics -------------------------------------------------------------------

/// Per-class scores straight from the definitions on a rows = truth matrix.
fn hand_weighted_f1(m: &[[u64; 3]; 3]) -> f64 {
    let total: u64 = m.iter().flatten().sum();
    let mut acc = 0.0;
    #[allow(clippy::needless_range_loop)]
    for c in 0..3 {
        let tp = m[c][c] as f64;
        let support: u64 = m[c].iter().sum();
        let predicted: u64 = (0..3).map(|r| m[r][c]).sum();
        let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let r = if support == 0 { 0.0 } else { tp / support as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        acc += f * support as f64;
    }
    if total == 0 {
        0.0
    } else {
        acc / total as f64
    }
}

fn metrics_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut counts = [[0u64; 3]; 3];
        for row in &mut counts {
            for v in row.iter_mut() {
                *v = if rng.random_bool(0.2) {
                    0
                } else {
                    rng.random_range(0..200)
                };
            }
        }
        let mut pairs = ConfusionMatrix { counts }.to_pairs();
        // pair order must not matter
        for i in (1..pairs.len()).rev() {
            pairs.swap(i, rng.random_range(0..=i));
        }
        let report = evaluate(&pairs);
        if report.matrix.counts != counts {
            return Err("confusion matrix not rebuilt from pairs".into());
        }
        worst = worst.max((report.weighted_f1 - hand_weighted_f1(&counts)).abs());
    }
    let per_class: Vec<ClassMetrics> = [(0.7243, 32448), (0.8940, 10606), (0.4040, 2392)]
        .iter()
        .map(|&(f1, support)| ClassMetrics {
            f1,
            support,
            ..ClassMetrics::default()
        })
        .collect();
    let reference = weighted_f1(&per_class);
    let gap = 0.829 - reference;
    ensure(
        worst <= 1e-12 && (reference - 0.747).abs() <= 0.001,
        format!(
            "max deviation {worst:.1e} over 1000 matrices; support-weighted F1 of the reference per-class scores {reference:.4} (target 0.747 +/- 0.001); \
             the reference overall F1 of 0.829 exceeds this by {gap:.3}, so it cannot be a support-weighted mean of those per-class values"
        ),
    )
}

// ---- friedman ------------------------------------------------------------------

fn friedman() -> Outcome {
    let identical = vec![vec![1.0, 2.0, 3.0]; 3];
    let r = friedman_test(&identical).map_err(|e| e.to_string())?;
    let base_ok = r.statistic == 6.0 && r.df == 2 && (r.p_value - 0.0498).abs() < 5e-5;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, k) = (5usize, 4usize);
    let (mut stat_dev, mut p_dev, mut rank_mismatch) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..1000 {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
        // rank = 1 + number of smaller values in the block
        let mut sums = vec![0.0; k];
        for row in &rows {
            for j in 0..k {
                sums[j] += 1.0 + row.iter().filter(|&&v| v < row[j]).count() as f64;
            }
        }
        let stat =
            12.0 / (n * k * (k + 1)) as f64 * sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * (n * (k + 1)) as f64;
        let got = friedman_test(&rows).map_err(|e| e.to_string())?;
        rank_mismatch += usize::from(got.rank_sums != sums);
        stat_dev = stat_dev.max((got.statistic - stat).abs());
        let p = statrs::distribution::ContinuousCDF::sf(
            &statrs::distribution::ChiSquared::new((k - 1) as f64).unwrap(),
            stat,
        );
        p_dev = p_dev.max((got.p_value - p).abs());
    }
    ensure(
        base_ok && rank_mismatch == 0 && stat_dev <= 1e-12 && p_dev <= 1e-10,
        format!(
            "identical rankings: chi2 {} df {} p {:.6}; 1000 random 5x4 blocks: {rank_mismatch} rank-sum mismatches, max statistic deviation {stat_dev:.1e}, max p deviation {p_dev:.1e}",
            r.statistic, r.df, r.p_value
        ),
    )
}

// ---- kappa ---------------------------------------------------------------------

fn kappa() -> Outcome {
    use BehaviourClass::{Laptop as L, Other as O, Student as S};
    let start = Instant::now();
    let seq: Vec<(BehaviourClass, BehaviourClass)> = [S, L, O, S, S, L].iter().map(|&c| (c, c)).collect();
    let same = cohens_kappa(&seq).map_err(|e| e.to_string())?.kappa;
    let mut pairs = Vec::new();
    for (n, a, b) in [(20, S, S), (5, S, L), (10, L, S), (15, L, L)] {
        pairs.extend(std::iter::repeat_n((a, b), n));
    }
    let k = cohens_kappa(&pairs).map_err(|e| e.to_string())?.kappa;
    let took = start.elapsed();
    ensure(
        same == 1.0 && (k - 0.4).abs() < 1e-12 && took < Duration::from_millis(100),
        format!(
            "identical sequences {same}; [[20,5],[10,15]] {k:.12}; {:.2}ms",
            took.as_secs_f64() * 1e3
        ),
    )
}

// ---- mlp gradient ----------------------------------------------------------------

fn mlp_gradient_check() -> Outcome {
    fn params_mut(m: &mut MlpModel) -> Vec<&mut f64> {
        m.w1.iter_mut()
            .chain(m.b1.iter_mut())
            .chain(m.w2.iter_mut())
            .chain(m.b2.iter_mut())
            .collect()
    }
    fn flat(g: &Gradient) -> Vec<f64> {
        g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2).copied().collect()
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut worst, mut total) = (0.0f64, 0usize);
    let eps = 1e-6;
    for inst in 0..20u64 {
        let hidden = rng.random_range(2..=6);
        let mut model = MlpModel::initialize(MlpParams {
            hidden,
            seed: inst,
            ..MlpParams::default()
        })
        .map_err(|e| e.to_string())?;
        for p in params_mut(&mut model) {
            *p += rng.random_range(-0.5..0.5);
        }
        let batch: Vec<Sample> = (0..rng.random_range(1..=6))
            .map(|_| {
                let mut values = [0.0; 34];
                for v in &mut values {
                    *v = rng.random_range(-1.0..1.0);
                }
                Sample {
                    features: FeatureVector {
                        values,
                        visible_keypoints: 17,
                    },
                    label: BehaviourClass::from_index(rng.random_range(0..3)).unwrap(),
                }
            })
            .collect();
        let analytic = flat(&model.loss_and_gradient(&batch).1);
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = model.clone();
            *params_mut(&mut plus)[i] += eps;
            let mut minus = model.clone();
            *params_mut(&mut minus)[i] -= eps;
            let numeric = (plus.loss_and_gradient(&batch).0 - minus.loss_and_gradient(&batch).0) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            total += 1;
        }
    }
    ensure(
        worst <= 1e-4,
        format!("{total} parameters over 20 instances, max relative error {worst:.2e} (limit 1e-4)"),
    )
}

// ---- sweep and cross-configuration ---------------------------------------------------

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load_config(name: &str) -> SimulationConfig {
    SimulationConfig::from_toml(&std::fs::read_to_string(config_path(name)).unwrap()).unwrap()
}

/// Rule-based weighted F1 and labelled keypoint samples for one session.
fn session(cfg: &SimulationConfig) -> (f64, Vec<Sample>) {
    let sim = generate(&cfg.scene, &cfg.noise).unwrap();
    let run = run_pipeline(&sim.stream, &cfg.scene.session_config()).unwrap();
    let alignment = align(&run.decisions, &sim.annotations);
    let f1 = evaluate(&alignment.pairs).weighted_f1;
    (f1, labelled_features(&sim.stream, &run, &sim.annotations).unwrap())
}

fn fmt_curve(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn sweep_shape() -> Outcome {
    let start = Instant::now();
    let cfg = load_config("scene4.toml");
    let sigma_ok = cfg.noise.keypoint_noise_sigma <= cfg.scene.head_size / 8.0;
    let (rule, samples) = session(&cfg);
    let (rule_again, _) = session(&cfg);
    let fractions: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let result =
        run_sweep(&samples, &fractions, &default_model_specs(), rule, &[0, 1, 2, 3, 4]).map_err(|e| e.to_string())?;
    let forest = result.mean_curve("forest");
    let worst_dip = forest.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let increasing = forest[8] > forest[0] && worst_dip <= 0.02;
    let constant = rule.to_bits() == rule_again.to_bits() && result.rule_based_f1.to_bits() == rule.to_bits();
    let below = forest.iter().position(|&f| f < rule);
    let above = forest.iter().rposition(|&f| f > rule);
    let crossover = matches!((below, above), (Some(b), Some(a)) if b < a);
    let took = start.elapsed();
    ensure(
        sigma_ok && increasing && constant && crossover && took < Duration::from_secs(300),
        format!(
            "{} samples, keypoint sigma {} (head/8 = {}); forest mean over 5 seeds [{}], largest dip {worst_dip:.3}; mlp [{}]; rule-based {rule:.4} at every fraction; crossover {}; {:.1}s (limit 300s)",
            samples.len(),
            cfg.noise.keypoint_noise_sigma,
            cfg.scene.head_size / 8.0,
            fmt_curve(&forest),
            fmt_curve(&result.mean_curve("mlp")),
            if crossover { "present" } else { "absent" },
            took.as_secs_f64()
        ),
    )
}

fn cross_configuration() -> Outcome {
    let (cfg4, cfg5) = (load_config("scene4.toml"), load_config("scene5.toml"));
    if cfg4.noise != cfg5.noise {
        return Err("the two scenes must share one noise model".into());
    }
    let (rule4, s4) = session(&cfg4);
    let (rule5, s5) = session(&cfg5);
    let cut = s4.len() * 4 / 5;
    let forest = ModelSpec::Forest(ForestParams::default())
        .train(&s4[..cut])
        .map_err(|e| e.to_string())?;
    let (in_domain, transfer) = (forest.score(&s4[cut..]), forest.score(&s5));
    let rule_gap = (rule4 - rule5).abs();
    let drop = in_domain - transfer;
    ensure(
        rule_gap < 0.05 && drop > 0.05,
        format!(
            "rule-based 4 seats {rule4:.4} vs 5 seats {rule5:.4} (gap {rule_gap:.4}, limit 0.05); forest trained on 4 seats scores {in_domain:.4} held out, {transfer:.4} on 5 seats (drop {drop:.4}, needs > 0.05)"
        ),
    )
}

// ---- determinism -------------------------------------------------------------------

/// Every output file of a directory, with the manifest's wall-clock field
/// removed.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&p).unwrap();
            if name == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_clock_s");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut cfg = load_config("scene4.toml");
    cfg.scene.n_frames = 150;
    let cfg_path = d.join("scene.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let scores = d.join("scores.csv");
    std::fs::write(&scores, "block,a,b,c\n1,0.5,0.7,0.6\n2,0.4,0.9,0.6\n3,0.3,0.8,0.8\n").unwrap();

    let mut compared = 0usize;
    let mut differing = Vec::new();
    let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for round in 0..2 {
        let o = |name: &str| d.join(format!("{name}{round}"));
        let sim = d.join("simulate0");
        let cmds: Vec<Vec<String>> = vec![
            vec![
                "simulate".into(),
                "--config".into(),
                s(&cfg_path).into(),
                "--seed".into(),
                "3".into(),
            ],
            vec![
                "pipeline".into(),
                "--detections".into(),
                s(&sim.join("detections.jsonl")).into(),
                "--config".into(),
                s(&sim.join("session.toml")).into(),
            ],
            vec![
                "evaluate".into(),
                "--decisions".into(),
                s(&d.join("pipeline0/decisions.csv")).into(),
                "--annotations".into(),
                s(&sim.join("annotations.csv")).into(),
            ],
            vec![
                "summarize".into(),
                "--decisions".into(),
                s(&d.join("pipeline0/decisions.csv")).into(),
            ],
            vec![
                "sweep".into(),
                "--detections".into(),
                s(&sim.join("detections.jsonl")).into(),
                "--annotations".into(),
                s(&sim.join("annotations.csv")).into(),
                "--config".into(),
                s(&sim.join("session.toml")).into(),
                "--seed".into(),
                "0,1".into(),
                "--fractions".into(),
                "0.3,0.7".into(),
                "--save-models".into(),
            ],
            vec!["friedman".into(), "--scores".into(), s(&scores).into()],
        ];
        let mut snap = Vec::new();
        for mut args in cmds {
            let name = args[0].clone();
            args.push("--out-dir".into());
            args.push(s(&o(&name)).into());
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            gazemap(&refs)?;
            snap.extend(snapshot(&o(&name)).into_iter().map(|(f, b)| (format!("{name}/{f}"), b)));
        }
        runs.push(snap);
    }
    for ((fa, a), (fb, b)) in runs[0].iter().zip(&runs[1]) {
        compared += 1;
        if fa != fb || a != b {
            differing.push(fa.clone());
        }
    }
    ensure(
        differing.is_empty() && runs[0].len() == runs[1].len() && compared > 0,
        format!("{compared} output files from 6 commands compared byte for byte across two runs (manifest wall-clock excluded); differing: {differing:?}"),
    )
}
