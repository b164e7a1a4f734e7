//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line with its pinned tolerance before asserting.
//!
//! Criterion 5's probe bound on the stacked unrelated features is known to
//! be unattained (see README "Known limitations"); that test reports its
//! measurements and fails honestly rather than loosening the bound.

use std::sync::OnceLock;
use std::time::Instant;

use idrl_core::autodiff::{Tape, Tensor2};
use idrl_core::datagen::{generate, segment_mi, SyntheticSpec};
use idrl_core::drd::BundleVars;
use idrl_core::engine::{
    evaluate_indices, extract, logistic_probe_accuracy, make_batch, run_gradcheck_suite,
    split_indices, train, train_step, Checkpoint, LossToggles, TrainConfig,
};
use idrl_core::iaf::{fuse, IafParams};
use idrl_core::losses::{
    alignment_loss, cmd_loss, orthogonality_loss, reconstruction_loss, total_loss, CmdConfig,
    LossTermVars,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

fn randn(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor2::new(rows, cols, data)
}

fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("{status}  criterion {criterion}: {detail}");
    pass
}

// ----------------------------------------------------------------------
// Criterion 1: the reference clinical-scale results are out of scope; the
// suite substitutes property-based checks (criteria 2-9).

#[test]
fn criterion_1_reference_results_not_reproduced() {
    let pass = report(
        "1",
        true,
        "clinical-corpus benchmark figures are not reproducible at desk scale \
         (no such corpora or pretrained feature extractors here); criteria 2-9 \
         are the property-based substitutes",
    );
    assert!(pass);
}

// ----------------------------------------------------------------------
// Criterion 2: gradient suite, tolerance 1e-4 at h=1e-4, 10 seeds, < 60 s.

#[test]
fn criterion_2_gradient_suite() {
    let t0 = Instant::now();
    let outcomes = run_gradcheck_suite(42).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let worst = outcomes
        .iter()
        .max_by(|a, b| a.max_err.total_cmp(&b.max_err))
        .unwrap();
    let all_pass = outcomes.iter().all(|o| o.passed());
    let pass = all_pass && secs < 60.0;
    let detail = format!(
        "{} checks, worst {} = {:.3e} (tol 1e-4), {:.1}s (< 60s)",
        outcomes.len(),
        worst.name,
        worst.max_err,
        secs
    );
    assert!(report("2", pass, &detail));
}

// ----------------------------------------------------------------------
// Criterion 3: loss identities.

#[test]
fn criterion_3_loss_identities() {
    let mut rng = ChaCha12Rng::seed_from_u64(30);
    let cfg = CmdConfig::default();

    // cmd(X,X) = 0 and symmetry, 100 random batches, <= 1e-10.
    let mut worst_self: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for _ in 0..100 {
        let rows = rng.gen_range(2..=10);
        let cols = rng.gen_range(1..=6);
        let x = randn(rows, cols, &mut rng);
        let y = randn(rows, cols, &mut rng);
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let yv = t.constant(y.clone());
        let xx = cmd_loss(&mut t, xv, xv, &cfg).unwrap();
        worst_self = worst_self.max(t.scalar_value(xx).abs());
        let ab = cmd_loss(&mut t, xv, yv, &cfg).unwrap();
        let ba = cmd_loss(&mut t, yv, xv, &cfg).unwrap();
        worst_sym = worst_sym.max((t.scalar_value(ab) - t.scalar_value(ba)).abs());
    }

    // Orthogonality vanishes when the four parts occupy disjoint samples.
    let mut parts = Vec::new();
    for slot in 0..4 {
        let mut m = Tensor2::zeros(4, 3);
        for c in 0..3 {
            m.set(slot, c, rng.gen_range(-2.0..2.0));
        }
        parts.push(m);
    }
    let mut t = Tape::new();
    let v: Vec<_> = parts.iter().map(|m| t.constant(m.clone())).collect();
    let bv = BundleVars { f_c: v[0], f_s: v[1], n_c: v[2], n_s: v[3] };
    let ov = orthogonality_loss(&mut t, &bv, &bv).unwrap();
    let orth_zero = t.scalar_value(ov).abs();

    // Alignment vanishes whenever W descends where the per-feature losses
    // ascend, with every W gap >= the 0.05 margin.
    let mut worst_align: f64 = 0.0;
    for _ in 0..20 {
        let mut ell: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0)).collect();
        // Force distinct values.
        ell.sort_by(f64::total_cmp);
        for i in 1..4 {
            if ell[i] - ell[i - 1] < 1e-3 {
                ell[i] += 0.1 * i as f64;
            }
        }
        let mut order: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let ell_shuffled: Vec<f64> = order.iter().map(|&i| ell[i]).collect();
        // Rank of each entry among the shuffled losses.
        let mut w = Tensor2::zeros(1, 4);
        for pos in 0..4 {
            let rank = ell_shuffled
                .iter()
                .filter(|&&v| v < ell_shuffled[pos])
                .count();
            w.set(0, pos, 0.4 - 0.1 * rank as f64);
        }
        let mut t = Tape::new();
        let wv = t.constant(w);
        let av = alignment_loss(&mut t, wv, &ell_shuffled, 0.05).unwrap();
        worst_align = worst_align.max(t.scalar_value(av).abs());
    }

    // Recombination exact to 1e-12 at alpha=0.7, beta=0.5.
    let mut worst_recomb: f64 = 0.0;
    for _ in 0..50 {
        let mut t = Tape::new();
        let mut c = |t: &mut Tape| {
            let v = rng.gen_range(0.0..5.0);
            t.constant_scalar(v)
        };
        let parts = LossTermVars {
            task: c(&mut t),
            untask: c(&mut t),
            orth: c(&mut t),
            cmd: c(&mut t),
            recon: c(&mut t),
            align: c(&mut t),
            contri: c(&mut t),
        };
        let (_, breakdown) = total_loss(&mut t, &parts, 0.7, 0.5);
        worst_recomb =
            worst_recomb.max((breakdown.recombine(0.7, 0.5) - breakdown.total).abs());
    }

    let pass = worst_self <= 1e-10
        && worst_sym <= 1e-10
        && orth_zero <= 1e-12
        && worst_align <= 1e-12
        && worst_recomb <= 1e-12;
    let detail = format!(
        "cmd self {worst_self:.1e}, symmetry {worst_sym:.1e} (<=1e-10); \
         disjoint orth {orth_zero:.1e}; rank-matched align {worst_align:.1e}; \
         recombination {worst_recomb:.1e} (<=1e-12)"
    );
    assert!(report("3", pass, &detail));
}

// ----------------------------------------------------------------------
// Criterion 4: oracle equivalence on 20 random small instances, 1e-10.

#[test]
fn criterion_4_oracle_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(40);
    let mut worst: f64 = 0.0;

    for _ in 0..20 {
        let rows = rng.gen_range(2..=8);
        let d = rng.gen_range(1..=5);

        // CMD oracle: direct loop evaluation of the moment-distance formula.
        let x = randn(rows, d, &mut rng);
        let y = randn(rows, d, &mut rng);
        let k_max = 5;
        let col_mean = |m: &Tensor2| -> Vec<f64> {
            (0..m.cols)
                .map(|c| (0..m.rows).map(|r| m.at(r, c)).sum::<f64>() / m.rows as f64)
                .collect()
        };
        let cmom = |m: &Tensor2, k: i32| -> Vec<f64> {
            let mu = col_mean(m);
            (0..m.cols)
                .map(|c| {
                    (0..m.rows).map(|r| (m.at(r, c) - mu[c]).powi(k)).sum::<f64>()
                        / m.rows as f64
                })
                .collect()
        };
        let l2 = |v: &[f64], w: &[f64]| -> f64 {
            v.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        let hi = x.data.iter().chain(&y.data).copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = x.data.iter().chain(&y.data).copied().fold(f64::INFINITY, f64::min);
        let range = (hi - lo).max(1e-8);
        let mut want = l2(&col_mean(&x), &col_mean(&y)) / range;
        for k in 2..=k_max {
            want += l2(&cmom(&x, k), &cmom(&y, k)) / range.powi(k);
        }
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let yv = t.constant(y.clone());
        let got = cmd_loss(&mut t, xv, yv, &CmdConfig::default()).unwrap();
        worst = worst.max((t.scalar_value(got) - want).abs());

        // Orthogonality oracle: explicit Gram loops.
        let mats: Vec<Tensor2> = (0..8).map(|_| randn(rows, d, &mut rng)).collect();
        let gram_sq = |a: &Tensor2, b: &Tensor2| -> f64 {
            let mut s = 0.0;
            for i in 0..a.cols {
                for j in 0..b.cols {
                    let dot: f64 = (0..a.rows).map(|r| a.at(r, i) * b.at(r, j)).sum();
                    s += dot * dot;
                }
            }
            s
        };
        let mut want = 0.0;
        for base in [0, 4] {
            want += gram_sq(&mats[base], &mats[base + 1]);
            want += gram_sq(&mats[base], &mats[base + 2]);
            want += gram_sq(&mats[base + 1], &mats[base + 3]);
        }
        let mut t = Tape::new();
        let v: Vec<_> = mats.iter().map(|m| t.constant(m.clone())).collect();
        let b1 = BundleVars { f_c: v[0], f_s: v[1], n_c: v[2], n_s: v[3] };
        let b2 = BundleVars { f_c: v[4], f_s: v[5], n_c: v[6], n_s: v[7] };
        let got = orthogonality_loss(&mut t, &b1, &b2).unwrap();
        worst = worst.max((t.scalar_value(got) - want).abs());

        // Reconstruction oracle: half the total squared error.
        let six: Vec<Tensor2> = (0..6).map(|_| randn(rows, d, &mut rng)).collect();
        let sq = |a: &Tensor2, b: &Tensor2| -> f64 {
            a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let want = 0.5
            * (sq(&six[0], &six[2]) + sq(&six[0], &six[4]) + sq(&six[1], &six[3])
                + sq(&six[1], &six[5]));
        let mut t = Tape::new();
        let v: Vec<_> = six.iter().map(|m| t.constant(m.clone())).collect();
        let got =
            reconstruction_loss(&mut t, [v[0], v[1]], [v[2], v[3]], [v[4], v[5]]).unwrap();
        worst = worst.max((t.scalar_value(got) - want).abs());

        // Alignment oracle: exhaustive ordered pairs.
        let logits = randn(1, 4, &mut rng);
        let ell: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.5)).collect();
        let mut t = Tape::new();
        let lv = t.constant(logits);
        let wv = t.softmax_rows(lv);
        let w = t.value(wv).data.clone();
        let got = alignment_loss(&mut t, wv, &ell, 0.05).unwrap();
        let mut want = 0.0;
        for u in 0..4 {
            for p in 0..4 {
                if u != p {
                    let s = if ell[u] < ell[p] { 1.0 } else { -1.0 };
                    want += (s * (w[p] - w[u] + 0.05)).max(0.0);
                }
            }
        }
        want /= 6.0;
        worst = worst.max((t.scalar_value(got) - want).abs());
    }

    let detail = format!("worst |engine - oracle| = {worst:.2e} (<= 1e-10)");
    assert!(report("4", worst <= 1e-10, &detail));
}

// ----------------------------------------------------------------------
// Criteria 5 and 6 share one expensive training campaign.

struct RecoveryRun {
    base_mae: f64,
    trained_mae: f64,
    cmd_init: f64,
    cmd_trained: f64,
    probe_n: f64,
    probe_fs: f64,
    mae_no_orth: f64,
    mae_no_cmd: f64,
    train_secs: f64,
}

fn recovery_config() -> TrainConfig {
    TrainConfig {
        latent_d: 3,
        hidden_h: 16,
        patience: 200,
        max_epochs: 200,
        ..TrainConfig::default()
    }
}

fn recovery() -> &'static RecoveryRun {
    static RUN: OnceLock<RecoveryRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = SyntheticSpec::recovery_default();
        let data = generate(&spec).unwrap();
        let cfg = recovery_config();
        let (tr_idx, va_idx) = split_indices(data.len(), cfg.seed);
        let (pv, pa) = data.pooled();

        let held_out_cmd = |ckpt: &Checkpoint| -> f64 {
            let batch = make_batch(&pv, &pa, &data, &va_idx);
            let feats = extract(&ckpt.params, &ckpt.config, &batch).unwrap();
            let mut t = Tape::new();
            let a = t.constant(feats.bundle_v.f_c.clone());
            let b = t.constant(feats.bundle_a.f_c.clone());
            let v = cmd_loss(&mut t, a, b, &CmdConfig::with_order(cfg.cmd_k)).unwrap();
            t.scalar_value(v)
        };

        let ckpt0 = Checkpoint::init(&cfg, data.d_v, data.d_a).unwrap();
        let base_mae = evaluate_indices(&ckpt0, &data, &va_idx).unwrap().mae;
        let cmd_init = held_out_cmd(&ckpt0);

        let t0 = Instant::now();
        let outcome = train(&data, &cfg).unwrap();
        let train_secs = t0.elapsed().as_secs_f64();
        let ck = outcome.checkpoint;
        let trained_mae = evaluate_indices(&ck, &data, &va_idx).unwrap().mae;
        let cmd_trained = held_out_cmd(&ck);

        let tb = make_batch(&pv, &pa, &data, &tr_idx);
        let vb = make_batch(&pv, &pa, &data, &va_idx);
        let ft = extract(&ck.params, &ck.config, &tb).unwrap();
        let fv = extract(&ck.params, &ck.config, &vb).unwrap();
        let probe_n =
            logistic_probe_accuracy(&ft.stacked_n(), &tb.y_aux, &fv.stacked_n(), &vb.y_aux)
                .unwrap();
        let probe_fs =
            logistic_probe_accuracy(&ft.fusion.f_s, &tb.y_aux, &fv.fusion.f_s, &vb.y_aux)
                .unwrap();

        let ablate_mae = |toggles: LossToggles| -> f64 {
            let cfg_t = TrainConfig { toggles, ..cfg.clone() };
            let out = train(&data, &cfg_t).unwrap();
            evaluate_indices(&out.checkpoint, &data, &va_idx).unwrap().mae
        };
        let mae_no_orth = ablate_mae(LossToggles { orth: false, ..LossToggles::default() });
        let mae_no_cmd = ablate_mae(LossToggles { cmd: false, ..LossToggles::default() });

        RecoveryRun {
            base_mae,
            trained_mae,
            cmd_init,
            cmd_trained,
            probe_n,
            probe_fs,
            mae_no_orth,
            mae_no_cmd,
            train_secs,
        }
    })
}

#[test]
fn criterion_5a_validation_mae_recovery() {
    let r = recovery();
    let ratio = r.trained_mae / r.base_mae;
    let pass = ratio <= 0.2 && r.train_secs < 600.0;
    let detail = format!(
        "val MAE {:.4} vs untrained {:.4}, ratio {:.4} (<= 0.2); trained in {:.0}s (< 600s)",
        r.trained_mae, r.base_mae, ratio, r.train_secs
    );
    assert!(report("5a", pass, &detail));
}

#[test]
fn criterion_5b_probe_separation() {
    let r = recovery();
    let pass_n = r.probe_n <= 0.60;
    let pass_fs = r.probe_fs >= 0.90;
    let detail = format!(
        "probe acc on stacked unrelated features {:.4} (bound <= 0.60 NOT met — \
         known limitation, see README), on fused features {:.4} (>= 0.90 {})",
        r.probe_n,
        r.probe_fs,
        if pass_fs { "met" } else { "NOT met" }
    );
    assert!(report("5b", pass_n && pass_fs, &detail));
}

#[test]
fn criterion_5c_held_out_cmd_drop() {
    let r = recovery();
    let drop = r.cmd_init / r.cmd_trained;
    let pass = drop >= 10.0;
    let detail = format!(
        "held-out common-feature cmd {:.5} -> {:.5}, drop x{:.1} (>= 10)",
        r.cmd_init, r.cmd_trained, drop
    );
    assert!(report("5c", pass, &detail));
}

#[test]
fn criterion_6_ablation_trend() {
    let r = recovery();
    let pass = r.trained_mae < r.mae_no_orth && r.trained_mae < r.mae_no_cmd;
    let detail = format!(
        "full val MAE {:.4} vs no-orth {:.4} and no-cmd {:.4} (full strictly best)",
        r.trained_mae, r.mae_no_orth, r.mae_no_cmd
    );
    assert!(report("6", pass, &detail));
}

// ----------------------------------------------------------------------
// Criterion 7: fusion attention contracts on 100 random samples.

#[test]
fn criterion_7_attention_contracts() {
    let mut rng = ChaCha12Rng::seed_from_u64(70);
    let d = 5;
    let iaf = IafParams::init(d, &mut rng);

    let mut worst_simplex: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    for _ in 0..100 {
        let mats: Vec<Tensor2> = (0..4).map(|_| randn(1, d, &mut rng)).collect();
        let mut t = Tape::new();
        let v: Vec<_> = mats.iter().map(|m| t.constant(m.clone())).collect();
        let bv = BundleVars { f_c: v[0], f_s: v[1], n_c: v[0], n_s: v[1] };
        let ba = BundleVars { f_c: v[2], f_s: v[3], n_c: v[2], n_s: v[3] };
        let iv = iaf.register(&mut t, false);
        let fusion = fuse(&mut t, &bv, &ba, &iv).unwrap();
        let w = t.value(fusion.w_attn).row(0).to_vec();
        let sum: f64 = w.iter().sum();
        worst_simplex = worst_simplex.max((sum - 1.0).abs());
        if w.iter().any(|&p| p < 0.0) {
            worst_simplex = f64::INFINITY;
        }

        // Independent product check: V = stack * W_v with plain loops.
        let stack = [&mats[0], &mats[2], &mats[1], &mats[3]];
        let mut fs = vec![0.0; d];
        for (e, row) in stack.iter().enumerate() {
            for j in 0..d {
                let mut vej = 0.0;
                for i in 0..d {
                    vej += row.at(0, i) * iaf.w_v.at(i, j);
                }
                fs[j] += w[e] * vej;
            }
        }
        let got = t.value(fusion.f_s).row(0);
        for (g, e) in got.iter().zip(&fs) {
            worst_product = worst_product.max((g - e).abs());
        }
    }

    // Identical stacked rows force uniform attention.
    let same = randn(1, d, &mut rng);
    let mut t = Tape::new();
    let sv = t.constant(same);
    let b = BundleVars { f_c: sv, f_s: sv, n_c: sv, n_s: sv };
    let iv = iaf.register(&mut t, false);
    let fusion = fuse(&mut t, &b, &b, &iv).unwrap();
    let wu = t.value(fusion.w_attn).row(0).to_vec();
    let worst_uniform = wu.iter().map(|p| (p - 0.25).abs()).fold(0.0, f64::max);

    let pass = worst_simplex <= 1e-10 && worst_product <= 1e-12 && worst_uniform <= 1e-12;
    let detail = format!(
        "simplex dev {worst_simplex:.1e} (<=1e-10); W*V product dev {worst_product:.1e} \
         (<=1e-12); uniform-on-identical dev {worst_uniform:.1e} (<=1e-12)"
    );
    assert!(report("7", pass, &detail));
}

// ----------------------------------------------------------------------
// Criterion 8: determinism and checkpoint persistence.

#[test]
fn criterion_8_determinism_and_persistence() {
    let spec = SyntheticSpec {
        n_samples: 120,
        d_v: 12,
        d_a: 12,
        ..SyntheticSpec::recovery_default()
    };
    let data = generate(&spec).unwrap();
    let cfg = TrainConfig { max_epochs: 4, latent_d: 3, hidden_h: 8, ..TrainConfig::default() };

    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    let logs_equal = a.log.len() == b.log.len()
        && a.log.iter().zip(&b.log).all(|(x, y)| {
            x.train == y.train && x.val == y.val && x.val_mae == y.val_mae
        });
    let ckpt_equal = a.checkpoint == b.checkpoint;

    // Round-trip, then one more step from both copies.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    a.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let roundtrip_equal = loaded == a.checkpoint;

    let (pv, pa) = data.pooled();
    let idx: Vec<usize> = (0..16).collect();
    let batch = make_batch(&pv, &pa, &data, &idx);
    let mut live = a.checkpoint.clone();
    let mut revived = loaded;
    let l1 = train_step(&mut live, &batch).unwrap();
    let l2 = train_step(&mut revived, &batch).unwrap();
    let next_step_equal = l1 == l2 && live == revived;

    let pass = logs_equal && ckpt_equal && roundtrip_equal && next_step_equal;
    let detail = format!(
        "identical reruns: logs {logs_equal}, checkpoints {ckpt_equal}; \
         round-trip exact {roundtrip_equal}; post-reload step bit-equal {next_step_equal}"
    );
    assert!(report("8", pass, &detail));
}

// ----------------------------------------------------------------------
// Criterion 9: mutual-information diagnostic, >= 10x independent baseline.

#[test]
fn criterion_9_mi_diagnostic() {
    let shared_only = SyntheticSpec {
        d_specific: 0,
        d_nuisance: 0,
        noise_std: 0.0,
        label_weights: vec![3.0, 2.0, 2.0, 1.5],
        ..SyntheticSpec::recovery_default()
    };
    let data = generate(&shared_only).unwrap();
    let mi = segment_mi(&data.v, &data.a, 8).unwrap();

    // Baseline: pair each sample's video with an unrelated sample's audio
    // (shift by half the dataset), destroying the shared factor.
    let half = data.len() / 2;
    let shuffled_a: Vec<Tensor2> = (0..data.len())
        .map(|i| data.a[(i + half) % data.len()].clone())
        .collect();
    let baseline = segment_mi(&data.v, &shuffled_a, 8).unwrap();

    let min_ratio = mi
        .iter()
        .zip(&baseline)
        .map(|(m, b)| m / b.max(1e-6))
        .fold(f64::INFINITY, f64::min);
    let pass = min_ratio >= 10.0;
    let detail = format!(
        "per-segment MI {:.3}..{:.3} nats vs independent baseline {:.4}..{:.4}; \
         min ratio x{:.1} (>= 10)",
        mi.iter().copied().fold(f64::INFINITY, f64::min),
        mi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        baseline.iter().copied().fold(f64::INFINITY, f64::min),
        baseline.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_ratio
    );
    assert!(report("9", pass, &detail));
}
