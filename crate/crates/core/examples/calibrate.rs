//! Scratch calibration run for the recovery benchmark (not part of the test
//! suite). Prints the quantities the acceptance thresholds pin down.

use std::time::Instant;

use idrl_core::autodiff::Tape;
use idrl_core::datagen::{generate, SyntheticSpec};
use idrl_core::engine::{
    evaluate_indices, extract, logistic_probe_accuracy, make_batch, split_indices, train,
    Checkpoint, LossToggles, TrainConfig,
};
use idrl_core::losses::{cmd_loss, CmdConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |name: &str, default: usize| -> usize {
        args.iter()
            .position(|a| a == name)
            .map(|i| args[i + 1].parse().unwrap())
            .unwrap_or(default)
    };
    let spec = SyntheticSpec::recovery_default();
    let data = generate(&spec).unwrap();
    let mut toggles = LossToggles::default();
    if args.iter().any(|a| a == "--no-untask") {
        toggles.untask = false;
    }
    let cfg = TrainConfig {
        latent_d: get("--latent", 8),
        hidden_h: get("--hidden", 16),
        patience: get("--patience", 10),
        max_epochs: get("--epochs", 200),
        toggles,
        ..TrainConfig::default()
    };
    println!(
        "config: latent {} hidden {} patience {} epochs {}",
        cfg.latent_d, cfg.hidden_h, cfg.patience, cfg.max_epochs
    );
    let n_pos: usize = data.labels.iter().map(|l| l.y_aux as usize).sum();
    println!("positives: {n_pos}/{}", data.len());

    let (tr_idx, va_idx) = split_indices(data.len(), cfg.seed);
    let (pv, pa) = data.pooled();

    // Untrained baselines.
    let ckpt0 = Checkpoint::init(&cfg, data.d_v, data.d_a).unwrap();
    let base = evaluate_indices(&ckpt0, &data, &va_idx).unwrap();
    println!("untrained val MAE {:.4} RMSE {:.4}", base.mae, base.rmse);

    let cmd_full = |ckpt: &Checkpoint| -> f64 {
        let batch = make_batch(&pv, &pa, &data, &va_idx);
        let feats = extract(&ckpt.params, &ckpt.config, &batch).unwrap();
        let mut t = Tape::new();
        let a = t.constant(feats.bundle_v.f_c.clone());
        let b = t.constant(feats.bundle_a.f_c.clone());
        let v = cmd_loss(&mut t, a, b, &CmdConfig::with_order(cfg.cmd_k)).unwrap();
        t.scalar_value(v)
    };
    // Mini-batch-mean variant: CMD averaged over 16-row chunks.
    let cmd_mb = |ckpt: &Checkpoint| -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for chunk in va_idx.chunks(16) {
            if chunk.len() < 2 {
                continue;
            }
            let batch = make_batch(&pv, &pa, &data, chunk);
            let feats = extract(&ckpt.params, &ckpt.config, &batch).unwrap();
            let mut t = Tape::new();
            let a = t.constant(feats.bundle_v.f_c.clone());
            let b = t.constant(feats.bundle_a.f_c.clone());
            let v = cmd_loss(&mut t, a, b, &CmdConfig::with_order(cfg.cmd_k)).unwrap();
            total += t.scalar_value(v);
            n += 1;
        }
        total / n as f64
    };
    let cmd_of = |ckpt: &Checkpoint| -> f64 {
        let f = cmd_full(ckpt);
        let m = cmd_mb(ckpt);
        println!("  cmd full-batch {f:.6}  minibatch-mean {m:.6}");
        f
    };
    let cmd0 = cmd_of(&ckpt0);
    println!("untrained held-out cmd(F_c^v, F_c^a): {cmd0:.6}");

    // Probe accuracies before any training.
    {
        let tb = make_batch(&pv, &pa, &data, &tr_idx);
        let vb = make_batch(&pv, &pa, &data, &va_idx);
        let ft = extract(&ckpt0.params, &ckpt0.config, &tb).unwrap();
        let fv = extract(&ckpt0.params, &ckpt0.config, &vb).unwrap();
        let acc_n =
            logistic_probe_accuracy(&ft.stacked_n(), &tb.y_aux, &fv.stacked_n(), &vb.y_aux)
                .unwrap();
        let acc_fs =
            logistic_probe_accuracy(&ft.fusion.f_s, &tb.y_aux, &fv.fusion.f_s, &vb.y_aux).unwrap();
        println!("init probes: N {acc_n:.4}  F_S {acc_fs:.4}");
    }

    let t0 = Instant::now();
    let outcome = train(&data, &cfg).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let ck = &outcome.checkpoint;
    println!(
        "trained {} epochs in {:.1}s (best epoch {}, best val {:.4})",
        outcome.log.len(),
        secs,
        ck.epoch,
        ck.best_val
    );
    if let Some(best) = outcome.log.iter().find(|l| l.epoch == ck.epoch) {
        println!(
            "best-epoch val breakdown: task {:.4} untask {:.4} orth {:.4} cmd {:.4} recon {:.4} align {:.4} contri {:.4}",
            best.val.task, best.val.untask, best.val.orth, best.val.cmd,
            best.val.recon, best.val.align, best.val.contri
        );
    }
    let trained = evaluate_indices(ck, &data, &va_idx).unwrap();
    println!(
        "trained val MAE {:.4} (ratio {:.4}; need <= 0.2)",
        trained.mae,
        trained.mae / base.mae
    );
    let cmd1 = cmd_of(ck);
    println!("trained cmd {cmd1:.6}, drop x{:.2} (need >= 10)", cmd0 / cmd1);

    // Probes: train on train-split features, evaluate on val split.
    let tb = make_batch(&pv, &pa, &data, &tr_idx);
    let vb = make_batch(&pv, &pa, &data, &va_idx);
    let ft = extract(&ck.params, &ck.config, &tb).unwrap();
    let fv = extract(&ck.params, &ck.config, &vb).unwrap();
    let acc_n = logistic_probe_accuracy(&ft.stacked_n(), &tb.y_aux, &fv.stacked_n(), &vb.y_aux)
        .unwrap();
    let acc_fs =
        logistic_probe_accuracy(&ft.fusion.f_s, &tb.y_aux, &fv.fusion.f_s, &vb.y_aux).unwrap();
    println!("probe on stacked N: {acc_n:.4} (need <= 0.60)");
    println!("probe on F_S: {acc_fs:.4} (need >= 0.90)");

    // Ablations for the trend criterion.
    for (name, toggles) in [
        ("no_orth", LossToggles { orth: false, ..LossToggles::default() }),
        ("no_cmd", LossToggles { cmd: false, ..LossToggles::default() }),
    ] {
        let cfg_a = TrainConfig { toggles, ..cfg.clone() };
        let t1 = Instant::now();
        let out_a = train(&data, &cfg_a).unwrap();
        let rep = evaluate_indices(&out_a.checkpoint, &data, &va_idx).unwrap();
        println!(
            "{name}: val MAE {:.4} ({} epochs, {:.1}s)",
            rep.mae,
            out_a.log.len(),
            t1.elapsed().as_secs_f64()
        );
    }
}
