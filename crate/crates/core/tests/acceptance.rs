//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! for each and exits nonzero if any fails.

use std::collections::BTreeSet;
use std::time::Instant;

use aegg::checks::{gradcheck_suite, gradcheck_suite_with_step};
use aegg::glyph::image::{decode_pgm, encode_pgm};
use aegg::glyph::{median_filter, split_corpus, synth_corpus, Corpus, GlyphImage, Split, StyleTransform};
use aegg::models::{build_transfer, shape_plan, Mode, NetConfig, Pass};
use aegg::training::{evaluate_identity, total_g_loss, LossParts, Trainer, LAST_CKPT, METRICS_CSV};
use aegg::{ParamStore, Rng, Tape, Tensor};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn corpus(n: usize, style: &str, seed: u64) -> Corpus {
    let style: StyleTransform = style.parse().unwrap();
    let c = synth_corpus(n, 32, &style, seed).unwrap();
    split_corpus(&c, 0.2, seed).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let cases = gradcheck_suite(8, 5e-3)?;
    let secs = start.elapsed().as_secs_f64();
    let mut detail = Vec::new();
    let mut ok = secs < 120.0;
    for c in &cases {
        ok &= c.report.passed();
        println!(
            "    {:<20} worst rel err {:.2e} (analytic {:.3e}, numeric {:.3e}) over {} coords ({} skipped at kinks){}",
            c.name,
            c.report.worst_rel_err,
            c.report.worst_analytic,
            c.report.worst_numeric,
            c.report.checked,
            c.report.skipped,
            if c.report.passed() { "" } else { "  <-- FAIL" }
        );
    }
    let worst = cases.iter().map(|c| c.report.worst_rel_err).fold(0.0, f64::max);
    detail.push(format!("{} checks, worst {worst:.2e} <= 5e-3, {secs:.1}s < 120s", cases.len()));
    // Truncation error shrinks as h², so a smaller step must meet a tighter bound.
    let fine = gradcheck_suite_with_step(8, 5e-4, 1e-4)?;
    let fine_worst = fine.iter().map(|c| c.report.worst_rel_err).fold(0.0, f64::max);
    ok &= fine.iter().all(|c| c.report.passed());
    detail.push(format!("h=1e-4 worst {fine_worst:.2e} <= 5e-4"));
    Ok((ok, detail.join("; ")))
}

fn shape_plan_256() -> Outcome {
    let plan = shape_plan(&NetConfig::for_size(256))?;
    let enc_ok = plan.encoder_sides == [128, 64, 32, 16, 8, 4, 2, 1];
    let dec_ok = plan.decoder_sides == [2, 4, 8, 16, 32, 64, 128];
    let res_sides: Vec<usize> = plan.residual_layers.iter().map(|j| plan.decoder_sides[*j]).collect();
    let taps = plan.tap_sides();

    // A narrow instance of the same plan, to confirm the built graph follows it.
    let cfg = NetConfig {
        base_width: 2,
        width_cap: 4,
        ..NetConfig::for_size(256)
    };
    let mut store = ParamStore::<f32>::new();
    let g = build_transfer(&cfg, &mut store, &mut Rng::new(0))?;
    let mut tape = Tape::new();
    let mut pass = Pass::new(&mut tape, &store, Mode::Eval);
    let x = pass.tape.constant(Tensor::full([1, 1, 256, 256], -1.0));
    let out = g.forward(&mut pass, x)?;
    let built_taps: Vec<usize> = out.taps.vars.iter().map(|v| tape.shape(*v)[2]).collect();
    let out_shape = tape.value(out.image).shape();
    let enc_blocks = (0..).take_while(|i| store.id(&format!("G.enc{i}.conv.weight")).is_some()).count();
    let dec_blocks = (0..).take_while(|i| store.id(&format!("G.dec{i}.deconv.weight")).is_some()).count();
    let res_blocks: Vec<usize> = (0..7).filter(|j| store.id(&format!("G.res{j}.conv1.weight")).is_some()).collect();

    let ok = enc_ok
        && dec_ok
        && res_sides == [2, 4]
        && taps == [16, 32, 64, 128]
        && built_taps == taps
        && out_shape == [1, 1, 256, 256]
        && enc_blocks == 8
        && dec_blocks == 7
        && store.id("G.out.deconv.weight").is_some()
        && res_blocks == [0, 1];
    Ok((
        ok,
        format!(
            "encoder {:?}, decoder {:?} + final deconv, residual sides {res_sides:?}, taps {taps:?}, built {enc_blocks}+{dec_blocks} blocks",
            plan.encoder_sides, plan.decoder_sides
        ),
    ))
}

fn loss_assembly() -> Outcome {
    let cfg = aegg::training::TrainConfig::default();
    let parts = LossParts {
        adv_g: 0.01,
        sup: 0.02,
        rec: 0.03,
        pixel: 0.0,
    };
    let hand = 0.01 + 100.0 * 0.02 + 100.0 * 0.03;
    let full = total_g_loss(&cfg, &parts);
    let mut ok = (full - hand).abs() <= 1e-6 && (full - 5.01).abs() <= 1e-6;

    let no_adv = aegg::training::TrainConfig {
        use_adversarial: false,
        ..cfg.clone()
    };
    let no_sup = aegg::training::TrainConfig {
        use_supervise: false,
        ..cfg.clone()
    };
    ok &= (total_g_loss(&no_adv, &parts) - (hand - 0.01)).abs() <= 1e-6;
    ok &= (total_g_loss(&no_sup, &parts) - 0.01).abs() <= 1e-6;
    ok &= total_g_loss(&cfg, &LossParts::default()) == 0.0;
    let with_pixel = LossParts { pixel: 0.004, ..parts };
    ok &= (total_g_loss(&cfg, &with_pixel) - (hand + 100.0 * 0.004)).abs() <= 1e-6;

    // The trainer's tape assembly agrees with the scalar formula, and each
    // ablation removes its network and terms.
    let c = corpus(20, "thicken:1", 3);
    let batch = aegg::glyph::Batch::from_pairs(c.pairs_in(Split::Train).take(4))?;
    let mut worst_rel = 0.0f64;
    for (sup, adv) in [(true, true), (true, false), (false, true), (false, false)] {
        let cfg = aegg::training::TrainConfig {
            use_supervise: sup,
            use_adversarial: adv,
            ..aegg::training::TrainConfig::default()
        };
        let mut t = Trainer::new(cfg.clone())?;
        ok &= t.supervise.is_some() == sup && t.discriminator.is_some() == adv;
        let g = t.g_backward(&batch)?;
        let expect = total_g_loss(&cfg, &g.parts);
        worst_rel = worst_rel.max((f64::from(g.total) - expect).abs() / expect.abs().max(1.0));
        ok &= sup || (g.parts.sup == 0.0 && g.parts.rec == 0.0);
        ok &= adv || g.parts.adv_g == 0.0;
    }
    ok &= worst_rel <= 1e-6;
    Ok((
        ok,
        format!("5.01 vs hand sum {hand} (|diff| {:.1e}); tape vs formula rel {worst_rel:.1e}", (full - hand).abs()),
    ))
}

fn autoencoder_skips() -> Outcome {
    let start = Instant::now();
    let c = corpus(500, "thicken:1", 11);
    let mut best = Vec::new();
    for skip_mode in [aegg::models::SkipMode::Aegg, aegg::models::SkipMode::None] {
        let cfg = aegg::training::TrainConfig {
            use_adversarial: false,
            lambda_pixel: 0.0,
            epochs: 30,
            seed: 5,
            net: NetConfig {
                skip_mode,
                ..NetConfig::for_size(32)
            },
            ..Default::default()
        };
        let mut t = Trainer::new(cfg)?;
        let mut b = f64::INFINITY;
        for e in 1..=30 {
            t.fit_until(&c, None, e)?;
            b = b.min(t.validate_supervise(&c)?.l1);
        }
        best.push(b);
    }
    let (skip, plain) = (best[0], best[1]);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        skip <= 0.10 && plain >= 1.5 * skip && secs < 1800.0,
        format!(
            "val L1 with skips {skip:.4} (<= 0.10), without {plain:.4} = {:.2}x (>= 1.5x), {secs:.0}s",
            plain / skip
        ),
    ))
}

fn transfer_sanity() -> Outcome {
    let start = Instant::now();
    let c = corpus(500, "thicken:1+shear:0.25", 21);
    let baseline = evaluate_identity(&c, Split::Val)?.l1;
    let cfg = aegg::training::TrainConfig {
        epochs: 40,
        seed: 7,
        // Mirroring a pair reverses the shear, so flips would make the
        // target mapping ambiguous.
        augment: false,
        ..Default::default()
    };
    let mut t = Trainer::new(cfg)?;
    let log = t.fit(&c, None)?;
    let best = log.epochs.iter().map(|e| f64::from(e.val_l1)).fold(f64::INFINITY, f64::min);
    let last = log.epochs.last().map(|e| e.val_l1).unwrap_or(f32::NAN);
    let secs = start.elapsed().as_secs_f64();
    let gain = 1.0 - best / baseline;
    Ok((
        gain >= 0.30 && secs < 2700.0,
        format!(
            "copy baseline L1 {baseline:.4}, best val L1 {best:.4} ({:.0}% lower, >= 30%), final {last:.4}, {secs:.0}s",
            100.0 * gain
        ),
    ))
}

fn adversarial_plumbing() -> Outcome {
    let c = corpus(200, "thicken:1", 31);
    let cfg = aegg::training::TrainConfig {
        seed: 13,
        ..Default::default()
    };
    let mut t = Trainer::new(cfg)?;
    let g_ids = t.transfer.param_ids();
    let a_ids = t.supervise.as_ref().map(|a| a.param_ids()).unwrap_or_default();
    let d_ids = t.discriminator.as_ref().map(|d| d.param_ids()).unwrap_or_default();
    let batches = t.epoch_batches(&c)?;

    // Gradient isolation, checked on raw gradients before any update.
    t.store.zero_all_grads();
    t.d_backward(&batches[0])?;
    let d_iso = g_ids.iter().chain(&a_ids).all(|id| t.store.grad_is_zero(*id))
        && d_ids.iter().any(|id| !t.store.grad_is_zero(*id));
    t.store.zero_all_grads();
    t.g_backward(&batches[0])?;
    let g_iso = d_ids.iter().all(|id| t.store.grad_is_zero(*id))
        && g_ids.iter().any(|id| !t.store.grad_is_zero(*id))
        && a_ids.iter().any(|id| !t.store.grad_is_zero(*id));
    t.store.zero_all_grads();

    // D alone against the frozen, randomly initialized G.
    let g_before: Vec<Tensor<f32>> = g_ids.iter().map(|id| t.store.value(*id).clone()).collect();
    let mut steps = 0;
    let mut epoch = batches;
    while steps < 200 {
        for b in &epoch {
            if steps == 200 {
                break;
            }
            t.d_step(b)?;
            steps += 1;
        }
        epoch = t.epoch_batches(&c)?;
    }
    let g_frozen = g_ids.iter().zip(&g_before).all(|(id, v)| t.store.value(*id) == v);
    let held_out = aegg::glyph::Batch::from_pairs(c.pairs_in(Split::Val).take(16))?;
    let (real, fake) = t.d_probs(&held_out, Mode::Eval)?;
    let correct = real.iter().filter(|p| **p > 0.5).count() + fake.iter().filter(|p| **p < 0.5).count();
    let acc = correct as f64 / (real.len() + fake.len()) as f64;
    Ok((
        acc >= 0.9 && d_iso && g_iso && g_frozen,
        format!(
            "held-out accuracy {:.1}% after {steps} D steps (>= 90%); D step leaves G/A grads zero: {d_iso}; G/A step leaves D grads zero: {g_iso}",
            100.0 * acc
        ),
    ))
}

fn determinism() -> Outcome {
    // 160 training pairs at batch 16: 10 steps per epoch.
    let c = corpus(200, "thicken:1+shear:0.25", 41);
    let cfg = aegg::training::TrainConfig {
        epochs: 10,
        seed: 17,
        ..Default::default()
    };
    let run = |cfg: &aegg::training::TrainConfig| -> Result<(String, usize), Box<dyn std::error::Error>> {
        let dir = tempfile::tempdir()?;
        let mut t = Trainer::new(cfg.clone())?;
        let log = t.fit(&c, Some(dir.path()))?;
        Ok((std::fs::read_to_string(dir.path().join(METRICS_CSV))?, log.steps.len()))
    };
    let (a, n) = run(&cfg)?;
    let (b, _) = run(&cfg)?;
    let same_seed = a == b && n == 100;

    // Pause after epoch 2, reload from disk, continue to epoch 4.
    let cfg4 = aegg::training::TrainConfig { epochs: 4, ..cfg };
    let whole = tempfile::tempdir()?;
    Trainer::new(cfg4.clone())?.fit(&c, Some(whole.path()))?;
    let split = tempfile::tempdir()?;
    Trainer::new(cfg4)?.fit_until(&c, Some(split.path()), 2)?;
    let mut resumed = Trainer::load(&split.path().join(LAST_CKPT))?;
    resumed.fit(&c, Some(split.path()))?;
    let csv_same = std::fs::read(whole.path().join(METRICS_CSV))? == std::fs::read(split.path().join(METRICS_CSV))?;
    let ckpt_same = std::fs::read(whole.path().join(LAST_CKPT))? == std::fs::read(split.path().join(LAST_CKPT))?;
    Ok((
        same_seed && csv_same && ckpt_same,
        format!(
            "{n}-step CSVs identical: {}; split run CSV identical: {csv_same}; final checkpoint identical: {ckpt_same}",
            a == b
        ),
    ))
}

fn median_oracle(img: &GlyphImage, k: usize) -> GlyphImage {
    let r = (k / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut v = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    v.push(img.get(sx, sy));
                }
            }
            v.sort_unstable();
            out.set(x as usize, y as usize, v[v.len() / 2]);
        }
    }
    out
}

fn data_pipeline() -> Outcome {
    let base = synth_corpus(60, 16, &StyleTransform::Identity, 1)?;
    let mut overlaps = 0;
    for seed in 0..1000 {
        let s = split_corpus(&base, 0.2, seed)?;
        let train: BTreeSet<&str> = s.char_ids(Split::Train);
        let val: BTreeSet<&str> = s.char_ids(Split::Val);
        overlaps += train.intersection(&val).count();
        if train.len() + val.len() != 60 {
            overlaps += 1;
        }
    }

    let mut rng = Rng::new(8);
    let (mut pgm_bad, mut median_bad) = (0, 0);
    for i in 0..100 {
        let (w, h) = (1 + rng.below(40), 1 + rng.below(40));
        let gray: Vec<u8> = (0..w * h).map(|_| rng.below(256) as u8).collect();
        let img = GlyphImage::new(w, h, gray)?;
        let bytes = encode_pgm(&img);
        let back = decode_pgm(&bytes)?;
        if back != img || encode_pgm(&back) != bytes {
            pgm_bad += 1;
        }

        let bin: Vec<u8> = (0..256).map(|_| if rng.bernoulli(0.4) { 255 } else { 0 }).collect();
        let img = GlyphImage::new(16, 16, bin)?;
        let k = [1, 3, 5][i % 3];
        if median_filter(&img, k)? != median_oracle(&img, k) {
            median_bad += 1;
        }
    }
    Ok((
        overlaps == 0 && pgm_bad == 0 && median_bad == 0,
        format!("split overlaps over 1000 seeds: {overlaps}; PGM mismatches: {pgm_bad}/100; median mismatches: {median_bad}/100"),
    ))
}

fn main() {
    aegg::parallel::init_from_env();
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient correctness", gradients),
        ("shape plan at 256", shape_plan_256),
        ("loss assembly", loss_assembly),
        ("autoencoder skips", autoencoder_skips),
        ("transfer vs copy baseline", transfer_sanity),
        ("adversarial plumbing", adversarial_plumbing),
        ("determinism and resume", determinism),
        ("data pipeline", data_pipeline),
    ];
    let only: Option<usize> = std::env::var("AEGG_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {n} ({name}): {} [{detail}] ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
