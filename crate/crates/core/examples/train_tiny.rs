//! A small training run followed by a comparison with the reference solver.

use mhpinn::reference::{evaluate, EvalSpec};
use mhpinn::training::{TrainConfig, Trainer};

fn main() -> mhpinn::Result<()> {
    let cfg = TrainConfig {
        epochs: 1500,
        warmup_epochs: 100,
        decay_every: 500,
        depth: 2,
        width: 16,
        n_b: 4,
        n_ics: 2,
        n_x: 20,
        n_t: 20,
        n_nu: 3,
        nu_min: 0.1,
        ..TrainConfig::default()
    };
    let ics = cfg.load_ics()?;
    let mut trainer = Trainer::new(cfg, ics.clone())?;
    trainer.run(|row| {
        if row.epoch % 250 == 0 {
            println!("epoch {:5} pde {:.3e} ortho {:.3}", row.epoch, row.pde_loss, row.ortho_loss);
        }
    })?;
    let spec = EvalSpec {
        n_x: 129,
        n_snapshots: 10,
        t_final: 2.0,
        nus: vec![0.1, 0.3, 1.0],
    };
    let report = evaluate(trainer.params(), &ics, &spec)?;
    for e in &report.entries {
        println!("ic {} nu {:.2}: rel L2 {:.3}", e.ic, e.nu, e.rel_l2);
    }
    println!("median rel L2 {:.3}", report.median_rel_l2);
    Ok(())
}
