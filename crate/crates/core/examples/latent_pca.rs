//! Explained-variance spectrum of the latent basis before and after a short
//! training run.

use mhpinn::analysis::{analysis_points, collect_latents, pca_spectrum};
use mhpinn::training::{TrainConfig, Trainer};

fn main() -> mhpinn::Result<()> {
    let cfg = TrainConfig {
        epochs: 1000,
        warmup_epochs: 100,
        width: 16,
        n_b: 6,
        n_x: 16,
        n_t: 16,
        n_nu: 3,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(cfg.clone(), cfg.load_ics()?)?;
    let show = |label: &str, trainer: &Trainer| -> mhpinn::Result<()> {
        let sample = collect_latents(trainer.params(), analysis_points(2000, 0)?, false)?;
        let report = pca_spectrum(&sample.values)?;
        let ratios: Vec<String> = report.ratios.iter().map(|r| format!("{r:.3}")).collect();
        println!("{label}: ratios [{}], r(0.9) = {}", ratios.join(", "), report.rank_at(0.9));
        Ok(())
    };
    show("init   ", &trainer)?;
    trainer.run(|_| {})?;
    show("trained", &trainer)?;
    Ok(())
}
