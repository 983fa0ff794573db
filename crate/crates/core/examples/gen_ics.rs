//! Random Fourier and polynomial initial-condition ensembles.

use mhpinn::model::InitialCondition;
use mhpinn::sampling::{gen_ics, ic_set_to_json, IcEnsembleSpec};

fn main() -> mhpinn::Result<()> {
    for spec in [IcEnsembleSpec::fourier(3, 0), IcEnsembleSpec::polynomial(3, 0)] {
        let ics = gen_ics(&spec)?;
        println!("{:?} ensemble", spec.family);
        for (i, ic) in ics.iter().enumerate() {
            let row: Vec<String> = [-5.0, -2.5, 0.0, 2.5, 5.0].iter().map(|&x| format!("{:+.4}", ic.value(x))).collect();
            println!("  v_{i} at x = -5, -2.5, 0, 2.5, 5: {}", row.join(" "));
        }
    }
    let json = ic_set_to_json(&gen_ics(&IcEnsembleSpec::polynomial(1, 0))?, 0);
    println!("{json}");
    Ok(())
}
