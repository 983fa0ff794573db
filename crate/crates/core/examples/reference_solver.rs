//! Finite-difference reference: a stationary kink that should not move, and
//! a Fourier initial condition steepening and decaying.

use mhpinn::reference::{exact_kink, profile_max, solve_fd, FdGrid, StationaryKink};
use mhpinn::sampling::{gen_ics, IcEnsembleSpec};

fn main() -> mhpinn::Result<()> {
    let nu = 0.1;
    let grid = FdGrid::stable(513, 5.0, nu, 2.0 * nu, 5)?;
    let xs = grid.nodes();
    for s in solve_fd(&StationaryKink { nu }, &grid)? {
        let drift = s.values.iter().zip(&xs).map(|(u, &x)| (u - exact_kink(x, nu).v).abs()).fold(0.0, f64::max);
        println!("kink t = {:.1}: max drift {drift:.2e}", s.t);
    }

    let ic = gen_ics(&IcEnsembleSpec::fourier(1, 4))?.remove(0);
    let grid = FdGrid::stable(257, 5.0, 0.05, profile_max(&ic), 5)?;
    for s in solve_fd(&ic, &grid)? {
        let sup = s.values.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let dx = grid.dx();
        let steep = s.values.windows(2).map(|w| ((w[1] - w[0]) / dx).abs()).fold(0.0, f64::max);
        println!("fourier t = {:.1}: max|u| {sup:.4}, max|u_x| {steep:.4}", s.t);
    }
    Ok(())
}
