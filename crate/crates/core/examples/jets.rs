//! Value, first and second derivatives of a random network, propagated as
//! jets, next to central finite differences of the plain forward pass.

use mhpinn::model::{assemble_solution, init_params, solution_values, Arch, IcFunction};
use mhpinn::numerics::Rng;

fn main() -> mhpinn::Result<()> {
    let params = init_params(Arch::new(3, 16, 4, 1), &mut Rng::new(1))?;
    let ic = IcFunction::fourier(vec![0.4, -0.2], vec![0.1]);
    let (x, t, nu) = (0.7, 1.3, 0.1);
    let u = assemble_solution(&params, &ic, 0, x, t, nu)?;
    let f = |x: f64, t: f64| solution_values(&params, &ic, 0, &[[x, t, nu]]).map(|v| v[0]);
    let h = 1e-4;
    let fd_x = (f(x + h, t)? - f(x - h, t)?) / (2.0 * h);
    let fd_t = (f(x, t + h)? - f(x, t - h)?) / (2.0 * h);
    let fd_xx = (f(x + h, t)? - 2.0 * f(x, t)? + f(x - h, t)?) / (h * h);
    println!("u     {:+.10}", u.v);
    println!("u_x   {:+.10}  fd {:+.10}", u.vx, fd_x);
    println!("u_t   {:+.10}  fd {:+.10}", u.vt, fd_t);
    println!("u_xx  {:+.10}  fd {:+.10}", u.vxx, fd_xx);
    Ok(())
}
