//! The head orthogonality penalty on a few matrices, including the floor
//! `|n_heads - n_b|` that non-square head matrices cannot get below.

use mhpinn::model::random_orthonormal;
use mhpinn::numerics::{Matrix, Rng};
use mhpinn::physics::{ortho_penalty, ortho_penalty_grad};

fn main() {
    let mut rng = Rng::new(0);
    println!("identity 3x3        {:.6}", ortho_penalty(&Matrix::identity(3)));
    println!("2 * identity 2x2    {:.6}", ortho_penalty(&Matrix::identity(2).scaled(2.0)));
    for (r, c) in [(4, 4), (4, 8), (8, 4)] {
        let w = random_orthonormal(r, c, &mut rng);
        println!("orthonormal {r}x{c}    {:.6}", ortho_penalty(&w));
    }

    // Plain gradient descent on the penalty alone from a random 4x8 start.
    let mut w = Matrix::new(4, 8, (0..32).map(|_| rng.normal()).collect()).unwrap();
    for step in 0..=400 {
        if step % 100 == 0 {
            println!("descent step {step:3}: penalty {:.6}", ortho_penalty(&w));
        }
        let g = ortho_penalty_grad(&w);
        for (v, d) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *v -= 0.01 * d;
        }
    }
}
