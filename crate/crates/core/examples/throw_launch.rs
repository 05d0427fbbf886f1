//! Sample throws from the default launcher and follow one to the ground.
//!
//! `cargo run --release --example throw_launch`
use dexcatch::simenv::{ballistic_landing, integrate_flight, launch_object, LauncherConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dexcatch::Result<()> {
    let launcher = LauncherConfig::default();
    let g = 9.81;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    println!("{:>28} {:>28} {:>8} {:>16}", "release (m)", "velocity (m/s)", "t (s)", "landing (m)");
    for _ in 0..8 {
        let t = launch_object(&mut rng, &launcher, g)?;
        println!(
            "{:>28} {:>28} {:>8.3} {:>16}",
            format!("{:.2?}", t.position.as_slice()),
            format!("{:.2?}", t.velocity.as_slice()),
            t.flight_time,
            format!("{:.2?}", t.landing)
        );
    }

    let throw = launch_object(&mut rng, &launcher, g)?;
    let (mut p, mut v) = (throw.position, throw.velocity);
    let dt = 0.002;
    let mut t = 0.0;
    while p.z > 0.0 {
        integrate_flight(&mut p, &mut v, g, 0.0, dt);
        t += dt;
    }
    let (landing, t_land) = ballistic_landing(&throw.position, &throw.velocity, g);
    println!("\nintegrated: ground at t = {t:.3} s near ({:.3}, {:.3})", p.x, p.y);
    println!("closed form: ground at t = {t_land:.3} s at ({:.3}, {:.3})", landing[0], landing[1]);
    Ok(())
}
