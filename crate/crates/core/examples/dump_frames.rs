// scratch: dump rendered frames as PPM for visual inspection
use sddrive_core::sim::*;
fn main() {
    let map = generate_town(1, &TownSizeParams::default()).unwrap();
    let routes = generate_verified_routes(&map, 2, &RouteConstraints::default(), 0, &RolloutConfig::default()).unwrap();
    let conds = train_conditions();
    let mut expert = ExpertDriver::default();
    let cfg = RolloutConfig { record_frames: true, ..RolloutConfig::default() };
    let trace = rollout(&mut expert, &map, &routes[0], &conds[0], &cfg, &BicycleParams::default(), 3).unwrap();
    println!("termination {:?} steps {}", trace.termination, trace.steps());
    let frames = trace.frames.unwrap();
    for (i, idx) in [0usize, frames.len()/4, frames.len()/2, frames.len()*3/4, frames.len()-1].iter().enumerate() {
        let f = &frames[*idx];
        let mut s = format!("P3\n{} {}\n255\n", f.w, f.h);
        for px in f.data.chunks(3) {
            s.push_str(&format!("{} {} {} ", (px[0]*255.0) as u8, (px[1]*255.0) as u8, (px[2]*255.0) as u8));
        }
        std::fs::write(format!("/tmp/render_check/frame{}.ppm", i), s).unwrap();
    }
    println!("dumped frames");
}
