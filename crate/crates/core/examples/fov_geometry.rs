//! Field-of-view polygons and the pose-compatibility score.
//!
//! `cargo run --example fov_geometry`

use crowdflow::compat::{fov, group_fov, pose_compat_members};
use crowdflow::geometry::Rect;
use crowdflow::Pose;

fn main() {
    let img = Rect::new(0.0, 0.0, 720.0, 480.0);
    let members = [([100.0, 240.0], Pose::Right), ([360.0, 450.0], Pose::Back), ([620.0, 240.0], Pose::Left)];
    let zone = group_fov(&members, &img);
    println!("interaction zone: {} vertices, area {:.0} px^2", zone.vertices.len(), zone.area());

    for (name, loc, pose) in [
        ("behind the group, facing it", [360.0, 470.0], Pose::Back),
        ("left of the group, facing away", [50.0, 240.0], Pose::Left),
        ("inside the zone, facing right", [300.0, 300.0], Pose::Right),
    ] {
        let s = pose_compat_members(loc, pose, &members, &img);
        let own = fov(loc, pose, &img).area();
        println!("{name:32} own FoV {own:>7.0} px^2  S = {s:.3}");
    }
}
