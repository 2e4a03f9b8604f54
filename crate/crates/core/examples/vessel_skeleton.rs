//! Thins a Y-shaped vessel mask and lists its key points and centerline
//! segments.

use agmn::image::BinaryMask;
use agmn::skeleton::{compute_radii, detect_keypoints, skeletonize, split_segments};

fn main() -> agmn::Result<()> {
    let mask = BinaryMask::from_fn(120, 120, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let trunk = (x - 60.0).abs() <= 4.0 && (10.0..=60.0).contains(&y);
        let arm = |dir: f64| {
            let t = (y - 60.0).clamp(0.0, 50.0);
            (x - (60.0 + dir * t)).abs() <= 3.0 && (60.0..=110.0).contains(&y)
        };
        trunk || arm(1.0) || arm(-1.0)
    });
    let skel = compute_radii(&mask, &skeletonize(&mask))?;
    println!("{} foreground pixels thinned to {} skeleton points", mask.count(), skel.len());

    let kps = detect_keypoints(&skel);
    for k in kps.all() {
        println!("{:?} at ({}, {})", k.kind, k.position.x, k.position.y);
    }
    let split = split_segments(&skel, &kps);
    for s in &split.segments {
        println!("segment {:?}: {} px, max radius {:.2}", s.terminals, s.len(), s.max_radius());
    }
    Ok(())
}
