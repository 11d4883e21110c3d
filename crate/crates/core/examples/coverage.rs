//! Lloyd iterations: move each robot to the centroid of its Voronoi cell and
//! watch the locational cost fall.

use resalloc::geometry::{Point, Rect};
use resalloc::tasks::{coverage_targets, locational_cost, Density};

fn main() {
    let domain = Rect::new(-10.0, -10.0, 10.0, 10.0);
    let density = Density::Gaussian { sigma: 5.0 };
    let mut positions = vec![
        Point::new(-9.0, -9.0),
        Point::new(-8.0, -9.5),
        Point::new(-9.5, -7.0),
        Point::new(-7.0, -7.0),
    ];
    for step in 0..=10 {
        let cost = locational_cost(&positions, &density, &domain, 40);
        println!("step {step:2}  H = {cost:10.3}");
        positions = coverage_targets(&positions, &density, &domain, 40);
    }
    for p in positions {
        println!("({:6.2}, {:6.2})", p.x, p.y);
    }
}
