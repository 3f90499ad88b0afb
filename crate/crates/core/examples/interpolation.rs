//! Linear interpolation of irregular channels onto a shared time axis.

use lagged_ehr::timeline::{interpolate, ChannelSeries};

fn main() {
    let lab = ChannelSeries::from_points(vec![(0.0, 1.0), (10.0, 3.0), (30.0, 2.0)]);
    let drug = ChannelSeries::from_points(vec![(5.0, 1.0), (20.0, 0.0)]);
    let none = ChannelSeries::from_points(Vec::new());
    let tl = interpolate("p1", &lab, &drug, &none);
    // Lab reads 2.0 at t=5 (halfway between 1 and 3); flat outside its range.
    print!("{}", tl.to_text());
    println!("value of lab at t=40: {}", lab.value_at(40.0));
}
