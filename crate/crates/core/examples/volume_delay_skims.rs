//! Congested link times and the zone-to-zone skim on the toy network.
//!
//! cargo run --example volume_delay_skims

use flowfit::network::{skim_matrix, volume_delay, Link};
use flowfit::synthetic::toy_model;

fn main() -> flowfit::Result<()> {
    let link = Link::new("demo", "a", "b", 10.0, 1000.0);
    for q in [0.0, 500.0, 1000.0, 2000.0] {
        println!("Q = {q:>6}: t = {:.4} min", volume_delay(&link, q)?);
    }

    let model = toy_model(0.0, 0)?;
    let net = &model.network;
    let skim = skim_matrix(net, &net.free_flow_times())?;
    print!("{:>4}", "");
    for z in &skim.zone_ids {
        print!("{z:>7}");
    }
    println!();
    for (i, o) in skim.zone_ids.iter().enumerate() {
        print!("{o:>4}");
        for j in 0..skim.len() {
            print!("{:>7.1}", skim.get(i, j));
        }
        println!();
    }
    Ok(())
}
