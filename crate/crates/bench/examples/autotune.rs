//! Five anthracene molecules spread over 21 GHz are brought onto one common
//! line by the closed-loop tuner.

use zpltune_bench::{parse_config, AutotuneRequest, Session};

fn main() -> anyhow::Result<()> {
    let text = include_str!("../configs/five_anthracene.json");
    let config = parse_config(text).map_err(|e| anyhow::anyhow!("{e:?}"))?;
    let mut session = Session::new(config)?;
    let report = session.autotune(&AutotuneRequest::default())?;
    println!("target {:.3} GHz, tolerance {} MHz", report.target.ghz(), report.tolerance);
    for e in &report.entries {
        println!(
            "{:>3}: {:+7.3} -> {:+7.3} GHz in {:2} bursts ({:?}, error {:+.1} MHz)",
            e.id.0,
            e.initial.ghz(),
            e.final_center.ghz(),
            e.bursts,
            e.outcome,
            e.final_error
        );
    }
    println!("largest cross-talk {:.2} MHz, simulated time {:.1} s", report.max_cross_talk(), session.clock());
    Ok(())
}
