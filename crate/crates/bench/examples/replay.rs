//! Runs a short session, round-trips its log through JSONL and rebuilds the
//! final state from (config, log) alone.

use zpltune_bench::log::{read_jsonl, write_jsonl};
use zpltune_bench::{parse_config, replay, Aim, BurstRequest, Command, ScanRequest, Session, WaitRequest};

fn main() -> anyhow::Result<()> {
    let config = parse_config(include_str!("../configs/micro_pair.json")).map_err(|e| anyhow::anyhow!("{e:?}"))?;
    let mut live = Session::new(config.clone())?;
    for cmd in [
        Command::Burst(BurstRequest { aim: Aim::Emitter("near".into()), power: 4.0, duration: 5.0 }),
        Command::Scan(ScanRequest::window(-6.0, 1.0).aimed(Aim::Emitter("near".into()))),
        Command::Wait(WaitRequest { seconds: 3600.0 }),
        Command::Burst(BurstRequest { aim: Aim::Position([14.0, 0.5]), power: 2.0, duration: 2.0 }),
    ] {
        live.execute(&cmd)?;
    }
    let mut jsonl = Vec::new();
    write_jsonl(live.log(), &mut jsonl)?;
    let log = read_jsonl(&jsonl[..])?;
    let rebuilt = replay(config, &log)?;
    println!("{} entries, {} bytes of JSONL", log.len(), jsonl.len());
    println!("charge digest {}", rebuilt.state().charge_digest);
    println!("identical final state: {}", rebuilt.state() == live.state());
    Ok(())
}
