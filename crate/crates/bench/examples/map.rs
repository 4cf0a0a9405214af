//! Wide-field map at the probe frequency of one molecule: only that molecule
//! lights up. Writes map.pgm and map.csv to the current directory.

use zpltune_bench::{parse_config, MapRequest, Session};

fn main() -> anyhow::Result<()> {
    let config = parse_config(include_str!("../configs/five_anthracene.json")).map_err(|e| anyhow::anyhow!("{e:?}"))?;
    let mut session = Session::new(config)?;
    let probe = session.line_of(2).ghz();
    let map = session.map(&MapRequest {
        probe,
        x: [-2.0, 12.0],
        y: [-2.0, 7.0],
        step_um: 0.25,
        dwell: 0.1,
        probe_power: 1.0,
    })?;
    map.write_pgm(std::fs::File::create("map.pgm")?)?;
    map.write_csv(std::fs::File::create("map.csv")?)?;
    let (col, row) = map.pixel_of(10.0, 0.0).expect("inside the map");
    let brightest = map.counts.iter().copied().fold(0.0, f64::max);
    println!(
        "{}x{} map at {probe:+.3} GHz; m2 pixel {} counts, brightest {brightest}",
        map.width,
        map.height,
        map.at(col, row)
    );
    Ok(())
}
