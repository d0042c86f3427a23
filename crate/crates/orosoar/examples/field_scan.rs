//! Developer diagnostics: print the soarable-region geometry, standby trim
//! points, and a condensed search trace for a scenario config.
//!
//! Usage: cargo run --example field_scan -- <scenario.toml> [--trace]

use orosoar::config::ScenarioConfig;
use orosoar::harness::{auto_standby_z, converged_segments, run_scenario};
use orosoar::vehicle::Plant;
use orosoar::wind::{column_zero_crossings, WindField};
use orosoar::Vec3;

fn column_report(field: &WindField, plant: &Plant, x: f64, z_max: f64) {
    let crossings = column_zero_crossings(field, &plant.polar, x, 0.05, z_max, 400, 0.0);
    let mut trims = Vec::new();
    let mut z = 0.1;
    while z < z_max {
        if let Ok(wind) = field.sample(Vec3::new(x, 0.0, z), 0.0) {
            if let Some((_, tn)) = plant.hover_trim(wind) {
                trims.push((z, tn * 100.0));
            }
        }
        z += 0.05;
    }
    let min_t = trims
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|&(z, t)| format!("min T {t:.2}% at z {z:.2}"))
        .unwrap_or_else(|| "no trim".into());
    println!("x {x:+.2}: zero-excess z = {crossings:?}; {min_t}");
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).expect("usage: field_scan <scenario.toml> [--trace]");
    let cfg = ScenarioConfig::from_path(std::path::Path::new(path)).expect("config");
    let field = cfg.wind_field().unwrap();
    let plant = cfg.plant().unwrap();
    let safe = cfg.safe_volume();
    let (speed0, slope0) = field.schedule.at(0.0);
    let crest_x = field.ramp.crest_x(slope0);
    let crest_h = field.ramp.crest_height(slope0);
    println!("conditions: {speed0} m/s, slope {slope0} deg");
    println!("crest at ({crest_x:.3}, {crest_h:.3}); safe volume x [{:.2}, {:.2}] z [{:.2}, {:.2}]",
        safe.x_min, safe.x_max, safe.z_min, safe.z_max);
    println!("polar: min sink {:.3} at {:.2} m/s, step {:.3} at {:.1}",
        plant.polar.sink_rate(plant.polar.min_sink_airspeed()).unwrap(),
        plant.polar.min_sink_airspeed(),
        plant.polar.windmilling_step(),
        plant.polar.breakpoint);

    for k in 0..14 {
        let x = crest_x - 2.2 + 0.25 * k as f64;
        column_report(&field, &plant, x, safe.z_max);
    }
    match auto_standby_z(&field, &plant, cfg.standby.x, (safe.z_min, safe.z_max),
        cfg.standby.target_throttle_pct) {
        Ok((z, tn)) => println!("standby: x {:.2} z {z:.3} trim {:.1}%", cfg.standby.x, tn * 100.0),
        Err(e) => println!("standby: {e}"),
    }

    if args.iter().any(|a| a == "--trace") {
        let out = run_scenario(&cfg).expect("run");
        println!("steps {} fault {:?}", out.steps_executed, out.fault);
        for r in &out.records {
            if !r.search_event.is_empty() {
                println!(
                    "t {:7.1} event {:10} cost {:8.2} target ({:+.3}, {:.3}) pos ({:+.3}, {:.3}) T% {:.2}",
                    r.t, r.search_event, r.search_cost, r.target_x, r.target_z,
                    r.position[0], r.position[2], r.throttle_pct
                );
            }
        }
        let m = &out.metrics;
        println!("metrics: converged {} t_conv {:?} t_zero {:?}", m.converged,
            m.time_to_converged, m.time_to_zero_throttle);
        println!("  mean T {:?}% converged T {:?}% pos std {:?}",
            m.mean_throttle_pct, m.converged_throttle_pct, m.position_std);
        println!("  converged mean ({:?}, {:?}) steps {} restarts {}",
            m.converged_mean_x, m.converged_mean_z, m.search_steps, m.restarts);
        for (a, b) in converged_segments(&out.records) {
            println!("  segment rows {a}..{b} t {:.1}..{:.1}", out.records[a].t,
                out.records[b - 1].t);
        }
    }
}
