//! Scratch probe: scan the default campaign across schemes and timesteps,
//! tabulating loser dips, near-ties, errors, and cross-scheme winner flips.
use r3puf::campaign::CampaignConfig;
use r3puf::cell::{extract, CellState, DeviceSlot, Integrator};
use r3puf::oracle::predict_first_switch;
use r3puf::population::build_cell;
use rayon::prelude::*;

fn main() {
    let config = CampaignConfig::default();
    let n = 15000u32;
    let rows: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (cc, _) =
                build_cell(config.master_seed, 0, i, &config.variation, &config.cell).unwrap();
            let mut rng = r3puf::rng::cell_stream(
                config.master_seed, 0, i, r3puf::rng::StreamLane::Cycle,
            );
            let state = CellState::fresh(&cc);
            let programmed = r3puf::cell::reconfigure(&state, &cc, &mut rng).unwrap();
            let p = predict_first_switch(&programmed, &cc);
            let run = |integ: Integrator, dt: f64| -> (Option<DeviceSlot>, f64, String) {
                let mut c2 = cc.clone();
                c2.extract_profile = c2.extract_profile.with_dt(dt).unwrap();
                match extract(&programmed, &c2, integ, false) {
                    Ok(out) => (
                        Some(out.switched),
                        out.state.m1.omega.max(out.state.m2.omega),
                        String::new(),
                    ),
                    Err(e) => (None, f64::NAN, format!("{e}")),
                }
            };
            let base = run(Integrator::Euler, 1e-7);
            let half = run(Integrator::Euler, 5e-8);
            let rk4 = run(Integrator::Rk4, 1e-7);
            (i, p.rel_gap, p.winner, base, half, rk4)
        })
        .collect();

    let mut errors = 0;
    let mut flips = 0;
    let mut oracle_miss = 0;
    let mut min_loser = f64::INFINITY;
    let mut dips = 0;
    for (i, gap, pred, base, half, rk4) in &rows {
        if base.0.is_none() || half.0.is_none() || rk4.0.is_none() {
            errors += 1;
            println!("cell {i}: gap={gap:.3e} ERR base={} half={} rk4={}", base.2, half.2, rk4.2);
            continue;
        }
        if base.0 != half.0 || base.0 != rk4.0 {
            flips += 1;
            println!(
                "cell {i}: gap={gap:.3e} FLIP base={:?} half={:?} rk4={:?}",
                base.0, half.0, rk4.0
            );
        }
        if base.0 != Some(*pred) {
            oracle_miss += 1;
            println!("cell {i}: gap={gap:.3e} ORACLE MISS sim={:?} pred={pred:?}", base.0);
        }
        if base.1 < min_loser {
            min_loser = base.1;
        }
        if base.1 < 0.99 {
            dips += 1;
            println!("cell {i}: gap={gap:.3e} loser dip {:.6}", base.1);
        }
    }
    println!("errors={errors} cross-scheme flips={flips} oracle_misses={oracle_miss}");
    println!("loser dips below 0.99: {dips}, min loser omega={min_loser:.6}");
}
