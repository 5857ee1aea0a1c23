use pdq_core::stability::*;
use pdq_core::*;
fn summarize(scn: &Scenario, target: ParamTarget, lo: f64, hi: f64, pts: usize) -> String {
    let spec = ScanSpec { x: ScanAxis::new(vec![target], lo, hi, pts).unwrap(), y: None };
    let g = scan_region(scn, &spec, &BGrid::default());
    let ext = |c: StabilityClass, neg: bool| {
        let xs: Vec<f64> = g.cells.iter().filter(|x| (x.class() == c) != neg).map(|x| x.x).collect();
        if xs.is_empty() { "none".to_string() } else { format!("[{:.4}, {:.4}]", xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) }
    };
    let errs = g.cells.iter().filter(|c| c.outcome.is_err()).count();
    format!("notUnstable {} Stable {} errs {}", ext(StabilityClass::Unstable, true), ext(StabilityClass::Stable, false), errs)
}
fn main() {
    let sat2 = vec![vec![1.2,0.7],vec![0.2,0.7]];
    let sat3 = vec![vec![1.2,0.7],vec![0.7,0.7],vec![0.2,0.7]];
    for (m, sat) in [(2, sat2), (3, sat3)] {
        let chain = ModeChain::symmetric(m, 1.0).unwrap();
        for (a1, a2) in [(0.0,0.0),(0.0,1.0),(1.0,0.0),(1.0,1.0)] {
            let scn = Scenario::new(1.0, sat.clone(), chain.clone(), PolicySpec::pwa_two_server(1.0, 0.5, a1, a2)).unwrap();
            println!("m={m} pwa a=({a1},{a2}) {}", summarize(&scn, ParamTarget::ThetaSplit, -1.0, 2.0, 3001));
        }
        for (b1, b2) in [(0.0,0.0),(0.0,1.0),(1.0,0.0),(1.0,1.0)] {
            let scn = Scenario::new(1.0, sat.clone(), chain.clone(), PolicySpec::Logit{gamma: vec![0.0,0.0], beta: vec![b1,b2]}).unwrap();
            println!("m={m} logit b=({b1},{b2}) {}", summarize(&scn, ParamTarget::GammaDiff, -3.0, 3.0, 6001));
        }
    }
    println!("log(7/3)={} log1.7={} ln1.5={}", (7.0f64/3.0).ln(), 1.7f64.ln(), 1.5f64.ln());
}
