//! Validate the shipped assurance case and link its evidence to the
//! results of an actual run.
//!
//!     cargo run --example gsn_case

use fimcorr::evidence::{EvidenceResults, Outcome};
use fimcorr::gsn::{link_evidence, parse_case, validate, warnings};
use fimcorr::oracle::{compare_map, oracle_map};
use fimcorr::{analyze, check_inputs, IdealSeries, Statistic, VolumeGrid4D, Workers};

const TOP: &str = include_str!("../assets/top_goal.gsn");
const INPUTS: &str = include_str!("../assets/inputs_argument.gsn");

fn main() {
    let volume = VolumeGrid4D::new((4, 4, 2, 10), (0..320).map(|n| 10.0 + ((n * 37) % 11) as f64).collect());
    let ideals = [IdealSeries::new("wave", (0..10).map(|t| (t / 2 % 2) as f64).collect()).unwrap()];
    let guard = check_inputs(&volume, &ideals, true);
    let map = &analyze(&volume, &ideals, &[Statistic::Pearson], &guard, Workers::Auto).unwrap()[0];
    let oracle = oracle_map(&volume, &ideals, Statistic::Pearson).unwrap();

    let mut results = EvidenceResults::default();
    results.extend(guard.evidence());
    results.insert("oracle.all", Outcome::from_pass(compare_map(map, &oracle, 1e-12, |_| 0.0).passes()));
    results.insert("review.requirements", Outcome::Pass);

    for (name, text) in [("top goal", TOP), ("inputs argument", INPUTS)] {
        let case = parse_case(text).unwrap();
        println!("== {name}: {} nodes, roots {:?}", case.nodes().len(), case.roots());
        println!("issues: {:?}, warnings: {}", validate(&case), warnings(&case).len());
        let annotated = link_evidence(&case, &results);
        for (label, status) in &annotated.status {
            println!("  {label}: {status:?}");
        }
        println!("  {:?}\n", annotated.summary);
        if name == "top goal" {
            println!("{}", annotated.to_dot());
        }
    }

    let broken = parse_case("GOAL G \"top\"\nGOAL G.1 \"a\" supports G\nGOAL X.2 \"b\" supports G\nEVIDENCE E_X.2 \"e\" supports X.2\nEVIDENCE E_Y.1 \"loose\"\n").unwrap();
    for issue in validate(&broken) {
        println!("issue: {issue}");
    }
}
