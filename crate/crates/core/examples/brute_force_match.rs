//! Compares row-wise voting with the exhaustive one-to-one assignment on a
//! small probability matrix.

use agmn::agmn::vote;
use agmn::assoc::MatchMatrix;
use agmn::runtime::brute_force_match;

fn show(name: &str, m: &MatchMatrix) {
    println!("{name}");
    for i in 0..m.n1 {
        println!("  {:?}", m.row(i));
    }
}

fn main() -> agmn::Result<()> {
    let p = MatchMatrix::from_rows(&[vec![0.9, 0.8, 0.1], vec![0.85, 0.1, 0.2], vec![0.3, 0.6, 0.5]])?;
    show("probabilities", &p);
    // voting lets two rows claim column 0
    show("vote", &vote(&p));
    let best = brute_force_match(&p)?;
    show("best injective assignment", &best);
    let total: f64 = (0..3).flat_map(|i| (0..3).map(move |a| (i, a))).map(|(i, a)| best.get(i, a) * p.get(i, a)).sum();
    println!("objective {total:.2}");
    Ok(())
}
