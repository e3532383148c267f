use super::{assemble, FitResult, Method};
use crate::error::Result;
use crate::scoring::{mask_to_nodes, LocalScoreTable};

/// Globally optimal DAG for the table's score and in-degree cap.
///
/// Dynamic programming over node subsets: the best DAG on `W` places some
/// sink `s` last, gives it the best parents within `W∖{s}` and solves
/// `W∖{s}` recursively. Ties go to the smallest-index sink.
pub fn fit_exact(table: &LocalScoreTable) -> Result<FitResult> {
    let p = table.p();
    let full: u64 = if p == 0 { 0 } else { (1u64 << p) - 1 };
    let size = 1usize << p;
    let mut value = vec![f64::INFINITY; size];
    let mut sink = vec![u8::MAX; size];
    value[0] = 0.0;
    for w in 1..size {
        let mut rest = w as u64;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let without = (w as u64) & !(1u64 << s);
            let cand = table.best(s, without).0 + value[without as usize];
            if cand < value[w] {
                value[w] = cand;
                sink[w] = s as u8;
            }
        }
    }

    let mut structure = vec![Vec::new(); p];
    let mut node_scores = vec![0.0; p];
    let mut w = full;
    while w != 0 {
        let s = sink[w as usize] as usize;
        let without = w & !(1u64 << s);
        let (score, parents) = table.best(s, without);
        structure[s] = mask_to_nodes(parents);
        node_scores[s] = score;
        w = without;
    }
    let mut fit = assemble(
        structure,
        node_scores,
        table.sigma_hat(),
        table.mode(),
        table.lambda2(),
        Method::Exact,
    )?;
    fit.score = value[full as usize];
    Ok(fit)
}
