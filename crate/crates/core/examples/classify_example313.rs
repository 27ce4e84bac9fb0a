//! Disconjugacy, threshold bracket and the limit point criterion for Q = [[0, 1], [1, 2]].
use weyl_principal::classify::{classify, disconjugacy_check, ClassifyParams};
use weyl_principal::problem::{builtins, Endpoint, Side};

fn main() -> weyl_principal::Result<()> {
    let params = ClassifyParams::default();
    let p = builtins::example313();
    let c = classify(&p, Side::Plus, -3.0, Some((-3.0, 0.0)), &params)?;
    println!("λ = -3: {:?}, witness {:?}", c.disconjugacy.verdict, c.disconjugacy.witness.as_ref().map(|w| &w.kind));
    if let Some(t) = &c.threshold {
        println!("threshold bracket on [x0, x0+{}]: {:?}", params.span, t.bracket);
    }
    if let Some(lp) = &c.limit_point {
        println!("limit point: {} (heuristic matrix surrogate: {})", lp.limit_point, lp.heuristic);
    }
    let free = builtins::free_scalar(Endpoint::regular(0.0), Endpoint::regular(10.0), 0.0);
    let r = disconjugacy_check(&free, 1.0, 0.0, Side::Plus, &params)?;
    println!("free problem at λ = 1 on [0, 10]: {:?}, conjugate pair {:?}", r.verdict, r.conjugate_pair);
    Ok(())
}
