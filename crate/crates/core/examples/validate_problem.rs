//! Check the coefficient hypotheses of a few problems.
use weyl_principal::problem::{builtins, validate, Endpoint};

fn main() {
    let good = builtins::example313();
    println!("{}: {} violations", good.name, validate(&good).len());
    let bad = builtins::scalar("negative-p", Endpoint::regular(0.0), Endpoint::regular(1.0), 0.5, |_| -1.0, |_| 0.0, |_| 1.0);
    for v in validate(&bad).iter().take(3) {
        println!("{}: {} at x = {:?} ({})", bad.name, v.invariant, v.x, v.detail);
    }
}
