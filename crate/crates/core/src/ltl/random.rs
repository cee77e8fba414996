//! Random formulas for property checks.

use rand::Rng;

use super::formula::Formula;

/// A formula over `props` with operator depth at most `depth`, drawn from
/// the parser's grammar (binary `And`/`Or`, no weak next).
pub fn random_formula(rng: &mut impl Rng, props: &[&str], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..props.len() + 2) {
            0 => Formula::True,
            1 => Formula::False,
            i => Formula::prop(props[i - 2]),
        };
    }
    let sub = |rng: &mut _| random_formula(rng, props, depth - 1);
    match rng.gen_range(0..11) {
        0 => Formula::not(sub(rng)),
        1 => Formula::And(vec![sub(rng), sub(rng)]),
        2 => Formula::Or(vec![sub(rng), sub(rng)]),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::iff(sub(rng), sub(rng)),
        5 => Formula::next(sub(rng)),
        6 => Formula::until(sub(rng), sub(rng)),
        7 => Formula::release(sub(rng), sub(rng)),
        8 => Formula::eventually(sub(rng)),
        9 => Formula::always(sub(rng)),
        _ => Formula::not(Formula::next(sub(rng))),
    }
}
