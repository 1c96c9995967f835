//! Sparse SDPA text export (`.dat-s`).
//!
//! The file describes `min c.x` with `X = sum_i x_i F_i - F_0 >= 0`, which is
//! exactly the internal problem form with `F_i = A_i`. Layout:
//! line 1 the variable count, line 2 the block count, line 3 the block sizes
//! (diagonal blocks negated), line 4 the objective, then one line
//! `matno blkno i j value` per upper-triangle entry, all indices 1-based and
//! `matno 0` naming the constant matrix.

use std::fmt::Write as _;

use super::block::BlockSpec;
use super::problem::SdpProblem;

pub fn to_sdpa_sparse(p: &SdpProblem) -> String {
    let mut out = String::new();
    let specs = p.structure().specs();
    writeln!(out, "{}", p.num_vars()).unwrap();
    writeln!(out, "{}", specs.len()).unwrap();
    let sizes: Vec<String> = specs
        .iter()
        .map(|s| match *s {
        BlockSpec::Dense(q) => format!("{q}"),
            BlockSpec::Diag(q) => format!("-{q}"),
        })
        .collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let obj: Vec<String> = p.objective().iter().map(|v| format!("{v:?}")).collect();
    writeln!(out, "{}", obj.join(" ")).unwrap();
    for (mat, b, r, c, v) in p.all_entries() {
        writeln!(out, "{} {} {} {} {:?}", mat, b + 1, r + 1, c + 1, v).unwrap();
    }
    out
}
