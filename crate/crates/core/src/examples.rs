//! Small programs shared by tests, docs and the CLI.

use crate::lang::{parse_program, Program};

/// `x := -|x|` written with an explicit join edge, since the language has no
/// `else` block or unconditional jump.
pub const NEG_ABS_SOURCE: &str = "\
0: if ge(x, 0) 3
1: x = neg(x)
2: if true 4
3: x = x
4: x = neg(x)
5: ret x
";

/// Labels of interest in [`NEG_ABS_SOURCE`].
pub mod neg_abs {
    use crate::lang::Label;

    /// The `x >= 0` test.
    pub const TEST: Label = Label(0);
    /// Start of the negative branch.
    pub const ELSE: Label = Label(1);
    /// Unconditional jump closing the negative branch.
    pub const JUMP: Label = Label(2);
    /// Start of the non-negative branch.
    pub const THEN: Label = Label(3);
    /// Where both branches meet.
    pub const MERGE: Label = Label(4);
    /// The final `ret`.
    pub const EXIT: Label = Label(5);

    /// Every label except the jump, in the order the branches are usually
    /// discussed: test, then, else, merge, exit.
    pub const DISCUSSED: [Label; 5] = [TEST, THEN, ELSE, MERGE, EXIT];
}

pub fn neg_abs_program() -> Program {
    parse_program(NEG_ABS_SOURCE).expect("built-in program parses")
}

/// A loop that never exits.
pub const SELF_LOOP_SOURCE: &str = "0: if true 0\n";

/// Straight-line program of `n` assignments over constants followed by `ret`.
pub fn straight_line_source(n: usize) -> String {
    let mut out = String::from("0: v0 = 1\n");
    for i in 1..n.saturating_sub(1) {
        let prev = i - 1;
        let line = match i % 4 {
            0 => format!("{i}: v{i} = add(v{prev}, {i})\n"),
            1 => format!("{i}: v{i} = sub(v{prev}, 3)\n"),
            2 => format!("{i}: v{i} = mul(v{prev}, -1)\n"),
            _ => format!("{i}: v{i} = neg(v{prev})\n"),
        };
        out.push_str(&line);
    }
    let last = n.saturating_sub(1).max(1);
    out.push_str(&format!("{last}: ret v{}\n", last - 1));
    out
}
