use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{AbsValue, Domain, Prims, SignSet, Sign};
use crate::interp::{entry_views, ViewMap};
use crate::lang::{parse_program, Program};

/// Size bounds for generated programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub max_lines: usize,
    pub max_calls: usize,
    pub use_objects: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_lines: 20,
            max_calls: 2,
            use_objects: true,
        }
    }
}

const KEYS: [&str; 3] = ["\"a\"", "\"b\"", "concat(\"a\", \"b\")"];

struct Region<'a> {
    rng: &'a mut ChaCha8Rng,
    base: usize,
    len: usize,
    lines: Vec<String>,
    /// Variables holding integers on every path so far.
    ints: Vec<String>,
    /// Functions this region may call, as (body label, param).
    callees: Vec<usize>,
    use_objects: bool,
    prefix: &'static str,
    next_var: usize,
}

impl Region<'_> {
    fn label(&self) -> usize {
        self.base + self.lines.len()
    }

    fn fresh(&mut self) -> String {
        let v = format!("{}{}", self.prefix, self.next_var);
        self.next_var += 1;
        v
    }

    fn operand(&mut self) -> String {
        if !self.ints.is_empty() && self.rng.gen_bool(0.75) {
            self.ints.choose(self.rng).cloned().expect("non-empty")
        } else {
            self.rng.gen_range(-2i64..=2).to_string()
        }
    }

    fn int_target(&mut self) -> String {
        if !self.ints.is_empty() && self.rng.gen_bool(0.4) {
            self.ints.choose(self.rng).cloned().expect("non-empty")
        } else {
            self.fresh()
        }
    }

    fn push(&mut self, s: String) {
        self.lines.push(format!("{}: {s}", self.label()));
    }

    fn arith(&mut self) {
        let t = self.int_target();
        let e = match self.rng.gen_range(0..5) {
            0 => format!("add({}, {})", self.operand(), self.operand()),
            1 => format!("sub({}, {})", self.operand(), self.operand()),
            2 => format!("mul({}, {})", self.operand(), self.operand()),
            3 => format!("neg({})", self.operand()),
            _ => self.operand(),
        };
        self.push(format!("{t} = {e}"));
        if !self.ints.contains(&t) {
            self.ints.push(t);
        }
    }

    fn cond(&mut self) -> String {
        let op = ["lt", "le", "gt", "ge", "eq"].choose(self.rng).expect("non-empty");
        let a = self.operand();
        let c = self.rng.gen_range(-1i64..=1);
        match self.rng.gen_range(0..4) {
            0 => format!("{op}({a}, {})", self.operand()),
            1 => format!("not({op}({a}, {c}))"),
            _ => format!("{op}({a}, {c})"),
        }
    }

    /// Forward branch; skipped assignments make later reads possibly
    /// unbound, which is fine for the analyses.
    fn branch(&mut self, remaining: usize) {
        let here = self.label();
        let target = here + self.rng.gen_range(1..=remaining);
        let c = self.cond();
        self.push(format!("if {c} {target}"));
    }

    /// `i = 0; if ge(i, K) exit; i = add(i, 1); if true head`
    fn counted_loop(&mut self) {
        let i = self.fresh();
        let k = self.rng.gen_range(1..=3);
        self.push(format!("{i} = 0"));
        let head = self.label();
        let exit = head + 3;
        self.push(format!("if ge({i}, {k}) {exit}"));
        self.push(format!("{i} = add({i}, 1)"));
        self.push(format!("if true {head}"));
        self.ints.push(i);
    }

    fn object(&mut self) {
        let o = self.fresh();
        self.push(format!("{o} = {{}}"));
        let key = KEYS.choose(self.rng).expect("non-empty");
        let v = self.operand();
        self.push(format!("{o}[{key}] = {v}"));
        let t = self.fresh();
        let key = KEYS.choose(self.rng).expect("non-empty");
        self.push(format!("{t} = {o}[{key}]"));
    }

    fn call(&mut self, body: usize) {
        let f = self.fresh();
        self.push(format!("{f} = fun(p)@{body}"));
        let r = self.fresh();
        let arg = self.operand();
        self.push(format!("{r} = {f}({arg})"));
        self.ints.push(r);
    }

    fn fill(mut self) -> Vec<String> {
        while self.lines.len() + 1 < self.len {
            let remaining = self.len - 1 - self.lines.len();
            let roll = self.rng.gen_range(0..10);
            if remaining >= 2 && !self.callees.is_empty() && roll == 0 {
                let i = self.rng.gen_range(0..self.callees.len());
                let body = self.callees.remove(i);
                self.call(body);
            } else if remaining >= 4 && roll == 1 {
                self.counted_loop();
            } else if remaining >= 3 && self.use_objects && roll == 2 {
                self.object();
            } else if roll <= 4 {
                self.branch(remaining);
            } else {
                self.arith();
            }
        }
        let e = self.operand();
        self.push(format!("ret {e}"));
        self.lines
    }
}

fn random_value(rng: &mut ChaCha8Rng, domain: Domain) -> AbsValue {
    let roll = rng.gen_range(0..10);
    if roll == 0 {
        return AbsValue::from_prims(Prims::of_bools(domain, true, rng.gen_bool(0.5)));
    }
    match domain {
        Domain::Sign => {
            let mut s = SignSet::EMPTY;
            while s == SignSet::EMPTY {
                for g in [Sign::Neg, Sign::Zero, Sign::Pos] {
                    if rng.gen_bool(0.5) {
                        s.insert(g);
                    }
                }
            }
            AbsValue::from_prims(Prims::of_signs(s))
        }
        Domain::KSet(k) => {
            let n = rng.gen_range(1..=k.min(3));
            let ints: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
            AbsValue::from_prims(Prims::of_ints(domain, ints))
        }
    }
}

/// A random valid program with its entry view; the same seed gives the
/// same result. The main region comes first, then one region per function;
/// a region only calls functions placed after it, loops are counted, and
/// property keys are literal, so runs terminate and keys stay enumerable.
pub fn generate_program(seed: u64, shape: Shape, domain: Domain) -> (Program, ViewMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_lines = shape.max_lines.max(2);
    let funcs = if max_lines >= 8 {
        rng.gen_range(0..=shape.max_calls.min(3))
    } else {
        0
    };
    let fn_lens: Vec<usize> = (0..funcs).map(|_| rng.gen_range(2..=4)).collect();
    let fn_total: usize = fn_lens.iter().sum();
    let main_len = rng.gen_range(2.max((max_lines - fn_total) / 2)..=max_lines - fn_total);
    let mut bases = Vec::new();
    let mut at = main_len;
    for n in &fn_lens {
        bases.push(at);
        at += n;
    }
    let n_vars = rng.gen_range(1..=3);
    let vars: Vec<String> = (0..n_vars).map(|i| format!("x{i}")).collect();
    let initial: Vec<(String, AbsValue)> = vars
        .iter()
        .map(|x| (x.clone(), random_value(&mut rng, domain)))
        .collect();

    let mut lines = Region {
        rng: &mut rng,
        base: 0,
        len: main_len,
        lines: Vec::new(),
        ints: vars.clone(),
        callees: bases.clone(),
        use_objects: shape.use_objects,
        prefix: "t",
        next_var: 0,
    }
    .fill();
    for (i, (base, len)) in bases.iter().zip(&fn_lens).enumerate() {
        let region = Region {
            rng: &mut rng,
            base: *base,
            len: *len,
            lines: Vec::new(),
            ints: vec!["p".to_string()],
            callees: bases[i + 1..].to_vec(),
            use_objects: shape.use_objects,
            prefix: "q",
            next_var: 0,
        };
        lines.extend(region.fill());
    }
    let src = lines.join("\n");
    let program = parse_program(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"));
    let views = entry_views(&program, initial);
    (program, views)
}
