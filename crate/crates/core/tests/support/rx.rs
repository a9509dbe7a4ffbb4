use rand::Rng;
use refsynth_core::LabelRegex;

pub const LABELS: [&str; 4] = ["LEX", "IMP", "VAR", "MOD"];

/// A plain syntax tree, matched by backtracking, so nothing here relies on
/// derivatives or the smart constructors' normal form.
#[derive(Debug, Clone)]
pub enum Rx {
    Empty,
    Eps,
    Sym(&'static str),
    Cat(Box<Rx>, Box<Rx>),
    Alt(Box<Rx>, Box<Rx>),
    Star(Box<Rx>),
    Opt(Box<Rx>),
}

/// Every suffix position reachable after matching `r` from `i`.
pub fn ends(r: &Rx, w: &[&str], i: usize) -> Vec<usize> {
    match r {
        Rx::Empty => vec![],
        Rx::Eps => vec![i],
        Rx::Sym(l) => {
            if w.get(i) == Some(l) {
                vec![i + 1]
            } else {
                vec![]
            }
        }
        Rx::Cat(a, b) => ends(a, w, i).into_iter().flat_map(|j| ends(b, w, j)).collect(),
        Rx::Alt(a, b) => {
            let mut v = ends(a, w, i);
            v.extend(ends(b, w, i));
            v
        }
        Rx::Opt(a) => {
            let mut v = vec![i];
            v.extend(ends(a, w, i));
            v
        }
        Rx::Star(a) => {
            let mut seen = vec![i];
            let mut frontier = vec![i];
            while let Some(j) = frontier.pop() {
                for k in ends(a, w, j) {
                    if !seen.contains(&k) {
                        seen.push(k);
                        frontier.push(k);
                    }
                }
            }
            seen
        }
    }
}

pub fn oracle(r: &Rx, w: &[&str]) -> bool {
    ends(r, w, 0).contains(&w.len())
}

pub fn build(r: &Rx) -> LabelRegex {
    match r {
        Rx::Empty => LabelRegex::Empty,
        Rx::Eps => LabelRegex::Epsilon,
        Rx::Sym(l) => LabelRegex::sym(l),
        Rx::Cat(a, b) => LabelRegex::concat(build(a), build(b)),
        Rx::Alt(a, b) => LabelRegex::alt(build(a), build(b)),
        Rx::Star(a) => LabelRegex::star(build(a)),
        Rx::Opt(a) => LabelRegex::opt(build(a)),
    }
}

/// A random tree of at most `depth` operator levels.
pub fn random<R: Rng>(rng: &mut R, depth: usize) -> Rx {
    let leaf = |rng: &mut R| match rng.gen_range(0..8) {
        0 => Rx::Eps,
        _ => Rx::Sym(LABELS[rng.gen_range(0..LABELS.len())]),
    };
    if depth == 0 || rng.gen_bool(0.3) {
        return leaf(rng);
    }
    let sub = |rng: &mut R| Box::new(random(rng, depth - 1));
    match rng.gen_range(0..4) {
        0 => Rx::Cat(sub(rng), sub(rng)),
        1 => Rx::Alt(sub(rng), sub(rng)),
        2 => Rx::Star(sub(rng)),
        _ => Rx::Opt(sub(rng)),
    }
}
