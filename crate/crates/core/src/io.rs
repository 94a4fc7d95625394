//! Text formats for graphs, sandpiles, drive laws and length chains, plus
//! CSV exports of enumerated tables.
//!
//! Every format is line based. Blank lines and lines starting with `#` are
//! ignored, and the first remaining line is a header.
//!
//! ```text
//! n 3                 undirected n 3        sandpile n 3
//! 0 1 2               0 1                   0 -4
//! 1 0 2               1 2                   2 7
//!
//! chain 2             alpha n 3
//! 0 1 1/2 1           0 1
//! 0 0 0.5 2           1 2/3
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::chains::DriveDistribution;
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::recurrent::RecTable;
use crate::renewal::LengthChain;
use crate::sandpile::Sandpile;
use crate::Rational;

/// Row sums of a chain file within this distance of 1 are renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-comment lines as `(1-based line number, fields)`.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then(|| (k + 1, l.split_whitespace().collect()))
    })
}

fn field<T: FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| perr(line, format!("invalid {what} `{s}`")))
}

fn header_count(line: usize, fields: &[&str], keyword: &[&str]) -> Result<usize> {
    if fields.len() != keyword.len() + 1 || fields[..keyword.len()] != *keyword {
        return Err(perr(line, format!("expected header `{} <count>`", keyword.join(" "))));
    }
    field(line, fields[keyword.len()], "count")
}

/// Parses `p/q`, an integer, or a decimal such as `-1.25e-3`, exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    if s.contains('/') {
        return Rational::from_str(s).ok().filter(|_| !s.ends_with("/0"));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let numer = BigInt::from_str(&format!("{int}{frac}")).ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Some(r)
}

pub fn parse_graph(text: &str) -> Result<MultiGraph> {
    let mut it = records(text);
    let (line, head) = it.next().ok_or_else(|| perr(0, "missing header"))?;
    let undirected = head.first() == Some(&"undirected");
    let n =
        if undirected { header_count(line, &head, &["undirected", "n"])? } else { header_count(line, &head, &["n"])? };
    let mut edges = Vec::new();
    for (line, f) in it {
        if !(2..=3).contains(&f.len()) {
            return Err(perr(line, "expected `<src> <dst> [multiplicity]`"));
        }
        let src: usize = field(line, f[0], "vertex")?;
        let dst: usize = field(line, f[1], "vertex")?;
        let mult: u64 = f.get(2).map(|m| field(line, m, "multiplicity")).transpose()?.unwrap_or(1);
        edges.push((src, dst, mult));
        if undirected && src != dst {
            edges.push((dst, src, mult));
        }
    }
    MultiGraph::new(n, &edges)
}

/// Directed edge-list form; round-trips through `parse_graph`.
pub fn write_graph(g: &MultiGraph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (u, v, c) in g.edges() {
        writeln!(out, "{u} {v} {c}").unwrap();
    }
    out
}

/// Generator spec `complete:N`, `cycle:N` or `torus:NX,NY`.
pub fn parse_graph_spec(spec: &str) -> Result<MultiGraph> {
    let bad = || Error::PreconditionViolated(format!("unknown graph spec `{spec}`"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<usize> = args.split(',').map(|a| a.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("complete", &[n]) => MultiGraph::complete(n),
        ("cycle", &[n]) => MultiGraph::cycle(n),
        ("torus", &[nx, ny]) => MultiGraph::torus(nx, ny),
        _ => Err(bad()),
    }
}

pub fn parse_sandpile(text: &str) -> Result<Sandpile> {
    let mut it = records(text);
    let (line, head) = it.next().ok_or_else(|| perr(0, "missing header"))?;
    let n = header_count(line, &head, &["sandpile", "n"])?;
    let mut values = vec![0i64; n];
    for (line, f) in it {
        if f.len() != 2 {
            return Err(perr(line, "expected `<vertex> <value>`"));
        }
        let v: usize = field(line, f[0], "vertex")?;
        if v >= n {
            return Err(perr(line, format!("vertex {v} out of range for n = {n}")));
        }
        values[v] = field(line, f[1], "value")?;
    }
    Ok(Sandpile::new(values))
}

pub fn write_sandpile(s: &Sandpile) -> String {
    let mut out = format!("sandpile n {}\n", s.len());
    for (v, x) in s.values().iter().enumerate() {
        writeln!(out, "{v} {x}").unwrap();
    }
    out
}

/// `alpha n N` followed by `<vertex> <weight>` lines; weights are
/// normalized, and unlisted vertices get weight 0 (and are then rejected).
pub fn parse_alpha(text: &str) -> Result<DriveDistribution> {
    let mut it = records(text);
    let (line, head) = it.next().ok_or_else(|| perr(0, "missing header"))?;
    let n = header_count(line, &head, &["alpha", "n"])?;
    let mut w = vec![Rational::zero(); n];
    for (line, f) in it {
        if f.len() != 2 {
            return Err(perr(line, "expected `<vertex> <weight>`"));
        }
        let v: usize = field(line, f[0], "vertex")?;
        if v >= n {
            return Err(perr(line, format!("vertex {v} out of range for n = {n}")));
        }
        w[v] = parse_rational(f[1]).ok_or_else(|| perr(line, format!("invalid weight `{}`", f[1])))?;
    }
    let total: Rational = w.iter().sum();
    if !total.is_positive() {
        return Err(Error::InvalidDistribution("weights sum to zero".into()));
    }
    DriveDistribution::new(w.into_iter().map(|x| x / &total).collect())
}

pub fn parse_chain(text: &str) -> Result<LengthChain> {
    let mut it = records(text);
    let (line, head) = it.next().ok_or_else(|| perr(0, "missing header"))?;
    let k = header_count(line, &head, &["chain"])?;
    let mut edges = Vec::new();
    for (line, f) in it {
        if f.len() != 4 {
            return Err(perr(line, "expected `<x> <y> <prob> <length>`"));
        }
        let x: usize = field(line, f[0], "state")?;
        let y: usize = field(line, f[1], "state")?;
        let p = parse_rational(f[2]).ok_or_else(|| perr(line, format!("invalid probability `{}`", f[2])))?;
        let len: u64 = field(line, f[3], "length")?;
        if x >= k || y >= k {
            return Err(perr(line, format!("state out of range for k = {k}")));
        }
        edges.push((x, y, p, len));
    }
    let mut sums = vec![Rational::zero(); k];
    for (x, _, p, _) in &edges {
        sums[*x] += p;
    }
    for (x, s) in sums.iter().enumerate() {
        let gap = crate::stats::rational_to_f64(&(s - Rational::one())).abs();
        if gap > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("row {x} sums to {s}")));
        }
    }
    for (x, _, p, _) in edges.iter_mut() {
        *p = &*p / &sums[*x];
    }
    LengthChain::new(k, edges)
}

pub fn write_chain(chain: &LengthChain) -> String {
    let mut out = format!("chain {}\n", chain.k());
    for x in 0..chain.k() {
        for t in chain.row(x) {
            writeln!(out, "{x} {} {} {}", t.to, t.prob, t.length).unwrap();
        }
    }
    out
}

/// `state_index,v0,..,v{n-1},total`.
pub fn rec_table_csv(table: &RecTable) -> String {
    let mut out = String::from("state_index");
    for v in 0..table.n() {
        write!(out, ",v{v}").unwrap();
    }
    out.push_str(",total\n");
    for (idx, s) in table.states().iter().enumerate() {
        write!(out, "{idx}").unwrap();
        for x in s.values() {
            write!(out, ",{x}").unwrap();
        }
        writeln!(out, ",{}", table.total(idx)).unwrap();
    }
    out
}

/// `i,from_index,to_index,burst` for every generator `â_i`.
pub fn generator_csv(table: &RecTable) -> String {
    let mut out = String::from("i,from_index,to_index,burst\n");
    for i in 0..table.n() {
        for from in 0..table.kappa() {
            let to = table.apply(i, from);
            writeln!(out, "{i},{from},{to},{}", table.burst_size(i, to)).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        let r = |p: i64, q: i64| Rational::new(p.into(), q.into());
        assert_eq!(parse_rational("1/3"), Some(r(1, 3)));
        assert_eq!(parse_rational("0.25"), Some(r(1, 4)));
        assert_eq!(parse_rational("-1.5e-1"), Some(r(-3, 20)));
        assert_eq!(parse_rational("2"), Some(r(2, 1)));
        assert_eq!(parse_rational(".5"), Some(r(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn graph_formats() {
        let g = parse_graph("# triangle\nundirected n 3\n0 1\n1 2\n2 0\n").unwrap();
        assert_eq!(g, MultiGraph::cycle(3).unwrap());
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
        let d = parse_graph("n 2\n0 1 2\n1 0 2\n").unwrap();
        assert_eq!(d.deg(0), 2);
        assert!(matches!(parse_graph("n 2\n0 1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_graph("n 2\n0 1\n"), Err(Error::NotEulerian { .. })));
    }

    #[test]
    fn graph_specs() {
        assert_eq!(parse_graph_spec("cycle:3").unwrap(), MultiGraph::cycle(3).unwrap());
        assert_eq!(parse_graph_spec("torus:2,3").unwrap().n(), 6);
        assert!(parse_graph_spec("torus:2").is_err());
        assert!(parse_graph_spec("star:4").is_err());
    }

    #[test]
    fn sandpile_format() {
        let s = parse_sandpile("sandpile n 3\n0 -4\n2 7\n").unwrap();
        assert_eq!(s.values(), &[-4, 0, 7]);
        assert_eq!(parse_sandpile(&write_sandpile(&s)).unwrap(), s);
        assert!(parse_sandpile("sandpile n 2\n5 1\n").is_err());
    }

    #[test]
    fn chain_and_alpha_formats() {
        let c = parse_chain("chain 2\n0 1 1/2 1\n0 0 0.5 2\n1 0 1 1\n").unwrap();
        assert_eq!(c.length(0, 0), Some(2));
        assert_eq!(parse_chain(&write_chain(&c)).unwrap(), c);
        assert!(parse_chain("chain 2\n0 1 0.4 1\n0 0 0.5 1\n1 0 1 1\n").is_err());
        let a = parse_alpha("alpha n 3\n0 1\n1 2\n2 1\n").unwrap();
        assert_eq!(a.prob(1), &Rational::new(1.into(), 2.into()));
        assert!(parse_alpha("alpha n 3\n0 1\n1 2\n").is_err());
    }

    #[test]
    fn table_exports() {
        let g = MultiGraph::cycle(3).unwrap();
        let t = RecTable::enumerate(&g, 2).unwrap();
        let csv = rec_table_csv(&t);
        assert_eq!(csv.lines().next(), Some("state_index,v0,v1,v2,total"));
        assert_eq!(csv.lines().nth(1), Some("0,0,1,2,3"));
        assert_eq!(generator_csv(&t).lines().count(), 1 + 3 * 3);
    }
}
