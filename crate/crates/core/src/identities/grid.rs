use std::collections::BTreeMap;

use rug::Rational;

use crate::context::QContext;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One grid point: exact values by parameter name, including `q`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Params(BTreeMap<String, Rational>);

impl Params {
    pub fn new() -> Self {
        Params(BTreeMap::new())
    }

    pub fn with(mut self, name: &str, value: impl Into<Rational>) -> Self {
        self.0.insert(name.to_string(), value.into());
        self
    }

    pub fn set(&mut self, name: &str, value: Rational) {
        self.0.insert(name.to_string(), value);
    }

    pub fn rational(&self, name: &str) -> Result<&Rational> {
        self.0
            .get(name)
            .ok_or_else(|| Error::DomainError(format!("missing parameter {name}")))
    }

    /// The parameter lifted into `ctx`.
    pub fn get(&self, name: &str, ctx: &QContext) -> Result<Scalar> {
        Ok(ctx.lift(self.rational(name)?))
    }

    /// A non-negative integer parameter.
    pub fn count(&self, name: &str) -> Result<usize> {
        let r = self.rational(name)?;
        if *r.denom() != 1 || *r < 0 {
            return Err(Error::DomainError(format!("{name} = {r} is not a non-negative integer")));
        }
        r.numer()
            .to_usize()
            .ok_or_else(|| Error::DomainError(format!("{name} = {r} is too large")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn to_scalars(&self) -> BTreeMap<String, Scalar> {
        self.0
            .iter()
            .map(|(k, v)| (k.clone(), Scalar::Exact(v.clone())))
            .collect()
    }
}

/// A union of Cartesian blocks, each mapping parameter names to value lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Grid {
    blocks: Vec<BTreeMap<String, Vec<Rational>>>,
}

impl Grid {
    pub fn new() -> Self {
        Grid::default()
    }

    /// Adds a Cartesian block.
    pub fn block(mut self, axes: &[(&str, &[Rational])]) -> Self {
        self.blocks.push(
            axes.iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        );
        self
    }

    /// Parses `name=v1,v2;name=lo..hi` with blocks separated by `|`. Values
    /// are rationals `p/q` or decimals; `lo..hi` is an inclusive integer range.
    pub fn parse(text: &str) -> Result<Grid> {
        let mut grid = Grid::new();
        for block_text in text.split('|') {
            let mut block = BTreeMap::new();
            for axis in block_text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (name, values) = axis
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected name=values in {axis:?}")))?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::Parse(format!("empty parameter name in {axis:?}")));
                }
                let mut list = Vec::new();
                for v in values.split(',').map(str::trim) {
                    list.extend(parse_values(v)?);
                }
                if list.is_empty() {
                    return Err(Error::Parse(format!("no values for {name}")));
                }
                if block.insert(name.to_string(), list).is_some() {
                    return Err(Error::Parse(format!("parameter {name} given twice")));
                }
            }
            if block.is_empty() {
                return Err(Error::Parse("empty grid block".into()));
            }
            grid.blocks.push(block);
        }
        Ok(grid)
    }

    /// Replaces the values of `name` in every block.
    pub fn set_axis(&mut self, name: &str, values: Vec<Rational>) {
        if self.blocks.is_empty() {
            self.blocks.push(BTreeMap::new());
        }
        for b in &mut self.blocks {
            b.insert(name.to_string(), values.clone());
        }
    }

    /// Fills axes missing from a block with the values of `defaults`' first
    /// block.
    pub fn complete_from(&mut self, defaults: &Grid) {
        let Some(base) = defaults.blocks.first() else {
            return;
        };
        for b in &mut self.blocks {
            for (k, v) in base {
                b.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
    }

    pub fn points(&self) -> Result<Vec<Params>> {
        let mut out = Vec::new();
        for block in &self.blocks {
            let mut partial = vec![Params::new()];
            for (name, values) in block {
                if values.is_empty() {
                    return Err(Error::Parse(format!("no values for {name}")));
                }
                partial = partial
                    .into_iter()
                    .flat_map(|p| values.iter().map(move |v| p.clone().with(name, v.clone())))
                    .collect();
            }
            out.extend(partial);
        }
        Ok(out)
    }
}

fn parse_values(text: &str) -> Result<Vec<Rational>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let parse = |s: &str| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad range bound {s:?}")))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo > hi {
            return Err(Error::Parse(format!("empty range {text:?}")));
        }
        return Ok((lo..=hi).map(Rational::from).collect());
    }
    Ok(vec![Scalar::parse_rational(text)?])
}

/// `[p/q, ...]` from integer pairs.
pub(crate) fn fracs(values: &[(i64, i64)]) -> Vec<Rational> {
    values.iter().map(|&(p, q)| Rational::from((p, q))).collect()
}

/// `[lo, ..., hi]`.
pub(crate) fn ints(lo: i64, hi: i64) -> Vec<Rational> {
    (lo..=hi).map(Rational::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_expands_ranges_and_blocks() {
        let g = Grid::parse("a=1/3,-3/2;n=0..2|a=1;n=5").unwrap();
        let pts = g.points().unwrap();
        assert_eq!(pts.len(), 7);
        assert_eq!(pts[6].count("n").unwrap(), 5);
        assert_eq!(pts[0].rational("a").unwrap(), &Rational::from((1, 3)));
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(Grid::parse("a").is_err());
        assert!(Grid::parse("a=").is_err());
        assert!(Grid::parse("n=3..1").is_err());
        assert!(Grid::parse("a=1;a=2").is_err());
    }
}
