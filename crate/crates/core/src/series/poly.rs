use std::collections::BTreeMap;
use std::fmt;

use super::{mul, Basis, TruncatedSeries};
use crate::error::{Error, Result};

/// Sparse multivariate polynomial with real coefficients.
///
/// Exponent tuples are unique (map keys) and zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    vars: Vec<String>,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultiPoly {
    pub fn zero(vars: &[String]) -> Self {
        MultiPoly {
            vars: vars.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[String], c: f64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars.len()], c);
        p
    }

    /// `c · var`.
    pub fn linear(vars: &[String], var: usize, c: f64) -> Self {
        let mut p = Self::zero(vars);
        let mut e = vec![0; vars.len()];
        e[var] = 1;
        p.add_term(e, c);
        p
    }

    pub fn from_terms(vars: &[String], terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            if e.len() != vars.len() {
                return Err(Error::Dimension(format!(
                    "exponent tuple of length {} for {} variables",
                    e.len(),
                    vars.len()
                )));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        let entry = self.terms.entry(exps.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&exps);
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// True when variable `var` has a nonzero exponent in some term.
    pub fn uses_var(&self, var: usize) -> bool {
        self.terms.keys().any(|e| e[var] > 0)
    }

    /// Highest exponent of `var` across terms.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    /// Value of a constant polynomial, `None` otherwise.
    pub fn as_constant(&self) -> Option<f64> {
        match self.total_degree() {
            0 => Some(self.terms.values().sum()),
            _ => None,
        }
    }

    /// Coefficients `q` with `p(x) = qᵀx` when `p` is homogeneous linear.
    pub fn as_homogeneous_linear(&self) -> Option<Vec<f64>> {
        let mut q = vec![0.0; self.vars.len()];
        for (e, c) in &self.terms {
            let deg: u32 = e.iter().sum();
            if deg != 1 {
                return None;
            }
            let i = e.iter().position(|&k| k == 1)?;
            q[i] = *c;
        }
        Some(q)
    }

    /// Affine decomposition `p(x) = c₀ + aᵀx`, if `p` has degree ≤ 1.
    pub fn as_affine(&self) -> Option<(f64, Vec<f64>)> {
        if self.total_degree() > 1 {
            return None;
        }
        let mut a = vec![0.0; self.vars.len()];
        let mut c0 = 0.0;
        for (e, c) in &self.terms {
            match e.iter().position(|&k| k == 1) {
                Some(i) => a[i] = *c,
                None => c0 = *c,
            }
        }
        Some((c0, a))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| acc * xi.powi(k as i32))
            })
            .sum()
    }

    /// Partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> MultiPoly {
        let mut out = Self::zero(&self.vars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(d, c * e[var] as f64);
        }
        out
    }

    /// Copy with every coefficient replaced by its absolute value.
    pub(crate) fn abs_coeffs(&self) -> MultiPoly {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.abs())).collect(),
        }
    }

    /// Substitutes each argument series for its variable and expands every
    /// product with truncation at index `trunc`.
    pub fn on_series(&self, args: &[TruncatedSeries], trunc: usize) -> Result<TruncatedSeries> {
        if args.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "polynomial in {} variables applied to {} series",
                self.vars.len(),
                args.len()
            )));
        }
        let basis = args.first().map(|a| a.basis()).unwrap_or(Basis::Power);
        for a in args {
            args[0].check_basis(a)?;
        }
        // powers[v][k] = args[v]^k, built lazily up to the largest exponent used
        let mut powers: Vec<Vec<TruncatedSeries>> = args
            .iter()
            .map(|_| vec![TruncatedSeries::constant(basis, 1.0, trunc)])
            .collect();
        for (v, arg) in args.iter().enumerate() {
            for _ in 1..=self.degree_in(v) {
                let next = mul(powers[v].last().unwrap(), arg, trunc)?;
                powers[v].push(next);
            }
        }
        let mut out = vec![0.0; trunc + 1];
        for (e, c) in &self.terms {
            let mut term = TruncatedSeries::constant(basis, *c, trunc);
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = mul(&term, &powers[v][k as usize], trunc)?;
                }
            }
            for (o, t) in out.iter_mut().zip(term.coeffs()) {
                *o += t;
            }
        }
        TruncatedSeries::new(basis, out)
    }

    /// Parses a sum of monomials such as `-50*x1 - 10*x1^2 + k*x1*x2`.
    ///
    /// Identifiers are resolved against `vars` first, then `params`. Division
    /// is allowed by constant factors only.
    pub fn parse(text: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Self> {
        Parser::new(text, vars, params).parse()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            match (k, *c < 0.0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mut sep = "";
            if mag != 1.0 || e.iter().all(|&p| p == 0) {
                write!(f, "{mag}")?;
                sep = "*";
            }
            for (v, &p) in e.iter().enumerate() {
                match p {
                    0 => continue,
                    1 => write!(f, "{sep}{}", self.vars[v])?,
                    _ => write!(f, "{sep}{}^{}", self.vars[v], p)?,
                }
                sep = "*";
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

struct Parser<'a> {
    text: &'a str,
    vars: &'a [String],
    params: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, vars: &'a [String], params: &'a BTreeMap<String, f64>) -> Self {
        Parser { text, vars, params }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            input: self.text.to_string(),
            msg: msg.into(),
        }
    }

    fn lex(&self) -> Result<Vec<Tok>> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                _ if c.is_whitespace() => i += 1,
                '+' => {
                    toks.push(Tok::Plus);
                    i += 1
                }
                '-' => {
                    toks.push(Tok::Minus);
                    i += 1
                }
                '*' => {
                    toks.push(Tok::Star);
                    i += 1
                }
                '/' => {
                    toks.push(Tok::Slash);
                    i += 1
                }
                '^' => {
                    toks.push(Tok::Caret);
                    i += 1
                }
                _ if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    // exponent part, e.g. 1.5e-3
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut j = i + 1;
                        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                            j += 1;
                        }
                        if j < chars.len() && chars[j].is_ascii_digit() {
                            while j < chars.len() && chars[j].is_ascii_digit() {
                                j += 1;
                            }
                            i = j;
                        }
                    }
                    let s: String = chars[start..i].iter().collect();
                    let v = s
                        .parse::<f64>()
                        .map_err(|_| self.err(format!("bad number `{s}`")))?;
                    toks.push(Tok::Num(v));
                }
                _ if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    toks.push(Tok::Ident(chars[start..i].iter().collect()));
                }
                _ => return Err(self.err(format!("unexpected character `{c}`"))),
            }
        }
        Ok(toks)
    }

    fn parse(&self) -> Result<MultiPoly> {
        let toks = self.lex()?;
        if toks.is_empty() {
            return Err(self.err("empty expression"));
        }
        let mut poly = MultiPoly::zero(self.vars);
        let mut pos = 0;
        let mut first = true;
        while pos < toks.len() {
            let mut sign = 1.0;
            match toks[pos] {
                Tok::Plus => pos += 1,
                Tok::Minus => {
                    sign = -1.0;
                    pos += 1
                }
                _ if first => {}
                _ => return Err(self.err("expected `+` or `-` between terms")),
            }
            first = false;
            let (coeff, exps, next) = self.term(&toks, pos)?;
            poly.add_term(exps, sign * coeff);
            pos = next;
        }
        Ok(poly)
    }

    /// term := factor (('*' | '/') factor)*
    fn term(&self, toks: &[Tok], mut pos: usize) -> Result<(f64, Vec<u32>, usize)> {
        let mut coeff = 1.0;
        let mut exps = vec![0u32; self.vars.len()];
        let mut divide = false;
        loop {
            let (value, var, power, next) = self.factor(toks, pos)?;
            pos = next;
            match (var, divide) {
                (Some(v), false) => exps[v] += power,
                (Some(v), true) => {
                    return Err(self.err(format!("division by variable `{}`", self.vars[v])))
                }
                (None, false) => coeff *= value.powi(power as i32),
                (None, true) => {
                    let d = value.powi(power as i32);
                    if d == 0.0 {
                        return Err(self.err("division by zero"));
                    }
                    coeff /= d;
                }
            }
            match toks.get(pos) {
                Some(Tok::Star) => {
                    divide = false;
                    pos += 1
                }
                Some(Tok::Slash) => {
                    divide = true;
                    pos += 1
                }
                // juxtaposition is multiplication: `2x1`, `2 x1 x2`
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) => divide = false,
                _ => return Ok((coeff, exps, pos)),
            }
        }
    }

    /// factor := (number | ident) ['^' integer]
    fn factor(&self, toks: &[Tok], pos: usize) -> Result<(f64, Option<usize>, u32, usize)> {
        let (value, var) = match toks.get(pos) {
            Some(Tok::Num(v)) => (*v, None),
            Some(Tok::Ident(name)) => {
                if let Some(v) = self.vars.iter().position(|x| x == name) {
                    (1.0, Some(v))
                } else if let Some(&p) = self.params.get(name) {
                    (p, None)
                } else if is_state_name(name) {
                    return Err(Error::VariableScope(format!(
                        "`{name}` is not available in `{}` (allowed: {})",
                        self.text,
                        self.vars.join(", ")
                    )));
                } else {
                    return Err(self.err(format!("unknown identifier `{name}`")));
                }
            }
            Some(t) => return Err(self.err(format!("unexpected token {t:?}"))),
            None => return Err(self.err("unexpected end of expression")),
        };
        let mut pos = pos + 1;
        let mut power = 1;
        if let Some(Tok::Caret) = toks.get(pos) {
            match toks.get(pos + 1) {
                Some(Tok::Num(p)) if p.fract() == 0.0 && *p >= 0.0 => {
                    power = *p as u32;
                    pos += 2;
                }
                _ => return Err(self.err("exponent must be a nonnegative integer")),
            }
        }
        Ok((value, var, power, pos))
    }
}

fn is_state_name(name: &str) -> bool {
    name.len() > 1 && name.starts_with('x') && name[1..].chars().all(|c| c.is_ascii_digit())
}

/// Names `x1..xn`.
pub fn state_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}
