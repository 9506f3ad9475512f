//! Category algebra for the extended categorial grammar.
//!
//! A category is a basic category with an (unordered) feature set, a functor
//! that expects an unordered multiset of arguments on one side, or a
//! suppressed category. Both slashes are result-first: `X/Y` takes `Y` from
//! the right and `X\Y` takes `Y` from the left. A directional functor `a/b`
//! is simply the singleton case `a/{b}`.
//!
//! Suppressed categories (`np|`) can only be consumed by an argument slot
//! that is itself suppressed; such a functor is an *activator*.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `\`: arguments are found to the left.
    Leftward,
    /// `/`: arguments are found to the right.
    Rightward,
}

impl Direction {
    pub fn slash(self) -> char {
        match self {
            Direction::Leftward => '\\',
            Direction::Rightward => '/',
        }
    }
}

/// Sorted multiset of categories; structural equality is multiset equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Multiset(Vec<Category>);

impl Multiset {
    pub fn new(mut members: Vec<Category>) -> Self {
        members.sort();
        Multiset(members)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Category> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Category] {
        &self.0
    }

    /// Members without repetition, in canonical order.
    pub fn distinct(&self) -> impl Iterator<Item = &Category> {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, c)| *i == 0 || self.0[i - 1] != **c)
            .map(|(_, c)| c)
    }

    /// Removes one occurrence of `member`, if present.
    pub fn without(&self, member: &Category) -> Multiset {
        let mut v = self.0.clone();
        if let Some(pos) = v.iter().position(|c| c == member) {
            v.remove(pos);
        }
        Multiset(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgSet {
    Concrete(Multiset),
    /// An argument-set variable such as `$X`, bound to a whole multiset.
    Variable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Basic {
        name: String,
        features: BTreeSet<String>,
    },
    Functor {
        result: Box<Category>,
        direction: Direction,
        args: ArgSet,
    },
    Suppressed(Box<Category>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoryKind {
    Ordinary,
    Suppressed,
    Activator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    LeftCancel,
    RightCancel,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::LeftCancel => f.write_str("<"),
            Rule::RightCancel => f.write_str(">"),
        }
    }
}

impl Category {
    pub fn basic(name: &str) -> Category {
        Category::Basic {
            name: name.to_string(),
            features: BTreeSet::new(),
        }
    }

    pub fn basic_with(name: &str, features: &[&str]) -> Category {
        Category::Basic {
            name: name.to_string(),
            features: features.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Builds a functor over a concrete argument multiset. An empty multiset
    /// yields `result` itself.
    pub fn functor(result: Category, direction: Direction, args: Vec<Category>) -> Category {
        if args.is_empty() {
            return result;
        }
        Category::Functor {
            result: Box::new(result),
            direction,
            args: ArgSet::Concrete(Multiset::new(args)),
        }
    }

    pub fn functor_var(result: Category, direction: Direction, var: &str) -> Category {
        Category::Functor {
            result: Box::new(result),
            direction,
            args: ArgSet::Variable(var.to_string()),
        }
    }

    pub fn suppressed(inner: Category) -> Result<Category> {
        if let Category::Suppressed(_) = inner {
            return Err(Error::DoubleSuppression(format!("{inner}|")));
        }
        Ok(Category::Suppressed(Box::new(inner)))
    }

    pub fn is_suppressed(&self) -> bool {
        matches!(self, Category::Suppressed(_))
    }

    pub fn has_variables(&self) -> bool {
        match self {
            Category::Basic { .. } => false,
            Category::Suppressed(inner) => inner.has_variables(),
            Category::Functor { result, args, .. } => {
                result.has_variables()
                    || match args {
                        ArgSet::Variable(_) => true,
                        ArgSet::Concrete(ms) => ms.iter().any(Category::has_variables),
                    }
            }
        }
    }

    /// Nesting depth; basic categories have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Category::Basic { .. } => 0,
            Category::Suppressed(inner) => 1 + inner.depth(),
            Category::Functor { result, args, .. } => {
                let a = match args {
                    ArgSet::Variable(_) => 0,
                    ArgSet::Concrete(ms) => ms.iter().map(Category::depth).max().unwrap_or(0),
                };
                1 + result.depth().max(a)
            }
        }
    }

    pub fn classify(&self) -> CategoryKind {
        match self {
            Category::Suppressed(_) => CategoryKind::Suppressed,
            Category::Functor {
                result,
                args: ArgSet::Concrete(ms),
                ..
            } if !result.is_suppressed() && ms.iter().any(Category::is_suppressed) => CategoryKind::Activator,
            _ => CategoryKind::Ordinary,
        }
    }

    /// The same category with every suppression mark removed.
    pub fn erase_suppression(&self) -> Category {
        match self {
            Category::Basic { .. } => self.clone(),
            Category::Suppressed(inner) => inner.erase_suppression(),
            Category::Functor {
                result,
                direction,
                args,
            } => Category::Functor {
                result: Box::new(result.erase_suppression()),
                direction: *direction,
                args: match args {
                    ArgSet::Variable(v) => ArgSet::Variable(v.clone()),
                    ArgSet::Concrete(ms) => {
                        ArgSet::Concrete(Multiset::new(ms.iter().map(Category::erase_suppression).collect()))
                    }
                },
            },
        }
    }

    pub fn collect_basic_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Category::Basic { name, .. } => {
                out.insert(name.clone());
            }
            Category::Suppressed(inner) => inner.collect_basic_names(out),
            Category::Functor { result, args, .. } => {
                result.collect_basic_names(out);
                if let ArgSet::Concrete(ms) = args {
                    for m in ms.iter() {
                        m.collect_basic_names(out);
                    }
                }
            }
        }
    }

    /// Every category obtainable by consuming one argument slot of a functor,
    /// without knowing the argument. Slots whose consumption would leave an
    /// unbound variable are skipped.
    pub fn slot_results(&self) -> Vec<Category> {
        let Category::Functor {
            result,
            direction,
            args: ArgSet::Concrete(ms),
        } = self
        else {
            return Vec::new();
        };
        let mut out: Vec<Category> = ms
            .distinct()
            .filter_map(|slot| {
                let raw = Category::Functor {
                    result: result.clone(),
                    direction: *direction,
                    args: ArgSet::Concrete(ms.without(slot)),
                };
                normalize(&raw, &Bindings::default()).ok()
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn direction(&self) -> Option<Direction> {
        match self {
            Category::Functor { direction, .. } => Some(*direction),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering

fn write_arg(f: &mut fmt::Formatter<'_>, c: &Category) -> fmt::Result {
    match c {
        Category::Basic { .. } => write!(f, "{c}"),
        _ => write!(f, "({c})"),
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Basic { name, features } => {
                f.write_str(name)?;
                if !features.is_empty() {
                    let feats: Vec<&str> = features.iter().map(String::as_str).collect();
                    write!(f, "[{}]", feats.join(","))?;
                }
                Ok(())
            }
            Category::Suppressed(inner) => match **inner {
                Category::Basic { .. } => write!(f, "{inner}|"),
                _ => write!(f, "({inner})|"),
            },
            Category::Functor {
                result,
                direction,
                args,
            } => {
                write!(f, "{result}{}", direction.slash())?;
                match args {
                    ArgSet::Variable(v) => write!(f, "${v}"),
                    ArgSet::Concrete(ms) if ms.len() == 1 => write_arg(f, &ms.as_slice()[0]),
                    ArgSet::Concrete(ms) => {
                        let mut rendered: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                        rendered.sort();
                        write!(f, "{{{}}}", rendered.join(","))
                    }
                }
            }
        }
    }
}

pub fn render_category(c: &Category) -> String {
    c.to_string()
}

// ---------------------------------------------------------------------------
// Parsing

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::CategorySyntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.err(format!("expected `{c}`, found `{got}`")),
                None => self.err(format!("expected `{c}`, found end of input")),
            }
        }
    }

    fn name(&mut self) -> Result<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            Some(c) => return self.err(format!("expected a name, found `{c}`")),
            None => return self.err("expected a name, found end of input"),
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn atom(&mut self) -> Result<Category> {
        let name = self.name()?;
        let mut features = BTreeSet::new();
        if self.peek() == Some('[') {
            self.pos += 1;
            features.insert(self.name()?);
            while self.peek() == Some(',') {
                self.pos += 1;
                features.insert(self.name()?);
            }
            self.expect(']')?;
        }
        Ok(Category::Basic { name, features })
    }

    fn primary(&mut self) -> Result<Category> {
        let base = if self.peek() == Some('(') {
            self.pos += 1;
            let inner = self.cat()?;
            self.expect(')')?;
            inner
        } else {
            self.atom()?
        };
        if self.peek() == Some('|') {
            self.pos += 1;
            if base.is_suppressed() || self.peek() == Some('|') {
                return Err(Error::DoubleSuppression(self.src.to_string()));
            }
            return Category::suppressed(base);
        }
        Ok(base)
    }

    fn argspec(&mut self) -> Result<ArgSet> {
        match self.peek() {
            Some('{') => {
                self.pos += 1;
                let mut members = vec![self.cat()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    members.push(self.cat()?);
                }
                self.expect('}')?;
                Ok(ArgSet::Concrete(Multiset::new(members)))
            }
            Some('$') => {
                self.pos += 1;
                Ok(ArgSet::Variable(self.name()?))
            }
            _ => Ok(ArgSet::Concrete(Multiset::new(vec![self.primary()?]))),
        }
    }

    fn cat(&mut self) -> Result<Category> {
        let mut cat = self.primary()?;
        loop {
            let direction = match self.peek() {
                Some('/') => Direction::Rightward,
                Some('\\') => Direction::Leftward,
                _ => break,
            };
            self.pos += 1;
            let args = self.argspec()?;
            cat = Category::Functor {
                result: Box::new(cat),
                direction,
                args,
            };
        }
        Ok(cat)
    }
}

pub fn parse_category(text: &str) -> Result<Category> {
    let mut p = Parser::new(text.trim());
    let cat = p.cat()?;
    if p.pos != p.chars.len() {
        return p.err(format!("unexpected `{}`", p.chars[p.pos]));
    }
    Ok(cat)
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_category(s)
    }
}

// ---------------------------------------------------------------------------
// Unification

/// Variable bindings produced by [`unify`]. Each variable is bound at most once.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bindings(BTreeMap<String, Multiset>);

impl Bindings {
    pub fn get(&self, var: &str) -> Option<&Multiset> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Binds `var`, or checks consistency with an existing binding.
    pub fn bind(&mut self, var: &str, value: Multiset) -> bool {
        match self.0.get(var) {
            Some(existing) => *existing == value,
            None => {
                self.0.insert(var.to_string(), value);
                true
            }
        }
    }
}

fn unify_into(pattern: &Category, concrete: &Category, b: &mut Bindings) -> bool {
    match (pattern, concrete) {
        (Category::Basic { name: pn, features: pf }, Category::Basic { name: cn, features: cf }) => {
            pn == cn && pf == cf
        }
        (Category::Suppressed(p), Category::Suppressed(c)) => unify_into(p, c, b),
        (
            Category::Functor {
                result: pr,
                direction: pd,
                args: pa,
            },
            Category::Functor {
                result: cr,
                direction: cd,
                args: ca,
            },
        ) => {
            if pd != cd || !unify_into(pr, cr, b) {
                return false;
            }
            match (pa, ca) {
                (ArgSet::Variable(v), ArgSet::Concrete(ms)) => b.bind(v, ms.clone()),
                (ArgSet::Concrete(pm), ArgSet::Concrete(cm)) => unify_multiset(pm.as_slice(), cm.as_slice(), b),
                _ => false,
            }
        }
        _ => false,
    }
}

fn unify_multiset(p: &[Category], c: &[Category], b: &mut Bindings) -> bool {
    fn go(p: &[Category], c: &[Category], used: &mut [bool], b: &mut Bindings) -> bool {
        let Some((first, rest)) = p.split_first() else {
            return true;
        };
        for k in 0..c.len() {
            if used[k] {
                continue;
            }
            let mut trial = b.clone();
            if unify_into(first, &c[k], &mut trial) {
                used[k] = true;
                if go(rest, c, used, &mut trial) {
                    *b = trial;
                    return true;
                }
                used[k] = false;
            }
        }
        false
    }
    if p.len() != c.len() {
        return false;
    }
    let mut used = vec![false; c.len()];
    go(p, c, &mut used, b)
}

/// Unifies a pattern (possibly holding argument-set variables) with a
/// variable-free category. Features must match exactly.
pub fn unify(pattern: &Category, concrete: &Category) -> Option<Bindings> {
    let mut b = Bindings::default();
    unify_into(pattern, concrete, &mut b).then_some(b)
}

/// Substitutes bound variables and eliminates empty-argument functors.
pub fn normalize(c: &Category, b: &Bindings) -> Result<Category> {
    match c {
        Category::Basic { .. } => Ok(c.clone()),
        Category::Suppressed(inner) => Category::suppressed(normalize(inner, b)?),
        Category::Functor {
            result,
            direction,
            args,
        } => {
            let result = normalize(result, b)?;
            let members = match args {
                ArgSet::Concrete(ms) => ms.as_slice(),
                ArgSet::Variable(v) => b.get(v).ok_or_else(|| Error::UnboundVariable(v.clone()))?.as_slice(),
            };
            let members = members.iter().map(|m| normalize(m, b)).collect::<Result<Vec<_>>>()?;
            Ok(Category::functor(result, *direction, members))
        }
    }
}

// ---------------------------------------------------------------------------
// Functional application

fn cancel_slots(
    result: &Category,
    direction: Direction,
    slots: &Multiset,
    argument: &Category,
    rule: Rule,
    out: &mut Vec<(Category, Rule)>,
) {
    for slot in slots.distinct() {
        let Some(bindings) = unify(slot, argument) else {
            continue;
        };
        let raw = Category::Functor {
            result: Box::new(result.clone()),
            direction,
            args: ArgSet::Concrete(slots.without(slot)),
        };
        if let Ok(c) = normalize(&raw, &bindings) {
            out.push((c, rule));
        }
    }
}

/// All results of one cancellation step between two adjacent categories.
///
/// A plain argument slot never unifies with a suppressed category, and a
/// suppressed slot only unifies with a suppressed category, so blocking and
/// activation both fall out of [`unify`].
pub fn combine(left: &Category, right: &Category) -> Vec<(Category, Rule)> {
    let mut out = Vec::new();
    if let Category::Functor {
        result,
        direction: Direction::Rightward,
        args: ArgSet::Concrete(slots),
    } = left
    {
        cancel_slots(result, Direction::Rightward, slots, right, Rule::RightCancel, &mut out);
    }
    if let Category::Functor {
        result,
        direction: Direction::Leftward,
        args: ArgSet::Concrete(slots),
    } = right
    {
        cancel_slots(result, Direction::Leftward, slots, left, Rule::LeftCancel, &mut out);
    }
    out.sort();
    out.dedup();
    out
}
