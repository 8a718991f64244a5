//! Weighted reciprocal-rank fusion and ensemble trees.
//!
//! A name's fused score is `Σ_l α_l / rank_l(name)` with 1-based ranks; a
//! list that does not contain the name contributes nothing. Only ranks enter
//! the sum, so models with incomparable score scales can be mixed.
//!
//! Trees are declared in a small text format, one node per line:
//!
//! ```text
//! # comment
//! m0     = leaf(m0)
//! e_freq = combine(m0:0.5, m1:0.5)
//! e_ubpr = fillup(e_ub, m8, 1000)
//! ```
//!
//! Child references name other nodes. The last node defined is the root.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::runs::{Run, RunStore};
use crate::types::{sort_by_score_then_name, NameId, RankedList, Scored};

/// The default assembly, shipped as `default.ensemble`.
pub const DEFAULT_TREE: &str = include_str!("../data/default.ensemble");

/// Fuses lists by weighted reciprocal rank, keeping the top `n`.
pub fn rr_combine(model: &str, lists: &[&RankedList], alphas: &[f64], n: usize) -> Result<RankedList> {
    if lists.len() != alphas.len() {
        return Err(Error::LengthMismatch {
            lists: lists.len(),
            weights: alphas.len(),
        });
    }
    if let Some(&bad) = alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::InvalidWeight(bad));
    }
    let mut contributions: Vec<(NameId, f64)> = lists
        .iter()
        .zip(alphas)
        .flat_map(|(list, &alpha)| {
            list.items
                .iter()
                .enumerate()
                .map(move |(pos, item)| (item.name, alpha / (pos + 1) as f64))
        })
        .collect();
    // Summing each name's terms in sorted order makes the result independent
    // of the order the lists were given in.
    contributions.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut items: Vec<Scored> = Vec::new();
    for (name, term) in contributions {
        match items.last_mut() {
            Some(last) if last.name == name => last.score += term,
            _ => items.push(Scored { name, score: term }),
        }
    }
    sort_by_score_then_name(&mut items, n);
    Ok(RankedList::new(model, items))
}

/// Pads `base` with unseen names from `filler` until it holds `n` names.
///
/// Base items are kept verbatim. Appended items get scores strictly below
/// the base minimum and strictly decreasing, so the list stays sorted. With
/// an empty base the filler's own scores are kept.
pub fn fill_up(model: &str, base: &RankedList, filler: &RankedList, n: usize) -> RankedList {
    let mut items = base.items.clone();
    if items.len() >= n {
        return RankedList::new(model, items);
    }
    let present: HashSet<NameId> = items.iter().map(|s| s.name).collect();
    let extra: Vec<Scored> = filler
        .items
        .iter()
        .filter(|s| !present.contains(&s.name))
        .take(n - items.len())
        .copied()
        .collect();
    match items.last().map(|s| s.score) {
        None => items = extra,
        Some(floor) => {
            let count = extra.len() as f64;
            items.extend(extra.into_iter().enumerate().map(|(t, s)| {
                let score = if floor > 0.0 {
                    floor * (count - t as f64) / (count + 1.0)
                } else {
                    floor - (t + 1) as f64
                };
                Scored { name: s.name, score }
            }));
        }
    }
    RankedList::new(model, items)
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleNode {
    Leaf(String),
    Combine {
        label: String,
        children: Vec<(EnsembleNode, f64)>,
    },
    FillUp {
        label: String,
        base: Box<EnsembleNode>,
        filler: Box<EnsembleNode>,
        n: usize,
    },
}

impl EnsembleNode {
    pub fn label(&self) -> &str {
        match self {
            EnsembleNode::Leaf(model) => model,
            EnsembleNode::Combine { label, .. } | EnsembleNode::FillUp { label, .. } => label,
        }
    }

    /// Model ids referenced by the leaves, sorted and deduplicated.
    pub fn leaves(&self) -> Vec<String> {
        fn walk(node: &EnsembleNode, out: &mut Vec<String>) {
            match node {
                EnsembleNode::Leaf(m) => out.push(m.clone()),
                EnsembleNode::Combine { children, .. } => children.iter().for_each(|(c, _)| walk(c, out)),
                EnsembleNode::FillUp { base, filler, .. } => {
                    walk(base, out);
                    walk(filler, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    fn evaluate_for(&self, user: &str, store: &RunStore, n: usize) -> Result<RankedList> {
        match self {
            EnsembleNode::Leaf(model) => {
                let run = store.get(model).ok_or_else(|| Error::UnknownLeaf(model.clone()))?;
                Ok(run
                    .list_for(user)
                    .cloned()
                    .unwrap_or_else(|| RankedList::empty(model.as_str())))
            }
            EnsembleNode::Combine { label, children } => {
                let lists = children
                    .iter()
                    .map(|(child, _)| child.evaluate_for(user, store, n))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&RankedList> = lists.iter().collect();
                let alphas: Vec<f64> = children.iter().map(|&(_, a)| a).collect();
                rr_combine(label, &refs, &alphas, n)
            }
            EnsembleNode::FillUp {
                label,
                base,
                filler,
                n: fill_to,
            } => {
                let base = base.evaluate_for(user, store, n)?;
                let filler = filler.evaluate_for(user, store, n)?;
                Ok(fill_up(label, &base, &filler, *fill_to))
            }
        }
    }
}

/// Evaluates a tree for every user in `users`, in parallel.
pub fn evaluate_tree(node: &EnsembleNode, store: &RunStore, users: &[String], n: usize) -> Result<Run> {
    if let Some(missing) = node.leaves().into_iter().find(|m| store.get(m).is_none()) {
        return Err(Error::UnknownLeaf(missing));
    }
    let lists = users
        .par_iter()
        .map(|u| node.evaluate_for(u, store, n).map(|l| (u.clone(), l)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Run {
        model: node.label().to_owned(),
        lists,
        shared: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
enum NodeDef {
    Leaf(String),
    Combine(Vec<(String, f64)>),
    FillUp { base: String, filler: String, n: usize },
}

/// A parsed ensemble definition file.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    defs: Vec<(String, NodeDef)>,
}

impl EnsembleSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut defs: Vec<(String, NodeDef)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::format("ensemble", line_no, msg);
            let (name, expr) = line
                .split_once('=')
                .ok_or_else(|| err("expected `name = expression`".into()))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
                return Err(err(format!("bad node name `{name}`")));
            }
            if defs.iter().any(|(n, _)| n == name) {
                return Err(err(format!("node `{name}` defined twice")));
            }
            let expr = expr.trim();
            let (func, args) = expr
                .strip_suffix(')')
                .and_then(|e| e.split_once('('))
                .ok_or_else(|| err(format!("malformed expression `{expr}`")))?;
            let args: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
            let def = match (func.trim(), args.as_slice()) {
                ("leaf", [model]) => NodeDef::Leaf((*model).to_owned()),
                ("combine", children) => {
                    let children = children
                        .iter()
                        .map(|c| {
                            let (child, w) = c
                                .rsplit_once(':')
                                .ok_or_else(|| err(format!("child `{c}` lacks a weight")))?;
                            let w: f64 = w.trim().parse().map_err(|_| err(format!("bad weight in `{c}`")))?;
                            Ok((child.trim().to_owned(), w))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if children.len() < 2 {
                        return Err(err("combine needs at least two children".into()));
                    }
                    if children.iter().any(|&(_, w)| !w.is_finite() || w < 0.0) {
                        return Err(err("weights must be finite and nonnegative".into()));
                    }
                    if children.iter().all(|&(_, w)| w == 0.0) {
                        return Err(err("at least one weight must be positive".into()));
                    }
                    NodeDef::Combine(children)
                }
                ("fillup", [base, filler, n]) => NodeDef::FillUp {
                    base: (*base).to_owned(),
                    filler: (*filler).to_owned(),
                    n: n.parse().map_err(|_| err(format!("bad length `{n}`")))?,
                },
                (f, _) => return Err(err(format!("unknown or malformed `{f}(...)`"))),
            };
            defs.push((name.to_owned(), def));
        }
        if defs.is_empty() {
            return Err(Error::format("ensemble", 0, "no nodes defined"));
        }
        let spec = EnsembleSpec { defs };
        for (name, _) in &spec.defs {
            spec.node(name)?;
        }
        Ok(spec)
    }

    pub fn root_name(&self) -> &str {
        &self.defs[self.defs.len() - 1].0
    }

    pub fn root(&self) -> Result<EnsembleNode> {
        self.node(self.root_name())
    }

    /// Names of every combine and fill-up node, in definition order.
    pub fn inner_nodes(&self) -> impl Iterator<Item = &str> {
        self.defs
            .iter()
            .filter(|(_, d)| !matches!(d, NodeDef::Leaf(_)))
            .map(|(n, _)| n.as_str())
    }

    /// Resolves the named node into a tree.
    pub fn node(&self, name: &str) -> Result<EnsembleNode> {
        let index: HashMap<&str, &NodeDef> = self.defs.iter().map(|(n, d)| (n.as_str(), d)).collect();
        self.build(name, &index, &mut Vec::new())
    }

    fn build<'a>(
        &'a self,
        name: &'a str,
        index: &HashMap<&str, &'a NodeDef>,
        stack: &mut Vec<&'a str>,
    ) -> Result<EnsembleNode> {
        if stack.contains(&name) {
            return Err(Error::config(format!("ensemble node `{name}` refers to itself")));
        }
        let def = index.get(name).ok_or_else(|| Error::UnknownNode(name.to_owned()))?;
        stack.push(name);
        let node = match def {
            NodeDef::Leaf(model) => EnsembleNode::Leaf(model.clone()),
            NodeDef::Combine(children) => EnsembleNode::Combine {
                label: name.to_owned(),
                children: children
                    .iter()
                    .map(|(c, w)| Ok((self.build(c, index, stack)?, *w)))
                    .collect::<Result<Vec<_>>>()?,
            },
            NodeDef::FillUp { base, filler, n } => EnsembleNode::FillUp {
                label: name.to_owned(),
                base: Box::new(self.build(base, index, stack)?),
                filler: Box::new(self.build(filler, index, stack)?),
                n: *n,
            },
        };
        stack.pop();
        Ok(node)
    }
}
