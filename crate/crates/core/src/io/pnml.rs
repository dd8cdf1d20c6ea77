//! Place/Transition PNML.

use std::collections::HashMap;

use roxmltree::{Document, Node};

use super::{IoError, Result};
use crate::petri::{Marking, Net, PetriError};

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(IoError::Pnml(msg.into()))
}

fn child<'a, 'i>(n: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    n.children().find(|c| c.has_tag_name(tag))
}

/// Text of `<tag><text>...</text></tag>` under `n`, trimmed.
fn labelled_text<'a>(n: Node<'a, '_>, tag: &str) -> Option<&'a str> {
    child(n, tag).and_then(|l| child(l, "text")).and_then(|t| t.text()).map(str::trim)
}

fn number(n: Node, tag: &str, default: u64, what: &str, id: &str) -> Result<u64> {
    match labelled_text(n, tag) {
        None => Ok(default),
        Some(s) => match s.parse::<i128>() {
            Ok(v) if v < 0 => err(format!("negative {what} on `{id}`")),
            Ok(v) => u64::try_from(v).or_else(|_| err(format!("{what} on `{id}` is too large"))),
            Err(_) => err(format!("bad {what} `{s}` on `{id}`")),
        },
    }
}

enum Kind {
    Place(usize),
    Transition(usize),
}

/// Parses the first `<net>` of a P/T PNML document.
pub fn parse_pnml(bytes: &[u8]) -> Result<(Net, Marking)> {
    let text = std::str::from_utf8(bytes).or_else(|_| err("document is not UTF-8"))?;
    let doc = Document::parse(text)?;
    let Some(net) = doc.descendants().find(|n| n.has_tag_name("net")) else {
        return err("no <net> element");
    };
    if let Some(ty) = net.attribute("type") {
        if !ty.to_ascii_lowercase().contains("ptnet") {
            return err(format!("unsupported net type `{ty}`, only P/T nets are accepted"));
        }
    }
    if net.descendants().any(|n| n.has_tag_name("hlinitialMarking") || n.has_tag_name("declaration")) {
        return err("colored net markup is not supported, only P/T nets are accepted");
    }

    let mut ids: HashMap<&str, Kind> = HashMap::new();
    let mut places = Vec::new();
    let mut tokens = Vec::new();
    let mut transitions = Vec::new();
    let name_of =
        |n: Node<'_, '_>, id: &str| labelled_text(n, "name").filter(|s| !s.is_empty()).unwrap_or(id).to_string();
    for n in net.descendants() {
        let is_place = n.has_tag_name("place");
        if !is_place && !n.has_tag_name("transition") {
            continue;
        }
        let Some(id) = n.attribute("id") else { return err("node without an id") };
        let kind = if is_place {
            tokens.push(number(n, "initialMarking", 0, "initial marking", id)?);
            places.push(name_of(n, id));
            Kind::Place(places.len() - 1)
        } else {
            transitions.push(name_of(n, id));
            Kind::Transition(transitions.len() - 1)
        };
        if ids.insert(id, kind).is_some() {
            return err(format!("duplicate id `{id}`"));
        }
    }

    let mut pre = vec![vec![0u64; places.len()]; transitions.len()];
    let mut post = pre.clone();
    for arc in net.descendants().filter(|n| n.has_tag_name("arc")) {
        let id = arc.attribute("id").unwrap_or("?");
        let (Some(src), Some(dst)) = (arc.attribute("source"), arc.attribute("target")) else {
            return err(format!("arc `{id}` lacks source or target"));
        };
        let w = number(arc, "inscription", 1, "arc weight", id)?;
        let (slot, p) = match (ids.get(src), ids.get(dst)) {
            (None, _) => return err(format!("arc `{id}` refers to unknown node `{src}`")),
            (_, None) => return err(format!("arc `{id}` refers to unknown node `{dst}`")),
            (Some(Kind::Place(p)), Some(Kind::Transition(t))) => (&mut pre[*t], *p),
            (Some(Kind::Transition(t)), Some(Kind::Place(p))) => (&mut post[*t], *p),
            _ => return err(format!("arc `{id}` joins two nodes of the same kind")),
        };
        slot[p] = slot[p].checked_add(w).ok_or(PetriError::Overflow("arc weight"))?;
    }
    let net = Net::new(places, transitions, pre, post)?;
    Ok((net, Marking(tokens)))
}
