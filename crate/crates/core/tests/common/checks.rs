use std::collections::BTreeSet;

use litgraph::{CitationGraph, TaskDataset, TaskKind};

/// Failures of the dataset invariants for one graph.
pub fn dataset_violations(g: &CitationGraph, ds: &TaskDataset) -> Vec<String> {
    let mut out = Vec::new();
    let pos = ds.instances.iter().filter(|i| i.task == TaskKind::LinkPred && i.target == "yes").count();
    let neg = ds.instances.iter().filter(|i| i.task == TaskKind::LinkPred && i.target == "no").count();
    if pos != neg {
        out.push(format!("link_pred {pos} positives vs {neg} negatives"));
    }
    for inst in &ds.instances {
        if inst.prompt.trim().is_empty() || inst.target.trim().is_empty() {
            out.push(format!("{} instance with empty prompt or target", inst.task));
        }
        for id in inst.referenced_ids() {
            if g.node(id).is_none() {
                out.push(format!("{} references unknown node {id}", inst.task));
            }
        }
        match inst.task {
            TaskKind::LinkPred => {
                let (u, v) = (&inst.provenance[0], &inst.provenance[1]);
                let real = g.has_edge(u, v);
                if (inst.target == "yes") != real {
                    out.push(format!("link_pred ({u}, {v}) target {} but edge {real}", inst.target));
                }
            }
            TaskKind::Recommendation => {
                let c = inst.candidates.as_ref().expect("candidates");
                if c.len() != 11 || c.iter().collect::<BTreeSet<_>>().len() != 11 {
                    out.push(format!("recommendation with {} candidates", c.len()));
                }
                let t: usize = inst.target.parse().unwrap();
                let (u, v) = (&inst.provenance[0], &inst.provenance[1]);
                if c[t] != *v {
                    out.push("recommendation target does not point at the cited paper".into());
                }
                for (i, cand) in c.iter().enumerate() {
                    if i != t && g.has_edge(u, cand) {
                        out.push(format!("negative {cand} is cited by {u}"));
                    }
                }
            }
            _ => {}
        }
    }
    out
}
