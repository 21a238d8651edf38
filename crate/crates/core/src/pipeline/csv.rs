use std::fmt::Write;

use super::report::Report;

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Plain-table view of a report: one row per cell, pair, layer or sweep point.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::new();
    let mut row = |cells: &[String]| {
        let _ = writeln!(out, "{}", cells.join(","));
    };
    let h = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match report {
        Report::PairSummary(s) => {
            row(&h(&[
                "forward_best",
                "backward_best",
                "gap",
                "forward_layer_a",
                "forward_layer_b",
                "backward_layer_a",
                "backward_layer_b",
            ]));
            row(&[
                s.forward_best.to_string(),
                s.backward_best.to_string(),
                s.gap.to_string(),
                s.forward_argmax.0.to_string(),
                s.forward_argmax.1.to_string(),
                s.backward_argmax.0.to_string(),
                s.backward_argmax.1.to_string(),
            ]);
        }
        Report::LayerGrid(g) => {
            row(&h(&["layer_a", "layer_b", "score"]));
            for (i, r) in g.scores.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    row(&[
                        g.layers_a[i].to_string(),
                        g.layers_b[j].to_string(),
                        v.to_string(),
                    ]);
                }
            }
        }
        Report::DirectionTable(t) => {
            row(&h(&[
                "source",
                "target",
                "forward_best",
                "backward_best",
                "gap",
                "forward_layer_a",
                "forward_layer_b",
                "backward_layer_a",
                "backward_layer_b",
            ]));
            for p in &t.pairs {
                let s = &p.summary;
                row(&[
                    field(&p.source),
                    field(&p.target),
                    s.forward_best.to_string(),
                    s.backward_best.to_string(),
                    s.gap.to_string(),
                    s.forward_argmax.0.to_string(),
                    s.forward_argmax.1.to_string(),
                    s.backward_argmax.0.to_string(),
                    s.backward_argmax.1.to_string(),
                ]);
            }
        }
        Report::Consensus(c) => {
            row(&h(&["a", "b", "cka_best", "mknn_best"]));
            for p in &c.pairs {
                row(&[
                    field(&p.a),
                    field(&p.b),
                    p.cka_best.to_string(),
                    p.mknn_best.to_string(),
                ]);
            }
        }
        Report::Density(profiles) => {
            row(&h(&["model", "layer", "D"]));
            for p in profiles {
                for (layer, d) in &p.points {
                    row(&[field(&p.model), layer.to_string(), d.to_string()]);
                }
            }
        }
        Report::KSweep(s) => {
            row(&h(&["k", "forward", "backward", "delta"]));
            for p in &s.points {
                row(&[
                    p.k.to_string(),
                    p.score.forward.to_string(),
                    p.score.backward.to_string(),
                    p.score.gap.to_string(),
                ]);
            }
        }
        Report::RhoSweep(tables) => {
            row(&h(&[
                "family",
                "rho",
                "measured_rho",
                "k",
                "s_yx",
                "s_xy",
                "delta",
            ]));
            for (t, r) in tables
                .iter()
                .flat_map(|t| t.rows.iter().map(move |r| (t, r)))
            {
                row(&[
                    t.family.to_string(),
                    r.rho.to_string(),
                    r.measured_rho.to_string(),
                    r.k.to_string(),
                    r.s_yx.to_string(),
                    r.s_xy.to_string(),
                    r.delta.to_string(),
                ]);
            }
        }
        Report::Significance(s) => {
            row(&h(&[
                "observed_mean_gap",
                "p_value",
                "n_permutations",
                "seed",
            ]));
            row(&[
                s.result.observed_mean_gap.to_string(),
                s.result.p_value.to_string(),
                s.result.n_permutations.to_string(),
                s.result.seed.to_string(),
            ]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotes_awkward_names() {
        assert_eq!(field("plain"), "plain");
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
