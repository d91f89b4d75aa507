//! Network instances, flows and their evaluation.

mod flow;
mod instance;
mod paths;

pub use flow::{integrate_pieces, potential_of_loads, total_externality_of_loads, Flow};
pub use flow::{class_map, edge_map};
pub use instance::{Commodity, Edge, ExternalityRate, Instance, Piece};
pub use paths::{enumerate_paths, path_label, verify_wardrop, WardropCheck, WardropWitness, DEFAULT_PATH_CAP};


#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;
    use crate::arith::{rat, Rational};
    use crate::error::Error;

    fn flow_of(inst: &Instance, rows: &[&[(&str, Rational)]]) -> Flow {
        let mut v = vec![vec![rat(0, 1); inst.edges.len()]; inst.commodities.len()];
        for (i, row) in rows.iter().enumerate() {
            for (id, x) in row.iter() {
                v[i][inst.edge_index(id).unwrap()] = x.clone();
            }
        }
        Flow::new(inst, v).unwrap()
    }

    fn zigzag(b: &Instance) -> Flow {
        flow_of(b, &[&[("sv", rat(2, 1)), ("vw", rat(2, 1)), ("wt", rat(2, 1))]])
    }

    fn split(b: &Instance) -> Flow {
        flow_of(b, &[&[("sv", rat(1, 1)), ("vt", rat(1, 1)), ("sw", rat(1, 1)), ("wt", rat(1, 1))]])
    }

    #[test]
    fn edge_cost_examples() {
        let b = braess();
        assert_eq!(b.edge_cost(0, &rat(2, 1), &[rat(1, 1)]).unwrap(), rat(2, 1));
        let p = pigou();
        assert_eq!(p.edge_cost(0, &rat(1, 2), &[rat(1, 1)]).unwrap(), rat(3, 2));
        assert!(matches!(p.edge_cost(0, &rat(-1, 1), &[rat(0, 1)]), Err(Error::NegativeLoad(_))));
    }

    #[test]
    fn piece_lookup_is_half_open() {
        let e = Edge {
            id: "e".into(),
            tail: 0,
            head: 1,
            pieces: vec![
                Piece { breakpoint: rat(0, 1), slope: rat(1, 1), offset: rat(0, 1) },
                Piece { breakpoint: rat(1, 1), slope: rat(3, 1), offset: rat(-2, 1) },
            ],
            externality: vec![],
        };
        assert_eq!(e.piece_index(&rat(1, 2)), 0);
        assert_eq!(e.piece_index(&rat(1, 1)), 1);
        assert_eq!(e.travel_time(&rat(1, 1)), rat(1, 1));
        assert_eq!(e.travel_time(&rat(2, 1)), rat(4, 1));
    }

    #[test]
    fn braess_totals() {
        let b = braess();
        assert_eq!(zigzag(&b).total_externality(&b), vec![rat(8, 1)]);
        assert_eq!(split(&b).total_externality(&b), vec![rat(7, 1)]);
        assert_eq!(total_externality_of_loads(&b, &vec![rat(0, 1); 5]), vec![rat(0, 1)]);
    }

    #[test]
    fn potentials() {
        let t = single_edge();
        assert_eq!(potential_of_loads(&t, &[rat(1, 1)], &[rat(0, 1)]), rat(1, 2));
        let p = pigou();
        let x = flow_of(&p, &[&[("e1", rat(1, 2)), ("e2", rat(1, 2))]]);
        assert_eq!(x.potential(&p, &[rat(0, 1)]), rat(3, 4));
        assert_eq!(x.potential(&p, &[rat(1, 1)]), rat(5, 4));
        // Offsets below zero never pass validation, so build the pieces directly.
        let pieces = [
            Piece { breakpoint: rat(0, 1), slope: rat(1, 1), offset: rat(0, 1) },
            Piece { breakpoint: rat(1, 1), slope: rat(2, 1), offset: rat(-1, 1) },
        ];
        assert_eq!(integrate_pieces(&pieces, &rat(2, 1)), rat(5, 2));
        assert_eq!(integrate_pieces(&pieces, &rat(1, 1)), rat(1, 2));
        assert_eq!(integrate_pieces(&pieces, &rat(0, 1)), rat(0, 1));
    }

    #[test]
    fn conservation_is_enforced() {
        let p = pigou();
        let bad = vec![vec![rat(1, 2), rat(1, 3)]];
        assert!(matches!(Flow::new(&p, bad), Err(Error::InvalidFlow(_))));
        let neg = vec![vec![rat(3, 2), rat(-1, 2)]];
        assert!(matches!(Flow::new(&p, neg), Err(Error::InvalidFlow(_))));
    }

    #[test]
    fn flow_json_round_trip() {
        let b = braess();
        let x = split(&b);
        let doc = serde_json::Value::Object(x.to_json(&b));
        assert_eq!(doc["G"]["co2"], "7");
        assert_eq!(doc["edge_loads"]["vw"], "0");
        assert_eq!(Flow::from_json(&b, &doc).unwrap(), x);
    }

    #[test]
    fn path_enumeration() {
        let b = braess();
        let labels: Vec<String> =
            enumerate_paths(&b, 0, 10).unwrap().iter().map(|p| path_label(&b, p)).collect();
        assert_eq!(labels, ["sv-vt", "sv-vw-wt", "sw-wt"]);
        assert_eq!(enumerate_paths(&single_edge(), 0, 10).unwrap().len(), 1);
        assert!(matches!(enumerate_paths(&b, 0, 2), Err(Error::PathCapExceeded { cap: 2 })));
        let grid = Instance::from_json_str(
            r#"{"nodes":["s","a","b","t"],"externalities":[],
                "edges":[
                  {"id":"sa","tail":"s","head":"a","pieces":[{"breakpoint":"0","slope":"1","offset":"0"}]},
                  {"id":"sb","tail":"s","head":"b","pieces":[{"breakpoint":"0","slope":"1","offset":"0"}]},
                  {"id":"at","tail":"a","head":"t","pieces":[{"breakpoint":"0","slope":"1","offset":"0"}]},
                  {"id":"bt","tail":"b","head":"t","pieces":[{"breakpoint":"0","slope":"1","offset":"0"}]}],
                "commodities":[{"source":"s","target":"t","demand":"1"}]}"#,
        )
        .unwrap();
        assert_eq!(enumerate_paths(&grid, 0, 10).unwrap().len(), 2);
    }

    #[test]
    fn wardrop_oracle_on_braess() {
        let b = braess();
        let z = zigzag(&b);
        let at_one = verify_wardrop(&b, &z, &[rat(1, 1)], 100).unwrap();
        assert!(at_one.holds);
        assert_eq!(at_one.min_costs, vec![rat(17, 4)]);
        let at_tenth = verify_wardrop(&b, &z, &[rat(1, 10)], 100).unwrap();
        assert!(!at_tenth.holds);
        let w = at_tenth.witness.unwrap();
        assert_eq!(path_label(&b, &w.used_path), "sv-vw-wt");
        assert_eq!(w.used_cost, rat(13, 20));
        assert_eq!(w.better_cost, rat(9, 20));
        assert!(verify_wardrop(&b, &split(&b), &[rat(1, 10)], 100).unwrap().holds);
        let t = single_edge();
        let x = flow_of(&t, &[&[("e", rat(3, 1))]]);
        assert!(verify_wardrop(&t, &x, &[rat(5, 1)], 100).unwrap().holds);
    }

    #[test]
    fn instance_json_round_trip_and_errors() {
        let b = braess();
        let again = Instance::from_json_str(&b.to_json().to_string()).unwrap();
        assert_eq!(again, b);
        let err = Instance::from_json_str(include_str!("../../../../fixtures/bad-breakpoints.json")).unwrap_err();
        match err {
            Error::InvalidInstance { path, .. } => assert_eq!(path, "edges[0].pieces[2].breakpoint"),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"nodes":["s","t"],"edges":[],"commodities":[{"source":"s","target":"x","demand":"1"}]}"#;
        assert!(matches!(Instance::from_json_str(unknown), Err(Error::InvalidInstance { .. })));
        let unreachable = r#"{"nodes":["s","t"],"edges":[],"commodities":[{"source":"s","target":"t","demand":"1"}]}"#;
        assert!(matches!(Instance::from_json_str(unreachable), Err(Error::InvalidInstance { .. })));
    }

    #[test]
    fn unused_fixtures_parse() {
        for inst in [step_toll(), step_toll_perturbed(), step_toll_zero_g(), two_commodity(), two_class()] {
            inst.validate().unwrap();
        }
    }
}
