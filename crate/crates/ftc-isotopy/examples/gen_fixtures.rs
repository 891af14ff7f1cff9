//! Regenerate the `.graph` fixture files under `fixtures/`.
//!
//! Run from the repository root:
//!
//! ```text
//! cargo run --example gen_fixtures
//! ```

use std::path::Path;

use ftc_isotopy::cli_io::write_graph;
use ftc_isotopy::fixtures;
use ftc_isotopy::graph_core::EmbeddedGraph;

fn main() {
    let dir = Path::new("fixtures");
    std::fs::create_dir_all(dir).expect("create fixtures dir");
    let mut write = |name: &str, g: &EmbeddedGraph| {
        let path = dir.join(name);
        write_graph(&path, g).expect("write fixture");
        println!("wrote {}", path.display());
    };
    write("square.graph", &EmbeddedGraph::from_loop(fixtures::square(1.0)));
    write("circle64.graph", &fixtures::circle_graph(64, 1.0));
    write("circle1024.graph", &fixtures::circle_graph(1024, 1.0));
    write("trefoil.graph", &EmbeddedGraph::from_loop(fixtures::trefoil(256)));
    write(
        "trefoil_perturbed.graph",
        &fixtures::perturb(&EmbeddedGraph::from_loop(fixtures::trefoil(256)), 7, 1e-4),
    );
    write("figure_eight.graph", &EmbeddedGraph::from_loop(fixtures::figure_eight(256)));
    write("hopf.graph", &fixtures::hopf(128));
    write("theta.graph", &fixtures::straight_theta());
}
