//! Plain-text snapshot export, one node per line.

use std::fmt::Write as _;

use crate::geometry::GeometryState;

/// Renders a snapshot. `w` may be absent, in which case the column holds `nan`.
pub fn render_snapshot(gs: &GeometryState, w: Option<&[f64]>) -> String {
    let mut s = String::new();
    let sizes: Vec<String> = gs.domain.sizes().iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "# m={} n={} sizes={} time={:.17e}", gs.m, gs.n, sizes.join("x"), gs.time);
    let mut cols: Vec<String> = (0..gs.m).map(|a| format!("i{a}")).collect();
    cols.extend((0..gs.m).map(|a| format!("x{a}")));
    cols.extend((0..gs.n).map(|a| format!("F{a}")));
    cols.extend(["A2", "H2", "Rperp2", "w"].map(String::from));
    let _ = writeln!(s, "# {}", cols.join(" "));
    for node in 0..gs.node_count() {
        let mut line: Vec<String> = gs.domain.multi_index(node).iter().map(|i| i.to_string()).collect();
        line.extend(gs.domain.coords(node).iter().map(|x| format!("{x:.17e}")));
        line.extend(gs.point(node).iter().map(|x| format!("{x:.17e}")));
        for v in [gs.norm_a_sq[node], gs.norm_h_sq[node], gs.norm_rperp_sq[node]] {
            line.push(format!("{v:.17e}"));
        }
        line.push(w.map_or("nan".to_string(), |w| format!("{:.17e}", w[node])));
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}
